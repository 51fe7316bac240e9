"""Caption tokenization, the trained text encoder, and task prompts.

Captions come from a closed grammar ("a <color> <shape>"). Three named
task prompts (P_ctxt, P_obj, P_shape) are trainable pseudo-token
sequences registered on top of the vocabulary; composing one as a suffix
to a caption (or alone) steers the denoiser toward one inpainting task.
Task-prompt pairs can be linearly interpolated after encoding to control
shape fitting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from promptfill.errors import InvalidConfigError, VocabularyError

PAD, BOS, EOS = "<pad>", "<bos>", "<eos>"

COLOR_WORDS = ("red", "green", "blue", "yellow")
SHAPE_WORDS = ("circle", "square", "triangle")
CAPTION_WORDS = ("a",) + COLOR_WORDS + SHAPE_WORDS

TASK_PROMPT_NAMES = ("P_ctxt", "P_obj", "P_shape")

EMBED_INIT_STD = 0.02


class Vocabulary:
    """Dense, stable word -> id mapping, including task pseudo-tokens."""

    def __init__(self, words: tuple[str, ...] = CAPTION_WORDS):
        self._words: list[str] = [PAD, BOS, EOS, *words]
        self._ids: dict[str, int] = {w: i for i, w in enumerate(self._words)}

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def id(self, word: str) -> int:
        try:
            return self._ids[word]
        except KeyError:
            raise VocabularyError(f"word {word!r} not in vocabulary") from None

    def word(self, idx: int) -> str:
        return self._words[idx]

    def add(self, word: str) -> int:
        if word in self._ids:
            raise VocabularyError(f"word {word!r} already registered")
        self._ids[word] = len(self._words)
        self._words.append(word)
        return self._ids[word]

    def to_json(self) -> str:
        return json.dumps({"words": self._words})

    @classmethod
    def from_json(cls, payload: str) -> "Vocabulary":
        words = json.loads(payload)["words"]
        vocab = cls.__new__(cls)
        vocab._words = list(words)
        vocab._ids = {w: i for i, w in enumerate(words)}
        return vocab


@dataclass
class TaskPrompt:
    """A named trainable pseudo-token sequence."""

    name: str
    token_count: int
    token_ids: list[int]
    embeddings: nn.Parameter


class TextConditioner(nn.Module):
    """Embedding tables plus a small sequence encoder.

    Ordinary tokens come from a base table, task pseudo-tokens from their
    prompt's parameter block; a 2-layer transformer with learned position
    embeddings produces the (L, cond_dim) conditioning sequence.
    """

    def __init__(
        self,
        cond_dim: int = 64,
        seq_len: int = 24,
        num_layers: int = 2,
        num_heads: int = 4,
        seed: int = 0,
    ):
        super().__init__()
        if cond_dim % num_heads != 0:
            raise InvalidConfigError("cond_dim must be divisible by num_heads")
        self.cond_dim = cond_dim
        self.seq_len = seq_len
        self.vocab = Vocabulary()
        self.prompts: dict[str, TaskPrompt] = {}

        torch.manual_seed(seed)
        self.base_table = nn.Parameter(
            torch.randn(len(self.vocab), cond_dim) * EMBED_INIT_STD
        )
        self.pos_table = nn.Parameter(torch.randn(seq_len, cond_dim) * EMBED_INIT_STD)
        layer = nn.TransformerEncoderLayer(
            d_model=cond_dim,
            nhead=num_heads,
            dim_feedforward=4 * cond_dim,
            dropout=0.0,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=num_layers)
        self._prompt_params = nn.ParameterDict()

    # ------------------------------------------------------------------
    # Task prompts

    def register_task_prompt(self, name: str, token_count: int = 10, seed: int = 0) -> TaskPrompt:
        """Register a trainable prompt initialized from a seeded Gaussian."""
        if name in self.prompts:
            raise VocabularyError(f"task prompt {name!r} already registered")
        if token_count < 1:
            raise InvalidConfigError("token_count must be >= 1")
        token_ids = [self.vocab.add(f"<{name}:{i}>") for i in range(token_count)]
        g = torch.Generator().manual_seed(seed)
        emb = nn.Parameter(torch.randn(token_count, self.cond_dim, generator=g) * EMBED_INIT_STD)
        self._prompt_params[name] = emb
        prompt = TaskPrompt(name=name, token_count=token_count, token_ids=token_ids, embeddings=emb)
        self.prompts[name] = prompt
        return prompt

    def register_default_prompts(self, token_count: int = 10, seed: int = 0) -> None:
        for i, name in enumerate(TASK_PROMPT_NAMES):
            self.register_task_prompt(name, token_count=token_count, seed=seed + 101 * (i + 1))

    def prompt_param(self, name: str) -> nn.Parameter:
        return self._prompt_params[name]

    # ------------------------------------------------------------------
    # Tokenization

    def tokenize(self, text: str) -> np.ndarray:
        """Token ids with begin/end markers, padded/truncated to seq_len."""
        words = text.split() if text else []
        ids = [self.vocab.id(BOS)] + [self.vocab.id(w) for w in words] + [self.vocab.id(EOS)]
        return self._pad(ids)

    def compose_prompt(self, caption: str | None, task: str, mode: str) -> np.ndarray:
        """Caption tokens with a task-prompt suffix, or the prompt alone.

        suffix: [BOS, caption..., task tokens..., EOS]; an absent caption
        leaves only the task tokens. alone: caption must be None.
        """
        if task not in self.prompts:
            raise VocabularyError(f"unknown task prompt {task!r}")
        prompt = self.prompts[task]
        if mode == "alone":
            if caption is not None:
                raise InvalidConfigError("mode=alone does not accept a caption")
            body: list[int] = list(prompt.token_ids)
        elif mode == "suffix":
            caption_words = caption.split() if caption else []
            body = [self.vocab.id(w) for w in caption_words] + list(prompt.token_ids)
        else:
            raise InvalidConfigError(f"unknown compose mode {mode!r}")
        ids = [self.vocab.id(BOS)] + body + [self.vocab.id(EOS)]
        if len(ids) > self.seq_len:
            raise InvalidConfigError(
                f"composed sequence length {len(ids)} exceeds seq_len {self.seq_len}"
            )
        return self._pad(ids)

    def _pad(self, ids: list[int]) -> np.ndarray:
        pad_id = self.vocab.id(PAD)
        ids = ids[: self.seq_len]
        out = np.full(self.seq_len, pad_id, dtype=np.int64)
        out[: len(ids)] = ids
        return out

    # ------------------------------------------------------------------
    # Encoding

    def _full_table(self) -> torch.Tensor:
        tables = [self.base_table]
        tables += [self.prompts[n].embeddings for n in self.prompts]
        return torch.cat(tables, dim=0)

    def encode(self, tokens) -> torch.Tensor:
        """Token ids -> conditioning sequence (L, cond_dim) or batched."""
        ids = torch.as_tensor(np.asarray(tokens), dtype=torch.long)
        squeeze = ids.ndim == 1
        if squeeze:
            ids = ids[None]
        table = self._full_table()
        if int(ids.max()) >= table.shape[0] or int(ids.min()) < 0:
            raise VocabularyError("token id outside the embedding table")
        x = table[ids] + self.pos_table[None, : ids.shape[1]]
        out = self.encoder(x)
        return out[0] if squeeze else out

    # ------------------------------------------------------------------
    # Persistence

    def export_state(self) -> dict:
        return {
            "cond_dim": self.cond_dim,
            "seq_len": self.seq_len,
            "vocab": self.vocab.to_json(),
            "prompts": {
                n: {"token_count": p.token_count, "token_ids": p.token_ids}
                for n, p in self.prompts.items()
            },
        }


def interpolate_embeddings(
    e_ctxt: torch.Tensor, e_shape: torch.Tensor, alpha: float
) -> torch.Tensor:
    """Convex combination (1 - alpha) * e_ctxt + alpha * e_shape."""
    if not (0.0 <= alpha <= 1.0):
        raise InvalidConfigError(f"alpha must be in [0, 1], got {alpha}")
    if e_ctxt.shape != e_shape.shape:
        raise ValueError(f"shape mismatch: {tuple(e_ctxt.shape)} vs {tuple(e_shape.shape)}")
    return (1.0 - alpha) * e_ctxt + alpha * e_shape


def caption_grammar() -> dict:
    """The closed caption grammar, as served to UIs for validation."""
    return {
        "template": "a <color> <shape>",
        "colors": list(COLOR_WORDS),
        "shapes": list(SHAPE_WORDS),
        "captions": [f"a {c} {s}" for c in COLOR_WORDS for s in SHAPE_WORDS],
    }
