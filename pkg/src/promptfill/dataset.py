"""Synthetic shapes corpus: scenes, captions, and task routing.

Scenes are 32x32 RGB images in [-1, 1] (channel-first) with one or two
non-overlapping colored primitives over a solid or vertically graded
background. Every object carries its exact segmentation, tight bounding
box, and the caption "a <color> <shape>". Each training example routes
to one of four tasks: context fill, object inpainting, shape-guided
inpainting, or whole-frame text-to-image (the 20% special case).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from promptfill.errors import PlacementError
from promptfill.maskgen import BrushParams, bbox_mask, make_mask_pair, mask_to_u8, random_freeform_mask
from promptfill.textcond import COLOR_WORDS, SHAPE_WORDS, TextConditioner

# sRGB anchors for object colors and the muted background palette
OBJECT_COLORS: dict[str, tuple[int, int, int]] = {
    "red": (220, 50, 50),
    "green": (60, 180, 75),
    "blue": (65, 105, 225),
    "yellow": (240, 220, 60),
}
BACKGROUND_COLORS: tuple[tuple[int, int, int], ...] = (
    (40, 40, 40),
    (200, 200, 200),
    (120, 120, 120),
    (105, 85, 60),
    (60, 95, 110),
)

TASKS = ("ctxt", "obj", "shape", "t2i")
T2I_PROB = 0.2

# seed offsets keeping train / eval / extractor scene streams disjoint
EVAL_SEED_BASE = 10_000_000
EXTRACTOR_SEED_BASE = 20_000_000


@dataclass(frozen=True)
class SceneSpec:
    size: int = 32
    min_radius: int = 4
    max_radius: int = 10
    max_objects: int = 2
    gradient_prob: float = 0.5
    max_place_tries: int = 100


@dataclass
class SceneObject:
    shape: str
    color: str
    segmentation: np.ndarray
    bbox: tuple[int, int, int, int]
    caption: str


@dataclass
class Scene:
    image: np.ndarray  # (3, H, W) float32 in [-1, 1]
    objects: list[SceneObject]
    background: dict
    seed: int | None = None


@dataclass
class TrainingExample:
    image: np.ndarray
    mask: np.ndarray
    prompt_tokens: np.ndarray
    task: str
    alpha: float | None = None
    caption: str | None = None
    mask_meta: dict = field(default_factory=dict)


def _to_unit(rgb: tuple[int, int, int]) -> np.ndarray:
    return np.asarray(rgb, dtype=np.float32) / 127.5 - 1.0


def _shape_segmentation(shape: str, cx: int, cy: int, r: int, size: int) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    if shape == "circle":
        inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    elif shape == "square":
        inside = (np.abs(xs - cx) <= r) & (np.abs(ys - cy) <= r)
    elif shape == "triangle":
        # upward isoceles: apex (cx, cy-r), base corners (cx +- r, cy+r)
        rel_y = ys - (cy - r)
        inside = (rel_y >= 0) & (rel_y <= 2 * r) & (np.abs(xs - cx) * 2 * r <= rel_y * r)
    else:
        raise ValueError(f"unknown shape {shape!r}")
    return inside.astype(np.uint8)


def tight_bbox(segmentation: np.ndarray) -> tuple[int, int, int, int]:
    """Half-open (x0, y0, x1, y1) of the 1-pixels."""
    ys, xs = np.nonzero(segmentation)
    if len(ys) == 0:
        raise ValueError("empty segmentation")
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def _render_background(rng: np.random.Generator, spec: SceneSpec) -> tuple[np.ndarray, dict]:
    color_id = int(rng.integers(0, len(BACKGROUND_COLORS)))
    base = _to_unit(BACKGROUND_COLORS[color_id])
    if rng.random() < spec.gradient_prob:
        ramp = np.linspace(-0.25, 0.25, spec.size, dtype=np.float32)
        img = np.clip(base[:, None, None] + ramp[None, :, None], -1.0, 1.0)
        img = np.broadcast_to(img, (3, spec.size, spec.size)).astype(np.float32).copy()
        meta = {"style": "vertical-gradient", "color_id": color_id}
    else:
        img = np.zeros((3, spec.size, spec.size), dtype=np.float32) + base[:, None, None]
        meta = {"style": "solid", "color_id": color_id}
    return img, meta


def _boxes_disjoint(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return ax1 <= bx0 or bx1 <= ax0 or ay1 <= by0 or by1 <= ay0


def generate_scene(rng: np.random.Generator, spec: SceneSpec = SceneSpec()) -> Scene:
    """Render one scene; deterministic given the rng state.

    Raises PlacementError when non-overlapping placement fails within the
    retry budget.
    """
    image, bg_meta = _render_background(rng, spec)
    n_objects = int(rng.integers(1, spec.max_objects + 1))
    objects: list[SceneObject] = []
    for _ in range(n_objects):
        placed = False
        for _ in range(spec.max_place_tries):
            shape = str(rng.choice(SHAPE_WORDS))
            color = str(rng.choice(COLOR_WORDS))
            r = int(rng.integers(spec.min_radius, spec.max_radius + 1))
            cx = int(rng.integers(r, spec.size - r))
            cy = int(rng.integers(r, spec.size - r))
            seg = _shape_segmentation(shape, cx, cy, r, spec.size)
            box = tight_bbox(seg)
            if all(_boxes_disjoint(box, o.bbox) for o in objects):
                image[:, seg == 1] = _to_unit(OBJECT_COLORS[color])[:, None]
                objects.append(
                    SceneObject(
                        shape=shape,
                        color=color,
                        segmentation=seg,
                        bbox=box,
                        caption=f"a {color} {shape}",
                    )
                )
                placed = True
                break
        if not placed:
            raise PlacementError(f"could not place object {len(objects) + 1} of {n_objects}")
    return Scene(image=image, objects=objects, background=bg_meta)


def scene_stream(seed: int, spec: SceneSpec = SceneSpec()):
    """Infinite deterministic scene generator; placement failures are
    skipped (the rng state still advances, keeping the stream seeded)."""
    rng = np.random.default_rng(seed)
    while True:
        try:
            yield generate_scene(rng, spec)
        except PlacementError:
            continue


def heldout_scenes(n: int = 2000, spec: SceneSpec = SceneSpec(), seed: int = EVAL_SEED_BASE) -> list[Scene]:
    """The seed-pinned evaluation set, disjoint from training streams."""
    stream = scene_stream(seed, spec)
    return [next(stream) for _ in range(n)]


def draw_task(rng: np.random.Generator, t2i_prob: float = T2I_PROB) -> str:
    """Route one example: t2i with probability t2i_prob, else uniformly
    one of the three main tasks."""
    if rng.random() < t2i_prob:
        return "t2i"
    return str(rng.choice(("ctxt", "obj", "shape")))


def make_training_example(
    scene: Scene,
    rng: np.random.Generator,
    cond: TextConditioner,
    t2i_prob: float = T2I_PROB,
    brush: BrushParams = BrushParams(),
) -> TrainingExample:
    """Build the mask / prompt / alpha for one routed training example."""
    h, w = scene.image.shape[1:]
    task = draw_task(rng, t2i_prob)
    if task == "ctxt":
        mask = random_freeform_mask(h, w, rng, brush)
        tokens = cond.compose_prompt(None, "P_ctxt", mode="alone")
        return TrainingExample(scene.image, mask, tokens, task)
    obj = scene.objects[int(rng.integers(0, len(scene.objects)))]
    if task == "obj":
        mask = bbox_mask(obj.bbox, h, w)
        tokens = cond.compose_prompt(obj.caption, "P_obj", mode="suffix")
        return TrainingExample(
            scene.image, mask, tokens, task, caption=obj.caption,
            mask_meta={"bbox": list(obj.bbox)},
        )
    if task == "shape":
        pair = make_mask_pair(obj.segmentation, rng)
        tokens = cond.compose_prompt(obj.caption, "P_shape", mode="suffix")
        return TrainingExample(
            scene.image,
            pair.dilated,
            tokens,
            task,
            alpha=pair.alpha,
            caption=obj.caption,
            mask_meta={"k": pair.k, "it": pair.it},
        )
    # text-to-image: mask everything, plain caption
    mask = np.ones((h, w), dtype=np.uint8)
    tokens = cond.tokenize(obj.caption)
    return TrainingExample(scene.image, mask, tokens, task, caption=obj.caption)


def export_dataset(
    out_dir: str | Path,
    n: int,
    seed: int,
    cond: TextConditioner,
    spec: SceneSpec = SceneSpec(),
) -> Path:
    """Write images, masks, and a JSON-lines manifest to disk."""
    from promptfill.images import save_image_png, save_mask_png

    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.jsonl"
    stream = scene_stream(seed, spec)
    rng = np.random.default_rng(seed + 1)
    with open(manifest_path, "w") as fh:
        for i in range(n):
            scene = next(stream)
            ex = make_training_example(scene, rng, cond)
            image_rel = f"images/{i:06d}.png"
            mask_rel = f"masks/{i:06d}.png"
            save_image_png(out / image_rel, scene.image)
            save_mask_png(out / mask_rel, ex.mask)
            bbox = None
            if ex.task == "obj":
                for o in scene.objects:
                    if o.caption == ex.caption:
                        bbox = list(o.bbox)
                        break
            record = {
                "id": i,
                "image_path": image_rel,
                "mask_path": mask_rel,
                "caption": ex.caption,
                "task": ex.task,
                "bbox": bbox,
                "k": ex.mask_meta.get("k"),
                "it": ex.mask_meta.get("it"),
                "alpha": ex.alpha,
                "seed": seed,
            }
            fh.write(json.dumps(record) + "\n")
    return manifest_path
