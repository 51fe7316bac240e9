"""Noise-prediction UNet with masked-image and mask input channels.

The first convolution accepts the noisy image concatenated with the
masked image and the binary mask (2 * image_channels + 1 channels in
total). Text conditioning enters through cross-attention over the token
embedding sequence at the configured resolutions; the timestep embedding
is added inside every residual block.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from promptfill.errors import InvalidConfigError


@dataclass(frozen=True)
class DenoiserConfig:
    image_size: int = 32
    image_channels: int = 3
    base_width: int = 32
    channel_mults: tuple[int, ...] = (1, 2, 4)
    num_res_blocks: int = 1
    attention_resolutions: tuple[int, ...] = (16, 8)
    cond_dim: int = 64
    time_embed_dim: int = 128
    num_heads: int = 4
    num_groups: int = 8

    @property
    def in_channels(self) -> int:
        # noisy image + masked image + mask
        return 2 * self.image_channels + 1

    def validate(self) -> None:
        factor = 2 ** (len(self.channel_mults) - 1)
        if self.image_size % factor != 0:
            raise InvalidConfigError(
                f"image_size {self.image_size} not divisible by downsampling factor {factor}"
            )
        if self.base_width % self.num_groups != 0:
            raise InvalidConfigError("base_width must be divisible by num_groups")
        for res in self.attention_resolutions:
            if self.image_size % res != 0:
                raise InvalidConfigError(f"attention resolution {res} does not divide image_size")


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    freqs = freqs.to(t.device)
    args = t.float()[:, None] * freqs[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int, groups: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = nn.GroupNorm(groups, out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(t_emb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention(nn.Module):
    """Spatial queries attend over the text token sequence."""

    def __init__(self, channels: int, cond_dim: int, heads: int, groups: int):
        super().__init__()
        self.norm = nn.GroupNorm(groups, channels)
        self.heads = heads
        self.q = nn.Linear(channels, channels)
        self.k = nn.Linear(cond_dim, channels)
        self.v = nn.Linear(cond_dim, channels)
        self.out = nn.Linear(channels, channels)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        b, c, hh, ww = x.shape
        h = self.norm(x).reshape(b, c, hh * ww).transpose(1, 2)
        q = self.q(h).reshape(b, -1, self.heads, c // self.heads).transpose(1, 2)
        k = self.k(cond).reshape(b, -1, self.heads, c // self.heads).transpose(1, 2)
        v = self.v(cond).reshape(b, -1, self.heads, c // self.heads).transpose(1, 2)
        attn = F.scaled_dot_product_attention(q, k, v)
        attn = attn.transpose(1, 2).reshape(b, hh * ww, c)
        out = self.out(attn).transpose(1, 2).reshape(b, c, hh, ww)
        return x + out


class SelfAttention(nn.Module):
    def __init__(self, channels: int, heads: int, groups: int):
        super().__init__()
        self.norm = nn.GroupNorm(groups, channels)
        self.heads = heads
        self.qkv = nn.Linear(channels, channels * 3)
        self.out = nn.Linear(channels, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, hh, ww = x.shape
        h = self.norm(x).reshape(b, c, hh * ww).transpose(1, 2)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        shape = (b, hh * ww, self.heads, c // self.heads)
        q, k, v = (z.reshape(shape).transpose(1, 2) for z in (q, k, v))
        attn = F.scaled_dot_product_attention(q, k, v)
        attn = attn.transpose(1, 2).reshape(b, hh * ww, c)
        return x + self.out(attn).transpose(1, 2).reshape(b, c, hh, ww)


class Downsample(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, stride=2, padding=1)

    def forward(self, x):
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, padding=1)

    def forward(self, x):
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class Denoiser(nn.Module):
    """UNet epsilon-predictor over the extended 7-channel input."""

    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        w, groups = cfg.base_width, cfg.num_groups
        time_dim = cfg.time_embed_dim

        self.time_mlp = nn.Sequential(
            nn.Linear(time_dim, time_dim), nn.SiLU(), nn.Linear(time_dim, time_dim)
        )
        self.conv_in = nn.Conv2d(cfg.in_channels, w, 3, padding=1)

        self.down_blocks = nn.ModuleList()
        self.downs = nn.ModuleList()
        chans = [w]
        ch = w
        res = cfg.image_size
        for level, mult in enumerate(cfg.channel_mults):
            out_ch = w * mult
            blocks = nn.ModuleList()
            for _ in range(cfg.num_res_blocks):
                entry = nn.ModuleDict({"res": ResBlock(ch, out_ch, time_dim, groups)})
                if res in cfg.attention_resolutions:
                    entry["xattn"] = CrossAttention(out_ch, cfg.cond_dim, cfg.num_heads, groups)
                blocks.append(entry)
                ch = out_ch
                chans.append(ch)
            self.down_blocks.append(blocks)
            if level < len(cfg.channel_mults) - 1:
                self.downs.append(Downsample(ch))
                chans.append(ch)
                res //= 2

        self.mid_res1 = ResBlock(ch, ch, time_dim, groups)
        self.mid_self = SelfAttention(ch, cfg.num_heads, groups)
        self.mid_xattn = CrossAttention(ch, cfg.cond_dim, cfg.num_heads, groups)
        self.mid_res2 = ResBlock(ch, ch, time_dim, groups)

        self.up_blocks = nn.ModuleList()
        self.ups = nn.ModuleList()
        for level, mult in reversed(list(enumerate(cfg.channel_mults))):
            out_ch = w * mult
            blocks = nn.ModuleList()
            for _ in range(cfg.num_res_blocks + 1):
                skip_ch = chans.pop()
                entry = nn.ModuleDict({"res": ResBlock(ch + skip_ch, out_ch, time_dim, groups)})
                if res in cfg.attention_resolutions:
                    entry["xattn"] = CrossAttention(out_ch, cfg.cond_dim, cfg.num_heads, groups)
                blocks.append(entry)
                ch = out_ch
            self.up_blocks.append(blocks)
            if level > 0:
                self.ups.append(Upsample(ch))
                res *= 2

        self.norm_out = nn.GroupNorm(groups, ch)
        self.conv_out = nn.Conv2d(ch, cfg.image_channels, 3, padding=1)

    def forward(self, x_in: torch.Tensor, t, cond: torch.Tensor) -> torch.Tensor:
        """Predict the noise residual for the noisy image inside x_in.

        x_in is concat(noisy image, masked image, mask) along channels;
        cond is the (B, L, cond_dim) token embedding sequence. Returns an
        array shaped like the noisy image.
        """
        if x_in.shape[1] != self.cfg.in_channels:
            raise InvalidConfigError(
                f"expected {self.cfg.in_channels} input channels, got {x_in.shape[1]}"
            )
        if cond.ndim == 2:
            cond = cond[None]
        t = torch.as_tensor(t, device=x_in.device)
        if t.ndim == 0:
            t = t.expand(x_in.shape[0])
        t_emb = self.time_mlp(timestep_embedding(t, self.cfg.time_embed_dim).to(x_in.dtype))

        h = self.conv_in(x_in)
        skips = [h]
        for level, blocks in enumerate(self.down_blocks):
            for entry in blocks:
                h = entry["res"](h, t_emb)
                if "xattn" in entry:
                    h = entry["xattn"](h, cond)
                skips.append(h)
            if level < len(self.downs):
                h = self.downs[level](h)
                skips.append(h)

        h = self.mid_res1(h, t_emb)
        h = self.mid_self(h)
        h = self.mid_xattn(h, cond)
        h = self.mid_res2(h, t_emb)

        for level, blocks in enumerate(self.up_blocks):
            for entry in blocks:
                h = entry["res"](torch.cat([h, skips.pop()], dim=1), t_emb)
                if "xattn" in entry:
                    h = entry["xattn"](h, cond)
            if level < len(self.ups):
                h = self.ups[level](h)

        return self.conv_out(F.silu(self.norm_out(h)))


def init_denoiser(cfg: DenoiserConfig, seed: int) -> Denoiser:
    """Deterministically initialized denoiser; equal (cfg, seed) pairs
    produce bit-identical parameters."""
    cfg.validate()
    torch.manual_seed(seed)
    return Denoiser(cfg)


def parameter_hash(module: nn.Module) -> str:
    """SHA-256 over all parameter bytes, for determinism checks."""
    digest = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        digest.update(name.encode())
        digest.update(p.detach().cpu().numpy().tobytes())
    return digest.hexdigest()
