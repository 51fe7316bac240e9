"""Diffusion noise schedule and the closed-form forward process.

Images are real-valued arrays normalized to [-1, 1]. The forward process
mixes a clean image with Gaussian noise at a per-timestep level:

    x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from promptfill.errors import InvalidConfigError


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-timestep noise levels for a T-step diffusion.

    ``alpha_bars[t]`` is the cumulative product of ``1 - betas[s]`` for
    s <= t; it is strictly decreasing in t.
    """

    T: int
    betas: np.ndarray
    alpha_bars: np.ndarray

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "beta_start": float(self.betas[0]),
            "beta_end": float(self.betas[-1]),
            "kind": "linear",
        }


def build_schedule(
    T: int,
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
    kind: str = "linear",
) -> NoiseSchedule:
    """Build a T-step noise schedule.

    Only the linear beta ramp is supported. Raises InvalidConfigError for
    T < 2 or betas outside (0, 1).
    """
    if kind != "linear":
        raise InvalidConfigError(f"unsupported schedule kind: {kind!r}")
    if not isinstance(T, (int, np.integer)) or T < 2:
        raise InvalidConfigError(f"T must be an integer >= 2, got {T!r}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise InvalidConfigError(
            f"betas must satisfy 0 < beta_start <= beta_end < 1, "
            f"got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bars = np.cumprod(1.0 - betas)
    return NoiseSchedule(T=int(T), betas=betas, alpha_bars=alpha_bars)


def add_noise(x0, t: int, eps, sched: NoiseSchedule):
    """Forward-noise a clean image to timestep t.

    Returns ``sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps`` elementwise, where
    ``ab_t = sched.alpha_bars[t]``. Works on numpy arrays and torch
    tensors alike; x0 and eps must have identical shapes.
    """
    if not (0 <= t < sched.T):
        raise InvalidConfigError(f"timestep {t} outside [0, {sched.T})")
    if tuple(x0.shape) != tuple(eps.shape):
        raise ValueError(f"shape mismatch: x0 {tuple(x0.shape)} vs eps {tuple(eps.shape)}")
    ab = float(sched.alpha_bars[t])
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps
