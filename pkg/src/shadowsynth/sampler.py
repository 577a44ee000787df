"""Randomized darkening-parameter generation.

The proposed scheme draws the reparameterized attenuation tuple from
simple independent priors: l1 and s1 uniform, the channel offsets
dl0 = l0 - l1 and dl2 = l2 - l1 Gaussian with opposite-signed means
(ambient sky light tends to leave red intercepts above blue ones, so
typically l0 > l1 > l2). Tuples whose slope s1 / (1 - l1) exceeds 1 are
rejected and redrawn whole.

Ablation strategies vary one aspect each: fully independent draws, zero
green intercept, identical intercepts, or zero-mean offsets. The
non-affine baselines (power-law exponent, color-jitter matrices) get
their randomness sampled here too, so every strategy is driven by the
same per-item streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .illum import GAMMA_RANGE, SlopeParams

__all__ = [
    "AFFINE_STRATEGIES",
    "FILTER_STRATEGIES",
    "STRATEGIES",
    "SamplerConfig",
    "SamplerError",
    "RawDraw",
    "sample_params",
    "sample_params_ablation",
    "sample_params_traced",
    "sample_gamma_exponent",
    "sample_jitter_matrix",
]

AFFINE_STRATEGIES = (
    "proposed",
    "independent",
    "zero_intercepts",
    "similar_intercepts",
    "non_biased",
)
FILTER_STRATEGIES = ("gamma_correction", "color_jitter", "color_jitter_dark")
STRATEGIES = AFFINE_STRATEGIES + FILTER_STRATEGIES

# Largest representable intercept below 1.
_L_MAX = np.nextafter(1.0, 0.0)


class SamplerError(RuntimeError):
    """Raised when rejection sampling exhausts its resample budget."""


class RawDraw(NamedTuple):
    """Accepted pre-clamp draws; dl0/dl2 are NaN when a strategy skips them."""

    l1: float
    s1: float
    dl0: float
    dl2: float


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "proposed"
    l1_range: tuple[float, float] = (0.0, 0.25)
    s1_range: tuple[float, float] = (0.1, 0.9)
    dl0_mean: float = 0.05
    dl0_std: float = 0.025
    dl2_mean: float = -0.05
    dl2_std: float = 0.025
    gamma_range: tuple[float, float] = GAMMA_RANGE
    max_resamples: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        for name in ("l1_range", "s1_range", "gamma_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy lo < hi, got ({lo}, {hi})")
        if self.dl0_std <= 0.0 or self.dl2_std <= 0.0:
            raise ValueError("Gaussian offset std must be positive")
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be >= 1")


def _draw_attempt(
    cfg: SamplerConfig, strategy: str, rng: np.random.Generator
) -> tuple[float, float, float, float, RawDraw]:
    """One attempt: returns clamped (l0, l1, l2, s1) plus the raw draws."""
    if strategy == "independent":
        l0 = rng.uniform(*cfg.l1_range)
        l1 = rng.uniform(*cfg.l1_range)
        l2 = rng.uniform(*cfg.l1_range)
        s1 = rng.uniform(*cfg.s1_range)
        return l0, l1, l2, s1, RawDraw(l1, s1, np.nan, np.nan)

    if strategy == "similar_intercepts":
        l1 = rng.uniform(*cfg.l1_range)
        s1 = rng.uniform(*cfg.s1_range)
        return l1, l1, l1, s1, RawDraw(l1, s1, np.nan, np.nan)

    # proposed / zero_intercepts / non_biased share the coupled draw:
    # fixed order (l1, s1, dl0, dl2) so streams are reproducible.
    l1 = 0.0 if strategy == "zero_intercepts" else rng.uniform(*cfg.l1_range)
    s1 = rng.uniform(*cfg.s1_range)
    dl0_mean = 0.0 if strategy == "non_biased" else cfg.dl0_mean
    dl2_mean = 0.0 if strategy == "non_biased" else cfg.dl2_mean
    dl0 = rng.normal(dl0_mean, cfg.dl0_std)
    dl2 = rng.normal(dl2_mean, cfg.dl2_std)
    l0 = float(np.clip(l1 + dl0, 0.0, _L_MAX))
    l2 = float(np.clip(l1 + dl2, 0.0, _L_MAX))
    return l0, l1, l2, s1, RawDraw(l1, s1, dl0, dl2)


def _sample(
    cfg: SamplerConfig, strategy: str, rng: np.random.Generator
) -> tuple[SlopeParams, RawDraw]:
    if strategy not in AFFINE_STRATEGIES:
        raise ValueError(
            f"strategy {strategy!r} does not produce slope parameters; "
            "use sample_gamma_exponent / sample_jitter_matrix"
        )
    for _ in range(cfg.max_resamples):
        l0, l1, l2, s1, raw = _draw_attempt(cfg, strategy, rng)
        if s1 / (1.0 - l1) > 1.0:
            continue
        return SlopeParams(l0=l0, l1=l1, l2=l2, s1=s1), raw
    raise SamplerError(
        f"no valid tuple in {cfg.max_resamples} attempts; "
        "l1/s1 ranges make slope <= 1 too unlikely"
    )


def sample_params(cfg: SamplerConfig, rng: np.random.Generator) -> SlopeParams:
    """Draw SlopeParams under the proposed coupled scheme.

    l1 ~ U(l1_range), s1 ~ U(s1_range), dl0 ~ N(dl0_mean, dl0_std),
    dl2 ~ N(dl2_mean, dl2_std); l0/l2 = l1 + offset clamped at 0. The
    whole tuple is redrawn while the slope exceeds 1.
    """
    return _sample(cfg, "proposed", rng)[0]


def sample_params_ablation(cfg: SamplerConfig, rng: np.random.Generator) -> SlopeParams:
    """Strategy-dispatched draw; same slope-rejection rule for every strategy."""
    return _sample(cfg, cfg.strategy, rng)[0]


def sample_params_traced(
    cfg: SamplerConfig, rng: np.random.Generator
) -> tuple[SlopeParams, RawDraw]:
    """Like `sample_params_ablation` but also returns the accepted raw draws.

    Used by the statistical checks, which need the Gaussian offsets
    before clamping at zero.
    """
    return _sample(cfg, cfg.strategy, rng)


def sample_gamma_exponent(cfg: SamplerConfig, rng: np.random.Generator) -> float:
    """Exponent for the power-law darkening baseline."""
    return float(rng.uniform(*cfg.gamma_range))


def sample_jitter_matrix(
    rng: np.random.Generator, dark_only: bool = False
) -> np.ndarray:
    """Random 3x3 color-correction matrix for the color-jitter baselines.

    The unconstrained variant can brighten (row sums may exceed 1). The
    dark-only variant draws a per-row target sum in (0, 1] and
    nonnegative diagonal-dominant weights normalized to it, so the
    shaded region is always darker.
    """
    if dark_only:
        row_sums = rng.uniform(0.25, 0.95, size=3)
        weights = rng.uniform(0.0, 0.2, size=(3, 3))
        weights[np.diag_indices(3)] = rng.uniform(0.6, 1.0, size=3)
        matrix = weights * (row_sums / weights.sum(axis=1))[:, None]
        return matrix
    matrix = rng.uniform(-0.05, 0.15, size=(3, 3))
    matrix[np.diag_indices(3)] = rng.uniform(0.4, 1.1, size=3)
    return matrix
