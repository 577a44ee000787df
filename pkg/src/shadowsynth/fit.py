"""Recovering darkening parameters from shadow / shadow-free pairs.

Inside the umbra the shadow pixel is an affine function of the
shadow-free pixel, so an ordinary least-squares line per channel over
masked pixels recovers the attenuation: the shared slope is read off
the green channel and the intercepts l_k are the x-axis crossings of
each channel's line. Penumbra pixels are convex mixtures of lit and
dark values and bias the slope upward, so fitting masks should be
umbra-only (binarize the matte near 1).

Also implements the slope-scaling augmentation baseline: scaling an
estimated slope by a factor in [0.8, 1.2] to perturb shadow strength.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .illum import SlopeParams
from .imagery import validate_rgb

__all__ = [
    "ChannelFit",
    "FitResult",
    "FitError",
    "estimate_params",
    "augment_slope",
    "AUGMENT_SCALE_RANGE",
    "MIN_FIT_PIXELS",
]

AUGMENT_SCALE_RANGE = (0.8, 1.2)
MIN_FIT_PIXELS = 100
_MIN_CHANNEL_PIXELS = 30
_VAR_FLOOR = 1e-6
_SLOPE_CEIL = 1.0 - 1e-9


class FitError(ValueError):
    """Degenerate or out-of-model regression; carries per-channel fits."""

    def __init__(self, message: str, per_channel=None):
        super().__init__(message)
        self.per_channel = per_channel


@dataclass(frozen=True)
class ChannelFit:
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class FitResult:
    params: SlopeParams
    per_channel: tuple[ChannelFit, ChannelFit, ChannelFit]
    n_pixels: int


def _ols_line(x: np.ndarray, y: np.ndarray) -> ChannelFit:
    x_mean = x.mean()
    y_mean = y.mean()
    dx = x - x_mean
    var = float(dx @ dx) / x.size
    if var < _VAR_FLOOR:
        raise FitError(
            f"degenerate regression: input variance {var:.3g} below {_VAR_FLOOR:g}"
        )
    slope = float(dx @ (y - y_mean)) / float(dx @ dx)
    intercept = y_mean - slope * x_mean
    residual = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y_mean) ** 2))
    ss_res = float(residual @ residual)
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return ChannelFit(slope=slope, intercept=intercept, r2=r2)


def _theil_sen_line(x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> ChannelFit:
    """Median-of-pairwise-slopes estimator, subsampled for large inputs."""
    var = float(np.var(x))
    if var < _VAR_FLOOR:
        raise FitError(
            f"degenerate regression: input variance {var:.3g} below {_VAR_FLOOR:g}"
        )
    n_pairs = min(20000, x.size * (x.size - 1) // 2)
    i = rng.integers(0, x.size, size=n_pairs)
    j = rng.integers(0, x.size, size=n_pairs)
    keep = np.abs(x[i] - x[j]) > 1e-12
    if not keep.any():
        raise FitError("degenerate regression: no distinct pixel pairs")
    slope = float(np.median((y[i] - y[j])[keep] / (x[i] - x[j])[keep]))
    intercept = float(np.median(y - slope * x))
    residual = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - float(residual @ residual) / ss_tot)
    return ChannelFit(slope=slope, intercept=intercept, r2=r2)


def estimate_params(
    x_s: np.ndarray,
    x_ns: np.ndarray,
    mask: np.ndarray,
    slope_channel: str = "green",
    robust: bool = False,
    rng: np.random.Generator | None = None,
) -> FitResult:
    """Per-channel regression of shadow on shadow-free pixels inside `mask`.

    slope_channel: "green" takes the shared slope from channel 1 (the
    channel that defines s1); "mean" averages the three channel slopes.
    `robust` switches to a Theil-Sen line for noisy real-world masks.
    """
    x_s = validate_rgb(x_s)
    x_ns = validate_rgb(x_ns)
    mask = np.asarray(mask, dtype=bool)
    if x_s.shape != x_ns.shape or mask.shape != x_s.shape[:2]:
        raise ValueError("shadow, shadow-free, and mask dimensions must match")
    if slope_channel not in ("green", "mean"):
        raise ValueError(f"slope_channel must be 'green' or 'mean', got {slope_channel!r}")
    n_pixels = int(mask.sum())
    if n_pixels < MIN_FIT_PIXELS:
        raise FitError(f"need >= {MIN_FIT_PIXELS} masked pixels, got {n_pixels}")

    if robust and rng is None:
        rng = np.random.default_rng(0)
    fits = []
    for k in range(3):
        x = x_ns[..., k][mask]
        y = x_s[..., k][mask]
        # Exactly-zero shadow values are the clamped below-intercept branch
        # of the darkening model; they carry no slope information and would
        # drag the line down, so each channel drops them.
        keep = y > 0.0
        if int(keep.sum()) < _MIN_CHANNEL_PIXELS:
            raise FitError(
                f"channel {k}: only {int(keep.sum())} non-clamped pixels, "
                f"need >= {_MIN_CHANNEL_PIXELS}"
            )
        x, y = x[keep], y[keep]
        fits.append(_theil_sen_line(x, y, rng) if robust else _ols_line(x, y))
    fits = tuple(fits)

    for k, f in enumerate(fits):
        if f.slope <= 0.0:
            raise FitError(f"channel {k} slope {f.slope:.6g} is not positive", fits)
    slope = fits[1].slope if slope_channel == "green" else float(
        np.mean([f.slope for f in fits])
    )
    if slope > _SLOPE_CEIL:
        raise FitError(
            f"recovered slope {slope:.6g} at or above 1: no attenuation in masked "
            f"region (r2 = {[round(f.r2, 6) for f in fits]})",
            fits,
        )
    # x-axis crossing of each channel's own line.
    intercepts = [
        float(np.clip(-f.intercept / f.slope, 0.0, np.nextafter(1.0, 0.0)))
        for f in fits
    ]
    s1 = slope * (1.0 - intercepts[1])
    params = SlopeParams(l0=intercepts[0], l1=intercepts[1], l2=intercepts[2], s1=s1)
    return FitResult(params=params, per_channel=fits, n_pixels=n_pixels)


def augment_slope(p: SlopeParams, scale: float) -> SlopeParams:
    """Scale the attenuation slope by `scale` in [0.8, 1.2] (s1 -> scale*s1)."""
    if not AUGMENT_SCALE_RANGE[0] <= scale <= AUGMENT_SCALE_RANGE[1]:
        raise ValueError(f"scale must be in {AUGMENT_SCALE_RANGE}, got {scale}")
    new_slope = p.slope * scale
    if new_slope > 1.0:
        raise ValueError(
            f"scaled slope {new_slope:.6g} exceeds 1; cannot brighten shadows"
        )
    return SlopeParams(l0=p.l0, l1=p.l1, l2=p.l2, s1=scale * p.s1)
