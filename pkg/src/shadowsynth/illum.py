"""Affine shadow illumination model.

A lit pixel and its fully shadowed counterpart are related per channel
by an affine law: lit = alpha_k + gamma * dark, with one shared slope
gamma and per-channel intercepts. For synthesis the model is
reparameterized as (l0, l1, l2, s1): l_k are the per-channel lit-side
intercepts and s1 is the green-channel dark value at full intensity,
giving the darkening slope s1 / (1 - l1). Slopes above 1 would brighten
the shadowed region and are rejected.

Also provides the alternative darkening baselines (power-law and 3x3
color-correction jitter) used for ablation comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagery import validate_rgb

__all__ = [
    "AffineParams",
    "SlopeParams",
    "to_slope_params",
    "to_affine_params",
    "darken",
    "relit",
    "darken_gamma",
    "darken_color_jitter",
    "GAMMA_RANGE",
]

# Exponent range for the power-law darkening baseline.
GAMMA_RANGE = (1.5, 3.0)


@dataclass(frozen=True)
class AffineParams:
    """Per-channel intercepts alpha (R, G, B) and shared slope gamma."""

    alpha: tuple[float, float, float]
    gamma: float

    def __post_init__(self):
        if len(self.alpha) != 3:
            raise ValueError("alpha must have three channels")
        for a in self.alpha:
            if not 0.0 <= a < 1.0:
                raise ValueError(f"alpha components must be in [0, 1), got {self.alpha}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class SlopeParams:
    """Darkening parameters (l0, l1, l2, s1).

    l_k are per-channel intercepts in [0, 1); s1 in (0, 1] is the green
    dark endpoint. The derived slope s1 / (1 - l1) must not exceed 1.
    """

    l0: float
    l1: float
    l2: float
    s1: float

    def __post_init__(self):
        for name, value in (("l0", self.l0), ("l1", self.l1), ("l2", self.l2)):
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {value}")
        if not 0.0 < self.s1 <= 1.0:
            raise ValueError(f"s1 must be in (0, 1], got {self.s1}")
        if self.slope > 1.0:
            raise ValueError(
                f"slope s1/(1-l1) = {self.slope:.6g} exceeds 1 (would brighten)"
            )

    @property
    def slope(self) -> float:
        return self.s1 / (1.0 - self.l1)

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([self.l0, self.l1, self.l2])


def to_slope_params(p: AffineParams) -> SlopeParams:
    """Map (alpha_k, gamma) to (l0, l1, l2, s1): s1 = (1 - alpha_1)/gamma, l_k = alpha_k."""
    s1 = (1.0 - p.alpha[1]) / p.gamma
    return SlopeParams(l0=p.alpha[0], l1=p.alpha[1], l2=p.alpha[2], s1=s1)


def to_affine_params(p: SlopeParams) -> AffineParams:
    """Inverse map: gamma = (1 - l1)/s1, alpha_k = l_k."""
    gamma = (1.0 - p.l1) / p.s1
    return AffineParams(alpha=(p.l0, p.l1, p.l2), gamma=gamma)


def _darken_core(x_ns: np.ndarray, p: SlopeParams) -> np.ndarray:
    """Darkening math on an already-validated image (one temporary)."""
    out = x_ns - p.intercepts
    np.maximum(out, 0.0, out=out)
    out *= p.slope
    np.clip(out, 0.0, 1.0, out=out)
    return out


def darken(x_ns: np.ndarray, p: SlopeParams) -> np.ndarray:
    """Fully shadowed version of a shadow-free image.

    Per pixel and channel: slope * (x - l_k) where x >= l_k, else 0.
    Never brightens: output <= input everywhere.
    """
    return _darken_core(validate_rgb(x_ns), p)


def relit(x_dark: np.ndarray, p: SlopeParams) -> np.ndarray:
    """Inverse of `darken` off the zero branch: l_k + dark/slope, clamped to [0, 1]."""
    x_dark = validate_rgb(x_dark)
    out = x_dark / p.slope
    out += p.intercepts
    np.clip(out, 0.0, 1.0, out=out)
    return out


def darken_gamma(x_ns: np.ndarray, y: float, check_range: bool = True) -> np.ndarray:
    """Power-law darkening baseline: x ** y per channel.

    `check_range` enforces the sampling range of the exponent; tests may
    disable it to probe behavior outside it.
    """
    if check_range and not GAMMA_RANGE[0] <= y <= GAMMA_RANGE[1]:
        raise ValueError(f"gamma exponent must be in {GAMMA_RANGE}, got {y}")
    x_ns = validate_rgb(x_ns)
    return np.clip(x_ns**y, 0.0, 1.0)


def _check_darkening_matrix(matrix: np.ndarray) -> None:
    if matrix.min() < 0.0:
        raise ValueError("dark-only color jitter requires nonnegative matrix entries")
    row_sums = matrix.sum(axis=1)
    if np.any(row_sums <= 0.0) or np.any(row_sums > 1.0):
        raise ValueError(
            f"dark-only color jitter requires row sums in (0, 1], got {row_sums}"
        )


def darken_color_jitter(
    x_ns: np.ndarray, matrix: np.ndarray, dark_only: bool = False
) -> np.ndarray:
    """Color-jitter darkening baseline: pixel -> matrix @ pixel, clamped.

    With `dark_only`, the matrix must have nonnegative entries and row
    sums in (0, 1], which guarantees gray pixels only get darker and no
    output channel exceeds the input's max channel.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (3, 3):
        raise ValueError(f"expected 3x3 matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix entries must be finite")
    if dark_only:
        _check_darkening_matrix(matrix)
    x_ns = validate_rgb(x_ns)
    jittered = x_ns @ matrix.T
    return np.clip(jittered, 0.0, 1.0)
