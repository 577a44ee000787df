"""Online triplet synthesis.

A triplet is built from an arbitrary background, an arbitrary matte,
and freshly sampled darkening parameters: darken the whole background,
then alpha-blend the dark layer over the background with the matte as
the alpha factor. This step is cheap enough to run on the fly.

Batch generation keys every item on (seed, item index): background and
matte choice, parameter draws, and output bytes depend only on that
pair, so a dataset is reproducible item by item, prefix-stable in the
count, and independent of worker scheduling.
"""

from __future__ import annotations

import csv
import functools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import illum, sampler
from .illum import SlopeParams
from .imagery import load_image, load_matte, resize_matte, save_image, validate_matte, validate_rgb
from .sampler import SamplerConfig
from .streams import item_rng

__all__ = [
    "Provenance",
    "Triplet",
    "BatchResult",
    "blend_with_matte",
    "compose_shadow",
    "synthesize_triplet",
    "batch_synthesize",
    "MANIFEST_COLUMNS",
]

MANIFEST_COLUMNS = (
    "idx",
    "background",
    "matte",
    "l0",
    "l1",
    "l2",
    "s1",
    "seed",
    "strategy",
    "extra",
)


@dataclass(frozen=True)
class Provenance:
    background_id: str = ""
    matte_id: str = ""
    seed: int = 0
    index: int = 0


@dataclass(frozen=True)
class Triplet:
    """Shadow / shadow-free / matte rasters plus the parameters that made them.

    `params` is None for the non-affine baselines; their sampled values
    live in `extra` instead.
    """

    shadow: np.ndarray
    shadow_free: np.ndarray
    matte: np.ndarray
    params: SlopeParams | None
    provenance: Provenance = field(default_factory=Provenance)
    strategy: str = "proposed"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.shadow.shape != self.shadow_free.shape or self.matte.shape != self.shadow.shape[:2]:
            raise ValueError("triplet rasters must share dimensions")


@dataclass
class BatchResult:
    out_dir: str
    count: int
    manifest_path: str
    seconds: float
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_ok(self) -> int:
        return self.count - len(self.failures)


def _blend_core(x_ns: np.ndarray, x_dark: np.ndarray, matte: np.ndarray) -> np.ndarray:
    """(1 - m)*x_ns + m*x_dark on validated inputs.

    Per-channel 2D ops with one scratch plane run well ahead of the
    (H, W, 1) broadcast form and keep the exact endpoints: m=0 returns
    x_ns bitwise, m=1 x_dark bitwise.
    """
    lit_weight = 1.0 - matte
    out = np.empty_like(x_ns)
    scratch = np.empty_like(matte)
    for k in range(3):
        np.multiply(x_ns[..., k], lit_weight, out=out[..., k])
        np.multiply(x_dark[..., k], matte, out=scratch)
        out[..., k] += scratch
    return out


def _compose_core(x_ns: np.ndarray, matte: np.ndarray, p: SlopeParams) -> np.ndarray:
    """Fused darken + blend, channel by channel.

    Keeps the per-call working set near cache size; element-for-element
    it performs the same operation sequence as
    `_blend_core(x, _darken_core(x, p), m)`, so results are bitwise
    identical to the two-step path.
    """
    intercepts = (p.l0, p.l1, p.l2)
    slope = p.slope
    lit_weight = 1.0 - matte
    out = np.empty_like(x_ns)
    scratch = np.empty_like(matte)
    for k in range(3):
        channel = x_ns[..., k]
        np.subtract(channel, intercepts[k], out=scratch)
        np.maximum(scratch, 0.0, out=scratch)
        scratch *= slope
        np.clip(scratch, 0.0, 1.0, out=scratch)
        scratch *= matte
        np.multiply(channel, lit_weight, out=out[..., k])
        out[..., k] += scratch
    return out


def blend_with_matte(x_ns: np.ndarray, x_dark: np.ndarray, matte: np.ndarray) -> np.ndarray:
    """Alpha composition with the matte as alpha: (1 - m)*x_ns + m*x_dark."""
    x_ns = validate_rgb(x_ns)
    x_dark = validate_rgb(x_dark)
    matte = validate_matte(matte)
    if matte.shape != x_ns.shape[:2] or x_dark.shape != x_ns.shape:
        raise ValueError(
            f"dimension mismatch: image {x_ns.shape}, dark {x_dark.shape}, matte {matte.shape}"
        )
    return _blend_core(x_ns, x_dark, matte)


def compose_shadow(x_ns: np.ndarray, matte: np.ndarray, p: SlopeParams) -> np.ndarray:
    """Shadow image from a shadow-free image, a matte, and darkening params."""
    x_ns = validate_rgb(x_ns)
    matte = validate_matte(matte)
    if matte.shape != x_ns.shape[:2]:
        raise ValueError(
            f"dimension mismatch: image {x_ns.shape}, matte {matte.shape}"
        )
    return _compose_core(x_ns, matte, p)


def _filter_dark_layer(
    x_ns: np.ndarray, cfg: SamplerConfig, rng: np.random.Generator
) -> tuple[np.ndarray, dict]:
    """Dark layer for the non-affine baselines, plus what was sampled."""
    if cfg.strategy == "gamma_correction":
        y = sampler.sample_gamma_exponent(cfg, rng)
        return illum.darken_gamma(x_ns, y), {"gamma_y": y}
    if cfg.strategy in ("color_jitter", "color_jitter_dark"):
        dark_only = cfg.strategy == "color_jitter_dark"
        matrix = sampler.sample_jitter_matrix(rng, dark_only=dark_only)
        dark = illum.darken_color_jitter(x_ns, matrix, dark_only=dark_only)
        return dark, {"matrix": matrix.tolist()}
    raise ValueError(f"unknown strategy {cfg.strategy!r}")


def synthesize_triplet(
    background: np.ndarray,
    matte: np.ndarray,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    provenance: Provenance = Provenance(),
) -> Triplet:
    """Build one triplet; the matte is bilinearly resized to the background."""
    background = validate_rgb(background)
    matte = resize_matte(matte, background.shape[0], background.shape[1])
    if cfg.strategy in sampler.AFFINE_STRATEGIES:
        params, extra = sampler.sample_params_ablation(cfg, rng), {}
        shadow = _compose_core(background, matte, params)
    else:
        params = None
        dark, extra = _filter_dark_layer(background, cfg, rng)
        shadow = _blend_core(background, dark, matte)
    return Triplet(
        shadow=shadow,
        shadow_free=background,
        matte=matte,
        params=params,
        provenance=provenance,
        strategy=cfg.strategy,
        extra=extra,
    )


# ---------------------------------------------------------------------------
# Batch generation
# ---------------------------------------------------------------------------

_worker_state: dict = {}


@functools.lru_cache(maxsize=32)
def _cached_background(path: str) -> np.ndarray:
    return load_image(path)


@functools.lru_cache(maxsize=32)
def _cached_matte(path: str) -> np.ndarray:
    return load_matte(path)


def _manifest_row(index: int, triplet: Triplet) -> dict:
    p = triplet.params
    return {
        "idx": index,
        "background": triplet.provenance.background_id,
        "matte": triplet.provenance.matte_id,
        "l0": f"{p.l0:.12g}" if p else "",
        "l1": f"{p.l1:.12g}" if p else "",
        "l2": f"{p.l2:.12g}" if p else "",
        "s1": f"{p.s1:.12g}" if p else "",
        "seed": triplet.provenance.seed,
        "strategy": triplet.strategy,
        "extra": json.dumps(triplet.extra, sort_keys=True) if triplet.extra else "",
    }


def synthesize_item(
    index: int,
    background_paths: tuple[str, ...],
    matte_paths: tuple[str, ...],
    cfg: SamplerConfig,
    seed: int,
) -> Triplet:
    """Materialize dataset item `index` in isolation.

    The item stream picks the background, the matte, and the darkening
    parameters, in that order.
    """
    rng = item_rng(seed, index)
    bg_path = background_paths[int(rng.integers(len(background_paths)))]
    matte_path = matte_paths[int(rng.integers(len(matte_paths)))]
    triplet = synthesize_triplet(
        _cached_background(bg_path),
        _cached_matte(matte_path),
        cfg,
        rng,
        provenance=Provenance(
            background_id=os.path.basename(bg_path),
            matte_id=os.path.basename(matte_path),
            seed=seed,
            index=index,
        ),
    )
    return triplet


def _write_item(out_dir: str, index: int, triplet: Triplet) -> None:
    name = f"{index:06d}.png"
    save_image(triplet.shadow, os.path.join(out_dir, "shadow", name))
    save_image(triplet.shadow_free, os.path.join(out_dir, "shadow_free", name))
    save_image(triplet.matte, os.path.join(out_dir, "matte", name))


def _init_worker(background_paths, matte_paths, cfg, seed, out_dir):
    _worker_state.update(
        background_paths=background_paths,
        matte_paths=matte_paths,
        cfg=cfg,
        seed=seed,
        out_dir=out_dir,
    )


def _run_item(index: int):
    st = _worker_state
    try:
        triplet = synthesize_item(
            index, st["background_paths"], st["matte_paths"], st["cfg"], st["seed"]
        )
        _write_item(st["out_dir"], index, triplet)
        return index, _manifest_row(index, triplet), None
    except Exception as exc:  # noqa: BLE001 - per-item failures must not kill the batch
        return index, None, f"{type(exc).__name__}: {exc}"


def batch_synthesize(
    background_paths: list[str],
    matte_paths: list[str],
    count: int,
    cfg: SamplerConfig,
    seed: int,
    out_dir: str,
    workers: int = 1,
) -> BatchResult:
    """Generate `count` triplets on disk plus a manifest.

    Layout: <out>/shadow/<idx>.png, <out>/shadow_free/<idx>.png,
    <out>/matte/<idx>.png and <out>/manifest.csv. Per-item failures are
    collected and reported; the batch continues. Worker count changes
    wall-clock only, never bytes.
    """
    if not background_paths or not matte_paths:
        raise ValueError("background and matte collections must be non-empty")
    if count < 0:
        raise ValueError("count must be >= 0")
    background_paths = tuple(str(p) for p in background_paths)
    matte_paths = tuple(str(p) for p in matte_paths)
    for sub in ("shadow", "shadow_free", "matte"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    started = time.perf_counter()
    rows: dict[int, dict] = {}
    failures: list[tuple[int, str]] = []
    if workers <= 1:
        _init_worker(background_paths, matte_paths, cfg, seed, out_dir)
        results = map(_run_item, range(count))
        for index, row, error in results:
            if error is None:
                rows[index] = row
            else:
                failures.append((index, error))
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(background_paths, matte_paths, cfg, seed, out_dir),
        ) as pool:
            for index, row, error in pool.map(_run_item, range(count), chunksize=8):
                if error is None:
                    rows[index] = row
                else:
                    failures.append((index, error))

    manifest_path = os.path.join(out_dir, "manifest.csv")
    with open(manifest_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=MANIFEST_COLUMNS)
        writer.writeheader()
        for index in sorted(rows):
            writer.writerow(rows[index])
    return BatchResult(
        out_dir=out_dir,
        count=count,
        manifest_path=manifest_path,
        seconds=time.perf_counter() - started,
        failures=sorted(failures),
    )
