"""Evaluation metrics for shadow removal and detection.

Removal quality is RMSE in CIELAB between predicted and ground-truth
shadow-free images, reported over shadow pixels (S), non-shadow pixels
(NS), and all pixels (ALL); per-pixel error is the squared LAB
difference summed over the three components, so the partition identity
ALL^2 * N = S^2 * Np + NS^2 * Nn holds exactly.

Detection quality is the balance error rate in percent:
BER = (1 - 0.5 * (Ntp/Np + Ntn/Nn)) * 100, with the per-class error
rates reported as S and NS. Lower is better for both metrics.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .imagery import binarize_matte, load_image, load_matte, rgb_to_lab, validate_rgb

__all__ = ["RegionScores", "rmse_lab", "ber", "score_dataset", "ScoreReport"]


@dataclass(frozen=True)
class RegionScores:
    """Scores split by region; counts double as empty-region flags."""

    shadow: float
    non_shadow: float
    all: float
    n_shadow: int = 0
    n_non_shadow: int = 0

    def __post_init__(self):
        for name in ("shadow", "non_shadow", "all"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} score must be finite and >= 0, got {v}")


def _check_mask(mask: np.ndarray, shape) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {shape}")
    return mask


def rmse_lab(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> RegionScores:
    """Region-split RMSE in LAB between two RGB images (mask True = shadow)."""
    pred = validate_rgb(pred)
    gt = validate_rgb(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"image shapes differ: {pred.shape} vs {gt.shape}")
    mask = _check_mask(mask, pred.shape[:2])
    sq = np.sum((rgb_to_lab(pred) - rgb_to_lab(gt)) ** 2, axis=-1)
    n_s = int(mask.sum())
    n_ns = mask.size - n_s
    s = float(np.sqrt(sq[mask].mean())) if n_s else 0.0
    ns = float(np.sqrt(sq[~mask].mean())) if n_ns else 0.0
    return RegionScores(
        shadow=s,
        non_shadow=ns,
        all=float(np.sqrt(sq.mean())),
        n_shadow=n_s,
        n_non_shadow=n_ns,
    )


def ber(pred: np.ndarray, gt: np.ndarray) -> RegionScores:
    """Balance error rate (percent) of a predicted mask against ground truth."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    n_p = int(gt.sum())
    n_n = gt.size - n_p
    if n_p == 0 or n_n == 0:
        raise ValueError("ground truth must contain both shadow and non-shadow pixels")
    n_tp = int((pred & gt).sum())
    n_tn = int((~pred & ~gt).sum())
    s = (1.0 - n_tp / n_p) * 100.0
    ns = (1.0 - n_tn / n_n) * 100.0
    return RegionScores(
        shadow=s,
        non_shadow=ns,
        all=(1.0 - 0.5 * (n_tp / n_p + n_tn / n_n)) * 100.0,
        n_shadow=n_p,
        n_non_shadow=n_n,
    )


@dataclass
class ScoreReport:
    rows: list[tuple[str, RegionScores]]
    aggregate: RegionScores
    problems: list[str]


def _matched_stems(*dirs: str) -> tuple[list[str], list[str]]:
    """Stems present in every directory, plus orphan complaints."""
    stem_sets = []
    for d in dirs:
        stems = {
            os.path.splitext(f)[0]
            for f in os.listdir(d)
            if f.lower().endswith((".png", ".jpg", ".jpeg"))
        }
        stem_sets.append(stems)
    common = set.intersection(*stem_sets)
    problems = []
    for d, stems in zip(dirs, stem_sets):
        for orphan in sorted(stems - common):
            problems.append(f"unmatched stem {orphan!r} in {d}")
    return sorted(common), problems


def _find(directory: str, stem: str) -> str:
    for ext in (".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG"):
        path = os.path.join(directory, stem + ext)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"no image for stem {stem!r} in {directory}")


def score_dataset(
    pred_dir: str,
    gt_dir: str,
    mask_dir: str | None = None,
    metric: str = "rmse_lab",
    pooled: bool = False,
    csv_path: str | None = None,
) -> ScoreReport:
    """Score matched stems across directories; continue past broken items.

    Aggregation is the unweighted mean of per-image scores by default;
    `pooled` pools pixels (or counts, for BER) across the dataset
    instead. An optional CSV gets one row per item plus the aggregate.
    """
    if metric not in ("rmse_lab", "ber"):
        raise ValueError(f"metric must be 'rmse_lab' or 'ber', got {metric!r}")
    if metric == "rmse_lab" and mask_dir is None:
        raise ValueError("rmse_lab needs a mask directory for the S/NS split")
    dirs = (pred_dir, gt_dir) if mask_dir is None else (pred_dir, gt_dir, mask_dir)
    stems, problems = _matched_stems(*dirs)

    rows: list[tuple[str, RegionScores]] = []
    pool_sq = {"s": 0.0, "ns": 0.0, "n_s": 0, "n_ns": 0}
    pool_counts = {"tp": 0, "tn": 0, "p": 0, "n": 0}
    for stem in stems:
        try:
            if metric == "rmse_lab":
                pred = load_image(_find(pred_dir, stem))
                gt = load_image(_find(gt_dir, stem))
                mask = binarize_matte(load_matte(_find(mask_dir, stem)))
                scores = rmse_lab(pred, gt, mask)
                pool_sq["s"] += scores.shadow**2 * scores.n_shadow
                pool_sq["ns"] += scores.non_shadow**2 * scores.n_non_shadow
                pool_sq["n_s"] += scores.n_shadow
                pool_sq["n_ns"] += scores.n_non_shadow
            else:
                pred = binarize_matte(load_matte(_find(pred_dir, stem)))
                gt = binarize_matte(load_matte(_find(gt_dir, stem)))
                scores = ber(pred, gt)
                pool_counts["tp"] += int((pred & gt).sum())
                pool_counts["tn"] += int((~pred & ~gt).sum())
                pool_counts["p"] += int(gt.sum())
                pool_counts["n"] += int((~gt).sum())
            rows.append((stem, scores))
        except Exception as exc:  # noqa: BLE001 - report and continue
            problems.append(f"{stem}: {type(exc).__name__}: {exc}")

    if not rows:
        aggregate = RegionScores(0.0, 0.0, 0.0)
    elif pooled and metric == "rmse_lab":
        n = pool_sq["n_s"] + pool_sq["n_ns"]
        aggregate = RegionScores(
            shadow=float(np.sqrt(pool_sq["s"] / pool_sq["n_s"])) if pool_sq["n_s"] else 0.0,
            non_shadow=float(np.sqrt(pool_sq["ns"] / pool_sq["n_ns"])) if pool_sq["n_ns"] else 0.0,
            all=float(np.sqrt((pool_sq["s"] + pool_sq["ns"]) / n)),
            n_shadow=pool_sq["n_s"],
            n_non_shadow=pool_sq["n_ns"],
        )
    elif pooled:
        s = (1.0 - pool_counts["tp"] / pool_counts["p"]) * 100.0
        ns = (1.0 - pool_counts["tn"] / pool_counts["n"]) * 100.0
        aggregate = RegionScores(
            shadow=s,
            non_shadow=ns,
            all=(s + ns) / 2.0,
            n_shadow=pool_counts["p"],
            n_non_shadow=pool_counts["n"],
        )
    else:
        aggregate = RegionScores(
            shadow=float(np.mean([r.shadow for _, r in rows])),
            non_shadow=float(np.mean([r.non_shadow for _, r in rows])),
            all=float(np.mean([r.all for _, r in rows])),
            n_shadow=sum(r.n_shadow for _, r in rows),
            n_non_shadow=sum(r.n_non_shadow for _, r in rows),
        )

    if csv_path:
        with open(csv_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["stem", "S", "NS", "ALL"])
            for stem, r in rows:
                writer.writerow([stem, f"{r.shadow:.6f}", f"{r.non_shadow:.6f}", f"{r.all:.6f}"])
            writer.writerow(
                ["aggregate", f"{aggregate.shadow:.6f}", f"{aggregate.non_shadow:.6f}", f"{aggregate.all:.6f}"]
            )
    return ScoreReport(rows=rows, aggregate=aggregate, problems=problems)
