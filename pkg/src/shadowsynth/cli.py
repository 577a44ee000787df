"""Command-line frontend for the shadow synthesis pipeline.

Subcommands map to the pipeline stages, which are typically run
independently: `render-mattes` (offline matte rendering from mesh
assets), `synthesize` (online triplet composition), `estimate`
(parameter recovery from triplets), `augment` (slope-scaling baseline),
and `score` (RMSE-LAB / BER evaluation).

All randomness is keyed on --seed and the item index, so every command
is bit-reproducible across runs and worker counts. A JSON config file
can pre-set any section; explicit flags win over the config file.

Exit codes: 0 success, 1 validation problem, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import compose, fit, metrics
from .compose import batch_synthesize
from .illum import SlopeParams
from .imagery import binarize_matte, load_image, load_matte, save_image
from .matte import RenderSettings, SceneError, SceneRanges, randomize_scene, render_matte
from .mesh import load_mesh
from .sampler import STRATEGIES, SamplerConfig, SamplerError
from .streams import item_rng

_IMAGE_EXTS = (".png", ".jpg", ".jpeg")


def _list_images(directory: str) -> list[str]:
    if not os.path.isdir(directory):
        raise ValueError(f"not a directory: {directory}")
    paths = sorted(
        os.path.join(directory, f)
        for f in os.listdir(directory)
        if f.lower().endswith(_IMAGE_EXTS)
    )
    if not paths:
        raise ValueError(f"no images found in {directory}")
    return paths


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise ValueError("config file must hold a JSON object")
    return config


def _pick(flag, config: dict, key: str, default):
    """Precedence: explicit flag > config entry > default."""
    if flag is not None:
        return flag
    return config.get(key, default)


def _build_dataclass(cls, section: dict, overrides: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys in config: {sorted(unknown)}")
    merged = dict(section)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for key, value in merged.items():
        if isinstance(value, list):
            merged[key] = tuple(value)
    return cls(**merged)


def _emit_plan(plan: dict) -> int:
    print(json.dumps(plan, indent=2, sort_keys=True, default=str))
    return 0


# ---------------------------------------------------------------------------
# render-mattes
# ---------------------------------------------------------------------------

_render_state: dict = {}


def _init_render_worker(asset_paths, ranges, settings, seed, out_dir):
    _render_state.update(
        assets=[load_mesh(p) for p in asset_paths],
        ranges=ranges,
        settings=settings,
        seed=seed,
        out_dir=out_dir,
    )


def _render_one(index: int):
    st = _render_state
    try:
        rng = item_rng(st["seed"], index)
        scene = randomize_scene(st["assets"], st["ranges"], rng)
        settings = dataclasses.replace(st["settings"], seed=int(rng.integers(1 << 63)))
        matte = render_matte(scene, settings)
        save_image(matte, os.path.join(st["out_dir"], f"{index:06d}.png"))
        row = {
            "idx": index,
            "seed": st["seed"],
            "render_seed": settings.seed,
            "light_center": scene.light.center.tolist(),
            "light_radius": scene.light.radius,
            "camera_position": scene.camera.position.tolist(),
            "fov_y_deg": scene.camera.fov_y_deg,
            "occluders": [
                {
                    "mesh": mesh.name,
                    "scale": np.atleast_1d(t.scale).tolist(),
                    "rotation": t.rotation.tolist(),
                    "translation": t.translation.tolist(),
                }
                for mesh, t in scene.occluders
            ],
        }
        return index, row, None
    except Exception as exc:  # noqa: BLE001 - keep the batch going
        return index, None, f"{type(exc).__name__}: {exc}"


def cmd_render_mattes(args) -> int:
    config = _load_config(args.config)
    seed = int(_pick(args.seed, config, "seed", 0))
    count = int(_pick(args.count, config, "count", 10))
    workers = int(_pick(args.workers, config, "workers", 1))
    out_dir = _pick(args.out, config, "out", None)
    assets_dir = _pick(args.assets, config, "assets", None)
    if out_dir is None or assets_dir is None:
        raise ValueError("render-mattes needs --assets and --out")
    ranges = _build_dataclass(SceneRanges, config.get("scene", {}), {})
    settings = _build_dataclass(
        RenderSettings,
        config.get("render", {}),
        {"width": args.width, "height": args.height, "light_samples": args.light_samples},
    )
    if not os.path.isdir(assets_dir):
        raise ValueError(f"not a directory: {assets_dir}")
    asset_paths = sorted(
        os.path.join(assets_dir, f)
        for f in os.listdir(assets_dir)
        if f.lower().endswith(".obj")
    )
    if not asset_paths:
        raise ValueError(f"no .obj assets found in {assets_dir}")

    plan = {
        "command": "render-mattes",
        "assets": asset_paths,
        "count": count,
        "seed": seed,
        "workers": workers,
        "out": out_dir,
        "render": dataclasses.asdict(settings),
        "scene": dataclasses.asdict(ranges),
    }
    if args.dry_run:
        return _emit_plan(plan)

    os.makedirs(out_dir, exist_ok=True)
    rows: dict[int, dict] = {}
    failures: list[tuple[int, str]] = []
    if workers <= 1:
        _init_render_worker(asset_paths, ranges, settings, seed, out_dir)
        results = map(_render_one, range(count))
        for index, row, error in results:
            (rows.__setitem__(index, row) if error is None else failures.append((index, error)))
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_render_worker,
            initargs=(asset_paths, ranges, settings, seed, out_dir),
        ) as pool:
            for index, row, error in pool.map(_render_one, range(count)):
                (rows.__setitem__(index, row) if error is None else failures.append((index, error)))

    manifest_path = os.path.join(out_dir, "scenes.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as handle:
        for index in sorted(rows):
            handle.write(json.dumps(rows[index], sort_keys=True) + "\n")
    for index, message in sorted(failures):
        print(f"error: item {index}: {message}", file=sys.stderr)
    print(f"rendered {len(rows)}/{count} mattes -> {out_dir}")
    return 0 if not failures else 2


# ---------------------------------------------------------------------------
# synthesize
# ---------------------------------------------------------------------------

def cmd_synthesize(args) -> int:
    config = _load_config(args.config)
    seed = int(_pick(args.seed, config, "seed", 0))
    count = int(_pick(args.count, config, "count", 100))
    workers = int(_pick(args.workers, config, "workers", 1))
    out_dir = _pick(args.out, config, "out", None)
    bg_dir = _pick(args.backgrounds, config, "backgrounds", None)
    matte_dir = _pick(args.mattes, config, "mattes", None)
    if out_dir is None or bg_dir is None or matte_dir is None:
        raise ValueError("synthesize needs --backgrounds, --mattes, and --out")
    cfg = _build_dataclass(
        SamplerConfig,
        config.get("sampler", {}),
        {"strategy": args.strategy, "seed": seed},
    )
    backgrounds = _list_images(bg_dir)
    mattes = _list_images(matte_dir)

    plan = {
        "command": "synthesize",
        "backgrounds": len(backgrounds),
        "mattes": len(mattes),
        "count": count,
        "seed": seed,
        "workers": workers,
        "strategy": cfg.strategy,
        "out": out_dir,
        "sampler": dataclasses.asdict(cfg),
    }
    if args.dry_run:
        return _emit_plan(plan)

    result = batch_synthesize(backgrounds, mattes, count, cfg, seed, out_dir, workers=workers)
    for index, message in result.failures:
        print(f"error: item {index}: {message}", file=sys.stderr)
    rate = result.n_ok / result.seconds if result.seconds > 0 else float("inf")
    print(
        f"synthesized {result.n_ok}/{count} triplets in {result.seconds:.2f}s "
        f"({rate:.1f} triplets/s) -> {out_dir}"
    )
    return 0 if not result.failures else 2


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def _matched_triplet_stems(shadow_dir: str, free_dir: str, mask_dir: str):
    def stems(d):
        return {
            os.path.splitext(f)[0]
            for f in os.listdir(d)
            if f.lower().endswith(_IMAGE_EXTS)
        }

    for d in (shadow_dir, free_dir, mask_dir):
        if not os.path.isdir(d):
            raise ValueError(f"not a directory: {d}")
    s0, s1, s2 = stems(shadow_dir), stems(free_dir), stems(mask_dir)
    common = sorted(s0 & s1 & s2)
    problems = [
        f"unmatched stem {stem!r}"
        for stem in sorted((s0 | s1 | s2) - set(common))
    ]
    return common, problems


def _find_image(directory: str, stem: str) -> str:
    for ext in _IMAGE_EXTS + tuple(e.upper() for e in _IMAGE_EXTS):
        path = os.path.join(directory, stem + ext)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"no image for stem {stem!r} in {directory}")


def cmd_estimate(args) -> int:
    stems, problems = _matched_triplet_stems(args.shadow_dir, args.shadow_free_dir, args.mask_dir)
    plan = {
        "command": "estimate",
        "items": len(stems),
        "mask_threshold": args.mask_threshold,
        "slope_channel": args.slope_channel,
        "robust": args.robust,
        "out": args.out,
    }
    if args.dry_run:
        return _emit_plan(plan)

    header = ["stem"]
    for k in range(3):
        header += [f"slope_{k}", f"intercept_{k}", f"r2_{k}"]
    header += ["l0", "l1", "l2", "s1"]
    rows = []
    for stem in stems:
        try:
            x_s = load_image(_find_image(args.shadow_dir, stem))
            x_ns = load_image(_find_image(args.shadow_free_dir, stem))
            mask = binarize_matte(load_matte(_find_image(args.mask_dir, stem)), args.mask_threshold)
            result = fit.estimate_params(
                x_s, x_ns, mask, slope_channel=args.slope_channel, robust=args.robust
            )
            row = [stem]
            for ch in result.per_channel:
                row += [f"{ch.slope:.9g}", f"{ch.intercept:.9g}", f"{ch.r2:.9g}"]
            p = result.params
            row += [f"{p.l0:.9g}", f"{p.l1:.9g}", f"{p.l2:.9g}", f"{p.s1:.9g}"]
            rows.append(row)
        except Exception as exc:  # noqa: BLE001 - report and continue
            problems.append(f"{stem}: {type(exc).__name__}: {exc}")

    with open(args.out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    for problem in problems:
        print(f"error: {problem}", file=sys.stderr)
    print(f"estimated {len(rows)}/{len(stems)} triplets -> {args.out}")
    if not rows and problems:
        return 2
    return 0


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------

def _parse_params(text: str) -> SlopeParams:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 4:
        raise ValueError("--params expects 'l0,l1,l2,s1'")
    return SlopeParams(l0=parts[0], l1=parts[1], l2=parts[2], s1=parts[3])


def cmd_augment(args) -> int:
    if args.params is None and args.shadow_dir is None:
        raise ValueError("augment needs either --params or triplet directories")
    if args.params is not None:
        params = _parse_params(args.params)
        if args.dry_run:
            return _emit_plan({"command": "augment", "params": dataclasses.asdict(params), "scale": args.scale})
        scaled = fit.augment_slope(params, args.scale)
        print(f"{scaled.l0:.9g},{scaled.l1:.9g},{scaled.l2:.9g},{scaled.s1:.9g}")
        return 0

    if args.shadow_free_dir is None or args.mask_dir is None or args.out is None:
        raise ValueError("directory mode needs --shadow-dir, --shadow-free-dir, --mask-dir, --out")
    stems, problems = _matched_triplet_stems(args.shadow_dir, args.shadow_free_dir, args.mask_dir)
    if args.dry_run:
        return _emit_plan({"command": "augment", "items": len(stems), "scale": args.scale, "out": args.out})

    os.makedirs(args.out, exist_ok=True)
    written = 0
    for stem in stems:
        try:
            x_s = load_image(_find_image(args.shadow_dir, stem))
            x_ns = load_image(_find_image(args.shadow_free_dir, stem))
            matte = load_matte(_find_image(args.mask_dir, stem))
            mask = binarize_matte(matte, args.mask_threshold)
            result = fit.estimate_params(x_s, x_ns, mask)
            scaled = fit.augment_slope(result.params, args.scale)
            augmented = compose.compose_shadow(x_ns, matte, scaled)
            save_image(augmented, os.path.join(args.out, f"{stem}.png"))
            written += 1
        except Exception as exc:  # noqa: BLE001 - report and continue
            problems.append(f"{stem}: {type(exc).__name__}: {exc}")
    for problem in problems:
        print(f"error: {problem}", file=sys.stderr)
    print(f"augmented {written}/{len(stems)} shadow images -> {args.out}")
    if not written and problems:
        return 2
    return 0


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def cmd_score(args) -> int:
    plan = {
        "command": "score",
        "metric": args.metric,
        "pred": args.pred_dir,
        "gt": args.gt_dir,
        "mask": args.mask_dir,
        "pooled": args.pooled,
        "out": args.out,
    }
    if args.dry_run:
        return _emit_plan(plan)
    report = metrics.score_dataset(
        args.pred_dir,
        args.gt_dir,
        mask_dir=args.mask_dir,
        metric=args.metric,
        pooled=args.pooled,
        csv_path=args.out,
    )
    for problem in report.problems:
        print(f"error: {problem}", file=sys.stderr)
    agg = report.aggregate
    print(
        f"{args.metric} over {len(report.rows)} items: "
        f"S={agg.shadow:.4f} NS={agg.non_shadow:.4f} ALL={agg.all:.4f}"
    )
    if not report.rows and report.problems:
        return 2
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shadowsynth",
        description="Synthesize shadow/shadow-free/matte triplets and evaluate them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--dry-run", action="store_true", help="print the resolved plan, write nothing")

    p = sub.add_parser("render-mattes", help="render shadow mattes from OBJ assets")
    common(p)
    p.add_argument("--assets", help="directory of .obj occluder meshes")
    p.add_argument("--out", help="output directory for matte PNGs")
    p.add_argument("--count", type=int, help="number of mattes (default 10)")
    p.add_argument("--width", type=int, help="matte width in pixels")
    p.add_argument("--height", type=int, help="matte height in pixels")
    p.add_argument("--light-samples", type=int, help="shadow rays per pixel")
    p.add_argument("--workers", type=int, help="process count (default 1)")
    p.set_defaults(func=cmd_render_mattes)

    p = sub.add_parser("synthesize", help="compose triplets from backgrounds and mattes")
    common(p)
    p.add_argument("--backgrounds", help="directory of shadow-free background images")
    p.add_argument("--mattes", help="directory of matte PNGs")
    p.add_argument("--out", help="output dataset directory")
    p.add_argument("--count", type=int, help="number of triplets (default 100)")
    p.add_argument("--strategy", choices=STRATEGIES, help="darkening strategy (default proposed)")
    p.add_argument("--workers", type=int, help="process count (default 1)")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("estimate", help="recover darkening parameters from triplets")
    common(p)
    p.add_argument("--shadow-dir", required=True)
    p.add_argument("--shadow-free-dir", required=True)
    p.add_argument("--mask-dir", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--mask-threshold", type=float, default=0.95, help="umbra binarization threshold")
    p.add_argument("--slope-channel", choices=("green", "mean"), default="green")
    p.add_argument("--robust", action="store_true", help="Theil-Sen instead of OLS")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("augment", help="scale estimated attenuation slopes")
    common(p)
    p.add_argument("--scale", type=float, required=True, help="slope scale factor in [0.8, 1.2]")
    p.add_argument("--params", help="single parameter tuple 'l0,l1,l2,s1'")
    p.add_argument("--shadow-dir")
    p.add_argument("--shadow-free-dir")
    p.add_argument("--mask-dir")
    p.add_argument("--mask-threshold", type=float, default=0.95)
    p.add_argument("--out", help="output directory for augmented shadow images")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("score", help="score predictions with RMSE-LAB or BER")
    common(p)
    p.add_argument("--metric", choices=("rmse_lab", "ber"), required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--mask-dir")
    p.add_argument("--pooled", action="store_true", help="pool pixels instead of per-image mean")
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, NotADirectoryError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SamplerError, SceneError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
