"""Command-line entry point: ``csfusion {synth,fuse,augment,eval,pipeline}``.

Settings resolve in three layers: built-in defaults, then a flat ``key = value``
file given with ``--config``, then command-line flags.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .evaluation import POLICIES, evaluate, format_machine, format_report
from .fusion import FusionConfig, VoteAccumulator, run_csf, selected
from .prompting import STRATEGIES, BinaryMask, choose_augmented_point
from .scene import (
    ClassTable,
    FrameRecord,
    list_frame_indices,
    load_frames,
    load_scene,
    read_pnm,
    save_scene,
)
from .segmenters import (
    MaskDirectorySegmenter,
    MissingMaskError,
    NoiseSpec,
    OracleSegmenter,
    PromptedOracleSegmenter,
    SegmenterError,
    label_mask_from_prompts,
    label_mask_from_segmenter,
)
from .synthetic import (
    CLASSES_FILE,
    FRAMES_DIR,
    SCENE_FILE,
    SceneSpec,
    default_intrinsics,
    emit_dataset,
)

MASK_SOURCES = ("directory", "oracle", "prompted-oracle")
MANIFEST_FILE = "manifest.json"
TIMESTAMP_KEY = "timestamp"


class UsageError(Exception):
    pass


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_str(text):
    return None if text in (None, "", "none") else str(text)


# key -> (parser, default)
CONFIG_KEYS = {
    "scene": (_opt_str, None),
    "frames": (_opt_str, None),
    "classes": (_opt_str, None),
    "mask_source": (str, "oracle"),
    "mask_dir": (_opt_str, None),
    "frame_stride": (int, 50),
    "pixel_stride": (int, 1),
    "radius": (float, 0.1),
    "strategy": (str, "none"),
    "policy": (str, "penalize"),
    "seed": (int, 0),
    "skip_missing": (_bool, False),
    "workers": (int, 1),
    "noise_morph": (int, 0),
    "noise_drop": (float, 0.0),
    "noise_mislabel": (float, 0.0),
    "out": (_opt_str, None),
    "acc_out": (_opt_str, None),
    "resume": (_opt_str, None),
    "synth": (_bool, False),
    "objects": (int, 8),
    "n_frames": (int, 30),
    "density": (float, 3000.0),
    "width": (int, 640),
    "height": (int, 480),
    "focal": (float, 440.0),
    "index_step": (int, 50),
}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    out = {}
    for n, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{p}:{n}: expected key = value")
        key, val = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{p}:{n}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key][0](val)
        except ValueError as e:
            raise UsageError(f"{p}:{n}: bad value for {key}: {e}") from None
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Effective settings: defaults, then config file, then flags that were given."""
    cfg = {k: d for k, (_, d) in CONFIG_KEYS.items()}
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for k in CONFIG_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["mask_source"] not in MASK_SOURCES:
        raise UsageError(f"unknown mask source {cfg['mask_source']!r}; choose from {', '.join(MASK_SOURCES)}")
    if cfg["strategy"] not in STRATEGIES:
        raise UsageError(f"unknown strategy {cfg['strategy']!r}; choose from {', '.join(STRATEGIES)}")
    if cfg["policy"] not in POLICIES:
        raise UsageError(f"unknown policy {cfg['policy']!r}; choose from {', '.join(POLICIES)}")
    return cfg


def _need_file(path, what):
    if path is None:
        raise UsageError(f"missing {what}")
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def _need_dir(path, what):
    if path is None:
        raise UsageError(f"missing {what}")
    if not Path(path).is_dir():
        raise UsageError(f"{what} not found: {path}")


def _class_table(cfg) -> ClassTable:
    if cfg["classes"]:
        return ClassTable.load(cfg["classes"])
    return ClassTable.scannet20()


def _warn(msg: str):
    print(f"warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _scene_spec(cfg) -> SceneSpec:
    return SceneSpec(n_objects=cfg["objects"], density=cfg["density"], rng_seed=cfg["seed"])


def _synth(cfg, out_dir: Path):
    K = default_intrinsics(cfg["width"], cfg["height"], cfg["focal"])
    return emit_dataset(_scene_spec(cfg), cfg["n_frames"], K, out_dir, index_step=cfg["index_step"])


def cmd_synth(args) -> int:
    cfg = resolve(args)
    if not cfg["out"]:
        raise UsageError("synth needs --out")
    ds = _synth(cfg, Path(cfg["out"]))
    print(f"points: {ds.n_points}")
    print(f"frames: {len(ds.frame_indices)}")
    for name, n in ds.class_histogram.items():
        print(f"  {name}: {n}")
    return 0


# ---------------------------------------------------------------------------
# fuse
# ---------------------------------------------------------------------------


@dataclass
class FuseResult:
    labels: np.ndarray
    acc: VoteAccumulator
    stats: dict


def _frame_masks(cfg, frames, ct: ClassTable) -> list:
    """Replace each frame's mask with the configured segmenter's output."""
    source = cfg["mask_source"]
    out = []
    if source == "directory":
        seg = MaskDirectorySegmenter(cfg["mask_dir"], ct)
        for f in frames:
            try:
                m = label_mask_from_segmenter(seg, f.frame_index)
            except MissingMaskError:
                if cfg["skip_missing"]:
                    _warn(f"no mask for frame {f.frame_index}; skipped")
                    continue
                raise
            out.append(_with_mask(f, m))
        return out
    for f in frames:
        if f.mask is None:
            raise SegmenterError(f"frame {f.frame_index} has no ground-truth labels for the oracle")
    if source == "oracle":
        noise = NoiseSpec(cfg["noise_morph"], cfg["noise_drop"], cfg["noise_mislabel"], cfg["seed"])
        seg = OracleSegmenter({f.frame_index: f.mask for f in frames}, noise, ct)
        return [_with_mask(f, label_mask_from_segmenter(seg, f.frame_index)) for f in frames]
    seg = PromptedOracleSegmenter({f.frame_index: f.mask for f in frames})
    for f in frames:
        if f.color is None:
            raise SegmenterError(f"frame {f.frame_index} has no color image to prompt")
        m = label_mask_from_prompts(seg, f.color, f.mask, cfg["strategy"], cfg["seed"], f.frame_index)
        out.append(_with_mask(f, m))
    return out


def _with_mask(f: FrameRecord, mask) -> FrameRecord:
    return FrameRecord(f.frame_index, f.intrinsics, f.pose, f.depth, f.color, mask)


def _check_fuse_inputs(cfg):
    _need_file(cfg["scene"], "scene")
    _need_dir(cfg["frames"], "frame directory")
    if cfg["classes"]:
        _need_file(cfg["classes"], "class table")
    if cfg["mask_source"] == "directory":
        _need_dir(cfg["mask_dir"], "mask directory")
    if cfg["resume"]:
        _need_file(cfg["resume"], "accumulator to resume")
    if not cfg["out"]:
        raise UsageError("missing output path (--out)")


def fuse(cfg, order: Optional[list] = None):
    """Returns ``(FuseResult, cloud, class table)``."""
    ct = _class_table(cfg)
    cloud = load_scene(cfg["scene"], ct)
    if order is not None:
        on_disk = set(list_frame_indices(cfg["frames"]))
        missing = [i for i in order if i not in on_disk]
        if missing:
            raise UsageError(f"frames not found: {missing}")
    frames = load_frames(cfg["frames"], order, ct)
    fcfg = FusionConfig(cfg["radius"], cfg["pixel_stride"], cfg["frame_stride"])
    use = selected(frames, fcfg.frame_stride)
    if frames and len(use) <= 1 < len(frames):
        _warn(f"frame stride {fcfg.frame_stride} keeps only {len(use)} of {len(frames)} frames")
    use = _frame_masks(cfg, use, ct)
    acc = VoteAccumulator.load(cfg["resume"]) if cfg["resume"] else None
    # frames were already selected; fuse all of them
    labels, acc, stats = run_csf(cloud, use, FusionConfig(fcfg.radius_m, fcfg.pixel_stride, 1),
                                 ct, acc, workers=cfg["workers"])
    summary = stats.as_dict(ct)
    summary["coverage"] = 1.0 - summary["ignore_fraction"]
    return FuseResult(labels, acc, summary), cloud, ct


def cmd_fuse(args) -> int:
    cfg = resolve(args)
    _check_fuse_inputs(cfg)
    order = _parse_frame_list(args.frame_list) if getattr(args, "frame_list", None) else None
    res, cloud, ct = fuse(cfg, order)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scene(cloud, out, labels=res.labels, ct=ct)
    if cfg["acc_out"]:
        res.acc.save(cfg["acc_out"])
    print(f"frames used: {len(res.stats['frames_used'])}")
    print(f"votes: {res.stats['votes']}")
    print(f"coverage: {res.stats['coverage']:.4f}")
    return 0


def _parse_frame_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad frame list {text!r}") from None


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------


def _parse_pixel(text: str):
    try:
        u, v = (int(t) for t in text.strip("() ").split(","))
    except ValueError:
        raise UsageError(f"bad pixel {text!r}; expected u,v") from None
    return u, v


def cmd_augment(args) -> int:
    cfg = resolve(args)
    _need_file(args.image, "image")
    _need_file(args.mask, "mask")
    image = read_pnm(args.image)
    if image.ndim == 2:
        image = np.repeat(image[..., None], 3, axis=2)
    if image.dtype != np.uint8:
        raise UsageError("image must be 8-bit")
    mask = BinaryMask(read_pnm(args.mask) != 0)
    if image.shape[:2] != mask.data.shape:
        raise UsageError("image and mask dimensions differ")
    anchor = _parse_pixel(args.anchor)
    if cfg["strategy"] == "none":
        raise UsageError("augment needs a strategy other than none")
    u, v = choose_augmented_point(cfg["strategy"], image, mask, anchor, cfg["seed"])
    print(f"({u},{v})")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _scene_labels(path, ct):
    cloud = load_scene(path, ct)
    if cloud.gt_labels is None:
        raise UsageError(f"{path}: no label property")
    return cloud.gt_labels


def cmd_eval(args) -> int:
    cfg = resolve(args)
    _need_file(args.pred, "prediction")
    _need_file(args.gt, "ground truth")
    ct = _class_table(cfg)
    report = evaluate(_scene_labels(args.pred, ct), _scene_labels(args.gt, ct), ct, cfg["policy"])
    print(format_machine(report, ct) if args.machine else format_report(report, ct), end="")
    return 0


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def _versions() -> dict:
    import scipy

    return {
        "csfusion": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _pct(x: float):
    return None if np.isnan(x) else round(100.0 * float(x), 4)


def cmd_pipeline(args) -> int:
    cfg = resolve(args)
    if not cfg["out"]:
        raise UsageError("pipeline needs --out (a directory)")
    root = Path(cfg["out"])
    if cfg["synth"] or not cfg["scene"]:
        cfg["synth"] = True
        data = root / "data"
        cfg["scene"] = str(data / SCENE_FILE)
        cfg["frames"] = str(data / FRAMES_DIR)
        cfg["classes"] = cfg["classes"] or str(data / CLASSES_FILE)
        if cfg["mask_source"] == "directory":
            _need_dir(cfg["mask_dir"], "mask directory")
        if cfg["resume"]:
            _need_file(cfg["resume"], "accumulator to resume")
        if cfg["classes"] != str(data / CLASSES_FILE):
            _need_file(cfg["classes"], "class table")
        _synth(cfg, data)
    else:
        cfg["out"] = str(root / "fused.ply")
        _check_fuse_inputs(cfg)
        cfg["out"] = str(root)
    order = _parse_frame_list(args.frame_list) if getattr(args, "frame_list", None) else None
    res, cloud, ct = fuse(cfg, order)
    root.mkdir(parents=True, exist_ok=True)
    fused = root / "fused.ply"
    save_scene(cloud, fused, labels=res.labels, ct=ct)
    if cfg["acc_out"]:
        res.acc.save(cfg["acc_out"])
    if cloud.gt_labels is None:
        raise UsageError("scene has no ground-truth labels to evaluate against")
    metrics = {}
    for policy in POLICIES:
        rep = evaluate(res.labels, cloud.gt_labels, ct, policy)
        metrics[policy] = {
            "miou": _pct(rep.miou),
            "per_class": {n: _pct(x) for n, x in zip(ct.names, rep.per_class_iou)},
        }
        if policy == cfg["policy"]:
            (root / "report.txt").write_text(format_report(rep, ct))
            coverage = rep.coverage
    manifest = {
        "config": cfg,
        "versions": _versions(),
        "fusion": res.stats,
        "metrics": {
            "policy": cfg["policy"],
            "miou": metrics[cfg["policy"]]["miou"],
            "coverage": _pct(coverage),
            "by_policy": metrics,
        },
        "outputs": {"fused": str(fused), "report": str(root / "report.txt")},
        TIMESTAMP_KEY: datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (root / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"miou ({cfg['policy']}): {manifest['metrics']['miou']}")
    print(f"coverage: {manifest['metrics']['coverage']}")
    print(f"manifest: {root / MANIFEST_FILE}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value settings file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--classes", help="class table, one name per line (default: ScanNet 20)")


def _fusion_flags(p: argparse.ArgumentParser):
    p.add_argument("--scene", help="scene PLY")
    p.add_argument("--frames", help="frame directory")
    p.add_argument("--mask-source", dest="mask_source", choices=MASK_SOURCES)
    p.add_argument("--mask-dir", dest="mask_dir")
    p.add_argument("--frame-stride", dest="frame_stride", type=int)
    p.add_argument("--pixel-stride", dest="pixel_stride", type=int)
    p.add_argument("--radius", type=float, help="label transfer radius in meters")
    p.add_argument("--strategy", help=f"prompt augmentation: {', '.join(STRATEGIES)}")
    p.add_argument("--skip-missing", dest="skip_missing", action="store_const", const=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--noise-morph", dest="noise_morph", type=int)
    p.add_argument("--noise-drop", dest="noise_drop", type=float)
    p.add_argument("--noise-mislabel", dest="noise_mislabel", type=float)
    p.add_argument("--acc-out", dest="acc_out", help="write the vote accumulator here")
    p.add_argument("--resume", help="accumulator dump to continue from")
    p.add_argument("--frame-list", dest="frame_list", help="comma-separated frame indices, in processing order")


def _synth_flags(p: argparse.ArgumentParser):
    p.add_argument("--objects", type=int)
    p.add_argument("--n-frames", dest="n_frames", type=int)
    p.add_argument("--density", type=float)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--focal", type=float)
    p.add_argument("--index-step", dest="index_step", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csfusion", description="Fuse 2D segmentation masks into 3D point labels.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic labeled room and RGB-D frames")
    _common(p)
    _synth_flags(p)
    p.add_argument("--out", required=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fuse", help="fuse per-frame masks into point labels")
    _common(p)
    _fusion_flags(p)
    p.add_argument("--out", help="output PLY with fused labels")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("augment", help="pick an augmented second positive point")
    _common(p)
    p.add_argument("--image", required=True, help="PPM/PGM image")
    p.add_argument("--mask", required=True, help="PGM mask; nonzero pixels are members")
    p.add_argument("--anchor", required=True, help="initial point as u,v")
    p.add_argument("--strategy", choices=STRATEGIES[1:], required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", help="score predicted point labels against ground truth")
    _common(p)
    p.add_argument("pred", help="PLY with predicted labels")
    p.add_argument("gt", help="PLY with ground-truth labels")
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--machine", action="store_true", help="key=value output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="synth (optional), fuse and eval with a run manifest")
    _common(p)
    _fusion_flags(p)
    _synth_flags(p)
    p.add_argument("--synth", action="store_const", const=True, help="generate the input data first")
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"{ap.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, SegmenterError) as e:
        print(f"{ap.prog} {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
