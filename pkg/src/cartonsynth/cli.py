"""``cartonsynth`` command line: validate, segment, reconstruct, overlay, synth.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .annotations import load_skeleton_dir
from .errors import CartonSynthError, ConfigError
from .images import read_rgb, write_png
from .pipeline import (
    SynthesisConfig,
    reconstruction_overlay,
    reconstruction_to_json,
    record_geometry,
    run_generation,
    segmentation_overlay,
    surfaces_to_json,
)
from .validation import validate_instance

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


class DataError(CartonSynthError):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON file with SynthesisConfig fields")
    common.add_argument("--psi", type=float, help="faceted-point merge radius in pixels")
    common.add_argument("--gamma", type=float, help="area ratio above which 4-point contours are kept")
    common.add_argument("--noise-prob", type=float, dest="noise_prob")
    common.add_argument("--sigma", type=float, dest="fusion_sigma", help="Gaussian fusion sigma in pixels")
    common.add_argument("--count", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--skeletons", dest="skeleton_dir", metavar="DIR")
    common.add_argument("--textures", dest="texture_manifest", metavar="FILE")
    common.add_argument("--out", dest="output_dir", metavar="DIR")
    common.add_argument("--strict", action="store_true", help="treat labeling-rule violations as errors")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cartonsynth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check labeling rules")
    sub.add_parser("segment", parents=[common], help="surface loops: overlays + JSON")
    sub.add_parser("reconstruct", parents=[common], help="complete contours: overlays + JSON")
    sub.add_parser("overlay", parents=[common], help="both diagnostic overlays")
    sub.add_parser("synth", parents=[common], help="generate synthetic images")
    return parser


def load_config(args) -> SynthesisConfig:
    base = SynthesisConfig.from_json(args.config) if args.config else SynthesisConfig()
    return base.override(
        psi=args.psi,
        gamma=args.gamma,
        noise_prob=args.noise_prob,
        fusion_sigma=args.fusion_sigma,
        count=args.count,
        seed=args.seed,
        skeleton_dir=args.skeleton_dir,
        texture_manifest=args.texture_manifest,
        output_dir=args.output_dir,
    )


def _records(cfg: SynthesisConfig):
    if not cfg.skeleton_dir or not Path(cfg.skeleton_dir).is_dir():
        raise ConfigError(f"skeleton directory {cfg.skeleton_dir!r} does not exist")
    records = load_skeleton_dir(cfg.skeleton_dir)
    if not records:
        raise ConfigError(f"no skeleton records in {cfg.skeleton_dir}")
    return records


def _out_dir(cfg: SynthesisConfig, name: str) -> Path:
    if not cfg.output_dir:
        raise ConfigError("--out is required")
    out = Path(cfg.output_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stem(k: int, record) -> str:
    return f"{k:04d}_{Path(record.image_path).stem}"


def cmd_validate(cfg, args) -> int:
    bad = 0
    for record in _records(cfg):
        for inst in record.instances:
            report = validate_instance(inst, cfg.psi)
            if report.ok:
                print(f"{record.image_path} instance {inst.id}: ok")
                continue
            bad += 1
            for rule, msg in report.violations:
                print(f"{record.image_path} instance {inst.id}: {rule} {msg}")
    print(f"{bad} instance(s) with violations")
    return EXIT_DATA if bad and args.strict else EXIT_OK


def _strict_check(records, cfg):
    for record in records:
        for inst in record.instances:
            report = validate_instance(inst, cfg.psi)
            if not report.ok:
                rule, msg = report.violations[0]
                raise DataError(f"{record.image_path} instance {inst.id}: {rule} {msg}")


def _diagnostics(cfg, args, kind: str) -> int:
    records = _records(cfg)
    if args.strict:
        _strict_check(records, cfg)
    out = _out_dir(cfg, kind)
    failures = 0
    for k, record in enumerate(records):
        geometry, failed = record_geometry(record, cfg)
        failures += len(failed)
        stem = _stem(k, record)
        source = read_rgb(record.image_path)
        if kind in ("segment", "overlay"):
            write_png(out / f"{stem}_segment.png", segmentation_overlay(source, geometry))
        if kind in ("reconstruct", "overlay"):
            write_png(out / f"{stem}_reconstruct.png", reconstruction_overlay(source, geometry))
        if kind == "segment":
            doc = [surfaces_to_json(s) for s, _ in geometry]
        elif kind == "reconstruct":
            doc = [reconstruction_to_json(s, r) for s, r in geometry]
        else:
            doc = None
        if doc is not None:
            payload = {
                "image": record.image_path,
                "instances": doc,
                "failures": [{"instance_id": i, "message": str(e)} for i, e in failed],
            }
            (out / f"{stem}.json").write_text(json.dumps(payload, indent=1))
        for inst_id, exc in failed:
            print(f"{record.image_path} instance {inst_id}: {exc}", file=sys.stderr)
    if failures and args.strict:
        return EXIT_DATA
    return EXIT_OK


def cmd_synth(cfg, args) -> int:
    if args.strict:
        _strict_check(_records(cfg), cfg)
    manifest = run_generation(cfg, jobs=max(1, args.jobs))
    failures = sum(len(img["failures"]) for img in manifest["images"])
    textured = sum(len(img["instances"]) for img in manifest["images"])
    print(f"wrote {len(manifest['images'])} images to {cfg.output_dir}: "
          f"{textured} instances textured, {failures} skipped")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "segment": lambda c, a: _diagnostics(c, a, "segment"),
    "reconstruct": lambda c, a: _diagnostics(c, a, "reconstruct"),
    "overlay": lambda c, a: _diagnostics(c, a, "overlay"),
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CartonSynthError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
