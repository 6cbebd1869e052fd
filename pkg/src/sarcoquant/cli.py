"""Command line interface.

Subcommands: info, convert, preprocess, segment, measure, evaluate,
phantom. Exit codes: 0 on success, 1 when any input row or file fails,
2 for bad invocations (argparse usage errors).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import baseline_seg, geometry, preprocess, sma
from .config import OUTPUT_FORMATS, RunConfig, build_config
from .errors import (
    BadManifest,
    GeometryMismatch,
    NoInput,
    SarcoquantError,
)
from .metrics import EvalRecord, dice
from .nifti_io import load_volume, save_volume
from .phantom import PhantomSpec, generate
from .report import (
    ReportRow,
    compute_summary,
    render_csv,
    render_figures,
    render_json,
    row_from_record,
    summary_lines,
    write_report,
)
from .volume import MaskVolume, geometry_matches
from . import dicom_io


def _triple(text: str) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 1 or 3 comma-separated values, got {text!r}")
    return tuple(float(p) for p in parts)


def _int_triple(text: str) -> tuple:
    values = _triple(text)
    return tuple(int(v) for v in values)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for key in (
        "orientation",
        "spacing",
        "hu_lo",
        "hu_hi",
        "cutoff_male",
        "cutoff_female",
        "slice_policy",
        "format",
        "seed",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return build_config(getattr(args, "config", None), **overrides)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise BadManifest(f"cannot read {text!r} as a boolean label")


def _fmt_floats(values) -> str:
    return " x ".join(repr(float(v)) for v in values)


def cmd_info(args: argparse.Namespace, config: RunConfig) -> int:
    volume = load_volume(args.path, kind=args.kind)
    data = volume.labels if isinstance(volume, MaskVolume) else volume.samples
    try:
        code = geometry.orientation_of(volume.affine)
    except SarcoquantError as exc:
        code = f"ambiguous ({exc})"
    print(f"path: {args.path}")
    print(f"kind: {args.kind}")
    print(f"dims: {volume.dims[0]} x {volume.dims[1]} x {volume.dims[2]}")
    print(f"spacing_mm: {_fmt_floats(geometry.voxel_spacing(volume.affine))}")
    print(f"orientation: {code}")
    print(f"value_range: [{data.min()}, {data.max()}]")
    return 0


def cmd_convert(args: argparse.Namespace, config: RunConfig) -> int:
    source = Path(args.dicom_dir)
    files = sorted(p for p in source.iterdir() if p.is_file())
    if not files:
        raise NoInput(f"no files in {source}")
    slices = []
    failures = 0
    for path in files:
        try:
            slices.append(dicom_io.parse_slice(path.read_bytes()))
        except (SarcoquantError, OSError) as exc:
            failures += 1
            print(f"{path.name}: {type(exc).__name__}: {exc}", file=sys.stderr)
    if failures:
        print(f"error: {failures} of {len(files)} files failed to parse", file=sys.stderr)
        return 1
    volume = dicom_io.assemble_series(slices)
    save_volume(args.out, volume)
    spacing = geometry.voxel_spacing(volume.affine)
    print(f"wrote {args.out} ({len(slices)} slices, spacing {_fmt_floats(spacing)} mm)")
    return 0


def cmd_preprocess(args: argparse.Namespace, config: RunConfig) -> int:
    volume = load_volume(args.image, kind="image")
    volume = geometry.reorient(volume, config.orientation)
    volume = geometry.resample(volume, config.spacing, "trilinear")
    window = config.hu_window()
    if args.no_normalize:
        volume = preprocess.clip_hu(volume, window)
    else:
        volume = preprocess.normalize_unit(volume, window)
    save_volume(args.out, volume)
    print(
        f"wrote {args.out} (dims {volume.dims[0]} x {volume.dims[1]} x {volume.dims[2]}, "
        f"spacing {_fmt_floats(geometry.voxel_spacing(volume.affine))} mm)"
    )
    return 0


def cmd_segment(args: argparse.Namespace, config: RunConfig) -> int:
    volume = load_volume(args.image, kind="image")
    volume = geometry.reorient(volume, config.orientation)
    axis = sma.axial_axis(volume.affine)
    size = volume.dims[axis]
    if not 0 <= args.slice < size:
        raise IndexError(f"slice {args.slice} outside 0..{size - 1}")
    hu = np.take(volume.samples, args.slice, axis=axis)
    pixel_area = geometry.slice_pixel_area(volume.affine, axis)
    result = baseline_seg.segment_slice(hu, pixel_area, config.seg_params())
    labels = np.zeros(volume.dims, dtype=np.uint8)
    indexer = [slice(None)] * 3
    indexer[axis] = args.slice
    labels[tuple(indexer)] = result.labels
    mask = MaskVolume(labels, volume.affine, source_id=Path(args.out).name)
    save_volume(args.out, mask)
    print(f"wrote {args.out} ({result.pixel_count} px, {result.area_cm2!r} cm^2, slice {args.slice})")
    return 0


def _measured_row(
    mask: MaskVolume,
    scan_id: str,
    config: RunConfig,
    sex: str | None,
) -> ReportRow:
    measurement = sma.measure_with_policy(mask, config.slice_policy, scan_id)
    sarcopenic = None
    if sex is not None:
        sarcopenic = sma.classify(measurement.area_cm2, sex, config.cutoffs(), scan_id).sarcopenic
    return ReportRow(
        scan_id=scan_id,
        gt_area_cm2=measurement.area_cm2,
        sex=sex,
        gt_sarcopenic=sarcopenic,
        slice_index=measurement.slice_index,
        pixel_area_mm2=measurement.pixel_area_mm2,
    )


def cmd_measure(args: argparse.Namespace, config: RunConfig) -> int:
    image = geometry.reorient(load_volume(args.image, kind="image"), config.orientation)
    mask = geometry.reorient(load_volume(args.mask, kind="mask"), config.orientation)
    if not geometry_matches(image, mask):
        raise GeometryMismatch(f"image {args.image} and mask {args.mask} do not share a grid")
    row = _measured_row(mask, Path(args.mask).stem.removesuffix(".nii"), config, args.sex)
    if args.out:
        write_report(args.out, [row], config)
        print(f"wrote {args.out}")
    else:
        text = render_csv([row], config) if config.format == "csv" else render_json([row], config)
        sys.stdout.write(text)
    print(f"area_cm2: {row.gt_area_cm2!r} (slice {row.slice_index})")
    if row.gt_sarcopenic is not None:
        print(f"sarcopenic: {'true' if row.gt_sarcopenic else 'false'} (sex {row.sex})")
    return 0


def _read_manifest(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = ("scan_id", "gt_mask_path", "pred_mask_path")
        missing = [col for col in required if col not in header]
        if missing:
            raise BadManifest(f"manifest {path} lacks columns {missing}")
        return list(reader)


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    manifest_path = Path(args.manifest)
    entries = _read_manifest(manifest_path)
    if not entries:
        raise NoInput(f"manifest {manifest_path} has no rows")
    base = manifest_path.parent

    records: list[EvalRecord] = []
    rows: list[ReportRow] = []
    failures = 0
    for entry in entries:
        scan_id = (entry.get("scan_id") or "").strip()
        try:
            if not scan_id:
                raise BadManifest("row without scan_id")
            gt_path = base / entry["gt_mask_path"]
            pred_path = base / entry["pred_mask_path"]
            gt = geometry.reorient(load_volume(gt_path, kind="mask"), config.orientation)
            pred = geometry.reorient(load_volume(pred_path, kind="mask"), config.orientation)
            if not geometry_matches(gt, pred):
                raise GeometryMismatch(f"masks for {scan_id} do not share a grid")
            sex = (entry.get("sex") or "").strip() or None
            if sex is not None:
                sex = sma.parse_sex(sex)
            raw_label = (entry.get("gt_label") or "").strip()

            gt_meas = sma.measure_with_policy(gt, config.slice_policy, scan_id)
            pred_meas = sma.measure_with_policy(pred, config.slice_policy, scan_id)
            overlap = dice(gt, pred)

            gt_sarc = _parse_bool(raw_label) if raw_label else None
            pred_sarc = None
            if sex is not None:
                pred_sarc = sma.classify(pred_meas.area_cm2, sex, config.cutoffs()).sarcopenic
                if gt_sarc is None:
                    gt_sarc = sma.classify(gt_meas.area_cm2, sex, config.cutoffs()).sarcopenic
            record = EvalRecord.build(
                scan_id,
                gt_meas.area_cm2,
                pred_meas.area_cm2,
                overlap,
                sex=sex,
                gt_sarcopenic=gt_sarc,
                pred_sarcopenic=pred_sarc,
            )
            records.append(record)
            rows.append(row_from_record(record, gt_meas.slice_index, gt_meas.pixel_area_mm2))
        except (SarcoquantError, OSError, ValueError) as exc:
            failures += 1
            print(f"{scan_id or '<row>'}: {type(exc).__name__}: {exc}", file=sys.stderr)

    if not records:
        print("error: no rows evaluated", file=sys.stderr)
        return 1
    summary = compute_summary(records)
    write_report(args.out, rows, config, summary)
    for line in summary_lines(summary):
        print(line)
    print(f"wrote {args.out} ({len(rows)} rows)")
    if args.figures_dir:
        for path in render_figures(records, args.figures_dir):
            print(f"wrote {path}")
    return 1 if failures else 0


def cmd_phantom(args: argparse.Namespace, config: RunConfig) -> int:
    defaults = PhantomSpec()
    spec = PhantomSpec(
        dims=args.dims if args.dims else defaults.dims,
        spacing=args.spacing if args.spacing else defaults.spacing,
        outer_a_mm=args.outer_a,
        outer_b_mm=args.outer_b,
        ring_mm=args.ring,
        muscle_hu=args.muscle_hu,
        interior_hu=args.interior_hu,
        background_hu=args.background_hu,
        annotated_slice=args.slice if args.slice is not None else min(defaults.annotated_slice, (args.dims[2] - 1) if args.dims else defaults.dims[2] - 1),
        noise_sd=args.noise_sd,
        seed=config.seed,
    )
    image, mask, analytic = generate(spec)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    image_path = prefix.parent / (prefix.name + "_image.nii.gz")
    mask_path = prefix.parent / (prefix.name + "_mask.nii.gz")
    truth_path = prefix.parent / (prefix.name + "_truth.json")
    save_volume(image_path, image)
    save_volume(mask_path, mask)
    truth = {
        "analytic_area_cm2": analytic,
        "annotated_slice": spec.annotated_slice,
        "dims": list(spec.dims),
        "spacing_mm": list(spec.spacing),
        "outer_a_mm": spec.outer_a_mm,
        "outer_b_mm": spec.outer_b_mm,
        "ring_mm": spec.ring_mm,
        "muscle_hu": spec.muscle_hu,
        "interior_hu": spec.interior_hu,
        "background_hu": spec.background_hu,
        "noise_sd": spec.noise_sd,
        "seed": spec.seed,
    }
    truth_path.write_text(json.dumps(truth, indent=2) + "\n")
    print(f"wrote {image_path}")
    print(f"wrote {mask_path}")
    print(f"wrote {truth_path} (analytic area {analytic!r} cm^2)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarcoquant",
        description="Skeletal muscle area measurement and sarcopenia assessment from CT",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key=value config file; flags override it")
    common.add_argument("--orientation", help="target orientation code (default RAS)")
    common.add_argument("--spacing", type=_triple, help="target spacing in mm, one value or three")
    common.add_argument("--hu-lo", dest="hu_lo", type=float, help="HU window floor")
    common.add_argument("--hu-hi", dest="hu_hi", type=float, help="HU window ceiling")
    common.add_argument("--cutoff-male", dest="cutoff_male", type=float, help="male cutoff in cm^2")
    common.add_argument("--cutoff-female", dest="cutoff_female", type=float, help="female cutoff in cm^2")
    common.add_argument("--slice-policy", dest="slice_policy", help="single, sum, largest or index=<k>")
    common.add_argument("--format", choices=OUTPUT_FORMATS, help="report format (default csv)")
    common.add_argument("--seed", type=int, help="seed for stochastic steps")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", parents=[common], help="print volume geometry and value range")
    p.add_argument("path")
    p.add_argument("--kind", choices=("image", "mask"), default="image")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("convert", parents=[common], help="assemble a DICOM series directory into NIfTI")
    p.add_argument("dicom_dir")
    p.add_argument("out")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("preprocess", parents=[common], help="reorient, resample and window an image")
    p.add_argument("image")
    p.add_argument("out")
    p.add_argument("--no-normalize", action="store_true", help="clip only, keep HU values")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("segment", parents=[common], help="run the baseline segmenter on one slice")
    p.add_argument("image")
    p.add_argument("out")
    p.add_argument("--slice", type=int, required=True, help="transverse slice index")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("measure", parents=[common], help="measure muscle area from a mask")
    p.add_argument("image")
    p.add_argument("mask")
    p.add_argument("--sex", choices=sma.SEXES, help="enables the sarcopenia call")
    p.add_argument("--out", help="report path; stdout when omitted")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("evaluate", parents=[common], help="score predicted masks against references")
    p.add_argument("manifest", help="CSV with scan_id, gt_mask_path, pred_mask_path[, sex, gt_label]")
    p.add_argument("out", help="report path")
    p.add_argument("--figures-dir", dest="figures_dir", help="also render evaluation figures here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("phantom", parents=[common], help="write a synthetic phantom with known area")
    p.add_argument("out_prefix", help="output prefix for _image/_mask/_truth files")
    p.add_argument("--dims", type=_int_triple, help="grid size, e.g. 160,128,5")
    p.add_argument("--outer-a", dest="outer_a", type=float, default=PhantomSpec.outer_a_mm)
    p.add_argument("--outer-b", dest="outer_b", type=float, default=PhantomSpec.outer_b_mm)
    p.add_argument("--ring", type=float, default=PhantomSpec.ring_mm, help="ring thickness in mm")
    p.add_argument("--muscle-hu", dest="muscle_hu", type=float, default=PhantomSpec.muscle_hu)
    p.add_argument("--interior-hu", dest="interior_hu", type=float, default=PhantomSpec.interior_hu)
    p.add_argument("--background-hu", dest="background_hu", type=float, default=PhantomSpec.background_hu)
    p.add_argument("--slice", type=int, help="annotated slice index")
    p.add_argument("--noise-sd", dest="noise_sd", type=float, default=0.0, help="image noise sigma in HU")
    p.set_defaults(func=cmd_phantom)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _config_from_args(args)
        return int(args.func(args, config))
    except (SarcoquantError, OSError, ValueError, IndexError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
