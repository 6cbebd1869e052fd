from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from sarcoquant.cli import main
from sarcoquant.nifti_io import load_volume, save_volume
from sarcoquant.phantom import PhantomSpec, generate
from sarcoquant.volume import MaskVolume

from conftest import make_dicom_bytes, make_series_bytes


@pytest.fixture
def phantom_files(tmp_path):
    """Small phantom image/mask pair on disk plus its spec."""
    spec = PhantomSpec(dims=(60, 48, 3), spacing=(1.0, 1.0, 5.0),
                       outer_a_mm=20.0, outer_b_mm=14.0, ring_mm=5.0,
                       annotated_slice=1)
    image, mask, analytic = generate(spec)
    image_path = tmp_path / "image.nii.gz"
    mask_path = tmp_path / "mask.nii.gz"
    save_volume(image_path, image)
    save_volume(mask_path, mask)
    return {"spec": spec, "image": image_path, "mask": mask_path,
            "analytic": analytic, "mask_volume": mask}


class TestInvocation:
    def test_no_command_is_usage_error(self, capsys):
        assert main([]) == 2
        capsys.readouterr()

    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 2
        capsys.readouterr()

    def test_bad_flag_value_is_usage_error(self, capsys):
        assert main(["info", "x.nii", "--spacing", "a,b,c"]) == 2
        capsys.readouterr()

    def test_runtime_failure_is_exit_one(self, tmp_path, capsys):
        assert main(["info", str(tmp_path / "missing.nii.gz")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_orientation_is_exit_one(self, phantom_files, capsys):
        assert main(["info", str(phantom_files["image"]), "--orientation", "XYZ"]) == 1
        assert "error:" in capsys.readouterr().err


class TestInfo:
    def test_image_info(self, phantom_files, capsys):
        assert main(["info", str(phantom_files["image"])]) == 0
        out = capsys.readouterr().out
        assert "dims: 60 x 48 x 3" in out
        assert "spacing_mm: 1.0 x 1.0 x 5.0" in out
        assert "orientation: RAS" in out
        assert "value_range: [-1000.0, 50.0]" in out

    def test_mask_info(self, phantom_files, capsys):
        assert main(["info", str(phantom_files["mask"]), "--kind", "mask"]) == 0
        out = capsys.readouterr().out
        assert "kind: mask" in out
        assert "value_range: [0, 1]" in out


class TestConvert:
    def test_series_directory(self, tmp_path, capsys):
        series_dir = tmp_path / "series"
        series_dir.mkdir()
        for i, blob in enumerate(make_series_bytes([-100.0, -95.0, -90.0])):
            (series_dir / f"slice_{i:03d}.dcm").write_bytes(blob)
        out = tmp_path / "converted.nii.gz"
        assert main(["convert", str(series_dir), str(out)]) == 0
        assert "wrote" in capsys.readouterr().out
        volume = load_volume(out, kind="image")
        assert volume.dims == (6, 4, 3)
        np.testing.assert_allclose(volume.affine[2, 2], 5.0, atol=1e-6)

    def test_corrupt_file_fails_whole_conversion(self, tmp_path, capsys):
        series_dir = tmp_path / "series"
        series_dir.mkdir()
        blobs = make_series_bytes([-100.0, -95.0])
        (series_dir / "a.dcm").write_bytes(blobs[0])
        (series_dir / "b.dcm").write_bytes(blobs[1])
        (series_dir / "c.dcm").write_bytes(b"not dicom at all")
        out = tmp_path / "converted.nii.gz"
        assert main(["convert", str(series_dir), str(out)]) == 1
        err = capsys.readouterr().err
        assert "c.dcm" in err
        assert not out.exists()

    def test_empty_directory(self, tmp_path, capsys):
        series_dir = tmp_path / "series"
        series_dir.mkdir()
        assert main(["convert", str(series_dir), str(tmp_path / "o.nii.gz")]) == 1
        assert "NoInput" in capsys.readouterr().err


class TestPreprocess:
    def test_normalized_output(self, phantom_files, tmp_path, capsys):
        out = tmp_path / "prep.nii.gz"
        assert main(["preprocess", str(phantom_files["image"]), str(out)]) == 0
        capsys.readouterr()
        volume = load_volume(out, kind="image")
        assert volume.samples.min() >= 0.0
        assert volume.samples.max() <= 1.0

    def test_no_normalize_keeps_hu(self, phantom_files, tmp_path, capsys):
        out = tmp_path / "prep.nii.gz"
        assert main(["preprocess", str(phantom_files["image"]), str(out), "--no-normalize"]) == 0
        capsys.readouterr()
        volume = load_volume(out, kind="image")
        assert volume.samples.min() == -175.0
        assert volume.samples.max() == 50.0

    def test_spacing_flag_resamples(self, phantom_files, tmp_path, capsys):
        out = tmp_path / "prep.nii.gz"
        assert main(["preprocess", str(phantom_files["image"]), str(out),
                     "--spacing", "2,2,5"]) == 0
        capsys.readouterr()
        assert load_volume(out, kind="image").dims == (30, 24, 3)

    def test_config_file_and_flag_precedence(self, phantom_files, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("spacing = 2.0, 2.0, 5.0\n")
        out = tmp_path / "prep.nii.gz"
        assert main(["preprocess", str(phantom_files["image"]), str(out),
                     "--config", str(cfg)]) == 0
        assert load_volume(out, kind="image").dims == (30, 24, 3)
        assert main(["preprocess", str(phantom_files["image"]), str(out),
                     "--config", str(cfg), "--spacing", "4,4,5"]) == 0
        assert load_volume(out, kind="image").dims == (15, 12, 3)
        capsys.readouterr()


class TestSegment:
    def test_segments_annotated_slice(self, phantom_files, tmp_path, capsys):
        out = tmp_path / "pred.nii.gz"
        assert main(["segment", str(phantom_files["image"]), str(out), "--slice", "1"]) == 0
        assert "px" in capsys.readouterr().out
        pred = load_volume(out, kind="mask")
        truth = phantom_files["mask_volume"].labels
        np.testing.assert_array_equal(pred.labels, truth)

    def test_slice_out_of_range(self, phantom_files, tmp_path, capsys):
        out = tmp_path / "pred.nii.gz"
        assert main(["segment", str(phantom_files["image"]), str(out), "--slice", "9"]) == 1
        assert "error:" in capsys.readouterr().err


class TestMeasure:
    def test_stdout_csv(self, phantom_files, capsys):
        assert main(["measure", str(phantom_files["image"]), str(phantom_files["mask"])]) == 0
        out = capsys.readouterr().out
        assert "scan_id,gt_area_cm2" in out
        assert "area_cm2:" in out
        # raster area of this phantom
        assert "mask," in out

    def test_sex_enables_classification(self, phantom_files, capsys):
        assert main(["measure", str(phantom_files["image"]), str(phantom_files["mask"]),
                     "--sex", "female"]) == 0
        out = capsys.readouterr().out
        assert "sarcopenic: true (sex female)" in out

    def test_report_file_json(self, phantom_files, tmp_path, capsys):
        out = tmp_path / "measure.json"
        assert main(["measure", str(phantom_files["image"]), str(phantom_files["mask"]),
                     "--sex", "female", "--format", "json", "--out", str(out)]) == 0
        capsys.readouterr()
        doc = json.loads(out.read_text())
        row = doc["rows"][0]
        assert row["scan_id"] == "mask"
        assert row["gt_sarcopenic"] is True
        assert row["pred_area_cm2"] is None
        assert row["slice_index"] == 1

    def test_geometry_mismatch(self, phantom_files, tmp_path, capsys):
        other = MaskVolume(np.zeros((10, 10, 2), dtype=np.uint8), np.eye(4))
        other_path = tmp_path / "other.nii.gz"
        save_volume(other_path, other)
        assert main(["measure", str(phantom_files["image"]), str(other_path)]) == 1
        assert "GeometryMismatch" in capsys.readouterr().err


def _write_eval_tree(tmp_path, spec) -> Path:
    """Manifest with two scans: a perfect prediction and a degraded one."""
    masks = tmp_path / "masks"
    masks.mkdir()
    _, mask, _ = generate(spec)
    save_volume(masks / "gt1.nii.gz", mask)
    save_volume(masks / "pred1.nii.gz", mask)
    degraded = mask.labels.copy()
    on = np.argwhere(degraded[:, :, spec.annotated_slice] == 1)
    for i, j in on[:40]:
        degraded[i, j, spec.annotated_slice] = 0
    save_volume(masks / "gt2.nii.gz", mask)
    save_volume(masks / "pred2.nii.gz", MaskVolume(degraded, mask.affine))
    manifest = tmp_path / "manifest.csv"
    manifest.write_text(
        "scan_id,gt_mask_path,pred_mask_path,sex,gt_label\n"
        "p1,masks/gt1.nii.gz,masks/pred1.nii.gz,female,\n"
        "p2,masks/gt2.nii.gz,masks/pred2.nii.gz,female,true\n"
    )
    return manifest


class TestEvaluate:
    def test_two_scan_run(self, phantom_files, tmp_path, capsys):
        manifest = _write_eval_tree(tmp_path, phantom_files["spec"])
        report = tmp_path / "report.csv"
        assert main(["evaluate", str(manifest), str(report)]) == 0
        out = capsys.readouterr().out
        assert "dice: mean" in out
        assert "classification: 2/2 agree" in out
        lines = report.read_text().splitlines()
        data = [l for l in lines if l.startswith("p")]
        assert len(data) == 2
        assert data[0].startswith("p1,")
        p1 = data[0].split(",")
        assert float(p1[3]) == 1.0  # dice
        assert p1[6] == "female"

    def test_gt_label_overrides_area_call(self, phantom_files, tmp_path, capsys):
        masks = tmp_path / "masks"
        masks.mkdir()
        _, mask, _ = generate(phantom_files["spec"])
        save_volume(masks / "g.nii.gz", mask)
        save_volume(masks / "p.nii.gz", mask)
        manifest = tmp_path / "manifest.csv"
        # area says sarcopenic for a female, the label says not
        manifest.write_text(
            "scan_id,gt_mask_path,pred_mask_path,sex,gt_label\n"
            "s,masks/g.nii.gz,masks/p.nii.gz,female,false\n"
        )
        report = tmp_path / "report.csv"
        assert main(["evaluate", str(manifest), str(report)]) == 0
        capsys.readouterr()
        data = [l for l in report.read_text().splitlines() if l.startswith("s,")][0]
        cells = data.split(",")
        assert cells[7] == "false"  # gt_sarcopenic from the label
        assert cells[8] == "true"   # pred_sarcopenic from the area

    def test_bad_row_continues_and_flags_failure(self, phantom_files, tmp_path, capsys):
        manifest = _write_eval_tree(tmp_path, phantom_files["spec"])
        manifest.write_text(
            manifest.read_text()
            + "p3,masks/nope.nii.gz,masks/pred1.nii.gz,female,\n"
        )
        report = tmp_path / "report.csv"
        assert main(["evaluate", str(manifest), str(report)]) == 1
        captured = capsys.readouterr()
        assert "p3" in captured.err
        data = [l for l in report.read_text().splitlines() if l.startswith("p")]
        assert len(data) == 2  # good rows still reported

    def test_manifest_missing_columns(self, tmp_path, capsys):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("scan_id,gt_mask_path\na,b\n")
        assert main(["evaluate", str(manifest), str(tmp_path / "r.csv")]) == 1
        assert "BadManifest" in capsys.readouterr().err

    def test_empty_manifest(self, tmp_path, capsys):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("scan_id,gt_mask_path,pred_mask_path\n")
        assert main(["evaluate", str(manifest), str(tmp_path / "r.csv")]) == 1
        assert "NoInput" in capsys.readouterr().err

    def test_figures_rendered(self, phantom_files, tmp_path, capsys):
        manifest = _write_eval_tree(tmp_path, phantom_files["spec"])
        figs = tmp_path / "figs"
        assert main(["evaluate", str(manifest), str(tmp_path / "report.csv"),
                     "--figures-dir", str(figs)]) == 0
        capsys.readouterr()
        assert sorted(p.name for p in figs.iterdir()) == [
            "area_agreement.png", "dice_per_scan.png", "error_distribution.png",
        ]


class TestPhantomCommand:
    def test_writes_three_files_with_truth(self, tmp_path, capsys):
        prefix = tmp_path / "ph"
        assert main(["phantom", str(prefix)]) == 0
        capsys.readouterr()
        truth = json.loads((tmp_path / "ph_truth.json").read_text())
        assert truth["analytic_area_cm2"] == pytest.approx(9.0 * np.pi, abs=1e-12)
        assert truth["annotated_slice"] == 2
        image = load_volume(tmp_path / "ph_image.nii.gz", kind="image")
        mask = load_volume(tmp_path / "ph_mask.nii.gz", kind="mask")
        assert image.dims == mask.dims == (160, 128, 5)

    def test_seed_controls_noise(self, tmp_path, capsys):
        a = tmp_path / "a"
        b = tmp_path / "b"
        c = tmp_path / "c"
        for prefix, seed in ((a, "5"), (b, "5"), (c, "6")):
            assert main(["phantom", str(prefix), "--noise-sd", "15", "--seed", seed]) == 0
        capsys.readouterr()
        same = (tmp_path / "a_image.nii.gz").read_bytes()
        again = (tmp_path / "b_image.nii.gz").read_bytes()
        different = (tmp_path / "c_image.nii.gz").read_bytes()
        assert same == again
        assert same != different

    def test_single_slice_grid_clamps_annotation(self, tmp_path, capsys):
        prefix = tmp_path / "thin"
        assert main(["phantom", str(prefix), "--dims", "80,64,1"]) == 0
        capsys.readouterr()
        truth = json.loads((tmp_path / "thin_truth.json").read_text())
        assert truth["annotated_slice"] == 0
