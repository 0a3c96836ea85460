from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from p2c.cli import cli

runner = CliRunner()

CARD_FIXTURE = {
    "canvas": {"w": 400, "h": 640},
    "layers": [
        {"id": "card", "name": "card", "kind": "shape",
         "rect": {"x": 40, "y": 200, "w": 320, "h": 160},
         "style": {"fill": "#FFFFFF", "border-radius": 12}},
        {"id": "price", "name": "price", "kind": "text",
         "rect": {"x": 60, "y": 230, "w": 80, "h": 24}, "text": "$190"},
        {"id": "hours", "name": "hours", "kind": "text",
         "rect": {"x": 240, "y": 230, "w": 100, "h": 24}, "text": "16 hours"},
        {"id": "photo", "name": "photo", "kind": "image",
         "rect": {"x": 60, "y": 280, "w": 280, "h": 60}},
    ],
}

WIFI_FIXTURE = {
    "canvas": {"w": 400, "h": 640},
    "layers": [
        {"id": "arc1", "name": "arc", "kind": "vector", "rect": {"x": 100, "y": 100, "w": 24, "h": 8}},
        {"id": "arc2", "name": "arc", "kind": "vector", "rect": {"x": 104, "y": 110, "w": 16, "h": 8}},
        {"id": "arc3", "name": "arc", "kind": "vector", "rect": {"x": 108, "y": 120, "w": 8, "h": 4}},
    ],
}


@pytest.fixture
def proto_path(tmp_path) -> Path:
    path = tmp_path / "proto.json"
    path.write_text(json.dumps(CARD_FIXTURE))
    return path


def write_png(path: Path, arr: np.ndarray) -> Path:
    from PIL import Image

    Image.fromarray(arr).save(path)
    return path


# --- lint -------------------------------------------------------------------------


def test_lint_valid_fixture_exit_zero(proto_path):
    result = runner.invoke(cli, ["lint", str(proto_path)])
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert set(report) == {"merge_groups", "perceptual_groups", "warnings"}
    assert any(g["type"] == "card" for g in report["perceptual_groups"])


def test_lint_malformed_json_exit_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    result = runner.invoke(cli, ["lint", str(bad)])
    assert result.exit_code == 2
    assert "error:" in result.stderr


def test_lint_missing_file_exit_two(tmp_path):
    result = runner.invoke(cli, ["lint", str(tmp_path / "absent.json")])
    assert result.exit_code == 2


def test_lint_heuristic_detects_wifi_merge(tmp_path):
    path = tmp_path / "wifi.json"
    path.write_text(json.dumps(WIFI_FIXTURE))
    result = runner.invoke(cli, ["lint", str(path), "--detector", "heuristic"])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["merge_groups"] == [["arc1", "arc2", "arc3"]]


def test_lint_passthrough_with_annotations(tmp_path):
    proto = tmp_path / "wifi.json"
    proto.write_text(json.dumps(WIFI_FIXTURE))
    ann = tmp_path / "ann.json"
    ann.write_text(json.dumps({"merge_groups": [["arc1", "arc2"]]}))
    result = runner.invoke(
        cli, ["lint", str(proto), "--detector", "passthrough", "--annotations", str(ann)]
    )
    assert result.exit_code == 0
    assert json.loads(result.stdout)["merge_groups"] == [["arc1", "arc2"]]


# --- build ------------------------------------------------------------------------


def test_build_writes_three_files_and_report(proto_path, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["build", str(proto_path), "--out", str(out)])
    assert result.exit_code == 0, result.output
    for name in ("index.html", "style.css", "assets-manifest.json"):
        assert (out / name).exists()
    report = json.loads(result.stdout)
    assert report["counts"]["layers"] == 4
    assert set(report["timings_ms"]) == {"lint", "layout", "recognize", "emit"}
    html = (out / "index.html").read_text()
    assert html.count("<span") == 2


def test_build_reruns_byte_identical(proto_path, tmp_path):
    hashes = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        result = runner.invoke(cli, ["build", str(proto_path), "--out", str(out)])
        assert result.exit_code == 0
        digest = hashlib.sha256()
        for name in ("index.html", "style.css", "assets-manifest.json"):
            digest.update((out / name).read_bytes())
        hashes.append(digest.hexdigest())
    assert hashes[0] == hashes[1]


def test_build_llm_without_key_is_config_error(proto_path, tmp_path, monkeypatch):
    monkeypatch.delenv("P2C_LLM_ENDPOINT", raising=False)
    monkeypatch.delenv("P2C_LLM_API_KEY", raising=False)
    result = runner.invoke(
        cli, ["build", str(proto_path), "--out", str(tmp_path / "o"), "--style-oracle", "llm"]
    )
    assert result.exit_code == 2
    assert "P2C_LLM" in result.stderr


def test_build_dump_layout_tree_flag(proto_path, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        cli, ["build", str(proto_path), "--out", str(out), "--dump-layout-tree"]
    )
    assert result.exit_code == 0
    dump = json.loads((out / "layout-tree.json").read_text())
    assert {"id", "rect", "flex_direction", "need_absolute", "children"} <= set(dump)


# --- inspect ------------------------------------------------------------------------


def test_inspect_layout_shows_flex_direction(proto_path):
    result = runner.invoke(cli, ["inspect", str(proto_path)])
    assert result.exit_code == 0
    assert '"flex_direction": "row"' in result.stdout


def test_inspect_hierarchy_stage(proto_path):
    result = runner.invoke(cli, ["inspect", str(proto_path), "--stage", "hierarchy"])
    assert result.exit_code == 0
    dump = json.loads(result.stdout)
    assert {"id", "rect", "merge", "group", "group_type", "children"} <= set(dump)


def test_inspect_empty_doc_root_only(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps({"canvas": {"w": 100, "h": 100}, "layers": []}))
    result = runner.invoke(cli, ["inspect", str(path)])
    assert result.exit_code == 0
    dump = json.loads(result.stdout)
    assert dump["children"] == []


# --- verify -------------------------------------------------------------------------


def test_verify_roundtrip_zero_deviation(proto_path, tmp_path):
    out = tmp_path / "out"
    assert runner.invoke(cli, ["build", str(proto_path), "--out", str(out)]).exit_code == 0
    result = runner.invoke(cli, ["verify", str(out), "--proto", str(proto_path)])
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert report["max_deviation_px"] <= 1.0
    assert report["unmatched_classnames"] == []


def test_verify_with_viewport_and_report_dir(proto_path, tmp_path):
    out = tmp_path / "out"
    runner.invoke(cli, ["build", str(proto_path), "--out", str(out)])
    report_dir = tmp_path / "report"
    result = runner.invoke(
        cli,
        ["verify", str(out), "--proto", str(proto_path),
         "--viewport", "500x640", "--report-dir", str(report_dir)],
    )
    assert result.exit_code == 0, result.output
    assert (report_dir / "deviations.csv").exists()
    assert (report_dir / "overlay.png").exists()
    csv_text = (report_dir / "deviations.csv").read_text()
    assert csv_text.splitlines()[0].startswith("node_id,classname")


def test_verify_bad_viewport_exit_two(proto_path, tmp_path):
    out = tmp_path / "out"
    runner.invoke(cli, ["build", str(proto_path), "--out", str(out)])
    result = runner.invoke(
        cli, ["verify", str(out), "--proto", str(proto_path), "--viewport", "bogus"]
    )
    assert result.exit_code == 2


# --- eval ---------------------------------------------------------------------------


def test_eval_identical_images(tmp_path):
    rng = np.random.default_rng(5)
    arr = (rng.random((32, 32, 3)) * 255).astype(np.uint8)
    ref = write_png(tmp_path / "ref.png", arr)
    result = runner.invoke(cli, ["eval", "--ref", str(ref), "--render", str(ref)])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["ssim"] == pytest.approx(1.0, abs=1e-9)
    assert report["psnr_infinite"] is True
    assert report["mse"] == 0.0


def test_eval_different_images_with_figures(tmp_path):
    rng = np.random.default_rng(6)
    a = (rng.random((32, 32, 3)) * 255).astype(np.uint8)
    b = (rng.random((32, 32, 3)) * 255).astype(np.uint8)
    report_dir = tmp_path / "rep"
    result = runner.invoke(
        cli,
        ["eval", "--ref", str(write_png(tmp_path / "a.png", a)),
         "--render", str(write_png(tmp_path / "b.png", b)),
         "--report-dir", str(report_dir)],
    )
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert 0.0 < report["mse"] < 1.0
    assert (report_dir / "similarity.csv").exists()
    assert (report_dir / "diff.png").exists()


def test_eval_missing_file_exit_two(tmp_path):
    result = runner.invoke(
        cli, ["eval", "--ref", str(tmp_path / "x.png"), "--render", str(tmp_path / "y.png")]
    )
    assert result.exit_code == 2


# --- eval-types ----------------------------------------------------------------------


def test_eval_types_reports_metrics(tmp_path):
    truth = {"a": "text", "b": "text", "c": "image"}
    pred = {"a": "text", "b": "image", "c": "image"}
    tp = tmp_path / "truth.json"
    pp = tmp_path / "pred.json"
    tp.write_text(json.dumps(truth))
    pp.write_text(json.dumps(pred))
    report_dir = tmp_path / "rep"
    result = runner.invoke(
        cli, ["eval-types", "--pred", str(pp), "--truth", str(tp), "--report-dir", str(report_dir)]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert report["labels"]["text"]["tp"] == 1
    assert report["labels"]["text"]["fn"] == 1
    assert "label" in result.stderr  # aligned table on stderr
    assert (report_dir / "type-metrics.csv").exists()
    assert (report_dir / "f1.png").exists()


def test_eval_types_key_mismatch_exit_two(tmp_path):
    tp = tmp_path / "truth.json"
    pp = tmp_path / "pred.json"
    tp.write_text(json.dumps({"a": "text"}))
    pp.write_text(json.dumps({"b": "text"}))
    result = runner.invoke(cli, ["eval-types", "--pred", str(pp), "--truth", str(tp)])
    assert result.exit_code == 2


# --- config ---------------------------------------------------------------------------


def test_config_show_defaults():
    result = runner.invoke(cli, ["config", "--show"])
    assert result.exit_code == 0
    assert "eps_containment = 0.5" in result.output
    assert "iou_threshold = 0.7" in result.output
    assert "encoding_levels = 16" in result.output


def test_config_file_and_flag_override(tmp_path, proto_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("iou_threshold = 0.5\ngap_px = 8  # wider clustering\n")
    result = runner.invoke(cli, ["config", "-c", str(cfg)])
    assert "iou_threshold = 0.5" in result.output
    assert "gap_px = 8.0" in result.output
    result = runner.invoke(cli, ["config", "-c", str(cfg), "--iou-threshold", "0.9"])
    assert "iou_threshold = 0.9" in result.output


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("mystery = 1\n")
    result = runner.invoke(cli, ["config", "-c", str(cfg)])
    assert result.exit_code == 2


def test_config_rejects_bad_values():
    result = runner.invoke(cli, ["config", "--iou-threshold", "-1"])
    assert result.exit_code == 2


def test_lint_output_byte_identical_across_runs(proto_path):
    a = runner.invoke(cli, ["lint", str(proto_path)])
    b = runner.invoke(cli, ["lint", str(proto_path)])
    assert a.exit_code == b.exit_code == 0
    assert a.stdout == b.stdout


def test_run_report_counts_match_recounts(proto_path, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        cli, ["build", str(proto_path), "--out", str(out), "--dump-layout-tree"]
    )
    assert result.exit_code == 0
    counts = json.loads(result.stdout)["counts"]

    # independent recounts from the written artifacts
    def walk_layers(items):
        total = 0
        for item in items:
            total += 1 + walk_layers(item.get("children", []))
        return total

    assert counts["layers"] == walk_layers(CARD_FIXTURE["layers"])
    assert counts["rules"] == (out / "style.css").read_text().count("{")

    def walk_nodes(node):
        return 1 + sum(walk_nodes(c) for c in node["children"])

    dump = json.loads((out / "layout-tree.json").read_text())
    assert counts["nodes"] == walk_nodes(dump)


def test_verify_detects_edited_output(proto_path, tmp_path):
    out = tmp_path / "out"
    runner.invoke(cli, ["build", str(proto_path), "--out", str(out)])
    css = (out / "style.css").read_text()
    (out / "style.css").write_text(css.replace("width: 320px", "width: 280px"), encoding="utf-8")
    result = runner.invoke(cli, ["verify", str(out), "--proto", str(proto_path)])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["max_deviation_px"] >= 40.0  # the shrunken card edge


def test_verify_rejects_unsupported_css(proto_path, tmp_path):
    out = tmp_path / "out"
    runner.invoke(cli, ["build", str(proto_path), "--out", str(out)])
    css = (out / "style.css").read_text()
    (out / "style.css").write_text(css.replace("display: flex;", "float: left;"), encoding="utf-8")
    result = runner.invoke(cli, ["verify", str(out), "--proto", str(proto_path)])
    assert result.exit_code == 2
    assert "float" in result.stderr


def test_eval_dimension_mismatch_exit_two(tmp_path):
    rng = np.random.default_rng(2)
    a = (rng.random((16, 16, 3)) * 255).astype(np.uint8)
    b = (rng.random((16, 20, 3)) * 255).astype(np.uint8)
    result = runner.invoke(
        cli,
        ["eval", "--ref", str(write_png(tmp_path / "a.png", a)),
         "--render", str(write_png(tmp_path / "b.png", b))],
    )
    assert result.exit_code == 2


def test_eval_types_custom_taxonomy(tmp_path):
    tp = tmp_path / "truth.json"
    pp = tmp_path / "pred.json"
    tp.write_text(json.dumps({"a": "widget"}))
    pp.write_text(json.dumps({"a": "widget"}))
    result = runner.invoke(
        cli, ["eval-types", "--pred", str(pp), "--truth", str(tp), "--taxonomy", "widget,gadget"]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert report["labels"]["widget"]["f1"] == 1.0
