"""Command-line interface: lint, build, inspect, verify, eval, eval-types, config.

Machine artifacts go to stdout or files; logging goes to stderr. Exit
codes are a stable contract: 0 success, 1 internal error, 2 input error.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any

import click

from . import __version__
from .errors import InputError, P2cError
from .layout import dump_layout_tree
from .linting import hierarchy_to_json_dict
from .metrics import RasterImage, compare_images
from .model import Rect, parse_annotations, parse_prototype
from .pipeline import (
    BuildArtifacts,
    PipelineConfig,
    lint_report_dict,
    load_config,
    run_build,
    run_lint,
    write_build_outputs,
)
from .recognition import evaluate_classifier, load_label_map
from .replay import NodeDeviation, box_deviation, parse_css_text, parse_html_text, replay_layout


def _echo_json(obj: Any) -> None:
    click.echo(json.dumps(obj, indent=2))


def handle_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (InputError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except P2cError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def config_options(f):
    options = [
        click.option("--config", "-c", "config_path", type=click.Path(), default=None,
                     help="Config file (key = value lines)."),
        click.option("--eps-containment", type=float, default=None),
        click.option("--iou-threshold", type=float, default=None),
        click.option("--overlap-eps", type=float, default=None),
        click.option("--max-icon-px", type=float, default=None),
        click.option("--gap-px", type=float, default=None),
        click.option("--encoding-levels", type=int, default=None),
        click.option("--detector", type=str, default=None,
                     help="Detector implementation: passthrough or heuristic."),
        click.option("--style-oracle", type=str, default=None,
                     help="Visual style oracle: rules or llm."),
        click.option("--taxonomy", type=str, default=None,
                     help="Comma-separated element-type labels."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _build_config(config_path: str | None, **overrides: Any) -> PipelineConfig:
    if overrides.get("taxonomy") is not None:
        overrides["taxonomy"] = tuple(
            x.strip() for x in overrides["taxonomy"].split(",") if x.strip()
        )
    return load_config(config_path, overrides)


def _load_inputs(proto_path: str, annotations_path: str | None):
    try:
        doc = parse_prototype(Path(proto_path).read_bytes())
    except InputError as exc:
        raise type(exc)(f"{proto_path}: {exc}") from exc
    annotations = None
    if annotations_path is not None:
        try:
            annotations = parse_annotations(Path(annotations_path).read_bytes(), doc)
        except InputError as exc:
            raise type(exc)(f"{annotations_path}: {exc}") from exc
    return doc, annotations


@click.group()
@click.version_option(version=__version__, prog_name="p2c")
def cli() -> None:
    """Compile UI design prototypes into responsive HTML+CSS."""
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.argument("proto", type=click.Path())
@click.option("--annotations", "annotations_path", type=click.Path(), default=None)
@config_options
@handle_errors
def lint(proto, annotations_path, config_path, **overrides) -> None:
    """Lint a prototype: merge groups, perceptual groups, warnings."""
    config = _build_config(config_path, **overrides)
    doc, annotations = _load_inputs(proto, annotations_path)
    result = run_lint(doc, annotations, config)
    _echo_json(lint_report_dict(result))


@cli.command()
@click.argument("proto", type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Output directory.")
@click.option("--annotations", "annotations_path", type=click.Path(), default=None)
@click.option("--dump-layout-tree", is_flag=True, default=False,
              help="Also write layout-tree.json next to the outputs.")
@config_options
@handle_errors
def build(proto, out_dir, annotations_path, dump_layout_tree, config_path, **overrides) -> None:
    """Run the full pipeline and write index.html, style.css and the manifest."""
    config = _build_config(config_path, **overrides)
    doc, annotations = _load_inputs(proto, annotations_path)
    artifacts = run_build(doc, annotations, config)
    write_build_outputs(artifacts, out_dir, dump_tree=dump_layout_tree)
    _echo_json(artifacts.report.to_json_dict())


@cli.command()
@click.argument("proto", type=click.Path())
@click.option("--stage", type=click.Choice(["hierarchy", "layout"]), default="layout")
@click.option("--annotations", "annotations_path", type=click.Path(), default=None)
@config_options
@handle_errors
def inspect(proto, stage, annotations_path, config_path, **overrides) -> None:
    """Dump an intermediate pipeline stage as JSON."""
    from .layout import build_layout_tree

    config = _build_config(config_path, **overrides)
    doc, annotations = _load_inputs(proto, annotations_path)
    result = run_lint(doc, annotations, config)
    if stage == "hierarchy":
        _echo_json(hierarchy_to_json_dict(result.hierarchy))
        return
    tree = build_layout_tree(
        result.hierarchy, doc, eps=config.eps_containment, overlap_eps=config.overlap_eps
    )
    click.echo(dump_layout_tree(tree), nl=False)


def _parse_viewport(value: str | None) -> Rect | None:
    if value is None:
        return None
    try:
        w, h = value.lower().split("x", 1)
        return Rect(0.0, 0.0, float(w), float(h))
    except (ValueError, TypeError):
        raise InputError(f"--viewport must look like 800x600, got {value!r}") from None


@cli.command()
@click.argument("outdir", type=click.Path())
@click.option("--proto", "proto_path", type=click.Path(), required=True,
              help="Source prototype the output was built from.")
@click.option("--annotations", "annotations_path", type=click.Path(), default=None)
@click.option("--viewport", type=str, default=None, help="Replay viewport, e.g. 800x600.")
@click.option("--report-dir", type=click.Path(), default=None,
              help="Write deviations.csv and overlay.png here.")
@config_options
@handle_errors
def verify(outdir, proto_path, annotations_path, viewport, report_dir, config_path, **overrides) -> None:
    """Replay emitted code and report per-node deviation from the prototype."""
    config = _build_config(config_path, **overrides)
    doc, annotations = _load_inputs(proto_path, annotations_path)

    out = Path(outdir)
    html = parse_html_text((out / "index.html").read_text("utf-8"))
    css = parse_css_text((out / "style.css").read_text("utf-8"))

    artifacts: BuildArtifacts = run_build(doc, annotations, config)
    if artifacts.page_text != (out / "index.html").read_text("utf-8"):
        click.echo("warning: index.html differs from a fresh build of the prototype", err=True)

    source_by_classname = {
        node.classname: node for node in artifacts.tree.nodes() if node.classname
    }
    boxes = replay_layout(html, css, viewport=_parse_viewport(viewport))

    deviations: list[NodeDeviation] = []
    unmatched: list[str] = []
    for box in boxes:
        node = source_by_classname.get(box.classname)
        if node is None:
            unmatched.append(box.classname)
            continue
        if viewport is not None and node is artifacts.tree.root:
            continue  # root box intentionally resized by the viewport
        deviations.append(
            NodeDeviation(
                node_id=node.id,
                classname=box.classname,
                source=node.rect,
                replayed=box.rect,
                deviation=box_deviation(node.rect, box.rect),
            )
        )

    values = [d.deviation for d in deviations]
    result = {
        "nodes": [
            {"node_id": d.node_id, "classname": d.classname, "deviation_px": round(d.deviation, 4)}
            for d in deviations
        ],
        "max_deviation_px": round(max(values), 4) if values else 0.0,
        "mean_deviation_px": round(sum(values) / len(values), 4) if values else 0.0,
        "unmatched_classnames": unmatched,
    }
    if report_dir is not None:
        from .report import write_deviation_csv, write_deviation_figure

        rd = Path(report_dir)
        rd.mkdir(parents=True, exist_ok=True)
        write_deviation_csv(rd / "deviations.csv", deviations)
        write_deviation_figure(rd / "overlay.png", deviations, doc.canvas)
    _echo_json(result)


@cli.command("eval")
@click.option("--ref", "ref_path", type=click.Path(), required=True, help="Reference design PNG.")
@click.option("--render", "render_path", type=click.Path(), required=True, help="Rendered output PNG.")
@click.option("--report-dir", type=click.Path(), default=None,
              help="Write similarity.csv and diff.png here.")
@handle_errors
def eval_images(ref_path, render_path, report_dir) -> None:
    """Image-similarity metrics (SSIM / PSNR / MSE) between two PNGs."""
    warnings: list[str] = []
    ref = RasterImage.load_png(ref_path)
    render = RasterImage.load_png(render_path)
    report = compare_images(ref, render, warnings=warnings)
    for w in warnings:
        click.echo(f"warning: {w}", err=True)
    if report_dir is not None:
        from .report import write_similarity_csv, write_similarity_figure

        rd = Path(report_dir)
        rd.mkdir(parents=True, exist_ok=True)
        write_similarity_csv(rd / "similarity.csv", report)
        write_similarity_figure(rd / "diff.png", ref, render, report)
    _echo_json(report.to_json_dict())


@cli.command("eval-types")
@click.option("--pred", "pred_path", type=click.Path(), required=True)
@click.option("--truth", "truth_path", type=click.Path(), required=True)
@click.option("--report-dir", type=click.Path(), default=None,
              help="Write type-metrics.csv and f1.png here.")
@config_options
@handle_errors
def eval_types(pred_path, truth_path, report_dir, config_path, **overrides) -> None:
    """Evaluate a classifier's label map against ground truth."""
    config = _build_config(config_path, **overrides)
    pred = load_label_map(Path(pred_path).read_bytes())
    truth = load_label_map(Path(truth_path).read_bytes())
    report = evaluate_classifier(pred, truth, config.taxonomy)
    if report_dir is not None:
        from .report import write_type_metrics_csv, write_type_metrics_figure

        rd = Path(report_dir)
        rd.mkdir(parents=True, exist_ok=True)
        write_type_metrics_csv(rd / "type-metrics.csv", report)
        write_type_metrics_figure(rd / "f1.png", report)
    _echo_json(report.to_json_dict())
    click.echo(report.format_table(), err=True)


@cli.command("config")
@click.option("--show", is_flag=True, default=True, help="Print the effective configuration.")
@config_options
@handle_errors
def config_cmd(show, config_path, **overrides) -> None:
    """Show the effective configuration (defaults, file, then flags)."""
    config = _build_config(config_path, **overrides)
    click.echo(config.to_text(), nl=False)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
