"""Pipeline configuration and end-to-end build orchestration.

Every threshold the algorithms depend on lives in ``PipelineConfig`` with
a pinned default, can be overridden by a ``key = value`` config file and
then by CLI flags, and is printed by ``p2c config --show``. The build
itself is strictly sequential (lint -> layout -> recognize -> emit) and
byte-deterministic under a fixed config.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from .codegen import (
    CssRule,
    HtmlDoc,
    asset_manifest,
    emit_html,
    emit_layout_css,
    merge_visual_declarations,
    render_page,
    stylesheet_text,
)
from .errors import ConfigError
from .layout import LayoutTree, build_layout_tree, dump_layout_tree
from .linting import (
    HierarchyNode,
    PerceptualGroup,
    apply_merge_attr,
    assign_group_membership,
    get_detector,
    rebuild_hierarchy,
)
from .model import AnnotationSet, PrototypeDoc
from .recognition import DEFAULT_TAXONOMY, classify_heuristic
from .style_oracle import (
    LlmClient,
    build_llm_prompt,
    load_field_docs,
    parse_llm_reply,
    style_oracle_rules,
)

STYLE_ORACLES = ("rules", "llm")


@dataclass(frozen=True)
class PipelineConfig:
    """All tunable thresholds, with pinned defaults."""

    eps_containment: float = 0.5
    iou_threshold: float = 0.7
    overlap_eps: float = 1.0
    max_icon_px: float = 64.0
    gap_px: float = 4.0
    encoding_levels: int = 16
    detector: str = "heuristic"
    style_oracle: str = "rules"
    taxonomy: tuple[str, ...] = DEFAULT_TAXONOMY

    def validate(self) -> "PipelineConfig":
        for name in ("eps_containment", "iou_threshold", "overlap_eps", "max_icon_px", "gap_px"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.encoding_levels < 1:
            raise ConfigError("encoding_levels must be >= 1")
        get_detector(self.detector)
        if self.style_oracle not in STYLE_ORACLES:
            raise ConfigError(
                f"unknown style oracle {self.style_oracle!r}; available: {', '.join(STYLE_ORACLES)}"
            )
        if not self.taxonomy:
            raise ConfigError("taxonomy must not be empty")
        return self

    def merged(self, overrides: Mapping[str, Any]) -> "PipelineConfig":
        values = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **values).validate()

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "taxonomy":
                value = ",".join(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_FIELD_PARSERS: dict[str, Callable[[str], Any]] = {
    "eps_containment": float,
    "iou_threshold": float,
    "overlap_eps": float,
    "max_icon_px": float,
    "gap_px": float,
    "encoding_levels": int,
    "detector": str,
    "style_oracle": str,
    "taxonomy": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
}


def parse_config_file(text: str) -> dict[str, Any]:
    """Parse the ``key = value`` config format (comments with #)."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = _FIELD_PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    return out


def load_config(path: str | Path | None, overrides: Mapping[str, Any]) -> PipelineConfig:
    config = PipelineConfig()
    if path is not None:
        config = config.merged(parse_config_file(Path(path).read_text("utf-8")))
    return config.merged(overrides)


@dataclass
class RunReport:
    """Per-stage timings, collected warnings, artifact counts."""

    timings_ms: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "timings_ms": {k: round(v, 3) for k, v in self.timings_ms.items()},
            "warnings": list(self.warnings),
            "counts": dict(self.counts),
        }


@dataclass
class LintResult:
    hierarchy: HierarchyNode
    merge_groups: list[tuple[str, ...]]
    groups: list[PerceptualGroup]
    warnings: list[str]


def run_lint(
    doc: PrototypeDoc,
    annotations: AnnotationSet | None,
    config: PipelineConfig,
) -> LintResult:
    """Lint stage: rebuild hierarchy, detect fragments/groups, attach attrs."""
    warnings: list[str] = []
    hierarchy = rebuild_hierarchy(doc, eps=config.eps_containment)
    detector = get_detector(config.detector)
    merge_groups, groups = detector(doc, hierarchy, annotations, config, warnings)
    hierarchy = apply_merge_attr(hierarchy, merge_groups, doc, warnings=warnings)
    hierarchy = assign_group_membership(
        hierarchy, groups, config.iou_threshold, doc=doc, warnings=warnings
    )
    return LintResult(hierarchy, merge_groups, groups, warnings)


def lint_report_dict(result: LintResult) -> dict:
    return {
        "merge_groups": [list(g) for g in result.merge_groups],
        "perceptual_groups": [
            {
                "type": g.group_type.value,
                "rect": g.rect.to_json_dict(),
                "member_ids": sorted(g.member_ids),
                "confidence": g.confidence,
            }
            for g in result.groups
        ],
        "warnings": list(result.warnings),
    }


@dataclass
class BuildArtifacts:
    doc: PrototypeDoc
    lint: LintResult
    tree: LayoutTree
    types: dict[str, str]
    html: HtmlDoc
    css_rules: list[CssRule]
    manifest: dict[str, dict[str, float]]
    report: RunReport

    @property
    def page_text(self) -> str:
        return render_page(self.html)

    @property
    def stylesheet(self) -> str:
        return stylesheet_text(self.css_rules)

    @property
    def manifest_text(self) -> str:
        return json.dumps(self.manifest, indent=2, sort_keys=True) + "\n"


def _visual_declarations(
    tree: LayoutTree,
    doc: PrototypeDoc,
    config: PipelineConfig,
    warnings: list[str],
    llm_client: LlmClient | None,
) -> dict[str, list[tuple[str, str]]]:
    out: dict[str, list[tuple[str, str]]] = {}
    field_docs = load_field_docs() if config.style_oracle == "llm" else None
    for node in tree.nodes():
        layer = doc.layer_map.get(node.id)
        if layer is None or not layer.style:
            continue
        if config.style_oracle == "rules":
            decls = style_oracle_rules(node, layer.style, warnings=warnings)
        else:
            assert llm_client is not None and field_docs is not None
            prompt = build_llm_prompt(node, layer.style, field_docs, warnings=warnings)
            decls = parse_llm_reply(llm_client.complete(prompt.text()), warnings=warnings)
        if decls:
            assert node.classname is not None
            out[node.classname] = decls
    return out


def _timed_stage(name: str, report: RunReport, fn: Callable[[], Any]) -> Any:
    """Run one stage; failures are re-raised with the stage name attached."""
    started = time.perf_counter()
    try:
        return fn()
    except Exception as exc:
        exc.args = (f"stage {name}: {exc}",) + exc.args[1:]
        raise
    finally:
        report.timings_ms[name] = (time.perf_counter() - started) * 1000.0


def run_build(
    doc: PrototypeDoc,
    annotations: AnnotationSet | None,
    config: PipelineConfig,
    *,
    llm_client: LlmClient | None = None,
) -> BuildArtifacts:
    """Full pipeline: lint -> layout -> recognize -> emit."""
    if config.style_oracle == "llm" and llm_client is None:
        llm_client = LlmClient.from_env()  # fails fast before any pipeline work

    report = RunReport()
    lint = _timed_stage("lint", report, lambda: run_lint(doc, annotations, config))
    report.warnings.extend(lint.warnings)

    tree = _timed_stage(
        "layout",
        report,
        lambda: build_layout_tree(
            lint.hierarchy, doc, eps=config.eps_containment, overlap_eps=config.overlap_eps
        ),
    )
    types = _timed_stage(
        "recognize",
        report,
        lambda: classify_heuristic(
            tree, doc, taxonomy=config.taxonomy, max_icon_px=config.max_icon_px
        ),
    )

    def emit_stage():
        html = emit_html(tree, types)
        css_rules = emit_layout_css(tree)
        visual = _visual_declarations(tree, doc, config, report.warnings, llm_client)
        return html, merge_visual_declarations(css_rules, visual), asset_manifest(tree)

    html, css_rules, manifest = _timed_stage("emit", report, emit_stage)

    report.counts = {
        "layers": len(list(doc.iter_layers())),
        "merges": len(lint.merge_groups),
        "groups": len(lint.groups),
        "nodes": len(tree.nodes()),
        "rules": len(css_rules),
    }
    return BuildArtifacts(doc, lint, tree, types, html, css_rules, manifest, report)


def write_build_outputs(artifacts: BuildArtifacts, out_dir: str | Path, *, dump_tree: bool = False) -> list[Path]:
    """Write index.html, style.css and assets-manifest.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in (
        ("index.html", artifacts.page_text),
        ("style.css", artifacts.stylesheet),
        ("assets-manifest.json", artifacts.manifest_text),
    ):
        path = out / name
        # newline pinned so outputs are byte-identical across platforms
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)
    if dump_tree:
        path = out / "layout-tree.json"
        path.write_text(dump_layout_tree(artifacts.tree), encoding="utf-8", newline="\n")
        written.append(path)
    return written
