"""Element-type recognition: spatial encoding, reference classifier, metrics.

The learned classifier this pipeline was designed around is pluggable;
what ships here is the exact sinusoidal spatial encoding its features
are built from, a deterministic rule-based reference classifier that is
total over every layout node, and the precision/recall/F1 harness used
to evaluate any classifier implementation against ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import DegenerateCanvasError, KeyMismatchError, UnknownLabelError
from .layout import LayoutNode, LayoutTree
from .model import GroupType, LayerKind, PrototypeDoc, Rect, rect_contains

DEFAULT_TAXONOMY: tuple[str, ...] = (
    "text",
    "image",
    "icon",
    "button",
    "text-button",
    "toolbar",
    "navigation-bar",
    "card",
    "list-item",
    "container",
    "status-bar",
    "input",
)

GROUP_TYPE_LABELS: dict[GroupType, str] = {
    GroupType.TOOLBAR: "toolbar",
    GroupType.NAVIGATION_BAR: "navigation-bar",
    GroupType.CARD: "card",
    GroupType.LIST_ITEM: "list-item",
    GroupType.CONTAINER: "container",
}

#: Leaf at the canvas top no taller than this is a status bar candidate.
STATUS_BAR_MAX_HEIGHT = 32.0
#: Button-shaped parents: aspect ratio and height limits.
BUTTON_MAX_ASPECT = 6.0
BUTTON_MAX_HEIGHT = 64.0


@dataclass(frozen=True)
class SpatialEncoding:
    """Sinusoidal expansion of a normalized (x, y, w, h) quadruple.

    Each normalized scalar z expands to
    ``(sin(2^0 pi z), cos(2^0 pi z), ..., sin(2^(L-1) pi z), cos(2^(L-1) pi z))``
    and the four expansions are concatenated in x, y, w, h order, giving
    a vector of ``8 * levels`` components, all in [-1, 1].
    """

    source: tuple[float, float, float, float]
    levels: int
    vector: tuple[float, ...]


def spatial_encode(rect: Rect, canvas: Rect, levels: int = 16) -> SpatialEncoding:
    """Encode a rect's position and size against its canvas."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if canvas.w == 0 or canvas.h == 0:
        raise DegenerateCanvasError("cannot encode against a zero-sized canvas")
    zs = (rect.x / canvas.w, rect.y / canvas.h, rect.w / canvas.w, rect.h / canvas.h)
    vector: list[float] = []
    for z in zs:
        for k in range(levels):
            angle = (2.0**k) * math.pi * z
            vector.append(math.sin(angle))
            vector.append(math.cos(angle))
    return SpatialEncoding(source=zs, levels=levels, vector=tuple(vector))


def classify_heuristic(
    tree: LayoutTree,
    doc: PrototypeDoc,
    *,
    taxonomy: Sequence[str] = DEFAULT_TAXONOMY,
    max_icon_px: float = 64.0,
) -> dict[str, str]:
    """Deterministic reference classifier; labels every node exactly once.

    Rules, in order: group-typed nodes map 1:1 to their label; merged
    fragment nodes are icons; top-of-canvas full-width short leaves are
    status bars; text leaves are text (text-button when they are the sole
    child of a button-shaped parent: filled, rounded, aspect <= 6,
    height <= 64); image leaves are images (icon when within the icon
    box); vector/shape leaves likewise; everything else is a container.
    """
    canvas = doc.canvas
    labels: dict[str, str] = {}
    active = set(taxonomy)

    def emit(node_id: str, label: str) -> None:
        if label not in active:
            label = "container" if "container" in active else taxonomy[0]
        labels[node_id] = label

    # Button plates are plain container layers and never become layout
    # nodes, so the "sole child of a button-shaped parent" test works on
    # the document geometry: the smallest filled+rounded layer of button
    # proportions enclosing the text, holding no other leaf.
    leaves = [l for l in doc.iter_layers() if not l.children]
    plates = []
    for layer in doc.iter_layers():
        filled = layer.style.get("fill") is not None or layer.style.get("background") is not None
        rounded = layer.style.get("border-radius") is not None
        if not (filled and rounded):
            continue
        if layer.rect.h <= 0 or layer.rect.h > BUTTON_MAX_HEIGHT:
            continue
        if layer.rect.w / layer.rect.h > BUTTON_MAX_ASPECT:
            continue
        plates.append(layer)

    def on_button_plate(text_layer) -> bool:
        best = None
        for plate in plates:
            if plate.id == text_layer.id:
                continue
            if rect_contains(plate.rect, text_layer.rect, 0.5):
                if best is None or plate.rect.area < best.rect.area:
                    best = plate
        if best is None:
            return False
        others = [
            l for l in leaves
            if l.id not in (text_layer.id, best.id) and rect_contains(best.rect, l.rect, 0.5)
        ]
        return not others

    def visit(node: LayoutNode) -> None:
        if node.group_type is not None:
            emit(node.id, GROUP_TYPE_LABELS[node.group_type])
        elif node.merged:
            emit(node.id, "icon")
        elif node.kind == "element" and node.is_leaf:
            layer = doc.layer_map.get(node.id)
            r = node.rect
            if (
                abs(r.y) <= 0.5
                and r.h <= STATUS_BAR_MAX_HEIGHT
                and r.w >= 0.9 * canvas.w
            ):
                emit(node.id, "status-bar")
            elif layer is not None and layer.kind is LayerKind.TEXT:
                emit(node.id, "text-button" if on_button_plate(layer) else "text")
            elif layer is not None and layer.kind in (LayerKind.IMAGE, LayerKind.VECTOR, LayerKind.SHAPE):
                small = r.w <= max_icon_px and r.h <= max_icon_px
                emit(node.id, "icon" if small else "image")
            else:
                emit(node.id, "container")
        else:
            emit(node.id, "container")
        for child in node.children:
            visit(child)

    visit(tree.root)
    return labels


# --- classifier evaluation ------------------------------------------------------


@dataclass(frozen=True)
class LabelMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    support: int
    empty_support: bool


@dataclass(frozen=True)
class ClassificationReport:
    """Per-label counts and metrics plus macro/weighted averages."""

    taxonomy: tuple[str, ...]
    per_label: dict[str, LabelMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    zero_support_labels: tuple[str, ...]
    total_support: int

    def to_json_dict(self) -> dict:
        return {
            "labels": {
                label: {
                    "tp": m.tp,
                    "fp": m.fp,
                    "fn": m.fn,
                    "support": m.support,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "empty_support": m.empty_support,
                }
                for label, m in self.per_label.items()
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "zero_support_labels": list(self.zero_support_labels),
            "total_support": self.total_support,
        }

    def format_table(self) -> str:
        """Aligned text table of the report."""
        headers = ("label", "tp", "fp", "fn", "precision", "recall", "f1")
        rows = [
            (
                label,
                str(m.tp),
                str(m.fp),
                str(m.fn),
                f"{m.precision:.4f}",
                f"{m.recall:.4f}",
                f"{m.f1:.4f}",
            )
            for label, m in self.per_label.items()
        ]
        rows.append(
            (
                "macro",
                "",
                "",
                "",
                f"{self.macro_precision:.4f}",
                f"{self.macro_recall:.4f}",
                f"{self.macro_f1:.4f}",
            )
        )
        rows.append(
            (
                "weighted",
                "",
                "",
                "",
                f"{self.weighted_precision:.4f}",
                f"{self.weighted_recall:.4f}",
                f"{self.weighted_f1:.4f}",
            )
        )
        widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
        lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
        lines.append("  ".join("-" * w for w in widths))
        for r in rows:
            lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))))
        return "\n".join(lines)


def _safe_div(num: float, den: float, *, empty_value: float) -> float:
    if den == 0:
        return empty_value
    return num / den


def evaluate_classifier(
    pred: Mapping[str, str],
    truth: Mapping[str, str],
    taxonomy: Sequence[str] = DEFAULT_TAXONOMY,
) -> ClassificationReport:
    """Per-label precision/recall/F1 against ground truth.

    Conventions (pinned so results are reproducible): a label with no
    predictions and no truth instances gets precision = recall = F1 = 1
    and an empty-support flag; no predictions but truth present gives
    precision 0; macro averages over the whole taxonomy with
    zero-support labels contributing 0; weighted averages use
    support / total weights.
    """
    if set(pred) != set(truth):
        missing = sorted(set(truth) - set(pred))[:5]
        extra = sorted(set(pred) - set(truth))[:5]
        raise KeyMismatchError(
            f"prediction and truth keys differ (missing={missing}, extra={extra})"
        )
    active = set(taxonomy)
    for source, mapping in (("pred", pred), ("truth", truth)):
        for key, label in mapping.items():
            if label not in active:
                raise UnknownLabelError(f"{source}[{key!r}]: label {label!r} not in taxonomy")

    per_label: dict[str, LabelMetrics] = {}
    zero_support: list[str] = []
    for label in taxonomy:
        tp = sum(1 for k in truth if truth[k] == label and pred[k] == label)
        fp = sum(1 for k in truth if pred[k] == label and truth[k] != label)
        fn = sum(1 for k in truth if truth[k] == label and pred[k] != label)
        support = tp + fn
        precision = _safe_div(tp, tp + fp, empty_value=0.0 if fn > 0 else 1.0)
        recall = _safe_div(tp, tp + fn, empty_value=0.0 if fp > 0 else 1.0)
        # algebraically 2PR/(P+R), but exact on integer counts
        f1 = _safe_div(2 * tp, 2 * tp + fp + fn, empty_value=1.0)
        if support == 0:
            zero_support.append(label)
        per_label[label] = LabelMetrics(
            tp=tp,
            fp=fp,
            fn=fn,
            precision=precision,
            recall=recall,
            f1=f1,
            support=support,
            empty_support=(tp + fp + fn) == 0,
        )

    n_labels = len(taxonomy)
    total = sum(m.support for m in per_label.values())

    def macro(attr: str) -> float:
        return sum(
            getattr(m, attr) if m.support > 0 else 0.0 for m in per_label.values()
        ) / n_labels

    def weighted(attr: str) -> float:
        if total == 0:
            return 0.0
        return sum(getattr(m, attr) * m.support / total for m in per_label.values())

    return ClassificationReport(
        taxonomy=tuple(taxonomy),
        per_label=per_label,
        macro_precision=macro("precision"),
        macro_recall=macro("recall"),
        macro_f1=macro("f1"),
        weighted_precision=weighted("precision"),
        weighted_recall=weighted("recall"),
        weighted_f1=weighted("f1"),
        zero_support_labels=tuple(zero_support),
        total_support=total,
    )


def load_label_map(data: bytes | str) -> dict[str, str]:
    """Parse a ground-truth / prediction file: a JSON map id -> label."""
    from .errors import SchemaError

    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in obj.items()
    ):
        raise SchemaError("label file must be a JSON object mapping id to label")
    return obj
