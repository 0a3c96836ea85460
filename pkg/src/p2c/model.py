"""Domain model for design prototypes.

A prototype is a layer tree exported from a design tool: every layer
carries an id, a kind, an axis-aligned rectangle in absolute canvas
coordinates, and optional text/style payloads. This module owns the
document schema, parsing and serialization, annotation ingestion, and
the rectangle arithmetic the rest of the pipeline is built on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Iterator, Mapping

from .errors import (
    DuplicateIdError,
    NegativeSizeError,
    OverlappingMergeSetsError,
    SchemaError,
    UnknownGroupTypeError,
    UnknownLayerIdError,
)

#: Style keys understood by the whole toolchain. Anything else is kept on
#: the layer but reported by ``StyleProps.unknown_keys``.
STYLE_WHITELIST: frozenset[str] = frozenset(
    {
        "fill",
        "color",
        "font-family",
        "font-size",
        "font-weight",
        "line-height",
        "border-radius",
        "border-width",
        "border-color",
        "opacity",
        "shadow",
        "background",
    }
)


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle in canvas pixels; the universal geometric currency.

    ``x``/``y`` locate the top-left corner; negative positions are legal
    (off-canvas layers), negative sizes are not.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for v in (self.x, self.y, self.w, self.h):
            if not math.isfinite(v):
                raise SchemaError(f"non-finite rect coordinate: {v!r}")
        if self.w < 0 or self.h < 0:
            raise NegativeSizeError(f"negative rect size: w={self.w}, h={self.h}")

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def to_json_dict(self) -> dict[str, float]:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


def rect_iou(a: Rect, b: Rect) -> float:
    """Intersection-over-union of two rectangles, 0 when the union is empty.

    Clamped to [0, 1]: edge recomputation can overshoot by one ulp.
    """
    inter = rect_overlap_area(a, b)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def rect_overlap_area(a: Rect, b: Rect) -> float:
    """Area of the intersection of ``a`` and ``b`` (0 for disjoint rects)."""
    w = min(a.right, b.right) - max(a.x, b.x)
    h = min(a.bottom, b.bottom) - max(a.y, b.y)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def rect_contains(outer: Rect, inner: Rect, eps: float = 0.0) -> bool:
    """True iff ``inner`` lies within ``outer`` expanded by ``eps`` on all sides.

    Boundary-inclusive: a rect contains itself at ``eps=0``.
    """
    return (
        inner.x >= outer.x - eps
        and inner.y >= outer.y - eps
        and inner.right <= outer.right + eps
        and inner.bottom <= outer.bottom + eps
    )


def rect_union(a: Rect, b: Rect) -> Rect:
    """Smallest rect covering both inputs (top-left to bottom-right span)."""
    x = min(a.x, b.x)
    y = min(a.y, b.y)
    return Rect(x, y, max(a.right, b.right) - x, max(a.bottom, b.bottom) - y)


def rect_union_all(rects: list[Rect]) -> Rect:
    if not rects:
        raise ValueError("rect_union_all needs at least one rect")
    out = rects[0]
    for r in rects[1:]:
        out = rect_union(out, r)
    return out


def rect_gap(a: Rect, b: Rect) -> float:
    """Euclidean separation between two rects; 0 when they touch or overlap."""
    dx = max(a.x - b.right, b.x - a.right, 0.0)
    dy = max(a.y - b.bottom, b.y - a.bottom, 0.0)
    return math.hypot(dx, dy)


class LayerKind(str, Enum):
    """Layer kinds; only groups may have children."""

    TEXT = "text"
    IMAGE = "image"
    VECTOR = "vector"
    SHAPE = "shape"
    GROUP = "group"

    @property
    def is_leaf(self) -> bool:
        return self is not LayerKind.GROUP


class GroupType(str, Enum):
    """The five perceptual-group classes the linter can produce."""

    TOOLBAR = "toolbar"
    NAVIGATION_BAR = "navigation_bar"
    CARD = "card"
    LIST_ITEM = "list_item"
    CONTAINER = "container"


@dataclass(frozen=True)
class StyleProps:
    """Open key-value map of visual properties.

    Keys should come from :data:`STYLE_WHITELIST`; unknown keys are kept
    (round-trip fidelity) but surfaced via :meth:`unknown_keys`.
    """

    values: Mapping[str, Any] = field(default_factory=dict)

    def unknown_keys(self) -> tuple[str, ...]:
        return tuple(k for k in self.values if k not in STYLE_WHITELIST)

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def __bool__(self) -> bool:
        return bool(self.values)


@dataclass(frozen=True)
class Layer:
    """One node of the prototype tree."""

    id: str
    name: str
    kind: LayerKind
    rect: Rect
    text: str | None = None
    style: StyleProps = field(default_factory=StyleProps)
    children: tuple[Layer, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is LayerKind.TEXT and self.text is None:
            raise SchemaError(f"text layer {self.id!r} has no text payload")
        if self.kind is not LayerKind.TEXT and self.text is not None:
            raise SchemaError(f"{self.kind.value} layer {self.id!r} carries text")
        if self.kind is not LayerKind.GROUP and self.children:
            raise SchemaError(f"{self.kind.value} layer {self.id!r} has children")


@dataclass(frozen=True)
class PrototypeDoc:
    """A parsed prototype: canvas plus ordered root layers."""

    canvas: Rect
    layers: tuple[Layer, ...] = ()

    def __post_init__(self) -> None:
        if self.canvas.x != 0 or self.canvas.y != 0:
            raise SchemaError("canvas origin must be (0, 0)")
        if self.canvas.w <= 0 or self.canvas.h <= 0:
            raise SchemaError("canvas width and height must be positive")
        seen: set[str] = set()
        for layer in self.iter_layers():
            if layer.id in seen:
                raise DuplicateIdError(f"duplicate layer id {layer.id!r}")
            seen.add(layer.id)

    def iter_layers(self) -> Iterator[Layer]:
        """All layers in document (depth-first, pre-) order."""

        def walk(layers: tuple[Layer, ...]) -> Iterator[Layer]:
            for layer in layers:
                yield layer
                yield from walk(layer.children)

        return walk(self.layers)

    def leaf_layers(self) -> list[Layer]:
        return [l for l in self.iter_layers() if not l.children]

    @cached_property
    def layer_map(self) -> dict[str, Layer]:
        return {l.id: l for l in self.iter_layers()}

    @cached_property
    def doc_order(self) -> dict[str, int]:
        """Layer id -> position in document order."""
        return {l.id: i for i, l in enumerate(self.iter_layers())}


@dataclass(frozen=True)
class AnnotatedGroup:
    """A perceptual-group annotation: type plus the region it covers."""

    group_type: GroupType
    rect: Rect


@dataclass(frozen=True)
class AnnotationSet:
    """External annotations: fragment merge sets and perceptual-group boxes."""

    merge_groups: tuple[tuple[str, ...], ...] = ()
    perceptual_groups: tuple[AnnotatedGroup, ...] = ()


# --- parsing ---------------------------------------------------------------

_KIND_NAMES = {k.value: k for k in LayerKind}
_GROUP_TYPE_NAMES = {g.value: g for g in GroupType}


def _require(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {type(value).__name__}")
    v = float(value)
    if not math.isfinite(v):
        raise SchemaError(f"{where}: non-finite number")
    return v


def _parse_rect(obj: Any, where: str) -> Rect:
    if not isinstance(obj, Mapping):
        raise SchemaError(f"{where}: rect must be an object")
    return Rect(
        _number(_require(obj, "x", where), f"{where}.x"),
        _number(_require(obj, "y", where), f"{where}.y"),
        _number(_require(obj, "w", where), f"{where}.w"),
        _number(_require(obj, "h", where), f"{where}.h"),
    )


def _parse_layer(obj: Any, where: str) -> Layer:
    if not isinstance(obj, Mapping):
        raise SchemaError(f"{where}: layer must be an object")
    layer_id = _require(obj, "id", where)
    if not isinstance(layer_id, str) or not layer_id:
        raise SchemaError(f"{where}: layer id must be a non-empty string")
    name = _require(obj, "name", where)
    if not isinstance(name, str):
        raise SchemaError(f"{where}: layer name must be a string")
    kind_name = _require(obj, "kind", where)
    if kind_name not in _KIND_NAMES:
        raise SchemaError(f"{where}: unknown layer kind {kind_name!r}")
    kind = _KIND_NAMES[kind_name]
    rect = _parse_rect(_require(obj, "rect", where), f"{where}.rect")

    text = obj.get("text")
    if text is not None and not isinstance(text, str):
        raise SchemaError(f"{where}: text must be a string")

    style_obj = obj.get("style", {})
    if not isinstance(style_obj, Mapping):
        raise SchemaError(f"{where}: style must be an object")
    style = StyleProps(dict(style_obj))

    children_obj = obj.get("children")
    children: tuple[Layer, ...] = ()
    if children_obj is not None:
        if not isinstance(children_obj, list):
            raise SchemaError(f"{where}: children must be an array")
        if kind is not LayerKind.GROUP and children_obj:
            raise SchemaError(f"{where}: {kind.value} layer cannot have children")
        children = tuple(
            _parse_layer(c, f"{where}.children[{i}]") for i, c in enumerate(children_obj)
        )
    return Layer(id=layer_id, name=name, kind=kind, rect=rect, text=text, style=style, children=children)


def parse_prototype(data: bytes | str) -> PrototypeDoc:
    """Parse the documented prototype JSON into a validated document.

    Raises :class:`SchemaError` (or a subclass) for malformed input;
    sibling order in the JSON arrays is preserved.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, Mapping):
        raise SchemaError("document root must be an object")

    canvas_obj = _require(obj, "canvas", "document")
    if not isinstance(canvas_obj, Mapping):
        raise SchemaError("document.canvas must be an object")
    canvas = Rect(
        0.0,
        0.0,
        _number(_require(canvas_obj, "w", "canvas"), "canvas.w"),
        _number(_require(canvas_obj, "h", "canvas"), "canvas.h"),
    )

    layers_obj = _require(obj, "layers", "document")
    if not isinstance(layers_obj, list):
        raise SchemaError("document.layers must be an array")
    layers = tuple(_parse_layer(l, f"layers[{i}]") for i, l in enumerate(layers_obj))
    return PrototypeDoc(canvas=canvas, layers=layers)


def _layer_to_json(layer: Layer) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": layer.id,
        "name": layer.name,
        "kind": layer.kind.value,
        "rect": layer.rect.to_json_dict(),
    }
    if layer.text is not None:
        out["text"] = layer.text
    if layer.style.values:
        out["style"] = dict(layer.style.values)
    if layer.kind is LayerKind.GROUP:
        out["children"] = [_layer_to_json(c) for c in layer.children]
    return out


def serialize_prototype(doc: PrototypeDoc) -> str:
    """Canonical JSON form of a document; inverse of :func:`parse_prototype`."""
    obj = {
        "canvas": {"w": doc.canvas.w, "h": doc.canvas.h},
        "layers": [_layer_to_json(l) for l in doc.layers],
    }
    return json.dumps(obj, indent=2) + "\n"


def parse_annotations(data: bytes | str, doc: PrototypeDoc) -> AnnotationSet:
    """Parse annotation JSON and resolve every referenced id against ``doc``."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, Mapping):
        raise SchemaError("annotation root must be an object")

    known = doc.layer_map
    merge_groups: list[tuple[str, ...]] = []
    claimed: set[str] = set()
    raw_groups = obj.get("merge_groups", [])
    if not isinstance(raw_groups, list):
        raise SchemaError("merge_groups must be an array")
    for i, raw in enumerate(raw_groups):
        if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
            raise SchemaError(f"merge_groups[{i}] must be an array of layer ids")
        ids: list[str] = []
        for layer_id in raw:
            if layer_id not in known:
                raise UnknownLayerIdError(f"merge_groups[{i}]: unknown layer id {layer_id!r}")
            if layer_id in ids:
                raise SchemaError(f"merge_groups[{i}]: id {layer_id!r} repeated within the set")
            if layer_id in claimed:
                raise OverlappingMergeSetsError(
                    f"layer id {layer_id!r} appears in more than one merge group"
                )
            ids.append(layer_id)
        claimed.update(ids)
        merge_groups.append(tuple(ids))

    perceptual: list[AnnotatedGroup] = []
    raw_percept = obj.get("perceptual_groups", [])
    if not isinstance(raw_percept, list):
        raise SchemaError("perceptual_groups must be an array")
    for i, raw in enumerate(raw_percept):
        if not isinstance(raw, Mapping):
            raise SchemaError(f"perceptual_groups[{i}] must be an object")
        type_name = _require(raw, "type", f"perceptual_groups[{i}]")
        if type_name not in _GROUP_TYPE_NAMES:
            raise UnknownGroupTypeError(
                f"perceptual_groups[{i}]: unknown group type {type_name!r}"
            )
        rect = _parse_rect(_require(raw, "rect", f"perceptual_groups[{i}]"), f"perceptual_groups[{i}].rect")
        perceptual.append(AnnotatedGroup(_GROUP_TYPE_NAMES[type_name], rect))

    return AnnotationSet(tuple(merge_groups), tuple(perceptual))
