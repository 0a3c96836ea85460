"""Deterministic replay of the emitted CSS subset, without a browser.

The interpreter supports exactly what the layout emitter produces: flex
rows/columns advanced by per-child margins, relative/absolute pairs with
top/left offsets, fixed pixel sizes. Visual properties are ignored; any
other layout-affecting property is rejected so drift between emitter and
interpreter is caught loudly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Sequence

from .codegen import CssRule, HtmlDoc, HtmlNode
from .errors import SchemaError, UnsupportedPropertyError
from .model import Rect
from .style_oracle import CSS_VISUAL_PROPERTIES

#: Layout properties the interpreter evaluates.
SUPPORTED_LAYOUT_PROPERTIES = {
    "display",
    "flex-direction",
    "position",
    "top",
    "left",
    "width",
    "height",
    "margin-top",
    "margin-left",
}


@dataclass(frozen=True)
class ReplayBox:
    """Computed box for one node: id (layout id or classname) plus rect."""

    node_id: str
    classname: str
    rect: Rect


def _px(value: str, prop: str) -> float:
    v = value.strip()
    if not v.endswith("px"):
        raise UnsupportedPropertyError(f"{prop}: expected a px value, got {value!r}")
    try:
        return float(v[:-2])
    except ValueError:
        raise UnsupportedPropertyError(f"{prop}: malformed px value {value!r}") from None


def _style_map(css: Sequence[CssRule]) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    for rule in css:
        props: dict[str, str] = {}
        for prop, value in rule.declarations:
            if prop in SUPPORTED_LAYOUT_PROPERTIES:
                props[prop] = value.strip()
            elif prop in CSS_VISUAL_PROPERTIES:
                continue  # visual-only: irrelevant to geometry
            else:
                raise UnsupportedPropertyError(
                    f"{rule.selector}: property {prop!r} is outside the replayable subset"
                )
        out[rule.selector.lstrip(".")] = props
    return out


def replay_layout(
    html: HtmlDoc, css: Sequence[CssRule], viewport: Rect | None = None
) -> list[ReplayBox]:
    """Compute every node's box; boxes returned in pre-order.

    The root box is anchored at (0, 0); a ``viewport`` overrides the root
    width/height (child geometry is margin-driven and does not rescale).
    """
    styles = _style_map(css)
    boxes: list[ReplayBox] = []

    def props_of(node: HtmlNode) -> dict[str, str]:
        return styles.get(node.classname, {})

    def size_of(node: HtmlNode) -> tuple[float, float]:
        st = props_of(node)
        w = _px(st["width"], "width") if "width" in st else 0.0
        h = _px(st["height"], "height") if "height" in st else 0.0
        return w, h

    def margin_of(node: HtmlNode) -> tuple[float, float]:
        st = props_of(node)
        mt = _px(st["margin-top"], "margin-top") if "margin-top" in st else 0.0
        ml = _px(st["margin-left"], "margin-left") if "margin-left" in st else 0.0
        return mt, ml

    def validate_mode(node: HtmlNode) -> tuple[str | None, bool]:
        st = props_of(node)
        display = st.get("display")
        if display is not None and display != "flex":
            raise UnsupportedPropertyError(f"display: {display!r} is not supported")
        direction = st.get("flex-direction")
        if direction is not None and direction not in ("row", "column"):
            raise UnsupportedPropertyError(f"flex-direction: {direction!r} is not supported")
        position = st.get("position")
        if position is not None and position not in ("relative", "absolute"):
            raise UnsupportedPropertyError(f"position: {position!r} is not supported")
        relative = position == "relative"
        return (direction if display == "flex" else None), relative

    def place(node: HtmlNode, x: float, y: float, w: float, h: float) -> None:
        boxes.append(
            ReplayBox(
                node_id=node.node_id if node.node_id is not None else node.classname,
                classname=node.classname,
                rect=Rect(x, y, max(w, 0.0), max(h, 0.0)),
            )
        )
        direction, relative = validate_mode(node)
        if relative:
            for child in node.children:
                st = props_of(child)
                if st.get("position") != "absolute":
                    raise UnsupportedPropertyError(
                        f"child {child.classname!r} of a relative parent must be absolute"
                    )
                top = _px(st["top"], "top") if "top" in st else 0.0
                left = _px(st["left"], "left") if "left" in st else 0.0
                cw, ch = size_of(child)
                place(child, x + left, y + top, cw, ch)
        elif direction == "row":
            cursor = x
            for child in node.children:
                mt, ml = margin_of(child)
                cw, ch = size_of(child)
                place(child, cursor + ml, y + mt, cw, ch)
                cursor = cursor + ml + cw
        elif direction == "column":
            cursor = y
            for child in node.children:
                mt, ml = margin_of(child)
                cw, ch = size_of(child)
                place(child, x + ml, cursor + mt, cw, ch)
                cursor = cursor + mt + ch
        else:
            for child in node.children:
                mt, ml = margin_of(child)
                cw, ch = size_of(child)
                place(child, x + ml, y + mt, cw, ch)

    root = html.root
    rw, rh = size_of(root)
    if viewport is not None:
        rw, rh = viewport.w, viewport.h
    place(root, 0.0, 0.0, rw, rh)
    return boxes


# --- parsing emitted artifacts back in -----------------------------------------

_RULE_RE = re.compile(r"(?P<selector>[^{}]+)\{(?P<body>[^{}]*)\}", re.DOTALL)


def parse_css_text(text: str) -> list[CssRule]:
    """Parse a stylesheet in the emitter's format back into rules."""
    rules: list[CssRule] = []
    consumed = 0
    for match in _RULE_RE.finditer(text):
        consumed = match.end()
        selector = match.group("selector").strip()
        if not selector.startswith("."):
            raise SchemaError(f"unsupported selector {selector!r} (class selectors only)")
        declarations: list[tuple[str, str]] = []
        for part in match.group("body").split(";"):
            part = part.strip()
            if not part:
                continue
            if ":" not in part:
                raise SchemaError(f"malformed declaration {part!r} in {selector}")
            prop, value = part.split(":", 1)
            declarations.append((prop.strip(), value.strip()))
        rules.append(CssRule(selector, declarations))
    if text.strip() and not rules:
        raise SchemaError("no CSS rules found")
    leftover = re.sub(r"\s", "", text[consumed:])
    if leftover:
        raise SchemaError(f"trailing content after last CSS rule: {leftover[:30]!r}")
    return rules


class _EmittedHtmlParser(HTMLParser):
    """Parses pages produced by the emitter back into an HtmlNode tree."""

    CAPTURED = {"div", "span", "img"}
    VOID = {"img", "meta", "link", "br", "hr", "input"}

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.stack: list[HtmlNode] = []
        self.roots: list[HtmlNode] = []
        self.open_tags: list[str] = []

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        if tag in self.VOID:
            self._emit(tag, attrs)
            return
        self.open_tags.append(tag)
        if tag in self.CAPTURED:
            self._emit(tag, attrs)

    def _emit(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        if tag not in self.CAPTURED:
            return
        attr_map = {k: (v or "") for k, v in attrs}
        node = HtmlNode(tag=tag, classname=attr_map.get("class", ""), src=attr_map.get("src") or None)
        if self.stack:
            self.stack[-1].children.append(node)
        else:
            self.roots.append(node)
        if tag != "img":
            self.stack.append(node)

    def handle_endtag(self, tag: str) -> None:
        if tag in self.VOID:
            raise SchemaError(f"void element </{tag}> cannot be closed")
        if not self.open_tags or self.open_tags[-1] != tag:
            raise SchemaError(f"mismatched closing tag </{tag}>")
        self.open_tags.pop()
        if tag in self.CAPTURED:
            if not self.stack or self.stack[-1].tag != tag:
                raise SchemaError(f"mismatched closing tag </{tag}>")
            self.stack.pop()

    def handle_data(self, data: str) -> None:
        if self.stack and self.stack[-1].tag == "span" and data.strip():
            node = self.stack[-1]
            node.text = (node.text or "") + data.strip()


def parse_html_text(text: str) -> HtmlDoc:
    """Parse an emitted page (or fragment) back into an HtmlDoc."""
    parser = _EmittedHtmlParser()
    parser.feed(text)
    parser.close()
    if parser.open_tags:
        raise SchemaError(f"unclosed tags: {parser.open_tags}")
    if len(parser.roots) != 1:
        raise SchemaError(f"expected exactly one root element, found {len(parser.roots)}")
    return HtmlDoc(root=parser.roots[0])


@dataclass(frozen=True)
class NodeDeviation:
    """Per-node positional error of a replayed box against its source rect."""

    node_id: str
    classname: str
    source: Rect
    replayed: Rect
    deviation: float


def box_deviation(source: Rect, replayed: Rect) -> float:
    """Max absolute edge deviation in px."""
    return max(
        abs(source.x - replayed.x),
        abs(source.y - replayed.y),
        abs(source.right - replayed.right),
        abs(source.bottom - replayed.bottom),
    )
