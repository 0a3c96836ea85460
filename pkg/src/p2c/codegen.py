"""HTML skeleton and layout CSS emission from a layout tree.

Non-leaf layout nodes become nested ``<div>`` tags mirroring the tree;
text leaves become ``<span>``, every other leaf an ``<img>`` with an
asset placeholder. Each node's type label becomes its classname (and CSS
selector). Layout CSS is deliberately a small deterministic subset:
flex rows/columns spaced by per-child margins, relative/absolute pairs
for overlapping clusters, explicit pixel sizes everywhere.
"""

from __future__ import annotations

import html as html_escape
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .errors import UntypedNodeError
from .layout import LayoutNode, LayoutTree

#: Canonical ordering of the layout-owned properties inside a rule.
LAYOUT_PROPERTY_ORDER: tuple[str, ...] = (
    "display",
    "flex-direction",
    "position",
    "top",
    "left",
    "width",
    "height",
    "margin-top",
    "margin-left",
)


def fmt_number(value: float) -> str:
    """Deterministic 2-decimal formatting with trailing zeros trimmed."""
    r = round(value, 2)
    if r == 0:
        r = 0.0
    s = f"{r:.2f}".rstrip("0").rstrip(".")
    return s or "0"


def fmt_px(value: float) -> str:
    return fmt_number(value) + "px"


@dataclass(eq=False)
class HtmlNode:
    """One emitted HTML element; ``node_id`` links back to the layout node."""

    tag: str  # "div" | "span" | "img"
    classname: str
    node_id: str | None = None
    text: str | None = None
    src: str | None = None
    children: list["HtmlNode"] = field(default_factory=list)

    def iter_nodes(self) -> Iterator["HtmlNode"]:
        yield self
        for child in self.children:
            yield from child.iter_nodes()


@dataclass
class HtmlDoc:
    """The emitted element tree plus its serializer."""

    root: HtmlNode

    def serialize(self) -> str:
        """Fragment form: 2-space indent, attributes ordered (class, src)."""
        lines: list[str] = []
        _serialize_node(self.root, 0, lines)
        return "\n".join(lines) + "\n"


def _attr(value: str) -> str:
    return html_escape.escape(value, quote=True)


def _serialize_node(node: HtmlNode, depth: int, lines: list[str]) -> None:
    pad = "  " * depth
    if node.tag == "span":
        text = html_escape.escape(node.text or "", quote=False)
        lines.append(f'{pad}<span class="{_attr(node.classname)}">{text}</span>')
    elif node.tag == "img":
        lines.append(f'{pad}<img class="{_attr(node.classname)}" src="{_attr(node.src or "")}">')
    else:
        if node.children:
            lines.append(f'{pad}<div class="{_attr(node.classname)}">')
            for child in node.children:
                _serialize_node(child, depth + 1, lines)
            lines.append(f"{pad}</div>")
        else:
            lines.append(f'{pad}<div class="{_attr(node.classname)}"></div>')


def emit_html(tree: LayoutTree, types: Mapping[str, str]) -> HtmlDoc:
    """Emit the HTML skeleton, assigning ``<label>-<k>`` classnames in pre-order.

    Also writes ``classname`` and ``element_type`` back onto the layout
    nodes so the CSS emitter and verification tooling can reference them.
    """
    counters: dict[str, int] = {}

    def visit(node: LayoutNode) -> HtmlNode:
        label = types.get(node.id)
        if label is None:
            raise UntypedNodeError(f"layout node {node.id!r} has no element type")
        counters[label] = counters.get(label, 0) + 1
        classname = f"{label}-{counters[label]}"
        node.classname = classname
        node.element_type = label

        if node.children:
            out = HtmlNode(tag="div", classname=classname, node_id=node.id)
            out.children = [visit(c) for c in node.children]
            return out
        if node.kind == "synthetic":
            return HtmlNode(tag="div", classname=classname, node_id=node.id)
        if node.text is not None:
            return HtmlNode(tag="span", classname=classname, node_id=node.id, text=node.text)
        return HtmlNode(
            tag="img", classname=classname, node_id=node.id, src=f"assets/{node.id}.png"
        )

    return HtmlDoc(root=visit(tree.root))


PAGE_TEMPLATE = """<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>{title}</title>
<link rel="stylesheet" href="{css_href}">
</head>
<body>
{body}</body>
</html>
"""


def render_page(doc: HtmlDoc, *, css_href: str = "style.css", title: str = "p2c build") -> str:
    """Full standalone page wrapping the emitted fragment."""
    return PAGE_TEMPLATE.format(
        title=html_escape.escape(title, quote=False),
        css_href=_attr(css_href),
        body=doc.serialize(),
    )


@dataclass
class CssRule:
    """One class-selector rule with an ordered declaration list."""

    selector: str
    declarations: list[tuple[str, str]] = field(default_factory=list)

    def serialize(self) -> str:
        body = "\n".join(f"  {prop}: {value};" for prop, value in self.declarations)
        if body:
            return f"{self.selector} {{\n{body}\n}}"
        return f"{self.selector} {{\n}}"


def stylesheet_text(rules: list[CssRule]) -> str:
    return "\n\n".join(rule.serialize() for rule in rules) + "\n"


def emit_layout_css(tree: LayoutTree) -> list[CssRule]:
    """Emit the layout-owned CSS for every node, in pre-order.

    Absolute clusters: the wrapper gets ``position: relative`` and each
    child ``position: absolute`` with top/left offsets from the wrapper's
    corner. Flex parents get display/flex-direction, and every flex child
    a main-axis margin from the gap to its previous sibling (first child:
    to the parent edge) plus a cross-axis margin from the parent edge.
    Children of plain parents are offset from the parent edges the same
    way. Zero margins are omitted.
    """
    if tree.root.classname is None:
        raise UntypedNodeError("emit_html must assign classnames before CSS emission")
    rules: list[CssRule] = []

    def declarations(node: LayoutNode, parent: LayoutNode | None, prev: LayoutNode | None) -> list[tuple[str, str]]:
        decls: list[tuple[str, str]] = []
        if node.flex_direction is not None:
            decls.append(("display", "flex"))
            decls.append(("flex-direction", node.flex_direction))
        if node.need_absolute:
            decls.append(("position", "relative"))
        margin_top = margin_left = None
        if parent is not None:
            if parent.need_absolute:
                decls.append(("position", "absolute"))
                decls.append(("top", fmt_px(node.rect.y - parent.rect.y)))
                decls.append(("left", fmt_px(node.rect.x - parent.rect.x)))
            elif parent.flex_direction == "row":
                margin_left = node.rect.x - (prev.rect.right if prev else parent.rect.x)
                margin_top = node.rect.y - parent.rect.y
            elif parent.flex_direction == "column":
                margin_top = node.rect.y - (prev.rect.bottom if prev else parent.rect.y)
                margin_left = node.rect.x - parent.rect.x
            else:
                margin_top = node.rect.y - parent.rect.y
                margin_left = node.rect.x - parent.rect.x
        decls.append(("width", fmt_px(node.rect.w)))
        decls.append(("height", fmt_px(node.rect.h)))
        if margin_top is not None and fmt_number(margin_top) != "0":
            decls.append(("margin-top", fmt_px(margin_top)))
        if margin_left is not None and fmt_number(margin_left) != "0":
            decls.append(("margin-left", fmt_px(margin_left)))
        return decls

    def visit(node: LayoutNode, parent: LayoutNode | None, prev: LayoutNode | None) -> None:
        rules.append(CssRule(f".{node.classname}", declarations(node, parent, prev)))
        previous: LayoutNode | None = None
        for child in node.children:
            visit(child, node, previous)
            previous = child

    visit(tree.root, None, None)
    return rules


def merge_visual_declarations(
    rules: list[CssRule], visual: Mapping[str, list[tuple[str, str]]]
) -> list[CssRule]:
    """Append visual declarations (alphabetically) to matching rules.

    Layout properties come first in emitter order; the style oracle's
    visual properties follow sorted by name. Ownership stays disjoint:
    visual sources never emit layout property names.
    """
    for rule in rules:
        classname = rule.selector.lstrip(".")
        extra = visual.get(classname)
        if extra:
            rule.declarations.extend(sorted(extra, key=lambda d: d[0]))
    return rules


def asset_manifest(tree: LayoutTree) -> dict[str, dict[str, float]]:
    """Manifest of image placeholders: node id -> source rect."""
    out: dict[str, dict[str, float]] = {}
    for node in tree.nodes():
        if node is tree.root:
            continue
        if node.kind == "element" and node.is_leaf and node.text is None:
            out[node.id] = node.rect.to_json_dict()
    return out


def check_tag_balance(text: str) -> None:
    """Strict tag-balance validation of serialized HTML.

    Raises ``ValueError`` on mismatched or unclosed tags. Void elements
    (img, link, meta, br, hr, input) need no closing tag.
    """
    import re

    void = {"img", "link", "meta", "br", "hr", "input", "!doctype"}
    stack: list[str] = []
    for match in re.finditer(r"<\s*(/?)\s*([a-zA-Z!][a-zA-Z0-9-]*)[^>]*?>", text):
        closing, name = match.group(1), match.group(2).lower()
        if name in void:
            if closing:
                raise ValueError(f"void element </{name}> cannot be closed")
            continue
        if closing:
            if not stack or stack[-1] != name:
                raise ValueError(f"mismatched closing tag </{name}>")
            stack.pop()
        else:
            stack.append(name)
    if stack:
        raise ValueError(f"unclosed tags: {stack}")
