"""Layout-tree construction: element extraction, containment init, overlap
wrapping, and recursive row/column re-segmentation.

The layout tree is the structure the emitted code mirrors: element nodes
come from prototype leaves (or merged/grouped units standing in for
them), synthetic nodes carry either a flex direction (row/column) or a
``need_absolute`` marker for overlapping clusters that only absolute
positioning can render.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .linting import HierarchyNode, fresh_id
from .model import (
    GroupType,
    LayerKind,
    PrototypeDoc,
    Rect,
    rect_contains,
    rect_overlap_area,
    rect_union_all,
)

#: Overlap areas at or below this (px^2) do not count as overlapping;
#: adjacent flex items commonly share an edge.
DEFAULT_OVERLAP_EPS = 1.0


@dataclass(eq=False)
class LayoutNode:
    """One node of the layout tree; compares by identity."""

    id: str
    rect: Rect
    kind: str  # "element" | "synthetic"
    flex_direction: str | None = None  # "row" | "column"
    need_absolute: bool = False
    classname: str | None = None
    element_type: str | None = None
    text: str | None = None
    merged: bool = False
    group_type: GroupType | None = None
    children: list["LayoutNode"] = field(default_factory=list)

    def iter_nodes(self) -> Iterator["LayoutNode"]:
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class LayoutTree:
    """Root plus derived node/parent views of the layout structure."""

    root: LayoutNode
    canvas: Rect

    def nodes(self) -> list[LayoutNode]:
        """All nodes in pre-order."""
        return list(self.root.iter_nodes())

    def parent_map(self) -> dict[str, str]:
        """Child id -> parent id (the tree's parent relation as a map)."""
        out: dict[str, str] = {}
        for node in self.root.iter_nodes():
            for child in node.children:
                out[child.id] = node.id
        return out

    def relation_matrix(self) -> list[list[int]]:
        """N x N matrix M with M[i][j] = 1 iff node i is the parent of node j."""
        nodes = self.nodes()
        index = {id(n): i for i, n in enumerate(nodes)}
        m = [[0] * len(nodes) for _ in nodes]
        for node in nodes:
            for child in node.children:
                m[index[id(node)]][index[id(child)]] = 1
        return m

    def node_by_id(self, node_id: str) -> LayoutNode:
        for node in self.root.iter_nodes():
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def element_leaf_ids(self) -> list[str]:
        """Ids of element leaves (the preserved unit multiset)."""
        return [n.id for n in self.root.iter_nodes() if n.kind == "element" and n.is_leaf]


# --- element extraction -------------------------------------------------------


def extract_elements(root: HierarchyNode) -> list[HierarchyNode]:
    """Collect element units from a linted hierarchy.

    Leaves are the base units; a leaf inside a merge or group node is
    replaced by its smallest (deepest) attributed ancestor. Units are
    deduplicated and returned in descending area order, stable by
    document order on ties.
    """
    units: list[HierarchyNode] = []
    seen: set[int] = set()

    def walk(node: HierarchyNode, attributed: HierarchyNode | None) -> None:
        for child in node.children:
            inner = child if child.attributed else attributed
            if not child.children:
                unit = inner if inner is not None else child
                if id(unit) not in seen:
                    seen.add(id(unit))
                    units.append(unit)
            else:
                walk(child, inner)

    walk(root, None)
    return sorted(units, key=lambda u: -u.rect.area)


def _unit_node(unit: HierarchyNode, doc: PrototypeDoc) -> LayoutNode:
    layer = doc.layer_map.get(unit.layer_id)
    text = layer.text if layer is not None and layer.kind is LayerKind.TEXT else None
    return LayoutNode(
        id=unit.layer_id,
        rect=unit.rect,
        kind="element",
        text=text,
        merged=unit.attrs.merge,
        group_type=unit.attrs.group_type,
    )


def init_layout_tree(
    elements: Sequence[HierarchyNode],
    doc: PrototypeDoc,
    *,
    eps: float = 0.5,
    root_id: str | None = None,
) -> LayoutTree:
    """Phase-1 initialization: insert elements under their smallest container.

    ``elements`` must already be sorted by descending area; each element is
    parented to the smallest already-inserted element containing it, or to
    the synthetic canvas root.
    """
    used = set(doc.doc_order) | {u.layer_id for u in elements}
    root = LayoutNode(
        id=root_id if root_id is not None else fresh_id("canvas", used),
        rect=doc.canvas,
        kind="synthetic",
    )
    inserted: list[LayoutNode] = []
    for unit in elements:
        node = _unit_node(unit, doc)
        best: LayoutNode | None = None
        for cand in inserted:
            if rect_contains(cand.rect, node.rect, eps):
                if best is None or cand.rect.area < best.rect.area:
                    best = cand
        (best or root).children.append(node)
        inserted.append(node)
    _sort_children_doc_order(root, doc)
    return LayoutTree(root=root, canvas=doc.canvas)


def _doc_key(node: LayoutNode, doc: PrototypeDoc) -> int:
    if node.id in doc.doc_order:
        return doc.doc_order[node.id]
    keys = [_doc_key(c, doc) for c in node.children]
    return min(keys) if keys else len(doc.doc_order)


def _sort_children_doc_order(root: LayoutNode, doc: PrototypeDoc) -> None:
    for node in root.iter_nodes():
        node.children.sort(key=lambda c: _doc_key(c, doc))


def _direct_units(h: HierarchyNode) -> list[HierarchyNode]:
    """Outermost units within a subtree: attributed nodes taken whole,
    plain internal layers dived through down to their leaves."""
    out: list[HierarchyNode] = []
    for child in h.children:
        if child.attributed or not child.children:
            out.append(child)
        else:
            out.extend(_direct_units(child))
    return out


def _nest_level(parent: LayoutNode, units: list[HierarchyNode], doc: PrototypeDoc, eps: float) -> None:
    """Phase-1 insertion of one nesting scope's units (descending area)."""
    built = [(unit, _build_unit(unit, doc, eps)) for unit in units]
    built.sort(key=lambda pair: -pair[0].rect.area)
    inserted: list[LayoutNode] = []
    for _, node in built:
        best: LayoutNode | None = None
        for cand in inserted:
            if rect_contains(cand.rect, node.rect, eps):
                if best is None or cand.rect.area < best.rect.area:
                    best = cand
        (best or parent).children.append(node)
        inserted.append(node)


def _build_unit(unit: HierarchyNode, doc: PrototypeDoc, eps: float) -> LayoutNode:
    node = _unit_node(unit, doc)
    if unit.attrs.group and not unit.attrs.merge:
        _nest_level(node, _direct_units(unit), doc, eps)
    return node


def construct_from_hierarchy(
    hierarchy: HierarchyNode, doc: PrototypeDoc, *, eps: float = 0.5
) -> LayoutTree:
    """Structure-preserving layout-tree initialization.

    Equivalent to :func:`extract_elements` + :func:`init_layout_tree` on
    flat documents, but nested group units keep their members: at every
    scope (canvas, then each group node), the scope's outermost units are
    inserted by the smallest-container rule, and group units recurse into
    their own members. Merge units stay opaque leaves.
    """
    root = LayoutNode(id=hierarchy.layer_id, rect=doc.canvas, kind="synthetic")
    _nest_level(root, _direct_units(hierarchy), doc, eps)
    _sort_children_doc_order(root, doc)
    return LayoutTree(root=root, canvas=doc.canvas)


# --- overlap wrapping ----------------------------------------------------------


def wrap_overlaps(tree: LayoutTree, *, overlap_eps: float = DEFAULT_OVERLAP_EPS) -> LayoutTree:
    """Wrap overlapping sibling clusters under synthetic absolute parents.

    Per non-leaf node, siblings are partitioned into connected components
    of the "overlap area > overlap_eps" relation; every component of two
    or more nodes moves under a new ``need_absolute`` parent spanning the
    component's union box. Components are transitive by construction
    (A-B and B-C overlap chains land in one component).
    """
    used = {n.id for n in tree.root.iter_nodes()}
    counter = 0

    def process(node: LayoutNode) -> None:
        nonlocal counter
        # children of an absolute node are expected to overlap; only their
        # own subtrees are processed
        if not node.need_absolute and len(node.children) >= 2:
            kids = node.children
            n = len(kids)
            comp = list(range(n))

            def find(i: int) -> int:
                while comp[i] != i:
                    comp[i] = comp[comp[i]]
                    i = comp[i]
                return i

            for i in range(n):
                for j in range(i + 1, n):
                    if rect_overlap_area(kids[i].rect, kids[j].rect) > overlap_eps:
                        a, b = find(i), find(j)
                        if a != b:
                            comp[max(a, b)] = min(a, b)

            clusters: dict[int, list[int]] = {}
            for i in range(n):
                clusters.setdefault(find(i), []).append(i)

            if any(len(v) >= 2 for v in clusters.values()):
                new_children: list[LayoutNode] = []
                for i in range(n):
                    key = find(i)
                    members = clusters[key]
                    if len(members) == 1:
                        new_children.append(kids[i])
                    elif members[0] == i:
                        counter += 1
                        wrapper = LayoutNode(
                            id=fresh_id(f"overlap-{counter}", used),
                            rect=rect_union_all([kids[m].rect for m in members]),
                            kind="synthetic",
                            need_absolute=True,
                            children=[kids[m] for m in members],
                        )
                        new_children.append(wrapper)
                node.children = new_children
        for child in node.children:
            process(child)

    process(tree.root)
    return tree


# --- XY-cut segmentation --------------------------------------------------------


@dataclass(frozen=True)
class SegmentNode:
    """Nested segmentation result over rect indices.

    ``direction`` is ``"column"`` (stacked y-bands), ``"row"`` (side by
    side x-cells) or ``None`` for an unsplittable leaf holding ``items``.
    """

    direction: str | None
    items: tuple[int, ...] = ()
    children: tuple["SegmentNode", ...] = ()

    def all_items(self) -> tuple[int, ...]:
        if self.direction is None:
            return self.items
        out: list[int] = []
        for c in self.children:
            out.extend(c.all_items())
        return tuple(out)

    def depth(self) -> int:
        if self.direction is None:
            return 1
        return 1 + max(c.depth() for c in self.children)


def _axis_bands(idxs: list[int], rects: Sequence[Rect], axis: str) -> list[list[int]]:
    """Maximal bands of rects whose extents merge along ``axis``.

    Extents are half-open, so touching rects admit a cut line along the
    shared edge (stacked page sections separate into bands); only
    interior overlap merges extents. Bands are returned in ascending
    coordinate order, items within a band in input order.
    """
    if axis == "y":
        spans = [(rects[i].y, rects[i].bottom, i) for i in idxs]
    else:
        spans = [(rects[i].x, rects[i].right, i) for i in idxs]
    spans.sort(key=lambda s: (s[0], s[1]))
    bands: list[list[int]] = []
    cur: list[int] = []
    cur_end = 0.0
    for start, end, i in spans:
        if not cur or start >= cur_end:
            cur = [i]
            bands.append(cur)
            cur_end = end
        else:
            cur.append(i)
            cur_end = max(cur_end, end)
    for band in bands:
        band.sort()
    return bands


def xy_segment(rects: Sequence[Rect]) -> SegmentNode:
    """Recursive XY-cut over non-overlapping sibling rects.

    Horizontal gap lines first split the set into stacked y-bands; each
    band splits into x-cells by the symmetric rule; cells recurse until
    no further cut exists. Overlapping inputs degrade gracefully into
    unsplittable leaf cells.
    """
    idxs = list(range(len(rects)))
    return _segment(idxs, rects)


def _segment(idxs: list[int], rects: Sequence[Rect]) -> SegmentNode:
    if len(idxs) <= 1:
        return SegmentNode(None, tuple(idxs))
    ybands = _axis_bands(idxs, rects, "y")
    if len(ybands) >= 2:
        return SegmentNode(
            "column", children=tuple(_segment_band(b, rects) for b in ybands)
        )
    return _segment_band(idxs, rects)


def _segment_band(idxs: list[int], rects: Sequence[Rect]) -> SegmentNode:
    """Split one y-band into x-cells; cells recurse starting from y again."""
    if len(idxs) <= 1:
        return SegmentNode(None, tuple(idxs))
    xbands = _axis_bands(idxs, rects, "x")
    if len(xbands) >= 2:
        return SegmentNode("row", children=tuple(_segment(c, rects) for c in xbands))
    return SegmentNode(None, tuple(idxs))


# --- row/column re-segmentation ---------------------------------------------------


def resegment_rows_cols(tree: LayoutTree) -> LayoutTree:
    """Phase 2: assign flex directions per parent via XY-cut segmentation.

    Multiple elements sharing an x-cell are wrapped in a flex row,
    row-or-element units stacked in y-bands in a flex column; a parent
    whose top-level split is a single axis takes the direction itself
    instead of gaining a redundant wrapper. Sibling sets that admit no
    cut in either axis fall back to ``need_absolute``. Children of
    ``need_absolute`` nodes are not re-partitioned, but their own
    subtrees are processed.
    """
    used = {n.id for n in tree.root.iter_nodes()}
    tmp_counter = 0

    def materialize(seg: SegmentNode, kids: list[LayoutNode]) -> LayoutNode:
        nonlocal tmp_counter
        if seg.direction is None:
            if len(seg.items) == 1:
                return kids[seg.items[0]]
            tmp_counter += 1
            members = [kids[i] for i in seg.items]
            return LayoutNode(
                id=fresh_id(f"tmp-{tmp_counter}", used),
                rect=rect_union_all([m.rect for m in members]),
                kind="synthetic",
                need_absolute=True,
                children=members,
            )
        tmp_counter += 1
        children = [materialize(c, kids) for c in seg.children]
        axis = "x" if seg.direction == "row" else "y"
        children.sort(key=lambda c: (getattr(c.rect, axis), c.id))
        return LayoutNode(
            id=fresh_id(f"tmp-{tmp_counter}", used),
            rect=rect_union_all([c.rect for c in children]),
            kind="synthetic",
            flex_direction=seg.direction,
            children=children,
        )

    def process(node: LayoutNode) -> None:
        if node.need_absolute:
            for child in node.children:
                process(child)
            return
        if len(node.children) >= 2:
            seg = xy_segment([c.rect for c in node.children])
            kids = node.children
            if seg.direction is None:
                node.need_absolute = True
                node.flex_direction = None
            else:
                node.flex_direction = seg.direction
                children = [materialize(c, kids) for c in seg.children]
                axis = "x" if seg.direction == "row" else "y"
                children.sort(key=lambda c: (getattr(c.rect, axis), c.id))
                node.children = children
        for child in node.children:
            process(child)

    process(tree.root)
    _renumber_synthetics(tree)
    return tree


def _renumber_synthetics(tree: LayoutTree) -> None:
    """Give layout synthetics stable ``seg-<n>`` ids in pre-order."""
    used = {n.id for n in tree.root.iter_nodes() if n.kind == "element"}
    used.add(tree.root.id)
    counter = 0
    for node in tree.root.iter_nodes():
        if node.kind == "synthetic" and node is not tree.root:
            counter += 1
            node.id = fresh_id(f"seg-{counter}", used)


def build_layout_tree(
    hierarchy: HierarchyNode,
    doc: PrototypeDoc,
    *,
    eps: float = 0.5,
    overlap_eps: float = DEFAULT_OVERLAP_EPS,
) -> LayoutTree:
    """Full layout-tree construction from a linted hierarchy."""
    tree = construct_from_hierarchy(hierarchy, doc, eps=eps)
    tree = wrap_overlaps(tree, overlap_eps=overlap_eps)
    tree = resegment_rows_cols(tree)
    return tree


# --- serialization -----------------------------------------------------------------


def layout_tree_to_json_dict(node: LayoutNode) -> dict:
    out: dict = {
        "id": node.id,
        "rect": node.rect.to_json_dict(),
        "flex_direction": node.flex_direction,
        "need_absolute": node.need_absolute,
    }
    if node.classname is not None:
        out["classname"] = node.classname
    if node.element_type is not None:
        out["element_type"] = node.element_type
    out["children"] = [layout_tree_to_json_dict(c) for c in node.children]
    return out


def dump_layout_tree(tree: LayoutTree) -> str:
    """Indented JSON dump of the layout tree (stable schema)."""
    return json.dumps(layout_tree_to_json_dict(tree.root), indent=2) + "\n"
