"""Hierarchy linting: rebuild containment from geometry, mark fragments, infer groups.

Design files frequently ship with arbitrary layer grouping, fragmented
icons (three arc vectors instead of one icon) and missing structural
groups. This module discards the authored grouping, rebuilds a
containment hierarchy purely from layer rectangles, and annotates it
with merge attributes (fragment consolidation) and perceptual groups
(toolbar / navigation bar / card / list item / container), using
pluggable, deterministic detectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .errors import ConfigError, UnknownLayerIdError
from .model import (
    AnnotationSet,
    GroupType,
    LayerKind,
    PrototypeDoc,
    Rect,
    rect_contains,
    rect_gap,
    rect_overlap_area,
    rect_union_all,
)

log = logging.getLogger(__name__)


@dataclass
class AttrSet:
    """Lint attributes attached to a hierarchy node.

    ``group_src_rect`` records the detector rectangle that materialized a
    group node; it exists so re-running group assignment is a no-op.
    """

    merge: bool = False
    group: bool = False
    group_type: GroupType | None = None
    group_src_rect: Rect | None = None


@dataclass(eq=False)
class HierarchyNode:
    """One node of the rebuilt containment hierarchy.

    Nodes compare by identity: the same layer id may not appear twice in
    a tree, but list membership tests must never walk the structure.
    """

    layer_id: str
    rect: Rect
    children: list["HierarchyNode"] = field(default_factory=list)
    attrs: AttrSet = field(default_factory=AttrSet)
    synthetic: bool = False

    def iter_nodes(self) -> Iterator["HierarchyNode"]:
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def leaf_nodes(self) -> list["HierarchyNode"]:
        return [n for n in self.iter_nodes() if not n.children]

    def leaf_ids(self) -> set[str]:
        return {n.layer_id for n in self.leaf_nodes()}

    @property
    def attributed(self) -> bool:
        return self.attrs.merge or self.attrs.group


@dataclass(frozen=True)
class PerceptualGroup:
    """A detected functional region of the page."""

    group_type: GroupType
    rect: Rect
    member_ids: frozenset[str]
    confidence: float = 1.0


def _warn(warnings: list[str] | None, message: str) -> None:
    log.warning("%s", message)
    if warnings is not None:
        warnings.append(message)


def fresh_id(base: str, used: set[str]) -> str:
    """Deterministic synthetic id that cannot collide with document ids."""
    if base not in used:
        used.add(base)
        return base
    n = 2
    while f"{base}-{n}" in used:
        n += 1
    used.add(f"{base}-{n}")
    return f"{base}-{n}"


def _mutually_contain(a: Rect, b: Rect, eps: float) -> bool:
    return rect_contains(a, b, eps) and rect_contains(b, a, eps)


def rebuild_hierarchy(doc: PrototypeDoc, eps: float = 0.5) -> HierarchyNode:
    """Rebuild the containment hierarchy from layer geometry alone.

    The authored grouping is discarded; every layer becomes a node whose
    parent is the smallest-area layer containing it (``eps``-tolerant).
    Equal rects (mutual containment) are treated as siblings, never as
    parent/child. Layers contained by nothing hang off a synthetic root
    node covering the canvas.
    """
    layers = list(doc.iter_layers())
    used_ids = {l.id for l in layers}
    root = HierarchyNode(fresh_id("canvas", used_ids), doc.canvas, synthetic=True)
    if not layers:
        return root

    nodes = [HierarchyNode(l.id, l.rect) for l in layers]
    order = list(range(len(layers)))
    # Candidate parents scanned in (area, document order); the first
    # containing, non-mutual candidate is the smallest-area parent. An
    # eps-tolerant container can be slightly smaller than its content,
    # so only candidates below the provable area floor are skipped.
    by_area = sorted(order, key=lambda i: (layers[i].rect.area, i))
    areas = [layers[i].rect.area for i in range(len(layers))]
    parents: list[int | None] = [None] * len(layers)
    for i in order:
        ri = layers[i].rect
        floor = max(0.0, ri.w - 2 * eps) * max(0.0, ri.h - 2 * eps)
        best: int | None = None
        for j in by_area:
            if j == i or areas[j] < floor:
                continue
            rj = layers[j].rect
            if rect_contains(rj, ri, eps) and not _mutually_contain(ri, rj, eps):
                best = j
                break
        parents[i] = best

    # eps tolerance can in principle admit a containment cycle between
    # near-equal rects; break any such cycle at its latest document index.
    for i in order:
        seen = {i}
        j = parents[i]
        while j is not None:
            if j in seen:
                parents[max(seen)] = None
                log.warning("containment cycle broken at layer %r", layers[max(seen)].id)
                break
            seen.add(j)
            j = parents[j]

    for i in order:
        p = parents[i]
        if p is None:
            root.children.append(nodes[i])
        else:
            nodes[p].children.append(nodes[i])

    _sort_children(root, doc)
    return root


def _order_key(node: HierarchyNode, doc: PrototypeDoc) -> int:
    """Document-order key; synthetic nodes sort by their earliest leaf."""
    if node.layer_id in doc.doc_order:
        return doc.doc_order[node.layer_id]
    keys = [_order_key(c, doc) for c in node.children]
    return min(keys) if keys else len(doc.doc_order)


def _sort_children(root: HierarchyNode, doc: PrototypeDoc) -> None:
    for node in root.iter_nodes():
        node.children.sort(key=lambda c: _order_key(c, doc))


def _parent_map(root: HierarchyNode) -> dict[int, HierarchyNode]:
    out: dict[int, HierarchyNode] = {}
    for node in root.iter_nodes():
        for child in node.children:
            out[id(child)] = node
    return out


def _lowest_common_ancestor(
    members: Sequence[HierarchyNode], root: HierarchyNode, parents: dict[int, HierarchyNode]
) -> HierarchyNode:
    def path(n: HierarchyNode) -> list[HierarchyNode]:
        chain = [n]
        while id(chain[-1]) in parents:
            chain.append(parents[id(chain[-1])])
        chain.reverse()
        return chain

    paths = [path(m) for m in members]
    lca = root
    for level in range(min(len(p) for p in paths)):
        first = paths[0][level]
        if all(p[level] is first for p in paths):
            lca = first
        else:
            break
    return lca


# --- fragment detectors ------------------------------------------------------


def detect_fragments_passthrough(
    doc: PrototypeDoc,
    annotations: AnnotationSet | None,
    *,
    hierarchy: HierarchyNode | None = None,
    warnings: list[str] | None = None,
) -> list[tuple[str, ...]]:
    """Echo annotation merge sets unchanged.

    When members of a set do not share an immediate parent in the rebuilt
    hierarchy (they live in disjoint subtrees) a warning is emitted, but
    the set is kept as annotated.
    """
    if annotations is None:
        return []
    groups = [tuple(g) for g in annotations.merge_groups]
    if hierarchy is not None:
        parents = _parent_map(hierarchy)
        by_id = {n.layer_id: n for n in hierarchy.iter_nodes()}
        for group in groups:
            nodes = [by_id[i] for i in group if i in by_id]
            if len(nodes) >= 2:
                parent_ids = {id(parents.get(id(n))) for n in nodes}
                if len(parent_ids) > 1:
                    _warn(
                        warnings,
                        f"merge group {list(group)} spans disjoint subtrees of the rebuilt hierarchy",
                    )
    return groups


def detect_fragments_heuristic(
    doc: PrototypeDoc,
    *,
    max_icon_px: float = 64.0,
    gap_px: float = 4.0,
    warnings: list[str] | None = None,
) -> list[tuple[str, ...]]:
    """Reference geometric stand-in for a learned fragment detector.

    Vector/shape leaves are clustered transitively by rect gap; every
    cluster of two or more layers whose union box fits in a
    ``max_icon_px`` square is reported as one merge group.
    """
    leaves = [l for l in doc.iter_layers() if l.kind in (LayerKind.VECTOR, LayerKind.SHAPE)]
    n = len(leaves)
    if n < 2:
        return []

    component = list(range(n))

    def find(i: int) -> int:
        while component[i] != i:
            component[i] = component[component[i]]
            i = component[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if rect_gap(leaves[i].rect, leaves[j].rect) <= gap_px:
                ri, rj = find(i), find(j)
                if ri != rj:
                    component[max(ri, rj)] = min(ri, rj)

    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)

    groups: list[tuple[str, ...]] = []
    for key in sorted(clusters):
        members = clusters[key]
        if len(members) < 2:
            continue
        bbox = rect_union_all([leaves[i].rect for i in members])
        if bbox.w <= max_icon_px and bbox.h <= max_icon_px:
            groups.append(tuple(leaves[i].id for i in members))
    return groups


def apply_merge_attr(
    root: HierarchyNode,
    merge_groups: Sequence[Sequence[str]],
    doc: PrototypeDoc,
    *,
    warnings: list[str] | None = None,
) -> HierarchyNode:
    """Mark each merge group on its smallest covering node.

    If the lowest common ancestor's leaves are exactly the group, the
    ancestor itself gets ``merge=True``; otherwise a new child holding
    exactly the group members is synthesized under the ancestor, with a
    rect spanning the members' smallest top-left to largest bottom-right.
    """
    if not merge_groups:
        return root
    used_ids = {n.layer_id for n in root.iter_nodes()}
    merge_counter = 0
    for group in merge_groups:
        by_id = {n.layer_id: n for n in root.iter_nodes()}
        members = []
        for layer_id in group:
            if layer_id not in by_id:
                raise UnknownLayerIdError(f"merge group references unknown layer {layer_id!r}")
            members.append(by_id[layer_id])
        if not members:
            continue

        parents = _parent_map(root)
        lca = members[0] if len(members) == 1 else _lowest_common_ancestor(members, root, parents)

        member_leaf_ids: set[str] = set()
        for m in members:
            member_leaf_ids |= m.leaf_ids()
        if lca is not root and lca.leaf_ids() == member_leaf_ids:
            lca.attrs.merge = True
            continue

        # Keep only members that are not inside another member's subtree.
        maximal: list[HierarchyNode] = []
        for m in members:
            anc = parents.get(id(m))
            inside = False
            while anc is not None:
                if anc in members:
                    inside = True
                    break
                anc = parents.get(id(anc))
            if not inside:
                maximal.append(m)

        for m in maximal:
            parent = parents[id(m)]
            parent.children.remove(m)
        merge_counter += 1
        node = HierarchyNode(
            fresh_id(f"merge-{merge_counter}", used_ids),
            rect_union_all([m.rect for m in maximal]),
            children=list(maximal),
            attrs=AttrSet(merge=True),
            synthetic=True,
        )
        lca.children.append(node)
        _sort_children(root, doc)
    return root


# --- perceptual-group detection ----------------------------------------------

#: Fraction of the canvas width a bar-like group must span.
BAR_WIDTH_RATIO = 0.9
#: Canvas-height fraction defining the top/bottom bands for bars.
BAR_BAND_RATIO = 0.15
#: Maximum relative size difference between list items.
LIST_SIZE_TOLERANCE = 0.10


def _size_similar(a: Rect, b: Rect) -> bool:
    return (
        abs(a.w - b.w) <= LIST_SIZE_TOLERANCE * max(a.w, b.w)
        and abs(a.h - b.h) <= LIST_SIZE_TOLERANCE * max(a.h, b.h)
    )


def detect_groups_heuristic(
    doc: PrototypeDoc,
    root: HierarchyNode,
    *,
    eps: float = 0.5,
    warnings: list[str] | None = None,
) -> list[PerceptualGroup]:
    """Reference geometric stand-in for a learned perceptual-group detector.

    Fixed, deterministic rules; every node yields at most one proposal,
    with precedence navigation_bar > toolbar > list_item > card >
    container.  All confidences are 1.0.
    """
    canvas = doc.canvas
    claimed: set[int] = set()
    groups: list[PerceptualGroup] = []

    def members_of(node: HierarchyNode) -> frozenset[str]:
        return frozenset(node.leaf_ids())

    def propose(node: HierarchyNode, group_type: GroupType) -> None:
        claimed.add(id(node))
        groups.append(PerceptualGroup(group_type, node.rect, members_of(node)))

    nodes = [n for n in root.iter_nodes() if n is not root]

    for node in nodes:
        if not node.children:
            continue
        wide = node.rect.w >= BAR_WIDTH_RATIO * canvas.w
        if wide and node.rect.y <= BAR_BAND_RATIO * canvas.h:
            propose(node, GroupType.NAVIGATION_BAR)
        elif wide and node.rect.bottom >= canvas.h - BAR_BAND_RATIO * canvas.h:
            propose(node, GroupType.TOOLBAR)

    # List items: runs of size-similar siblings sharing one alignment axis.
    for parent in root.iter_nodes():
        candidates = [c for c in parent.children if id(c) not in claimed]
        if len(candidates) < 2:
            continue
        for axis_value in ("x", "y"):
            pool = [c for c in candidates if id(c) not in claimed]
            clusters: list[list[HierarchyNode]] = []
            for child in pool:
                placed = False
                for cluster in clusters:
                    ref = cluster[0]
                    aligned = abs(getattr(child.rect, axis_value) - getattr(ref.rect, axis_value)) <= eps
                    if aligned and all(_size_similar(child.rect, m.rect) for m in cluster):
                        cluster.append(child)
                        placed = True
                        break
                if not placed:
                    clusters.append([child])
            for cluster in clusters:
                if len(cluster) >= 2:
                    for item in cluster:
                        propose(item, GroupType.LIST_ITEM)

    for node in nodes:
        if id(node) in claimed or not node.children:
            continue
        layer = doc.layer_map.get(node.layer_id)
        styled = layer is not None and (
            layer.style.get("fill") is not None
            or layer.style.get("background") is not None
            or layer.style.get("border-radius") is not None
        )
        if styled and len(node.leaf_nodes()) >= 2:
            propose(node, GroupType.CARD)

    for node in nodes:
        if id(node) in claimed or len(node.children) < 2:
            continue
        propose(node, GroupType.CONTAINER)

    return groups


def groups_from_annotations(
    root: HierarchyNode,
    annotations: AnnotationSet | None,
    *,
    eps: float = 0.5,
) -> list[PerceptualGroup]:
    """Perceptual groups from annotation boxes (passthrough detector path).

    Member ids are informative only (the leaves contained in the box);
    membership proper is recomputed during assignment.
    """
    if annotations is None:
        return []
    out = []
    for ag in annotations.perceptual_groups:
        member_ids = frozenset(
            n.layer_id for n in root.leaf_nodes() if rect_contains(ag.rect, n.rect, eps)
        )
        out.append(PerceptualGroup(ag.group_type, ag.rect, member_ids))
    return out


def membership_ratio(layer_rect: Rect, group_rect: Rect) -> float:
    """Overlap-over-layer-area ratio used for group membership.

    Deliberately not symmetric IoU: a small layer fully inside a large
    group should score 1.0 regardless of the group's size.
    """
    if layer_rect.area <= 0.0:
        return 0.0
    return rect_overlap_area(layer_rect, group_rect) / layer_rect.area


def assign_group_membership(
    root: HierarchyNode,
    groups: Sequence[PerceptualGroup],
    iou_threshold: float = 0.7,
    *,
    doc: PrototypeDoc,
    warnings: list[str] | None = None,
) -> HierarchyNode:
    """Materialize perceptual groups as nodes of the hierarchy.

    Groups are processed in ascending area order (ties by top-left
    corner, then type label). A node joins a group when its
    overlap-over-own-area ratio meets ``iou_threshold``; joined subtrees
    are taken whole, merge/group nodes are atomic units, and each joined
    set gets a new parent carrying the group attributes. Re-running the
    assignment with the same groups is a no-op.
    """
    ordered = sorted(
        groups,
        key=lambda g: (g.rect.area, g.rect.y, g.rect.x, g.group_type.value),
    )

    # Surface double claims between equal-area, non-nested groups up front.
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            a, b = ordered[i], ordered[j]
            if a.rect.area != b.rect.area:
                continue
            if rect_contains(a.rect, b.rect) or rect_contains(b.rect, a.rect):
                continue
            shared = a.member_ids & b.member_ids
            if shared:
                _warn(
                    warnings,
                    f"layers {sorted(shared)} pass the membership threshold for two "
                    f"equal-area groups ({a.group_type.value}, {b.group_type.value}); "
                    "assigning to the first in scan order",
                )

    used_ids = {n.layer_id for n in root.iter_nodes()}
    group_counter = 0
    for g in ordered:
        already = any(
            n.attrs.group_src_rect == g.rect and n.attrs.group_type == g.group_type
            for n in root.iter_nodes()
        )
        if already:
            continue

        members: list[HierarchyNode] = []

        def collect(node: HierarchyNode) -> None:
            for child in node.children:
                if membership_ratio(child.rect, g.rect) >= iou_threshold:
                    members.append(child)
                elif not child.attributed:
                    collect(child)

        collect(root)
        if not members:
            continue
        if (
            len(members) == 1
            and members[0].attrs.group
            and members[0].attrs.group_type == g.group_type
        ):
            continue

        merge_boundary = [m for m in members if m.attrs.merge and not m.leaf_ids() <= g.member_ids]
        for m in merge_boundary:
            _warn(
                warnings,
                f"merged fragment {m.layer_id!r} spans the boundary of a "
                f"{g.group_type.value} group; keeping the merge intact",
            )

        parents = _parent_map(root)
        attrs = AttrSet(group=True, group_type=g.group_type, group_src_rect=g.rect)
        if len(members) == 1 and not members[0].attributed:
            # the node is the group (a styled background swallowing the
            # group's content, or a single list row): label it directly so
            # its layer identity and style survive into codegen
            members[0].attrs = attrs
            continue
        group_counter += 1
        node = HierarchyNode(
            fresh_id(f"group-{group_counter}", used_ids),
            rect_union_all([m.rect for m in members]),
            children=list(members),
            attrs=attrs,
            synthetic=True,
        )
        if len(members) == 1:
            parent = parents[id(members[0])]
            idx = parent.children.index(members[0])
            parent.children[idx] = node
        else:
            lca = _lowest_common_ancestor(members, root, parents)
            for m in members:
                parents[id(m)].children.remove(m)
            lca.children.append(node)
            _sort_children(root, doc)
    return root


def hierarchy_to_json_dict(node: HierarchyNode) -> dict:
    """Stable JSON form of a hierarchy node (for inspection dumps)."""
    return {
        "id": node.layer_id,
        "rect": node.rect.to_json_dict(),
        "merge": node.attrs.merge,
        "group": node.attrs.group,
        "group_type": node.attrs.group_type.value if node.attrs.group_type else None,
        "children": [hierarchy_to_json_dict(c) for c in node.children],
    }


# --- detector registry --------------------------------------------------------

DetectorFn = Callable[..., tuple[list[tuple[str, ...]], list[PerceptualGroup]]]


def _run_passthrough(doc, hierarchy, annotations, config, warnings):
    merges = detect_fragments_passthrough(
        doc, annotations, hierarchy=hierarchy, warnings=warnings
    )
    groups = groups_from_annotations(
        hierarchy, annotations, eps=config.eps_containment
    )
    return merges, groups


def _run_heuristic(doc, hierarchy, annotations, config, warnings):
    merges = detect_fragments_heuristic(
        doc, max_icon_px=config.max_icon_px, gap_px=config.gap_px, warnings=warnings
    )
    groups = detect_groups_heuristic(
        doc, hierarchy, eps=config.eps_containment, warnings=warnings
    )
    return merges, groups


DETECTORS: dict[str, DetectorFn] = {
    "passthrough": _run_passthrough,
    "heuristic": _run_heuristic,
}


def get_detector(name: str) -> DetectorFn:
    try:
        return DETECTORS[name]
    except KeyError:
        raise ConfigError(
            f"unknown detector {name!r}; available: {', '.join(sorted(DETECTORS))}"
        ) from None
