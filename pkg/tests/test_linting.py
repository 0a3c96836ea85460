from __future__ import annotations

import json
import random

import pytest

from p2c.linting import (
    HierarchyNode,
    PerceptualGroup,
    apply_merge_attr,
    assign_group_membership,
    detect_fragments_heuristic,
    detect_fragments_passthrough,
    detect_groups_heuristic,
    get_detector,
    membership_ratio,
    rebuild_hierarchy,
)
from p2c.errors import ConfigError
from p2c.model import GroupType, Rect, parse_annotations, parse_prototype, rect_contains

from generators import nested_doc
from oracles import brute_force_parent_map, transitive_clusters


def doc_of(layers, w=400, h=640):
    return parse_prototype(json.dumps({"canvas": {"w": w, "h": h}, "layers": layers}))


def leaf(lid, x, y, w, h, kind="shape", **extra):
    layer = {"id": lid, "name": lid, "kind": kind, "rect": {"x": x, "y": y, "w": w, "h": h}}
    if kind == "text":
        layer["text"] = extra.pop("text", lid)
    layer.update(extra)
    return layer


def parent_map_of(root: HierarchyNode) -> dict[str, str | None]:
    out: dict[str, str | None] = {}

    def walk(node: HierarchyNode, parent: HierarchyNode | None):
        if parent is not None:
            out[node.layer_id] = None if parent.synthetic else parent.layer_id
        for child in node.children:
            walk(child, node)

    walk(root, None)
    return out


# --- rebuild_hierarchy ----------------------------------------------------------


def test_rebuild_single_leaf():
    doc = doc_of([leaf("a", 10, 10, 50, 50)])
    root = rebuild_hierarchy(doc)
    assert root.synthetic and len(root.children) == 1
    assert root.children[0].layer_id == "a"


def test_rebuild_nested_chain():
    doc = doc_of(
        [
            leaf("A", 0, 0, 100, 100),
            leaf("B", 10, 10, 20, 20),
            leaf("C", 12, 12, 5, 5),
        ]
    )
    root = rebuild_hierarchy(doc)
    # oracle: brute-force smallest-container check
    assert brute_force_parent_map(doc, 0.5) == {"A": None, "B": "A", "C": "B"}
    assert parent_map_of(root) == {"A": None, "B": "A", "C": "B"}


def test_rebuild_equal_rects_become_siblings():
    doc = doc_of([leaf("first", 10, 10, 50, 50), leaf("second", 10, 10, 50, 50)])
    root = rebuild_hierarchy(doc)
    assert brute_force_parent_map(doc, 0.5) == {"first": None, "second": None}
    assert [c.layer_id for c in root.children] == ["first", "second"]


def test_rebuild_discards_original_grouping():
    # authored group sits far away from its child: geometry wins
    doc = doc_of(
        [
            {
                "id": "g", "name": "g", "kind": "group",
                "rect": {"x": 0, "y": 0, "w": 40, "h": 40},
                "children": [leaf("inner", 200, 200, 10, 10)],
            },
            leaf("big", 190, 190, 40, 40),
        ]
    )
    root = rebuild_hierarchy(doc)
    assert parent_map_of(root)["inner"] == "big"


@pytest.mark.parametrize("seed", range(40))
def test_rebuild_matches_brute_force_on_random_docs(seed):
    doc = nested_doc(random.Random(seed * 31 + 7))
    root = rebuild_hierarchy(doc, eps=0.5)
    assert parent_map_of(root) == brute_force_parent_map(doc, 0.5)


@pytest.mark.parametrize("seed", range(10))
def test_rebuild_invariants(seed):
    doc = nested_doc(random.Random(seed + 1000))
    root = rebuild_hierarchy(doc, eps=0.5)
    # every input layer appears exactly once
    ids = sorted(n.layer_id for n in root.iter_nodes() if not n.synthetic)
    assert ids == sorted(l.id for l in doc.iter_layers())
    # parent rect contains child rect (eps)
    for node in root.iter_nodes():
        for child in node.children:
            if node.synthetic:
                continue
            assert rect_contains(node.rect, child.rect, 0.5)


# --- fragment detectors -----------------------------------------------------------


def test_passthrough_empty_and_echo():
    doc = doc_of([leaf("a", 0, 0, 10, 10), leaf("b", 20, 0, 10, 10)])
    assert detect_fragments_passthrough(doc, None) == []
    ann = parse_annotations(json.dumps({"merge_groups": [["a", "b"]]}), doc)
    assert detect_fragments_passthrough(doc, ann) == [("a", "b")]


def test_passthrough_disjoint_subtrees_warns():
    doc = doc_of(
        [
            leaf("p1", 0, 0, 100, 100),
            leaf("a", 10, 10, 10, 10),
            leaf("p2", 200, 200, 100, 100),
            leaf("b", 210, 210, 10, 10),
        ]
    )
    ann = parse_annotations(json.dumps({"merge_groups": [["a", "b"]]}), doc)
    root = rebuild_hierarchy(doc)
    warnings: list[str] = []
    groups = detect_fragments_passthrough(doc, ann, hierarchy=root, warnings=warnings)
    assert groups == [("a", "b")]
    assert len(warnings) == 1 and "disjoint" in warnings[0]


def test_heuristic_wifi_icon_cluster(wifi_doc):
    groups = detect_fragments_heuristic(wifi_doc, max_icon_px=64, gap_px=4)
    assert groups == [("arc1", "arc2", "arc3")]
    # oracle: brute-force transitive closure over the vector leaves
    arcs = [l.rect for l in wifi_doc.iter_layers() if l.kind.value == "vector"]
    clusters = [c for c in transitive_clusters(arcs, 4.0) if len(c) >= 2]
    assert clusters == [[0, 1, 2]]


def test_heuristic_single_vector_no_group():
    doc = doc_of([leaf("v", 10, 10, 8, 8, kind="vector")])
    assert detect_fragments_heuristic(doc) == []


def test_heuristic_far_apart_vectors_no_group():
    doc = doc_of(
        [leaf("v1", 0, 0, 8, 8, kind="vector"), leaf("v2", 200, 0, 8, 8, kind="vector")]
    )
    assert detect_fragments_heuristic(doc) == []
    assert [c for c in transitive_clusters([Rect(0, 0, 8, 8), Rect(200, 0, 8, 8)], 4.0) if len(c) >= 2] == []


def test_heuristic_cluster_larger_than_icon_box_not_merged():
    doc = doc_of(
        [leaf("v1", 0, 0, 60, 60, kind="vector"), leaf("v2", 62, 0, 60, 60, kind="vector")]
    )
    assert detect_fragments_heuristic(doc, max_icon_px=64, gap_px=4) == []


# --- apply_merge_attr ---------------------------------------------------------------


def test_merge_all_children_marks_parent():
    doc = doc_of(
        [
            leaf("P", 0, 0, 100, 100),
            leaf("a", 10, 10, 10, 10),
            leaf("b", 30, 10, 10, 10),
        ]
    )
    root = rebuild_hierarchy(doc)
    apply_merge_attr(root, [("a", "b")], doc)
    nodes = {n.layer_id: n for n in root.iter_nodes()}
    assert nodes["P"].attrs.merge is True
    assert sorted(nodes["P"].leaf_ids()) == ["a", "b"]


def test_merge_partial_children_synthesizes_node():
    doc = doc_of(
        [
            leaf("P", 0, 0, 100, 100),
            leaf("a", 10, 10, 10, 10),
            leaf("b", 30, 10, 10, 10),
            leaf("c", 50, 10, 10, 10),
            leaf("d", 70, 10, 10, 10),
        ]
    )
    root = rebuild_hierarchy(doc)
    apply_merge_attr(root, [("a", "b")], doc)
    nodes = {n.layer_id: n for n in root.iter_nodes()}
    p = nodes["P"]
    assert p.attrs.merge is False
    merged = [c for c in p.children if c.attrs.merge]
    assert len(merged) == 1
    m = merged[0]
    assert sorted(c.layer_id for c in m.children) == ["a", "b"]
    # bbox by min/max arithmetic: (10,10) to (40,20)
    assert m.rect == Rect(10, 10, 30, 10)
    # leaf multiset preserved
    assert sorted(root.leaf_ids()) == ["a", "b", "c", "d"]


def test_merge_empty_list_is_identity(wifi_doc):
    root = rebuild_hierarchy(wifi_doc)
    before = [(n.layer_id, n.attrs.merge) for n in root.iter_nodes()]
    apply_merge_attr(root, [], wifi_doc)
    assert [(n.layer_id, n.attrs.merge) for n in root.iter_nodes()] == before


# --- detect_groups_heuristic -----------------------------------------------------------


def test_navigation_bar_rule():
    # full-width 60px-tall group at y=0 on an 800-tall canvas
    doc = doc_of(
        [
            leaf("bar", 0, 0, 400, 60),
            leaf("t1", 10, 10, 50, 20, kind="text"),
            leaf("t2", 340, 10, 50, 20, kind="text"),
        ],
        w=400,
        h=800,
    )
    root = rebuild_hierarchy(doc)
    groups = detect_groups_heuristic(doc, root)
    nav = [g for g in groups if g.group_type is GroupType.NAVIGATION_BAR]
    assert len(nav) == 1 and nav[0].rect == Rect(0, 0, 400, 60)
    assert nav[0].confidence == 1.0


def test_toolbar_rule_bottom_band():
    doc = doc_of(
        [
            leaf("bar", 0, 740, 400, 60),
            leaf("t1", 10, 750, 50, 20, kind="text"),
            leaf("t2", 340, 750, 50, 20, kind="text"),
        ],
        w=400,
        h=800,
    )
    root = rebuild_hierarchy(doc)
    groups = detect_groups_heuristic(doc, root)
    assert [g.group_type for g in groups if g.group_type is GroupType.TOOLBAR] == [GroupType.TOOLBAR]


def test_list_items_vertical_stack():
    # three 100x80 siblings vertically stacked, left-aligned
    doc = doc_of(
        [
            leaf("r1", 50, 100, 100, 80),
            leaf("r2", 50, 200, 100, 80),
            leaf("r3", 50, 300, 100, 80),
        ]
    )
    root = rebuild_hierarchy(doc)
    groups = detect_groups_heuristic(doc, root)
    items = [g for g in groups if g.group_type is GroupType.LIST_ITEM]
    assert len(items) == 3
    assert [sorted(g.member_ids) for g in items] == [["r1"], ["r2"], ["r3"]]


def test_list_items_size_tolerance():
    # 15% size difference breaks the run
    doc = doc_of(
        [
            leaf("r1", 50, 100, 100, 80),
            leaf("r2", 50, 200, 100, 80),
            leaf("r3", 50, 300, 115, 92),
        ]
    )
    root = rebuild_hierarchy(doc)
    items = [g for g in detect_groups_heuristic(doc, root) if g.group_type is GroupType.LIST_ITEM]
    assert [sorted(g.member_ids) for g in items] == [["r1"], ["r2"]]


def test_card_rule_needs_style_and_two_leaves(card_doc):
    root = rebuild_hierarchy(card_doc)
    groups = detect_groups_heuristic(card_doc, root)
    cards = [g for g in groups if g.group_type is GroupType.CARD]
    assert len(cards) == 1
    assert cards[0].member_ids == {"price", "hours", "photo"}


def test_empty_page_yields_no_groups():
    doc = doc_of([])
    root = rebuild_hierarchy(doc)
    assert detect_groups_heuristic(doc, root) == []


def test_detectors_are_deterministic(card_doc, config):
    detector = get_detector("heuristic")
    root1 = rebuild_hierarchy(card_doc)
    root2 = rebuild_hierarchy(card_doc)
    out1 = detector(card_doc, root1, None, config, [])
    out2 = detector(card_doc, root2, None, config, [])
    assert out1 == out2
    with pytest.raises(ConfigError):
        get_detector("neural")


# --- membership ratio + assignment ---------------------------------------------------


def test_membership_ratio_values():
    group = Rect(0, 0, 100, 100)
    assert membership_ratio(Rect(10, 10, 10, 10), group) == 1.0
    # half overlapping: ratio 0.5 < 0.7
    assert membership_ratio(Rect(-10, 0, 20, 10), group) == pytest.approx(0.5)


def test_assignment_single_member_labeled_in_place():
    # a lone node passing the threshold becomes the group itself,
    # keeping its layer identity (and style) for codegen
    doc = doc_of([leaf("a", 10, 10, 20, 20), leaf("b", 300, 300, 20, 20)])
    root = rebuild_hierarchy(doc)
    g = PerceptualGroup(GroupType.CARD, Rect(0, 0, 100, 100), frozenset({"a"}))
    assign_group_membership(root, [g], 0.7, doc=doc)
    nodes = {n.layer_id: n for n in root.iter_nodes()}
    assert nodes["a"].attrs.group and nodes["a"].attrs.group_type is GroupType.CARD
    assert not nodes["b"].attrs.group
    assert nodes["b"] in root.children  # non-member untouched


def test_assignment_multi_member_group_gets_parent_node():
    doc = doc_of(
        [leaf("a", 10, 10, 20, 20), leaf("b", 40, 10, 20, 20), leaf("c", 300, 300, 20, 20)]
    )
    root = rebuild_hierarchy(doc)
    g = PerceptualGroup(GroupType.CARD, Rect(0, 0, 100, 100), frozenset({"a", "b"}))
    assign_group_membership(root, [g], 0.7, doc=doc)
    card_nodes = [n for n in root.iter_nodes() if n.attrs.group]
    assert len(card_nodes) == 1
    assert {ch.layer_id for ch in card_nodes[0].children} == {"a", "b"}


def test_assignment_half_overlap_not_member():
    doc = doc_of([leaf("a", -10, 0, 20, 10)])
    root = rebuild_hierarchy(doc)
    g = PerceptualGroup(GroupType.CARD, Rect(0, 0, 100, 100), frozenset())
    assign_group_membership(root, [g], 0.7, doc=doc)
    assert not any(n.attrs.group for n in root.iter_nodes())


def test_assignment_nested_groups_ascending_order():
    # small card inside a large container: card materializes first, then
    # the container claims the card node as a single unit
    doc = doc_of(
        [
            leaf("x", 10, 10, 30, 30),
            leaf("y", 50, 10, 30, 30),
            leaf("z", 10, 60, 30, 30),
        ]
    )
    root = rebuild_hierarchy(doc)
    card = PerceptualGroup(GroupType.CARD, Rect(5, 5, 80, 40), frozenset({"x", "y"}))
    container = PerceptualGroup(GroupType.CONTAINER, Rect(0, 0, 120, 120), frozenset({"x", "y", "z"}))
    assign_group_membership(root, [container, card], 0.7, doc=doc)
    card_node = next(n for n in root.iter_nodes() if n.attrs.group_type is GroupType.CARD)
    container_node = next(n for n in root.iter_nodes() if n.attrs.group_type is GroupType.CONTAINER)
    assert {c.layer_id for c in card_node.children} == {"x", "y"}
    assert card_node in container_node.children
    assert {n.layer_id for n in container_node.iter_nodes() if not n.synthetic} == {"x", "y", "z"}


def test_assignment_idempotent(card_doc):
    root = rebuild_hierarchy(card_doc)
    groups = detect_groups_heuristic(card_doc, root)
    assign_group_membership(root, groups, 0.7, doc=card_doc)
    snapshot = [(n.layer_id, n.attrs.group, n.attrs.merge) for n in root.iter_nodes()]
    assign_group_membership(root, groups, 0.7, doc=card_doc)
    assert [(n.layer_id, n.attrs.group, n.attrs.merge) for n in root.iter_nodes()] == snapshot


def test_assignment_equal_area_double_claim_warns():
    doc = doc_of([leaf("a", 40, 40, 20, 20)])
    root = rebuild_hierarchy(doc)
    g1 = PerceptualGroup(GroupType.CARD, Rect(0, 0, 100, 100), frozenset({"a"}))
    g2 = PerceptualGroup(GroupType.CONTAINER, Rect(20, 20, 100, 100), frozenset({"a"}))
    warnings: list[str] = []
    assign_group_membership(root, [g1, g2], 0.7, doc=doc, warnings=warnings)
    assert any("equal-area" in w for w in warnings)
