"""Golden-file tests: fixture builds must be byte-stable across runs."""

from __future__ import annotations

from pathlib import Path

import pytest

from p2c.codegen import check_tag_balance
from p2c.model import parse_prototype
from p2c.pipeline import PipelineConfig, run_build

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

NAMES = ("card", "app", "overlay")


def build(name: str):
    doc = parse_prototype((FIXTURES / f"{name}.json").read_bytes())
    return run_build(doc, None, PipelineConfig())


@pytest.mark.parametrize("name", NAMES)
def test_golden_bytes(name):
    artifacts = build(name)
    assert artifacts.page_text == (GOLDEN / name / "index.html").read_text("utf-8")
    assert artifacts.stylesheet == (GOLDEN / name / "style.css").read_text("utf-8")
    assert artifacts.manifest_text == (GOLDEN / name / "assets-manifest.json").read_text("utf-8")


@pytest.mark.parametrize("name", NAMES)
def test_golden_repeat_build_identical(name):
    first = build(name)
    second = build(name)
    assert first.page_text == second.page_text
    assert first.stylesheet == second.stylesheet
    assert first.manifest_text == second.manifest_text


@pytest.mark.parametrize("name", NAMES)
def test_golden_wellformed(name):
    artifacts = build(name)
    check_tag_balance(artifacts.page_text)
    names = [n.classname for n in artifacts.html.root.iter_nodes()]
    assert len(names) == len(set(names))
