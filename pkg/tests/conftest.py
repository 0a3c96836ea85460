from __future__ import annotations

import json
from pathlib import Path

import pytest

from p2c.model import parse_prototype
from p2c.pipeline import PipelineConfig

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def config() -> PipelineConfig:
    return PipelineConfig().validate()


@pytest.fixture
def card_doc():
    """A small card page: background card, two texts side by side, a photo."""
    return parse_prototype(
        json.dumps(
            {
                "canvas": {"w": 400, "h": 640},
                "layers": [
                    {
                        "id": "card",
                        "name": "card",
                        "kind": "shape",
                        "rect": {"x": 40, "y": 200, "w": 320, "h": 160},
                        "style": {"fill": "#FFFFFF", "border-radius": 12},
                    },
                    {
                        "id": "price",
                        "name": "price",
                        "kind": "text",
                        "rect": {"x": 60, "y": 230, "w": 80, "h": 24},
                        "text": "$190",
                        "style": {"fill": "#222222", "font-size": 16},
                    },
                    {
                        "id": "hours",
                        "name": "hours",
                        "kind": "text",
                        "rect": {"x": 240, "y": 230, "w": 100, "h": 24},
                        "text": "16 hours",
                    },
                    {
                        "id": "photo",
                        "name": "photo",
                        "kind": "image",
                        "rect": {"x": 60, "y": 280, "w": 280, "h": 60},
                    },
                ],
            }
        )
    )


@pytest.fixture
def wifi_doc():
    """Three small vector arcs close together: a fragmented icon."""
    return parse_prototype(
        json.dumps(
            {
                "canvas": {"w": 400, "h": 640},
                "layers": [
                    {"id": "arc1", "name": "arc", "kind": "vector",
                     "rect": {"x": 100, "y": 100, "w": 24, "h": 8}},
                    {"id": "arc2", "name": "arc", "kind": "vector",
                     "rect": {"x": 104, "y": 110, "w": 16, "h": 8}},
                    {"id": "arc3", "name": "arc", "kind": "vector",
                     "rect": {"x": 108, "y": 120, "w": 8, "h": 4}},
                    {"id": "title", "name": "title", "kind": "text",
                     "rect": {"x": 100, "y": 300, "w": 200, "h": 30}, "text": "Settings"},
                ],
            }
        )
    )
