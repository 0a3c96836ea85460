"""Visual-style oracles: rule-based mapping and the language-model boundary.

The emitter owns every layout property; oracles may only produce visual
declarations (colors, fonts, borders, shadows, opacity). Two
implementations ship: a deterministic offline rule table, and a thin
remote client that builds a four-part prompt
(role-playing, user input, field explanation, output requirement),
sends it to a configured endpoint, and parses the JSON reply.
"""

from __future__ import annotations

import importlib.resources
import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .codegen import fmt_px
from .errors import ConfigError, EmptyReplyError, UnparsableReplyError
from .layout import LayoutNode
from .model import StyleProps

log = logging.getLogger(__name__)

#: CSS properties a style oracle is allowed to produce.
CSS_VISUAL_PROPERTIES: frozenset[str] = frozenset(
    {
        "background-color",
        "color",
        "font-family",
        "font-size",
        "font-weight",
        "line-height",
        "border-radius",
        "border-width",
        "border-color",
        "border-style",
        "box-shadow",
        "opacity",
        "text-align",
    }
)

#: Property names (or prefixes) owned by the layout emitter; oracles and
#: model replies must never contribute these.
LAYOUT_PROPERTY_NAMES: frozenset[str] = frozenset(
    {
        "display",
        "flex-direction",
        "position",
        "top",
        "left",
        "right",
        "bottom",
        "width",
        "height",
        "float",
        "gap",
        "x",
        "y",
        "w",
        "h",
    }
)
LAYOUT_PROPERTY_PREFIXES: tuple[str, ...] = ("margin", "padding", "flex", "inset")


def is_layout_property(name: str) -> bool:
    if name in LAYOUT_PROPERTY_NAMES:
        return True
    return any(name == p or name.startswith(p + "-") for p in LAYOUT_PROPERTY_PREFIXES)


_PX_VALUED = {"font-size", "line-height", "border-radius", "border-width"}


def _css_value(prop: str, value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)) and prop in _PX_VALUED:
        return fmt_px(float(value))
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def _warn(warnings: list[str] | None, message: str) -> None:
    log.warning("%s", message)
    if warnings is not None:
        warnings.append(message)


def style_oracle_rules(
    node: LayoutNode, style: StyleProps, *, warnings: list[str] | None = None
) -> list[tuple[str, str]]:
    """Offline rule-based oracle: direct key-to-property mapping.

    ``fill`` maps to text color on text nodes and background color
    elsewhere; unknown keys are skipped with a warning; duplicate target
    properties keep the first value and warn.
    """
    is_text = node.text is not None
    mapping: dict[str, str] = {
        "fill": "color" if is_text else "background-color",
        "background": "background-color",
        "color": "color",
        "font-family": "font-family",
        "font-size": "font-size",
        "font-weight": "font-weight",
        "line-height": "line-height",
        "border-radius": "border-radius",
        "border-width": "border-width",
        "border-color": "border-color",
        "opacity": "opacity",
        "shadow": "box-shadow",
    }
    out: list[tuple[str, str]] = []
    seen: set[str] = set()
    for key, value in style.values.items():
        prop = mapping.get(key)
        if prop is None:
            _warn(warnings, f"style key {key!r} on {node.id!r} has no CSS mapping; skipped")
            continue
        if prop in seen:
            _warn(warnings, f"style key {key!r} on {node.id!r} duplicates {prop}; first value kept")
            continue
        seen.add(prop)
        out.append((prop, _css_value(prop, value)))
    return out


# --- prompt protocol -----------------------------------------------------------

ROLE_PLAYING = (
    "You are a senior front-end developer with years of experience and advanced "
    "CSS skills. You translate design-tool style properties into clean CSS."
)

OUTPUT_REQUIREMENT = (
    "Return a parsable JSON object and nothing else. Each field must be a CSS "
    "property name mapped to its value. Only visual-effect properties are "
    "allowed; never include layout properties such as position, width, height, "
    "margin or padding."
)


@dataclass(frozen=True)
class LlmPrompt:
    """Four-part prompt: role-playing, user input, field explanation, output requirement."""

    role_playing: str
    user_input: str
    field_explanation: str
    output_requirement: str

    def text(self) -> str:
        return "\n\n".join(
            (
                self.role_playing,
                "User input:\n" + self.user_input,
                "Field explanation:\n" + self.field_explanation,
                self.output_requirement,
            )
        )


def load_field_docs() -> dict[str, str]:
    """Bundled explanations of every whitelisted style property."""
    text = importlib.resources.files("p2c.data").joinpath("field_docs.json").read_text("utf-8")
    return json.loads(text)


def build_llm_prompt(
    node: LayoutNode,
    style: StyleProps,
    field_docs: Mapping[str, str],
    *,
    warnings: list[str] | None = None,
) -> LlmPrompt:
    """Assemble the four-part prompt for one node.

    Layout-flavored keys are filtered out of the user input; style keys
    missing from the field-docs table are flagged but still sent.
    """
    filtered = {k: v for k, v in style.values.items() if not is_layout_property(k)}
    explanation: dict[str, str] = {}
    for key in filtered:
        if key in field_docs:
            explanation[key] = field_docs[key]
        else:
            _warn(warnings, f"style key {key!r} has no field-docs entry")
    return LlmPrompt(
        role_playing=ROLE_PLAYING,
        user_input=json.dumps(filtered, sort_keys=True),
        field_explanation=json.dumps(explanation, sort_keys=True),
        output_requirement=OUTPUT_REQUIREMENT,
    )


def parse_llm_reply(text: str, *, warnings: list[str] | None = None) -> list[tuple[str, str]]:
    """Extract visual declarations from a model reply.

    Finds the first JSON object in the reply (code fences tolerated),
    validates property names against the visual whitelist, and drops
    layout or unknown properties with warnings.
    """
    if text is None or not text.strip():
        raise EmptyReplyError("model reply is empty")
    decoder = json.JSONDecoder()
    obj: Mapping[str, Any] | None = None
    pos = text.find("{")
    while pos != -1:
        try:
            candidate, _ = decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            pos = text.find("{", pos + 1)
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
        pos = text.find("{", pos + 1)
    if obj is None:
        raise UnparsableReplyError("no JSON object found in model reply")

    out: list[tuple[str, str]] = []
    for key, value in obj.items():
        if is_layout_property(key):
            _warn(warnings, f"model reply contained layout property {key!r}; dropped")
        elif key not in CSS_VISUAL_PROPERTIES:
            _warn(warnings, f"model reply property {key!r} not in the CSS whitelist; dropped")
        else:
            out.append((key, _css_value(key, value)))
    return out


# --- remote client boundary -------------------------------------------------------

ENDPOINT_ENV_VAR = "P2C_LLM_ENDPOINT"
API_KEY_ENV_VAR = "P2C_LLM_API_KEY"
DEFAULT_TIMEOUT_S = 30.0
MAX_RETRIES = 2


class LlmClient:
    """Thin transport: send a prompt string, receive reply text.

    ``transport`` may be injected for tests; the default posts
    ``{"prompt": ...}`` to the configured endpoint with a bearer key and
    expects ``{"text": ...}`` back. At most two retries, 30 s timeout.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str,
        *,
        timeout: float = DEFAULT_TIMEOUT_S,
        transport: Callable[[str], str] | None = None,
    ) -> None:
        if not endpoint:
            raise ConfigError("LLM endpoint is not configured")
        if not api_key:
            raise ConfigError(f"LLM API key is not set (env var {API_KEY_ENV_VAR})")
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self._transport = transport or self._http_transport

    @classmethod
    def from_env(cls, *, transport: Callable[[str], str] | None = None) -> "LlmClient":
        endpoint = os.environ.get(ENDPOINT_ENV_VAR, "")
        api_key = os.environ.get(API_KEY_ENV_VAR, "")
        if not endpoint:
            raise ConfigError(f"environment variable {ENDPOINT_ENV_VAR} is not set")
        if not api_key:
            raise ConfigError(f"environment variable {API_KEY_ENV_VAR} is not set")
        return cls(endpoint, api_key, transport=transport)

    def _http_transport(self, prompt: str) -> str:
        import urllib.request

        request = urllib.request.Request(
            self.endpoint,
            data=json.dumps({"prompt": prompt}).encode("utf-8"),
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
            method="POST",
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        if not isinstance(payload, dict) or "text" not in payload:
            raise UnparsableReplyError("endpoint reply missing 'text' field")
        return str(payload["text"])

    def complete(self, prompt: str) -> str:
        last_exc: Exception | None = None
        for attempt in range(1 + MAX_RETRIES):
            try:
                return self._transport(prompt)
            except (UnparsableReplyError, EmptyReplyError):
                raise
            except Exception as exc:  # transport-level failure: retry
                last_exc = exc
                if attempt < MAX_RETRIES:
                    time.sleep(0.1 * (attempt + 1))
        raise UnparsableReplyError(f"LLM transport failed after retries: {last_exc}")
