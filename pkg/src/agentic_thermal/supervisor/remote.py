"""OpenAI-compatible chat-completions backend with a five-tool schema."""

from __future__ import annotations

import json
import logging
import os
import time
from typing import Any

import httpx

from .prompts import PromptBundle
from .rules import SupervisorConfig, Tool, ToolCall, validate_tool_call

log = logging.getLogger(__name__)

ENV_ENDPOINT = "AGENTIC_THERMAL_LLM_URL"
ENV_TIMEOUT = "AGENTIC_THERMAL_LLM_TIMEOUT"
ENV_MODEL = "AGENTIC_THERMAL_LLM_MODEL"
ENV_API_KEY = "AGENTIC_THERMAL_LLM_API_KEY"

_DESCRIPTIONS = {
    Tool.INCREASE: "Increase exploration: set alpha in the upper range.",
    Tool.MODERATE: "Moderate exploration: set alpha in the middle range.",
    Tool.DECREASE: "Decrease exploration and exploit proven policies: set alpha in the lower range.",
    Tool.KEEP: "Keep the current alpha unchanged.",
    Tool.RESET: "Reset alpha to the default value.",
}


def tool_schemas(cfg: SupervisorConfig) -> list[dict]:
    tools = []
    for tool in Tool:
        bounds = cfg.range_for(tool)
        if bounds is not None:
            params = {
                "type": "object",
                "properties": {"alpha": {"type": "number", "minimum": bounds[0],
                                         "maximum": bounds[1],
                                         "description": "New entropy coefficient."}},
                "required": ["alpha"],
            }
            desc = f"{_DESCRIPTIONS[tool]} alpha in [{bounds[0]:g}, {bounds[1]:g}]."
        else:
            params = {"type": "object", "properties": {}}
            desc = _DESCRIPTIONS[tool]
            if tool is Tool.RESET:
                desc = f"{desc} (alpha={cfg.alpha_default:g})"
        tools.append({"type": "function",
                      "function": {"name": tool.value, "description": desc, "parameters": params}})
    return tools


def build_chat_request(bundle: PromptBundle, cfg: SupervisorConfig) -> dict:
    return {
        "model": cfg.model,
        "messages": bundle.messages(),
        "tools": tool_schemas(cfg),
        "tool_choice": "required",
        "temperature": 0.0,
    }


def _fallback(reason: str, rationale: str = "") -> ToolCall:
    log.warning("tool-call parse failure: %s", reason)
    return ToolCall(Tool.KEEP, None, rationale or reason, parse_ok=False)


def _first_invocation(message: dict) -> tuple[str, Any] | None:
    calls = message.get("tool_calls") or []
    if calls:
        fn = calls[0].get("function") or {}
        return fn.get("name"), fn.get("arguments")
    legacy = message.get("function_call")
    if legacy:
        return legacy.get("name"), legacy.get("arguments")
    return None


def parse_tool_call(raw: Any, cfg: SupervisorConfig | None = None) -> ToolCall:
    """Extract the first tool invocation from a chat-completions response.

    Anything unusable yields a ``keep_alpha`` call with ``parse_ok=False``.
    """
    cfg = cfg or SupervisorConfig()
    try:
        if isinstance(raw, (str, bytes)):
            raw = json.loads(raw)
        message = raw["choices"][0]["message"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        return _fallback(f"malformed response document ({exc!r})")
    if not isinstance(message, dict):
        return _fallback("malformed message")
    rationale = (message.get("content") or "").strip()

    found = _first_invocation(message)
    if found is None:
        return _fallback("no tool call in response", rationale)
    name, args = found
    try:
        tool = Tool(name)
    except ValueError:
        return _fallback(f"unknown tool {name!r}", rationale)

    if isinstance(args, str):
        try:
            args = json.loads(args) if args.strip() else {}
        except ValueError:
            return _fallback(f"arguments for {name} are not JSON", rationale)
    if args is None:
        args = {}
    if not isinstance(args, dict):
        return _fallback(f"arguments for {name} are not an object", rationale)

    if tool is Tool.KEEP:
        return ToolCall(tool, None, rationale)
    if tool is Tool.RESET:
        return ToolCall(tool, cfg.alpha_default, rationale)
    value = args.get("alpha", args.get("value"))
    try:
        value = float(value)
        call = ToolCall(tool, value, rationale)
    except (TypeError, ValueError):
        return _fallback(f"{name} missing a numeric alpha", rationale)
    problem = validate_tool_call(call, cfg)
    if problem:
        return _fallback(problem, rationale)
    return call


class RemoteBackend:
    """Queries a chat-completions server; never raises into the caller."""

    source = "remote"

    def __init__(self, cfg: SupervisorConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        self.endpoint = os.environ.get(ENV_ENDPOINT, cfg.endpoint).rstrip("/")
        self.timeout = float(os.environ.get(ENV_TIMEOUT, cfg.timeout))
        self.model = os.environ.get(ENV_MODEL, cfg.model)
        api_key = os.environ.get(ENV_API_KEY, cfg.api_key)
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = client or httpx.Client(timeout=self.timeout, headers=headers)

    def decide(self, metrics, bundle: PromptBundle, current_alpha: float) -> tuple[ToolCall, float]:
        body = build_chat_request(bundle, self.cfg)
        body["model"] = self.model
        start = time.monotonic()
        try:
            resp = self.client.post(f"{self.endpoint}/chat/completions", json=body,
                                    timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
        except httpx.TimeoutException:
            return _fallback(f"backend timed out after {self.timeout:g} s"), self.timeout
        except (httpx.HTTPError, ValueError) as exc:
            return _fallback(f"backend error: {exc}"), time.monotonic() - start
        return parse_tool_call(payload, self.cfg), time.monotonic() - start

    def close(self) -> None:
        self.client.close()
