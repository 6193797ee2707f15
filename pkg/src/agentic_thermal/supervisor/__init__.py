"""Windowed alpha supervision: rule engine, prompts, remote backend and loop."""

from .loop import (RECOMMENDATION_COLUMNS, RulesBackend, Supervisor, make_backend,
                   replay_summaries, run_supervisor_loop)
from .prompts import PromptBundle, build_prompts
from .remote import RemoteBackend, build_chat_request, parse_tool_call, tool_schemas
from .rules import (AlphaRecommendation, Backend, EmptyWindow, SupervisorConfig, Tool,
                    ToolCall, UtilizationClass, classify_utilization, recommend_alpha,
                    validate_tool_call)

__all__ = [
    "AlphaRecommendation", "Backend", "EmptyWindow", "PromptBundle", "RECOMMENDATION_COLUMNS",
    "RemoteBackend", "RulesBackend", "Supervisor", "SupervisorConfig", "Tool", "ToolCall",
    "UtilizationClass", "build_chat_request", "build_prompts", "classify_utilization",
    "make_backend", "parse_tool_call", "recommend_alpha", "replay_summaries",
    "run_supervisor_loop", "tool_schemas", "validate_tool_call",
]
