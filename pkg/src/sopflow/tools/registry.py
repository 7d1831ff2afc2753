"""Tool registry: specs, results, and the execution wrapper agents call into.

Tool failures come back as failed ToolResults whose observation text the agent
can read; they are never raised out of an episode. Backend failures are the
exception: they propagate so the episode loop can retry or abort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from ..errors import (
    BackendError,
    EpisodeAborted,
    GenerationParseError,
    NotFoundError,
    ProgramRuntimeError,
    ProgramValidationError,
    ScriptExhaustedError,
    SopflowError,
    ToolError,
    ValidationError,
)

CATEGORIES = ("observability", "sop_flow", "analysis", "terminal")


@dataclass(frozen=True)
class ToolParam:
    name: str
    kind: str  # "string" | "number"
    required: bool = True


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    params: tuple[ToolParam, ...]
    category: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValidationError(f"unknown tool category {self.category!r}")


@dataclass
class ToolResult:
    tool: str
    observation: str
    payload: Any = None
    success: bool = True
    error: str = ""


@dataclass
class SopFlowState:
    """Mutable per-episode context the SOP flow tools read and write."""

    sop: Any = None            # the procedure currently being worked (SopDoc)
    program: Any = None        # last validated SopProgram
    last_findings: str = ""    # findings text of the last successful run_sop


@dataclass
class ToolContext:
    """Everything a tool invocation may touch. One per episode."""

    telemetry: Any
    kb: Any
    backend: Any
    detector: Any
    registry: "ToolRegistry | None" = None
    sop: SopFlowState = field(default_factory=SopFlowState)

    @property
    def window(self) -> tuple[int, int]:
        return self.telemetry.scenario.window


class ToolRegistry:
    """Immutable after construction; invocations are read-only toward telemetry."""

    def __init__(self):
        self._tools: dict[str, tuple[ToolSpec, Callable]] = {}

    def register(self, spec: ToolSpec, fn: Callable) -> None:
        if spec.name in self._tools:
            raise ValidationError(f"duplicate tool name {spec.name!r}")
        self._tools[spec.name] = (spec, fn)

    def names(self) -> frozenset[str]:
        return frozenset(self._tools)

    def has(self, name: str) -> bool:
        return name in self._tools

    def spec(self, name: str) -> ToolSpec:
        try:
            return self._tools[name][0]
        except KeyError:
            raise NotFoundError(f"unknown tool {name!r}") from None

    def specs(self) -> list[ToolSpec]:
        return sorted((spec for spec, _ in self._tools.values()), key=lambda s: s.name)

    def catalog_text(self, categories: tuple[str, ...] | None = None) -> str:
        """One line per tool for prompt construction and docs."""
        lines = []
        for spec in self.specs():
            if categories is not None and spec.category not in categories:
                continue
            params = ", ".join(
                f"{p.name}:{p.kind}" + ("" if p.required else "?") for p in spec.params
            )
            lines.append(f"- {spec.name}({params}) [{spec.category}]: {spec.description}")
        return "\n".join(lines)

    def check_args(self, name: str, args: dict) -> str | None:
        """Return a violation message if args do not satisfy the tool schema."""
        if name not in self._tools:
            return f"unknown tool {name!r}"
        spec = self._tools[name][0]
        declared = {p.name: p for p in spec.params}
        for key in args:
            if key not in declared:
                return f"unknown argument {key!r} for tool {name}"
        for param in spec.params:
            if param.required and param.name not in args:
                return f"missing required argument {param.name!r} for tool {name}"
        return None

    def execute(self, name: str, args: dict, ctx: ToolContext) -> ToolResult:
        violation = self.check_args(name, args)
        if violation:
            return ToolResult(tool=name, observation=f"tool error: {violation}",
                              success=False, error=violation)
        spec, fn = self._tools[name]
        coerced: dict[str, Any] = {}
        for param in spec.params:
            if param.name not in args:
                continue
            value = args[param.name]
            if param.kind == "number":
                try:
                    coerced[param.name] = float(value)
                except (TypeError, ValueError):
                    message = f"argument {param.name!r} of {name} must be a number"
                    return ToolResult(tool=name, observation=f"tool error: {message}",
                                      success=False, error=message)
            else:
                coerced[param.name] = str(value)
        try:
            return fn(ctx, **coerced)
        except (EpisodeAborted, BackendError, ScriptExhaustedError):
            raise
        except (ToolError, NotFoundError, ValidationError, GenerationParseError,
                ProgramValidationError, ProgramRuntimeError) as exc:
            return ToolResult(tool=name, observation=f"tool error: {exc}",
                              success=False, error=str(exc))
        except SopflowError as exc:
            return ToolResult(tool=name, observation=f"tool error: {exc}",
                              success=False, error=str(exc))
