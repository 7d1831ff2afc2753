"""Episode data structures: candidates, action sets, step records, state."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..errors import ValidationError
from ..tools import RootCause

PROVENANCE_AGENT = "action_agent"
PROVENANCE_FLOW = "flow_rule"
PROVENANCE_JUDGE = "judge_rule"
PROVENANCE_MAIN = "main_agent"  # direct-selection mode (action set ablated)

OUTCOME_COMPLETED = "completed"
OUTCOME_BUDGET = "budget_exhausted"
OUTCOME_ABORTED = "aborted"

DEFAULT_MAX_STEPS = 20
DEFAULT_ACTION_SET_SIZE = 5
DEFAULT_MAX_ROOT_CAUSES = 3


@dataclass
class Ablations:
    """Mechanism toggles; all on by default. ``sop_knowledge`` off implies the
    SOP store is emptied and the whole flow (prompt text and rules) is off."""

    sop_knowledge: bool = True
    sop_flow: bool = True
    action_set: bool = True
    action_agent: bool = True
    ob_agent: bool = True
    judge_agent: bool = True

    @property
    def flow_rules_active(self) -> bool:
        return self.sop_knowledge and self.sop_flow

    def as_dict(self) -> dict:
        return {
            "sop_knowledge": self.sop_knowledge,
            "sop_flow": self.sop_flow,
            "action_set": self.action_set,
            "action_agent": self.action_agent,
            "ob_agent": self.ob_agent,
            "judge_agent": self.judge_agent,
        }

    @classmethod
    def from_dict(cls, mapping: dict) -> "Ablations":
        ab = cls()
        for key, value in (mapping or {}).items():
            if not hasattr(ab, key):
                raise ValidationError(f"unknown ablation flag {key!r}")
            setattr(ab, key, bool(value))
        return ab


@dataclass
class AgentConfig:
    max_steps: int = DEFAULT_MAX_STEPS
    action_set_size: int = DEFAULT_ACTION_SET_SIZE
    max_root_causes: int = DEFAULT_MAX_ROOT_CAUSES
    judge_after_run_sop: bool = False  # paper-strict default: judge only after match_observation
    ablations: Ablations = field(default_factory=Ablations)

    def validate(self) -> None:
        if self.max_steps <= 0:
            raise ValidationError("max_steps must be positive")
        if self.action_set_size <= 0:
            raise ValidationError("action_set_size must be positive")
        if self.max_root_causes <= 0:
            raise ValidationError("max_root_causes must be positive")


@dataclass(frozen=True)
class ActionCandidate:
    tool: str
    args: dict[str, Any]
    rationale: str = ""
    provenance: str = PROVENANCE_AGENT
    rule: str | None = None  # which flow rule mandated it, e.g. "R4"

    def key(self) -> tuple:
        return (self.tool, tuple(sorted((k, str(v)) for k, v in self.args.items())))


@dataclass
class ActionSet:
    candidates: list[ActionCandidate]
    max_size: int
    evicted: list[ActionCandidate] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.candidates) > self.max_size:
            raise ValidationError("action set exceeds its size bound")


@dataclass(frozen=True)
class JudgeVerdict:
    found: bool
    summary: str
    causes: tuple[RootCause, ...] = ()


@dataclass
class StepRecord:
    index: int
    thought: str
    action_set: ActionSet
    chosen: ActionCandidate
    chosen_index: int           # 1-based position in the action set
    fallback: bool
    result: Any                 # ToolResult
    observation: str
    hypotheses_after: tuple = ()          # ObAgent output as of end of step
    verdict_after: JudgeVerdict | None = None
    notes: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class DiagnosisResult:
    locations: tuple[str, ...]
    types: tuple[str, ...]
    explanation: str
    path: tuple[str, ...]

    @property
    def path_length(self) -> int:
        return len(self.path)

    def __post_init__(self):
        if not (0 < len(self.locations) <= DEFAULT_MAX_ROOT_CAUSES):
            raise ValidationError("diagnosis must name 1..3 locations")
        if len(self.types) > DEFAULT_MAX_ROOT_CAUSES:
            raise ValidationError("diagnosis must name at most 3 types")


@dataclass
class EpisodeState:
    scenario_id: str
    alert: str
    config: AgentConfig
    history: list[StepRecord] = field(default_factory=list)
    sop_context: Any = None     # the episode's SopFlowState (procedure, program, findings)
    ob_hypotheses: tuple = ()   # latest (label, note) pairs
    judge_verdict: JudgeVerdict | None = None
    step_count: int = 0
    terminated: bool = False
    outcome: str | None = None
    diagnosis: DiagnosisResult | None = None
    events: list[dict] = field(default_factory=list)  # transcript records in order
    abort_reason: str = ""

    @property
    def last_step(self) -> StepRecord | None:
        return self.history[-1] if self.history else None

    @property
    def path(self) -> tuple[str, ...]:
        return tuple(record.chosen.tool for record in self.history)

    def log(self, kind: str, **fields) -> None:
        record = {"kind": kind, "step": self.step_count}
        record.update(fields)
        self.events.append(record)


@dataclass
class EpisodeResult:
    outcome: str
    state: EpisodeState

    @property
    def diagnosis(self) -> DiagnosisResult | None:
        return self.state.diagnosis
