"""Multi-agent episode engine."""

from .episode import run_episode, transcript_lines, write_transcript
from .flow_rules import RULE_PRIORITY, apply_flow_rules, fallback_candidate, mandated_candidates
from .roles import (
    code_agent_generate,
    judge_agent,
    ob_agent_classify,
    parse_action_line,
    parse_candidates,
    parse_hypotheses,
    parse_judge_reply,
    parse_selection,
)
from .types import (
    Ablations,
    ActionCandidate,
    ActionSet,
    AgentConfig,
    DiagnosisResult,
    EpisodeResult,
    EpisodeState,
    JudgeVerdict,
    OUTCOME_ABORTED,
    OUTCOME_BUDGET,
    OUTCOME_COMPLETED,
    PROVENANCE_AGENT,
    PROVENANCE_FLOW,
    PROVENANCE_JUDGE,
    PROVENANCE_MAIN,
    StepRecord,
)

__all__ = [
    "Ablations",
    "ActionCandidate",
    "ActionSet",
    "AgentConfig",
    "DiagnosisResult",
    "EpisodeResult",
    "EpisodeState",
    "JudgeVerdict",
    "OUTCOME_ABORTED",
    "OUTCOME_BUDGET",
    "OUTCOME_COMPLETED",
    "PROVENANCE_AGENT",
    "PROVENANCE_FLOW",
    "PROVENANCE_JUDGE",
    "PROVENANCE_MAIN",
    "RULE_PRIORITY",
    "StepRecord",
    "apply_flow_rules",
    "code_agent_generate",
    "fallback_candidate",
    "judge_agent",
    "mandated_candidates",
    "ob_agent_classify",
    "parse_action_line",
    "parse_candidates",
    "parse_hypotheses",
    "parse_judge_reply",
    "parse_selection",
    "run_episode",
    "transcript_lines",
    "write_transcript",
]
