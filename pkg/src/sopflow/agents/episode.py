"""The main episode loop: thought, action set, action, observation.

Each step makes up to three backend calls (orchestrator thought, candidate
proposal, orchestrator selection), executes exactly one tool from the bounded
action set, and runs the post-observation hooks (ObAgent then JudgeAgent after
match_observation). A backend failure is retried once; failing again aborts
the episode. Executing speak terminates it with a diagnosis; running out of
the step budget terminates it without one.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..detector import DetectorConfig
from ..errors import BackendError, EpisodeAborted, ScriptExhaustedError
from ..llm import ChatMessage
from ..prompts import (
    DIRECT_SYSTEM,
    FLOW_GUIDE,
    SELECT_SYSTEM,
    THOUGHT_SYSTEM,
    numbered_candidates,
)
from ..sandbox import EpisodeScenario, render_alert, render_telemetry
from ..tools import SpeakReport, ToolContext, ToolResult, build_registry
from . import roles
from .flow_rules import apply_flow_rules, fallback_candidate
from .types import (
    ActionCandidate,
    ActionSet,
    AgentConfig,
    EpisodeResult,
    EpisodeState,
    OUTCOME_ABORTED,
    OUTCOME_BUDGET,
    OUTCOME_COMPLETED,
    DiagnosisResult,
    PROVENANCE_MAIN,
    StepRecord,
)

_HISTORY_TAIL = 6
_OBSERVATION_SNIPPET = 400


class _RecordingBackend:
    """Wraps a backend: logs every completion to the transcript and applies
    the retry-once-then-abort policy."""

    def __init__(self, inner, state: EpisodeState):
        self._inner = inner
        self._state = state

    @property
    def embed_dim(self) -> int:
        return self._inner.embed_dim

    @property
    def backend_id(self) -> str:
        return self._inner.backend_id

    def complete(self, messages: list[ChatMessage]) -> str:
        prompt = "\n".join(m.content for m in messages)
        try:
            reply = self._inner.complete(messages)
        except (BackendError, ScriptExhaustedError) as first:
            self._state.log("llm_retry", error=str(first))
            try:
                reply = self._inner.complete(messages)
            except (BackendError, ScriptExhaustedError) as second:
                raise EpisodeAborted(f"backend failed twice: {second}") from second
        self._state.log("llm", prompt=prompt, reply=reply)
        return reply

    def embed(self, text: str):
        try:
            return self._inner.embed(text)
        except BackendError as first:
            try:
                return self._inner.embed(text)
            except BackendError as second:
                raise EpisodeAborted(f"embedding backend failed twice: {second}") from second


def _history_text(state: EpisodeState) -> str:
    if not state.history:
        return "(no steps yet)"
    lines = []
    for record in state.history[-_HISTORY_TAIL:]:
        args = ", ".join(f"{k}={str(v)[:60]!r}" for k, v in record.chosen.args.items())
        snippet = record.observation[:_OBSERVATION_SNIPPET]
        lines.append(f"step {record.index + 1}: {record.chosen.tool}({args}) -> {snippet}")
    return "\n".join(lines)


def _advisor_notes(state: EpisodeState) -> str:
    lines = []
    if state.ob_hypotheses:
        hypo = "; ".join(f"{label} ({note})" if note else label
                         for label, note in state.ob_hypotheses)
        lines.append(f"fault-type hypotheses: {hypo}")
    if state.judge_verdict is not None:
        lines.append(f"judge: {state.judge_verdict.summary}")
    return "\n".join(lines) or "(none)"


class _Runtime:
    def __init__(self, scenario: EpisodeScenario, config: AgentConfig, backend, kb,
                 detector: DetectorConfig | None = None):
        config.validate()
        self.scenario = scenario
        self.config = config
        self.detector = detector or DetectorConfig()
        self.registry = build_registry()
        telemetry = render_telemetry(scenario)
        self.alert = render_alert(telemetry, self.detector)
        self.state = EpisodeState(scenario_id=scenario.id, alert=self.alert, config=config)
        self.backend = _RecordingBackend(backend, self.state)
        if not config.ablations.sop_knowledge:
            kb = kb.without_sops()
        self.ctx = ToolContext(
            telemetry=telemetry, kb=kb, backend=self.backend,
            detector=self.detector, registry=self.registry,
        )
        self.state.sop_context = self.ctx.sop

    @property
    def flow_guide(self) -> str:
        if self.config.ablations.flow_rules_active:
            return FLOW_GUIDE
        return ""

    # -- step phases ---------------------------------------------------------

    def _think(self) -> str:
        system = THOUGHT_SYSTEM
        if self.flow_guide:
            system = system + "\n\n" + self.flow_guide
        user = (f"Incident alert:\n{self.state.alert}\n\n"
                f"Investigation so far:\n{_history_text(self.state)}\n\n"
                f"Advisor notes:\n{_advisor_notes(self.state)}")
        return self.backend.complete([
            ChatMessage("system", system), ChatMessage("user", user),
        ])

    def _build_action_set(self) -> ActionSet:
        state = self.state
        agent_candidates: list[ActionCandidate] = []
        if self.config.ablations.action_agent:
            _, reply = roles.action_agent_propose(
                self.backend, self.registry, state.alert,
                _history_text(state), self.flow_guide, self.config.action_set_size,
            )
            agent_candidates, notes = roles.parse_candidates(
                reply, self.registry, self.config.action_set_size,
            )
            for note in notes:
                state.log("note", text=note)
        action_set = apply_flow_rules(
            state.step_count, state.last_step, state.judge_verdict,
            state.alert, agent_candidates, self.config,
        )
        state.log("action_set", candidates=[
            {"tool": c.tool, "args": _jsonable_args(c.args),
             "provenance": c.provenance, "rule": c.rule, "rationale": c.rationale}
            for c in action_set.candidates
        ], evicted=[c.tool for c in action_set.evicted], notes=action_set.notes)
        return action_set

    def _select(self, thought: str, action_set: ActionSet) -> tuple[ActionCandidate, int, bool]:
        listing = numbered_candidates(action_set.candidates)
        user = (f"Current thought:\n{thought}\n\nCandidate actions:\n{listing}\n\n"
                f"Reply with the number of the action to execute.")
        reply = self.backend.complete([
            ChatMessage("system", SELECT_SYSTEM), ChatMessage("user", user),
        ])
        index = roles.parse_selection(reply, len(action_set.candidates))
        if index is None:
            chosen = fallback_candidate(action_set)
            position = action_set.candidates.index(chosen) + 1
            self.state.log("note", text="fallback: selection unusable, using "
                                        f"{chosen.tool} (candidate {position})")
            return chosen, position, True
        return action_set.candidates[index - 1], index, False

    def _direct_action(self, thought: str) -> ActionCandidate | None:
        """action_set ablation: the orchestrator names one action itself."""
        user = (f"Current thought:\n{thought}\n\n"
                f"Tool catalog:\n{self.registry.catalog_text()}\n\n"
                f"Investigation so far:\n{_history_text(self.state)}")
        reply = self.backend.complete([
            ChatMessage("system", DIRECT_SYSTEM), ChatMessage("user", user),
        ])
        for line in reply.splitlines():
            parsed = roles.parse_action_line(line)
            if parsed is None:
                continue
            tool, args, rationale = parsed
            if self.registry.check_args(tool, args):
                continue
            if (tool == "speak" and self.config.ablations.judge_agent
                    and not (self.state.judge_verdict and self.state.judge_verdict.found)):
                self.state.log("note", text="dropped direct speak: judge has not confirmed")
                return None
            return ActionCandidate(tool=tool, args=args, rationale=rationale,
                                   provenance=PROVENANCE_MAIN)
        return None

    # -- post-observation hooks ------------------------------------------------

    def _run_ob_agent(self, observation_text: str, result: ToolResult) -> None:
        incident_lines = []
        for hit in result.payload or []:
            incident = self.ctx.kb.get_incident(hit.item_id)
            incident_lines.append(
                f"- [{incident.fault_type}] {incident.manifestation} (score {hit.score:.4f})"
            )
        _, reply = roles.ob_agent_classify(
            self.backend, observation_text, "\n".join(incident_lines),
        )
        hypotheses = roles.parse_hypotheses(reply)
        self.state.ob_hypotheses = hypotheses
        self.state.log("hypotheses", items=[list(h) for h in hypotheses])

    def _run_judge(self, trigger: str) -> None:
        _, reply = roles.judge_agent(
            self.backend, self.state.alert, _history_text(self.state),
            self.state.ob_hypotheses,
        )
        verdict = roles.parse_judge_reply(reply)
        self.state.judge_verdict = verdict
        self.state.log("verdict", trigger=trigger, found=verdict.found,
                       summary=verdict.summary,
                       causes=[[c.location, c.fault_type, c.explanation]
                               for c in verdict.causes])

    def _post_hooks(self, record: StepRecord) -> None:
        tool = record.chosen.tool
        result = record.result
        if tool == "match_observation":
            matched_text = str(record.chosen.args.get("observation", "")) \
                or self.ctx.sop.last_findings or record.observation
            if self.config.ablations.ob_agent:
                self._run_ob_agent(matched_text, result)
            if self.config.ablations.judge_agent:
                self._run_judge(trigger="match_observation")
        elif (tool == "run_sop" and result.success and self.config.judge_after_run_sop
              and self.config.ablations.judge_agent
              and result.payload is not None and result.payload.findings):
            self._run_judge(trigger="run_sop")
        record.hypotheses_after = self.state.ob_hypotheses
        record.verdict_after = self.state.judge_verdict

    # -- one full step -----------------------------------------------------------

    def step(self) -> None:
        state = self.state
        thought = self._think()

        if self.config.ablations.action_set:
            action_set = self._build_action_set()
            if not action_set.candidates:
                # nothing proposed and no rule fired; the step is spent
                state.log("note", text="empty action set; step consumed")
                state.step_count += 1
                return
            chosen, position, fallback = self._select(thought, action_set)
        else:
            candidate = self._direct_action(thought)
            if candidate is None:
                state.log("note", text="direct action unusable; step consumed")
                state.step_count += 1
                return
            action_set = ActionSet(candidates=[candidate],
                                   max_size=self.config.action_set_size)
            chosen, position, fallback = candidate, 1, False

        state.log("chosen", tool=chosen.tool, args=_jsonable_args(chosen.args),
                  index=position, fallback=fallback)
        result = self.registry.execute(chosen.tool, chosen.args, self.ctx)
        state.log("observation", tool=chosen.tool, success=result.success,
                  text=result.observation)

        record = StepRecord(
            index=state.step_count, thought=thought, action_set=action_set,
            chosen=chosen, chosen_index=position, fallback=fallback,
            result=result, observation=result.observation,
        )
        state.history.append(record)
        self._post_hooks(record)
        state.step_count += 1

        if result.success and isinstance(result.payload, SpeakReport):
            causes = result.payload.causes
            state.diagnosis = DiagnosisResult(
                locations=_dedupe(c.location for c in causes),
                types=_dedupe(c.fault_type for c in causes),
                explanation="; ".join(c.explanation for c in causes if c.explanation),
                path=state.path,
            )
            state.terminated = True
            state.outcome = OUTCOME_COMPLETED


def _dedupe(items) -> tuple:
    seen = []
    for item in items:
        if item not in seen:
            seen.append(item)
    return tuple(seen)


def _jsonable_args(args: dict) -> dict:
    return {k: (v if isinstance(v, (str, int, float, bool)) else str(v))
            for k, v in args.items()}


def run_episode(scenario: EpisodeScenario, config: AgentConfig, backend, kb,
                detector: DetectorConfig | None = None) -> EpisodeResult:
    """Drive one diagnosis episode to termination."""
    rt = _Runtime(scenario, config, backend, kb, detector)
    state = rt.state
    state.log("episode", scenario=scenario.id, alert=rt.alert,
              config={"max_steps": config.max_steps,
                      "action_set_size": config.action_set_size,
                      "max_root_causes": config.max_root_causes,
                      "judge_after_run_sop": config.judge_after_run_sop,
                      "ablations": config.ablations.as_dict()})
    try:
        while not state.terminated and state.step_count < config.max_steps:
            rt.step()
    except EpisodeAborted as exc:
        state.terminated = True
        state.outcome = OUTCOME_ABORTED
        state.abort_reason = str(exc)
    if not state.terminated:
        state.terminated = True
    if state.outcome is None:
        state.outcome = OUTCOME_COMPLETED if state.diagnosis else OUTCOME_BUDGET
    state.log("termination", outcome=state.outcome, steps=state.step_count,
              diagnosis=None if state.diagnosis is None else {
                  "locations": list(state.diagnosis.locations),
                  "types": list(state.diagnosis.types),
                  "explanation": state.diagnosis.explanation,
                  "path": list(state.diagnosis.path),
              },
              abort_reason=state.abort_reason)
    return EpisodeResult(outcome=state.outcome, state=state)


def transcript_lines(state: EpisodeState) -> list[str]:
    """Deterministic JSONL transcript; byte-stable under scripted backends."""
    return [json.dumps(event, sort_keys=True, ensure_ascii=False)
            for event in state.events]


def write_transcript(state: EpisodeState, path: Path | str) -> None:
    Path(path).write_text("\n".join(transcript_lines(state)) + "\n", encoding="utf-8")
