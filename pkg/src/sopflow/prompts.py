"""Prompt templates for every agent role.

Each role's system prompt opens with a stable ``ROLE:`` marker line. Scripted
test backends key their entries on these markers, so changing one is a
breaking change for golden transcripts.
"""

from __future__ import annotations

ROLE_THOUGHT = "ROLE: orchestrator-thought"
ROLE_SELECT = "ROLE: orchestrator-select"
ROLE_DIRECT = "ROLE: orchestrator-direct"
ROLE_ACTION = "ROLE: action-proposer"
ROLE_OBSERVER = "ROLE: observation-classifier"
ROLE_JUDGE = "ROLE: termination-judge"
ROLE_CODER = "ROLE: procedure-coder"
ROLE_AUTHOR = "ROLE: procedure-author"

FLOW_GUIDE = """DIAGNOSTIC FLOW GUIDE
Preferred investigation flow (guidance, not a cage; deviate when evidence demands it):
1. match_sop: look up a stored procedure matching the alert or suspected fault.
2. If a procedure matched, generate_sop_code turns it into an executable check program.
   If nothing matched, generate_sop drafts a new procedure first.
3. run_sop executes the whole program in one shot. If the program fails to validate
   or crashes mid-run, regenerate it with generate_sop_code.
4. match_observation: compare the run findings against past incidents.
5. Once the judge confirms the root cause, speak reports it (three causes at most)."""

THOUGHT_SYSTEM = f"""{ROLE_THOUGHT}
You orchestrate the diagnosis of a microservice incident. Read the alert, the
history so far, and any advisor notes, then state in one or two sentences what
should happen next and why."""

SELECT_SYSTEM = f"""{ROLE_SELECT}
You must pick exactly one action from the numbered candidate list. Reply with
the number of your choice and nothing else."""

DIRECT_SYSTEM = f"""{ROLE_DIRECT}
Decide the single next action yourself. Reply with one line of the form:
ACTION: tool_name(param="value", ...) | short rationale"""

ACTION_SYSTEM = f"""{ROLE_ACTION}
Propose up to {{max_candidates}} candidate next actions for the orchestrator,
one per line, each of the form:
ACTION: tool_name(param="value", ...) | short rationale
Only use registered tools with their declared parameters."""

OBSERVER_SYSTEM = f"""{ROLE_OBSERVER}
Given an observation and any similar past incidents, name up to three likely
fault types, one per line, as:
type: <FaultTypeOrDescription> - <why>"""

JUDGE_SYSTEM = f"""{ROLE_JUDGE}
Decide whether the root cause of the incident has been identified. Reply with
either:
NOT FOUND: <what is still missing>
or
FOUND: location=<component-id> type=<fault-type>; <one-line justification>
List multiple causes separated by ';' using the same location=/type= form."""

CODER_SYSTEM = f"""{ROLE_CODER}
Translate the given diagnostic procedure into a check program using the
restricted statement grammar below. Emit the program inside a fenced block.

{{grammar}}

Available tools:
{{catalog}}"""

AUTHOR_SYSTEM = f"""{ROLE_AUTHOR}
Write a diagnostic procedure for the reported fault. Follow the exact format:
SOP NAME: <short title>
STEPS:
1. <first check and what its outcome decides>
2. <next check>
Keep it under eight steps. Example procedures from the knowledge base follow."""


def numbered_candidates(candidates) -> str:
    lines = []
    for i, cand in enumerate(candidates, start=1):
        args = ", ".join(f"{k}={v!r}" for k, v in cand.args.items())
        lines.append(f"{i}. {cand.tool}({args}) [{cand.provenance}] - {cand.rationale}")
    return "\n".join(lines)
