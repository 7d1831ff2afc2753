"""Benchmark harness: accuracy metrics, episode rows, and corpus runs.

Location accuracy and type accuracy penalize wrong predictions by a factor
sigma: LA = (correct - sigma * incorrect) / total, with the counts summed over
the whole corpus before dividing (a per-episode-mean variant exists behind the
``aggregate`` flag). Average path length covers only episodes that completed a
diagnosis within the step budget; aborted and budget-exhausted runs are
excluded from its denominator.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agents import AgentConfig, EpisodeResult, OUTCOME_COMPLETED, run_episode, write_transcript
from .detector import DetectorConfig
from .errors import ConfigError, UndefinedMetricError, ValidationError
from .golden import script_from_mapping
from .kb import KnowledgeBase
from .llm import BackendConfig, make_backend
from .sandbox import EpisodeScenario, load_scenario

DEFAULT_SIGMA = 0.1
AGGREGATE_CORPUS = "corpus"        # sum counts, divide once (the formula's shape)
AGGREGATE_EPISODE_MEAN = "episode_mean"


@dataclass
class EvalConfig:
    sigma: float = DEFAULT_SIGMA
    aggregate: str = AGGREGATE_CORPUS
    workers: int = 1
    agent: AgentConfig = field(default_factory=AgentConfig)

    def validate(self) -> None:
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")
        if self.aggregate not in (AGGREGATE_CORPUS, AGGREGATE_EPISODE_MEAN):
            raise ValidationError(f"unknown aggregate mode {self.aggregate!r}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        self.agent.validate()


@dataclass
class EpisodeRow:
    scenario_id: str
    outcome: str
    predicted_locations: tuple[str, ...]
    predicted_types: tuple[str, ...]
    gt_locations: tuple[str, ...]
    gt_types: tuple[str, ...]
    loc_correct: int
    loc_incorrect: int
    type_correct: int
    type_incorrect: int
    path_length: int
    path: tuple[str, ...]

    @property
    def completed(self) -> bool:
        return self.outcome == OUTCOME_COMPLETED


def match_predictions(predicted: tuple[str, ...], truth: tuple[str, ...],
                      aliases: dict[str, str] | None = None) -> tuple[int, int]:
    """(correct, incorrect) under exact-id matching.

    Each ground-truth item can satisfy at most one prediction; predictions
    left unmatched count as incorrect. The optional alias table canonicalizes
    ids on both sides (e.g. a scenario declaring pod/service equivalence).
    """
    aliases = aliases or {}
    canon = lambda x: aliases.get(x, x)
    remaining = [canon(t) for t in truth]
    correct = incorrect = 0
    for pred in predicted:
        pred = canon(pred)
        if pred in remaining:
            remaining.remove(pred)
            correct += 1
        else:
            incorrect += 1
    return correct, incorrect


def build_row(scenario: EpisodeScenario, result: EpisodeResult) -> EpisodeRow:
    diagnosis = result.diagnosis
    predicted_locations = diagnosis.locations if diagnosis else ()
    predicted_types = diagnosis.types if diagnosis else ()
    loc_c, loc_i = match_predictions(predicted_locations, scenario.ground_truth.locations,
                                     scenario.aliases)
    type_c, type_i = match_predictions(predicted_types, scenario.ground_truth.types,
                                       scenario.aliases)
    return EpisodeRow(
        scenario_id=scenario.id,
        outcome=result.outcome,
        predicted_locations=tuple(predicted_locations),
        predicted_types=tuple(predicted_types),
        gt_locations=scenario.ground_truth.locations,
        gt_types=scenario.ground_truth.types,
        loc_correct=loc_c, loc_incorrect=loc_i,
        type_correct=type_c, type_incorrect=type_i,
        path_length=len(result.state.path),
        path=result.state.path,
    )


def _accuracy(rows, sigma: float, correct_attr: str, incorrect_attr: str,
              truth_attr: str, aggregate: str) -> float:
    rows = list(rows)
    if aggregate == AGGREGATE_EPISODE_MEAN:
        scores = []
        for row in rows:
            total = len(getattr(row, truth_attr))
            if total == 0:
                continue
            scores.append(
                (getattr(row, correct_attr) - sigma * getattr(row, incorrect_attr)) / total
            )
        if not scores:
            raise UndefinedMetricError("no rows with ground truth")
        return sum(scores) / len(scores)
    correct = sum(getattr(r, correct_attr) for r in rows)
    incorrect = sum(getattr(r, incorrect_attr) for r in rows)
    total = sum(len(getattr(r, truth_attr)) for r in rows)
    if total == 0:
        raise UndefinedMetricError("total ground-truth count is zero")
    return (correct - sigma * incorrect) / total


def location_accuracy(rows, sigma: float = DEFAULT_SIGMA,
                      aggregate: str = AGGREGATE_CORPUS) -> float:
    return _accuracy(rows, sigma, "loc_correct", "loc_incorrect", "gt_locations", aggregate)


def type_accuracy(rows, sigma: float = DEFAULT_SIGMA,
                  aggregate: str = AGGREGATE_CORPUS) -> float:
    return _accuracy(rows, sigma, "type_correct", "type_incorrect", "gt_types", aggregate)


def average_path_length(rows) -> float | None:
    """Mean path length over completed diagnoses; None when there are none."""
    lengths = [r.path_length for r in rows if r.completed]
    if not lengths:
        return None
    return sum(lengths) / len(lengths)


@dataclass
class BenchmarkReport:
    rows: list[EpisodeRow]
    la: float | None
    ta: float | None
    average: float | None
    apl: float | None
    sigma: float
    aggregate: str
    config: dict
    aborted: int = 0

    @classmethod
    def from_rows(cls, rows: list[EpisodeRow], eval_cfg: EvalConfig) -> "BenchmarkReport":
        la = ta = average = None
        if rows:
            try:
                la = location_accuracy(rows, eval_cfg.sigma, eval_cfg.aggregate)
                ta = type_accuracy(rows, eval_cfg.sigma, eval_cfg.aggregate)
                average = (la + ta) / 2.0
            except UndefinedMetricError:
                pass
        return cls(
            rows=rows, la=la, ta=ta, average=average,
            apl=average_path_length(rows),
            sigma=eval_cfg.sigma, aggregate=eval_cfg.aggregate,
            config={
                "sigma": eval_cfg.sigma,
                "aggregate": eval_cfg.aggregate,
                "workers": eval_cfg.workers,
                "max_steps": eval_cfg.agent.max_steps,
                "action_set_size": eval_cfg.agent.action_set_size,
                "max_root_causes": eval_cfg.agent.max_root_causes,
                "judge_after_run_sop": eval_cfg.agent.judge_after_run_sop,
                "ablations": eval_cfg.agent.ablations.as_dict(),
            },
            aborted=sum(1 for r in rows if r.outcome == "aborted"),
        )


# -- corpus manifest -----------------------------------------------------------


@dataclass
class CorpusEntry:
    scenario_path: Path
    script_path: Path | None


@dataclass
class Corpus:
    root: Path
    kb_path: Path | None
    entries: list[CorpusEntry]


def load_corpus(manifest_path: Path | str) -> Corpus:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise ConfigError(f"corpus manifest not found: {manifest_path}")
    data = yaml.safe_load(manifest_path.read_text(encoding="utf-8")) or {}
    root = manifest_path.parent
    entries = []
    for item in data.get("episodes", []):
        scenario_rel = item.get("scenario")
        if not scenario_rel:
            raise ConfigError("corpus entry missing 'scenario'")
        script_rel = item.get("script")
        entries.append(CorpusEntry(
            scenario_path=root / scenario_rel,
            script_path=root / script_rel if script_rel else None,
        ))
    kb_rel = data.get("kb")
    return Corpus(root=root, kb_path=root / kb_rel if kb_rel else None, entries=entries)


def run_benchmark(corpus: Corpus, eval_cfg: EvalConfig, backend_cfg: BackendConfig,
                  detector: DetectorConfig | None = None,
                  transcript_dir: Path | str | None = None) -> BenchmarkReport:
    """Run every scenario in the corpus once and aggregate the rows.

    Each episode gets a fresh in-memory clone of the knowledge base so
    generated procedures never leak across episodes or runs, and (for scripted
    backends) its own backend instance. Per-episode aborts become rows, never
    run failures.
    """
    eval_cfg.validate()
    base_backend = make_backend(backend_cfg)
    kb_master = KnowledgeBase(base_backend, root=corpus.kb_path) if corpus.kb_path \
        else KnowledgeBase(base_backend)

    def _run(entry: CorpusEntry) -> tuple[EpisodeScenario, EpisodeResult]:
        scenario = load_scenario(entry.scenario_path)
        cfg = backend_cfg
        if entry.script_path is not None:
            script = script_from_mapping(
                yaml.safe_load(entry.script_path.read_text(encoding="utf-8"))
            )
            cfg = BackendConfig(
                backend_kind="scripted", embed_dim=backend_cfg.embed_dim,
                embed_seed=backend_cfg.embed_seed, script=script,
                embed_overrides=dict(backend_cfg.embed_overrides),
            )
        backend = make_backend(cfg)
        result = run_episode(scenario, eval_cfg.agent, backend,
                             kb_master.clone_in_memory(), detector)
        return scenario, result

    if eval_cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=eval_cfg.workers) as pool:
            outcomes = list(pool.map(_run, corpus.entries))
    else:
        outcomes = [_run(entry) for entry in corpus.entries]

    rows = []
    for scenario, result in outcomes:
        rows.append(build_row(scenario, result))
        if transcript_dir is not None:
            out = Path(transcript_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_transcript(result.state, out / f"{scenario.id}.jsonl")
    return BenchmarkReport.from_rows(rows, eval_cfg)


# -- report files ----------------------------------------------------------------


def save_report(report: BenchmarkReport, path: Path | str) -> None:
    data = {
        "la": report.la,
        "ta": report.ta,
        "average": report.average,
        "apl": report.apl,
        "sigma": report.sigma,
        "aggregate": report.aggregate,
        "aborted": report.aborted,
        "config": report.config,
        "rows": [
            {
                "scenario_id": r.scenario_id,
                "outcome": r.outcome,
                "predicted_locations": list(r.predicted_locations),
                "predicted_types": list(r.predicted_types),
                "gt_locations": list(r.gt_locations),
                "gt_types": list(r.gt_types),
                "loc_correct": r.loc_correct,
                "loc_incorrect": r.loc_incorrect,
                "type_correct": r.type_correct,
                "type_incorrect": r.type_incorrect,
                "path_length": r.path_length,
                "path": list(r.path),
            }
            for r in report.rows
        ],
    }
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_report(path: Path | str) -> BenchmarkReport:
    """Load a serialized report, recomputing the aggregates as a consistency check."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    rows = [
        EpisodeRow(
            scenario_id=r["scenario_id"],
            outcome=r["outcome"],
            predicted_locations=tuple(r["predicted_locations"]),
            predicted_types=tuple(r["predicted_types"]),
            gt_locations=tuple(r["gt_locations"]),
            gt_types=tuple(r["gt_types"]),
            loc_correct=r["loc_correct"],
            loc_incorrect=r["loc_incorrect"],
            type_correct=r["type_correct"],
            type_incorrect=r["type_incorrect"],
            path_length=r["path_length"],
            path=tuple(r["path"]),
        )
        for r in data["rows"]
    ]
    report = BenchmarkReport(
        rows=rows, la=data["la"], ta=data["ta"], average=data["average"],
        apl=data["apl"], sigma=data["sigma"], aggregate=data["aggregate"],
        config=data["config"], aborted=data.get("aborted", 0),
    )
    _check_consistency(report)
    return report


def _check_consistency(report: BenchmarkReport) -> None:
    def _same(a, b):
        if a is None or b is None:
            return a is None and b is None
        return abs(a - b) <= 1e-12

    la = ta = None
    if report.rows:
        try:
            la = location_accuracy(report.rows, report.sigma, report.aggregate)
            ta = type_accuracy(report.rows, report.sigma, report.aggregate)
        except UndefinedMetricError:
            pass
    apl = average_path_length(report.rows)
    average = None if la is None or ta is None else (la + ta) / 2.0
    if not (_same(report.la, la) and _same(report.ta, ta)
            and _same(report.apl, apl) and _same(report.average, average)):
        raise ValidationError("report aggregates do not match its rows")


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def report_table(report: BenchmarkReport) -> str:
    """Human-readable summary table."""
    lines = [
        f"episodes: {len(report.rows)}  aborted: {report.aborted}",
        f"LA={_fmt(report.la)} TA={_fmt(report.ta)} "
        f"Average={_fmt(report.average)} APL={_fmt(report.apl)}",
        "",
        f"{'SCENARIO':<32} {'OUTCOME':<17} {'PRED_LOC':<24} {'PRED_TYPE':<18} PATH",
    ]
    for row in report.rows:
        lines.append(
            f"{row.scenario_id:<32} {row.outcome:<17} "
            f"{','.join(row.predicted_locations) or '-':<24} "
            f"{','.join(row.predicted_types) or '-':<18} {row.path_length}"
        )
    return "\n".join(lines)
