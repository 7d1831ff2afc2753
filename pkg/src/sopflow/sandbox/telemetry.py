"""Telemetry rendering: metrics, logs, and traces for a scenario.

Fault signature table (what each injected fault does to the telemetry):

=================  ==========================================================
CpuStress          target pod ``cpu_usage`` jumps to the fault magnitude;
                   "cpu throttling" log lines on the pod.
MemoryStress       target pod ``memory_usage`` jumps to the magnitude; "OOM"
                   log lines when magnitude >= 0.95, otherwise a plain
                   memory-pressure warning.
PodFailure         pod phase becomes ``failed`` and its metrics drop to zero;
                   spans calling its service error "Service unavailable" and
                   the subtree below is never called; "connection refused"
                   log lines on the pod; its service error_rate pegs at 1.0.
NetworkDelay       affected edges gain ``magnitude`` ms of span duration and
                   the callee service ``request_latency_ms`` rises by the
                   same amount; "request timeout" log lines on the pod.
NetworkLoss        a ``magnitude`` fraction of calls on affected edges error
                   with "timeout"; callee error_rate = magnitude; packet-loss
                   log lines on the pod.
NetworkPartition   every call on affected edges errors "connection refused"
                   and the subtree below is pruned; callee error_rate = 1.0;
                   "network unreachable" log lines.
NetworkDuplicate   like loss but the error message is "duplicate ack".
NetworkCorrupt     like loss but the error message is "checksum mismatch".
NetworkBandwidth   both endpoint nodes' ``node_network_throughput_bytes``
                   scale by the magnitude; edges crossing the node pair slow
                   their spans and callee latency by 1/magnitude and callee
                   ``throughput_rps`` scales by the magnitude. No log lines.
=================  ==========================================================

Nominal samples are clamped Gaussians around the per-metric baselines below,
so at the default detector thresholds a fault-free scenario never flags.
Rendering is a pure function of the scenario (seed included).
"""

from __future__ import annotations

import hashlib
import json
import statistics
from dataclasses import dataclass

from ..errors import NotFoundError
from . import noise
from .faults import FaultSpec, FaultType
from .scenario import EpisodeScenario
from .topology import CallEdge, Topology

SAMPLE_PERIOD_S = 15
LOG_PERIOD_S = 30
PROC_MS = 5.0          # per-hop processing time added to every span
ROOT_BASE_MS = 10.0    # ingress latency of the entry span
SPAN_JITTER_FRAC = 0.1

# metric name -> (baseline, sigma) for pod- and node-level series
POD_METRIC_BASELINES = {
    "cpu_usage": (0.25, 0.02),
    "memory_usage": (0.40, 0.02),
    "network_receive_bytes": (120_000.0, 4_000.0),
    "network_transmit_bytes": (80_000.0, 3_000.0),
}
NODE_METRIC_BASELINES = {
    "node_cpu_usage": (0.30, 0.015),
    "node_network_throughput_bytes": (240_000.0, 8_000.0),
}
SERVICE_METRICS = ("error_rate", "request_latency_ms", "throughput_rps")

ERROR_RATE_BASELINE = (0.002, 0.0005)
LATENCY_SIGMA_FRAC = 0.03
THROUGHPUT_SIGMA_FRAC = 0.03

METRIC_CATALOG = tuple(sorted(
    list(POD_METRIC_BASELINES) + list(NODE_METRIC_BASELINES) + list(SERVICE_METRICS)
))

_EDGE_ERROR_MESSAGES = {
    FaultType.NetworkLoss: "timeout",
    FaultType.NetworkDuplicate: "duplicate ack",
    FaultType.NetworkCorrupt: "checksum mismatch",
}

_FAULT_LOG_LINES = {
    FaultType.CpuStress: "WARN cpu throttling detected: usage {mag:.2f}",
    FaultType.PodFailure: "ERROR connection refused: container not listening",
    FaultType.NetworkDelay: "ERROR upstream request timeout: round-trip latency elevated",
    FaultType.NetworkLoss: "ERROR request timeout: packet loss suspected on retries",
    FaultType.NetworkPartition: "ERROR connection refused: network unreachable",
    FaultType.NetworkDuplicate: "ERROR duplicate ack storm detected on socket",
    FaultType.NetworkCorrupt: "ERROR checksum mismatch on inbound segment",
}


@dataclass(frozen=True)
class MetricSeries:
    component: str
    metric: str
    samples: tuple[tuple[int, float], ...]

    def values(self) -> list[float]:
        return [v for _, v in self.samples]


@dataclass(frozen=True)
class LogLine:
    pod: str
    t_s: int
    text: str


@dataclass(frozen=True)
class Span:
    trace_id: str
    span_id: str
    parent_span_id: str | None
    service: str
    duration_ms: float
    status: str  # "ok" | "error"
    error_message: str = ""


@dataclass(frozen=True)
class Trace:
    trace_id: str
    t_s: int
    spans: tuple[Span, ...]


@dataclass(frozen=True)
class _EdgeEffect:
    extra_ms: float = 0.0
    slow_factor: float = 1.0
    error_modes: tuple[tuple[str, float], ...] = ()
    unreachable_msg: str | None = None


class Telemetry:
    """Immutable rendered telemetry for one scenario, with the query surface
    the observability tools are built on."""

    def __init__(self, scenario: EpisodeScenario, metrics: dict, logs: list[LogLine],
                 traces: list[Trace]):
        self.scenario = scenario
        self.topology = scenario.topology()
        self._metrics = metrics  # (component, metric) -> MetricSeries
        self._logs = logs
        self._traces = traces
        self._component_kinds = {}
        for pod in self.topology.pods:
            self._component_kinds[pod.id] = "pod"
        for service in self.topology.services:
            self._component_kinds[service] = "service"
        for node in self.topology.nodes:
            self._component_kinds[node.id] = "node"

    # -- queries -------------------------------------------------------------

    def components(self) -> dict[str, str]:
        return dict(self._component_kinds)

    def metrics_for(self, component: str) -> list[str]:
        kind = self._component_kinds.get(component)
        if kind is None:
            raise NotFoundError(f"unknown component {component!r}")
        if kind == "pod":
            return sorted(POD_METRIC_BASELINES)
        if kind == "node":
            return sorted(NODE_METRIC_BASELINES)
        return sorted(SERVICE_METRICS)

    def query_metrics(self, component: str, metric: str,
                      window: tuple[int, int] | None = None) -> MetricSeries:
        if component not in self._component_kinds:
            raise NotFoundError(f"unknown component {component!r}")
        if metric not in METRIC_CATALOG:
            raise NotFoundError(f"unknown metric {metric!r}")
        series = self._metrics.get((component, metric))
        if series is None:
            raise NotFoundError(
                f"unknown metric {metric!r} for {self._component_kinds[component]} {component!r}"
            )
        if window is None:
            return series
        lo, hi = window
        return MetricSeries(
            component=component, metric=metric,
            samples=tuple((t, v) for t, v in series.samples if lo <= t < hi),
        )

    def baseline_values(self, component: str, metric: str, before_s: int,
                        max_samples: int) -> list[float]:
        series = self.query_metrics(component, metric)
        values = [v for t, v in series.samples if t < before_s]
        return values[-max_samples:]

    def query_logs(self, pod: str, window: tuple[int, int] | None = None) -> list[LogLine]:
        if self._component_kinds.get(pod) != "pod":
            raise NotFoundError(f"unknown pod {pod!r}")
        lines = [line for line in self._logs if line.pod == pod]
        if window is None:
            return lines
        lo, hi = window
        return [line for line in lines if lo <= line.t_s < hi]

    def all_logs(self) -> list[LogLine]:
        return list(self._logs)

    def query_traces(self, window: tuple[int, int] | None = None) -> list[Trace]:
        if window is None:
            return list(self._traces)
        lo, hi = window
        return [tr for tr in self._traces if lo <= tr.t_s < hi]

    def pod_phase(self, pod_id: str, at_s: int | None = None) -> str:
        if self._component_kinds.get(pod_id) != "pod":
            raise NotFoundError(f"unknown pod {pod_id!r}")
        at_s = self.scenario.incident_time_s if at_s is None else at_s
        for fault in self.scenario.faults:
            if (fault.fault_type == FaultType.PodFailure
                    and fault.location_id == pod_id and fault.active_at(at_s)):
                return "failed"
        return self.topology.pod(pod_id).phase

    def pod_phases(self, at_s: int | None = None) -> list[tuple[str, str]]:
        return [(pod.id, self.pod_phase(pod.id, at_s))
                for pod in sorted(self.topology.pods, key=lambda p: p.id)]

    # -- serialization ---------------------------------------------------------

    def export_lines(self) -> dict[str, list[str]]:
        """Line-delimited records per modality; byte-stable across runs."""
        metric_lines = [
            json.dumps({"component": s.component, "metric": s.metric,
                        "samples": [[t, v] for t, v in s.samples]}, sort_keys=True)
            for s in sorted(self._metrics.values(), key=lambda s: (s.component, s.metric))
        ]
        log_lines = [
            json.dumps({"t_s": line.t_s, "pod": line.pod, "text": line.text}, sort_keys=True)
            for line in self._logs
        ]
        trace_lines = [
            json.dumps({
                "trace_id": tr.trace_id, "t_s": tr.t_s,
                "spans": [{
                    "span_id": sp.span_id, "parent_span_id": sp.parent_span_id,
                    "service": sp.service, "duration_ms": sp.duration_ms,
                    "status": sp.status, "error_message": sp.error_message,
                } for sp in tr.spans],
            }, sort_keys=True)
            for tr in self._traces
        ]
        return {"metrics": metric_lines, "logs": log_lines, "traces": trace_lines}

    def export(self, directory) -> None:
        from pathlib import Path
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for modality, lines in self.export_lines().items():
            (out / f"{modality}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for modality in ("metrics", "logs", "traces"):
            for line in self.export_lines()[modality]:
                digest.update(line.encode("utf-8"))
                digest.update(b"\n")
        return digest.hexdigest()


# -- rendering ------------------------------------------------------------------


def _sample_times(window: tuple[int, int]) -> list[int]:
    return list(range(window[0], window[1], SAMPLE_PERIOD_S))


def _service_latency_baseline(topo: Topology, service: str) -> float:
    if service == topo.frontend:
        return 120.0
    inbound = [e.base_latency_ms for e in topo.call_edges if e.dst == service]
    return statistics.fmean(inbound) if inbound else 50.0


def _service_throughput_baseline(topo: Topology, service: str) -> float:
    if service == topo.frontend:
        return 100.0
    if service in topo.statefulset_services:
        return 80.0
    return 40.0


class _Renderer:
    def __init__(self, scenario: EpisodeScenario):
        self.scenario = scenario
        self.topo = scenario.topology()
        self.seed = scenario.seed
        # resolve each fault's affected edges once
        self._edges_by_fault = [
            (fault, {(e.src, e.dst) for e in fault.affected_edges(self.topo)})
            for fault in scenario.faults
        ]

    # -- fault effect resolution -------------------------------------------

    def _active_faults(self, t: int) -> list[tuple[FaultSpec, set]]:
        return [(f, edges) for f, edges in self._edges_by_fault if f.active_at(t)]

    def pod_down(self, pod_id: str, t: int) -> bool:
        return any(
            f.fault_type == FaultType.PodFailure and f.location_id == pod_id
            for f, _ in self._active_faults(t)
        )

    def edge_effect(self, edge: CallEdge, t: int) -> _EdgeEffect:
        extra = 0.0
        slow = 1.0
        errors: list[tuple[str, float]] = []
        unreachable = None
        for fault, edges in self._active_faults(t):
            if (edge.src, edge.dst) not in edges:
                continue
            ft = fault.fault_type
            if ft == FaultType.NetworkDelay:
                extra += fault.magnitude
            elif ft == FaultType.NetworkBandwidth:
                slow *= 1.0 / fault.magnitude
            elif ft in _EDGE_ERROR_MESSAGES:
                errors.append((_EDGE_ERROR_MESSAGES[ft], fault.magnitude))
            elif ft == FaultType.NetworkPartition:
                unreachable = "connection refused"
            elif ft == FaultType.PodFailure:
                # only calls INTO the dead service fail; its own calls never happen
                service = self.topo.pod(fault.location_id).service
                if edge.dst == service:
                    unreachable = "Service unavailable"
        return _EdgeEffect(extra, slow, tuple(errors), unreachable)

    def _service_fault_values(self, service: str, t: int) -> dict:
        """Per-service metric overrides implied by edge effects at time t."""
        out: dict[str, float] = {}
        latency_extra = 0.0
        latency_factor = 1.0
        throughput_factor = 1.0
        error_rate = None
        for fault, edges in self._active_faults(t):
            ft = fault.fault_type
            if ft in (FaultType.PodFailure, FaultType.NetworkPartition):
                # callers into the dead/cut-off service fail; its own callees
                # simply stop receiving traffic, they do not error
                if fault.target_kind == "pod":
                    failed = self.topo.pod(fault.location_id).service
                else:
                    _, failed = fault.edge_pair()
                if failed == service:
                    error_rate = 1.0
                continue
            inbound = [(s, d) for s, d in edges if d == service]
            if not inbound:
                continue
            if ft == FaultType.NetworkDelay:
                latency_extra += fault.magnitude
            elif ft == FaultType.NetworkBandwidth:
                latency_factor *= 1.0 / fault.magnitude
                throughput_factor *= fault.magnitude
            elif ft in _EDGE_ERROR_MESSAGES:
                error_rate = max(error_rate or 0.0, fault.magnitude)
        if latency_extra:
            out["latency_extra"] = latency_extra
        if latency_factor != 1.0:
            out["latency_factor"] = latency_factor
        if throughput_factor != 1.0:
            out["throughput_factor"] = throughput_factor
        if error_rate is not None:
            out["error_rate"] = error_rate
        return out

    # -- metrics --------------------------------------------------------------

    def render_metrics(self) -> dict:
        series: dict[tuple[str, str], MetricSeries] = {}
        times = _sample_times(self.scenario.window)

        for pod in self.topo.pods:
            for metric, (base, sigma) in POD_METRIC_BASELINES.items():
                samples = []
                for t in times:
                    if self.pod_down(pod.id, t):
                        value = 0.0
                    else:
                        value = noise.gauss(base, sigma, self.seed, "metric", pod.id, metric, t)
                        value = self._pod_stress_override(pod.id, metric, t, value)
                    samples.append((t, round(max(value, 0.0), 6)))
                series[(pod.id, metric)] = MetricSeries(pod.id, metric, tuple(samples))

        for service in self.topo.services:
            lat_base = _service_latency_baseline(self.topo, service)
            thr_base = _service_throughput_baseline(self.topo, service)
            for metric in SERVICE_METRICS:
                samples = []
                for t in times:
                    overrides = self._service_fault_values(service, t)
                    if metric == "request_latency_ms":
                        value = noise.gauss(lat_base, LATENCY_SIGMA_FRAC * lat_base,
                                            self.seed, "metric", service, metric, t)
                        value = value * overrides.get("latency_factor", 1.0)
                        value += overrides.get("latency_extra", 0.0)
                    elif metric == "throughput_rps":
                        value = noise.gauss(thr_base, THROUGHPUT_SIGMA_FRAC * thr_base,
                                            self.seed, "metric", service, metric, t)
                        value *= overrides.get("throughput_factor", 1.0)
                        if any(self.pod_down(p.id, t) for p in self.topo.pods_of(service)):
                            value = 0.0
                    else:  # error_rate
                        if "error_rate" in overrides:
                            value = overrides["error_rate"]
                        else:
                            value = noise.gauss(*ERROR_RATE_BASELINE,
                                                self.seed, "metric", service, metric, t)
                    samples.append((t, round(max(value, 0.0), 6)))
                series[(service, metric)] = MetricSeries(service, metric, tuple(samples))

        for node in self.topo.nodes:
            for metric, (base, sigma) in NODE_METRIC_BASELINES.items():
                samples = []
                for t in times:
                    value = noise.gauss(base, sigma, self.seed, "metric", node.id, metric, t)
                    if metric == "node_network_throughput_bytes":
                        for fault, _ in self._active_faults(t):
                            if (fault.fault_type == FaultType.NetworkBandwidth
                                    and node.id in fault.node_pair()):
                                value *= fault.magnitude
                    samples.append((t, round(max(value, 0.0), 6)))
                series[(node.id, metric)] = MetricSeries(node.id, metric, tuple(samples))

        return series

    def _pod_stress_override(self, pod_id: str, metric: str, t: int, value: float) -> float:
        for fault, _ in self._active_faults(t):
            if fault.location_id != pod_id:
                continue
            if fault.fault_type == FaultType.CpuStress and metric == "cpu_usage":
                return min(1.0, noise.gauss(fault.magnitude, 0.01,
                                            self.seed, "stress", pod_id, metric, t))
            if fault.fault_type == FaultType.MemoryStress and metric == "memory_usage":
                return min(1.0, noise.gauss(fault.magnitude, 0.01,
                                            self.seed, "stress", pod_id, metric, t))
        return value

    # -- logs -------------------------------------------------------------------

    def _fault_log_pod(self, fault: FaultSpec) -> str | None:
        kind = fault.target_kind
        if kind == "pod":
            return fault.location_id
        if kind == "edge":
            _, dst = fault.edge_pair()
            return self.topo.pods_of(dst)[0].id
        return None  # node-pair faults manifest in metrics only

    def render_logs(self) -> list[LogLine]:
        lines: list[LogLine] = []
        start, end = self.scenario.window
        for t in range(start, end, LOG_PERIOD_S):
            for pod in self.topo.pods:
                handled = 40 + int(noise.unit(self.seed, "log", pod.id, t) * 20)
                lines.append(LogLine(
                    pod=pod.id, t_s=t,
                    text=f"INFO t={t} pod={pod.id} handled {handled} requests status=200",
                ))
        for fault in self.scenario.faults:
            template = _FAULT_LOG_LINES.get(fault.fault_type)
            if fault.fault_type == FaultType.MemoryStress:
                template = ("ERROR OOM killer invoked for worker process"
                            if fault.magnitude >= 0.95
                            else "WARN memory pressure high, reclaiming caches")
            if template is None:
                continue
            pod_id = self._fault_log_pod(fault)
            if pod_id is None:
                continue
            body = template.format(mag=fault.magnitude)
            for t in range(fault.start_s, min(fault.end_s, end), SAMPLE_PERIOD_S):
                lines.append(LogLine(pod=pod_id, t_s=t, text=f"{body} (t={t})"))
        lines.sort(key=lambda line: (line.t_s, line.pod, line.text))
        return lines

    # -- traces ----------------------------------------------------------------

    def render_traces(self) -> list[Trace]:
        traces = []
        for tick, t in enumerate(_sample_times(self.scenario.window)):
            trace_id = f"t{tick:04d}"
            spans: list[Span] = []
            self._build_root(trace_id, t, spans)
            traces.append(Trace(trace_id=trace_id, t_s=t, spans=tuple(spans)))
        return traces

    def _build_root(self, trace_id: str, t: int, spans: list[Span]) -> None:
        frontend = self.topo.frontend
        root_pod = self.topo.pods_of(frontend)[0]
        span_id = frontend
        if self.pod_down(root_pod.id, t):
            duration = ROOT_BASE_MS + noise.jitter(SPAN_JITTER_FRAC * ROOT_BASE_MS,
                                                   self.seed, "span", trace_id, span_id)
            spans.append(Span(trace_id, span_id, None, frontend, round(duration, 3),
                              "error", "Service unavailable"))
            return
        child_total = 0.0
        for edge in self.topo.children(frontend):
            child_total += self._build_call(trace_id, t, edge, span_id, spans)
        duration = (ROOT_BASE_MS + PROC_MS + child_total
                    + noise.jitter(SPAN_JITTER_FRAC * ROOT_BASE_MS,
                                   self.seed, "span", trace_id, span_id))
        spans.insert(0, Span(trace_id, span_id, None, frontend, round(duration, 3), "ok"))

    def _build_call(self, trace_id: str, t: int, edge: CallEdge, parent_span_id: str,
                    spans: list[Span]) -> float:
        # span ids are call paths, so pruning one branch never renames another
        span_id = f"{parent_span_id}/{edge.dst}"
        effect = self.edge_effect(edge, t)
        base = edge.base_latency_ms
        jitter = noise.jitter(SPAN_JITTER_FRAC * base, self.seed, "span", trace_id, span_id)

        if effect.unreachable_msg is not None:
            duration = base + jitter
            spans.append(Span(trace_id, span_id, parent_span_id, edge.dst,
                              round(duration, 3), "error", effect.unreachable_msg))
            return duration
        for message, fraction in effect.error_modes:
            draw = noise.unit(self.seed, "edgedraw", trace_id, span_id, message)
            if draw < fraction:
                duration = base + effect.extra_ms + jitter
                spans.append(Span(trace_id, span_id, parent_span_id, edge.dst,
                                  round(duration, 3), "error", message))
                return duration

        child_total = 0.0
        for child_edge in self.topo.children(edge.dst):
            child_total += self._build_call(trace_id, t, child_edge, span_id, spans)
        duration = base * effect.slow_factor + effect.extra_ms + PROC_MS + child_total + jitter
        spans.append(Span(trace_id, span_id, parent_span_id, edge.dst,
                          round(duration, 3), "ok"))
        return duration


def render_telemetry(scenario: EpisodeScenario) -> Telemetry:
    """Render all three modalities for a scenario. Pure in ``scenario.seed``."""
    scenario.validate()
    renderer = _Renderer(scenario)
    return Telemetry(
        scenario=scenario,
        metrics=renderer.render_metrics(),
        logs=renderer.render_logs(),
        traces=renderer.render_traces(),
    )
