from __future__ import annotations

import pytest

from sopflow.detector import DetectorConfig
from sopflow.kb import KnowledgeBase
from sopflow.llm import BackendConfig, make_backend
from sopflow.sandbox import (
    EpisodeScenario,
    FaultType,
    GroundTruth,
    ScenarioConfig,
    generate_scenario,
    render_telemetry,
)
from sopflow.tools import ToolContext, build_registry

_TELEMETRY_CACHE: dict[str, object] = {}


def scripted_backend(script=None, overrides=None, seed=0, dim=64):
    return make_backend(BackendConfig(
        script=list(script or []), embed_overrides=dict(overrides or {}),
        embed_seed=seed, embed_dim=dim,
    ))


def fault_scenario(fault_type: FaultType) -> EpisodeScenario:
    index = list(FaultType).index(fault_type)
    return generate_scenario(1000 + index, ScenarioConfig(fault_types=(fault_type,)))


def no_fault_scenario(seed: int = 7) -> EpisodeScenario:
    return EpisodeScenario(
        id=f"scn-quiet-{seed}", topology_name="online-boutique", seed=seed,
        window=(0, 600), faults=[], ground_truth=GroundTruth((), ()),
    )


def telemetry_for(scenario: EpisodeScenario):
    cached = _TELEMETRY_CACHE.get(scenario.id)
    if cached is None:
        cached = render_telemetry(scenario)
        _TELEMETRY_CACHE[scenario.id] = cached
    return cached


@pytest.fixture
def registry():
    return build_registry()


@pytest.fixture
def backend():
    return scripted_backend()


@pytest.fixture
def detector_cfg():
    return DetectorConfig()


def make_ctx(scenario: EpisodeScenario, registry=None, backend=None, kb=None,
             detector=None) -> ToolContext:
    registry = registry or build_registry()
    backend = backend or scripted_backend()
    return ToolContext(
        telemetry=telemetry_for(scenario),
        kb=kb if kb is not None else KnowledgeBase(backend),
        backend=backend,
        detector=detector or DetectorConfig(),
        registry=registry,
    )


@pytest.fixture
def cpu_ctx():
    return make_ctx(fault_scenario(FaultType.CpuStress))


@pytest.fixture
def quiet_ctx():
    return make_ctx(no_fault_scenario())
