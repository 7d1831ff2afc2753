import pytest

from sopflow.config import load_config
from sopflow.errors import ConfigError


def test_defaults_without_file():
    cfg = load_config(None)
    assert cfg.backend.backend_kind == "scripted"
    assert cfg.backend.temperature == 0.0
    assert cfg.eval.sigma == 0.1
    assert cfg.eval.agent.max_steps == 20
    assert cfg.eval.agent.action_set_size == 5
    assert cfg.eval.agent.max_root_causes == 3
    assert cfg.detector.k == 3.0
    assert cfg.kb.threshold == 0.3 and cfg.kb.k == 3


def test_full_file_roundtrip(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(
        "backend:\n"
        "  backend_kind: remote\n"
        "  endpoint: https://llm.example/v1\n"
        "  model: m1\n"
        "  temperature: 0.2\n"
        "detector:\n"
        "  k: 4.0\n"
        "  static_thresholds: {cpu_usage: 0.7}\n"
        "eval:\n"
        "  sigma: 0.2\n"
        "  workers: 3\n"
        "  max_steps: 10\n"
        "  ablations: {sop_flow: false}\n"
        "kb:\n"
        "  path: ./kb\n"
        "  threshold: 0.5\n"
    )
    cfg = load_config(path)
    assert cfg.backend.backend_kind == "remote"
    assert cfg.backend.endpoint == "https://llm.example/v1"
    assert cfg.backend.temperature == 0.2
    assert cfg.detector.k == 4.0
    assert cfg.detector.static_thresholds == {"cpu_usage": 0.7}
    assert cfg.eval.sigma == 0.2 and cfg.eval.workers == 3
    assert cfg.eval.agent.max_steps == 10
    assert cfg.eval.agent.ablations.sop_flow is False
    assert cfg.eval.agent.ablations.sop_knowledge is True
    assert str(cfg.kb.path) == "kb" and cfg.kb.threshold == 0.5


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("warp: 9\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("eval: {drive: 1}\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_cli_honors_config_detector(tmp_path, capsys):
    # an absurdly low cpu threshold makes a quiet pod look anomalous, which
    # proves the config file reached the detector
    from sopflow.cli import main
    from sopflow.golden import write_corpus
    write_corpus(tmp_path / "golden", "default")
    cfg = tmp_path / "config.yaml"
    cfg.write_text("detector:\n  static_thresholds: {cpu_usage: 0.01}\n")
    script = tmp_path / "script.yaml"
    script.write_text(
        "- {match_key: 'ROLE: orchestrator-thought', response: hmm}\n"
        "- {match_key: 'ROLE: action-proposer', response: 'ACTION: whether_is_abnormal_metric(target=\"adservice-0\", metric=\"cpu_usage\") | probe'}\n"
        "- {match_key: 'ROLE: orchestrator-select', response: '1'}\n"
    )
    code = main(["diagnose",
                 "--scenario", str(tmp_path / "golden/scenarios/scn-01000-cpustress.yaml"),
                 "--script", str(script), "--config", str(cfg),
                 "--max-steps", "1", "--out", str(tmp_path / "tr.jsonl")])
    assert code == 3  # budget exhausted, which is fine; we want the observation
    transcript = (tmp_path / "tr.jsonl").read_text()
    assert "is anomalous (above)" in transcript
    assert "0.01" in transcript