from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import pytest

from tlm2fmu.config import load_config
from tlm2fmu.errors import ConfigError

FIXTURES = Path(__file__).parent / "fixtures"


def _write(tmp_path: Path, text: str, name: str = "tool.yaml") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


FULL_YAML = f"""\
sources:
  - {FIXTURES}/listing1/payload.h
  - {FIXTURES}/listing1/target.cpp
record_hint: payload
model_name: tlm
communication_step_size: "0.01"
start_values:
  data_in: 5
  flag: true
output_dir: out
build_flavor: shell_script
platforms: [x86_64-linux]
target_module: echo_target
cosim:
  stop_time: "3.5"
  instances:
    - id: e
      model: echo
      options: {{latency_steps: 1}}
      inputs: {{fmi_data_in: 7}}
  connections: []
  step_sizes: {{e: 1}}
  record: [e.fmi_result]
"""


def test_full_yaml_round_trip(tmp_path):
    config = load_config(_write(tmp_path, FULL_YAML))
    assert config.base_dir == tmp_path.resolve()
    assert [p.name for p in config.sources] == ["payload.h", "target.cpp"]
    assert config.record_hint == "payload"
    assert config.model_name == "tlm"
    assert config.communication_step_size == "0.01"
    assert config.start_values == {"data_in": "5", "flag": "true"}
    assert config.output_dir == tmp_path.resolve() / "out"
    assert config.platforms == ("x86_64-linux",)
    assert config.target_module == "echo_target"
    cosim = config.cosim
    assert cosim.stop_time == Fraction(7, 2)
    assert cosim.step_sizes == {"e": Fraction(1)}
    assert cosim.instances[0].id == "e"
    assert cosim.instances[0].model == "echo"
    assert cosim.instances[0].options == {"latency_steps": 1}
    assert cosim.instances[0].inputs == {"fmi_data_in": 7}
    assert cosim.record == (("e", "fmi_result"),)


def test_json_config_equivalent(tmp_path):
    raw = {
        "sources": [f"{FIXTURES}/listing1/target.cpp"],
        "communication_step_size": 0.01,
        "cosim": {
            "stop_time": 2,
            "instances": [{"id": "e", "model": "echo"}],
            "step_sizes": {"e": "0.5"},
        },
    }
    path = _write(tmp_path, json.dumps(raw), "tool.json")
    config = load_config(path)
    assert config.communication_step_size == "0.01"
    assert config.cosim.step_sizes == {"e": Fraction(1, 2)}
    assert config.cosim.stop_time == Fraction(2)


def test_missing_file_and_malformed_text(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "absent.yaml")
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "a: [unclosed"))
    with pytest.raises(ConfigError, match="mapping"):
        load_config(_write(tmp_path, "- just\n- a\n- list\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "{not json", "t.json"))


def test_unknown_keys_rejected_at_every_level(tmp_path):
    with pytest.raises(ConfigError, match="typo_key"):
        load_config(_write(tmp_path, "typo_key: 1\n"))
    with pytest.raises(ConfigError, match="surprise"):
        load_config(_write(
            tmp_path,
            "cosim:\n  surprise: 1\n  stop_time: 1\n"
            "  instances: [{id: e, model: echo}]\n  step_sizes: {e: 1}\n",
        ))
    with pytest.raises(ConfigError, match="colour"):
        load_config(_write(
            tmp_path,
            "cosim:\n  stop_time: 1\n"
            "  instances: [{id: e, model: echo, colour: red}]\n"
            "  step_sizes: {e: 1}\n",
        ))
    with pytest.raises(ConfigError, match="via"):
        load_config(_write(
            tmp_path,
            "cosim:\n  stop_time: 1\n"
            "  instances: [{id: a, model: echo}, {id: b, model: echo}]\n"
            "  step_sizes: {a: 1, b: 1}\n"
            "  connections: [{source: a.fmi_result, sink: b.fmi_data_in, via: x}]\n",
        ))


def test_missing_source_path_rejected(tmp_path):
    with pytest.raises(ConfigError, match="nowhere.cpp"):
        load_config(_write(tmp_path, "sources: [nowhere.cpp]\n"))


def test_sources_resolved_relative_to_config(tmp_path):
    (tmp_path / "here.cpp").write_text("int x;\n")
    config = load_config(_write(tmp_path, "sources: [here.cpp]\n"))
    assert config.sources == (tmp_path.resolve() / "here.cpp",)


def test_nonpositive_times_rejected(tmp_path):
    with pytest.raises(ConfigError, match="positive"):
        load_config(_write(tmp_path, 'communication_step_size: "0"\n'))
    base = ("cosim:\n  stop_time: {stop}\n"
            "  instances: [{{id: e, model: echo}}]\n  step_sizes: {{e: {step}}}\n")
    with pytest.raises(ConfigError, match="positive"):
        load_config(_write(tmp_path, base.format(stop=1, step="-1")))
    with pytest.raises(ConfigError, match="positive"):
        load_config(_write(tmp_path, base.format(stop=0, step=1)))
    with pytest.raises(ConfigError, match="not a time"):
        load_config(_write(tmp_path, base.format(stop="soon", step=1)))


def test_instance_needs_exactly_one_backend_kind(tmp_path):
    body = ("cosim:\n  stop_time: 1\n  step_sizes: {{e: 1}}\n"
            "  instances: [{instance}]\n")
    with pytest.raises(ConfigError, match="exactly one"):
        load_config(_write(tmp_path, body.format(instance="{id: e}")))
    with pytest.raises(ConfigError, match="exactly one"):
        load_config(_write(
            tmp_path, body.format(instance="{id: e, model: echo, archive: x.fmu}")))


def test_unknown_model_listed_with_registry(tmp_path):
    with pytest.raises(ConfigError, match="vehicle"):
        load_config(_write(
            tmp_path,
            "cosim:\n  stop_time: 1\n  step_sizes: {e: 1}\n"
            "  instances: [{id: e, model: warp_drive}]\n",
        ))


def test_archive_instances_check_the_path(tmp_path):
    body = ("cosim:\n  stop_time: 1\n  step_sizes: {c: 1}\n"
            "  instances: [{id: c, archive: unit.fmu}]\n")
    with pytest.raises(ConfigError, match="unit.fmu"):
        load_config(_write(tmp_path, body))
    (tmp_path / "unit.fmu").write_bytes(b"PK")
    config = load_config(_write(tmp_path, body))
    assert config.cosim.instances[0].archive == tmp_path.resolve() / "unit.fmu"


def test_instance_id_may_not_contain_dot(tmp_path):
    with pytest.raises(ConfigError, match="'.'"):
        load_config(_write(
            tmp_path,
            "cosim:\n  stop_time: 1\n  step_sizes: {}\n"
            "  instances: [{id: a.b, model: echo}]\n",
        ))


def test_endpoints_must_be_dotted(tmp_path):
    with pytest.raises(ConfigError, match="instance.variable"):
        load_config(_write(
            tmp_path,
            "cosim:\n  stop_time: 1\n  step_sizes: {e: 1}\n"
            "  instances: [{id: e, model: echo}]\n  record: [fmi_result]\n",
        ))


def test_platform_and_flavor_validation(tmp_path):
    with pytest.raises(ConfigError, match="mips-linux"):
        load_config(_write(tmp_path, "platforms: [mips-linux]\n"))
    with pytest.raises(ConfigError, match="build_flavor"):
        load_config(_write(tmp_path, "build_flavor: ninja\n"))


def test_cosim_requires_core_keys(tmp_path):
    with pytest.raises(ConfigError, match="stop_time"):
        load_config(_write(
            tmp_path,
            "cosim:\n  instances: [{id: e, model: echo}]\n  step_sizes: {e: 1}\n",
        ))
    with pytest.raises(ConfigError, match="non-empty"):
        load_config(_write(
            tmp_path,
            "cosim:\n  stop_time: 1\n  instances: []\n  step_sizes: {}\n",
        ))
