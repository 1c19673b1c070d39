"""Configuration file loading for the command-line tool.

A configuration is a single YAML or JSON mapping.  Unknown keys are rejected
rather than ignored so that a typo surfaces as an error instead of a silently
skipped setting.  All input paths (scanned sources, FMU archives) are resolved
relative to the configuration file and must exist at load time; output paths
are created on demand and only checked when written.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import yaml

from .archive import PLATFORM_TUPLES
from .codegen import BUILD_FLAVORS
from .errors import ConfigError
from .master import parse_time
from .models import MODEL_KINDS

_TOP_KEYS = {
    "sources", "record_hint", "model_name", "communication_step_size",
    "start_values", "output_dir", "build_flavor", "platforms",
    "target_module", "cosim",
}
_COSIM_KEYS = {"instances", "connections", "step_sizes", "stop_time", "record"}
_INSTANCE_KEYS = {"id", "model", "archive", "options", "inputs"}
_CONNECTION_KEYS = {"source", "sink"}


@dataclass(frozen=True)
class InstanceConfig:
    """One scheduled FMU: either a registered behavioral model or an archive."""

    id: str
    model: str | None = None
    archive: Path | None = None
    options: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CosimConfig:
    instances: tuple[InstanceConfig, ...]
    step_sizes: dict[str, Fraction]
    stop_time: Fraction
    connections: tuple[tuple[tuple[str, str], tuple[str, str]], ...] = ()
    record: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ToolConfig:
    """Everything a command may need; commands check for what they require."""

    base_dir: Path
    sources: tuple[Path, ...] = ()
    record_hint: str | None = None
    model_name: str | None = None
    communication_step_size: str | None = None
    start_values: dict = field(default_factory=dict)
    output_dir: Path | None = None
    build_flavor: str = "shell_script"
    platforms: tuple[str, ...] = ()
    target_module: str | None = None
    cosim: CosimConfig | None = None


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown {where} key(s): {', '.join(unknown)}; "
            f"expected {', '.join(sorted(allowed))}"
        )


def _require_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(value).__name__}")
    return value


def _positive_time(value, where: str) -> Fraction:
    try:
        parsed = parse_time(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where} is not a time value: {value!r}") from exc
    if parsed <= 0:
        raise ConfigError(f"{where} must be positive, got {value!r}")
    return parsed


def _literal(value) -> str:
    """Render a config scalar as an XML start-value literal."""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _endpoint(text, where: str) -> tuple[str, str]:
    if not isinstance(text, str) or "." not in text:
        raise ConfigError(
            f"{where} must be written as 'instance.variable', got {text!r}"
        )
    instance, variable = text.split(".", 1)
    if not instance or not variable:
        raise ConfigError(
            f"{where} must be written as 'instance.variable', got {text!r}"
        )
    return instance, variable


def _load_instance(raw, base_dir: Path, index: int) -> InstanceConfig:
    where = f"cosim.instances[{index}]"
    raw = _require_mapping(raw, where)
    _reject_unknown(raw, _INSTANCE_KEYS, where)
    inst_id = raw.get("id")
    if not isinstance(inst_id, str) or not inst_id:
        raise ConfigError(f"{where} needs a non-empty string id")
    if "." in inst_id:
        raise ConfigError(
            f"instance id {inst_id!r} may not contain '.'; dots separate "
            "instance and variable in endpoint references"
        )
    model = raw.get("model")
    archive = raw.get("archive")
    if (model is None) == (archive is None):
        raise ConfigError(
            f"{where} needs exactly one of 'model' or 'archive'"
        )
    if model is not None and model not in MODEL_KINDS:
        raise ConfigError(
            f"{where}: unknown model {model!r}; "
            f"registered models: {', '.join(sorted(MODEL_KINDS))}"
        )
    archive_path: Path | None = None
    if archive is not None:
        archive_path = (base_dir / str(archive)).resolve()
        if not archive_path.is_file():
            raise ConfigError(f"{where}: archive does not exist: {archive}")
    options = _require_mapping(raw.get("options", {}), f"{where}.options")
    inputs = _require_mapping(raw.get("inputs", {}), f"{where}.inputs")
    return InstanceConfig(id=inst_id, model=model, archive=archive_path,
                          options=dict(options), inputs=dict(inputs))


def _load_cosim(raw, base_dir: Path) -> CosimConfig:
    raw = _require_mapping(raw, "cosim")
    _reject_unknown(raw, _COSIM_KEYS, "cosim")
    for key in ("instances", "step_sizes", "stop_time"):
        if key not in raw:
            raise ConfigError(f"cosim needs a {key} entry")
    raw_instances = raw["instances"]
    if not isinstance(raw_instances, list) or not raw_instances:
        raise ConfigError("cosim.instances must be a non-empty list")
    instances = tuple(
        _load_instance(entry, base_dir, i) for i, entry in enumerate(raw_instances)
    )

    steps_raw = _require_mapping(raw["step_sizes"], "cosim.step_sizes")
    step_sizes = {
        str(inst): _positive_time(value, f"cosim.step_sizes[{inst!r}]")
        for inst, value in steps_raw.items()
    }
    stop_time = _positive_time(raw["stop_time"], "cosim.stop_time")

    connections = []
    for i, entry in enumerate(raw.get("connections", []) or []):
        where = f"cosim.connections[{i}]"
        entry = _require_mapping(entry, where)
        _reject_unknown(entry, _CONNECTION_KEYS, where)
        if "source" not in entry or "sink" not in entry:
            raise ConfigError(f"{where} needs source and sink endpoints")
        connections.append((
            _endpoint(entry["source"], f"{where}.source"),
            _endpoint(entry["sink"], f"{where}.sink"),
        ))

    record = tuple(
        _endpoint(entry, f"cosim.record[{i}]")
        for i, entry in enumerate(raw.get("record", []) or [])
    )
    return CosimConfig(
        instances=instances,
        step_sizes=step_sizes,
        stop_time=stop_time,
        connections=tuple(connections),
        record=record,
    )


def load_config(path) -> ToolConfig:
    """Parse and validate a YAML or JSON configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file does not exist: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raw = _require_mapping(raw, f"configuration in {path}")
    _reject_unknown(raw, _TOP_KEYS, "configuration")

    base_dir = path.parent.resolve()

    sources = []
    raw_sources = raw.get("sources", []) or []
    if not isinstance(raw_sources, list):
        raise ConfigError("sources must be a list of paths")
    for entry in raw_sources:
        source = (base_dir / str(entry)).resolve()
        if not source.is_file():
            raise ConfigError(f"source does not exist: {entry}")
        sources.append(source)

    step = raw.get("communication_step_size")
    if step is not None:
        _positive_time(step, "communication_step_size")
        step = str(step)

    start_raw = _require_mapping(raw.get("start_values", {}), "start_values")
    start_values = {str(k): _literal(v) for k, v in start_raw.items()}

    build_flavor = raw.get("build_flavor", "shell_script")
    if build_flavor not in BUILD_FLAVORS:
        raise ConfigError(
            f"unknown build_flavor {build_flavor!r}; "
            f"choose one of {', '.join(BUILD_FLAVORS)}"
        )

    raw_platforms = raw.get("platforms", []) or []
    if not isinstance(raw_platforms, list):
        raise ConfigError("platforms must be a list of platform tuples")
    for platform in raw_platforms:
        if platform not in PLATFORM_TUPLES:
            raise ConfigError(
                f"unknown platform {platform!r}; "
                f"known: {', '.join(PLATFORM_TUPLES)}"
            )

    output_dir = raw.get("output_dir")
    cosim = raw.get("cosim")
    return ToolConfig(
        base_dir=base_dir,
        sources=tuple(sources),
        record_hint=raw.get("record_hint"),
        model_name=raw.get("model_name"),
        communication_step_size=step,
        start_values=start_values,
        output_dir=(base_dir / str(output_dir)).resolve() if output_dir else None,
        build_flavor=build_flavor,
        platforms=tuple(raw_platforms),
        target_module=raw.get("target_module"),
        cosim=_load_cosim(cosim, base_dir) if cosim is not None else None,
    )
