"""FMI 3.0 co-simulation master.

Time is exact: master time, step sizes and instance clocks are
`fractions.Fraction` values, converted to floating point only at the FMI
call boundary. The master advances on the GCD of all step sizes and steps
an instance whenever the master time is a multiple of that instance's
step size; between steps of a source, connected sinks see its last
outputs (zero-order hold).

Early return: a backend may complete only part of a requested step and
report the completed amount in StepResult.last_successful_time. Following
the wrapper's doStep convention, that value is an *offset* from the
interval start, not an absolute time; the master re-steps the instance
over the remaining interval until the macro step is complete.
"""

from __future__ import annotations

import ctypes
import math
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import Protocol, runtime_checkable

from .archive import host_platform, library_extension, unpack
from .codegen import MANDATORY_ENTRY_POINTS
from .errors import (
    BackendInitFailure,
    BackendStepFailure,
    CausalityViolation,
    ConfigError,
    DivergedClock,
    LifecycleViolation,
    MissingBinary,
    MissingSymbol,
    TypeMismatch,
    UnknownVariable,
)
from .fmi import (
    FmiTag,
    ModelDescription,
    coerce_value,
    decimal_seconds,
    parse_start,
    parse_xml,
)

EARLY_RETURN_LIMIT = 1000

STATES = ("instantiated", "initializing", "stepping", "terminated")


def parse_time(value) -> Fraction:
    """Exact rational seconds from "0.1", "1/10", int, float or Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, (int, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a time")


def format_time(value: Fraction) -> str:
    return decimal_seconds(value)


@dataclass(frozen=True)
class StepResult:
    """Outcome of one backend doStep call."""

    status: str = "ok"  # "ok" | "discard" | "error"
    early_return: bool = False
    last_successful_time: Fraction | None = None

    def __post_init__(self) -> None:
        if self.status not in ("ok", "discard", "error"):
            raise ValueError(f"unknown step status {self.status!r}")
        if self.early_return and self.last_successful_time is None:
            raise ValueError("early return requires last_successful_time")


@runtime_checkable
class Backend(Protocol):
    """What the master needs from an FMU instance, in-process or loaded."""

    def description(self) -> ModelDescription: ...

    def enter_initialization(self, start_time: float) -> None: ...

    def exit_initialization(self) -> None: ...

    def set_value(self, name: str, value) -> None: ...

    def get_value(self, name: str): ...

    def do_step(self, current_time: Fraction, step_size: Fraction) -> StepResult: ...

    def terminate(self) -> None: ...


@dataclass
class FmuInstance:
    """One FMU in the schedule; state follows instantiate -> initialize ->
    stepping -> terminated and local_time never decreases."""

    id: str
    backend: Backend
    description: ModelDescription | None = None
    state: str = "instantiated"
    local_time: Fraction = Fraction(0)
    seed_inputs: dict[str, object] = field(default_factory=dict)
    step_count: int = 0

    def __post_init__(self) -> None:
        if self.description is None:
            self.description = self.backend.description()


@dataclass(frozen=True)
class Connection:
    """(instance id, output name) feeding (instance id, input name)."""

    source: tuple[str, str]
    sink: tuple[str, str]


@dataclass
class CoSimSchedule:
    instances: list[FmuInstance]
    step_sizes: dict[str, Fraction]
    stop_time: Fraction
    connections: list[Connection] = field(default_factory=list)
    record: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.step_sizes = {k: parse_time(v) for k, v in self.step_sizes.items()}
        self.stop_time = parse_time(self.stop_time)


@dataclass
class Trace:
    """Recorded values at every micro-step boundary, CSV-writable."""

    columns: tuple[str, ...]  # "instance.variable"
    rows: list[tuple[Fraction, tuple]]
    truncated_final_step: bool = False

    def times(self) -> list[Fraction]:
        return [t for t, _ in self.rows]

    def column(self, name: str) -> list:
        index = self.columns.index(name)
        return [values[index] for _, values in self.rows]

    def write_csv(self, path) -> None:
        lines = ["time," + ",".join(self.columns)]
        for t, values in self.rows:
            cells = [format_time(t)] + [render_value(v) for v in values]
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, bytes):
        return value.hex()
    return repr(value) if isinstance(value, float) else str(value)


def set_input(instance: FmuInstance, name: str, value) -> None:
    """Typed set; only inputs and parameters are writable."""
    if instance.state == "terminated":
        raise LifecycleViolation(f"{instance.id} is terminated")
    var = instance.description.variable(name)
    if var is None:
        raise UnknownVariable(f"{instance.id} has no variable {name!r}")
    if var.causality not in ("input", "parameter"):
        raise CausalityViolation(f"{name} is {var.causality}, not settable")
    instance.backend.set_value(name, coerce_value(var.fmi_type, value))


def get_output(instance: FmuInstance, name: str):
    """Typed get; only outputs are readable through the master."""
    if instance.state not in ("stepping",):
        raise LifecycleViolation(f"{instance.id} is not initialized")
    var = instance.description.variable(name)
    if var is None:
        raise UnknownVariable(f"{instance.id} has no variable {name!r}")
    if var.causality != "output":
        raise CausalityViolation(f"{name} is {var.causality}, not readable")
    return instance.backend.get_value(name)


def _check_connections(schedule: CoSimSchedule, by_id: dict[str, FmuInstance]) -> None:
    sinks_seen: set[tuple[str, str]] = set()
    for conn in schedule.connections:
        src_id, src_var = conn.source
        dst_id, dst_var = conn.sink
        for inst_id in (src_id, dst_id):
            if inst_id not in by_id:
                raise ConfigError(f"connection names unknown instance {inst_id!r}")
        source = by_id[src_id].description.variable(src_var)
        sink = by_id[dst_id].description.variable(dst_var)
        if source is None:
            raise UnknownVariable(f"{src_id} has no variable {src_var!r}")
        if sink is None:
            raise UnknownVariable(f"{dst_id} has no variable {dst_var!r}")
        if source.causality != "output":
            raise CausalityViolation(f"connection source {src_var} is not an output")
        if sink.causality != "input":
            raise CausalityViolation(f"connection sink {dst_var} is not an input")
        if source.fmi_type != sink.fmi_type:
            raise TypeMismatch(
                f"{src_id}.{src_var} ({source.fmi_type}) cannot feed "
                f"{dst_id}.{dst_var} ({sink.fmi_type})"
            )
        if conn.sink in sinks_seen:
            raise ConfigError(f"{dst_id}.{dst_var} has two sources")
        sinks_seen.add(conn.sink)


def instantiate(schedule: CoSimSchedule) -> list[FmuInstance]:
    """Validate the schedule and bring every instance into stepping state."""
    if not schedule.instances:
        raise ConfigError("schedule has no instances")
    ids = [inst.id for inst in schedule.instances]
    if len(set(ids)) != len(ids):
        raise ConfigError("instance ids are not unique")
    if schedule.stop_time <= 0:
        raise ConfigError("stop_time must be positive")
    for inst_id in ids:
        step = schedule.step_sizes.get(inst_id)
        if step is None:
            raise ConfigError(f"no step size for instance {inst_id!r}")
        if step <= 0:
            raise ConfigError(f"step size for {inst_id!r} must be positive")

    by_id = {inst.id: inst for inst in schedule.instances}
    _check_connections(schedule, by_id)

    for inst in schedule.instances:
        if inst.state != "instantiated":
            raise LifecycleViolation(f"{inst.id} is already {inst.state}")
        try:
            inst.backend.enter_initialization(0.0)
            inst.state = "initializing"
            for var in inst.description.variables:
                if var.causality in ("input", "parameter") and var.start is not None:
                    inst.backend.set_value(
                        var.name, parse_start(var.fmi_type, var.start)
                    )
            for name, value in inst.seed_inputs.items():
                set_input(inst, name, value)
            inst.backend.exit_initialization()
            inst.state = "stepping"
        except (UnknownVariable, CausalityViolation, TypeMismatch):
            raise
        except Exception as e:
            raise BackendInitFailure(f"{inst.id}: {e}") from e
    return schedule.instances


def _gcd_time(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(
        math.gcd(a.numerator, b.numerator), math.lcm(a.denominator, b.denominator)
    )


def _evaluation_order(
    instances: list[FmuInstance], connections: list[Connection]
) -> list[FmuInstance]:
    """Sources before sinks; cycles fall back to schedule order (the stale
    value then acts as an explicit one-step delay)."""
    order_index = {inst.id: i for i, inst in enumerate(instances)}
    edges = {
        (c.source[0], c.sink[0])
        for c in connections
        if c.source[0] != c.sink[0]
    }
    incoming: dict[str, set[str]] = {inst.id: set() for inst in instances}
    for src, dst in edges:
        incoming[dst].add(src)
    ordered: list[str] = []
    remaining = set(incoming)
    while remaining:
        ready = sorted(
            (i for i in remaining if not (incoming[i] & remaining)),
            key=order_index.__getitem__,
        )
        if not ready:  # cycle: keep schedule order for the rest
            ordered.extend(sorted(remaining, key=order_index.__getitem__))
            break
        ordered.extend(ready)
        remaining.difference_update(ready)
    by_id = {inst.id: inst for inst in instances}
    return [by_id[i] for i in ordered]


def _advance(inst: FmuInstance, start: Fraction, step: Fraction) -> None:
    """One macro step for one instance, honoring early returns."""
    if inst.local_time != start:
        raise DivergedClock(
            f"{inst.id} local time {inst.local_time} != master time {start}"
        )
    remaining = step
    consecutive = 0
    while remaining > 0:
        result = inst.backend.do_step(inst.local_time, remaining)
        inst.step_count += 1
        if result.status != "ok":
            raise BackendStepFailure(
                f"{inst.id} reported {result.status} at t={format_time(inst.local_time)}"
            )
        if result.early_return:
            consecutive += 1
            if consecutive > EARLY_RETURN_LIMIT:
                raise BackendStepFailure(
                    f"{inst.id}: {EARLY_RETURN_LIMIT} consecutive early returns"
                )
            offset = result.last_successful_time
            if offset < 0 or offset > remaining:
                raise BackendStepFailure(
                    f"{inst.id}: early return offset {offset} outside the "
                    f"requested step {remaining}"
                )
            inst.local_time += offset
            remaining -= offset
        else:
            inst.local_time += remaining
            remaining = Fraction(0)
    if inst.local_time != start + step:
        raise DivergedClock(f"{inst.id} did not land on {start + step}")


def _resolve_columns(
    schedule: CoSimSchedule, by_id: dict[str, FmuInstance]
) -> list[tuple[str, str]]:
    if schedule.record:
        for inst_id, var_name in schedule.record:
            if inst_id not in by_id:
                raise ConfigError(f"record names unknown instance {inst_id!r}")
            var = by_id[inst_id].description.variable(var_name)
            if var is None:
                raise UnknownVariable(f"{inst_id} has no variable {var_name!r}")
            if var.causality != "output":
                raise CausalityViolation(f"recorded {var_name} is not an output")
        return list(schedule.record)
    columns = []
    for inst in schedule.instances:
        for var in inst.description.by_causality("output"):
            columns.append((inst.id, var.name))
    return columns


def run(schedule: CoSimSchedule) -> Trace:
    """Execute the schedule to stop_time; returns the recorded trace."""
    instances = instantiate(schedule)
    by_id = {inst.id: inst for inst in instances}
    steps = {inst.id: schedule.step_sizes[inst.id] for inst in instances}
    micro = reduce(_gcd_time, steps.values())
    order = _evaluation_order(instances, schedule.connections)
    columns = _resolve_columns(schedule, by_id)
    inbound: dict[str, list[Connection]] = {inst.id: [] for inst in instances}
    for conn in schedule.connections:
        inbound[conn.sink[0]].append(conn)

    def sample() -> tuple:
        return tuple(by_id[i].backend.get_value(v) for i, v in columns)

    stop = schedule.stop_time
    truncated = False
    rows: list[tuple[Fraction, tuple]] = [(Fraction(0), sample())]
    t = Fraction(0)
    while t < stop:
        for inst in order:
            if (t / steps[inst.id]).denominator != 1:
                continue  # not on this instance's grid
            step = steps[inst.id]
            if t + step > stop:
                step = stop - t
                truncated = True
            for conn in inbound[inst.id]:
                value = get_output(by_id[conn.source[0]], conn.source[1])
                set_input(inst, conn.sink[1], value)
            _advance(inst, t, step)
        t = min(t + micro, stop)
        rows.append((t, sample()))

    for inst in instances:
        if inst.local_time != stop:
            raise DivergedClock(f"{inst.id} ended at {inst.local_time}, not {stop}")
        inst.backend.terminate()
        inst.state = "terminated"

    return Trace(
        columns=tuple(f"{i}.{v}" for i, v in columns),
        rows=rows,
        truncated_final_step=truncated,
    )


# --- shared-library backend --------------------------------------------------

_CTYPES = {
    FmiTag.BOOL: ctypes.c_bool,
    FmiTag.INT8: ctypes.c_int8,
    FmiTag.UINT8: ctypes.c_uint8,
    FmiTag.INT16: ctypes.c_int16,
    FmiTag.UINT16: ctypes.c_uint16,
    FmiTag.INT32: ctypes.c_int32,
    FmiTag.UINT32: ctypes.c_uint32,
    FmiTag.INT64: ctypes.c_int64,
    FmiTag.UINT64: ctypes.c_uint64,
    FmiTag.FLOAT32: ctypes.c_float,
    FmiTag.FLOAT64: ctypes.c_double,
}

_VR_ARRAY = ctypes.POINTER(ctypes.c_uint32)
_STATUS_OK = (0, 1)  # fmi3OK, fmi3Warning
_STATUS_DISCARD = 2


def _prototype(library: ctypes.CDLL, name: str, restype, argtypes) -> None:
    fn = getattr(library, name)
    fn.restype = restype
    fn.argtypes = argtypes


class LibraryBackend:
    """Backend over a shared library implementing the FMI 3.0 C API.

    Status codes other than OK/Warning surface as errors; Discard maps to
    StepResult("discard"). lastSuccessfulTime is interpreted as an offset
    from the interval start, matching the generated wrapper.
    """

    def __init__(self, description: ModelDescription, library_path: Path):
        self._md = description
        self._path = library_path
        try:
            self._lib = ctypes.CDLL(str(library_path))
        except OSError as e:
            raise BackendInitFailure(f"cannot load {library_path}: {e}") from e
        self._bind()
        self._vars = {v.name: v for v in description.variables}
        self._instance = self._lib.fmi3InstantiateCoSimulation(
            description.model_name.encode(),
            description.instantiation_token.encode(),
            b"",
            False,
            False,
            False,
            True,
            None,
            0,
            None,
            None,
            None,
        )
        if not self._instance:
            raise BackendInitFailure(f"{library_path}: instantiate returned NULL")

    def _needed_symbols(self) -> list[str]:
        names = list(MANDATORY_ENTRY_POINTS)
        tags = {v.fmi_type.tag for v in self._md.variables}
        settable = {
            v.fmi_type.tag
            for v in self._md.variables
            if v.causality in ("input", "parameter")
        }
        names.extend(f"fmi3Get{t.value}" for t in sorted(tags, key=lambda t: t.value))
        names.extend(
            f"fmi3Set{t.value}" for t in sorted(settable, key=lambda t: t.value)
        )
        return names

    def _bind(self) -> None:
        missing = [n for n in self._needed_symbols() if not hasattr(self._lib, n)]
        if missing:
            raise MissingSymbol(
                f"{self._path.name} lacks entry points: " + ", ".join(missing)
            )
        c = ctypes
        _prototype(
            self._lib,
            "fmi3InstantiateCoSimulation",
            c.c_void_p,
            [
                c.c_char_p, c.c_char_p, c.c_char_p,
                c.c_bool, c.c_bool, c.c_bool, c.c_bool,
                _VR_ARRAY, c.c_size_t, c.c_void_p, c.c_void_p, c.c_void_p,
            ],
        )
        _prototype(
            self._lib,
            "fmi3EnterInitializationMode",
            c.c_int,
            [c.c_void_p, c.c_bool, c.c_double, c.c_double, c.c_bool, c.c_double],
        )
        _prototype(self._lib, "fmi3ExitInitializationMode", c.c_int, [c.c_void_p])
        _prototype(
            self._lib,
            "fmi3DoStep",
            c.c_int,
            [
                c.c_void_p, c.c_double, c.c_double, c.c_bool,
                c.POINTER(c.c_bool), c.POINTER(c.c_bool),
                c.POINTER(c.c_bool), c.POINTER(c.c_double),
            ],
        )
        _prototype(self._lib, "fmi3FreeInstance", None, [c.c_void_p])
        for tag in {v.fmi_type.tag for v in self._md.variables}:
            if tag is FmiTag.BINARY:
                byte_ptr = c.POINTER(c.c_ubyte)
                if hasattr(self._lib, "fmi3GetBinary"):
                    _prototype(
                        self._lib, "fmi3GetBinary", c.c_int,
                        [c.c_void_p, _VR_ARRAY, c.c_size_t,
                         c.POINTER(c.c_size_t), c.POINTER(byte_ptr), c.c_size_t],
                    )
                if hasattr(self._lib, "fmi3SetBinary"):
                    _prototype(
                        self._lib, "fmi3SetBinary", c.c_int,
                        [c.c_void_p, _VR_ARRAY, c.c_size_t,
                         c.POINTER(c.c_size_t), c.POINTER(byte_ptr), c.c_size_t],
                    )
                continue
            ctype = _CTYPES[tag]
            for prefix in ("Get", "Set"):
                name = f"fmi3{prefix}{tag.value}"
                if hasattr(self._lib, name):
                    _prototype(
                        self._lib, name, c.c_int,
                        [c.c_void_p, _VR_ARRAY, c.c_size_t,
                         c.POINTER(ctype), c.c_size_t],
                    )

    def _check(self, status: int, what: str) -> None:
        if status not in _STATUS_OK:
            raise BackendStepFailure(f"{what} returned status {status}")

    def description(self) -> ModelDescription:
        return self._md

    def enter_initialization(self, start_time: float) -> None:
        self._check(
            self._lib.fmi3EnterInitializationMode(
                self._instance, False, 0.0, float(start_time), False, 0.0
            ),
            "fmi3EnterInitializationMode",
        )

    def exit_initialization(self) -> None:
        self._check(
            self._lib.fmi3ExitInitializationMode(self._instance),
            "fmi3ExitInitializationMode",
        )

    def _vr(self, name: str):
        var = self._vars.get(name)
        if var is None:
            raise UnknownVariable(f"no variable {name!r}")
        return var, (ctypes.c_uint32 * 1)(var.value_reference)

    def set_value(self, name: str, value) -> None:
        var, vr = self._vr(name)
        tag = var.fmi_type.tag
        if tag is FmiTag.BINARY:
            data = coerce_value(var.fmi_type, value)
            buf = (ctypes.c_ubyte * len(data)).from_buffer_copy(data)
            sizes = (ctypes.c_size_t * 1)(len(data))
            values = (ctypes.POINTER(ctypes.c_ubyte) * 1)(
                ctypes.cast(buf, ctypes.POINTER(ctypes.c_ubyte))
            )
            status = self._lib.fmi3SetBinary(self._instance, vr, 1, sizes, values, 1)
        else:
            holder = (_CTYPES[tag] * 1)(coerce_value(var.fmi_type, value))
            status = getattr(self._lib, f"fmi3Set{tag.value}")(
                self._instance, vr, 1, holder, 1
            )
        self._check(status, f"fmi3Set{tag.value}({name})")

    def get_value(self, name: str):
        var, vr = self._vr(name)
        tag = var.fmi_type.tag
        if tag is FmiTag.BINARY:
            sizes = (ctypes.c_size_t * 1)()
            values = (ctypes.POINTER(ctypes.c_ubyte) * 1)()
            status = self._lib.fmi3GetBinary(self._instance, vr, 1, sizes, values, 1)
            self._check(status, f"fmi3GetBinary({name})")
            return ctypes.string_at(values[0], sizes[0])
        holder = (_CTYPES[tag] * 1)()
        status = getattr(self._lib, f"fmi3Get{tag.value}")(
            self._instance, vr, 1, holder, 1
        )
        self._check(status, f"fmi3Get{tag.value}({name})")
        value = holder[0]
        return bool(value) if tag is FmiTag.BOOL else value

    def do_step(self, current_time: Fraction, step_size: Fraction) -> StepResult:
        event_needed = ctypes.c_bool(False)
        terminate = ctypes.c_bool(False)
        early = ctypes.c_bool(False)
        last_successful = ctypes.c_double(0.0)
        status = self._lib.fmi3DoStep(
            self._instance,
            float(current_time),
            float(step_size),
            True,
            ctypes.byref(event_needed),
            ctypes.byref(terminate),
            ctypes.byref(early),
            ctypes.byref(last_successful),
        )
        if status == _STATUS_DISCARD:
            return StepResult(status="discard")
        if status not in _STATUS_OK:
            return StepResult(status="error")
        if early.value:
            return StepResult(
                early_return=True,
                last_successful_time=Fraction(str(last_successful.value)),
            )
        return StepResult()

    def terminate(self) -> None:
        if self._instance:
            self._lib.fmi3FreeInstance(self._instance)
            self._instance = None


def load_library_backend(archive_path, platform: str | None = None) -> LibraryBackend:
    """Backend over the shared library packed in an FMU archive."""
    platform = platform or host_platform()
    arch = unpack(archive_path)
    binary = arch.binaries.get(platform)
    if binary is None:
        raise MissingBinary(
            f"{archive_path} has no binary for {platform} "
            f"(present: {', '.join(sorted(arch.binaries)) or 'none'})"
        )
    md = parse_xml(arch.model_description)
    workdir = Path(tempfile.mkdtemp(prefix="tlm2fmu-"))
    library_path = workdir / f"{md.model_name}{library_extension(platform)}"
    library_path.write_bytes(binary)
    return LibraryBackend(md, library_path)
