"""In-process behavioral FMU backends for the case studies.

Five models, registered by name for the cosim command: an echo/identity
pipeline, an I2C-like bus target, an XOR-parity ECC unit, a driving-cycle
ECU torque source, and a single-pedal longitudinal vehicle plant. The i2c
and ecc models mirror the SystemC fixture targets of the test suite, so a
compiled wrapper around those fixtures observes the same behavior.

All models are total: do_step never fails, state updates are
deterministic, and every variable keeps its last value until overwritten.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ConfigError, UnknownVariable
from .fmi import (
    FmiTag,
    FmiType,
    FmiVariable,
    ModelDescription,
    coerce_value,
    default_start,
    parse_start,
    stamp_token,
)
from .master import StepResult


def _v(
    name: str,
    vr: int,
    tag: FmiTag,
    causality: str,
    start: str | None = None,
    size: int | None = None,
) -> FmiVariable:
    ftype = FmiType(tag, size)
    if start is None and causality in ("input", "parameter"):
        start = default_start(ftype)
    return FmiVariable(name, vr, ftype, causality, start)


def _describe(model_name: str, step_size: str, variables) -> ModelDescription:
    return stamp_token(
        ModelDescription(model_name, "", tuple(variables), step_size)
    )


class BehavioralModel:
    """Base backend: a typed value store driven by the model description.

    Subclasses provide describe() and _step(); values live in self._values
    keyed by variable name, initialized from start values (zero for
    outputs).
    """

    def __init__(self) -> None:
        self._md = self.describe()
        self._values = {
            v.name: parse_start(v.fmi_type, v.start if v.start is not None
                                else default_start(v.fmi_type))
            for v in self._md.variables
        }

    @classmethod
    def describe(cls) -> ModelDescription:
        raise NotImplementedError

    def description(self) -> ModelDescription:
        return self._md

    def enter_initialization(self, start_time: float) -> None:
        self._start_time = start_time

    def exit_initialization(self) -> None:
        pass

    def set_value(self, name: str, value) -> None:
        var = self._md.variable(name)
        if var is None:
            raise UnknownVariable(f"{self._md.model_name} has no variable {name!r}")
        self._values[name] = coerce_value(var.fmi_type, value)

    def get_value(self, name: str):
        if name not in self._values:
            raise UnknownVariable(f"{self._md.model_name} has no variable {name!r}")
        return self._values[name]

    def do_step(self, current_time: Fraction, step_size: Fraction) -> StepResult:
        self._step(Fraction(current_time), Fraction(step_size))
        return StepResult()

    def _step(self, current_time: Fraction, step_size: Fraction) -> None:
        raise NotImplementedError

    def terminate(self) -> None:
        pass


class EchoModel(BehavioralModel):
    """Identity with a configurable pipeline delay.

    After k >= latency_steps completed steps the output equals the input
    staged at step k - latency_steps. early_returns maps a doStep
    invocation index to the share of the step to complete before returning
    early (used to exercise the master's re-stepping); such a call moves
    no data, the completing call does.
    """

    def __init__(
        self,
        latency_steps: int = 0,
        early_returns: dict[int, Fraction] | None = None,
    ) -> None:
        if latency_steps < 0:
            raise ValueError("latency_steps must be >= 0")
        self.latency_steps = latency_steps
        self._script = dict(early_returns or {})
        self._calls = 0
        super().__init__()
        self._pipeline = [0] * latency_steps

    @classmethod
    def describe(cls) -> ModelDescription:
        return _describe("echo", "1", [
            _v("fmi_data_in", 1, FmiTag.INT32, "input"),
            _v("fmi_result", 2, FmiTag.INT32, "output"),
        ])

    def do_step(self, current_time: Fraction, step_size: Fraction) -> StepResult:
        index = self._calls
        self._calls += 1
        share = self._script.pop(index, None)
        if share is not None:
            return StepResult(
                early_return=True,
                last_successful_time=Fraction(share) * Fraction(step_size),
            )
        self._pipeline.append(self._values["fmi_data_in"])
        self._values["fmi_result"] = self._pipeline.pop(0)
        return StepResult()


PHASE_IDLE = 0
PHASE_ADDRESSING = 1
PHASE_ACK = 2
PHASE_TRANSFER = 3

TARGET_ALU = 0
TARGET_REG = 1


class I2cBusModel(BehavioralModel):
    """Transaction-level I2C bus in front of two byte-wide targets.

    Each step advances the protocol one phase: idle -> addressing -> ack
    -> transfer -> idle. The request (write flag, data, target) latches
    when start is seen in idle; addressing acks known targets and aborts
    unknown ones, leaving the targets untouched; transfer stores wdata on
    a write and loads rdata on a read.
    """

    def __init__(self) -> None:
        super().__init__()
        self._state = PHASE_IDLE
        self._req_write = False
        self._req_wdata = 0
        self._req_target = TARGET_ALU
        self._cells = {TARGET_ALU: 0, TARGET_REG: 0}

    @classmethod
    def describe(cls) -> ModelDescription:
        return _describe("i2c", "0.01", [
            _v("fmi_start", 1, FmiTag.BOOL, "input"),
            _v("fmi_write", 2, FmiTag.BOOL, "input"),
            _v("fmi_ack", 3, FmiTag.BOOL, "output"),
            _v("fmi_wdata", 4, FmiTag.UINT8, "input"),
            _v("fmi_rdata", 5, FmiTag.UINT8, "output"),
            _v("fmi_target", 6, FmiTag.INT32, "input"),
            _v("fmi_phase", 7, FmiTag.INT32, "output"),
        ])

    def _step(self, current_time: Fraction, step_size: Fraction) -> None:
        v = self._values
        if self._state == PHASE_IDLE:
            if v["fmi_start"]:
                self._req_write = v["fmi_write"]
                self._req_wdata = v["fmi_wdata"]
                self._req_target = v["fmi_target"]
                self._state = PHASE_ADDRESSING
        elif self._state == PHASE_ADDRESSING:
            valid = self._req_target in self._cells
            v["fmi_ack"] = valid
            self._state = PHASE_ACK if valid else PHASE_IDLE
        elif self._state == PHASE_ACK:
            self._state = PHASE_TRANSFER
        else:
            if self._req_write:
                self._cells[self._req_target] = self._req_wdata
            else:
                v["fmi_rdata"] = self._cells[self._req_target]
            self._state = PHASE_IDLE
        v["fmi_phase"] = self._state


class EccModel(BehavioralModel):
    """XOR-parity unit over an 8-bit (byte mode) or 16-bit (word mode) frame.

    Matches the ecc fixture target: when enabled, parity_out is the XOR
    fold of the active-width bits of data_in (least significant bit of
    byte k holding frame bit 8k), error_flag compares against parity_in
    when check_mode is set, data_out passes the frame through, and the
    status byte packs mode/check/mismatch/parity. Disabled steps clear
    status and done and hold everything else.
    """

    @classmethod
    def describe(cls) -> ModelDescription:
        return _describe("ecc", "0.01", [
            _v("fmi_enable", 1, FmiTag.BOOL, "input"),
            _v("fmi_mode_word", 2, FmiTag.BOOL, "input"),
            _v("fmi_check_mode", 3, FmiTag.BOOL, "input"),
            _v("fmi_parity_in", 4, FmiTag.BOOL, "input"),
            _v("fmi_parity_out", 5, FmiTag.BOOL, "output"),
            _v("fmi_error_flag", 6, FmiTag.BOOL, "output"),
            _v("fmi_done", 7, FmiTag.BOOL, "output"),
            _v("fmi_data_in", 8, FmiTag.BINARY, "input", size=2),
            _v("fmi_data_out", 9, FmiTag.BINARY, "output", size=2),
            _v("fmi_status", 10, FmiTag.BINARY, "output", size=1),
        ])

    def _step(self, current_time: Fraction, step_size: Fraction) -> None:
        v = self._values
        v["fmi_done"] = False
        if not v["fmi_enable"]:
            v["fmi_status"] = b"\x00"
            return
        width = 16 if v["fmi_mode_word"] else 8
        data = v["fmi_data_in"]
        parity = False
        for i in range(width):
            parity ^= bool((data[i // 8] >> (i % 8)) & 1)
        mismatch = bool(v["fmi_check_mode"]) and (v["fmi_parity_in"] != parity)
        v["fmi_parity_out"] = parity
        v["fmi_error_flag"] = mismatch
        v["fmi_data_out"] = bytes(data)
        status = (
            (1 if v["fmi_mode_word"] else 0)
            | (2 if v["fmi_check_mode"] else 0)
            | (4 if mismatch else 0)
            | (8 if parity else 0)
        )
        v["fmi_status"] = bytes([status])
        v["fmi_done"] = True


# Driving-cycle phase boundaries in seconds, torque in Nm.
ACCEL_END_S = 10.0
HOLD_END_S = 18.0
RAMP_END_S = 19.0
REGEN_END_S = 26.0
CYCLE_END_S = 35.0
PEAK_TORQUE_NM = 120.0
REGEN_TORQUE_NM = -80.0
CRUISE_TORQUE_NM = 25.0


def driving_cycle_torque(t: float) -> float:
    """Torque request of the 35 s cycle: ramp to 120 Nm over 10 s, hold,
    ramp down to -80 Nm within a second, hold regen until 26 s, cruise."""
    if t <= 0.0:
        return 0.0
    if t < ACCEL_END_S:
        return PEAK_TORQUE_NM * t / ACCEL_END_S
    if t < HOLD_END_S:
        return PEAK_TORQUE_NM
    if t < RAMP_END_S:
        span = RAMP_END_S - HOLD_END_S
        return PEAK_TORQUE_NM + (REGEN_TORQUE_NM - PEAK_TORQUE_NM) * (t - HOLD_END_S) / span
    if t < REGEN_END_S:
        return REGEN_TORQUE_NM
    return CRUISE_TORQUE_NM


class EcuModel(BehavioralModel):
    """Torque source replaying the driving cycle.

    After a step ending at time t the torque output is
    driving_cycle_torque(t); the initial output is 0 Nm. fmi_speed is a
    reserved feedback input the scenario does not use.
    """

    @classmethod
    def describe(cls) -> ModelDescription:
        return _describe("ecu", "0.1", [
            _v("fmi_torque", 1, FmiTag.FLOAT64, "output"),
            _v("fmi_speed", 2, FmiTag.FLOAT64, "input"),
        ])

    def _step(self, current_time: Fraction, step_size: Fraction) -> None:
        self._values["fmi_torque"] = driving_cycle_torque(
            float(current_time + step_size)
        )


WATTS_PER_HP = 745.7
KMH_PER_MPS = 3.6

# (name, start) for the sixteen vehicle parameters. The first nine drive
# the longitudinal model; the remainder are accepted and stored but inert
# (the plant abstracts them away).
VEHICLE_PARAMETERS = (
    ("mass_kg", "1600"),
    ("rated_power_hp", "90"),
    ("torque_gain", "30"),
    ("rolling_resistance_n", "120"),
    ("drag_n_per_mps2", "0.4"),
    ("wheel_radius_m", "0.3"),
    ("gear_ratio", "9"),
    ("drivetrain_efficiency", "0.92"),
    ("regen_efficiency", "0.6"),
    ("frontal_area_m2", "2.2"),
    ("air_density_kg_m3", "1.2"),
    ("drag_cd", "0.29"),
    ("battery_capacity_kwh", "58"),
    ("epsilon_speed_mps", "1.0"),
    ("solver_substeps", "100"),
    ("initial_speed_kmh", "0"),
)

_ACTIVE_PARAMETERS = (
    "mass_kg", "rated_power_hp", "torque_gain", "rolling_resistance_n",
    "drag_n_per_mps2", "regen_efficiency", "epsilon_speed_mps",
    "solver_substeps", "initial_speed_kmh",
)


class VehicleModel(BehavioralModel):
    """First-order longitudinal plant: 1600 kg, 90 hp.

    Positive torque produces tractive force torque * torque_gain, capped
    by rated power / max(speed, epsilon); negative torque brakes through
    the regen path (gain * regen_efficiency, uncapped). Resistance is
    rolling_resistance_n + drag_n_per_mps2 * speed^2, opposing motion and
    never pushing the vehicle backwards. Speed integrates by explicit
    Euler with solver_substeps substeps per step; the output is km/h, the
    internal state m/s.
    """

    def __init__(self) -> None:
        super().__init__()
        self._reset_speed()

    @classmethod
    def describe(cls) -> ModelDescription:
        variables = [
            _v("fmi_torque", 1, FmiTag.FLOAT64, "input"),
            _v("fmi_speed", 2, FmiTag.FLOAT64, "output"),
        ]
        for i, (name, start) in enumerate(VEHICLE_PARAMETERS):
            variables.append(_v(name, 3 + i, FmiTag.FLOAT64, "parameter", start))
        return _describe("vehicle", "1", variables)

    def _reset_speed(self) -> None:
        self._speed_mps = self._values["initial_speed_kmh"] / KMH_PER_MPS
        self._values["fmi_speed"] = self._speed_mps * KMH_PER_MPS

    def exit_initialization(self) -> None:
        self._reset_speed()

    def _step(self, current_time: Fraction, step_size: Fraction) -> None:
        v = self._values
        torque = v["fmi_torque"]
        mass = v["mass_kg"]
        power_w = v["rated_power_hp"] * WATTS_PER_HP
        gain = v["torque_gain"]
        c0 = v["rolling_resistance_n"]
        c2 = v["drag_n_per_mps2"]
        regen = v["regen_efficiency"]
        epsilon = v["epsilon_speed_mps"]
        substeps = max(1, int(round(v["solver_substeps"])))
        dt = float(step_size) / substeps
        speed = self._speed_mps
        for _ in range(substeps):
            if torque >= 0:
                tractive = min(torque * gain, power_w / max(speed, epsilon))
            else:
                tractive = torque * gain * regen
            resistive = c0 + c2 * speed * speed
            speed += dt * (tractive - resistive) / mass
            if speed < 0:
                speed = 0.0
        self._speed_mps = speed
        v["fmi_speed"] = speed * KMH_PER_MPS


MODEL_KINDS: dict[str, type[BehavioralModel]] = {
    "echo": EchoModel,
    "i2c": I2cBusModel,
    "ecc": EccModel,
    "ecu": EcuModel,
    "vehicle": VehicleModel,
}


def create(kind: str, **kwargs) -> BehavioralModel:
    """Instantiate a registered model; kwargs go to its constructor."""
    cls = MODEL_KINDS.get(kind)
    if cls is None:
        raise ConfigError(
            f"unknown model kind {kind!r} (known: {', '.join(sorted(MODEL_KINDS))})"
        )
    return cls(**kwargs)


def describe(kind: str) -> ModelDescription:
    cls = MODEL_KINDS.get(kind)
    if cls is None:
        raise ConfigError(
            f"unknown model kind {kind!r} (known: {', '.join(sorted(MODEL_KINDS))})"
        )
    return cls.describe()
