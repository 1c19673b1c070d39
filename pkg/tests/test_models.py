from __future__ import annotations

import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tlm2fmu import models
from tlm2fmu.errors import ConfigError, TypeMismatch, UnknownVariable
from tlm2fmu.fmi import FmiTag, build_model_description
from tlm2fmu.models import (
    PHASE_ACK,
    PHASE_ADDRESSING,
    PHASE_IDLE,
    PHASE_TRANSFER,
    TARGET_ALU,
    TARGET_REG,
    EccModel,
    EchoModel,
    EcuModel,
    I2cBusModel,
    VehicleModel,
    driving_cycle_torque,
)
from tlm2fmu.scan import SourceUnit, infer_directions, scan_sources

FIXTURES = Path(__file__).parent / "fixtures"

STEP = Fraction(1, 100)


def _parity(value: int) -> bool:
    """Independent XOR-fold oracle."""
    return bin(value).count("1") % 2 == 1


def _run_steps(model, n: int = 1) -> None:
    for _ in range(n):
        model.do_step(Fraction(0), STEP)


# --- registry and descriptions -----------------------------------------------

def test_registry_names():
    assert sorted(models.MODEL_KINDS) == ["ecc", "echo", "ecu", "i2c", "vehicle"]
    assert isinstance(models.create("echo"), EchoModel)
    with pytest.raises(ConfigError):
        models.create("simulink")
    with pytest.raises(ConfigError):
        models.describe("simulink")


def test_echo_description():
    md = models.describe("echo")
    assert [(v.name, v.fmi_type.tag, v.causality) for v in md.variables] == [
        ("fmi_data_in", FmiTag.INT32, "input"),
        ("fmi_result", FmiTag.INT32, "output"),
    ]


I2C_LAYOUT = [
    ("fmi_start", FmiTag.BOOL, "input"),
    ("fmi_write", FmiTag.BOOL, "input"),
    ("fmi_ack", FmiTag.BOOL, "output"),
    ("fmi_wdata", FmiTag.UINT8, "input"),
    ("fmi_rdata", FmiTag.UINT8, "output"),
    ("fmi_target", FmiTag.INT32, "input"),
    ("fmi_phase", FmiTag.INT32, "output"),
]


def test_i2c_description_layout():
    md = models.describe("i2c")
    assert [(v.name, v.fmi_type.tag, v.causality) for v in md.variables] == I2C_LAYOUT
    assert [v.value_reference for v in md.variables] == list(range(1, 8))


def _scanned(corpus):
    units = [SourceUnit.from_path(FIXTURES / rel) for rel in corpus]
    spec, surface = scan_sources(units)
    return infer_directions(spec, surface)


def test_i2c_description_matches_generated_wrapper_interface():
    spec = _scanned(("i2c/i2c_payload.h", "i2c/i2c_target.cpp"))
    assert build_model_description(spec, "i2c", "0.01") == models.describe("i2c")


def test_ecc_description_matches_generated_wrapper_interface():
    spec = _scanned(("ecc/ecc_payload.h", "ecc/ecc_target.cpp"))
    assert build_model_description(spec, "ecc", "0.01") == models.describe("ecc")


def test_vehicle_description():
    md = models.describe("vehicle")
    assert md.variable("fmi_torque").causality == "input"
    assert md.variable("fmi_speed").causality == "output"
    parameters = md.by_causality("parameter")
    assert len(parameters) == 16
    assert [p.name for p in parameters] == [n for n, _ in models.VEHICLE_PARAMETERS]
    assert all(v.fmi_type.tag is FmiTag.FLOAT64 for v in md.variables)


# --- base backend behavior ---------------------------------------------------

def test_value_store_rejects_unknown_and_mistyped():
    bus = I2cBusModel()
    with pytest.raises(UnknownVariable):
        bus.set_value("fmi_bogus", 1)
    with pytest.raises(UnknownVariable):
        bus.get_value("fmi_bogus")
    with pytest.raises(TypeMismatch):
        bus.set_value("fmi_wdata", 300)
    with pytest.raises(TypeMismatch):
        bus.set_value("fmi_start", 1)


def test_models_report_plain_ok_steps():
    for kind in models.MODEL_KINDS:
        model = models.create(kind)
        result = model.do_step(Fraction(0), STEP)
        assert result.status == "ok"
        assert not result.early_return


# --- echo --------------------------------------------------------------------

def test_echo_identity():
    echo = EchoModel()
    echo.set_value("fmi_data_in", 5)
    _run_steps(echo)
    assert echo.get_value("fmi_result") == 5


@given(
    st.lists(st.integers(-(2 ** 31), 2 ** 31 - 1), min_size=1, max_size=20),
    st.integers(0, 4),
)
def test_echo_pipeline_delay(inputs, latency):
    echo = EchoModel(latency_steps=latency)
    outputs = []
    for value in inputs:
        echo.set_value("fmi_data_in", value)
        _run_steps(echo)
        outputs.append(echo.get_value("fmi_result"))
    expected = [0] * min(latency, len(inputs)) + inputs[: max(0, len(inputs) - latency)]
    assert outputs == expected


def test_echo_early_return_script():
    echo = EchoModel(early_returns={0: Fraction(3, 5)})
    echo.set_value("fmi_data_in", 9)
    first = echo.do_step(Fraction(0), Fraction(1))
    assert first.early_return
    assert first.last_successful_time == Fraction(3, 5)
    assert echo.get_value("fmi_result") == 0  # no data moved yet
    second = echo.do_step(Fraction(3, 5), Fraction(2, 5))
    assert not second.early_return
    assert echo.get_value("fmi_result") == 9


# --- i2c ---------------------------------------------------------------------

def _transaction(bus, *, write: bool, target: int, wdata: int = 0) -> list[int]:
    """Drive one four-phase transaction; returns the observed phase outputs."""
    bus.set_value("fmi_start", True)
    bus.set_value("fmi_write", write)
    bus.set_value("fmi_wdata", wdata)
    bus.set_value("fmi_target", target)
    phases = []
    for _ in range(4):
        _run_steps(bus)
        phases.append(bus.get_value("fmi_phase"))
    bus.set_value("fmi_start", False)
    return phases


def test_i2c_phase_sequence():
    bus = I2cBusModel()
    phases = _transaction(bus, write=True, target=TARGET_REG, wdata=1)
    assert phases == [PHASE_ADDRESSING, PHASE_ACK, PHASE_TRANSFER, PHASE_IDLE]


def test_i2c_write_read_round_trip():
    bus = I2cBusModel()
    _transaction(bus, write=True, target=TARGET_REG, wdata=0x2A)
    assert bus.get_value("fmi_ack") is True
    _transaction(bus, write=False, target=TARGET_REG)
    assert bus.get_value("fmi_rdata") == 0x2A


@given(st.integers(0, 255), st.sampled_from([TARGET_ALU, TARGET_REG]))
def test_i2c_round_trip_property(value, target):
    bus = I2cBusModel()
    _transaction(bus, write=True, target=target, wdata=value)
    _transaction(bus, write=False, target=target)
    assert bus.get_value("fmi_rdata") == value


def test_i2c_unacknowledged_address_leaves_state():
    bus = I2cBusModel()
    _transaction(bus, write=True, target=TARGET_ALU, wdata=7)
    bus.set_value("fmi_start", True)
    bus.set_value("fmi_write", True)
    bus.set_value("fmi_wdata", 0xFF)
    bus.set_value("fmi_target", 5)
    _run_steps(bus, 2)  # idle -> addressing -> nack -> idle
    assert bus.get_value("fmi_ack") is False
    assert bus.get_value("fmi_phase") == PHASE_IDLE
    bus.set_value("fmi_write", False)
    bus.set_value("fmi_target", TARGET_ALU)
    _transaction(bus, write=False, target=TARGET_ALU)
    assert bus.get_value("fmi_rdata") == 7


def test_i2c_idle_without_start():
    bus = I2cBusModel()
    _run_steps(bus, 5)
    assert bus.get_value("fmi_phase") == PHASE_IDLE
    assert bus.get_value("fmi_ack") is False


def test_i2c_request_latches_at_start():
    bus = I2cBusModel()
    bus.set_value("fmi_start", True)
    bus.set_value("fmi_write", True)
    bus.set_value("fmi_wdata", 0x11)
    bus.set_value("fmi_target", TARGET_REG)
    _run_steps(bus)  # latched here
    bus.set_value("fmi_wdata", 0x99)
    bus.set_value("fmi_target", TARGET_ALU)
    _run_steps(bus, 3)
    bus.set_value("fmi_start", False)
    _transaction(bus, write=False, target=TARGET_REG)
    assert bus.get_value("fmi_rdata") == 0x11


# --- ecc ---------------------------------------------------------------------

def test_ecc_byte_mode_exhaustive():
    ecc = EccModel()
    ecc.set_value("fmi_enable", True)
    for value in range(256):
        ecc.set_value("fmi_data_in", bytes([value, 0]))
        _run_steps(ecc)
        assert ecc.get_value("fmi_parity_out") is _parity(value), value


def test_ecc_word_mode_sampled():
    ecc = EccModel()
    ecc.set_value("fmi_enable", True)
    ecc.set_value("fmi_mode_word", True)
    for word in random.Random(0).sample(range(65536), 4096):
        ecc.set_value("fmi_data_in", bytes([word & 0xFF, word >> 8]))
        _run_steps(ecc)
        assert ecc.get_value("fmi_parity_out") is _parity(word), word


def test_ecc_byte_mode_ignores_high_byte():
    ecc = EccModel()
    ecc.set_value("fmi_enable", True)
    ecc.set_value("fmi_data_in", bytes([0x01, 0xFF]))
    _run_steps(ecc)
    assert ecc.get_value("fmi_parity_out") is True


def test_ecc_check_mode_flags_mismatch():
    ecc = EccModel()
    ecc.set_value("fmi_enable", True)
    ecc.set_value("fmi_check_mode", True)
    ecc.set_value("fmi_data_in", bytes([0x01, 0]))  # parity 1
    ecc.set_value("fmi_parity_in", False)
    _run_steps(ecc)
    assert ecc.get_value("fmi_error_flag") is True
    ecc.set_value("fmi_parity_in", True)
    _run_steps(ecc)
    assert ecc.get_value("fmi_error_flag") is False


def test_ecc_status_byte_and_done():
    ecc = EccModel()
    ecc.set_value("fmi_enable", True)
    ecc.set_value("fmi_mode_word", True)
    ecc.set_value("fmi_check_mode", True)
    ecc.set_value("fmi_parity_in", False)
    ecc.set_value("fmi_data_in", bytes([0x01, 0]))  # parity 1, mismatch
    _run_steps(ecc)
    # bit0 mode_word, bit1 check_mode, bit2 mismatch, bit3 parity
    assert ecc.get_value("fmi_status") == bytes([0b1111])
    assert ecc.get_value("fmi_done") is True
    assert ecc.get_value("fmi_data_out") == bytes([0x01, 0])


def test_ecc_disabled_clears_status_and_done():
    ecc = EccModel()
    ecc.set_value("fmi_enable", True)
    ecc.set_value("fmi_data_in", bytes([0xFF, 0]))
    _run_steps(ecc)
    held = ecc.get_value("fmi_data_out")
    ecc.set_value("fmi_enable", False)
    _run_steps(ecc)
    assert ecc.get_value("fmi_status") == b"\x00"
    assert ecc.get_value("fmi_done") is False
    assert ecc.get_value("fmi_data_out") == held


# --- ecu ---------------------------------------------------------------------

def test_driving_cycle_shape():
    assert driving_cycle_torque(0.0) == 0.0
    assert driving_cycle_torque(5.0) == 60.0
    assert driving_cycle_torque(10.0) == 120.0
    assert driving_cycle_torque(17.5) == 120.0
    assert driving_cycle_torque(18.5) == 20.0
    assert driving_cycle_torque(19.0) == -80.0
    assert driving_cycle_torque(25.0) == -80.0
    assert driving_cycle_torque(26.0) == 25.0
    assert driving_cycle_torque(35.0) == 25.0


def test_driving_cycle_bounds():
    samples = [driving_cycle_torque(t / 100.0) for t in range(3501)]
    assert max(samples) == 120.0
    assert min(samples) == -80.0


def test_ecu_outputs_scenario_at_interval_end():
    ecu = EcuModel()
    assert ecu.get_value("fmi_torque") == 0.0
    ecu.do_step(Fraction(0), Fraction(1, 10))
    assert ecu.get_value("fmi_torque") == driving_cycle_torque(0.1)
    ecu.do_step(Fraction(1, 10), Fraction(1, 10))
    assert ecu.get_value("fmi_torque") == driving_cycle_torque(0.2)


# --- vehicle -----------------------------------------------------------------

def _vehicle_at(speed_kmh: float) -> VehicleModel:
    vehicle = VehicleModel()
    vehicle.set_value("initial_speed_kmh", speed_kmh)
    vehicle.exit_initialization()
    return vehicle


def test_vehicle_rest_stays_at_rest():
    vehicle = _vehicle_at(0.0)
    for _ in range(10):
        vehicle.do_step(Fraction(0), Fraction(1))
    assert vehicle.get_value("fmi_speed") == 0.0


def test_vehicle_accelerates_under_positive_torque():
    vehicle = _vehicle_at(0.0)
    vehicle.set_value("fmi_torque", 50.0)
    speeds = []
    for _ in range(5):
        vehicle.do_step(Fraction(0), Fraction(1))
        speeds.append(vehicle.get_value("fmi_speed"))
    assert all(b > a for a, b in zip(speeds, speeds[1:]))
    assert speeds[0] > 0.0


def test_vehicle_brakes_under_negative_torque():
    vehicle = _vehicle_at(100.0)
    vehicle.set_value("fmi_torque", -80.0)
    speeds = [vehicle.get_value("fmi_speed")]
    for _ in range(5):
        vehicle.do_step(Fraction(0), Fraction(1))
        speeds.append(vehicle.get_value("fmi_speed"))
    assert all(b < a for a, b in zip(speeds, speeds[1:]))


def test_vehicle_speed_never_negative():
    vehicle = _vehicle_at(10.0)
    vehicle.set_value("fmi_torque", -80.0)
    for _ in range(100):
        vehicle.do_step(Fraction(0), Fraction(1))
        assert vehicle.get_value("fmi_speed") >= 0.0
    assert vehicle.get_value("fmi_speed") == 0.0


def test_vehicle_acceleration_sign_matches_force_balance():
    # single Euler substep makes the sign analytically checkable
    cases = [(5.0, 100.0, +1), (30.0, 10.0, -1)]
    for speed_mps, torque, sign in cases:
        vehicle = _vehicle_at(speed_mps * models.KMH_PER_MPS)
        vehicle.set_value("solver_substeps", 1.0)
        vehicle.set_value("fmi_torque", torque)
        before = vehicle.get_value("fmi_speed")
        vehicle.do_step(Fraction(0), Fraction(1, 10))
        delta = vehicle.get_value("fmi_speed") - before
        assert delta * sign > 0, (speed_mps, torque)


def test_vehicle_power_cap_limits_tractive_force():
    # at high speed the same torque must produce less acceleration
    slow = _vehicle_at(10.0)
    fast = _vehicle_at(120.0)
    for vehicle in (slow, fast):
        vehicle.set_value("drag_n_per_mps2", 0.0)  # isolate the cap
        vehicle.set_value("fmi_torque", 120.0)
        vehicle.do_step(Fraction(0), Fraction(1))
    gain_slow = slow.get_value("fmi_speed") - 10.0
    gain_fast = fast.get_value("fmi_speed") - 120.0
    assert gain_fast < gain_slow


def test_vehicle_output_is_kmh():
    vehicle = _vehicle_at(36.0)
    assert vehicle._speed_mps == pytest.approx(10.0)
    assert vehicle.get_value("fmi_speed") == pytest.approx(36.0)
