"""The fixture design registry: real SystemC TLM targets plus the oracle
tables that the scanner is expected to reproduce field for field."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

_DESIGN_ROOT = Path(__file__).parent / "designs"


@dataclass(frozen=True)
class FixtureDesign:
    """One compilable target design and what scanning it must yield."""

    name: str
    sources: tuple[Path, ...]
    transport: str  # "blocking" | "nonblocking"
    record_name: str
    module_name: str
    # (field name, source type, direction) in declaration order
    expected_fields: tuple[tuple[str, str, str], ...]
    step_size: str = "0.01"

    def implementation_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.sources if p.suffix == ".cpp")


def _design(name: str, files: tuple[str, ...], **kwargs) -> FixtureDesign:
    return FixtureDesign(
        name=name,
        sources=tuple(_DESIGN_ROOT / name / f for f in files),
        **kwargs,
    )


DESIGNS: dict[str, FixtureDesign] = {
    design.name: design
    for design in (
        _design(
            "echo",
            ("payload.h", "target.cpp"),
            transport="blocking",
            record_name="payload",
            module_name="echo_target",
            expected_fields=(
                ("data_in", "sc_dt::sc_int<32>", "input"),
                ("data_out", "sc_dt::sc_int<32>", "output"),
            ),
        ),
        _design(
            "echo_nb",
            ("payload.h", "target_nb.cpp"),
            transport="nonblocking",
            record_name="payload",
            module_name="echo_target_nb",
            expected_fields=(
                ("data_in", "sc_dt::sc_int<32>", "input"),
                ("data_out", "sc_dt::sc_int<32>", "output"),
            ),
        ),
        _design(
            "i2c",
            ("i2c_payload.h", "i2c_target.cpp"),
            transport="blocking",
            record_name="i2c_request",
            module_name="i2c_bus",
            expected_fields=(
                ("start", "bool", "input"),
                ("write", "bool", "input"),
                ("ack", "bool", "output"),
                ("wdata", "sc_dt::sc_uint<8>", "input"),
                ("rdata", "sc_dt::sc_uint<8>", "output"),
                ("target", "enum i2c_target_t", "input"),
                ("phase", "enum i2c_phase_t", "output"),
            ),
        ),
        _design(
            "ecc",
            ("ecc_payload.h", "ecc_target.cpp"),
            transport="blocking",
            record_name="ecc_frame",
            module_name="ecc_unit",
            expected_fields=(
                ("enable", "sc_dt::sc_logic", "input"),
                ("mode_word", "sc_dt::sc_logic", "input"),
                ("check_mode", "sc_dt::sc_logic", "input"),
                ("parity_in", "sc_dt::sc_logic", "input"),
                ("parity_out", "sc_dt::sc_logic", "output"),
                ("error_flag", "sc_dt::sc_logic", "output"),
                ("done", "sc_dt::sc_logic", "output"),
                ("data_in", "sc_dt::sc_bv<16>", "input"),
                ("data_out", "sc_dt::sc_bv<16>", "output"),
                ("status", "sc_dt::sc_bv<8>", "output"),
            ),
        ),
    )
}
