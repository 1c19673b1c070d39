from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tlm2fmu.errors import (
    AllFieldsOneDirection,
    AmbiguousPayload,
    NoPayloadRecord,
    NoTransportFunction,
    UnsupportedField,
)
from tlm2fmu.scan import (
    SourceUnit,
    extract_header,
    infer_directions,
    scan_sources,
    strip_comments_and_strings,
)

FIXTURES = Path(__file__).parent / "fixtures"

# Hand-derived from the fixture sources: a field assigned anywhere in a
# transport body is an output, a field only read is an input.
I2C_DIRECTIONS = {
    "start": "input",
    "write": "input",
    "ack": "output",
    "wdata": "input",
    "rdata": "output",
    "target": "input",
    "phase": "output",
}
ECC_DIRECTIONS = {
    "enable": "input",
    "mode_word": "input",
    "check_mode": "input",
    "parity_in": "input",
    "parity_out": "output",
    "error_flag": "output",
    "done": "output",  # read then assigned: write wins
    "data_in": "input",
    "data_out": "output",
    "status": "output",
}


def _units(*relpaths: str) -> list[SourceUnit]:
    return [SourceUnit.from_path(FIXTURES / rel) for rel in relpaths]


def _unit(text: str, path: str = "mem.cpp") -> SourceUnit:
    kind = "header" if path.endswith(".h") else "implementation"
    return SourceUnit(path=path, text=text, kind=kind)


def _scan(units, hint=None, diags=None):
    spec, surface = scan_sources(units, record_hint=hint, diagnostics=diags)
    return infer_directions(spec, surface, diagnostics=diags), surface


# ---------------------------------------------------------------------------
# fixture corpora


def test_listing1_record_and_directions():
    spec, surface = _scan(_units("listing1/payload.h", "listing1/target.cpp"))
    assert spec.record_name == "payload"
    assert [(f.name, f.source_type, f.bit_width, f.direction) for f in spec.fields] == [
        ("data_in", "sc_dt::sc_int<32>", 32, "input"),
        ("data_out", "sc_dt::sc_int<32>", 32, "output"),
    ]
    assert surface.has_blocking and not surface.has_nonblocking


def test_listing1_nonblocking_variant():
    spec, surface = _scan(_units("listing1_nb/payload.h", "listing1_nb/target_nb.cpp"))
    assert spec.record_name == "payload"
    assert not surface.has_blocking and surface.has_nonblocking
    assert {f.name: f.direction for f in spec.fields} == {
        "data_in": "input",
        "data_out": "output",
    }


def test_i2c_direction_oracle():
    spec, _ = _scan(_units("i2c/i2c_payload.h", "i2c/i2c_target.cpp"))
    assert spec.record_name == "i2c_request"
    assert {f.name: f.direction for f in spec.fields} == I2C_DIRECTIONS
    # declaration order is preserved
    assert [f.name for f in spec.fields] == list(I2C_DIRECTIONS)


def test_i2c_enum_fields_carry_their_tag():
    spec, _ = _scan(_units("i2c/i2c_payload.h", "i2c/i2c_target.cpp"))
    by_name = {f.name: f for f in spec.fields}
    assert by_name["target"].source_type == "enum i2c_target_t"
    assert by_name["phase"].source_type == "enum i2c_phase_t"
    assert dict(spec.enum_decls)["i2c_phase_t"].startswith("PHASE_IDLE = 0")


def test_ecc_direction_oracle():
    spec, _ = _scan(_units("ecc/ecc_payload.h", "ecc/ecc_target.cpp"))
    assert spec.record_name == "ecc_frame"
    assert {f.name: f.direction for f in spec.fields} == ECC_DIRECTIONS
    assert len(spec.fields) == 10


def test_decoy_record_is_not_selected():
    """bus_stats is referenced by the bus model but never cast from the
    transaction data pointer, so the cast rule must pick i2c_request."""
    spec, _ = _scan(_units("i2c/i2c_payload.h", "i2c/i2c_target.cpp"))
    assert spec.record_name == "i2c_request"


def test_record_hint_overrides_selection():
    units = _units("i2c/i2c_payload.h", "i2c/i2c_target.cpp")
    spec, surface = scan_sources(units, record_hint="bus_stats")
    assert spec.record_name == "bus_stats"
    # both counters are assigned in the body, so inference has no input left
    with pytest.raises(AllFieldsOneDirection):
        infer_directions(spec, surface)


def test_unknown_hint_raises():
    units = _units("listing1/payload.h", "listing1/target.cpp")
    with pytest.raises(NoPayloadRecord):
        scan_sources(units, record_hint="no_such_record")


def test_header_only_corpus_has_no_transport():
    with pytest.raises(NoTransportFunction):
        scan_sources(_units("listing1/payload.h"))


# ---------------------------------------------------------------------------
# selection and inference corner cases (inline sources)

_ECHO_BODY = """
#include "p.h"
struct pkt { sc_dt::sc_int<16> a; sc_dt::sc_int<16> b; };
struct tgt : sc_core::sc_module {
    void b_transport(tlm::tlm_generic_payload& t, sc_core::sc_time& d) {
        pkt* p = reinterpret_cast<pkt*>(t.get_data_ptr());
        p->b = p->a;
    }
};
"""


def test_inline_echo_scans():
    spec, _ = _scan([_unit(_ECHO_BODY)])
    assert {f.name: f.direction for f in spec.fields} == {"a": "input", "b": "output"}


def test_two_cast_records_are_ambiguous():
    text = _ECHO_BODY.replace(
        "p->b = p->a;",
        "p->b = p->a; other* q = (other*) t.get_data_ptr(); q->x = 1;",
    ).replace("struct pkt", "struct other { sc_dt::sc_int<8> x; };\nstruct pkt")
    with pytest.raises(AmbiguousPayload):
        scan_sources([_unit(text)])


def test_no_referenced_record_raises():
    text = """
    struct tgt : sc_core::sc_module {
        void b_transport(tlm::tlm_generic_payload& t, sc_core::sc_time& d) {
            t.set_response_status(tlm::TLM_OK_RESPONSE);
        }
    };
    """
    with pytest.raises(NoPayloadRecord):
        scan_sources([_unit(text)])


def test_field_reference_fallback_without_cast():
    text = """
    struct pkt { sc_dt::sc_uint<8> cmd; sc_dt::sc_uint<8> reply; };
    struct tgt : sc_core::sc_module {
        void b_transport(tlm::tlm_generic_payload& t, sc_core::sc_time& d) {
            pkt p;
            p.reply = p.cmd;
        }
    };
    """
    spec, _ = _scan([_unit(text)])
    assert spec.record_name == "pkt"
    assert {f.name: f.direction for f in spec.fields} == {
        "cmd": "input",
        "reply": "output",
    }


def test_unreferenced_field_is_dropped_with_warning():
    text = _ECHO_BODY.replace(
        "sc_dt::sc_int<16> b;", "sc_dt::sc_int<16> b; sc_dt::sc_int<16> spare;"
    )
    diags: list = []
    spec, _ = _scan([_unit(text)], diags=diags)
    assert [f.name for f in spec.fields] == ["a", "b"]
    assert any("spare" in d.message for d in diags if d.severity == "warning")


def test_all_inputs_raises():
    text = _ECHO_BODY.replace("p->b = p->a;", "int v = p->a + p->b;")
    with pytest.raises(AllFieldsOneDirection):
        _scan([_unit(text)])


def test_compound_assignment_counts_as_write():
    text = _ECHO_BODY.replace("p->b = p->a;", "p->b += p->a;")
    spec, _ = _scan([_unit(text)])
    assert {f.name: f.direction for f in spec.fields} == {"a": "input", "b": "output"}


def test_increment_counts_as_write():
    text = _ECHO_BODY.replace("p->b = p->a;", "if (p->a) { p->b++; }")
    spec, _ = _scan([_unit(text)])
    assert {f.name: f.direction for f in spec.fields} == {"a": "input", "b": "output"}


def test_equality_comparison_is_a_read():
    text = _ECHO_BODY.replace("p->b = p->a;", "p->b = (p->a == 3);")
    spec, _ = _scan([_unit(text)])
    assert {f.name: f.direction for f in spec.fields} == {"a": "input", "b": "output"}


def test_accesses_in_comments_and_strings_do_not_count():
    text = _ECHO_BODY.replace(
        "p->b = p->a;",
        'p->b = p->a;\n        // p->a = 9;\n        const char* s = "p->a = 9;";',
    )
    spec, _ = _scan([_unit(text)])
    assert {f.name: f.direction for f in spec.fields} == {"a": "input", "b": "output"}


def test_array_field_is_rejected():
    text = _ECHO_BODY.replace("sc_dt::sc_int<16> b;", "sc_dt::sc_int<16> b[4];")
    with pytest.raises(UnsupportedField) as exc:
        _scan([_unit(text)])
    assert "array" in str(exc.value)


def test_nested_record_field_is_rejected():
    text = _ECHO_BODY.replace(
        "sc_dt::sc_int<16> b;", "struct { int x; } inner; sc_dt::sc_int<16> b;"
    )
    with pytest.raises(UnsupportedField):
        _scan([_unit(text)])


def test_xz_initializer_warns():
    text = """
    struct pkt {
        sc_dt::sc_logic flag = sc_dt::SC_LOGIC_X;
        sc_dt::sc_logic out;
    };
    struct tgt : sc_core::sc_module {
        void b_transport(tlm::tlm_generic_payload& t, sc_core::sc_time& d) {
            pkt* p = reinterpret_cast<pkt*>(t.get_data_ptr());
            p->out = p->flag;
        }
    };
    """
    diags: list = []
    _scan([_unit(text)], diags=diags)
    assert any("no FMI Bool equivalent" in d.message for d in diags)


def test_transport_owner_module_is_detected():
    _, surface = _scan(_units("i2c/i2c_payload.h", "i2c/i2c_target.cpp"))
    assert surface.module_name == "i2c_bus"
    _, surface = _scan(_units("listing1_nb/payload.h", "listing1_nb/target_nb.cpp"))
    assert surface.module_name == "echo_target_nb"


def test_out_of_class_transport_owner_via_qualifier():
    text = """
    struct pkt { sc_dt::sc_int<8> a; sc_dt::sc_int<8> b; };
    struct tgt : sc_core::sc_module {
        void b_transport(tlm::tlm_generic_payload& t, sc_core::sc_time& d);
    };
    void tgt::b_transport(tlm::tlm_generic_payload& t, sc_core::sc_time& d) {
        pkt* p = reinterpret_cast<pkt*>(t.get_data_ptr());
        p->b = p->a;
    }
    """
    spec, surface = _scan([_unit(text)])
    assert surface.module_name == "tgt"
    assert spec.record_name == "pkt"


def test_module_records_are_never_candidates():
    # tgt derives from sc_module and holds fields the body assigns; the
    # payload must still win even though no cast is present
    text = """
    struct pkt { sc_dt::sc_uint<8> cmd; sc_dt::sc_uint<8> reply; };
    struct tgt : public sc_core::sc_module {
        sc_dt::sc_uint<8> scratch;
        pkt p;
        void b_transport(tlm::tlm_generic_payload& t, sc_core::sc_time& d) {
            p.reply = p.cmd;
        }
    };
    """
    spec, _ = scan_sources([_unit(text)])
    assert spec.record_name == "pkt"


# ---------------------------------------------------------------------------
# header extraction


def test_extracted_header_rescans_identically():
    for corpus, impl in (
        (("listing1/payload.h", "listing1/target.cpp"), "listing1/target.cpp"),
        (("i2c/i2c_payload.h", "i2c/i2c_target.cpp"), "i2c/i2c_target.cpp"),
        (("ecc/ecc_payload.h", "ecc/ecc_target.cpp"), "ecc/ecc_target.cpp"),
    ):
        spec, _ = _scan(_units(*corpus))
        header = extract_header(spec)
        respec, _ = _scan([_unit(header, "re.h"), *_units(impl)])
        assert [(f.name, f.source_type, f.bit_width, f.direction) for f in respec.fields] \
            == [(f.name, f.source_type, f.bit_width, f.direction) for f in spec.fields]


def test_extracted_header_reproduces_enums():
    spec, _ = _scan(_units("i2c/i2c_payload.h", "i2c/i2c_target.cpp"))
    header = extract_header(spec)
    assert "enum i2c_target_t { TARGET_ALU = 0, TARGET_REG = 1 };" in header
    assert header.index("enum i2c_phase_t") < header.index("struct i2c_request")


def test_extracted_header_is_deterministic():
    a, _ = _scan(_units("ecc/ecc_payload.h", "ecc/ecc_target.cpp"))
    b, _ = _scan(_units("ecc/ecc_payload.h", "ecc/ecc_target.cpp"))
    assert extract_header(a) == extract_header(b)


# ---------------------------------------------------------------------------
# comment/string stripping


def test_strip_blanks_but_keeps_shape():
    src = 'int x; // set x\n/* multi\nline */ char* s = "a//b";\n'
    out = strip_comments_and_strings(src)
    assert len(out) == len(src)
    assert out.count("\n") == src.count("\n")
    assert "set x" not in out and "a//b" not in out
    assert "int x;" in out


@given(st.text(alphabet=st.sampled_from('ab/*"\'\\\n ;'), max_size=200))
def test_strip_preserves_length_and_newlines(src):
    out = strip_comments_and_strings(src)
    assert len(out) == len(src)
    assert [i for i, c in enumerate(out) if c == "\n"] == [
        i for i, c in enumerate(src) if c == "\n"
    ]


def test_source_unit_kind_from_extension(tmp_path):
    h = tmp_path / "x.hpp"
    h.write_text("struct a {};")
    c = tmp_path / "y.cc"
    c.write_text("int f() { return 0; }")
    assert SourceUnit.from_path(h).kind == "header"
    assert SourceUnit.from_path(c).kind == "implementation"
