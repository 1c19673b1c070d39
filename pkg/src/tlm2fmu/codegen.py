"""Template rendering of the FMU wrapper sources.

Produces the initiator module, the top level binding it to the wrapped
target, the FMI wrapper translation unit, the payload header, the model
description and a build script. Templates are plain text with placeholder
substitution; rendering is a pure function of the plan, so regenerating
from an identical plan yields byte-identical files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .fmi import FmiTag, FmiVariable, ModelDescription, build_model_description, emit_xml
from .scan import PayloadField, PayloadSpec, TransportSurface, extract_header

TRANSPORTS = ("blocking", "nonblocking")
BUILD_FLAVORS = ("shell_script", "cmake")

_IDENT_OK = re.compile(r"^[A-Za-z_]\w*$")
_TEMPLATED = re.compile(r"^(\w+)<(\d+)>$")

MANDATORY_ENTRY_POINTS = (
    "fmi3InstantiateCoSimulation",
    "fmi3EnterInitializationMode",
    "fmi3ExitInitializationMode",
    "fmi3DoStep",
    "fmi3FreeInstance",
)


@dataclass(frozen=True)
class WrapperPlan:
    """Everything generate() needs; a pure value object."""

    model_name: str
    target_module_name: str
    spec: PayloadSpec
    md: ModelDescription
    transport: str  # "blocking" | "nonblocking"
    default_step_size: str
    output_dir: str
    build_flavor: str = "shell_script"
    target_sources: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in (self.model_name, self.target_module_name):
            if not _IDENT_OK.match(name):
                raise ValueError(f"{name!r} is not a valid identifier")
        if self.transport not in TRANSPORTS:
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.build_flavor not in BUILD_FLAVORS:
            raise ValueError(f"unknown build flavor {self.build_flavor!r}")
        expected = [(f"fmi_{f.name}", f.direction) for f in self.spec.fields]
        got = [(v.name, v.causality) for v in self.md.variables]
        if expected != got:
            raise ValueError(
                "model description does not correspond to the payload spec"
            )


@dataclass(frozen=True)
class GeneratedTree:
    """Rendered files keyed by relative path, plus the exported symbols."""

    files: dict[str, str]
    entry_points: tuple[str, ...]


def choose_transport(surface: TransportSurface) -> str:
    # blocking preferred when the target offers both entry points
    return "blocking" if surface.has_blocking else "nonblocking"


def make_plan(
    spec: PayloadSpec,
    surface: TransportSurface,
    model_name: str,
    step_size,
    output_dir: str,
    target_module_name: str | None = None,
    build_flavor: str = "shell_script",
    target_sources: tuple[str, ...] = (),
    start_overrides: dict[str, str] | None = None,
) -> WrapperPlan:
    """Assemble a WrapperPlan from scan results and user settings."""
    module = target_module_name or surface.module_name
    if module is None:
        raise ConfigError(
            "target module name could not be inferred from the sources; "
            "set target_module in the configuration"
        )
    md = build_model_description(spec, model_name, step_size, start_overrides)
    return WrapperPlan(
        model_name=model_name,
        target_module_name=module,
        spec=spec,
        md=md,
        transport=choose_transport(surface),
        default_step_size=md.default_step_size,
        output_dir=str(output_dir),
        build_flavor=build_flavor,
        target_sources=tuple(str(s) for s in target_sources),
    )


# ---------------------------------------------------------------------------
# C++ type plumbing


def _base_and_width(source_type: str) -> tuple[str, int | None]:
    if source_type.startswith("enum "):
        return "enum", None
    token = source_type.replace("sc_dt::", "")
    m = _TEMPLATED.match(token)
    if m:
        return m.group(1), int(m.group(2))
    return token, None


def _cpp_type(f: PayloadField) -> str:
    if f.source_type.startswith("enum "):
        return f.source_type[5:]
    return f.source_type


def _input_expr(f: PayloadField, var: FmiVariable) -> str:
    """C++ expression converting the staged FMI member to the field's type."""
    member = f"fmu->{var.name}"
    base, width = _base_and_width(f.source_type)
    if base == "enum":
        return f"static_cast<{_cpp_type(f)}>({member})"
    if base == "sc_logic":
        return f"{member} ? sc_dt::SC_LOGIC_1 : sc_dt::SC_LOGIC_0"
    if base in ("sc_int", "sc_uint"):
        return f"{f.source_type}({member})"
    if base == "sc_bv":
        return f"bytes_to_bv<{width}>({member})"
    return member  # bool, float, double and friends pass through


def _output_stmt(f: PayloadField, var: FmiVariable) -> str:
    """C++ statement storing the retrieved field value into the FMI member."""
    member = f"fmu->{var.name}"
    temp = f"out_{f.name}"
    base, width = _base_and_width(f.source_type)
    if base == "enum":
        return f"{member} = static_cast<fmi3Int32>({temp});"
    if base == "sc_logic":
        return f"{member} = ({temp} == sc_dt::SC_LOGIC_1);"
    if base == "sc_int":
        return f"{member} = static_cast<{var.fmi_type.tag.c_name}>({temp}.to_int64());"
    if base == "sc_uint":
        return f"{member} = static_cast<{var.fmi_type.tag.c_name}>({temp}.to_uint64());"
    if base == "sc_bv":
        return f"bv_to_bytes<{width}>({temp}, {member});"
    return f"{member} = {temp};"


def _member_decl(f: PayloadField, var: FmiVariable) -> str:
    if var.fmi_type.tag is FmiTag.BINARY:
        return f"fmi3Byte {var.name}[{var.fmi_type.binary_size_bytes}];"
    return f"{var.fmi_type.tag.c_name} {var.name};"


def _pairs(plan: WrapperPlan) -> list[tuple[PayloadField, FmiVariable]]:
    return list(zip(plan.spec.fields, plan.md.variables))


def _inputs(plan: WrapperPlan) -> list[tuple[PayloadField, FmiVariable]]:
    return [(f, v) for f, v in _pairs(plan) if f.direction == "input"]


def _outputs(plan: WrapperPlan) -> list[tuple[PayloadField, FmiVariable]]:
    return [(f, v) for f, v in _pairs(plan) if f.direction == "output"]


# ---------------------------------------------------------------------------
# initiator


def render_initiator(plan: WrapperPlan) -> str:
    spec = plan.spec
    record = spec.record_name
    staged = "\n".join(
        f"    {_cpp_type(f)} staged_{f.name};" for f in spec.inputs()
    )
    received = "\n".join(
        f"    {_cpp_type(f)} received_{f.name};" for f in spec.outputs()
    )
    populate = "\n".join(
        f"            packet.{f.name} = staged_{f.name};" for f in spec.inputs()
    )
    latch = "\n".join(
        f"            received_{f.name} = packet.{f.name};" for f in spec.outputs()
    )

    if plan.transport == "blocking":
        extra_members = ""
        register_bw = ""
        bw_method = ""
        transact = """\
            tlm::tlm_generic_payload trans;
            sc_core::sc_time delay = sc_core::SC_ZERO_TIME;
            trans.set_command(tlm::TLM_WRITE_COMMAND);
            trans.set_address(0);
            trans.set_data_ptr(reinterpret_cast<unsigned char*>(&packet));
            trans.set_data_length(sizeof(packet));
            trans.set_response_status(tlm::TLM_INCOMPLETE_RESPONSE);
            initiator_socket->b_transport(trans, delay);"""
    else:
        extra_members = "\n    sc_core::sc_event response_arrived;"
        register_bw = (
            "\n        initiator_socket.register_nb_transport_bw("
            "this, &initiator::nb_transport_bw);"
        )
        bw_method = """

    tlm::tlm_sync_enum nb_transport_bw(tlm::tlm_generic_payload& trans,
                                       tlm::tlm_phase& phase,
                                       sc_core::sc_time& delay) {
        (void)trans;
        (void)delay;
        if (phase == tlm::BEGIN_RESP) {
            response_arrived.notify(sc_core::SC_ZERO_TIME);
            return tlm::TLM_COMPLETED;
        }
        return tlm::TLM_ACCEPTED;
    }"""
        transact = """\
            tlm::tlm_generic_payload trans;
            tlm::tlm_phase phase = tlm::BEGIN_REQ;
            sc_core::sc_time delay = sc_core::SC_ZERO_TIME;
            trans.set_command(tlm::TLM_WRITE_COMMAND);
            trans.set_address(0);
            trans.set_data_ptr(reinterpret_cast<unsigned char*>(&packet));
            trans.set_data_length(sizeof(packet));
            trans.set_response_status(tlm::TLM_INCOMPLETE_RESPONSE);
            tlm::tlm_sync_enum status =
                initiator_socket->nb_transport_fw(trans, phase, delay);
            if (!(status == tlm::TLM_UPDATED && phase == tlm::BEGIN_RESP)) {
                wait(response_arrived);
            }"""

    return f"""\
#ifndef INITIATOR_H
#define INITIATOR_H

#include <systemc>
#include <tlm>
#include <tlm_utils/simple_initiator_socket.h>

/* TLM initiator driving the wrapped target.  The wrapper stages the input
 * fields, calls send_data() and advances the kernel; the sending thread
 * performs the transaction and latches the output fields.  The payload
 * record ({record}) must be defined before this header is included. */
struct initiator : sc_core::sc_module {{
    tlm_utils::simple_initiator_socket<initiator> initiator_socket;
    sc_core::sc_event start_sending;
    sc_core::sc_event transfer_done;{extra_members}

    /* staged inputs */
{staged}
    /* latched outputs */
{received}

    {record} packet;

    SC_CTOR(initiator) : initiator_socket("initiator_socket") {{{register_bw}
        SC_THREAD(sending_thread);
    }}

    void send_data() {{
        start_sending.notify(sc_core::SC_ZERO_TIME);
    }}{bw_method}

    void sending_thread() {{
        for (;;) {{
            wait(start_sending);
{populate}
{transact}
{latch}
            transfer_done.notify(sc_core::SC_ZERO_TIME);
        }}
    }}
}};

#endif  /* INITIATOR_H */
"""


# ---------------------------------------------------------------------------
# top level


def render_top(plan: WrapperPlan) -> str:
    spec = plan.spec
    target = plan.target_module_name
    set_params = ", ".join(f"{_cpp_type(f)} {f.name}" for f in spec.inputs())
    set_body = "\n".join(
        f"        init->staged_{f.name} = {f.name};" for f in spec.inputs()
    )
    get_params = ", ".join(f"{_cpp_type(f)}& {f.name}" for f in spec.outputs())
    get_body = "\n".join(
        f"        {f.name} = init->received_{f.name};" for f in spec.outputs()
    )

    return f"""\
#ifndef TOP_H
#define TOP_H

#include <systemc>

#include "initiator.h"

/* Top level: instantiates the initiator and the wrapped {target} target and
 * binds their sockets.  The {target} definition must be in scope. */
struct Top : sc_core::sc_module {{
    initiator* init;
    {target}* root_;

    SC_CTOR(Top) {{
        init = new initiator("initiator");
        root_ = new {target}("root");
        init->initiator_socket.bind(root_->target_socket);
    }}

    ~Top() {{
        delete init;
        delete root_;
    }}

    void set_and_send({set_params}) {{
{set_body}
        init->send_data();
    }}

    void retrieve_result({get_params}) {{
{get_body}
    }}
}};

#endif  /* TOP_H */
"""


# ---------------------------------------------------------------------------
# FMI wrapper


_FMI_TYPEDEFS = """\
typedef void* fmi3Instance;
typedef void* fmi3InstanceEnvironment;
typedef unsigned int fmi3ValueReference;
typedef char fmi3Char;
typedef const fmi3Char* fmi3String;
typedef unsigned char fmi3Byte;
typedef const fmi3Byte* fmi3Binary;
typedef bool fmi3Boolean;
typedef float fmi3Float32;
typedef double fmi3Float64;
typedef int8_t fmi3Int8;
typedef uint8_t fmi3UInt8;
typedef int16_t fmi3Int16;
typedef uint16_t fmi3UInt16;
typedef int32_t fmi3Int32;
typedef uint32_t fmi3UInt32;
typedef int64_t fmi3Int64;
typedef uint64_t fmi3UInt64;

typedef enum { fmi3OK, fmi3Warning, fmi3Discard, fmi3Error, fmi3Fatal } fmi3Status;

typedef void (*fmi3LogMessageCallback)(fmi3InstanceEnvironment, fmi3Status,
                                       fmi3String, fmi3String);
typedef void (*fmi3IntermediateUpdateCallback)(fmi3InstanceEnvironment,
                                               fmi3Float64, fmi3Boolean,
                                               fmi3Boolean, fmi3Boolean,
                                               fmi3Boolean, fmi3Boolean*,
                                               fmi3Float64*);"""

_BV_HELPERS = """\

/* sc_bv<W> <-> FMI Binary octets, least significant bit of byte k holding
 * vector bit 8k. */
template <int W>
static sc_dt::sc_bv<W> bytes_to_bv(const fmi3Byte* bytes) {
    sc_dt::sc_bv<W> bv;
    for (int i = 0; i < W; ++i) {
        bv[i] = (bytes[i / 8] >> (i % 8)) & 1;
    }
    return bv;
}

template <int W>
static void bv_to_bytes(const sc_dt::sc_bv<W>& bv, fmi3Byte* bytes) {
    for (int i = 0; i < (W + 7) / 8; ++i) {
        bytes[i] = 0;
    }
    for (int i = 0; i < W; ++i) {
        if (bv[i].to_bool()) {
            bytes[i / 8] |= static_cast<fmi3Byte>(1u << (i % 8));
        }
    }
}
"""


def _start_literal_stmts(plan: WrapperPlan) -> list[str]:
    """Assignments for input start values that differ from all-zero."""
    out = []
    for f, v in _inputs(plan):
        start = v.start
        if start is None:
            continue
        tag = v.fmi_type.tag
        if tag is FmiTag.BOOL:
            if start in ("true", "1"):
                out.append(f"    fmu->{v.name} = true;")
        elif tag is FmiTag.BINARY:
            data = bytes.fromhex(start)
            for i, byte in enumerate(data):
                if byte:
                    out.append(f"    fmu->{v.name}[{i}] = 0x{byte:02x};")
        else:
            try:
                nonzero = float(start) != 0.0
            except ValueError:
                raise ValueError(
                    f"start value {start!r} for {v.name} is not numeric"
                )
            if nonzero:
                out.append(f"    fmu->{v.name} = {start};")
    return out


def _getter(plan: WrapperPlan, tag: FmiTag) -> str:
    model = plan.model_name
    ctype = tag.c_name
    pad = " " * len(f"fmi3Status fmi3Get{tag.value}(")
    cases = "\n".join(
        f"        case {v.value_reference}: values[i] = fmu->{v.name}; break;"
        for _, v in _pairs(plan)
        if v.fmi_type.tag is tag
    )
    return f"""\
fmi3Status fmi3Get{tag.value}(fmi3Instance instance,
{pad}const fmi3ValueReference valueReferences[],
{pad}size_t nValueReferences,
{pad}{ctype} values[], size_t nValues) {{
    {model}_fmu* fmu = static_cast<{model}_fmu*>(instance);
    (void)nValues;
    for (size_t i = 0; i < nValueReferences; ++i) {{
        switch (valueReferences[i]) {{
{cases}
        default: return fmi3Error;
        }}
    }}
    return fmi3OK;
}}"""


def _setter(plan: WrapperPlan, tag: FmiTag) -> str:
    model = plan.model_name
    ctype = tag.c_name
    pad = " " * len(f"fmi3Status fmi3Set{tag.value}(")
    cases = "\n".join(
        f"        case {v.value_reference}: fmu->{v.name} = values[i]; break;"
        for f, v in _inputs(plan)
        if v.fmi_type.tag is tag
    )
    return f"""\
fmi3Status fmi3Set{tag.value}(fmi3Instance instance,
{pad}const fmi3ValueReference valueReferences[],
{pad}size_t nValueReferences,
{pad}const {ctype} values[], size_t nValues) {{
    {model}_fmu* fmu = static_cast<{model}_fmu*>(instance);
    (void)nValues;
    for (size_t i = 0; i < nValueReferences; ++i) {{
        switch (valueReferences[i]) {{
{cases}
        default: return fmi3Error;  /* unknown or not an input */
        }}
    }}
    return fmi3OK;
}}"""


def _binary_getter(plan: WrapperPlan) -> str:
    model = plan.model_name
    cases = "\n".join(
        f"        case {v.value_reference}:\n"
        f"            values[i] = fmu->{v.name};\n"
        f"            valueSizes[i] = {v.fmi_type.binary_size_bytes};\n"
        f"            break;"
        for _, v in _pairs(plan)
        if v.fmi_type.tag is FmiTag.BINARY
    )
    return f"""\
fmi3Status fmi3GetBinary(fmi3Instance instance,
                         const fmi3ValueReference valueReferences[],
                         size_t nValueReferences,
                         size_t valueSizes[], fmi3Binary values[],
                         size_t nValues) {{
    {model}_fmu* fmu = static_cast<{model}_fmu*>(instance);
    (void)nValues;
    for (size_t i = 0; i < nValueReferences; ++i) {{
        switch (valueReferences[i]) {{
{cases}
        default: return fmi3Error;
        }}
    }}
    return fmi3OK;
}}"""


def _binary_setter(plan: WrapperPlan) -> str:
    model = plan.model_name
    cases = []
    for f, v in _inputs(plan):
        if v.fmi_type.tag is not FmiTag.BINARY:
            continue
        size = v.fmi_type.binary_size_bytes
        cases.append(
            f"        case {v.value_reference}:\n"
            f"            std::memcpy(fmu->{v.name}, values[i],\n"
            f"                        valueSizes[i] < {size} ? valueSizes[i] : {size});\n"
            f"            break;"
        )
    joined = "\n".join(cases)
    return f"""\
fmi3Status fmi3SetBinary(fmi3Instance instance,
                         const fmi3ValueReference valueReferences[],
                         size_t nValueReferences,
                         const size_t valueSizes[], const fmi3Binary values[],
                         size_t nValues) {{
    {model}_fmu* fmu = static_cast<{model}_fmu*>(instance);
    (void)nValues;
    for (size_t i = 0; i < nValueReferences; ++i) {{
        switch (valueReferences[i]) {{
{joined}
        default: return fmi3Error;  /* unknown or not an input */
        }}
    }}
    return fmi3OK;
}}"""


def _present_tags(plan: WrapperPlan) -> list[FmiTag]:
    present = {v.fmi_type.tag for v in plan.md.variables}
    return sorted(present, key=lambda t: t.value)


def entry_points(plan: WrapperPlan) -> tuple[str, ...]:
    typed = []
    for tag in _present_tags(plan):
        typed.append(f"fmi3Get{tag.value}")
        typed.append(f"fmi3Set{tag.value}")
    return MANDATORY_ENTRY_POINTS + tuple(typed)


def render_wrapper(plan: WrapperPlan) -> str:
    model = plan.model_name
    spec = plan.spec
    members = "\n".join(f"    {_member_decl(f, v)}" for f, v in _pairs(plan))
    has_binary = any(v.fmi_type.tag is FmiTag.BINARY for v in plan.md.variables)
    helpers = _BV_HELPERS if has_binary else ""

    includes = "\n".join(f'#include "{src}"' for src in plan.target_sources)
    if includes:
        includes = f"/* original target sources */\n{includes}\n"

    send_args = ",\n        ".join(_input_expr(f, v) for f, v in _inputs(plan))
    out_decls = "\n".join(
        f"    {_cpp_type(f)} out_{f.name};" for f in spec.outputs()
    )
    out_names = ", ".join(f"out_{f.name}" for f in spec.outputs())
    out_stores = "\n".join(f"    {_output_stmt(f, v)}" for f, v in _outputs(plan))
    start_stmts = "\n".join(_start_literal_stmts(plan))
    if start_stmts:
        start_stmts = f"\n{start_stmts}"

    typed_fns = []
    for tag in _present_tags(plan):
        if tag is FmiTag.BINARY:
            typed_fns.append(_binary_getter(plan))
            typed_fns.append(_binary_setter(plan))
        else:
            typed_fns.append(_getter(plan, tag))
            typed_fns.append(_setter(plan, tag))
    typed_block = "\n\n".join(typed_fns)

    return f"""\
/* FMI 3.0 Co-Simulation wrapper around the {plan.target_module_name} TLM
 * target.  Generated file; regenerating overwrites it. */

#include <cstdint>
#include <cstring>
#include <cstddef>

#include <systemc>
#include <tlm>

{includes}#include "top.h"

extern "C" {{

{_FMI_TYPEDEFS}

}}  /* extern "C" */

/* Wrapper record: top-level pointer, wrapper-local clock and one member per
 * FMI variable. */
struct {model}_fmu {{
    Top* top;
    double current_time;
{members}
}};
{helpers}
extern "C" {{

fmi3Instance fmi3InstantiateCoSimulation(
        fmi3String instanceName, fmi3String instantiationToken,
        fmi3String resourcePath, fmi3Boolean visible, fmi3Boolean loggingOn,
        fmi3Boolean eventModeUsed, fmi3Boolean earlyReturnAllowed,
        const fmi3ValueReference requiredIntermediateVariables[],
        size_t nRequiredIntermediateVariables,
        fmi3InstanceEnvironment instanceEnvironment,
        fmi3LogMessageCallback logMessage,
        fmi3IntermediateUpdateCallback intermediateUpdate) {{
    (void)instanceName;
    (void)instantiationToken;
    (void)resourcePath;
    (void)visible;
    (void)loggingOn;
    (void)eventModeUsed;
    (void)earlyReturnAllowed;
    (void)requiredIntermediateVariables;
    (void)nRequiredIntermediateVariables;
    (void)instanceEnvironment;
    (void)logMessage;
    (void)intermediateUpdate;
    {model}_fmu* fmu = new {model}_fmu();
    fmu->top = new Top("top");
    fmu->current_time = 0.0;{start_stmts}
    /* elaborate before the first doStep */
    sc_core::sc_start(sc_core::SC_ZERO_TIME);
    return fmu;
}}

fmi3Status fmi3EnterInitializationMode(fmi3Instance instance,
                                       fmi3Boolean toleranceDefined,
                                       fmi3Float64 tolerance,
                                       fmi3Float64 startTime,
                                       fmi3Boolean stopTimeDefined,
                                       fmi3Float64 stopTime) {{
    (void)toleranceDefined;
    (void)tolerance;
    (void)stopTimeDefined;
    (void)stopTime;
    {model}_fmu* fmu = static_cast<{model}_fmu*>(instance);
    fmu->current_time = startTime;
    return fmi3OK;
}}

fmi3Status fmi3ExitInitializationMode(fmi3Instance instance) {{
    (void)instance;
    return fmi3OK;
}}

fmi3Status fmi3DoStep(fmi3Instance instance,
                      fmi3Float64 currentCommunicationPoint,
                      fmi3Float64 communicationStepSize,
                      fmi3Boolean noSetFMUStatePriorToCurrentPoint,
                      fmi3Boolean* eventHandlingNeeded,
                      fmi3Boolean* terminateSimulation,
                      fmi3Boolean* earlyReturn,
                      fmi3Float64* lastSuccessfulTime) {{
    (void)currentCommunicationPoint;
    (void)noSetFMUStatePriorToCurrentPoint;
    {model}_fmu* fmu = static_cast<{model}_fmu*>(instance);
    fmu->top->set_and_send(
        {send_args});
    sc_core::sc_start(communicationStepSize, sc_core::SC_SEC);
{out_decls}
    fmu->top->retrieve_result({out_names});
{out_stores}
    double next_time;
    if (*earlyReturn) {{
        next_time = fmu->current_time + *lastSuccessfulTime;
    }} else {{
        next_time = fmu->current_time + communicationStepSize;
    }}
    fmu->current_time = next_time;
    *eventHandlingNeeded = false;
    *terminateSimulation = false;
    return fmi3OK;
}}

void fmi3FreeInstance(fmi3Instance instance) {{
    {model}_fmu* fmu = static_cast<{model}_fmu*>(instance);
    if (fmu == nullptr) {{
        return;
    }}
    delete fmu->top;
    delete fmu;
}}

{typed_block}

}}  /* extern "C" */
"""


# ---------------------------------------------------------------------------
# build scripts


def render_build(plan: WrapperPlan) -> str:
    # fmi_wrapper.cpp textually includes the target sources (they carry the
    # sc_module class definitions), so the build is a single translation unit.
    if plan.build_flavor == "shell_script":
        return f"""\
#!/bin/sh
# Compile the {plan.model_name} FMU shared library.  fmi_wrapper.cpp includes
# the original target sources, so it is the only translation unit.
# SYSTEMC_HOME must point at a SystemC installation; SYSTEMC_LIBDIR overrides
# the library subdirectory when it is not lib/.
set -eu

cd "$(dirname "$0")"
: "${{SYSTEMC_HOME:?set SYSTEMC_HOME to the SystemC installation prefix}}"
SYSTEMC_LIBDIR="${{SYSTEMC_LIBDIR:-$SYSTEMC_HOME/lib}}"
CXX="${{CXX:-g++}}"

$CXX -std=c++17 -O2 -fPIC -shared \\
    -I. -I"$SYSTEMC_HOME/include" \\
    fmi_wrapper.cpp \\
    -L"$SYSTEMC_LIBDIR" -Wl,-rpath,"$SYSTEMC_LIBDIR" \\
    -lsystemc -lpthread \\
    -o {plan.model_name}.so
"""
    sources = "\n".join(
        f"    {s}"
        for s in ("fmi_wrapper.cpp", "initiator.h", "top.h",
                  f"{plan.spec.record_name}.h") + plan.target_sources
    )
    included = "\n".join(f"    {s}" for s in plan.target_sources)
    header_only = (
        "set_source_files_properties(\n"
        f"{included}\n"
        "    PROPERTIES HEADER_FILE_ONLY ON\n"
        ")\n"
    ) if plan.target_sources else ""
    return f"""\
cmake_minimum_required(VERSION 3.16)
project({plan.model_name}_fmu CXX)

set(CMAKE_CXX_STANDARD 17)
set(CMAKE_CXX_STANDARD_REQUIRED ON)
set(CMAKE_POSITION_INDEPENDENT_CODE ON)

if(NOT DEFINED ENV{{SYSTEMC_HOME}})
    message(FATAL_ERROR "set SYSTEMC_HOME to the SystemC installation prefix")
endif()
set(SYSTEMC_HOME "$ENV{{SYSTEMC_HOME}}")
if(DEFINED ENV{{SYSTEMC_LIBDIR}})
    set(SYSTEMC_LIBDIR "$ENV{{SYSTEMC_LIBDIR}}")
else()
    set(SYSTEMC_LIBDIR "${{SYSTEMC_HOME}}/lib")
endif()

# The target sources are compiled through fmi_wrapper.cpp's includes; listing
# them header-only keeps dependency tracking without a second definition.
{header_only}add_library({plan.model_name} SHARED
{sources}
)
set_target_properties({plan.model_name} PROPERTIES PREFIX "")
target_include_directories({plan.model_name} PRIVATE
    "${{CMAKE_CURRENT_SOURCE_DIR}}" "${{SYSTEMC_HOME}}/include")
target_link_directories({plan.model_name} PRIVATE "${{SYSTEMC_LIBDIR}}")
target_link_libraries({plan.model_name} systemc pthread)
"""


# ---------------------------------------------------------------------------
# assembly


def generate(plan: WrapperPlan) -> GeneratedTree:
    """Render all artifacts for the plan; pure, so repeat calls agree."""
    build_name = "build.sh" if plan.build_flavor == "shell_script" else "CMakeLists.txt"
    files = {
        f"{plan.spec.record_name}.h": extract_header(plan.spec),
        "initiator.h": render_initiator(plan),
        "top.h": render_top(plan),
        "fmi_wrapper.cpp": render_wrapper(plan),
        "modelDescription.xml": emit_xml(plan.md),
        build_name: render_build(plan),
    }
    return GeneratedTree(files=files, entry_points=entry_points(plan))


def write_tree(tree: GeneratedTree, output_dir) -> list[str]:
    """Write the tree under output_dir (UTF-8, LF); returns written paths."""
    root = Path(output_dir)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for rel in sorted(tree.files):
        dest = root / rel
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(tree.files[rel])
        if rel.endswith(".sh"):
            dest.chmod(0o755)
        written.append(str(dest))
    return written
