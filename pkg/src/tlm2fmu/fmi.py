"""SystemC-to-FMI type mapping and the FMI 3.0 model description XML.

The supported description subset is exactly what the generator needs
(scalar variables, one CoSimulation element, default experiment); parsing
is lenient about extra attributes so third-party descriptions load.
"""

from __future__ import annotations

import hashlib
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from xml.sax.saxutils import quoteattr

from .errors import (
    Diagnostic,
    DuplicateValueReference,
    MalformedXml,
    TypeMismatch,
    UnsupportedFmiVersion,
    UnsupportedType,
)
from .scan import PayloadSpec

FMI_VERSION = "3.0"


class FmiTag(Enum):
    """FMI 3.0 variable type tags; values are the XML element names."""

    BOOL = "Boolean"
    BINARY = "Binary"
    INT8 = "Int8"
    UINT8 = "UInt8"
    INT16 = "Int16"
    UINT16 = "UInt16"
    INT32 = "Int32"
    UINT32 = "UInt32"
    INT64 = "Int64"
    UINT64 = "UInt64"
    FLOAT32 = "Float32"
    FLOAT64 = "Float64"

    @property
    def c_name(self) -> str:
        return "fmi3" + self.value

    @property
    def is_integer(self) -> bool:
        return self in _INT_TAGS

    @property
    def integer_range(self) -> tuple[int, int]:
        return _INT_RANGES[self]


_INT_TAGS = {
    FmiTag.INT8, FmiTag.UINT8, FmiTag.INT16, FmiTag.UINT16,
    FmiTag.INT32, FmiTag.UINT32, FmiTag.INT64, FmiTag.UINT64,
}
_INT_RANGES = {
    FmiTag.INT8: (-(2 ** 7), 2 ** 7 - 1),
    FmiTag.UINT8: (0, 2 ** 8 - 1),
    FmiTag.INT16: (-(2 ** 15), 2 ** 15 - 1),
    FmiTag.UINT16: (0, 2 ** 16 - 1),
    FmiTag.INT32: (-(2 ** 31), 2 ** 31 - 1),
    FmiTag.UINT32: (0, 2 ** 32 - 1),
    FmiTag.INT64: (-(2 ** 63), 2 ** 63 - 1),
    FmiTag.UINT64: (0, 2 ** 64 - 1),
}

_SIGNED_BUCKETS = [(8, FmiTag.INT8), (16, FmiTag.INT16), (32, FmiTag.INT32), (64, FmiTag.INT64)]
_UNSIGNED_BUCKETS = [(8, FmiTag.UINT8), (16, FmiTag.UINT16), (32, FmiTag.UINT32), (64, FmiTag.UINT64)]

CAUSALITIES = ("input", "output", "parameter", "independent", "local")


@dataclass(frozen=True)
class FmiType:
    tag: FmiTag
    binary_size_bytes: int | None = None

    def __post_init__(self) -> None:
        if (self.tag is FmiTag.BINARY) != (self.binary_size_bytes is not None):
            raise ValueError("binary_size_bytes is present iff tag is Binary")
        if self.binary_size_bytes is not None and self.binary_size_bytes <= 0:
            raise ValueError("binary_size_bytes must be positive")

    def __str__(self) -> str:
        if self.tag is FmiTag.BINARY:
            return f"Binary[{self.binary_size_bytes}B]"
        return self.tag.value


@dataclass(frozen=True)
class FmiVariable:
    name: str
    value_reference: int
    fmi_type: FmiType
    causality: str
    start: str | None = None

    def __post_init__(self) -> None:
        if self.value_reference <= 0:
            raise ValueError("value references are positive")
        if self.causality not in CAUSALITIES:
            raise ValueError(f"unknown causality {self.causality!r}")


@dataclass(frozen=True)
class ModelDescription:
    model_name: str
    instantiation_token: str
    variables: tuple[FmiVariable, ...]
    default_step_size: str | None = None
    fmi_version: str = FMI_VERSION

    def __post_init__(self) -> None:
        seen = set()
        for v in self.variables:
            if v.value_reference in seen:
                raise DuplicateValueReference(
                    f"value reference {v.value_reference} is used twice"
                )
            seen.add(v.value_reference)

    def variable(self, name: str) -> FmiVariable | None:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def by_causality(self, causality: str) -> tuple[FmiVariable, ...]:
        return tuple(v for v in self.variables if v.causality == causality)


_WIDTH_TOKEN_RE = re.compile(r"^(?P<base>[A-Za-z_][\w:]*)<(?P<width>\d+)>$")

_REJECTED_TOKENS = {
    "sc_bigint", "sc_biguint", "sc_fixed", "sc_ufixed", "sc_fix", "sc_ufix",
    "sc_lv", "sc_signal", "sc_time",
}


def _bucket(width: int, buckets) -> FmiTag:
    for limit, tag in buckets:
        if width <= limit:
            return tag
    raise UnsupportedType(f"bit width {width} exceeds 64")


def map_type(source_type: str, bit_width: int | None = None) -> FmiType:
    """Map a SystemC type token to its FMI bucket.

    Integer widths bucket at 8/16/32/64; sc_bv<N> becomes Binary of
    ceil(N/8) octets; enum-typed fields ride on Int32.
    """
    token = re.sub(r"\s+", "", source_type)
    if token.startswith("enum") and source_type.strip().startswith("enum "):
        return FmiType(FmiTag.INT32)
    token = token.replace("sc_dt::", "")

    width = bit_width
    m = _WIDTH_TOKEN_RE.match(token)
    if m:
        token = m.group("base")
        width = int(m.group("width")) if width is None else width

    if token in _REJECTED_TOKENS:
        raise UnsupportedType(f"no FMI mapping for {source_type.strip()!r}")

    if token in ("sc_logic", "bool"):
        return FmiType(FmiTag.BOOL)
    if token in ("float", "sc_float"):
        return FmiType(FmiTag.FLOAT32)
    if token in ("double", "sc_double"):
        return FmiType(FmiTag.FLOAT64)

    if token in ("sc_int", "sc_uint", "sc_bv"):
        if width is None or width < 1:
            raise UnsupportedType(
                f"{source_type.strip()!r} needs a positive bit width"
            )
        if token == "sc_bv":
            if width > 64:
                raise UnsupportedType(f"sc_bv width {width} exceeds 64")
            return FmiType(FmiTag.BINARY, binary_size_bytes=(width + 7) // 8)
        buckets = _SIGNED_BUCKETS if token == "sc_int" else _UNSIGNED_BUCKETS
        return FmiType(_bucket(width, buckets))

    raise UnsupportedType(f"no FMI mapping for {source_type.strip()!r}")


def default_start(fmi_type: FmiType) -> str:
    if fmi_type.tag is FmiTag.BOOL:
        return "false"
    if fmi_type.tag is FmiTag.BINARY:
        return "00" * fmi_type.binary_size_bytes
    return "0"


def parse_start(fmi_type: FmiType, text: str):
    """Typed Python value for a start literal (Booleans, hex Binary, numbers)."""
    tag = fmi_type.tag
    if tag is FmiTag.BOOL:
        if text in ("true", "1"):
            return True
        if text in ("false", "0"):
            return False
        raise ValueError(f"not a Boolean literal: {text!r}")
    if tag is FmiTag.BINARY:
        data = bytes.fromhex(text)
        if len(data) != fmi_type.binary_size_bytes:
            raise ValueError(
                f"Binary literal {text!r} is not {fmi_type.binary_size_bytes} bytes"
            )
        return data
    if tag.is_integer:
        value = int(text)
        lo, hi = tag.integer_range
        if not lo <= value <= hi:
            raise ValueError(f"{value} out of range for {tag.value}")
        return value
    return float(text)


def coerce_value(fmi_type: FmiType, value):
    """Validate a Python value against an FMI type; returns the stored form."""
    tag = fmi_type.tag
    if tag is FmiTag.BOOL:
        if isinstance(value, bool):
            return value
    elif tag is FmiTag.BINARY:
        if isinstance(value, (bytes, bytearray)):
            if len(value) == fmi_type.binary_size_bytes:
                return bytes(value)
    elif tag.is_integer:
        if isinstance(value, int) and not isinstance(value, bool):
            lo, hi = tag.integer_range
            if lo <= value <= hi:
                return value
    else:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    raise TypeMismatch(f"{value!r} does not fit {fmi_type}")


def decimal_seconds(value) -> str:
    """Canonical decimal text for a step size given as str, int, float or Fraction."""
    if isinstance(value, str):
        value = Fraction(value)
    elif isinstance(value, float):
        value = Fraction(str(value))
    elif isinstance(value, int):
        value = Fraction(value)
    if not isinstance(value, Fraction):
        raise TypeError(f"cannot interpret {value!r} as seconds")
    sign = "-" if value < 0 else ""
    num, den = abs(value.numerator), value.denominator
    # exact decimal when the denominator is 2^a * 5^b, float repr otherwise
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return repr(float(value))
    scale = max(twos, fives)
    num *= 2 ** (scale - twos) * 5 ** (scale - fives)
    digits = str(num)
    if scale == 0:
        return sign + digits
    digits = digits.rjust(scale + 1, "0")
    return f"{sign}{digits[:-scale]}.{digits[-scale:]}"


def build_model_description(
    spec: PayloadSpec,
    model_name: str,
    step_size,
    start_overrides: dict[str, str] | None = None,
) -> ModelDescription:
    """One FMI variable per payload field, value references 1..N in
    declaration order; inputs get a start value ("0" unless overridden)."""
    overrides = start_overrides or {}
    if any(f.direction is None for f in spec.fields):
        raise ValueError("payload spec has not passed direction inference")
    variables = []
    for i, f in enumerate(spec.fields):
        ftype = map_type(f.source_type, f.bit_width)
        start = None
        if f.direction == "input":
            start = overrides.get(f.name, default_start(ftype))
        variables.append(
            FmiVariable(
                name=f"fmi_{f.name}",
                value_reference=i + 1,
                fmi_type=ftype,
                causality=f.direction,
                start=start,
            )
        )
    md = ModelDescription(
        model_name=model_name,
        instantiation_token="",
        variables=tuple(variables),
        default_step_size=decimal_seconds(step_size),
    )
    if not md.by_causality("input") or not md.by_causality("output"):
        raise ValueError("a model description needs at least one input and one output")
    return stamp_token(md)


def stamp_token(md: ModelDescription) -> ModelDescription:
    """Fill in the content-derived instantiation token."""
    return replace(md, instantiation_token=_content_token(md))


def _content_token(md: ModelDescription) -> str:
    digest = hashlib.sha256(_render_variables(md).encode("utf-8")).hexdigest()
    return f"{{{digest[:32]}}}"


def _render_variables(md: ModelDescription) -> str:
    lines = ["  <ModelVariables>"]
    for v in sorted(md.variables, key=lambda v: v.value_reference):
        attrs = [
            ("name", v.name),
            ("valueReference", str(v.value_reference)),
            ("causality", v.causality),
        ]
        if v.fmi_type.tag is FmiTag.BINARY:
            attrs.append(("maxSize", str(v.fmi_type.binary_size_bytes)))
        if v.start is not None:
            attrs.append(("start", v.start))
        rendered = " ".join(f"{k}={quoteattr(val)}" for k, val in attrs)
        lines.append(f"    <{v.fmi_type.tag.value} {rendered}/>")
    lines.append("  </ModelVariables>")
    return "\n".join(lines)


def emit_xml(md: ModelDescription) -> str:
    """Deterministic model description XML (fixed element and attribute order)."""
    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    root_attrs = " ".join(
        f"{k}={quoteattr(v)}"
        for k, v in (
            ("fmiVersion", md.fmi_version),
            ("modelName", md.model_name),
            ("instantiationToken", md.instantiation_token),
        )
    )
    out.append(f"<fmiModelDescription {root_attrs}>")
    out.append(f"  <CoSimulation modelIdentifier={quoteattr(md.model_name)}/>")
    if md.default_step_size is not None:
        out.append(f"  <DefaultExperiment stepSize={quoteattr(md.default_step_size)}/>")
    out.append(_render_variables(md))
    outputs = [v for v in md.variables if v.causality == "output"]
    out.append("  <ModelStructure>")
    for v in sorted(outputs, key=lambda v: v.value_reference):
        out.append(f'    <Output valueReference="{v.value_reference}"/>')
    out.append("  </ModelStructure>")
    out.append("</fmiModelDescription>")
    return "\n".join(out) + "\n"


_KNOWN_VAR_ATTRS = {"name", "valueReference", "causality", "start", "maxSize"}
_TAG_BY_ELEMENT = {t.value: t for t in FmiTag}
_TAG_BY_ELEMENT["Bool"] = FmiTag.BOOL  # tolerated spelling


def parse_xml(text: str, diagnostics: list[Diagnostic] | None = None) -> ModelDescription:
    """Inverse of emit_xml on the supported subset.

    Unknown attributes and unsupported variable elements are skipped with a
    warning so third-party descriptions still load.
    """

    def warn(msg: str) -> None:
        if diagnostics is not None:
            diagnostics.append(Diagnostic("warning", msg))

    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise MalformedXml(f"model description is not well-formed XML: {e}") from e
    if root.tag != "fmiModelDescription":
        raise MalformedXml(f"unexpected root element {root.tag!r}")
    version = root.get("fmiVersion")
    if version != FMI_VERSION:
        raise UnsupportedFmiVersion(
            f"fmiVersion {version!r} is not supported (need {FMI_VERSION!r})"
        )

    model_name = root.get("modelName", "")
    token = root.get("instantiationToken", "")

    step = None
    exp = root.find("DefaultExperiment")
    if exp is not None and exp.get("stepSize") is not None:
        step = exp.get("stepSize")

    variables = []
    seen_vrs: set[int] = set()
    mv = root.find("ModelVariables")
    for el in (mv if mv is not None else ()):
        tag = _TAG_BY_ELEMENT.get(el.tag)
        if tag is None:
            warn(f"variable element <{el.tag}> is outside the supported subset; skipped")
            continue
        for attr in el.attrib:
            if attr not in _KNOWN_VAR_ATTRS:
                warn(f"ignoring unknown attribute {attr!r} on variable {el.get('name')!r}")
        try:
            vr = int(el.get("valueReference", ""))
        except ValueError:
            raise MalformedXml(
                f"variable {el.get('name')!r} has a non-integer valueReference"
            )
        if vr in seen_vrs:
            raise DuplicateValueReference(f"value reference {vr} is used twice")
        seen_vrs.add(vr)
        causality = el.get("causality", "local")
        if causality not in CAUSALITIES:
            warn(f"causality {causality!r} treated as 'local'")
            causality = "local"
        size = None
        if tag is FmiTag.BINARY:
            size = int(el.get("maxSize", "1"))
        variables.append(
            FmiVariable(
                name=el.get("name", ""),
                value_reference=vr,
                fmi_type=FmiType(tag, binary_size_bytes=size),
                causality=causality,
                start=el.get("start"),
            )
        )

    return ModelDescription(
        model_name=model_name,
        instantiation_token=token,
        variables=tuple(variables),
        default_step_size=step,
    )
