"""Token-level scanning of SystemC TLM target sources.

Finds the payload record carried by the transport functions, infers the
direction of every field from how the transport bodies access it, and
re-emits the record as a self-contained header. Comments and string
literals are blanked before any matching so they cannot produce false
hits; no preprocessing or semantic analysis beyond that is attempted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import (
    AllFieldsOneDirection,
    AmbiguousPayload,
    Diagnostic,
    NoPayloadRecord,
    NoTransportFunction,
    UnsupportedField,
)

_HEADER_EXTS = {".h", ".hh", ".hpp", ".hxx"}
_IMPL_EXTS = {".cpp", ".cc", ".cxx", ".c"}

_COMMENT_STRING_RE = re.compile(
    r"//[^\n]*"
    r"|/\*.*?\*/"
    r'|"(?:\\.|[^"\\\n])*"'
    r"|'(?:\\.|[^'\\\n])*'",
    re.S,
)

_RECORD_RE = re.compile(r"\b(struct|class)\s+([A-Za-z_]\w*)\s*(:[^{;]*)?\{")
_ENUM_RE = re.compile(
    r"\benum\s+(?:class\s+|struct\s+)?([A-Za-z_]\w*)\s*(?::\s*[\w:\s]+?)?\{([^{}]*)\}"
)
_TRANSPORT_RE = re.compile(r"\b(b_transport|nb_transport_fw)\b\s*\(")

_DECL_RE = re.compile(
    r"^(?P<type>(?:[A-Za-z_]\w*\s*::\s*)*[A-Za-z_]\w*(?:\s*<\s*\d+\s*>)?)"
    r"\s+(?P<rest>[^()]+)$",
    re.S,
)
_DECLARATOR_RE = re.compile(r"^(?P<name>[A-Za-z_]\w*)\s*(?:=\s*(?P<init>.+))?$", re.S)
_TEMPLATED_RE = re.compile(r"^(?P<base>[\w:]+)\s*<\s*(?P<width>\d+)\s*>$")

_C_CAST_RE = re.compile(r"\(\s*(?:const\s+)?([A-Za-z_]\w*)\s*\*+\s*\)")
_CPP_CAST_RE = re.compile(r"cast\s*<\s*(?:const\s+)?([A-Za-z_]\w*)\s*\*+\s*>")

_COMPOUND_ASSIGN_RE = re.compile(r"^(?:\+|-|\*|/|%|&|\||\^|<<|>>)=")

# Widthless tokens the downstream type mapper understands; anything else that
# is not a scanned enum tag is carried through verbatim and rejected there.
_SCALAR_TOKENS = {
    "sc_logic", "sc_dt::sc_logic",
    "bool",
    "float", "double",
    "sc_float", "sc_double",
    "sc_dt::sc_float", "sc_dt::sc_double",
}

_SC_LOGIC_XZ_RE = re.compile(r"\bSC_LOGIC_[XZ]\b|'[XZxz]'")


@dataclass(frozen=True)
class SourceUnit:
    """One scanned source file: raw text plus header/implementation kind."""

    path: str
    text: str
    kind: str  # "header" | "implementation"

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError(f"source unit {self.path!r} is empty")
        if self.kind not in ("header", "implementation"):
            raise ValueError(f"bad source unit kind {self.kind!r}")

    @classmethod
    def from_path(cls, path) -> "SourceUnit":
        p = str(path)
        ext = p[p.rfind("."):].lower() if "." in p else ""
        kind = "header" if ext in _HEADER_EXTS else "implementation"
        with open(p, encoding="utf-8") as fh:
            return cls(path=p, text=fh.read(), kind=kind)


@dataclass(frozen=True)
class PayloadField:
    name: str
    source_type: str
    bit_width: int | None
    declaration_index: int
    direction: str | None = None  # "input" | "output" once inferred


@dataclass(frozen=True)
class PayloadSpec:
    """The scanned payload record, fields in declaration order."""

    record_name: str
    fields: tuple[PayloadField, ...]
    header_origin: str
    enum_decls: tuple[tuple[str, str], ...] = ()  # (tag, enumerator list text)

    def __post_init__(self) -> None:
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate field names in record {self.record_name!r}")

    def inputs(self) -> tuple[PayloadField, ...]:
        return tuple(f for f in self.fields if f.direction == "input")

    def outputs(self) -> tuple[PayloadField, ...]:
        return tuple(f for f in self.fields if f.direction == "output")


@dataclass(frozen=True)
class TransportSurface:
    """Which TLM transport entry points exist, and their body text."""

    has_blocking: bool
    has_nonblocking: bool
    function_bodies: dict[str, str] = field(default_factory=dict)
    module_name: str | None = None  # sc_module owning the transport, if unique

    def combined_body(self) -> str:
        return "\n".join(self.function_bodies.values())


def strip_comments_and_strings(text: str) -> str:
    """Blank comments and string/char literals, preserving offsets and newlines."""

    def blank(m: re.Match) -> str:
        return "".join(c if c == "\n" else " " for c in m.group(0))

    return _COMMENT_STRING_RE.sub(blank, text)


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _match_brace(text: str, open_idx: int) -> int:
    """Index just past the brace matching text[open_idx] == '{'."""
    depth = 0
    for i in range(open_idx, len(text)):
        c = text[i]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    raise ValueError("unbalanced braces")


def _normalize_type(token: str) -> str:
    token = re.sub(r"\s*::\s*", "::", token.strip())
    m = _TEMPLATED_RE.match(token)
    if m:
        return f"{m.group('base')}<{m.group('width')}>"
    return re.sub(r"\s+", " ", token)


@dataclass(frozen=True)
class _RawRecord:
    name: str
    body: str
    unit_path: str
    offset: int
    end: int
    is_module: bool  # derives from sc_module; never a payload candidate


@dataclass(frozen=True)
class _RawField:
    name: str
    source_type: str
    bit_width: int | None
    initializer: str | None
    bad: str | None  # reason this declaration is rejected, if any


def _find_records(text: str, unit_path: str = "<memory>") -> list[_RawRecord]:
    out = []
    for m in _RECORD_RE.finditer(text):
        base = m.group(3) or ""
        end = _match_brace(text, m.end() - 1)
        out.append(
            _RawRecord(
                name=m.group(2),
                body=text[m.end():end - 1],
                unit_path=unit_path,
                offset=m.start(),
                end=end,
                is_module="sc_module" in base,
            )
        )
    return out


def _find_enums(text: str) -> dict[str, str]:
    out = {}
    for m in _ENUM_RE.finditer(text):
        body = " ".join(part.strip() for part in m.group(2).split("\n"))
        out[m.group(1)] = re.sub(r"\s+", " ", body).strip().rstrip(",")
    return out


def _parse_record_fields(body: str, enums: dict[str, str]) -> list[_RawField]:
    fields: list[_RawField] = []
    for stmt in body.split(";"):
        stmt = stmt.strip()
        if not stmt:
            continue
        if re.search(r"\b(struct|class|union)\b", stmt):
            fields.append(_RawField("", stmt, None, None, "nested record"))
            continue
        if "(" in stmt:
            # member function or constructor-style init; not a data field
            continue
        if "[" in stmt:
            fields.append(_RawField("", stmt, None, None, "array field"))
            continue
        m = _DECL_RE.match(stmt)
        if not m:
            continue
        type_tok = _normalize_type(m.group("type"))
        for declarator in m.group("rest").split(","):
            dm = _DECLARATOR_RE.match(declarator.strip())
            if not dm:
                continue
            width = None
            tm = _TEMPLATED_RE.match(type_tok)
            if tm:
                width = int(tm.group("width"))
            source_type = type_tok
            bare = type_tok.replace("sc_dt::", "")
            if width is None and type_tok not in _SCALAR_TOKENS and bare in enums:
                source_type = f"enum {bare}"
            fields.append(
                _RawField(dm.group("name"), source_type, width, dm.group("init"), None)
            )
    return fields


def _find_transport_bodies(text: str) -> dict[str, list[tuple[str, int]]]:
    bodies: dict[str, list[tuple[str, int]]] = {}
    for m in _TRANSPORT_RE.finditer(text):
        name = m.group(1)
        # balance the parameter list
        depth = 0
        i = m.end() - 1
        while i < len(text):
            if text[i] == "(":
                depth += 1
            elif text[i] == ")":
                depth -= 1
                if depth == 0:
                    break
            i += 1
        # between ')' and '{' only qualifiers may appear; ';' means declaration
        j = i + 1
        while j < len(text) and (text[j].isspace() or text[j].isalnum() or text[j] == "_"):
            j += 1
        if j >= len(text) or text[j] != "{":
            continue
        end = _match_brace(text, j)
        bodies.setdefault(name, []).append((text[j + 1:end - 1], m.start()))
    return bodies


_QUALIFIER_RE = re.compile(r"([A-Za-z_]\w*)\s*::\s*$")


def _enclosing_module(
    records: list[_RawRecord], text: str, offset: int
) -> str | None:
    """Module owning a transport definition: in-class span, else Name:: prefix."""
    for r in records:
        if r.is_module and r.offset < offset < r.end:
            return r.name
    m = _QUALIFIER_RE.search(text, 0, offset)
    if m and any(r.name == m.group(1) and r.is_module for r in records):
        return m.group(1)
    return None


def _cast_targets(body: str) -> set[str]:
    if "get_data_ptr" not in body and "set_data_ptr" not in body:
        return set()
    names = {m.group(1) for m in _C_CAST_RE.finditer(body)}
    names |= {m.group(1) for m in _CPP_CAST_RE.finditer(body)}
    return names


def _field_accesses(body: str, field_name: str) -> list[tuple[int, bool]]:
    """(offset, is_write) for each member access to field_name in body."""
    out = []
    for m in re.finditer(r"(?:\.|->)\s*%s\b" % re.escape(field_name), body):
        rest = body[m.end():].lstrip()
        before = body[:m.start()].rstrip()
        write = False
        if rest.startswith("=") and not rest.startswith("=="):
            write = True
        elif _COMPOUND_ASSIGN_RE.match(rest):
            write = True
        elif rest.startswith("++") or rest.startswith("--"):
            write = True
        elif before.endswith("++") or before.endswith("--"):
            write = True
        out.append((m.start(), write))
    return out


def scan_sources(
    units: list[SourceUnit],
    record_hint: str | None = None,
    diagnostics: list[Diagnostic] | None = None,
) -> tuple[PayloadSpec, TransportSurface]:
    """Locate the payload record and the transport functions.

    Selection without a hint: the record cast from get_data_ptr/set_data_ptr
    inside a transport body wins; otherwise the single record whose fields the
    bodies touch. Any remaining tie requires record_hint.
    """
    if not units:
        raise NoPayloadRecord("no source units given")

    stripped = {u.path: strip_comments_and_strings(u.text) for u in units}

    records: list[_RawRecord] = []
    enums: dict[str, str] = {}
    bodies: dict[str, list[str]] = {}
    module_names: set[str] = set()
    for u in units:
        text = stripped[u.path]
        unit_records = _find_records(text, u.path)
        records.extend(unit_records)
        enums.update(_find_enums(text))
        for name, found in _find_transport_bodies(text).items():
            for body, offset in found:
                bodies.setdefault(name, []).append(body)
                owner = _enclosing_module(unit_records, text, offset)
                if owner is not None:
                    module_names.add(owner)

    if not bodies:
        raise NoTransportFunction(
            "no b_transport or nb_transport_fw definition found in "
            + ", ".join(u.path for u in units)
        )
    surface = TransportSurface(
        has_blocking="b_transport" in bodies,
        has_nonblocking="nb_transport_fw" in bodies,
        function_bodies={name: "\n".join(bs) for name, bs in bodies.items()},
        module_name=module_names.pop() if len(module_names) == 1 else None,
    )
    combined = surface.combined_body()

    candidates = [r for r in records if not r.is_module]
    if record_hint is not None:
        chosen = [r for r in candidates if r.name == record_hint]
        if not chosen:
            raise NoPayloadRecord(f"no record named {record_hint!r} in the given sources")
        selected = chosen[0]
    else:
        cast_names = _cast_targets(combined)
        by_cast = [r for r in candidates if r.name in cast_names]
        if len(by_cast) == 1:
            selected = by_cast[0]
        elif len(by_cast) > 1:
            raise AmbiguousPayload(
                "multiple records cast from the transaction data pointer: "
                + ", ".join(sorted(r.name for r in by_cast))
                + "; pass a record hint"
            )
        else:
            referenced = [
                r for r in candidates
                if any(
                    _field_accesses(combined, f.name)
                    for f in _parse_record_fields(r.body, enums)
                    if f.bad is None
                )
            ]
            if len(referenced) == 1:
                selected = referenced[0]
            elif not referenced:
                raise NoPayloadRecord(
                    "no record is referenced by the transport bodies"
                )
            else:
                raise AmbiguousPayload(
                    "multiple records referenced by the transport bodies: "
                    + ", ".join(sorted(r.name for r in referenced))
                    + "; pass a record hint"
                )

    raw_fields = _parse_record_fields(selected.body, enums)
    unit_text = stripped[selected.unit_path]
    line, col = _line_col(unit_text, selected.offset)
    for rf in raw_fields:
        if rf.bad is not None:
            raise UnsupportedField(
                f"{selected.unit_path}:{line}: record {selected.name!r} "
                f"contains a {rf.bad} ({rf.source_type.strip()!r}); "
                "only flat records of scalar fields are supported"
            )
        if rf.initializer and _SC_LOGIC_XZ_RE.search(rf.initializer):
            if diagnostics is not None:
                diagnostics.append(
                    Diagnostic(
                        "warning",
                        f"field {rf.name!r}: logic value 'X'/'Z' has no FMI "
                        "Bool equivalent; collapsed to false",
                        path=selected.unit_path,
                        line=line,
                    )
                )

    used_enums = tuple(
        (tag, enums[tag])
        for tag in sorted({f.source_type[5:] for f in raw_fields
                           if f.source_type.startswith("enum ")})
    )
    spec = PayloadSpec(
        record_name=selected.name,
        fields=tuple(
            PayloadField(rf.name, rf.source_type, rf.bit_width, i)
            for i, rf in enumerate(raw_fields)
        ),
        header_origin=selected.unit_path,
        enum_decls=used_enums,
    )
    return spec, surface


def infer_directions(
    spec: PayloadSpec,
    surface: TransportSurface,
    diagnostics: list[Diagnostic] | None = None,
) -> PayloadSpec:
    """Classify each field: assigned anywhere in a transport body means output,
    read-only means input. A field both read and written is an output
    (write wins). Unreferenced fields are dropped with a warning."""
    body = surface.combined_body()
    kept: list[PayloadField] = []
    for f in spec.fields:
        accesses = _field_accesses(body, f.name)
        if not accesses:
            if diagnostics is not None:
                diagnostics.append(
                    Diagnostic(
                        "warning",
                        f"field {f.name!r} of record {spec.record_name!r} is never "
                        "referenced by a transport body; excluded from the FMI "
                        "interface",
                        path=spec.header_origin,
                    )
                )
            continue
        written = any(w for _, w in accesses)
        kept.append(replace(f, direction="output" if written else "input"))

    inferred = replace(
        spec,
        fields=tuple(
            replace(f, declaration_index=i) for i, f in enumerate(kept)
        ),
    )
    if not inferred.inputs() or not inferred.outputs():
        have = sorted({f.direction for f in inferred.fields if f.direction})
        raise AllFieldsOneDirection(
            f"record {spec.record_name!r} needs at least one input and one "
            f"output field after direction inference (got {have or 'none'})"
        )
    return inferred


def extract_header(spec: PayloadSpec) -> str:
    """Emit a self-contained header declaring exactly the payload record.

    Output is deterministic and re-scans to the same field list; enum
    declarations used by the fields are reproduced so the header stands alone.
    """
    guard = f"{spec.record_name.upper()}_H"
    lines = [f"#ifndef {guard}", f"#define {guard}", "", "#include <systemc>", ""]
    for tag, body in spec.enum_decls:
        lines.append(f"enum {tag} {{ {body} }};")
    if spec.enum_decls:
        lines.append("")
    lines.append(f"struct {spec.record_name} {{")
    for f in spec.fields:
        decl_type = f.source_type[5:] if f.source_type.startswith("enum ") else f.source_type
        lines.append(f"    {decl_type} {f.name};")
    lines.append("};")
    lines.append("")
    lines.append(f"#endif  /* {guard} */")
    return "\n".join(lines) + "\n"
