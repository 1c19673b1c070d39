"""FMU archive assembly and validation.

An FMU is a zip file: ``modelDescription.xml`` at the root, one shared
library per platform under ``binaries/<platform-tuple>/``, optional
``resources/`` and ``documentation/`` payloads. Packing is deterministic
(fixed timestamps, fixed entry order) so identical inputs give
byte-identical archives.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from .codegen import GeneratedTree
from .errors import (
    Diagnostic,
    IoFailure,
    MissingModelDescription,
    NotAZipFile,
    ToolError,
)
from .fmi import parse_xml

PLATFORM_TUPLES = (
    "x86_64-linux",
    "aarch64-linux",
    "x86_64-windows",
    "x86_64-darwin",
    "aarch64-darwin",
)

_EXTENSIONS = {"linux": ".so", "windows": ".dll", "darwin": ".dylib"}

# fixed zip metadata so archives are reproducible
_EPOCH = (1980, 1, 1, 0, 0, 0)
_FILE_MODE = 0o644 << 16
_EXEC_MODE = 0o755 << 16


def library_extension(platform: str) -> str:
    """.so / .dll / .dylib for a platform tuple like x86_64-linux."""
    if platform not in PLATFORM_TUPLES:
        raise ValueError(f"unknown platform tuple {platform!r}")
    return _EXTENSIONS[platform.split("-", 1)[1]]


def host_platform() -> str:
    """Platform tuple of the running interpreter."""
    import platform as _platform

    machine = _platform.machine().lower()
    arch = "aarch64" if machine in ("arm64", "aarch64") else "x86_64"
    system = _platform.system().lower()
    osname = {"linux": "linux", "windows": "windows", "darwin": "darwin"}.get(
        system, "linux"
    )
    return f"{arch}-{osname}"


@dataclass(frozen=True)
class FmuArchive:
    """In-memory view of an FMU archive."""

    model_description: str
    binaries: dict[str, bytes] = field(default_factory=dict)
    resources: dict[str, bytes] = field(default_factory=dict)
    documentation: dict[str, bytes] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.model_description:
            raise MissingModelDescription("archive has no model description")
        for platform in self.binaries:
            if platform not in PLATFORM_TUPLES:
                raise ValueError(f"unknown platform tuple {platform!r}")


@dataclass(frozen=True)
class ValidationReport:
    archive_path: str
    entries: tuple[Diagnostic, ...]

    @property
    def errors(self) -> tuple[Diagnostic, ...]:
        return tuple(d for d in self.entries if d.severity == "error")

    @property
    def warnings(self) -> tuple[Diagnostic, ...]:
        return tuple(d for d in self.entries if d.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def exit_code(self) -> int:
        if self.errors:
            return 2
        if self.warnings:
            return 1
        return 0

    def render(self) -> str:
        lines = [f"validation of {self.archive_path}:"]
        lines.extend(f"  {d.render()}" for d in self.entries)
        verdict = "PASS" if self.ok else "FAIL"
        if self.ok and self.warnings:
            verdict = "PASS (with warnings)"
        lines.append(
            f"  {verdict}: {len(self.errors)} error(s), "
            f"{len(self.warnings)} warning(s)"
        )
        return "\n".join(lines)


def _model_identifier(xml_text: str) -> str | None:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError:
        return None
    cs = root.find("CoSimulation")
    if cs is None:
        return None
    return cs.get("modelIdentifier")


def _library_name(arch: FmuArchive) -> str:
    ident = _model_identifier(arch.model_description)
    if ident:
        return ident
    try:
        return parse_xml(arch.model_description).model_name or "model"
    except ToolError:
        return "model"


def write_archive(arch: FmuArchive, out) -> str:
    """Write the archive deterministically; returns the output path."""
    name = _library_name(arch)
    entries: list[tuple[str, bytes, int]] = [
        ("modelDescription.xml", arch.model_description.encode("utf-8"), _FILE_MODE)
    ]
    for platform in sorted(arch.binaries):
        path = f"binaries/{platform}/{name}{library_extension(platform)}"
        entries.append((path, arch.binaries[platform], _EXEC_MODE))
    for rel in sorted(arch.resources):
        entries.append((f"resources/{rel}", arch.resources[rel], _FILE_MODE))
    for rel in sorted(arch.documentation):
        entries.append((f"documentation/{rel}", arch.documentation[rel], _FILE_MODE))

    try:
        with zipfile.ZipFile(out, "w", zipfile.ZIP_DEFLATED) as zf:
            for path, data, mode in entries:
                info = zipfile.ZipInfo(path, date_time=_EPOCH)
                info.external_attr = mode
                info.compress_type = zipfile.ZIP_DEFLATED
                zf.writestr(info, data)
    except OSError as e:
        raise IoFailure(f"cannot write archive {out}: {e}") from e
    return str(out)


def pack(tree: GeneratedTree, binaries: dict[str, bytes], out) -> str:
    """Archive a generated tree: its model description plus the binaries."""
    xml = tree.files.get("modelDescription.xml")
    if xml is None:
        raise MissingModelDescription(
            "generated tree does not contain modelDescription.xml"
        )
    return write_archive(FmuArchive(xml, dict(binaries)), out)


def unpack(path) -> FmuArchive:
    """Read an archive back into memory (inverse of write_archive)."""
    path = Path(path)
    if not path.is_file():
        raise IoFailure(f"no such archive: {path}")
    if not zipfile.is_zipfile(path):
        raise NotAZipFile(f"{path} is not a zip archive")

    binaries: dict[str, bytes] = {}
    resources: dict[str, bytes] = {}
    documentation: dict[str, bytes] = {}
    xml = None
    with zipfile.ZipFile(path) as zf:
        for name in zf.namelist():
            if name.endswith("/"):
                continue
            data = zf.read(name)
            parts = name.split("/")
            if name == "modelDescription.xml":
                xml = data.decode("utf-8")
            elif parts[0] == "binaries" and len(parts) == 3:
                binaries.setdefault(parts[1], data)
            elif parts[0] == "resources":
                resources["/".join(parts[1:])] = data
            elif parts[0] == "documentation":
                documentation["/".join(parts[1:])] = data
    if xml is None:
        raise MissingModelDescription(
            f"{path} has no modelDescription.xml at the archive root"
        )
    return FmuArchive(xml, binaries, resources, documentation)


def validate(path) -> ValidationReport:
    """Structural and consistency checks; pass iff no error entries."""
    path = Path(path)
    if not path.is_file():
        raise IoFailure(f"no such archive: {path}")
    if not zipfile.is_zipfile(path):
        raise NotAZipFile(f"{path} is not a zip archive")

    entries: list[Diagnostic] = []

    def note(severity: str, message: str) -> None:
        entries.append(Diagnostic(severity, message))

    with zipfile.ZipFile(path) as zf:
        names = [n for n in zf.namelist() if not n.endswith("/")]
        xml = None
        if "modelDescription.xml" in names:
            xml = zf.read("modelDescription.xml").decode("utf-8")

    if xml is None:
        note("error", "modelDescription.xml missing at the archive root")

    md = None
    ident = None
    if xml is not None:
        parse_diags: list[Diagnostic] = []
        try:
            md = parse_xml(xml, diagnostics=parse_diags)
        except ToolError as e:
            note("error", f"model description rejected: {e}")
        entries.extend(parse_diags)
        if md is not None:
            note("info", f"model description parses (fmiVersion {md.fmi_version}, "
                         f"{len(md.variables)} variables)")
            note("info", "value references are unique")
            ident = _model_identifier(xml) or md.model_name
            for v in md.variables:
                if v.causality == "input" and v.start is None:
                    note("error", f"input {v.name!r} has no start value")
                elif v.causality in ("output", "independent") and v.start is not None:
                    note("warning", f"{v.causality} {v.name!r} carries a start value")
                elif v.causality == "parameter" and v.start is None:
                    note("warning", f"parameter {v.name!r} has no start value")

    binary_count = 0
    for name in names:
        parts = name.split("/")
        if name == "modelDescription.xml":
            continue
        if parts[-1] == "modelDescription.xml":
            note("error", f"{name}: modelDescription.xml must sit at the archive root")
            continue
        if parts[0] == "binaries":
            if len(parts) != 3:
                note("error", f"{name}: expected binaries/<platform-tuple>/<library>")
                continue
            platform, lib = parts[1], parts[2]
            if platform not in PLATFORM_TUPLES:
                note("error", f"{name}: unknown platform tuple {platform!r}")
                continue
            binary_count += 1
            expected_ext = library_extension(platform)
            if not lib.endswith(expected_ext):
                note("error",
                     f"{name}: library extension does not match {platform} "
                     f"(expected {expected_ext})")
            elif ident is not None and lib != f"{ident}{expected_ext}":
                note("warning",
                     f"{name}: library name differs from model identifier "
                     f"{ident!r}")
        elif parts[0] in ("resources", "documentation", "sources"):
            continue
        else:
            note("warning", f"unexpected archive entry {name!r}")

    if binary_count == 0:
        note("warning", "description-only archive: no binaries present")
    else:
        note("info", f"{binary_count} platform binar{'y' if binary_count == 1 else 'ies'}")

    return ValidationReport(archive_path=str(path), entries=tuple(entries))
