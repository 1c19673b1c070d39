"""Error types and diagnostics shared across the toolchain."""

from __future__ import annotations

from dataclasses import dataclass


class ToolError(Exception):
    """Base class for all toolchain errors."""


# --- source scanning ---------------------------------------------------------

class NoPayloadRecord(ToolError):
    """No candidate payload record was found in the scanned sources."""


class NoTransportFunction(ToolError):
    """Neither b_transport nor nb_transport_fw was found."""


class AmbiguousPayload(ToolError):
    """More than one candidate payload record; a record hint is required."""


class UnreferencedField(ToolError):
    """A payload field never appears in any transport body."""


class AllFieldsOneDirection(ToolError):
    """Direction inference left the payload without both inputs and outputs."""


class UnsupportedField(ToolError):
    """A payload field uses a construct the scanner rejects (array, nested record)."""


# --- type mapping / model description ---------------------------------------

class UnsupportedType(ToolError):
    """A source type token has no FMI mapping (e.g. sc_bigint, sc_fixed)."""


class MalformedXml(ToolError):
    """The model description is not well-formed XML."""


class UnsupportedFmiVersion(ToolError):
    """fmiVersion attribute is present but not '3.0'."""


class DuplicateValueReference(ToolError):
    """Two variables share a value reference."""


# --- archive -----------------------------------------------------------------

class IoFailure(ToolError):
    """Filesystem-level failure while packing or unpacking."""


class MissingModelDescription(ToolError):
    """The generated tree or archive has no modelDescription.xml."""


class NotAZipFile(ToolError):
    """The validated path is not a zip archive."""


# --- co-simulation master ----------------------------------------------------

class TypeMismatch(ToolError):
    """Connected or assigned value does not match the variable's FMI type."""


class BackendInitFailure(ToolError):
    """An FMU backend failed to instantiate or initialize."""


class BackendStepFailure(ToolError):
    """An FMU backend reported an error or discard status from a step."""


class DivergedClock(ToolError):
    """Internal assertion: an instance clock left its step-size grid."""


class UnknownVariable(ToolError):
    """Variable name not present in the instance's model description."""


class CausalityViolation(ToolError):
    """set on a non-input variable, or get on a non-output variable."""


class LifecycleViolation(ToolError):
    """An instance was used outside its state machine (e.g. set after terminate)."""


class MissingBinary(ToolError):
    """Archive carries no shared library for the requested platform."""


class MissingSymbol(ToolError):
    """A mandatory FMI entry point is absent from the shared library."""


# --- configuration -----------------------------------------------------------

class ConfigError(ToolError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class Diagnostic:
    """A line/column-tagged message for the diagnostic stream."""

    severity: str  # "error" | "warning" | "note" | "info"
    message: str
    path: str | None = None
    line: int | None = None
    column: int | None = None

    def render(self) -> str:
        loc = ""
        if self.path is not None:
            loc = self.path
            if self.line is not None:
                loc += f":{self.line}"
                if self.column is not None:
                    loc += f":{self.column}"
            loc += ": "
        return f"{loc}{self.severity}: {self.message}"
