"""Real SystemC TLM fixture designs and the compile harness that proves the
generated wrappers build into loadable FMUs."""

from .designs import DESIGNS, FixtureDesign
from .harness import (
    BuildResult,
    CompileFailure,
    SystemCNotFound,
    build_fixture_fmu,
    generate_tree,
    systemc_home,
)

__all__ = [
    "DESIGNS",
    "FixtureDesign",
    "BuildResult",
    "CompileFailure",
    "SystemCNotFound",
    "build_fixture_fmu",
    "generate_tree",
    "systemc_home",
]
