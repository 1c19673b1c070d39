"""Wrap SystemC TLM target modules as FMI 3.0 co-simulation FMUs.

The pipeline is scan -> codegen -> archive: `scan` extracts the payload
record and transport surface from the C++ sources, `codegen` turns that
into a wrapper tree with a model description and build script, and
`archive` packs the tree into a deterministic .fmu zip. `master` runs
archives (or the behavioral stand-ins from `models`) in a multi-rate
co-simulation with exact rational time, and `cli` exposes the whole
pipeline as the `tlm2fmu` command.
"""

__version__ = "0.1.0"
