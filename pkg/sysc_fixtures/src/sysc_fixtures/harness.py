"""Compile harness: turn a fixture design into a loadable FMU.

The harness drives the public tlm2fmu pipeline (scan, plan, generate, pack)
and then runs the generated build script against a SystemC installation
named by SYSTEMC_HOME (SYSTEMC_LIBDIR optionally overriding the library
subdirectory).  Without SystemC it raises SystemCNotFound so callers can
skip instead of fail.
"""

from __future__ import annotations

import os
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

from tlm2fmu.archive import host_platform, library_extension, pack
from tlm2fmu.codegen import generate, make_plan, write_tree
from tlm2fmu.scan import SourceUnit, infer_directions, scan_sources

from .designs import DESIGNS, FixtureDesign


class SystemCNotFound(RuntimeError):
    """SYSTEMC_HOME is unset or does not look like a SystemC installation."""


class CompileFailure(RuntimeError):
    """The generated build script failed; the message carries the log."""


@dataclass(frozen=True)
class BuildResult:
    design: FixtureDesign
    tree_dir: Path
    library: Path
    archive: Path
    entry_points: tuple[str, ...]


def systemc_home() -> Path:
    """The SystemC installation prefix, validated to carry TLM headers."""
    value = os.environ.get("SYSTEMC_HOME")
    if not value:
        raise SystemCNotFound("set SYSTEMC_HOME to a SystemC installation prefix")
    home = Path(value)
    if not (home / "include" / "systemc").is_file() and \
            not (home / "include" / "systemc.h").is_file():
        raise SystemCNotFound(
            f"{home} does not look like a SystemC installation "
            "(no include/systemc header)"
        )
    return home


def generate_tree(name: str, out_dir: Path):
    """Scan a design and write its wrapper tree; pure tlm2fmu plumbing."""
    design = DESIGNS[name]
    units = [SourceUnit.from_path(p) for p in design.sources]
    spec, surface = scan_sources(units)
    spec = infer_directions(spec, surface)
    plan = make_plan(
        spec,
        surface,
        model_name=design.name,
        step_size=design.step_size,
        output_dir=str(out_dir),
        target_sources=design.implementation_names(),
    )
    tree = generate(plan)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tree(tree, out_dir)
    for source in design.sources:
        shutil.copyfile(source, out_dir / source.name)
    return design, tree


def build_fixture_fmu(name: str, out_dir: Path) -> BuildResult:
    """Compile a design into a shared library and pack it as an FMU.

    Raises SystemCNotFound when no SystemC installation is configured and
    CompileFailure (with the compiler log) when the build script fails.
    """
    home = systemc_home()
    design, tree = generate_tree(name, out_dir)
    script = out_dir / "build.sh"
    env = dict(os.environ, SYSTEMC_HOME=str(home))
    proc = subprocess.run(
        ["sh", str(script)], cwd=out_dir, env=env,
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise CompileFailure(
            f"build script for {name!r} failed with exit {proc.returncode}\n"
            f"{proc.stdout}{proc.stderr}"
        )
    library = out_dir / f"{design.name}{library_extension(host_platform())}"
    if not library.is_file():
        raise CompileFailure(
            f"build script for {name!r} succeeded but {library.name} is missing"
        )
    archive = out_dir / f"{design.name}.fmu"
    pack(tree, {host_platform(): library.read_bytes()}, archive)
    return BuildResult(
        design=design,
        tree_dir=out_dir,
        library=library,
        archive=archive,
        entry_points=tree.entry_points,
    )
