"""Command-line entry point for the scan/generate/package/validate pipeline
plus the co-simulation runner and the doStep scaling bench.

Exit codes follow one convention across subcommands: 0 for success, 1 when
the run finished but produced warnings, 2 on errors.  All commands are
deterministic on unchanged inputs except bench, whose measured values vary
but whose report schema does not.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import time
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

from . import models
from .archive import (
    PLATFORM_TUPLES,
    host_platform,
    library_extension,
    pack,
    validate,
)
from .codegen import choose_transport, generate, make_plan, write_tree
from .config import CosimConfig, ToolConfig, load_config
from .errors import BackendStepFailure, ConfigError, MissingBinary, ToolError
from .fmi import parse_start
from .master import (
    Connection,
    CoSimSchedule,
    FmuInstance,
    format_time,
    load_library_backend,
    run,
)
from .scan import SourceUnit, infer_directions, scan_sources

BENCH_STEP_COUNTS = (250, 1000, 10000)
_BENCH_REPEATS = 3


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        for line in text_lines:
            print(line)


def _scan_config(config: ToolConfig, diagnostics: list):
    if not config.sources:
        raise ConfigError("this command needs a sources list in the configuration")
    units = [SourceUnit.from_path(p) for p in config.sources]
    spec, surface = scan_sources(units, config.record_hint, diagnostics)
    spec = infer_directions(spec, surface, diagnostics)
    return spec, surface


def _diagnostic_exit(diagnostics) -> int:
    if any(d.severity == "error" for d in diagnostics):
        return 2
    if any(d.severity == "warning" for d in diagnostics):
        return 1
    return 0


# ---------------------------------------------------------------------------
# scan


def cmd_scan(args) -> int:
    config = load_config(args.config)
    diagnostics: list = []
    spec, surface = _scan_config(config, diagnostics)
    payload = {
        "record": spec.record_name,
        "header_origin": spec.header_origin,
        "module": surface.module_name,
        "transport": choose_transport(surface),
        "fields": [
            {
                "name": f.name,
                "type": f.source_type,
                "bit_width": f.bit_width,
                "direction": f.direction,
            }
            for f in spec.fields
        ],
        "diagnostics": [asdict(d) for d in diagnostics],
    }
    name_w = max(len(f.name) for f in spec.fields)
    type_w = max(len(f.source_type) for f in spec.fields)
    lines = [
        f"record {spec.record_name} ({spec.header_origin})",
        f"module {surface.module_name}",
        f"transport {choose_transport(surface)}",
        f"fields ({len(spec.fields)}):",
    ]
    lines.extend(
        f"  {f.name:<{name_w}}  {f.source_type:<{type_w}}  {f.direction}"
        for f in spec.fields
    )
    lines.extend(d.render() for d in diagnostics)
    _emit(args, payload, lines)
    return _diagnostic_exit(diagnostics)


# ---------------------------------------------------------------------------
# generate / package


def _output_dir(args, config: ToolConfig) -> Path:
    if getattr(args, "output", None):
        return Path(args.output)
    if config.output_dir is not None:
        return config.output_dir
    raise ConfigError("set --output or output_dir in the configuration")


def _build_plan(config: ToolConfig, output_dir: Path, diagnostics: list):
    spec, surface = _scan_config(config, diagnostics)
    if config.communication_step_size is None:
        raise ConfigError("set communication_step_size in the configuration")
    model_name = config.model_name or config.target_module or surface.module_name
    if model_name is None:
        raise ConfigError(
            "model name could not be inferred; set model_name in the configuration"
        )
    target_sources = tuple(
        p.name for p in config.sources
        if SourceUnit.from_path(p).kind == "implementation"
    )
    plan = make_plan(
        spec,
        surface,
        model_name=model_name,
        step_size=config.communication_step_size,
        output_dir=str(output_dir),
        target_module_name=config.target_module,
        build_flavor=config.build_flavor,
        target_sources=target_sources,
        start_overrides=config.start_values or None,
    )
    return plan, spec


def _copy_sources(
    config: ToolConfig, tree_files, record_header: str, output_dir: Path
) -> list[str]:
    """Place the original sources next to the generated tree.

    The wrapper includes the implementation files by basename and the
    implementations may include their own headers the same way, so every
    scanned source is copied.  A source may shadow the generated record
    header (nothing generated includes it, and the original declares the
    same record); shadowing any other generated file would break the build,
    hence the error.
    """
    protected = set(tree_files) - {record_header}
    seen: dict[str, Path] = {}
    for source in config.sources:
        if source.name in protected:
            raise ConfigError(
                f"source file name {source.name!r} collides with a generated file"
            )
        if source.name in seen and seen[source.name] != source:
            raise ConfigError(
                f"two sources share the basename {source.name!r}; "
                "rename one so both can sit in the output directory"
            )
        seen[source.name] = source
    copied = []
    for source in seen.values():
        dest = output_dir / source.name
        if dest.resolve() != source.resolve():
            shutil.copyfile(source, dest)
        copied.append(str(dest))
    return copied


def cmd_generate(args) -> int:
    config = load_config(args.config)
    diagnostics: list = []
    output_dir = _output_dir(args, config)
    plan, spec = _build_plan(config, output_dir, diagnostics)
    tree = generate(plan)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = write_tree(tree, output_dir)
    copied = _copy_sources(
        config, tree.files, f"{spec.record_name}.h", output_dir
    )
    written.extend(p for p in copied if p not in written)
    payload = {
        "output_dir": str(output_dir),
        "written": sorted(written),
        "entry_points": list(tree.entry_points),
        "diagnostics": [asdict(d) for d in diagnostics],
    }
    lines = sorted(written)
    lines.extend(d.render() for d in diagnostics)
    _emit(args, payload, lines)
    return _diagnostic_exit(diagnostics)


def _collect_binaries(
    output_dir: Path, model_name: str, platforms: tuple[str, ...], strict: bool
) -> dict[str, bytes]:
    """Find compiled libraries for the requested platform tuples.

    Looks for binaries/<tuple>/<model><ext> first; a flat <model><ext> next
    to the tree counts for the host platform only (that is where the
    generated build script puts its output)."""
    found: dict[str, bytes] = {}
    for platform in platforms:
        ext = library_extension(platform)
        nested = output_dir / "binaries" / platform / f"{model_name}{ext}"
        flat = output_dir / f"{model_name}{ext}"
        if nested.is_file():
            found[platform] = nested.read_bytes()
        elif platform == host_platform() and flat.is_file():
            found[platform] = flat.read_bytes()
        elif strict:
            raise MissingBinary(
                f"no library for {platform}: expected {nested} or, for the "
                f"host platform, {flat}"
            )
    return found


def cmd_package(args) -> int:
    config = load_config(args.config)
    diagnostics: list = []
    output_dir = _output_dir(args, config)
    plan, _ = _build_plan(config, output_dir, diagnostics)
    tree = generate(plan)

    requested = tuple(args.platform or ()) or config.platforms
    for platform in requested:
        if platform not in PLATFORM_TUPLES:
            raise ConfigError(
                f"unknown platform {platform!r}; known: {', '.join(PLATFORM_TUPLES)}"
            )
    strict = bool(requested)
    binaries = _collect_binaries(
        output_dir, plan.model_name, requested or PLATFORM_TUPLES, strict
    )

    output_dir.mkdir(parents=True, exist_ok=True)
    archive_path = output_dir / f"{plan.model_name}.fmu"
    pack(tree, binaries, archive_path)
    payload = {
        "archive": str(archive_path),
        "platforms": sorted(binaries),
        "diagnostics": [asdict(d) for d in diagnostics],
    }
    lines = [str(archive_path)]
    if binaries:
        lines.append(f"platform binaries: {', '.join(sorted(binaries))}")
    else:
        lines.append("no compiled libraries found; packed description only")
    lines.extend(d.render() for d in diagnostics)
    _emit(args, payload, lines)
    return _diagnostic_exit(diagnostics)


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    report = validate(args.archive)
    payload = {
        "archive": report.archive_path,
        "ok": report.ok,
        "errors": len(report.errors),
        "warnings": len(report.warnings),
        "entries": [asdict(d) for d in report.entries],
    }
    _emit(args, payload, [report.render()])
    return report.exit_code


# ---------------------------------------------------------------------------
# cosim


def _make_backend(instance, platform):
    if instance.model is not None:
        return models.create(instance.model, **instance.options)
    return load_library_backend(instance.archive, platform)


def _seed_values(backend, raw_inputs: dict) -> dict:
    """Convert string seeds through the declared variable type.

    Non-string scalars pass through; unknown names also pass through so the
    master reports them via its own UnknownVariable check."""
    description = backend.description()
    seeds = {}
    for name, value in raw_inputs.items():
        variable = description.variable(name)
        if variable is not None and isinstance(value, str):
            seeds[name] = parse_start(variable.fmi_type, value)
        else:
            seeds[name] = value
    return seeds


def build_schedule(cosim: CosimConfig, platform: str | None = None) -> CoSimSchedule:
    """Wire a runnable schedule from its configuration."""
    instances = []
    for entry in cosim.instances:
        backend = _make_backend(entry, platform)
        instances.append(FmuInstance(
            id=entry.id,
            backend=backend,
            seed_inputs=_seed_values(backend, entry.inputs),
        ))
    return CoSimSchedule(
        instances=instances,
        step_sizes=dict(cosim.step_sizes),
        stop_time=cosim.stop_time,
        connections=[Connection(src, sink) for src, sink in cosim.connections],
        record=list(cosim.record),
    )


def cmd_cosim(args) -> int:
    config = load_config(args.config)
    if config.cosim is None:
        raise ConfigError("this command needs a cosim section in the configuration")
    schedule = build_schedule(config.cosim, args.platform)
    trace = run(schedule)
    if args.output:
        out_dir = Path(args.output)
    elif config.output_dir is not None:
        out_dir = config.output_dir
    else:
        out_dir = Path.cwd()
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.csv"
    trace.write_csv(trace_path)
    payload = {
        "trace": str(trace_path),
        "rows": len(trace.rows),
        "columns": list(trace.columns),
        "final_time": format_time(trace.times()[-1]),
        "truncated_final_step": trace.truncated_final_step,
    }
    lines = [
        f"wrote {trace_path}",
        f"{len(trace.rows)} rows, final time {payload['final_time']} s",
    ]
    if trace.truncated_final_step:
        lines.append("note: stop time is not a multiple of every step size; "
                     "the last step was truncated")
    _emit(args, payload, lines)
    return 0


# ---------------------------------------------------------------------------
# bench


def _peak_resident_kib() -> int:
    try:
        import resource
        return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss)
    except ImportError:  # non-POSIX fallback: current rss, not true peak
        import psutil
        return int(psutil.Process().memory_info().rss // 1024)


def _timed_steps(make_backend, seeds: dict, step: Fraction, count: int) -> float:
    """Run count doStep calls on a fresh backend; best wall time in ms."""
    best = None
    for _ in range(_BENCH_REPEATS):
        backend = make_backend()
        backend.enter_initialization(0.0)
        for name, value in seeds.items():
            backend.set_value(name, value)
        backend.exit_initialization()
        t = Fraction(0)
        begin = time.perf_counter()
        for _ in range(count):
            result = backend.do_step(t, step)
            if result.status != "ok":
                raise BackendStepFailure(
                    f"bench backend reported {result.status} at t={format_time(t)}"
                )
            t += step
        elapsed = (time.perf_counter() - begin) * 1000.0
        backend.terminate()
        best = elapsed if best is None else min(best, elapsed)
    return best


def cmd_bench(args) -> int:
    config = load_config(args.config)
    if config.cosim is None or len(config.cosim.instances) != 1:
        raise ConfigError("bench needs a cosim section with exactly one instance")
    entry = config.cosim.instances[0]
    step = config.cosim.step_sizes.get(entry.id)
    if step is None:
        raise ConfigError(f"bench needs a step size for instance {entry.id!r}")

    def make_backend():
        return _make_backend(entry, args.platform)

    seeds = _seed_values(make_backend(), entry.inputs)
    _timed_steps(make_backend, seeds, step, BENCH_STEP_COUNTS[0])  # warm-up
    rows = []
    for count in BENCH_STEP_COUNTS:
        wall_ms = _timed_steps(make_backend, seeds, step, count)
        rows.append({
            "steps": count,
            "wall_ms": round(wall_ms, 3),
            "peak_kb": _peak_resident_kib(),
        })
    payload = {"instance": entry.id, "rows": rows}
    lines = ["steps, wall_ms, peak_kb"]
    lines.extend(
        f"{r['steps']}, {r['wall_ms']}, {r['peak_kb']}" for r in rows
    )
    _emit(args, payload, lines)
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlm2fmu",
        description="Wrap SystemC TLM target modules as FMI 3.0 Co-Simulation "
                    "FMUs and run them in a multi-rate master.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=True, output=False, platform=None):
        if config:
            p.add_argument("--config", required=True,
                           help="YAML or JSON configuration file")
        if output:
            p.add_argument("--output", help="output directory")
        if platform == "single":
            p.add_argument("--platform", choices=PLATFORM_TUPLES,
                           help="platform tuple for library loading")
        elif platform == "many":
            p.add_argument("--platform", action="append",
                           metavar="TUPLE",
                           help="platform tuple to pack (repeatable)")
        p.add_argument("--format", choices=("json", "text"), default="text",
                       help="report format")

    p = sub.add_parser("scan", help="report the payload record and directions")
    common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("generate", help="write the wrapper source tree")
    common(p, output=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("package", help="pack the tree and any built libraries "
                                       "into an .fmu archive")
    common(p, output=True, platform="many")
    p.set_defaults(func=cmd_package)

    p = sub.add_parser("validate", help="check an .fmu archive")
    p.add_argument("archive", help="path to the .fmu file")
    common(p, config=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cosim", help="run a configured co-simulation schedule")
    common(p, output=True, platform="single")
    p.set_defaults(func=cmd_cosim)

    p = sub.add_parser("bench", help="time 250/1000/10000 doStep calls")
    common(p, platform="single")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToolError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
