"""Command-line front end: ``dob-bode <command> [--config FILE] [--set k=v]``.

Commands:
    freq       S/T frequency responses, one CSV per (alpha, g_dob, T_s) tuple
    bode       Bode sensitivity integrals over the g_dob grid (JSON)
    rootlocus  closed-loop poles over the g_dob grid (CSV), critical bandwidth (JSON)
    simulate   time-domain traces (CSV)
    sweep      stability map over the (alpha, g_dob, T_s) grid (CSV)

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import configparser
import logging
import os
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
from dotenv import load_dotenv
from opentelemetry import trace
from pydantic import BaseModel, ValidationError

from app.bode import waterbed_sweep
from app.dobmodels import DEFAULT_PARAMS, LOOP_FAMILIES, DobParams
from app.lti.xfer import log_grid
from app.rootlocus import bandwidth_family, critical_bandwidth, stability_map, sweep
from app.simulate import Scenario, SignalSpec, SimTrace, run_many
from app.utils.artifacts import read_header_config, write_csv, write_json
from app.utils.errors import BracketError, ConfigError, NumericalError
from app.utils.tracing import setup_tracing, tracing_requested
from app.utils.typing import (
    GridSection,
    OutputSection,
    RunConfig,
    ScenarioSection,
)

logger = logging.getLogger(__name__)
tracer = trace.get_tracer(__name__)

FREQ_COLUMNS = ("omega_rad_s", "mag_S_dB", "phase_S_deg", "mag_T_dB", "phase_T_deg")
SWEEP_COLUMNS = ("alpha", "g_dob", "T_s", "margin", "stable")

# Configuration


def _line_numbers(text: str) -> dict[str, int]:
    """``section.key`` -> 1-based line number in ``text``."""
    numbers: dict[str, int] = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            numbers.setdefault(section, number)
        elif section and "=" in line:
            numbers[f"{section}.{line.split('=', 1)[0].strip()}"] = number
    return numbers


def _validate(
    model: type[BaseModel], section: str, values: dict, lines: dict[str, int]
) -> BaseModel:
    try:
        return model.model_validate(values)
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"])
        key = f"{section}.{field}" if field else section
        message = error["msg"]
        if error["type"] == "extra_forbidden":
            message = "unknown key"
        raise ConfigError(message, key=key, line=lines.get(key)) from exc


def parse_config(
    text: str, overrides: Sequence[str] = (), source: str = "<config>"
) -> RunConfig:
    """Resolve INI ``text`` plus ``section.key=value`` overrides into a RunConfig."""
    parser = configparser.ConfigParser(
        interpolation=None,
        comment_prefixes=("#", ";"),
        inline_comment_prefixes=("#",),
    )
    parser.optionxform = str  # type: ignore[assignment, method-assign]
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"cannot parse {source}: {exc}", line=line) from exc

    lines = _line_numbers(text)
    for name in parser.sections():
        if name not in RunConfig.SECTIONS:
            raise ConfigError("unknown section", key=name, line=lines.get(name))

    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot or not key:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        if section not in RunConfig.SECTIONS:
            raise ConfigError("unknown section", key=target.strip())
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value.strip())

    raw = {
        name: dict(parser.items(name)) if parser.has_section(name) else {}
        for name in RunConfig.SECTIONS
    }
    params = _validate(
        DobParams, "params", {**DEFAULT_PARAMS.model_dump(), **raw["params"]}, lines
    )
    return RunConfig(
        params=params,
        grid=_validate(GridSection, "grid", raw["grid"], lines),
        scenario=_validate(ScenarioSection, "scenario", raw["scenario"], lines),
        output=_validate(OutputSection, "output", raw["output"], lines),
    )


def load_config(path: Path | None, overrides: Sequence[str] = ()) -> RunConfig:
    """Read an INI file, or the header of a CSV/JSON artifact written by this tool."""
    if path is None:
        return parse_config("", overrides)
    if path.suffix in {".csv", ".json"}:
        text = read_header_config(path)
    else:
        text = path.read_text(encoding="utf-8")
    return parse_config(text, overrides, source=str(path))


def _tuples(config: RunConfig) -> list[DobParams]:
    base, grid = config.params, config.grid
    combos = []
    for a in grid.alphas or [None]:
        with_alpha = base if a is None else base.with_alpha(a)
        for t in grid.sample_times or [None]:
            with_time = with_alpha if t is None else with_alpha.with_sample_time(t)
            for g in grid.g_grid(base.g_dob):
                combos.append(with_time.with_bandwidth(g))
    return combos


def _scenario(config: RunConfig, params: DobParams) -> Scenario:
    s = config.scenario
    return Scenario(
        params=params,
        duration=s.duration,
        reference=SignalSpec(
            kind=s.reference_kind,
            amplitude=s.reference_amplitude,
            onset=s.reference_onset,
            frequency=s.reference_frequency,
        ),
        disturbance=SignalSpec(
            kind=s.disturbance_kind,
            amplitude=s.disturbance_amplitude,
            onset=s.disturbance_onset,
            frequency=s.disturbance_frequency,
        ),
        noise_std=s.noise_std,
        noise_seed=s.noise_seed,
        divergence_bound=s.divergence_bound,
        observer_scheme=s.observer_scheme,
        encoder_noise_std=s.encoder_noise_std,
    )


# Commands


def cmd_freq(config: RunConfig, out_dir: Path) -> list[Path]:
    grid = config.grid
    builder = LOOP_FAMILIES[grid.family]
    prefix = config.output.prefix or "freq"
    header = config.to_ini_lines()
    paths, entries = [], []
    for i, params in enumerate(_tuples(config)):
        loop = builder(params)
        omega = log_grid(loop.domain, grid.points, grid.omega_min, grid.omega_max)
        s = loop.sensitivity.frequency_response(omega)
        t = loop.complementary.frequency_response(omega)
        name = f"{prefix}_{i:03d}.csv"
        rows = zip(omega, s.magnitude_db, s.phase_deg, t.magnitude_db, t.phase_deg)
        paths.append(write_csv(out_dir / name, "freq", header, FREQ_COLUMNS, rows))

        warnings = [
            f"marginal closed-loop pole at {p:.6g}"
            for p in loop.sensitivity.marginal_poles()
        ]
        if s.pole_hits.any():
            warnings.append(f"{int(s.pole_hits.sum())} grid point(s) on a pole")
        for message in warnings:
            logger.warning(f"{name}: {message}")
        entries.append(
            {
                "file": name,
                "alpha": params.alpha,
                "g_dob": params.g_dob,
                "T_s": params.T_s,
                "peak_S_dB": float(np.nanmax(s.magnitude_db)),
                "warnings": warnings,
            }
        )
    index = {"family": grid.family, "files": entries}
    paths.append(write_json(out_dir / f"{prefix}_index.json", "freq", header, index))
    return paths


def cmd_bode(config: RunConfig, out_dir: Path) -> list[Path]:
    grid, base = config.grid, config.params
    builder = LOOP_FAMILIES[grid.family]
    sweeps = []
    for a in grid.alphas or [None]:
        for t in grid.sample_times or [None]:
            params = base if a is None else base.with_alpha(a)
            params = params if t is None else params.with_sample_time(t)
            result = waterbed_sweep(
                builder,
                params,
                grid.g_grid(base.g_dob),
                refinement=grid.refinement,
                full_interval=grid.full_interval,
            )
            sweeps.append(
                {"alpha": params.alpha, "T_s": params.T_s, **result.model_dump()}
            )
    prefix = config.output.prefix or "bode"
    payload = {"family": grid.family, "sweeps": sweeps}
    header = config.to_ini_lines()
    return [write_json(out_dir / f"{prefix}.json", "bode", header, payload)]


def cmd_rootlocus(config: RunConfig, out_dir: Path) -> list[Path]:
    grid, params = config.grid, config.params
    family = bandwidth_family(LOOP_FAMILIES[grid.family], params)
    branch = sweep(family, grid.g_grid(params.g_dob))
    prefix = config.output.prefix or "rootlocus"
    header = config.to_ini_lines()

    columns = ["g"]
    for i in range(branch.branch_count):
        columns += [f"re_pole_{i}", f"im_pole_{i}"]
    columns.append("stable")
    rows = []
    for g, poles, stable in zip(
        branch.param_values, branch.poles_per_value, branch.stability_flags
    ):
        row: list[object] = [g]
        for pole in poles:
            row += [pole.real, pole.imag]
        row.append(bool(stable))
        rows.append(row)
    results: dict[str, object] = {"discontinuities": len(branch.discontinuities)}
    first = branch.first_unstable()
    if first is not None:
        results["first_unstable_g"] = float(branch.param_values[first])
    paths = [
        write_csv(
            out_dir / f"{prefix}.csv", "rootlocus", header, columns, rows, results
        )
    ]

    if grid.bracket is not None:
        critical = critical_bandwidth(family, grid.bracket)
        payload = {
            "family": grid.family,
            "g_star": critical.g_star,
            "boundary_pole": critical.boundary_pole,
            "bracket": list(critical.bracket),
            "margin": critical.margin,
            "iterations": critical.iterations,
        }
        target = out_dir / f"{prefix}_critical.json"
        paths.append(write_json(target, "rootlocus", header, payload))
    return paths


def cmd_simulate(config: RunConfig, out_dir: Path) -> list[Path]:
    combos = _tuples(config)
    traces = run_many([_scenario(config, params) for params in combos])
    prefix = config.output.prefix or "simulate"
    header = config.to_ini_lines()
    paths = []
    for i, (params, result) in enumerate(zip(combos, traces)):
        name = f"{prefix}.csv" if len(combos) == 1 else f"{prefix}_{i:03d}.csv"
        results: dict[str, object] = {"g_dob": params.g_dob}
        if result.diverged_at is not None:
            results["diverged_at"] = result.diverged_at
        rows = zip(*result.columns())
        paths.append(
            write_csv(
                out_dir / name, "simulate", header, SimTrace.COLUMNS, rows, results
            )
        )
    return paths


def cmd_sweep(config: RunConfig, out_dir: Path) -> list[Path]:
    grid, params = config.grid, config.params
    cells = stability_map(
        LOOP_FAMILIES[grid.family],
        params,
        grid.alphas or [params.alpha],
        grid.g_grid(params.g_dob),
        grid.sample_times or [params.T_s],
    )
    rows = [(c.alpha, c.g_dob, c.T_s, c.margin, c.stable) for c in cells]
    results = {"unstable_cells": sum(1 for c in cells if c.stable is False)}
    prefix = config.output.prefix or "sweep"
    header = config.to_ini_lines()
    target = out_dir / f"{prefix}.csv"
    return [write_csv(target, "sweep", header, SWEEP_COLUMNS, rows, results)]


COMMANDS: dict[str, Callable[[RunConfig, Path], list[Path]]] = {
    "freq": cmd_freq,
    "bode": cmd_bode,
    "rootlocus": cmd_rootlocus,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", type=Path, help="INI file or an emitted CSV/JSON artifact"
    )
    common.add_argument(
        "--out",
        type=Path,
        help="output directory (default: $DOB_BODE_OUT_DIR or ./out)",
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value (repeatable)",
    )
    common.add_argument(
        "--quiet", action="store_true", help="only log warnings and errors"
    )
    common.add_argument(
        "--trace", action="store_true", help="export OpenTelemetry spans to the log"
    )
    common.add_argument(
        "--log-level", help="logging level (default: $DOB_BODE_LOG_LEVEL or INFO)"
    )

    parser = argparse.ArgumentParser(
        prog="dob-bode",
        description="DOB loop analysis: frequency responses, Bode integrals, "
        "root loci and simulation.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        commands.add_parser(name, parents=[common], help=name)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    level = args.log_level or os.environ.get("DOB_BODE_LOG_LEVEL")
    if level is None:
        level = "WARNING" if args.quiet else "INFO"
    numeric_level = logging.getLevelName(level.upper())
    known_level = isinstance(numeric_level, int)
    logging.basicConfig(
        level=numeric_level if known_level else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not known_level:
        logger.error(f"configuration error: unknown log level {level!r}")
        return 2

    out_dir = args.out or Path(os.environ.get("DOB_BODE_OUT_DIR", "out"))
    provider = setup_tracing(out_dir) if tracing_requested(args.trace) else None
    try:
        config = load_config(args.config, args.overrides)
        with tracer.start_as_current_span(f"cli.{args.command}") as span:
            written = COMMANDS[args.command](config, out_dir)
            span.set_attribute("files", len(written))
        logger.info(f"{args.command}: {len(written)} file(s) in {out_dir}")
        return 0
    except (NumericalError, BracketError) as exc:
        logger.error(f"numerical failure: {exc}")
        return 3
    except ValueError as exc:  # ConfigError and pydantic ValidationError included
        logger.error(f"configuration error: {exc}")
        return 2
    except OSError as exc:
        logger.error(f"I/O error: {exc}")
        return 4
    finally:
        if provider is not None:
            provider.force_flush()


if __name__ == "__main__":
    sys.exit(main())
