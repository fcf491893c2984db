"""Command-line interface: config parsing, experiment orchestration, and
persistence.

Config files are INI-style with one section per concern; unknown sections
or keys are hard errors so that a typo in a scientific parameter cannot
silently fall back to a default.  See the bundled `paper-s4` preset for a
complete example.

Exit codes: 0 success, 1 condition-check findings, 2 config error,
3 solver failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import re
import sys
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .convergence import RateTable, runge_rates
from .grid import SpatialGrid, TimeGrid, build_time_grid, build_uniform_grid
from .problem import (
    PhysicalProblem,
    ProblemValidationError,
    Profile,
    ReactionNetwork,
    SpeciesSpec,
    transform_problem,
)
from .reference import TruncatedConfig, compare, matched_source_half_widths, solve_truncated
from .solver import (
    NewtonConvergenceError,
    SingularBlockError,
    Solution,
    SolverConfig,
    check_positivity_conditions,
    march,
)
from .source import SourceConfig
from .transform import xi_to_z

OUTPUT_DIR_ENV = "AIRCOLUMN_OUT"
CSV_HEADER = "t,i,xi,z,species,value"
FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


_SPECIES_RE = re.compile(r"^species\.(\d+)$")

_ALLOWED_KEYS = {
    "problem": {"w"},
    "time": {"dt", "T"},
    "transform": {"a", "include_jacobian_factor"},
    "grid": {"N"},
    "source": {"h"},
    "solver": {"newton_tol", "newton_max_iter", "nonneg_monitor"},
    "output": {"directory", "snapshot_every", "format_version"},
    "reactions": {"gamma", "beta"},
    "reference": {"z_max", "Nz", "dt", "window", "mode"},
    "conditions": {"bounds", "samples_per_axis"},
}
_SPECIES_KEYS = {"K", "dKdz", "delta", "Q", "z_star", "c0"}
_REQUIRED_SECTIONS = ("problem", "time", "transform", "grid", "source", "solver", "output")


@dataclass
class RunConfig:
    """Everything a command needs, resolved from one config file."""

    problem: PhysicalProblem
    a: float
    include_jacobian_factor: bool
    n_list: list
    dt: float
    source: SourceConfig
    solver: SolverConfig
    snapshot_every: int
    output_dir: str
    reference: dict | None
    conditions: dict | None
    raw: dict


def _parse_float(section: str, key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {text!r}") from None


def _parse_int(section: str, key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {text!r}") from None


def _parse_bool(section: str, key: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {text!r}")


def _parse_floats(section: str, key: str, text: str) -> list:
    return [_parse_float(section, key, tok) for tok in text.split()]


def _parse_profile(section: str, key: str, text: str) -> Profile:
    """A single number is a constant profile; `z:v` pairs give a table."""
    tokens = text.split()
    if not tokens:
        raise ConfigError(f"[{section}] {key}: empty profile")
    if ":" in text:
        zs, vs = [], []
        for tok in tokens:
            try:
                z_txt, v_txt = tok.split(":")
                zs.append(float(z_txt))
                vs.append(float(v_txt))
            except ValueError:
                raise ConfigError(
                    f"[{section}] {key}: expected z:value pairs, got {tok!r}"
                ) from None
        try:
            return Profile.table(zs, vs)
        except ValueError as err:
            raise ConfigError(f"[{section}] {key}: {err}") from None
    if len(tokens) != 1:
        raise ConfigError(f"[{section}] {key}: a constant profile takes one number")
    return Profile.constant(_parse_float(section, key, tokens[0]))


def _parse_index_entries(section: str, key: str, text: str, arity: int) -> list:
    """Entries like `1,2,2000; 2,2,-2000` -> [(0, 1, 2000.0), ...] with the
    leading `arity` fields converted from 1-based indices."""
    entries = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != arity + 1:
            raise ConfigError(
                f"[{section}] {key}: entry {chunk!r} needs {arity} indices and a value"
            )
        idx = [_parse_int(section, key, p) - 1 for p in parts[:arity]]
        entries.append((*idx, _parse_float(section, key, parts[-1])))
    return entries


def _load_parser(path_or_preset: str) -> tuple[configparser.ConfigParser, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive
    preset = resources.files("aircolumn").joinpath(f"presets/{path_or_preset}.ini")
    if not os.path.exists(path_or_preset) and preset.is_file():
        parser.read_string(preset.read_text(), source=f"preset:{path_or_preset}")
        return parser, f"preset:{path_or_preset}"
    if not os.path.exists(path_or_preset):
        raise ConfigError(f"config file not found: {path_or_preset}")
    parser.read(path_or_preset)
    return parser, path_or_preset


def load_config(path_or_preset: str) -> RunConfig:
    """Parse and fully validate a config file or bundled preset name."""
    try:
        parser, origin = _load_parser(path_or_preset)
    except configparser.Error as err:
        raise ConfigError(f"malformed config: {err}") from None

    species_ids = []
    for section in parser.sections():
        match = _SPECIES_RE.match(section)
        if match:
            species_ids.append(int(match.group(1)))
            unknown = set(parser[section]) - _SPECIES_KEYS
            if unknown:
                raise ConfigError(f"[{section}]: unknown keys {sorted(unknown)}")
        elif section in _ALLOWED_KEYS:
            unknown = set(parser[section]) - _ALLOWED_KEYS[section]
            if unknown:
                raise ConfigError(f"[{section}]: unknown keys {sorted(unknown)}")
        else:
            raise ConfigError(f"unknown section [{section}]")
    for section in _REQUIRED_SECTIONS:
        if section not in parser:
            raise ConfigError(f"missing required section [{section}]")
    if not species_ids:
        raise ConfigError("no [species.N] sections found")
    species_ids.sort()
    if species_ids != list(range(1, len(species_ids) + 1)):
        raise ConfigError(f"species sections must be numbered 1..S, got {species_ids}")

    def need(section: str, key: str) -> str:
        if key not in parser[section]:
            raise ConfigError(f"[{section}]: missing required key {key!r}")
        return parser[section][key]

    species = []
    for sid in species_ids:
        sec = f"species.{sid}"
        table = parser[sec]
        species.append(
            SpeciesSpec(
                K=_parse_profile(sec, "K", need(sec, "K")),
                dKdz=_parse_profile(sec, "dKdz", table["dKdz"]) if "dKdz" in table else None,
                delta=_parse_float(sec, "delta", table.get("delta", "0")),
                Q=np.array(_parse_floats(sec, "Q", table.get("Q", "0"))),
                z_star=_parse_float(sec, "z_star", table.get("z_star", "0")),
                c0=_parse_profile(sec, "c0", table.get("c0", "0")),
            )
        )

    S = len(species)
    gamma = np.zeros((S, S))
    beta = []
    if "reactions" in parser:
        for s, i, value in _parse_index_entries(
            "reactions", "gamma", parser["reactions"].get("gamma", ""), 2
        ):
            if not (0 <= s < S and 0 <= i < S):
                raise ConfigError(f"[reactions] gamma: species index out of range in ({s+1},{i+1})")
            gamma[s, i] = value
        beta = _parse_index_entries("reactions", "beta", parser["reactions"].get("beta", ""), 3)

    problem = PhysicalProblem(
        species=tuple(species),
        w=_parse_float("problem", "w", need("problem", "w")),
        reactions=ReactionNetwork(gamma=gamma, beta=tuple(beta)),
        T=_parse_float("time", "T", need("time", "T")),
    )

    n_list = [_parse_int("grid", "N", tok) for tok in need("grid", "N").split()]
    if not n_list or any(n < 3 for n in n_list):
        raise ConfigError("[grid] N: need one or more interval counts of at least 3")

    solver_sec = parser["solver"]
    output_sec = parser["output"]
    fmt = _parse_int("output", "format_version", output_sec.get("format_version", "1"))
    if fmt != FORMAT_VERSION:
        raise ConfigError(f"[output] format_version: unsupported version {fmt}")

    include_factor = _parse_bool(
        "transform",
        "include_jacobian_factor",
        parser["transform"].get("include_jacobian_factor", "false"),
    )

    reference = None
    if "reference" in parser:
        ref = parser["reference"]
        window = _parse_floats("reference", "window", ref.get("window", "0 300"))
        if len(window) != 2:
            raise ConfigError("[reference] window: expected two numbers")
        mode = ref.get("mode", "truncated")
        if mode not in ("truncated", "self"):
            raise ConfigError(f"[reference] mode: expected truncated or self, got {mode!r}")
        reference = {
            "z_max": _parse_float("reference", "z_max", need("reference", "z_max")),
            "Nz": _parse_int("reference", "Nz", need("reference", "Nz")),
            "dt": _parse_float("reference", "dt", ref["dt"]) if "dt" in ref else None,
            "window": tuple(window),
            "mode": mode,
        }

    conditions = None
    if "conditions" in parser:
        cond = parser["conditions"]
        bounds = _parse_floats("conditions", "bounds", need("conditions", "bounds"))
        if len(bounds) != S:
            raise ConfigError(f"[conditions] bounds: need one bound per species ({S})")
        conditions = {
            "bounds": bounds,
            "samples_per_axis": _parse_int(
                "conditions", "samples_per_axis", cond.get("samples_per_axis", "21")
            ),
        }

    raw = {section: dict(parser[section]) for section in parser.sections()}
    raw["__origin__"] = origin
    try:
        return RunConfig(
            problem=problem,
            a=_parse_float("transform", "a", need("transform", "a")),
            include_jacobian_factor=include_factor,
            n_list=n_list,
            dt=_parse_float("time", "dt", need("time", "dt")),
            source=SourceConfig(
                h=_parse_float("source", "h", parser["source"].get("h", "0.005")),
                include_jacobian_factor=include_factor,
            ),
            solver=SolverConfig(
                newton_tol=_parse_float("solver", "newton_tol", solver_sec.get("newton_tol", "1e-10")),
                newton_max_iter=_parse_int(
                    "solver", "newton_max_iter", solver_sec.get("newton_max_iter", "25")
                ),
                nonneg_monitor=_parse_bool(
                    "solver", "nonneg_monitor", solver_sec.get("nonneg_monitor", "true")
                ),
                snapshot_every=_parse_int(
                    "output", "snapshot_every", output_sec.get("snapshot_every", "10")
                ),
            ),
            snapshot_every=_parse_int(
                "output", "snapshot_every", output_sec.get("snapshot_every", "10")
            ),
            output_dir=output_sec.get("directory", "out"),
            reference=reference,
            conditions=conditions,
            raw=raw,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _resolve_output_dir(cfg: RunConfig, cli_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(cfg.output_dir)


def _fmt(value: float) -> str:
    return format(value, ".17g")


def write_solution_csv(path: Path, solution: Solution, a: float) -> None:
    """One row per (snapshot, node, species): t,i,xi,z,species,value with
    1-based node and species indices and 17 significant digits.  The pinned
    node at xi = 1 maps to z = inf."""
    nodes = solution.nodes
    z = np.empty(nodes.size)
    z[:-1] = xi_to_z(a, nodes[:-1])
    z[-1] = np.inf
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for t, field in zip(solution.times, solution.fields):
            t_txt = _fmt(float(t))
            for i in range(nodes.size):
                prefix = f"{t_txt},{i + 1},{_fmt(nodes[i])},{_fmt(z[i])}"
                for s in range(field.shape[0]):
                    fh.write(f"{prefix},{s + 1},{_fmt(field[s, i])}\n")


def write_rates_csv(path: Path, table: RateTable) -> None:
    S = table.species_count
    header = ["xi"]
    for s in range(1, S + 1):
        header += [f"n{s}", f"n{s}_defined"]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(table.xi.size):
            row = [_fmt(table.xi[i])]
            for s in range(S):
                row += [_fmt(table.rates[s, i]), "1" if table.defined[s, i] else "0"]
            fh.write(",".join(row) + "\n")


def _monitor_dict(solution: Solution) -> dict:
    return {
        "steps": int(solution.newton_iterations.size),
        "newton_iterations": solution.newton_iterations.tolist(),
        "max_newton_iterations": int(solution.newton_iterations.max(initial=0)),
        "min_values": solution.min_values.tolist(),
        "min_value": float(np.nanmin(solution.min_values))
        if solution.min_values.size
        else None,
        "mass_residuals_max": solution.mass_residuals.max(axis=0).tolist()
        if solution.mass_residuals.size
        else [],
    }


def _write_metadata(path: Path, cfg: RunConfig, command: str, extra: dict) -> None:
    meta = {
        "tool": "aircolumn",
        "version": __version__,
        "command": command,
        "created": _time.strftime("%Y-%m-%dT%H:%M:%S", _time.gmtime()),
        "format_version": FORMAT_VERSION,
        "config": cfg.raw,
        "derived": {
            "xi_star": [
                float(np.tanh(cfg.a * spec.z_star)) for spec in cfg.problem.species
            ],
            "z_star": [float(spec.z_star) for spec in cfg.problem.species],
            "regularization_h": cfg.source.h,
            "include_jacobian_factor": cfg.include_jacobian_factor,
        },
    }
    meta.update(extra)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _run_single(cfg: RunConfig, n: int) -> Solution:
    tp = transform_problem(cfg.problem, cfg.a, cfg.include_jacobian_factor)
    grid = build_uniform_grid(n)
    time_grid = build_time_grid(cfg.problem.T, cfg.dt)
    return march(tp, grid, time_grid, cfg.solver, cfg.source)


def cmd_solve(cfg: RunConfig, out_dir: Path) -> int:
    solution = _run_single(cfg, cfg.n_list[0])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_solution_csv(out_dir / "solution.csv", solution, cfg.a)
    _write_metadata(
        out_dir / "metadata.json",
        cfg,
        "solve",
        {"grid_intervals": cfg.n_list[0], "monitors": _monitor_dict(solution)},
    )
    print(f"wrote {out_dir / 'solution.csv'} ({len(solution.times)} snapshots)")
    return EXIT_OK


def cmd_runge(cfg: RunConfig, out_dir: Path) -> int:
    if len(cfg.n_list) != 3:
        raise ConfigError("[grid] N: the convergence study needs exactly three interval counts")
    n0 = cfg.n_list[0]
    if cfg.n_list != [n0, 2 * n0, 4 * n0]:
        raise ConfigError(f"[grid] N: counts must be nested as N, 2N, 4N, got {cfg.n_list}")
    with ThreadPoolExecutor(max_workers=3) as pool:
        solutions = list(pool.map(lambda n: _run_single(cfg, n), cfg.n_list))
    table = runge_rates(
        solutions[0].final, solutions[1].final, solutions[2].final, build_uniform_grid(n0)
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_rates_csv(out_dir / "rates.csv", table)
    _write_metadata(
        out_dir / "metadata.json",
        cfg,
        "runge",
        {
            "grid_intervals": cfg.n_list,
            "regularization_fixed_across_grids": True,
            "monitors": {f"N{n}": _monitor_dict(sol) for n, sol in zip(cfg.n_list, solutions)},
        },
    )
    defined = int(table.defined.sum())
    print(f"wrote {out_dir / 'rates.csv'} ({defined} defined rates)")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.reference is None:
        raise ConfigError("missing required section [reference]")
    fitted = _run_single(cfg, cfg.n_list[0])
    tp = transform_problem(cfg.problem, cfg.a, cfg.include_jacobian_factor)
    ref_meta: dict
    if cfg.reference["mode"] == "self":
        report = compare(fitted, tp, fitted, cfg.reference["window"])
        ref_meta = {"mode": "self"}
    else:
        tcfg = TruncatedConfig(
            z_max=cfg.reference["z_max"],
            Nz=cfg.reference["Nz"],
            dt=cfg.reference["dt"] or cfg.dt,
            source_half_widths=matched_source_half_widths(tp, cfg.source),
        )
        ref_sol = solve_truncated(cfg.problem, tcfg, cfg.solver)
        report = compare(fitted, tp, ref_sol, cfg.reference["window"])
        ref_meta = {
            "mode": "truncated",
            "z_max": tcfg.z_max,
            "Nz": tcfg.Nz,
            "dt": tcfg.dt,
            "source_half_widths": np.asarray(tcfg.source_half_widths).tolist(),
        }
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "fitted_grid_intervals": cfg.n_list[0],
        "reference": ref_meta,
        "window": list(report.z_window),
        "points": report.n_points,
        "rel_l2": report.rel_l2.tolist(),
        "rel_max": report.rel_max.tolist(),
    }
    (out_dir / "compare.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _write_metadata(out_dir / "metadata.json", cfg, "compare", {"report": payload})
    worst = float(report.rel_l2.max())
    print(f"wrote {out_dir / 'compare.json'} (worst relative L2 {worst:.3e})")
    return EXIT_OK


def cmd_check_conditions(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.conditions is None:
        raise ConfigError("missing required section [conditions]")
    tp = transform_problem(cfg.problem, cfg.a, cfg.include_jacobian_factor)
    grid = build_uniform_grid(cfg.n_list[0])
    report = check_positivity_conditions(
        tp, cfg.conditions["bounds"], cfg.conditions["samples_per_axis"], grid
    )
    out_dir.mkdir(parents=True, exist_ok=True)

    def witness_list(entries):
        return [
            {"species": s + 1, "xi": xi, "concentrations": list(c), "value": value}
            for s, xi, c, value in entries
        ]

    payload = {
        "bounds": report.bounds.tolist(),
        "samples_per_axis": report.samples_per_axis,
        "points_checked": report.points_checked,
        "zero_floor_ok": report.floor_ok,
        "upper_bound_ok": report.bound_ok,
        "zero_floor_violations": witness_list(report.floor_violations[:100]),
        "upper_bound_violations": witness_list(report.bound_violations[:100]),
    }
    (out_dir / "conditions.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _write_metadata(out_dir / "metadata.json", cfg, "check-conditions", {"report": payload})
    if not report.floor_ok:
        print(
            f"zero-floor condition violated at {len(report.floor_violations)} sample points",
            file=sys.stderr,
        )
        return EXIT_FINDINGS
    print("zero-floor condition holds on the sampled lattice")
    if not report.bound_ok:
        print(
            f"note: upper-bound condition fails at {len(report.bound_violations)} sample points "
            "(reported, non-fatal)"
        )
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "runge": cmd_runge,
    "compare": cmd_compare,
    "check-conditions": cmd_check_conditions,
}


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aircolumn",
        description="Fitted finite volume solver for vertical-column "
        "advection-diffusion-reaction systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "run one solve and write the solution CSV"),
        ("runge", "three nested-grid solves plus the convergence-rate table"),
        ("compare", "cross-check the fitted solver against a truncated-domain solve"),
        ("check-conditions", "sample the positivity/boundedness conditions"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument(
            "--config", required=True, help="config file path or bundled preset name (paper-s4)"
        )
        cmd.add_argument(
            "--out",
            default=None,
            help=f"output directory (default: [output] directory, or ${OUTPUT_DIR_ENV})",
        )
    return parser


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, ProblemValidationError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = _resolve_output_dir(cfg, args.out)
    try:
        return _COMMANDS[args.command](cfg, out_dir)
    except (ConfigError, ProblemValidationError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NewtonConvergenceError, SingularBlockError) as err:
        context = err.__cause__
        print(f"solver failure: {err}" + (f" [{context}]" if context else ""), file=sys.stderr)
        return EXIT_SOLVER
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
