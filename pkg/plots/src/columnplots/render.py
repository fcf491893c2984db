"""Render solver output CSVs into static figures.

Consumes the `aircolumn` CLI's file formats verbatim:

* solution CSV, header `t,i,xi,z,species,value`, one row per
  (snapshot, node, species), 1-based indices, `z = inf` on the pinned node;
* rates CSV, header `xi,n1,n1_defined,n2,n2_defined,...`;
* optional metadata JSON sidecar (for marking source heights).

Output is a pure function of the input files and job options; inputs are
never modified.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SOLUTION_COLUMNS = ["t", "i", "xi", "z", "species", "value"]


class InputFormatError(ValueError):
    pass


@dataclass
class PlotJob:
    csv_path: Path
    output_dir: Path
    z_window: tuple = (0.0, 300.0)
    color_bounds: tuple | None = None  # (vmin, vmax); None = auto per species
    metadata_path: Path | None = None


@dataclass
class SolutionData:
    times: np.ndarray  # (n_snapshots,)
    z: np.ndarray  # (n_nodes,) heights; inf on the pinned node
    fields: np.ndarray  # (n_species, n_snapshots, n_nodes)


def _check_header(line: str, expected: list) -> None:
    got = [c.strip() for c in line.strip().split(",")]
    for column in expected:
        if column not in got:
            raise InputFormatError(f"missing column {column!r} in header {line.strip()!r}")


def _load_rows(fh, path) -> np.ndarray:
    rows = [line for line in fh if line.strip()]
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    try:
        return np.loadtxt(rows, delimiter=",", ndmin=2)
    except ValueError as err:
        raise InputFormatError(f"{path}: malformed row ({err})") from None


def read_solution_csv(path) -> SolutionData:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        if not header:
            raise InputFormatError(f"{path}: empty file")
        _check_header(header, SOLUTION_COLUMNS)
        raw = _load_rows(fh, path)
    times = np.unique(raw[:, 0])
    node_ids = np.unique(raw[:, 1]).astype(int)
    species_ids = np.unique(raw[:, 4]).astype(int)
    n_t, n_i, n_s = times.size, node_ids.size, species_ids.size
    if raw.shape[0] != n_t * n_i * n_s:
        raise InputFormatError(
            f"{path}: expected {n_t * n_i * n_s} rows for a full grid, got {raw.shape[0]}"
        )
    order = np.lexsort((raw[:, 4], raw[:, 1], raw[:, 0]))
    raw = raw[order]
    z = raw[:n_i * n_s:n_s, 3]
    fields = raw[:, 5].reshape(n_t, n_i, n_s).transpose(2, 0, 1)
    return SolutionData(times=times, z=z, fields=fields)


def _source_heights(job: PlotJob) -> list:
    meta_path = job.metadata_path
    if meta_path is None:
        sibling = job.csv_path.parent / "metadata.json"
        meta_path = sibling if sibling.exists() else None
    if meta_path is None:
        return []
    try:
        meta = json.loads(Path(meta_path).read_text())
        return [float(v) for v in meta["derived"]["z_star"]]
    except (OSError, KeyError, ValueError, TypeError):
        return []


def render_heatmaps(job: PlotJob) -> list:
    """One (t, z) concentration heatmap per species; returns the paths."""
    data = read_solution_csv(job.csv_path)
    if data.times.size < 2:
        raise InputFormatError("need at least two snapshots for a time axis")
    z_lo, z_hi = job.z_window
    inside = np.isfinite(data.z) & (data.z >= z_lo) & (data.z <= z_hi)
    if inside.sum() < 2:
        raise InputFormatError(f"window [{z_lo}, {z_hi}] contains fewer than two nodes")
    marks = _source_heights(job)
    job.output_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for s in range(data.fields.shape[0]):
        field = data.fields[s][:, inside]
        vmin, vmax = job.color_bounds if job.color_bounds else (None, None)
        fig, ax = plt.subplots(figsize=(6, 4.2))
        mesh = ax.pcolormesh(
            data.times, data.z[inside], field.T, shading="nearest", vmin=vmin, vmax=vmax
        )
        fig.colorbar(mesh, ax=ax, label="concentration")
        for z_star in marks:
            if z_lo < z_star <= z_hi and z_star > 0:
                ax.axhline(z_star, color="white", linestyle="--", linewidth=0.8, alpha=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("z")
        ax.set_title(f"c{s + 1}(t, z)")
        out = job.output_dir / f"heatmap_species{s + 1}.png"
        fig.savefig(out, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(out)
    return paths


def read_rates_csv(path):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        if not header:
            raise InputFormatError(f"{path}: empty file")
        columns = [c.strip() for c in header.strip().split(",")]
        if not columns or columns[0] != "xi":
            raise InputFormatError(f"missing column 'xi' in header {header.strip()!r}")
        n_species = 0
        while f"n{n_species + 1}" in columns:
            if f"n{n_species + 1}_defined" not in columns:
                raise InputFormatError(f"missing column 'n{n_species + 1}_defined'")
            n_species += 1
        if n_species == 0:
            raise InputFormatError("no rate columns (n1, n2, ...) in header")
        raw = _load_rows(fh, path)
    xi = raw[:, 0]
    rates = raw[:, 1 : 1 + 2 * n_species : 2].T
    defined = raw[:, 2 : 2 + 2 * n_species : 2].T.astype(bool)
    return xi, rates, defined


def render_rate_table(job: PlotJob, block_width: int = 15) -> Path:
    """Markdown table of the observed orders: one xi row and one row per
    species, 2-decimal rates, an em dash for undefined entries, chunked
    into blocks of `block_width` columns."""
    xi, rates, defined = read_rates_csv(job.csv_path)
    job.output_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for start in range(0, xi.size, block_width):
        sl = slice(start, min(start + block_width, xi.size))
        width = xi[sl].size
        lines.append("| xi | " + " | ".join(f"{v:.2f}" for v in xi[sl]) + " |")
        lines.append("|" + " --- |" * (width + 1))
        for s in range(rates.shape[0]):
            cells = [
                f"{rates[s, i]:.2f}" if defined[s, i] else "—"
                for i in range(sl.start, sl.stop)
            ]
            lines.append(f"| n{s + 1} | " + " | ".join(cells) + " |")
        lines.append("")
    out = job.output_dir / "rate_table.md"
    out.write_text("\n".join(lines))
    return out


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="columnplots", description="Render aircolumn CSV outputs to static figures"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    heat = sub.add_parser("heatmaps", help="one (t, z) heatmap per species from a solution CSV")
    heat.add_argument("--csv", required=True, help="solution.csv path")
    heat.add_argument("--out-dir", required=True, help="directory for the PNG files")
    heat.add_argument(
        "--z-window", nargs=2, type=float, default=(0.0, 300.0), metavar=("LO", "HI")
    )
    heat.add_argument(
        "--color-bounds", nargs=2, type=float, default=None, metavar=("VMIN", "VMAX")
    )
    heat.add_argument("--metadata", default=None, help="metadata.json (for source-height marks)")
    rate = sub.add_parser("rate-table", help="markdown table from a rates CSV")
    rate.add_argument("--csv", required=True, help="rates.csv path")
    rate.add_argument("--out-dir", required=True, help="directory for rate_table.md")
    return parser


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    job = PlotJob(
        csv_path=Path(args.csv),
        output_dir=Path(args.out_dir),
        z_window=tuple(getattr(args, "z_window", (0.0, 300.0))),
        color_bounds=tuple(args.color_bounds) if getattr(args, "color_bounds", None) else None,
        metadata_path=Path(args.metadata) if getattr(args, "metadata", None) else None,
    )
    try:
        if args.command == "heatmaps":
            for path in render_heatmaps(job):
                print(f"wrote {path}")
        else:
            print(f"wrote {render_rate_table(job)}")
    except (InputFormatError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
