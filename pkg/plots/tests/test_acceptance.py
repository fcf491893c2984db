"""Secondary acceptance: render the bundled preset's real outputs.

The fixtures produce the CSVs by invoking the solver CLI as a subprocess,
which is the only interface this package depends on; the tests skip if the
solver CLI is not installed.
"""

import shutil
import subprocess

import pytest

from columnplots import PlotJob, render_heatmaps, render_rate_table

pytestmark = pytest.mark.skipif(
    shutil.which("aircolumn") is None, reason="aircolumn CLI not installed"
)


@pytest.fixture(scope="module")
def preset_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("preset")
    solve_dir, runge_dir = out / "solve", out / "runge"
    for cmd, directory in (("solve", solve_dir), ("runge", runge_dir)):
        result = subprocess.run(
            ["aircolumn", cmd, "--config", "paper-s4", "--out", str(directory)],
            capture_output=True,
            text=True,
            timeout=900,
        )
        assert result.returncode == 0, result.stderr
    return solve_dir, runge_dir


def test_acceptance_heatmaps_from_preset(preset_outputs, tmp_path):
    solve_dir, _ = preset_outputs
    job = PlotJob(csv_path=solve_dir / "solution.csv", output_dir=tmp_path / "figs")
    paths = render_heatmaps(job)
    ok = len(paths) == 3 and all(p.exists() and p.stat().st_size > 0 for p in paths)
    print(f"ACCEPTANCE secondary heatmaps: {'PASS' if ok else 'FAIL'} ({len(paths)} images)")
    assert ok


def test_acceptance_rate_table_from_preset(preset_outputs, tmp_path):
    _, runge_dir = preset_outputs
    job = PlotJob(csv_path=runge_dir / "rates.csv", output_dir=tmp_path)
    out = render_rate_table(job)
    text = out.read_text()
    blocks = [b for b in text.split("\n\n") if b.strip()]
    # 101 coarse nodes in blocks of 15, each block: xi row + rule + 3 species rows
    ok = len(blocks) == 7 and all(
        b.splitlines()[0].startswith("| xi |")
        and [r.split("|")[1].strip() for r in b.splitlines()[2:5]] == ["n1", "n2", "n3"]
        for b in blocks
    )
    print(f"ACCEPTANCE secondary rate-table: {'PASS' if ok else 'FAIL'} ({len(blocks)} blocks)")
    assert ok
