"""Command-line interface: outputs, determinism, exit codes."""
import json
import textwrap

import numpy as np
import pytest

from stmca.cli import main


def _write_cfg(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return str(path)


def _bm_cfg(tmp_path, out_dir, figures="true"):
    return _write_cfg(tmp_path, f"""\
        diffusion: {{preset: bm}}
        grid: {{kind: uniform, h: 0.1, window: [-4, 4]}}
        run: {{x0: 0.0, horizons: [0.5, 1.0], n_paths: 40, master_seed: 7}}
        output: {{directory: {out_dir}, figures: {figures}}}
    """)


def _nondeterministic_lines(path):
    """Indices of lines that legitimately differ between identical re-runs."""
    out = []
    for i, line in enumerate(path.read_text().splitlines()):
        if line.startswith("# timing:") or '"timing":' in line:
            out.append(i)
    return out


def _assert_rerun_identical(tmp_path, argv, out_dir, capsys):
    """Both runs exit 0; every text file differs in exactly one timing line."""
    assert main(argv) == 0
    first = {p.name: p.read_text() for p in out_dir.iterdir() if p.suffix != ".png"}
    capsys.readouterr()
    assert main(argv) == 0
    for p in sorted(out_dir.iterdir()):
        if p.suffix == ".png":
            continue
        a = first[p.name].splitlines()
        b = p.read_text().splitlines()
        assert len(a) == len(b)
        diff = [i for i, (x, y) in enumerate(zip(a, b)) if x != y]
        nondet = _nondeterministic_lines(p)
        assert len(nondet) == 1, f"{p.name} must have exactly one timing line"
        assert diff == [] or diff == nondet, f"{p.name} differs beyond timing: {diff}"


def test_simulate_outputs_and_determinism(tmp_path, capsys):
    out_dir = tmp_path / "out"
    cfg = _bm_cfg(tmp_path, out_dir)
    argv = ["simulate", "--config", cfg]
    _assert_rerun_identical(tmp_path, argv, out_dir, capsys)
    for name in ("samples_0.csv", "samples_1.csv", "hist_0.csv", "hist_1.csv",
                 "summary.json", "terminal_0.png", "terminal_1.png"):
        assert (out_dir / name).exists()
    lines = (out_dir / "samples_0.csv").read_text().splitlines()
    assert lines[0] == "# stmca simulate"
    assert lines[1] == "# master_seed=7"
    assert lines[3] == "path,value,truncated,absorbed"
    values = [float(l.split(",")[1]) for l in lines[4:]]
    assert values == sorted(values) and len(values) == 40
    doc = json.loads((out_dir / "summary.json").read_text())
    assert doc["command"] == "simulate" and doc["master_seed"] == 7
    assert len(doc["horizons"]) == 2
    assert doc["horizons"][0]["reference"]["mean"] == 0.0
    assert doc["horizons"][1]["reference"]["variance"] == 1.0


def test_simulate_respects_figures_off(tmp_path):
    out_dir = tmp_path / "out"
    cfg = _bm_cfg(tmp_path, out_dir, figures="false")
    assert main(["simulate", "--config", cfg]) == 0
    assert not list(out_dir.glob("*.png"))


def test_seed_override(tmp_path, capsys):
    out_dir = tmp_path / "out"
    cfg = _bm_cfg(tmp_path, out_dir, figures="false")
    assert main(["simulate", "--config", cfg, "--seed", "123"]) == 0
    lines = (out_dir / "samples_0.csv").read_text().splitlines()
    assert lines[1] == "# master_seed=123"
    doc = json.loads((out_dir / "summary.json").read_text())
    assert doc["master_seed"] == 123


def test_grid_export_reimport(tmp_path, capsys):
    out_dir = tmp_path / "g"
    cfg = _write_cfg(tmp_path, f"""\
        diffusion: {{preset: sticky_bm, params: {{rho: 1.0}}}}
        grid: {{kind: tuned, h: 0.1, window: [-2, 2]}}
        run: {{x0: 0.0, horizons: [1.0], n_paths: 1, master_seed: 0}}
        output: {{directory: {out_dir}}}
    """)
    assert main(["grid", "--config", cfg]) == 0
    pts = [float(l) for l in (out_dir / "grid.csv").read_text().splitlines()[4:]]
    met = json.loads((out_dir / "metrics.json").read_text())
    assert met["n_points"] == len(pts)
    assert met["x_norm"] <= 8 * 0.1**2 + 1e-9

    # re-import the exported grid through kind=file and dump it again
    cfg2 = _write_cfg(tmp_path, f"""\
        diffusion: {{preset: sticky_bm, params: {{rho: 1.0}}}}
        grid: {{kind: file, path: {out_dir / 'grid.csv'}}}
        run: {{x0: 0.0, horizons: [1.0], n_paths: 1, master_seed: 0}}
        output: {{directory: {tmp_path / 'g2'}}}
    """, name="cfg2.yaml")
    assert main(["grid", "--config", cfg2]) == 0
    pts2 = [float(l) for l in (tmp_path / "g2" / "grid.csv").read_text().splitlines()[4:]]
    assert pts2 == pts


def test_moments_dump_columns(tmp_path, capsys):
    out_dir = tmp_path / "m"
    cfg = _bm_cfg(tmp_path, out_dir)
    assert main(["moments-dump", "--config", cfg]) == 0
    lines = (out_dir / "moments.csv").read_text().splitlines()
    assert lines[3] == "j,a,x,b,v0,v1,v1_bar,p_plus,t_plus,t_minus,one_sided"
    row = lines[4].split(",")
    # interior BM cell: p = 1/2, conditional times h^2
    assert abs(float(row[4]) - 0.5) < 1e-12
    assert abs(float(row[8]) - 0.01) < 1e-10
    doc = json.loads((out_dir / "moments.json").read_text())
    assert doc["left_rule"]["kind"] == "window_edge"
    assert doc["right_rule"]["kind"] == "window_edge"


def test_estimate_rejected_all_rendering(tmp_path, capsys):
    out_dir = tmp_path / "e"
    # the band sits far outside the truncation window, so no scaled sample can
    # reach it: every path is rejected and the estimate columns stay empty
    cfg = _write_cfg(tmp_path, f"""\
        diffusion: {{preset: sticky_bm, params: {{rho: 1.0}}}}
        grid: {{kind: atom_cell, h: 0.2, window: [-6, 6]}}
        run: {{x0: 0.0, horizons: [1.0], n_paths: 1, master_seed: 3}}
        output: {{directory: {out_dir}}}
        estimator: {{alphas: [0.5], n: 4, n_mc: 3, t: 1.0, g: {{inner: 50, outer: 60}}}}
    """)
    assert main(["estimate", "--config", cfg]) == 0
    data_line = (out_dir / "estimate.csv").read_text().splitlines()[4]
    cells = data_line.split(",")
    assert cells[1] == "" and cells[2] == "" and cells[3] == ""
    assert cells[5] == "3" and cells[6] == "3"
    doc = json.loads((out_dir / "estimate.json").read_text())
    assert doc["rows"][0]["rejected_all"] is True
    assert doc["rows"][0]["rho_hat_mc"] is None


def test_estimate_requires_blocks(tmp_path, capsys):
    out_dir = tmp_path / "e2"
    cfg = _bm_cfg(tmp_path, out_dir)  # no estimator block, no atom
    assert main(["estimate", "--config", cfg]) == 2


def test_convergence_outputs(tmp_path, capsys):
    out_dir = tmp_path / "c"
    cfg = _write_cfg(tmp_path, f"""\
        diffusion: {{preset: bm}}
        grid: {{kind: uniform, h: 0.1, window: [-4, 4]}}
        run: {{x0: 0.0, horizons: [1.0], n_paths: 400, master_seed: 11}}
        output: {{directory: {out_dir}}}
        convergence: {{h_values: [0.4, 0.2, 0.1], p_values: [1, 2]}}
    """)
    assert main(["convergence", "--config", cfg]) == 0
    doc = json.loads((out_dir / "convergence.json").read_text())
    assert set(doc["fits"]) == {"p=1", "p=2"}
    fit = doc["fits"]["p=1"]
    assert len(fit["points"]) == 3
    assert fit["slope_vs_x_norm"] > 0
    lines = (out_dir / "convergence.csv").read_text().splitlines()
    assert lines[3] == "p,h,max_cell,x_norm,error"
    assert len(lines) == 4 + 6  # 2 p-values x 3 grid sizes
    assert (out_dir / "convergence.png").exists()


def test_convergence_without_kernel_exits_3(tmp_path, capsys):
    out_dir = tmp_path / "c2"
    cfg = _write_cfg(tmp_path, f"""\
        diffusion:
          sde: {{drift: "0", diffusivity: "1", domain: [-inf, inf], anchor: 0.0}}
        grid: {{kind: uniform, h: 0.1, window: [-4, 4]}}
        run: {{x0: 0.0, horizons: [1.0], n_paths: 100, master_seed: 1}}
        output: {{directory: {out_dir}}}
        convergence: {{h_values: [0.4, 0.2, 0.1]}}
    """)
    assert main(["convergence", "--config", cfg]) == 3


def test_missing_and_invalid_config_exit_2(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 2
    bad = _write_cfg(tmp_path, "diffusion: {preset: bogus}\n", name="bad.yaml")
    assert main(["simulate", "--config", bad]) == 2
    cfg = _bm_cfg(tmp_path, tmp_path / "o")
    assert main(["simulate", "--config", cfg, "--threads", "0"]) == 2


def test_written_paths_printed(tmp_path, capsys):
    out_dir = tmp_path / "p"
    cfg = _bm_cfg(tmp_path, out_dir, figures="false")
    assert main(["grid", "--config", cfg]) == 0
    out = capsys.readouterr().out.splitlines()
    assert str(out_dir / "grid.csv") in out
    assert str(out_dir / "metrics.json") in out
