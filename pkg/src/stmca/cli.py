"""Command-line front end: config-driven simulation and analysis runs.

Subcommands: simulate | grid | moments-dump | estimate | convergence.
Every output file records the master seed; the only nondeterministic content
is a single timing line (timestamp + wall seconds), so re-runs with the same
seed are byte-identical apart from that one line. CSV uses '.' decimals.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .analysis import (
    EmpiricalLaw,
    ReferenceKernel,
    rate_fit,
    reference_kernel,
    wasserstein_to_kernel,
)
from .config import RunConfig, build_grid, build_spec, load_config, serialize_config
from .errors import ConfigError, StmcaError, UnsupportedMethodError
from .estimators import (
    indicator_band,
    local_time_stat,
    mc_report,
    observation_fraction,
    path_samples,
    stickiness_estimator,
)
from .grid import metrics as grid_metrics
from .rng import RngSpec
from .walk import build_table, simulate, terminal_values

_CODE_NAMES = {
    _kernels.REFLECT: "reflect",
    _kernels.ABSORB: "absorb",
    _kernels.EDGE: "window_edge",
}


def _fmt(v) -> str:
    """CSV cell: repr of the float ('.' decimal), empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    return "" if math.isnan(f) else repr(f)


def _clean(v):
    """JSON value: NaN becomes null so payloads stay strict JSON."""
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


class _Run:
    """Shared output context: directory, seed, start time, written files."""

    def __init__(self, command: str, cfg: RunConfig, out_dir: str, master_seed: int):
        self.command = command
        self.cfg = cfg
        self.dir = Path(out_dir)
        self.master_seed = master_seed
        self.t0 = time.monotonic()
        self.written = []
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {out_dir!r} is not writable: {exc}") from exc

    def _timing(self) -> str:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return f"generated_at={stamp} wall_seconds={time.monotonic() - self.t0:.3f}"

    def write_csv(self, name: str, columns, rows) -> Path:
        path = self.dir / name
        lines = [
            f"# stmca {self.command}",
            f"# master_seed={self.master_seed}",
            f"# timing: {self._timing()}",
            ",".join(columns),
        ]
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        self._write_text(path, "\n".join(lines) + "\n")
        return path

    def write_json(self, name: str, payload: dict) -> Path:
        doc = {
            "command": self.command,
            "master_seed": self.master_seed,
            "timing": self._timing(),
        }
        doc.update(payload)
        path = self.dir / name
        self._write_text(path, json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
        return path

    def _write_text(self, path: Path, text: str):
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from exc
        self.written.append(path)

    def record(self, path: Path):
        self.written.append(path)


def _maybe_kernel(spec, x0: float, t: float) -> Optional[ReferenceKernel]:
    """Closed-form terminal kernel when the catalog has one, else None."""
    if spec.preset not in ("bm", "ou", "skew_bm", "sticky_bm", "cir"):
        return None
    try:
        return reference_kernel(spec.preset, spec.params, x0, t)
    except StmcaError:
        return None


def _require_kernel(spec, x0: float, t: float) -> ReferenceKernel:
    kernel = _maybe_kernel(spec, x0, t)
    if kernel is None:
        raise UnsupportedMethodError(
            f"no closed-form reference law for preset {spec.preset!r} from x0={x0}"
        )
    return kernel


def _kernel_quantiles(kernel: ReferenceKernel, levels: np.ndarray, n_mesh: int = 20001) -> np.ndarray:
    """Quantile function of the kernel, inverted from a dense tabulated CDF."""
    lo, hi = kernel.support
    xs = np.linspace(lo, hi, n_mesh)
    extra = list(kernel.kinks)
    if kernel.atom is not None:
        extra.append(kernel.atom[0])
    if extra:
        xs = np.unique(np.concatenate([xs, np.asarray(extra, dtype=float)]))
    cdf = np.asarray(kernel.cdf(xs), dtype=float)
    cdf = np.maximum.accumulate(cdf)
    return np.interp(levels, cdf, xs)


def _wasserstein_p(law: EmpiricalLaw, kernel: ReferenceKernel, p: float) -> float:
    if p == 1.0:
        return wasserstein_to_kernel(law, kernel)
    n = len(law.samples)
    levels = (np.arange(n) + 0.5) / n
    q = _kernel_quantiles(kernel, levels)
    return float(np.mean(np.abs(law.samples - q) ** p) ** (1.0 / p))


def cmd_simulate(cfg: RunConfig, out_dir: str, master_seed: int, threads: int) -> _Run:
    run = _Run("simulate", cfg, out_dir, master_seed)
    spec = build_spec(cfg)
    grid = build_grid(cfg, spec)
    table = build_table(spec, grid, cfg.run["method"], cfg.run["quad_panels"])
    x0 = cfg.run["x0"]
    n_paths = cfg.run["n_paths"]
    summary = []
    for i, horizon in enumerate(cfg.run["horizons"]):
        rng = RngSpec(master_seed, i * n_paths)
        values, truncated, absorbed = terminal_values(
            spec, grid, table, x0, horizon, rng, n_paths, threads=threads
        )
        order = np.argsort(values, kind="stable")
        run.write_csv(
            f"samples_{i}.csv",
            ["path", "value", "truncated", "absorbed"],
            [(int(j), values[j], bool(truncated[j]), bool(absorbed[j])) for j in order],
        )
        kernel = _maybe_kernel(spec, x0, horizon)
        counts, edges = np.histogram(values, bins=80)
        mids = 0.5 * (edges[:-1] + edges[1:])
        ref_at_mid = (
            np.asarray(kernel.density(mids), dtype=float)
            if kernel is not None else [None] * len(mids)
        )
        run.write_csv(
            f"hist_{i}.csv",
            ["bin_left", "bin_right", "count", "reference_density_mid"],
            [
                (edges[k], edges[k + 1], int(counts[k]), ref_at_mid[k])
                for k in range(len(counts))
            ],
        )
        entry = {
            "horizon": horizon,
            "n_paths": n_paths,
            "mc_mean": float(np.mean(values)),
            "mc_variance": float(np.var(values, ddof=1)) if n_paths > 1 else 0.0,
            "truncated_count": int(np.sum(truncated)),
            "absorbed_count": int(np.sum(absorbed)),
        }
        if kernel is not None:
            entry["reference"] = {
                "mean": _clean(kernel.mean) if kernel.mean is not None else None,
                "variance": _clean(kernel.variance) if kernel.variance is not None else None,
                "w1": wasserstein_to_kernel(EmpiricalLaw(values, horizon), kernel),
            }
        summary.append(entry)
        if cfg.output["figures"]:
            from .report import histogram_figure

            fig_path = run.dir / f"terminal_{i}.png"
            histogram_figure(
                str(fig_path), values, horizon, kernel=kernel,
                title=f"{spec.preset or 'sde'} terminal law at T={horizon:g}",
            )
            run.record(fig_path)
    run.write_json("summary.json", {
        "diffusion": cfg.diffusion,
        "x0": x0,
        "grid_points": len(grid),
        "horizons": summary,
    })
    return run


def cmd_grid(cfg: RunConfig, out_dir: str, master_seed: int) -> _Run:
    run = _Run("grid", cfg, out_dir, master_seed)
    spec = build_spec(cfg)
    grid = build_grid(cfg, spec)
    run.write_csv("grid.csv", ["x"], [(x,) for x in grid.points])
    m = grid_metrics(spec, grid)
    run.write_json("metrics.json", {
        "grid": cfg.grid,
        "n_points": len(grid),
        "max_cell": m.max_cell,
        "x_norm": m.x_norm,
    })
    return run


def cmd_moments_dump(cfg: RunConfig, out_dir: str, master_seed: int) -> _Run:
    run = _Run("moments-dump", cfg, out_dir, master_seed)
    spec = build_spec(cfg)
    grid = build_grid(cfg, spec)
    table = build_table(spec, grid, cfg.run["method"], cfg.run["quad_panels"])
    pts = grid.points
    rows = []
    for j in range(1, len(pts) - 1):
        p = table.p_plus[j]
        tp = table.t_plus[j]
        tm = table.t_minus[j]
        v1 = tp * p
        v1b = tm * (1.0 - p)
        rows.append((j, pts[j - 1], pts[j], pts[j + 1], p, v1, v1b,
                     p, tp, tm, bool(table.one_sided[j])))
    run.write_csv(
        "moments.csv",
        ["j", "a", "x", "b", "v0", "v1", "v1_bar", "p_plus", "t_plus", "t_minus", "one_sided"],
        rows,
    )
    m = grid_metrics(spec, grid)
    run.write_json("moments.json", {
        "method": table.method,
        "n_points": len(grid),
        "max_cell": m.max_cell,
        "x_norm": m.x_norm,
        "left_rule": {"kind": _CODE_NAMES[table.left_code], "jump_time": table.left_time},
        "right_rule": {"kind": _CODE_NAMES[table.right_code], "jump_time": table.right_time},
    })
    return run


def cmd_estimate(cfg: RunConfig, out_dir: str, master_seed: int) -> _Run:
    if cfg.estimator is None:
        raise ConfigError("estimate needs an estimator block in the config")
    run = _Run("estimate", cfg, out_dir, master_seed)
    spec = build_spec(cfg)
    if len(spec.speed.atoms) != 1:
        raise ConfigError("estimate needs a diffusion with exactly one sticky atom")
    atom = spec.speed.atoms[0][0]
    grid = build_grid(cfg, spec)
    table = build_table(spec, grid, cfg.run["method"], cfg.run["quad_panels"])
    est = cfg.estimator
    g = indicator_band(est["g"]["inner"], est["g"]["outer"])
    n, n_mc, t = est["n"], est["n_mc"], est["t"]
    x0 = cfg.run["x0"]
    all_samples = []
    for i in range(n_mc):
        path = simulate(spec, grid, table, x0, t, RngSpec(master_seed, i))
        all_samples.append(path_samples(path, n, t))
        del path
    rows = []
    json_rows = []
    for alpha in est["alphas"]:
        estimates, accs = [], []
        for xs in all_samples:
            # samples do not depend on alpha, so they are computed once per path
            estimates.append(stickiness_estimator(None, n, alpha, g, t, atom=atom, samples=xs))
            accs.append(observation_fraction(None, n, alpha, g, t, samples=xs))
        rep = mc_report(estimates, accs)
        rows.append((alpha, rep.rho_hat_mc, rep.s2_mc, rep.sigma_mc,
                     rep.acc_hat, rep.rej_count, rep.n_mc))
        json_rows.append({
            "alpha": alpha,
            "rho_hat_mc": _clean(rep.rho_hat_mc),
            "s2_mc": _clean(rep.s2_mc),
            "sigma_mc": _clean(rep.sigma_mc),
            "acc_hat": rep.acc_hat,
            "rej_count": rep.rej_count,
            "n_mc": rep.n_mc,
            "rejected_all": rep.rejected_all,
        })
    run.write_csv(
        "estimate.csv",
        ["alpha", "rho_hat_mc", "s2_mc", "sigma_mc", "acc_hat", "rej_count", "n_mc"],
        rows,
    )
    run.write_json("estimate.json", {
        "n": n, "t": t, "atom": atom,
        "g": est["g"],
        "rows": json_rows,
    })
    return run


def cmd_convergence(cfg: RunConfig, out_dir: str, master_seed: int, threads: int) -> _Run:
    if cfg.convergence is None:
        raise ConfigError("convergence needs a convergence block in the config")
    run = _Run("convergence", cfg, out_dir, master_seed)
    spec = build_spec(cfg)
    x0 = cfg.run["x0"]
    horizon = cfg.run["horizons"][0]
    n_paths = cfg.run["n_paths"]
    kernel = _require_kernel(spec, x0, horizon)
    h_values = cfg.convergence["h_values"]
    p_values = cfg.convergence["p_values"]
    per_h = []
    for i, h in enumerate(h_values):
        grid = build_grid(cfg, spec, h=h)
        table = build_table(spec, grid, cfg.run["method"], cfg.run["quad_panels"])
        m = grid_metrics(spec, grid)
        rng = RngSpec(master_seed, i * n_paths)
        values, _, _ = terminal_values(
            spec, grid, table, x0, horizon, rng, n_paths, threads=threads
        )
        law = EmpiricalLaw(values, horizon)
        errs = {p: _wasserstein_p(law, kernel, p) for p in p_values}
        per_h.append((h, m.max_cell, m.x_norm, errs))
    rows = []
    fits_payload = {}
    fig_fits = []
    for p in p_values:
        pts_x = [(xn, errs[p]) for _, _, xn, errs in per_h]
        pts_c = [(mc, errs[p]) for _, mc, _, errs in per_h]
        fit_x = rate_fit(pts_x)
        fit_c = rate_fit(pts_c)
        fits_payload[f"p={p:g}"] = {
            "points": [
                {"h": h, "max_cell": mc, "x_norm": xn, "error": errs[p]}
                for h, mc, xn, errs in per_h
            ],
            "slope_vs_x_norm": fit_x.slope,
            "r2_vs_x_norm": fit_x.r2,
            "slope_vs_max_cell": fit_c.slope,
            "r2_vs_max_cell": fit_c.r2,
        }
        fig_fits.append((f"W_{p:g}", fit_x))
        rows.extend(
            (p, h, mc, xn, errs[p]) for h, mc, xn, errs in per_h
        )
    run.write_csv(
        "convergence.csv",
        ["p", "h", "max_cell", "x_norm", "error"],
        rows,
    )
    run.write_json("convergence.json", {
        "reference": kernel.name,
        "horizon": horizon,
        "n_paths": n_paths,
        "fits": fits_payload,
    })
    if cfg.output["figures"]:
        from .report import convergence_figure

        fig_path = run.dir / "convergence.png"
        convergence_figure(str(fig_path), fig_fits, "grid metric ||g||_X",
                           title=f"{spec.preset or 'sde'} convergence at T={horizon:g}")
        run.record(fig_path)
    return run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stmca",
        description="Simulate one-dimensional general diffusions as grid walks.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in (
        ("simulate", "run terminal-value Monte Carlo and write samples + summary"),
        ("grid", "build the configured grid and dump points + metrics"),
        ("moments-dump", "dump the per-cell transition table"),
        ("estimate", "estimate the stickiness parameter over alpha values"),
        ("convergence", "fit Wasserstein error rates over a ladder of grids"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the YAML run config")
        sp.add_argument("--seed", type=int, default=None,
                        help="override run.master_seed from the config")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads for batch simulation")
        sp.add_argument("--out", default=None,
                        help="override output.directory from the config")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        master_seed = cfg.run["master_seed"] if args.seed is None else args.seed
        out_dir = cfg.output["directory"] if args.out is None else args.out
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.subcommand == "simulate":
            run = cmd_simulate(cfg, out_dir, master_seed, args.threads)
        elif args.subcommand == "grid":
            run = cmd_grid(cfg, out_dir, master_seed)
        elif args.subcommand == "moments-dump":
            run = cmd_moments_dump(cfg, out_dir, master_seed)
        elif args.subcommand == "estimate":
            run = cmd_estimate(cfg, out_dir, master_seed)
        else:
            run = cmd_convergence(cfg, out_dir, master_seed, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StmcaError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    for path in run.written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
