"""Run configuration: YAML schema, validation and object construction.

A config has four core blocks (diffusion, grid, run, output) plus optional
estimator and convergence blocks for the corresponding subcommands. Parsing
normalizes the document, so parse -> serialize -> parse is the identity on
the normalized form; validation errors carry the offending field path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .catalog import PRESETS
from .errors import ConfigError
from .expressions import compile_expression
from .grid import (
    Grid,
    atom_cell_grid,
    graded_atom_grid,
    tuned_grid_sde,
    tuned_grid_sticky,
    uniform_grid,
)
from .measure import (
    ABSORBING,
    REFLECTING,
    UNREACHABLE,
    BoundaryBehavior,
    DiffusionSpec,
    Interval,
    SpeedMeasure,
    from_sde,
)

GRID_KINDS = ("uniform", "tuned", "atom_cell", "graded_atom", "file")
_BOUNDARY_KINDS = (UNREACHABLE, ABSORBING, REFLECTING)


def _path(*parts) -> str:
    return ".".join(str(p) for p in parts)


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing field {_path(where, key)}")
    return block[key]


def _as_float(value, where: str) -> float:
    if isinstance(value, str):
        low = value.strip().lower()
        if low in ("inf", "+inf", "infinity"):
            return math.inf
        if low == "-inf":
            return -math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be a number, got {value!r}") from exc


def _as_pair(value, where: str):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{where} must be a [low, high] pair")
    return _as_float(value[0], where + "[0]"), _as_float(value[1], where + "[1]")


@dataclass(frozen=True)
class RunConfig:
    """Validated, normalized configuration document."""

    diffusion: dict
    grid: dict
    run: dict
    output: dict
    estimator: Optional[dict] = None
    convergence: Optional[dict] = None

    def to_dict(self) -> dict:
        doc = {
            "diffusion": self.diffusion,
            "grid": self.grid,
            "run": self.run,
            "output": self.output,
        }
        if self.estimator is not None:
            doc["estimator"] = self.estimator
        if self.convergence is not None:
            doc["convergence"] = self.convergence
        return doc


def _normalize_diffusion(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError("diffusion block must be a mapping")
    out: dict = {}
    if "preset" in block:
        name = block["preset"]
        if name not in PRESETS:
            raise ConfigError(
                f"diffusion.preset {name!r} unknown (have {sorted(PRESETS)})"
            )
        out["preset"] = name
        params = block.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("diffusion.params must be a mapping")
        norm = {}
        for k, v in params.items():
            if k == "window":
                norm[k] = list(_as_pair(v, _path("diffusion.params", k)))
            elif k == "boundary":
                if v not in (REFLECTING, ABSORBING):
                    raise ConfigError("diffusion.params.boundary must be reflecting|absorbing")
                norm[k] = v
            else:
                norm[k] = _as_float(v, _path("diffusion.params", k))
        out["params"] = norm
    elif "sde" in block:
        sde = block["sde"]
        if not isinstance(sde, dict):
            raise ConfigError("diffusion.sde must be a mapping")
        drift = _require(sde, "drift", "diffusion.sde")
        diff = _require(sde, "diffusivity", "diffusion.sde")
        compile_expression(drift)
        compile_expression(diff)
        norm = {
            "drift": str(drift),
            "diffusivity": str(diff),
            "domain": list(_as_pair(_require(sde, "domain", "diffusion.sde"), "diffusion.sde.domain")),
            "anchor": _as_float(_require(sde, "anchor", "diffusion.sde"), "diffusion.sde.anchor"),
        }
        if "tab_window" in sde:
            norm["tab_window"] = list(_as_pair(sde["tab_window"], "diffusion.sde.tab_window"))
        atoms = sde.get("atoms", [])
        if atoms:
            norm_atoms = []
            for i, pair in enumerate(atoms):
                loc, mass = _as_pair(pair, _path("diffusion.sde.atoms", i))
                if mass <= 0:
                    raise ConfigError(f"diffusion.sde.atoms[{i}] mass must be positive")
                norm_atoms.append([loc, mass])
            norm["atoms"] = norm_atoms
        bounds = sde.get("boundaries", {})
        if bounds:
            for side in bounds:
                if side not in ("left", "right"):
                    raise ConfigError("diffusion.sde.boundaries keys must be left|right")
                if bounds[side] not in _BOUNDARY_KINDS:
                    raise ConfigError(
                        f"diffusion.sde.boundaries.{side} must be one of {_BOUNDARY_KINDS}"
                    )
            norm["boundaries"] = {k: bounds[k] for k in sorted(bounds)}
        out["sde"] = norm
    else:
        raise ConfigError("diffusion block needs either a preset or an sde section")
    return out


def _normalize_grid(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError("grid block must be a mapping")
    kind = _require(block, "kind", "grid")
    if kind not in GRID_KINDS:
        raise ConfigError(f"grid.kind must be one of {GRID_KINDS}, got {kind!r}")
    out = {"kind": kind}
    if kind == "file":
        out["path"] = str(_require(block, "path", "grid"))
    else:
        h = _as_float(_require(block, "h", "grid"), "grid.h")
        if h <= 0:
            raise ConfigError("grid.h must be positive")
        out["h"] = h
        out["window"] = list(_as_pair(_require(block, "window", "grid"), "grid.window"))
    return out


def _normalize_run(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError("run block must be a mapping")
    n_paths = _require(block, "n_paths", "run")
    if not isinstance(n_paths, int) or isinstance(n_paths, bool) or n_paths < 1:
        raise ConfigError("run.n_paths must be an integer >= 1")
    seed = _require(block, "master_seed", "run")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("run.master_seed must be an integer")
    horizons = _require(block, "horizons", "run")
    if not isinstance(horizons, (list, tuple)) or not horizons:
        raise ConfigError("run.horizons must be a nonempty list")
    hs = [_as_float(t, _path("run.horizons", i)) for i, t in enumerate(horizons)]
    if any(t <= 0 for t in hs):
        raise ConfigError("run.horizons must be positive")
    out = {
        "x0": _as_float(_require(block, "x0", "run"), "run.x0"),
        "horizons": hs,
        "n_paths": n_paths,
        "master_seed": seed,
    }
    method = block.get("method", "closed_form")
    if method not in ("closed_form", "quadrature"):
        raise ConfigError("run.method must be closed_form|quadrature")
    out["method"] = method
    panels = block.get("quad_panels", 256)
    if not isinstance(panels, int) or panels < 8:
        raise ConfigError("run.quad_panels must be an integer >= 8")
    out["quad_panels"] = panels
    return out


def _normalize_output(block) -> dict:
    if block is None:
        block = {}
    if not isinstance(block, dict):
        raise ConfigError("output block must be a mapping")
    formats = block.get("formats", ["csv", "json"])
    if not isinstance(formats, (list, tuple)) or not formats:
        raise ConfigError("output.formats must be a nonempty list")
    for f in formats:
        if f not in ("csv", "json"):
            raise ConfigError(f"output.formats entries must be csv|json, got {f!r}")
    return {
        "directory": str(block.get("directory", "out")),
        "formats": sorted(set(formats)),
        "figures": bool(block.get("figures", True)),
    }


def _normalize_estimator(block) -> Optional[dict]:
    if block is None:
        return None
    if not isinstance(block, dict):
        raise ConfigError("estimator block must be a mapping")
    alphas = _require(block, "alphas", "estimator")
    if not isinstance(alphas, (list, tuple)) or not alphas:
        raise ConfigError("estimator.alphas must be a nonempty list")
    av = [_as_float(a, _path("estimator.alphas", i)) for i, a in enumerate(alphas)]
    if any(not 0 < a < 1 for a in av):
        raise ConfigError("estimator.alphas must lie in (0, 1)")
    n = _require(block, "n", "estimator")
    n_mc = _require(block, "n_mc", "estimator")
    for name, v in (("n", n), ("n_mc", n_mc)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"estimator.{name} must be an integer >= 1")
    t = _as_float(block.get("t", 1.0), "estimator.t")
    if t <= 0:
        raise ConfigError("estimator.t must be positive")
    g = block.get("g", {})
    inner = _as_float(g.get("inner", 1.0), "estimator.g.inner")
    outer = _as_float(g.get("outer", 5.0), "estimator.g.outer")
    if not 0 < inner < outer:
        raise ConfigError("estimator.g needs 0 < inner < outer")
    return {
        "alphas": av, "n": n, "n_mc": n_mc, "t": t,
        "g": {"inner": inner, "outer": outer},
    }


def _normalize_convergence(block) -> Optional[dict]:
    if block is None:
        return None
    if not isinstance(block, dict):
        raise ConfigError("convergence block must be a mapping")
    hv = _require(block, "h_values", "convergence")
    if not isinstance(hv, (list, tuple)) or len(hv) < 3:
        raise ConfigError("convergence.h_values needs at least 3 grid sizes")
    hs = [_as_float(h, _path("convergence.h_values", i)) for i, h in enumerate(hv)]
    if any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
        raise ConfigError("convergence.h_values must be positive and strictly decreasing")
    pv = block.get("p_values", [1.0])
    ps = [_as_float(p, _path("convergence.p_values", i)) for i, p in enumerate(pv)]
    if any(p < 1 for p in ps):
        raise ConfigError("convergence.p_values must be >= 1")
    return {"h_values": hs, "p_values": ps}


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    known = {"diffusion", "grid", "run", "output", "estimator", "convergence"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown top-level section {key!r}")
    return RunConfig(
        diffusion=_normalize_diffusion(_require(doc, "diffusion", "config")),
        grid=_normalize_grid(_require(doc, "grid", "config")),
        run=_normalize_run(_require(doc, "run", "config")),
        output=_normalize_output(doc.get("output")),
        estimator=_normalize_estimator(doc.get("estimator")),
        convergence=_normalize_convergence(doc.get("convergence")),
    )


def loads_config(text: str) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return parse_config(doc)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return loads_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def build_spec(cfg: RunConfig) -> DiffusionSpec:
    """Instantiate the DiffusionSpec described by the diffusion block."""
    block = cfg.diffusion
    if "preset" in block:
        name = block["preset"]
        params = dict(block.get("params", {}))
        if name == "cir" and "window" in params:
            params["window"] = tuple(params["window"])
        try:
            return PRESETS[name](**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"diffusion.params invalid for preset {name}: {exc}") from exc
    sde = block["sde"]
    lo, hi = sde["domain"]
    bounds = sde.get("boundaries", {})
    domain = Interval(
        lo, hi,
        lower_closed=bounds.get("left", UNREACHABLE) != UNREACHABLE,
        upper_closed=bounds.get("right", UNREACHABLE) != UNREACHABLE,
    )
    spec = from_sde(
        compile_expression(sde["drift"]),
        compile_expression(sde["diffusivity"]),
        domain,
        sde["anchor"],
        tab_window=tuple(sde["tab_window"]) if "tab_window" in sde else None,
    )
    atoms = tuple((loc, mass) for loc, mass in sde.get("atoms", []))
    if atoms or bounds:
        spec = DiffusionSpec(
            domain=domain,
            scale=spec.scale,
            speed=SpeedMeasure(density=spec.speed.density, atoms=atoms),
            left_boundary=BoundaryBehavior(bounds.get("left", UNREACHABLE)),
            right_boundary=BoundaryBehavior(bounds.get("right", UNREACHABLE)),
            drift=spec.drift,
            diffusivity=spec.diffusivity,
        )
    return spec


def _sticky_rho(spec: DiffusionSpec) -> float:
    if len(spec.speed.atoms) != 1:
        raise ConfigError("this grid kind needs a diffusion with exactly one atom")
    return spec.speed.atoms[0][1]


def _read_grid_file(path: str) -> np.ndarray:
    """One-column CSV of grid points; comment and header lines are skipped."""
    points = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                token = line.strip().split(",")[0].strip()
                if not token or token.startswith("#"):
                    continue
                try:
                    points.append(float(token))
                except ValueError:
                    continue  # column header
    except OSError as exc:
        raise ConfigError(f"cannot read grid file {path}: {exc}") from exc
    if len(points) < 3:
        raise ConfigError(f"grid file {path} holds fewer than three points")
    return np.asarray(points, dtype=float)


def build_grid(cfg: RunConfig, spec: DiffusionSpec, h: Optional[float] = None) -> Grid:
    """Build the grid described by the grid block (h may be overridden)."""
    block = cfg.grid
    kind = block["kind"]
    if kind == "file":
        return Grid(points=_read_grid_file(block["path"]), domain=spec.domain)
    h = block["h"] if h is None else h
    window = Interval(*block["window"])
    if kind == "uniform":
        return uniform_grid(spec.domain, h, window)
    if kind == "tuned":
        if spec.preset == "sticky_bm":
            return tuned_grid_sticky(h, _sticky_rho(spec), window)
        return tuned_grid_sde(spec, h, cfg.run["x0"], window)
    if kind == "atom_cell":
        return atom_cell_grid(h, _sticky_rho(spec), window)
    if kind == "graded_atom":
        return graded_atom_grid(h, _sticky_rho(spec), window)
    raise ConfigError(f"unhandled grid kind {kind!r}")
