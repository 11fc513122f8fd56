"""Command-line front end.

Every subcommand writes its tables (CSV) and reports (JSON) into
``--output-dir`` together with ``manifest.json``, which lists the inputs,
package versions, tolerances, wall time and each output file once.

Settings come from flags or from a JSON config file given with
``--config``.  Top-level keys apply to every subcommand; a nested object
named after the subcommand overrides them; explicit flags override both.
Grids are ``start:step:end`` strings (end inclusive) or comma lists.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import time
from decimal import Decimal, InvalidOperation
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .exceptions import ConfigError, NumericalFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

MODEL_PARAMS = {
    "global": ("C",),
    "local": ("shift",),
    "stable": ("shift",),
    "polytropic": ("gamma_eos", "cv"),
}


# ---------------------------------------------------------------------------
# parsing helpers


def parse_grid(text, name: str = "grid") -> np.ndarray:
    """``start:step:end`` (inclusive), a comma list, or a single number."""
    if isinstance(text, (int, float)):
        return np.array([float(text)])
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        s = str(text).strip()
        try:
            if ":" in s:
                parts = [Decimal(p) for p in s.split(":")]
                if len(parts) != 3:
                    raise ConfigError(f"{name}: expected start:step:end, got {s!r}")
                start, step, end = parts
                if step == 0:
                    raise ConfigError(f"{name}: step must be nonzero")
                # decimal arithmetic keeps grid points exactly as typed (0.3, not 0.30000000000000004)
                count = int((end - start) / step) + 1 if (end - start) / step >= 0 else 0
                vals = [float(start + k * step) for k in range(count)]
            elif s:
                vals = [float(p) for p in s.split(",") if p.strip()]
            else:
                vals = []
        except (ValueError, InvalidOperation):
            raise ConfigError(f"{name}: cannot parse {s!r}") from None
    if not vals:
        raise ConfigError(f"{name}: grid is empty")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{name}: grid values must be finite")
    return np.array(vals)


def parse_floats(text, name: str, count: Optional[int] = None) -> tuple:
    if isinstance(text, (list, tuple)):
        vals = tuple(float(v) for v in text)
    else:
        try:
            vals = tuple(float(p) for p in str(text).split(","))
        except ValueError:
            raise ConfigError(f"{name}: cannot parse {text!r}") from None
    if count is not None and len(vals) != count:
        raise ConfigError(f"{name}: expected {count} comma-separated numbers, got {len(vals)}")
    return vals


def _positive(value, name):
    if value is None or not value > 0:
        raise ConfigError(f"{name}: must be positive, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# output


def fmt(x) -> str:
    """17 significant digits for floats; ints and strings unchanged."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x) + 0.0, ".17g")  # + 0.0 folds -0 into 0
    if x is None:
        return ""
    return str(x)


def _json_text(obj, indent=0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {_json_text(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[\n" + ",\n".join(inner + _json_text(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format(v, ".17g") if math.isfinite(v) else json.dumps(str(v))
    if isinstance(obj, (complex, np.complexfloating)):
        return _json_text([obj.real, obj.imag], indent)
    if obj is None:
        return "null"
    return json.dumps(str(obj), ensure_ascii=False)


@dataclass
class Run:
    command: str
    out_dir: Path
    inputs: dict
    tolerances: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    started: float = field(default_factory=time.perf_counter)

    def _register(self, name, kind, description):
        if any(o["file"] == name for o in self.outputs):
            raise ConfigError(f"output file {name!r} written twice")
        path = self.out_dir / name
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.outputs.append({"file": name, "format": kind, "description": description, "sha256": digest})

    def write_csv(self, name, header, rows, description=""):
        with open(self.out_dir / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        self._register(name, "csv", description)

    def write_json(self, name, obj, description=""):
        (self.out_dir / name).write_text(_json_text(obj) + "\n")
        self._register(name, "json", description)

    def finish(self):
        manifest = {
            "command": self.command,
            "inputs": self.inputs,
            "tolerances": self.tolerances,
            "versions": {
                "shockstab": __version__,
                "numpy": np.__version__,
                "scipy": _scipy_version(),
                "python": platform.python_version(),
            },
            "wall_time_s": time.perf_counter() - self.started,
            "outputs": self.outputs,
        }
        (self.out_dir / "manifest.json").write_text(_json_text(manifest) + "\n")


def _scipy_version():
    import scipy

    return scipy.__version__


# ---------------------------------------------------------------------------
# shared builders


def _model(cfg):
    from .eos import make_model

    kind = cfg["model"]
    if kind not in MODEL_PARAMS:
        raise ConfigError(f"model: unknown kind {kind!r}; choose from {sorted(MODEL_PARAMS)}")
    params = {}
    for key in MODEL_PARAMS[kind]:
        if cfg.get(key) is not None:
            params["gamma" if key == "gamma_eos" else key] = float(cfg[key])
    if kind == "global" and params.get("C", 10.0) <= 0:
        raise ConfigError("C: must be positive")
    return make_model(kind, **params)


def _anchor(model, cfg):
    from .eos import thermo_eval

    tau, S = parse_floats(cfg["anchor"], "anchor", 2)
    _positive(tau, "anchor[0] (tau)")
    return thermo_eval(model, tau, S)


def _shock(model, cfg):
    from .hugoniot import trace_backward

    anchor = _anchor(model, cfg)
    S = _required(cfg, "s_minus")
    sample = trace_backward(model, anchor, [float(S)]).samples[0]
    if sample.shock is None:
        raise ConfigError(f"s_minus: {S} gives no shock on the backward curve")
    return sample.shock


def _required(cfg, key):
    if cfg.get(key) is None:
        raise ConfigError(f"{key}: required")
    return cfg[key]


def _gas_profile(cfg):
    from .profile import shoot_profile

    model = _model(cfg)
    shock = _shock(model, cfg)
    mu = _positive(float(cfg["mu"]), "mu")
    kappa = _positive(float(cfg["kappa"]), "kappa")
    return model, shock, shoot_profile(model, shock, mu, kappa)


def _evans_system(cfg):
    """System and a description of it, from the ``system`` setting."""
    if cfg["system"] == "designer":
        from .designer import RotatingModel

        M = _positive(float(_required(cfg, "M")), "M")
        gamma = _positive(float(_required(cfg, "gamma")), "gamma")
        return RotatingModel(M, gamma)
    from .evans import build_system

    model, _, profile = _gas_profile(cfg)
    return build_system(model, profile)


def _evans_tol(cfg):
    return 1e-8 * cfg["tolerance_scale"]


# ---------------------------------------------------------------------------
# subcommands


def cmd_eos_check(cfg, run: Run):
    from .eos import check_structural

    model = _model(cfg)
    tau_lo, tau_hi = parse_floats(cfg["tau_range"], "tau_range", 2)
    S_lo, S_hi = parse_floats(cfg["s_range"], "s_range", 2)
    n_tau, n_S = int(cfg["n_tau"]), int(cfg["n_s"])
    if n_tau < 1 or n_S < 1:
        raise ConfigError("n_tau/n_s: grid is empty")
    if tau_lo <= 0:
        raise ConfigError("tau_range: must lie in tau > 0")
    rep = check_structural(model, (tau_lo, tau_hi), (S_lo, S_hi), n_tau, n_S)
    header, rows = rep.to_rows()
    run.write_csv("conditions.csv", header, rows, "condition residuals per grid point (holds where < 0)")
    summary = {k: bool(v) for k, v in rep.summary().items()}
    run.write_json("conditions_summary.json", {"model": model.describe(), "holds_everywhere": summary},
                   "per-condition verdict over the grid")


def cmd_hugoniot(cfg, run: Run):
    from .hugoniot import trace_backward, trace_forward

    model = _model(cfg)
    anchor = _anchor(model, cfg)
    grid = parse_grid(_required(cfg, "s_grid"), "s_grid")
    if cfg["direction"] == "backward":
        curve = trace_backward(model, anchor, np.sort(grid)[::-1])
    else:
        curve = trace_forward(model, anchor, np.sort(grid))
    header, rows = curve.rows()
    run.write_csv("hugoniot.csv", header, rows, f"{cfg['direction']} Hugoniot curve")


def cmd_lopatinski(cfg, run: Run):
    from .hugoniot import trace_backward
    from .lopatinski import find_inviscid_transition, lopatinski_delta, small_amplitude_sign

    model = _model(cfg)
    anchor = _anchor(model, cfg)
    grid = np.sort(parse_grid(_required(cfg, "s_grid"), "s_grid"))[::-1]
    width = _positive(1e-7 * cfg["tolerance_scale"], "tolerance_scale")
    run.tolerances["bracket_width"] = width
    curve = trace_backward(model, anchor, grid)
    shocks = [(s.S, s.shock) for s in curve.samples if s.shock is not None]
    rows = []
    if shocks:
        ref = small_amplitude_sign(shocks[0][1])
        for S, sh in shocks:
            ev = lopatinski_delta(model, sh, ref, require_lax=False)
            rows.append([S, sh.minus.tau, sh.sigma, ev.delta, ev.sign])
    run.write_csv("delta.csv", ["S_minus", "tau_minus", "sigma", "delta", "sign"], rows,
                  "signed Lopatinski determinant along the backward curve")
    report = find_inviscid_transition(model, curve, width=width)
    run.write_json("transition.json", report.to_json(), "first sign change of the determinant, bisected")


def cmd_profile(cfg, run: Run):
    from .profile import PROFILE_SPEC

    _, _, profile = _gas_profile(cfg)
    run.tolerances.update({"rtol": PROFILE_SPEC.rtol, "atol": PROFILE_SPEC.atol})
    header, rows = profile.rows()
    run.write_csv("profile.csv", header, rows, "viscous profile on its mesh")
    meta = profile.metadata()
    meta["ode_residual"] = profile.ode_residual()
    run.write_json("profile.json", meta, "profile metadata")


def cmd_evans_winding(cfg, run: Run):
    from .evans import ContourSpec, winding

    system = _evans_system(cfg)
    tol = _evans_tol(cfg)
    R = _positive(float(cfg["radius"]), "radius")
    mode = "polar-no-radial" if cfg["no_radial"] else "polar"
    spec = ContourSpec(radius=R, mode=mode, threshold=0.2)
    run.tolerances.update({"evans_tol": tol, "arg_step_threshold": spec.threshold})
    res = winding(system, spec, tol=tol)
    header, rows = res.rows()
    run.write_csv("contour.csv", header, rows, "Evans function on the closed contour")
    run.write_json("winding.json", {
        "system": system.describe(), "radius": R, "mode": mode, "winding": res.winding,
        "total_arg": res.total_arg, "max_relative_step": res.max_relative_step,
        "rouche_ok": res.rouche_ok, "detour_used": res.detour_used, "points": len(res.lams),
    }, "winding number summary")


def cmd_evans_roots(cfg, run: Run):
    from .evans import Rectangle, evans_eval, moment_roots

    system = _evans_system(cfg)
    tol = _evans_tol(cfg)
    x0, x1, y0, y1 = parse_floats(_required(cfg, "box"), "box", 4)
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("box: need x0 < x1 and y0 < y1")
    run.tolerances["evans_tol"] = tol

    def D(lams):
        return evans_eval(system, np.asarray(lams, dtype=complex), tol=tol)

    roots = moment_roots(D, Rectangle(x0, x1, y0, y1, int(cfg["nodes"])))
    run.write_json("roots.json", {
        "system": system.describe(), "box": [x0, x1, y0, y1],
        "roots": [{"location": r.location, "multiplicity": r.multiplicity, "trail": r.trail} for r in roots],
    }, "roots found by the moment method")


def _synthetic_hf(c1, c2):
    def D(lams):
        return c1 * np.exp(c2 * np.sqrt(np.asarray(lams, dtype=complex)))

    return D


def _hf_function(cfg):
    from .evans import evans_parts

    if cfg["system"] == "synthetic":
        return _synthetic_hf(float(cfg["c1"]), float(cfg["c2"])), {"kind": "synthetic",
                                                                    "C1": cfg["c1"], "C2": cfg["c2"]}
    system = _evans_system(cfg)
    return evans_parts(system, _evans_tol(cfg)), system.describe()


def _hf_outputs(run: Run, table, stem, describe):
    header, rows = table.csv_rows()
    run.write_csv(f"{stem}.csv", header, rows, "high-frequency fit per radius")
    run.write_json(f"{stem}.json", {"system": describe, "converged": table.converged,
                                     "radius": table.radius, "threshold": table.threshold},
                   "high-frequency convergence verdict")


def cmd_evans_hf(cfg, run: Run):
    from .evans import hf_radius, hf_table

    D, describe = _hf_function(cfg)
    R0 = _positive(float(cfg["r0"]), "r0")
    R_max = _positive(float(cfg["r_max"]), "r_max")
    if R_max < R0:
        raise ConfigError("r_max: must be at least r0")
    run.tolerances.update({"evans_tol": _evans_tol(cfg), "fit_threshold": 0.2})
    if cfg["all_radii"]:
        radii = [R0 * 2**k for k in range(int(math.log2(R_max / R0) + 1e-9) + 1)]
        table = hf_table(D, radii)
    else:
        table = hf_radius(D, R0, R_max)
    _hf_outputs(run, table, "hf_table", describe)


GOLDEN_CASES = {
    "stable": {"system": "gas", "model": "stable", "anchor": "1,0", "s_minus": -5.0, "all_radii": True},
    "global": {"system": "gas", "model": "global", "C": 10.0, "anchor": "1,0", "s_minus": -15.0,
               "all_radii": True},
    "synthetic": {"system": "synthetic", "c1": 2.0, "c2": 0.5, "all_radii": False},
}


GAS_DEFAULTS = {"mu": 1.0, "kappa": 1.0, "C": None, "shift": None, "gamma_eos": None, "cv": None}


def compare_tables(path_a, path_b, rtol: float = 1e-6, atol: float = 1e-9) -> list:
    """Cells that differ beyond ``atol + rtol·|b|``; empty when the tables agree."""
    with open(path_a) as fa, open(path_b) as fb:
        a, b = list(csv.reader(fa)), list(csv.reader(fb))
    if a[0] != b[0] or len(a) != len(b):
        return [{"row": None, "column": None, "detail": "shape or header mismatch"}]
    bad = []
    for i, (ra, rb) in enumerate(zip(a[1:], b[1:]), start=1):
        for name, x, y in zip(a[0], ra, rb):
            try:
                fx, fy = float(x), float(y)
                same = abs(fx - fy) <= atol + rtol * abs(fy)
            except ValueError:
                same = x == y
            if not same:
                bad.append({"row": i, "column": name, "value": x, "golden": y})
    return bad


def cmd_goldens(cfg, run: Run):
    from .evans import hf_radius, hf_table

    cases = cfg["case"] or list(GOLDEN_CASES)
    unknown = [c for c in cases if c not in GOLDEN_CASES]
    if unknown:
        raise ConfigError(f"case: unknown {unknown}; choose from {sorted(GOLDEN_CASES)}")
    run.tolerances.update({"evans_tol": _evans_tol(cfg), "fit_threshold": 0.2})
    mismatches = {}
    for name in cases:
        case = dict(GAS_DEFAULTS, **cfg)
        case.update(GOLDEN_CASES[name])
        D, describe = _hf_function(case)
        if case["all_radii"]:
            table = hf_table(D, [2.0 * 2**k for k in range(9)])
        else:
            table = hf_radius(D, 2.0, 512.0)
        _hf_outputs(run, table, f"golden_{name}", describe)
        if cfg["compare"]:
            ref = Path(cfg["compare"]) / f"golden_{name}.csv"
            if not ref.exists():
                raise ConfigError(f"compare: no stored golden {ref}")
            mismatches[name] = compare_tables(run.out_dir / f"golden_{name}.csv", ref, rtol=cfg["rtol"])
    if cfg["compare"]:
        run.write_json("golden_diff.json", {"rtol": cfg["rtol"], "mismatches": mismatches},
                       "cells differing from the stored goldens")
        if any(mismatches.values()):
            raise NumericalFailure(f"goldens differ: { {k: len(v) for k, v in mismatches.items() if v} }")


def cmd_designer_scan(cfg, run: Run):
    from .designer import region_scan

    gammas = parse_grid(_required(cfg, "gamma"), "gamma")
    m_gammas = parse_grid(_required(cfg, "m_gamma"), "m_gamma")
    tol = _evans_tol(cfg)
    run.tolerances["evans_tol"] = tol
    radius = None if cfg["radius"] is None else _positive(float(cfg["radius"]), "radius")
    cells = region_scan(gammas, m_gammas, radius=radius, tol=tol, workers=cfg["workers"])
    rows = [[c.gamma, c.m_gamma, "" if c.count is None else c.count, c.jump, c.near_delta_zero,
             c.error or ""] for c in cells]
    run.write_csv("scan.csv", ["gamma", "m_gamma", "root_count", "jump", "near_delta_zero", "error"], rows,
                  "unstable root counts per grid cell")


def cmd_designer_track(cfg, run: Run):
    from .designer import track_roots
    from .evans import Rectangle

    if cfg["M"] is None or cfg["gamma"] is None:
        raise ConfigError("M/gamma: give exactly one as a grid and the other fixed")
    M_text, g_text = str(cfg["M"]), str(cfg["gamma"])
    if all(":" in t or "," in t for t in (M_text, g_text)):
        raise ConfigError("M/gamma: give exactly one as a grid and the other fixed")
    if ":" in g_text or "," in g_text:
        varying, params, fixed = "gamma", parse_grid(g_text, "gamma"), {"M": float(_required(cfg, "M"))}
    else:
        varying, params, fixed = "M", parse_grid(M_text, "M"), {"gamma": float(_required(cfg, "gamma"))}
    x0, x1, y0, y1 = parse_floats(cfg["box"], "box", 4)
    tol = _evans_tol(cfg)
    width = 1e-4 * cfg["tolerance_scale"]
    run.tolerances.update({"evans_tol": tol, "event_width": width})
    traj = track_roots(params, Rectangle(x0, x1, y0, y1, int(cfg["nodes"])), varying, fixed,
                       evans_tol=tol, refine_width=width)
    run.write_json("trajectory.json", traj.to_json(), "roots per step and the event log")


# ---------------------------------------------------------------------------
# argument parsing


COMMANDS = {
    "eos-check": cmd_eos_check,
    "hugoniot": cmd_hugoniot,
    "lopatinski": cmd_lopatinski,
    "profile": cmd_profile,
    "evans-winding": cmd_evans_winding,
    "evans-roots": cmd_evans_roots,
    "evans-hf": cmd_evans_hf,
    "goldens": cmd_goldens,
    "designer-scan": cmd_designer_scan,
    "designer-track": cmd_designer_track,
}


def _add_model(p):
    p.add_argument("--model", choices=sorted(MODEL_PARAMS), default="local")
    p.add_argument("--C", type=float, help="global model scale")
    p.add_argument("--shift", type=float, help="pressure shift of the local and stable models")
    p.add_argument("--gamma-eos", dest="gamma_eos", type=float, help="polytropic exponent")
    p.add_argument("--cv", type=float, help="polytropic specific heat")


def _add_shock(p):
    _add_model(p)
    p.add_argument("--anchor", default="1,0", help="tau,S of the right state")
    p.add_argument("--s-minus", dest="s_minus", type=float, help="left-state entropy")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=1.0)


def _add_system(p, choices=("gas", "designer")):
    _add_shock(p)
    p.add_argument("--system", choices=choices, default="gas")
    p.add_argument("--M", type=float, help="rotation rate of the designer system")
    p.add_argument("--gamma", type=float, help="amplitude of the designer profile")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--output-dir", dest="output_dir", default=".")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: available cores)")
    common.add_argument("--tolerance-scale", dest="tolerance_scale", type=float, default=1.0)

    parser = argparse.ArgumentParser(prog="shockstab", description="Shock stability experiments.")
    parser.add_argument("--version", action="version", version=f"shockstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eos-check", parents=[common], help="audit structural conditions on a grid")
    _add_model(p)
    p.add_argument("--tau-range", dest="tau_range", default="0.5,20")
    p.add_argument("--s-range", dest="s_range", default="-30,2")
    p.add_argument("--n-tau", dest="n_tau", type=int, default=60)
    p.add_argument("--n-s", dest="n_s", type=int, default=60)

    p = sub.add_parser("hugoniot", parents=[common], help="trace a Hugoniot curve")
    _add_model(p)
    p.add_argument("--anchor", default="1,0")
    p.add_argument("--s-grid", dest="s_grid")
    p.add_argument("--direction", choices=("backward", "forward"), default="backward")

    p = sub.add_parser("lopatinski", parents=[common], help="inviscid stability transition")
    _add_model(p)
    p.add_argument("--anchor", default="1,0")
    p.add_argument("--s-grid", dest="s_grid")

    p = sub.add_parser("profile", parents=[common], help="shoot a viscous profile")
    _add_shock(p)

    p = sub.add_parser("evans-winding", parents=[common], help="winding number on a right half-disc")
    _add_system(p)
    p.add_argument("--radius", type=float, default=4.0)
    p.add_argument("--no-radial", dest="no_radial", action="store_true",
                   help="wind the Evans function without its positive radial factor")

    p = sub.add_parser("evans-roots", parents=[common], help="roots in a box by the moment method")
    _add_system(p)
    p.add_argument("--box", help="x0,x1,y0,y1")
    p.add_argument("--nodes", type=int, default=24, help="quadrature nodes per box edge")

    p = sub.add_parser("evans-hf", parents=[common], help="high-frequency fit by doubling radius")
    _add_system(p, ("gas", "designer", "synthetic"))
    p.add_argument("--r0", type=float, default=2.0)
    p.add_argument("--r-max", dest="r_max", type=float, default=512.0)
    p.add_argument("--all-radii", dest="all_radii", action="store_true",
                   help="fit every radius instead of stopping at the first converged one")
    p.add_argument("--c1", type=float, default=2.0, help="synthetic prefactor")
    p.add_argument("--c2", type=float, default=0.5, help="synthetic exponent rate")

    p = sub.add_parser("goldens", parents=[common], help="regenerate the high-frequency golden tables")
    p.add_argument("--case", action="append", choices=sorted(GOLDEN_CASES))
    p.add_argument("--compare", help="directory of stored goldens to diff against")
    p.add_argument("--rtol", type=float, default=1e-6, help="per-cell relative tolerance of the diff")

    p = sub.add_parser("designer-scan", parents=[common], help="root counts over a (gamma, M*gamma) grid")
    p.add_argument("--gamma")
    p.add_argument("--m-gamma", dest="m_gamma")
    p.add_argument("--radius", type=float, default=None)

    p = sub.add_parser("designer-track", parents=[common], help="follow roots along M or gamma")
    p.add_argument("--M", help="fixed value or grid")
    p.add_argument("--gamma", help="fixed value or grid")
    p.add_argument("--box", default="-0.04,0.06,-0.06,0.06", help="x0,x1,y0,y1")
    p.add_argument("--nodes", type=int, default=24)
    return parser


def _load_config(path, command) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    flat = {}
    for key, value in data.items():
        if key in COMMANDS:
            continue
        if isinstance(value, dict) and key == "model":
            flat.update({k.replace("-", "_"): v for k, v in value.items() if k != "kind"})
            if "kind" in value:
                flat["model"] = value["kind"]
        else:
            flat[key.replace("-", "_")] = value
    section = data.get(command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config.{command}: must be an object")
    flat.update({k.replace("-", "_"): v for k, v in section.items()})
    return flat


def _join_negative_values(argv):
    """``--s-grid -8:0.01:0`` → ``--s-grid=-8:0.01:0``; argparse would read the value as a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if tok.startswith("--") and "=" not in tok and len(nxt) > 1 and nxt[0] == "-" and (
                nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def resolve(argv) -> tuple:
    """Parsed settings: defaults, then config file, then explicit flags."""
    parser = build_parser()
    args = parser.parse_args(_join_negative_values(list(sys.argv[1:] if argv is None else argv)))
    cfg = vars(args).copy()
    if args.config:
        defaults = {a.dest: a.default for a in _subparser(parser, args.command)._actions}
        file_cfg = _load_config(args.config, args.command)
        unknown = sorted(set(file_cfg) - set(cfg))
        if unknown:
            raise ConfigError(f"config: unknown keys for {args.command}: {unknown}")
        for key, value in file_cfg.items():
            if cfg[key] == defaults.get(key):  # flag left at its default
                cfg[key] = value
    cfg["tolerance_scale"] = float(_positive(cfg["tolerance_scale"], "tolerance_scale"))
    cfg["workers"] = int(cfg["workers"] or len(os.sched_getaffinity(0)))
    _positive(cfg["workers"], "workers")
    return args.command, cfg


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def run(argv=None) -> int:
    try:
        try:
            command, cfg = resolve(argv)
        except SystemExit as exc:  # argparse usage errors and --help
            return EXIT_CONFIG if exc.code else EXIT_OK
        out = Path(cfg["output_dir"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output_dir: {exc}") from None
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output_dir: {out} is not writable")
        inputs = {k: v for k, v in cfg.items() if k not in ("command",)}
        job = Run(command, out, inputs, {"tolerance_scale": cfg["tolerance_scale"]})
        COMMANDS[command](cfg, job)
        job.finish()
    except (ConfigError, ValueError) as exc:
        print(f"shockstab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"shockstab: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
