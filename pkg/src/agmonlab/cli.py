"""Command-line front end: ``agmonlab {eig,agmon,measure,bounds,closed-forms}``.

Outputs are CSV (with ``#`` provenance lines) for fields and tables and JSON for
scalar summaries. Exit codes: 0 success, 1 failed assertion, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .agmon import BubbleClass, bubble, forbidden_domain
from .bounds import BoundConfig, bound_report, soundness_violations
from .closed_forms import oracle_checks
from .eigen import boundary_decay
from .scenarios import (CONSTRUCTORS, EIGENSOLVE, Scenario, sample_forbidden_points,
                        scenario_from_config, solve_scenario)
from .stochastic import harmonic_measure_mc, harmonic_measure_pde

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["scenario"],
    "properties": {
        "scenario": {"type": "string", "enum": sorted(CONSTRUCTORS)},
        "params": {"type": "object"},
        "grid": {
            "type": "object",
            "required": ["extent", "n"],
            "properties": {
                "extent": {"type": "array", "minItems": 1, "maxItems": 2,
                           "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                     "items": {"type": "number"}}},
                "n": {"type": "array", "minItems": 1, "maxItems": 2,
                      "items": {"type": "integer", "minimum": 3}},
            },
            "additionalProperties": False,
        },
        "lambda": {"oneOf": [{"type": "number"}, {"const": EIGENSOLVE}]},
        "delta": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "alpha_grid": {"type": "string"},
        "points": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: dict
    seed: int = 0
    n_samples: int = 2000
    dt: float | None = None
    alpha: float | None = None
    alpha_grid: tuple[float, ...] | None = None
    points: list[tuple[float, ...]] | None = None
    n_points: int | None = None
    out: Path = field(default_factory=lambda: Path("."))


def parse_alpha_grid(spec: str) -> tuple[float, ...]:
    """``lo:hi:n`` (log spacing) or ``lo:hi:n:lin``."""
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise ConfigError(f"alpha grid must be lo:hi:n[:log|lin], got {spec!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ConfigError(f"bad alpha grid {spec!r}: {e}") from None
    kind = parts[3] if len(parts) == 4 else "log"
    if not (0 < lo < hi) or n < 1 or kind not in ("log", "lin"):
        raise ConfigError(f"bad alpha grid {spec!r}")
    vals = np.geomspace(lo, hi, n) if kind == "log" else np.linspace(lo, hi, n)
    return tuple(float(a) for a in vals)


def _parse_point(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad point {text!r}; expected x or x,y") from None


def load_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
    elif args.scenario:
        raw = {"scenario": args.scenario}
    else:
        raise ConfigError("give --scenario or --config")
    if args.scenario and args.config:
        raw["scenario"] = args.scenario
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config does not match schema: {e.message}") from None
    sc = {k: raw[k] for k in ("scenario", "params", "grid", "lambda", "delta") if k in raw}
    cfg = RunConfig(scenario=sc, seed=raw.get("seed", 0), n_samples=raw.get("samples", 2000),
                    dt=raw.get("dt"), alpha=raw.get("alpha"),
                    points=[tuple(p) for p in raw["points"]] if "points" in raw else None)
    if "alpha_grid" in raw:
        cfg.alpha_grid = parse_alpha_grid(raw["alpha_grid"])
    # command-line flags win over the file
    if args.seed is not None:
        cfg.seed = args.seed
    if args.samples is not None:
        cfg.n_samples = args.samples
    if args.dt is not None:
        cfg.dt = args.dt
    if getattr(args, "alpha", None) is not None:
        cfg.alpha = args.alpha
    if args.alpha_grid:
        cfg.alpha_grid = parse_alpha_grid(args.alpha_grid)
    if getattr(args, "point", None):
        cfg.points = [_parse_point(p) for p in args.point]
    cfg.n_points = getattr(args, "points", None)
    cfg.out = Path(args.out)
    if cfg.seed < 0 or cfg.n_samples < 1 or (cfg.dt is not None and not cfg.dt > 0):
        raise ConfigError("seed must be >= 0, samples >= 1, dt > 0")
    if cfg.alpha is not None and not cfg.alpha > 0:
        raise ConfigError("alpha must be positive")
    return cfg


def _scenario(cfg: RunConfig) -> Scenario:
    try:
        return scenario_from_config(cfg.scenario)
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(str(e)) from None


def _solve(sc: Scenario):
    try:
        return solve_scenario(sc)
    except ValueError as e:
        raise ConfigError(f"scenario {sc.name!r} cannot be solved: {e}") from None


# ----------------------------------------------------------------- output

def git_describe() -> str:
    try:
        r = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                           cwd=Path(__file__).resolve().parent, capture_output=True, text=True,
                           timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return r.stdout.strip() if r.returncode == 0 and r.stdout.strip() else "unknown"


def _provenance(cfg: RunConfig, sc: Scenario) -> list[str]:
    return [f"scenario={json.dumps(sc.to_config(), sort_keys=True)}", f"seed={cfg.seed}",
            f"grid={json.dumps(sc.grid.to_dict(), sort_keys=True)}", f"git={git_describe()}"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def write_csv(path: Path, header: list[str], columns: list[str], rows) -> None:
    lines = [f"# {h}" for h in header]
    lines.append(",".join(columns))
    lines.extend(",".join(_fmt(v) for v in r) for r in rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n")


def _coord_columns(dim: int) -> list[str]:
    return ["x"] if dim == 1 else ["x", "y"]


def _field_rows(grid, *arrays):
    pts = grid.points().reshape(-1, grid.dim)
    flat = [np.asarray(a).ravel() for a in arrays]
    for k in range(pts.shape[0]):
        yield tuple(pts[k]) + tuple(a[k] for a in flat)


# ----------------------------------------------------------------- commands

def cmd_eig(cfg: RunConfig) -> int:
    sc = _scenario(cfg)
    st = _solve(sc)
    g = st.grid
    rec = {"scenario": sc.name, "lambda": st.lam, "lambda_source": sc.lambda_source,
           "boundary_decay": boundary_decay(st.u, st.mask), "open_boundary": sc.open_boundary,
           "walled": sc.walled,
           "u_sup": st.u_sup}
    if st.eig is not None:
        rec.update(residual=st.eig.residual, iterations=st.eig.iterations,
                   normalization=st.eig.normalization)
    else:
        rec.update(residual=0.0, iterations=0, normalization="u=1 on allowed set")
    write_json(cfg.out / "eig.json", rec)
    write_csv(cfg.out / "u.csv", _provenance(cfg, sc), _coord_columns(g.dim) + ["u"],
              _field_rows(g, st.u.values))
    return EXIT_OK


def cmd_agmon(cfg: RunConfig) -> int:
    sc = _scenario(cfg)
    st = _solve(sc)
    g = st.grid
    lap = np.where(st.dlap.lap.valid, st.dlap.lap.values, np.nan)
    write_csv(cfg.out / "agmon.csv", _provenance(cfg, sc),
              _coord_columns(g.dim) + ["rho", "laplacian", "flag", "cut_locus", "region"],
              _field_rows(g, st.dist.rho.values, lap, st.dlap.flag, st.dlap.cut_locus,
                          st.mask.classes))
    if cfg.alpha is not None:
        b = bubble(st.dist, cfg.alpha)
        keep = b.classes != BubbleClass.OUTSIDE
        pts = g.points().reshape(-1, g.dim)[keep.ravel()]
        cls = b.classes[keep]
        write_csv(cfg.out / "bubble.csv", _provenance(cfg, sc) + [f"alpha={cfg.alpha!r}"],
                  _coord_columns(g.dim) + ["class"],
                  (tuple(p) + (int(c),) for p, c in zip(pts, cls)))
    return EXIT_OK


def _query_points(cfg: RunConfig, sc: Scenario, st=None) -> list[tuple[float, ...]]:
    if cfg.points:
        pts = cfg.points
    elif cfg.n_points and st is not None:
        pts = sample_forbidden_points(st, cfg.n_points, cfg.seed)
    else:
        pts = list(sc.query_points)
    for p in pts:
        if len(p) != sc.grid.dim or not sc.grid.contains(p):
            raise ConfigError(f"point {p} is not inside the grid extent")
    if not pts:
        raise ConfigError("no query points")
    return pts


def cmd_measure(cfg: RunConfig) -> int:
    sc = _scenario(cfg)
    st = _solve(sc)
    g = st.grid
    pts = _query_points(cfg, sc, st)
    alpha = cfg.alpha if cfg.alpha is not None else sc.alpha_ref
    dom = bubble(st.dist, alpha) if alpha is not None else forbidden_domain(st.mask)
    pde = harmonic_measure_pde(dom)
    dt = cfg.dt if cfg.dt is not None else 1e-4
    records = []
    all_agree = True
    for k, p in enumerate(pts):
        idx = g.nearest_node(p)
        node = g.index_to_coord(idx)
        rec = {"point": list(node), "rho": float(st.dist.rho.values[idx]),
               "pde": float(pde.values[idx])}
        if dom.inside[idx]:
            est = harmonic_measure_mc(dom, node, cfg.n_samples, dt, 1e3, cfg.seed + k,
                                      mask=st.mask)
            tol = 3.0 * est.stderr + 2.0 * g.hmin
            agree = abs(est.value - rec["pde"]) <= tol
            rec.update(mc=est.to_dict(), agree=agree, tolerance=tol,
                       hit_outer_fraction=est.counts[2] / est.n if est.counts else 0.0)
            all_agree &= agree
        else:
            rec.update(mc=None, agree=None, note="point is not inside the domain")
        records.append(rec)
    write_json(cfg.out / "measure.json",
               {"scenario": sc.name, "alpha": alpha if alpha is not None else "inf", "dt": dt,
                "samples": cfg.n_samples, "seed": cfg.seed, "points": records,
                "all_agree": all_agree})
    return EXIT_OK if all_agree else EXIT_FAIL


BOUNDS_COLUMNS = ["x", "y", "u_abs", "rho", "agmon_bound", "drho_flag", "thm1_value", "alpha_star",
                  "omega_star", "fk_value", "fk_stderr", "tube_lhs", "tube_rhs"]


def cmd_bounds(cfg: RunConfig) -> int:
    sc = _scenario(cfg)
    st = _solve(sc)
    pts = _query_points(cfg, sc, st)
    bcfg = BoundConfig(delta=sc.delta, **({"alpha_grid": cfg.alpha_grid} if cfg.alpha_grid else {}))
    reps = bound_report(st, pts, bcfg, n_samples=cfg.n_samples, dt=cfg.dt, seed=cfg.seed,
                        check=False)
    rows = []
    for r in reps:
        y = r.point[1] if len(r.point) > 1 else 0.0
        rows.append((r.point[0], y, r.u_abs, r.rho, r.agmon_bound, r.delta_rho_flag, r.thm1_value,
                     r.thm1_alpha_star, r.omega_at_alpha_star, r.fk_value, r.fk_stderr,
                     r.tube_lhs, r.tube_rhs))
    write_csv(cfg.out / "bounds.csv", _provenance(cfg, sc), BOUNDS_COLUMNS, rows)
    bad = soundness_violations(reps)
    write_json(cfg.out / "bounds.json",
               {"scenario": sc.name, "points": len(reps), "seed": cfg.seed,
                "samples": cfg.n_samples, "violations": bad,
                "theorem3_valid": sum(r.delta_rho_flag for r in reps),
                "theorem4_valid": sum(r.fk_valid for r in reps)})
    for v in bad:
        print(f"soundness violation: {v['bound']} at {v['point']}: {v['value']:.6g} < "
              f"|u| = {v['u_abs']:.6g}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


def cmd_closed_forms(out: Path | None = None) -> int:
    checks = oracle_checks()
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: rel_error={c.rel_error:.2e} "
              f"(tol {c.tol:.0e})")
    if out is not None:
        write_json(out / "closed_forms.json",
                   {"checks": [{"name": c.name, "value": c.value, "reference": c.reference,
                                "rel_error": c.rel_error, "passed": c.passed} for c in checks]})
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="agmonlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", choices=sorted(CONSTRUCTORS))
        p.add_argument("--config", help="scenario/run JSON file")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int, help="Monte Carlo replicas per point")
        p.add_argument("--dt", type=float, help="walk time step")
        p.add_argument("--alpha-grid", help="lo:hi:n (log spaced) or lo:hi:n:lin")
        p.add_argument("--out", default=".", help="output directory")
        return p

    common(sub.add_parser("eig", help="energy and solution"))
    a = common(sub.add_parser("agmon", help="distance, its Laplacian and flags"))
    a.add_argument("--alpha", type=float, help="also write the bubble at this level")
    m = common(sub.add_parser("measure", help="harmonic measure, Monte Carlo and PDE"))
    m.add_argument("--alpha", type=float)
    m.add_argument("--point", action="append", help="query point x or x,y (repeatable)")
    b = common(sub.add_parser("bounds", help="bound report at query points"))
    b.add_argument("--point", action="append", help="query point x or x,y (repeatable)")
    b.add_argument("--points", type=int, help="sample this many forbidden nodes instead")
    c = sub.add_parser("closed-forms", help="closed-form oracle self-test")
    c.add_argument("--out", help="also write a JSON report here")
    return ap


COMMANDS = {"eig": cmd_eig, "agmon": cmd_agmon, "measure": cmd_measure, "bounds": cmd_bounds}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "closed-forms":
        return cmd_closed_forms(Path(args.out) if args.out else None)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
