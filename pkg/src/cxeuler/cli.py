"""Batch experiment runner.

A config is a JSON object::

    {"experiment": "manifold-picard", "params": {"delta": 1e-3}, "seed": 0, "output_dir": "out"}

Exit status: 0 when every criterion passes, 1 when one fails, 2 on a usage
or precondition error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HypothesisViolation
from .fourier import bracket


class ConfigError(ValueError):
    """Invalid configuration; reported with exit status 2."""


@dataclass
class Criterion:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": _num(self.value),
                "threshold": _num(self.threshold), "detail": self.detail}


@dataclass
class Outcome:
    criteria: list
    measured: dict
    csvs: dict


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _csv(header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in r))
    return "\n".join(lines) + "\n"


# -- parameter checks -----------------------------------------------------------

def _require(p, name, cond, msg):
    if not cond(p[name]):
        raise ConfigError(f"{name}: {msg} (got {p[name]!r})")


def _positive(p, *names):
    for n in names:
        _require(p, n, lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 and math.isfinite(v),
                 "must be a positive number")


def _nonnegative(p, *names):
    for n in names:
        _require(p, n, lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0, "must be >= 0")


def _int_at_least(p, name, lo):
    _require(p, name, lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= lo, f"must be an integer >= {lo}")


def _complex_pair(v, name):
    """Accept [z1, z2] with entries numbers or {"re", "im"} objects."""
    try:
        out = []
        for z in v:
            out.append(complex(z["re"], z.get("im", 0.0)) if isinstance(z, dict) else complex(z))
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"{name}: expected a pair of numbers or {{re, im}} objects") from exc
    if len(out) != 2:
        raise ConfigError(f"{name}: expected two entries")
    return np.array(out)


# -- experiments ------------------------------------------------------------------

def _shear_inflation_check(p):
    _positive(p, "eps", "M", "T", "margin")
    _nonnegative(p, "s")
    _int_at_least(p, "doublings", 0)


def _shear_inflation(p, rng):
    from .shear import norm_inflation_experiment

    base = norm_inflation_experiment(p["eps"], p["s"], p["M"], p["T"])
    runs = [base] + [norm_inflation_experiment(p["eps"], p["s"], p["M"], p["T"], k=base.k * 2**j)
                     for j in range(1, p["doublings"] + 1)]
    crit = [Criterion("crossing_within_margin", base.within(p["margin"]),
                      base.T0 if base.crossed else math.inf, p["margin"] * base.predicted_T0,
                      f"k={base.k}")]
    T0s = [r.T0 if r.crossed else math.inf for r in runs]
    worst = max((b - a for a, b in zip(T0s, T0s[1:])), default=0.0)
    crit.append(Criterion("crossing_time_nonincreasing_under_doubling", worst <= 0.0, worst, 0.0))
    rows = [(r.k, r.T0 if r.crossed else math.inf, r.predicted_T0, r.initial_norm, r.sup_norm) for r in runs]
    csvs = {
        "inflation.csv": _csv(["k", "T0", "predicted_T0", "initial_norm", "sup_norm"], rows),
        "inflation_norms.csv": _csv(["t", "hs_norm"], zip(base.times, base.norms)),
    }
    return Outcome(crit, {"k": base.k, "T0": T0s, "predicted_T0": base.predicted_T0}, csvs)


def _shear_analyticity_check(p):
    _positive(p, "q_in", "T", "dt", "tol")
    _nonnegative(p, "p")
    _int_at_least(p, "K", 2)


def _shear_analyticity(p, rng):
    from .shear import loss_of_analyticity_experiment

    r = loss_of_analyticity_experiment(p["q_in"], p["p"], p["K"], p["T"], p["dt"])
    crit = [
        Criterion("radius_matches_integral_q", r.max_rel_error <= p["tol"], r.max_rel_error, p["tol"]),
        Criterion("energy_drift", r.energy_drift <= 1e-10, r.energy_drift, 1e-10),
    ]
    rows = zip(r.times, r.q, r.integral_q, r.radius, r.rel_error)
    return Outcome(crit, {"max_rel_error": r.max_rel_error, "energy_drift": r.energy_drift},
                   {"analyticity.csv": _csv(["t", "q", "integral_q", "radius", "rel_error"], rows)})


def _euler2d_conserve_check(p):
    _int_at_least(p, "K", 4)
    _positive(p, "dt", "T", "amplitude", "sigma", "tol")


def _rel_drift(series):
    s = np.asarray(series)
    ref = np.linalg.norm(s[0]) if s.ndim > 1 else abs(s[0])
    d = np.abs(s - s[0]) if s.ndim == 1 else np.linalg.norm(s - s[0], axis=1)
    return float(d.max() / ref)


def _euler2d_conserve(p, rng):
    from .euler2d import SolverConfig, analytic_data, integrate

    st = analytic_data(p["K"], rng, amplitude=p["amplitude"], sigma=p["sigma"])
    cfg = SolverConfig(K=p["K"], dt=p["dt"])
    traj = integrate(st, cfg, p["T"], sample_every=max(1, int(round(p["T"] / p["dt"])) // 20))
    drifts = {name: _rel_drift(traj.series(name)) for name in ("energy", "enstrophy", "casimir3", "mean_re")}
    crit = [Criterion(f"{k}_drift", v <= p["tol"], v, p["tol"]) for k, v in drifts.items()]
    ens, c3, mr = traj.series("enstrophy"), traj.series("casimir3"), traj.series("mean_re")
    rows = [(t, e, z.real, z.imag, c.real, c.imag, m[0], m[1], tl) for t, e, z, c, m, tl in
            zip(traj.times, traj.series("energy"), ens, c3, mr, traj.series("tail"))]
    header = ["t", "energy", "enstrophy_re", "enstrophy_im", "casimir3_re", "casimir3_im", "mean_re_1", "mean_re_2", "tail"]
    return Outcome(crit, {"drifts": drifts}, {"conservation.csv": _csv(header, rows)})


def _euler2d_growth_check(p):
    _complex_pair(p["a"], "a")
    _require(p, "k", lambda v: isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) for x in v) and any(v),
             "must be a nonzero integer pair")
    _positive(p, "delta", "tol", "dt")


def _euler2d_growth(p, rng):
    from .euler2d import linear_growth_check

    g = linear_growth_check(_complex_pair(p["a"], "a"), tuple(p["k"]), delta=p["delta"], dt=p["dt"])
    crit = [Criterion("growth_rate", g.within(p["tol"]), g.measured, g.predicted,
                      f"|measured - predicted| <= {p['tol']} |a||k|")]
    return Outcome(crit, {"measured": g.measured, "predicted": g.predicted},
                   {"growth.csv": _csv(["t", "amplitude"], zip(g.times, g.amplitudes))})


def _burgers_hyperbolic_check(p):
    _int_at_least(p, "n_samples", 1)
    _positive(p, "scale")


def _burgers_hyperbolic(p, rng):
    from .manifold.system import geometric_burgers_hyperbolicity, geometric_burgers_matrix

    ab = rng.uniform(-p["scale"], p["scale"], size=(p["n_samples"], 2))
    lam = geometric_burgers_hyperbolicity(ab[:, 0], ab[:, 1])
    mats = np.array([geometric_burgers_matrix(a, b) for a, b in ab])
    ev = np.linalg.eigvals(mats)
    worst_imag = float(np.abs(ev.imag).max() / p["scale"])
    ev = np.sort(ev.real, axis=1)
    agree = float(np.abs(ev - lam).max() / p["scale"])
    gap = float((lam[:, 1] - lam[:, 0]).min())
    origin = geometric_burgers_hyperbolicity(0.0, 0.0)
    ref = geometric_burgers_hyperbolicity(0.0, 1.0)
    ref_err = float(np.abs(ref - np.array([-math.sqrt(3), math.sqrt(3)])).max())
    crit = [
        Criterion("eigenvalues_real", worst_imag <= 1e-12, worst_imag, 1e-12),
        Criterion("roots_match_matrix", agree <= 1e-10, agree, 1e-10),
        Criterion("distinct_away_from_origin", gap > 0, gap, 0.0),
        Criterion("coincident_at_origin", float(abs(origin[1] - origin[0])) == 0.0, float(abs(origin[1] - origin[0])), 0.0),
        Criterion("reference_point", ref_err <= 1e-12, ref_err, 1e-12),
    ]
    rows = [(a, b, l0, l1) for (a, b), (l0, l1) in zip(ab[:100], lam[:100])]
    return Outcome(crit, {"min_gap": gap, "worst_imag": worst_imag},
                   {"hyperbolicity.csv": _csv(["a", "b", "lambda_minus", "lambda_plus"], rows)})


# -- manifold experiments ----------------------------------------------------------

_MP_KEYS = {"gamma", "zeta", "nu", "delta_group", "m0", "eps0", "eps1", "K", "T", "N", "picard_tol", "picard_max_iters", "s"}


def _system(p):
    from .manifold.system import LocalSystem, burgers_system, jordan_system

    spec = p["system"]
    if spec == "burgers":
        return burgers_system()
    if spec == "jordan":
        return jordan_system()
    if isinstance(spec, dict):
        try:
            return LocalSystem.from_dict(spec)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"system: {exc}") from exc
    raise ConfigError(f"system: expected 'burgers', 'jordan' or a system object (got {spec!r})")


def _manifold_params(p, sysobj):
    from .manifold.fixedpoint import ManifoldParams

    kw = {k: p[k] for k in _MP_KEYS if k in p and p[k] is not None}
    if "delta_group" in kw:
        kw["delta"] = kw.pop("delta_group")
    if "m0" not in kw and sysobj.name != "burgers":
        kw["m0"] = sysobj.m0(kw.get("K", 32))
    for name in ("gamma", "nu", "m0", "picard_tol"):
        if name in kw:
            _positive(kw, name)
    for name in ("K", "N", "picard_max_iters"):
        if name in kw:
            _int_at_least(kw, name, 1)
    try:
        return ManifoldParams(**kw)
    except (HypothesisViolation, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _gate(fn, *args):
    try:
        fn(*args)
    except HypothesisViolation as exc:
        raise ConfigError(str(exc)) from exc


def _picard_check(p):
    sysobj = _system(p)
    mp = _manifold_params(p, sysobj)
    try:
        mp.check_primary()
    except HypothesisViolation as exc:
        raise ConfigError(f"gamma: {exc}") from exc
    _positive(p, "residual_tol")
    _nonnegative(p, "delta")
    _int_at_least(p, "k", 1)
    _int_at_least(p, "csv_stride", 1)
    size = p["delta"] * float(bracket(p["k"]))
    if mp.eps0 is not None and size > mp.eps0:
        raise ConfigError(f"delta: |a0|_(A^0,1) = {size:.3g} exceeds eps0 = {mp.eps0:.3g}")
    from .manifold.operators import assemble_mode_operator

    _gate(assemble_mode_operator, sysobj, p["k"], mp.gamma)
    return sysobj, mp


def _picard(p, rng):
    from .manifold.fixedpoint import pde_residual, picard_solve, unstable_mode

    sysobj, mp = _picard_check(p)
    a0 = unstable_mode(sysobj, p["k"], mp.K, mp.gamma, p["delta"])
    tr = picard_solve(sysobj, a0, mp)
    info = tr.info
    res = float(pde_residual(sysobj, tr).max()) if p["delta"] > 0 else 0.0
    crit = [
        Criterion("picard_converged", info["iterations"] <= mp.picard_max_iters and info["residual"] <= mp.picard_tol,
                  info["residual"], mp.picard_tol, f"{info['iterations']} iterations"),
        Criterion("contraction_factor", info["max_ratio"] <= 0.5, info["max_ratio"], 0.5),
        Criterion("pde_residual", res <= p["residual_tol"], res, p["residual_tol"]),
        Criterion("weighted_bound_constant_finite", p["delta"] == 0 or math.isfinite(info["C"]), info["C"], math.inf),
        Criterion("unstable_part_reproduced", info["pu_defect"] <= 1e-12 * max(p["delta"], 1e-300) or info["pu_defect"] == 0,
                  info["pu_defect"], 1e-12 * p["delta"]),
    ]
    measured = {k: info[k] for k in ("iterations", "residual", "max_ratio", "C", "weighted_norm", "a0_norm", "tail_bound", "pu_defect")}
    measured["pde_residual"] = res
    measured["ratios"] = info["ratios"]
    sub = replace(tr, times=tr.times[:: -p["csv_stride"]][::-1], coeffs=tr.coeffs[:: -p["csv_stride"]][::-1])
    iters = _csv(["iteration", "difference"], enumerate(info["diffs"], 1))
    return Outcome(crit, measured, {"trajectory.csv": sub.to_csv(), "iterations.csv": iters})


def _scatter_check(p):
    sysobj = _system(p)
    mp = _manifold_params(p, sysobj)
    try:
        mp.check_scattering()
        mp.check_primary()
    except HypothesisViolation as exc:
        raise ConfigError(f"gamma: {exc}; the round trip needs gamma = m0/2") from exc
    _positive(p, "delta", "exponent_tol", "roundtrip_tol")
    _int_at_least(p, "n", 1)
    _int_at_least(p, "halvings", 1)
    size = p["delta"] * float(bracket(p["n"]))
    if mp.eps1 is not None and size > mp.eps1:
        raise ConfigError(f"delta: |b0|_(A^0,1) = {size:.3g} exceeds eps1 = {mp.eps1:.3g}")
    return sysobj, mp


def _scatter(p, rng):
    from .manifold.fixedpoint import eigenmode, picard_solve, scattering_solve

    sysobj, mp = _scatter_check(p)
    unit, lam = eigenmode(sysobj, p["n"], mp.K)
    runs = []
    for j in range(p["halvings"] + 1):
        d = p["delta"] / 2**j
        runs.append((d, scattering_solve(sysobj, unit * d, mp)))
    vs = np.array([r.info["v_norm"] for _, r in runs])
    slopes = np.log2(vs[:-1] / vs[1:])
    worst = float(np.abs(slopes - 2.0).max())
    first = runs[0][1]
    back = picard_solve(sysobj, first.info["a0"], replace(mp, eps0=None))
    rt = float(np.abs(back.coeffs - first.coeffs).max())
    crit = [
        Criterion("quadratic_exponent", worst <= p["exponent_tol"], worst, p["exponent_tol"],
                  "max |slope - 2| over halvings"),
        Criterion("roundtrip_through_picard", rt <= p["roundtrip_tol"], rt, p["roundtrip_tol"]),
    ]
    rows = [(d, r.info["v_norm"], r.info["ratio"], r.info["iterations"]) for d, r in runs]
    return Outcome(crit, {"slopes": slopes.tolist(), "roundtrip": rt, "lambda": [lam.real, lam.imag],
                          "max_ratio": max(r.info["max_ratio"] for _, r in runs)},
                   {"scattering.csv": _csv(["delta", "v_norm", "v_over_b0_sq", "iterations"], rows)})


def _illposed_check(p):
    sysobj = _system(p)
    mp = _manifold_params(p, sysobj)
    try:
        mp.check_scattering()
    except HypothesisViolation as exc:
        raise ConfigError(f"gamma: {exc}") from exc
    _require(p, "s", lambda v: isinstance(v, (int, float)) and v > 1, "must exceed 1")
    _require(p, "t", lambda v: isinstance(v, (int, float)) and v < 0, "must be negative")
    if p["M"] is not None:
        _positive(p, "M")
    _require(p, "n_list", lambda v: isinstance(v, list) and v and all(isinstance(x, int) and x > 0 for x in v),
             "must be a list of positive integers")
    _positive(p, "linear_tol")
    return sysobj, mp


def _illposed(p, rng):
    from .manifold.fixedpoint import illposedness_experiment

    sysobj, mp = _illposed_check(p)
    r = illposedness_experiment(sysobj, p["s"], p["t"], p["M"], tuple(p["n_list"]), mp)
    M = r.params["M"]
    a0_min = min((row["a0_Hs"] for row in r.rows), default=0.0)
    lin = r.linear_error()
    crit = [
        Criterion("all_wavenumbers_reported", not r.skipped, len(r.skipped), 0, json.dumps(r.skipped)),
        Criterion("w_Hs_strictly_decreasing", r.strictly_decreasing and len(r.rows) >= 2,
                  float(np.diff(r.w_column).max()) if len(r.rows) > 1 else math.nan, 0.0),
        Criterion("a0_Hs_at_least_M", a0_min >= M, a0_min, M),
        Criterion("linear_column", lin <= p["linear_tol"], lin, p["linear_tol"]),
    ]
    keys = ["n", "lambda_re", "b0_A01", "a0_Hs", "a0_A01", "w_Hs", "linear_Hs", "predicted_linear", "v_ratio"]
    rows = [[row[k] for k in keys] for row in r.rows]
    return Outcome(crit, {"rows": r.rows, "skipped": r.skipped, "M": M}, {"illposedness.csv": _csv(keys, rows)})


_MANIFOLD_DEFAULTS = {"system": "burgers"}

EXPERIMENTS = {
    "shear-inflation": ({"eps": 0.1, "s": 1.0, "M": 10.0, "T": 10.0, "margin": 5.0, "doublings": 2},
                        _shear_inflation_check, _shear_inflation),
    "shear-analyticity": ({"q_in": 1.0, "p": 1.0, "K": 256, "T": 2.0, "dt": 1e-3, "tol": 0.02},
                          _shear_analyticity_check, _shear_analyticity),
    "euler2d-conserve": ({"K": 64, "dt": 1e-3, "T": 1.0, "amplitude": 0.05, "sigma": 0.5, "tol": 1e-6},
                         _euler2d_conserve_check, _euler2d_conserve),
    "euler2d-growth": ({"a": [{"re": 0.0, "im": -1.0}, 0.0], "k": [1, 0], "delta": 1e-6, "dt": 1e-3, "tol": 0.01},
                       _euler2d_growth_check, _euler2d_growth),
    "manifold-picard": ({**_MANIFOLD_DEFAULTS, "k": 1, "delta": 1e-3, "residual_tol": 1e-6, "csv_stride": 10},
                        _picard_check, _picard),
    "manifold-scatter": ({**_MANIFOLD_DEFAULTS, "n": 1, "delta": 0.02, "halvings": 3, "exponent_tol": 0.1,
                          "roundtrip_tol": 1e-8}, _scatter_check, _scatter),
    "manifold-illposed": ({**_MANIFOLD_DEFAULTS, "s": 2.0, "t": -0.5, "M": None, "n_list": [4, 8, 16],
                           "linear_tol": 1e-8}, _illposed_check, _illposed),
    "burgers-hyperbolic": ({"n_samples": 10000, "scale": 10.0}, _burgers_hyperbolic_check, _burgers_hyperbolic),
}

_MANIFOLD = {"manifold-picard", "manifold-scatter", "manifold-illposed"}


@dataclass
class RunConfig:
    experiment: str
    params: dict
    output_dir: str = "out"
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in d:
            raise ConfigError("experiment: missing")
        name = d["experiment"]
        if name not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown name {name!r}; choose from {sorted(EXPERIMENTS)}")
        defaults = EXPERIMENTS[name][0]
        given = d.get("params", {}) or {}
        if not isinstance(given, dict):
            raise ConfigError("params: must be an object")
        allowed = set(defaults) | (_MP_KEYS if name in _MANIFOLD else set())
        bad = set(given) - allowed
        if bad:
            raise ConfigError(f"params: unknown fields {sorted(bad)} for {name}")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"seed: must be a nonnegative integer (got {seed!r})")
        return cls(name, {**defaults, **given}, str(d.get("output_dir", "out")), seed)


def validate(config: RunConfig) -> str:
    """Dry-run parameter validation; returns "ok" or raises ConfigError."""
    EXPERIMENTS[config.experiment][1](config.params)
    return "ok"


def run(config: RunConfig, out_dir: str | None = None) -> tuple[int, dict]:
    """Run one experiment, write its artifacts, return (exit status, manifest)."""
    validate(config)
    out = Path(out_dir or config.output_dir)
    rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()
    outcome = EXPERIMENTS[config.experiment][2](config.params, rng)
    elapsed = time.perf_counter() - t0
    out.mkdir(parents=True, exist_ok=True)
    for name, text in outcome.csvs.items():
        (out / name).write_text(text)
    resolved = dict(config.params)
    if config.experiment in _MANIFOLD:
        resolved["manifold_params"] = _manifold_params(config.params, _system(config.params)).to_dict()
    manifest = {
        "experiment": config.experiment,
        "params": resolved,
        "seed": config.seed,
        "version": __version__,
        "criteria": [c.to_dict() for c in outcome.criteria],
        "measured": _jsonable(outcome.measured),
        "files": sorted(outcome.csvs),
        "passed": all(c.passed for c in outcome.criteria),
        "runtime_s": elapsed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return (0 if manifest["passed"] else 1), manifest


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _num(x.real), "im": _num(x.imag)}
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return _num(x)
    return x


def _parser():
    ap = argparse.ArgumentParser(prog="cxeuler", description="Run complex Euler and unstable-manifold experiments.")
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides output_dir in the config)")
    ap.add_argument("--validate-only", action="store_true", help="check the configuration without computing")
    ap.add_argument("--list-experiments", action="store_true", help="print experiment names and defaults")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.list_experiments:
        for name, (defaults, _, _) in EXPERIMENTS.items():
            print(f"{name}\t{json.dumps(defaults)}")
        return 0
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2
    try:
        text = Path(args.config).read_text()
        config = RunConfig.from_dict(json.loads(text))
        if args.validate_only:
            print(validate(config))
            return 0
        status, manifest = run(config, args.out)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in manifest["criteria"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']} (threshold {c['threshold']})")
    if status:
        failed = [c["name"] for c in manifest["criteria"] if not c["passed"]]
        print(f"failed criteria: {', '.join(failed)}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
