"""Command-line front end.

    scrl <command> [--config FILE] [--out DIR] [--jobs N] [--seed S] [overrides]

Config files are flat ``key = value`` lines (``#`` starts a comment).
Command-line flags override the file; unknown keys are errors.  Exit codes:
0 all checks pass, 1 a check failed, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import positivity as pos
from .dd_core import CodeParams, DegreeSystem
from .density_evolution import DERunConfig, coupled_run, coupled_threshold, de_threshold
from .potential import potential_threshold, shannon_gap_scan
from .simulation import (
    CSV_COLUMNS, CoupledLayout, failure_rate, run_coupled_trial, run_trial, trial_seed,
)

log = logging.getLogger("scrl")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# --- configuration ----------------------------------------------------------------


def _floats(s) -> tuple:
    if isinstance(s, (int, float)):
        return (float(s),)
    return tuple(float(v) for v in str(s).split(",") if v.strip())


def _ints(s) -> tuple:
    if isinstance(s, int):
        return (s,)
    return tuple(int(v) for v in str(s).split(",") if v.strip())


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_COMMON = {
    "dl": (int, 2), "dr": (int, 3), "dg": (int, 3), "beta": (float, 2.0),
    "seed": (int, 0), "jobs": (int, 1), "out": (str, "."),
}

SCHEMAS = {
    "thresholds": {**_COMMON, "L": (int, 64), "w": (_ints, (1, 2, 4)), "tol": (float, 1e-4),
                   "grid": (float, 1e-4), "max_iter": (int, 1_000_000)},
    "verify-lemmas": {**_COMMON, "grid": (float, 1e-4), "perturb_index": (int, -1),
                      "perturb_delta": (float, 0.0)},
    "potential-scan": {**_COMMON, "grid": (float, 1e-3)},
    "coupled-de": {**_COMMON, "L": (int, 64), "w": (int, 3), "eps": (float, 0.45),
                   "max_iter": (int, 1_000_000)},
    "simulate": {**_COMMON, "M": (int, 1024), "L": (int, 1), "w": (int, 1),
                 "eps": (_floats, (0.3,)), "alpha": (_floats, (0.5,)), "trials": (int, 20),
                 "real_codeword": (_bool, False)},
}


def parse_config_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value, got {raw!r}")
        k, v = (t.strip() for t in line.split("=", 1))
        if not k:
            raise ConfigError(f"config line {n}: empty key")
        out[k] = v
    return out


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, k):
        return self.values[k]

    @property
    def params(self) -> CodeParams:
        return CodeParams(self["dl"], self["dr"], self["dg"], self["beta"])

    def echo(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.values.items())}


def build_config(command: str, file_values: dict, overrides: dict) -> RunConfig:
    """Merge defaults, file values and overrides; type-convert and validate everything."""
    schema = SCHEMAS[command]
    raw = {}
    for source in (file_values, overrides):
        for k, v in source.items():
            if v is None:
                continue
            if k not in schema:
                raise ConfigError(f"unknown key {k!r} for {command}; allowed: {', '.join(sorted(schema))}")
            raw[k] = v
    vals = {}
    for k, (conv, default) in schema.items():
        if k in raw:
            try:
                vals[k] = conv(raw[k])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad value for {k}: {raw[k]!r} ({e})") from None
        else:
            vals[k] = default
    cfg = RunConfig(command, vals)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    v = cfg.values
    try:
        cfg.params
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if v["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    if v["seed"] < 0 or v["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if "grid" in v and not 0 < v["grid"] <= 1e-2:
        raise ConfigError(f"grid={v['grid']} must lie in (0, 1e-2]")
    if cfg.command == "verify-lemmas" and v["grid"] > 1e-3:
        raise ConfigError("verify-lemmas needs grid <= 1e-3")
    if "L" in v and v["L"] < 1:
        raise ConfigError("L must be >= 1")
    ws = v.get("w", ())
    if any(w < 1 for w in (ws if isinstance(ws, tuple) else (ws,))):
        raise ConfigError("w must be >= 1")
    if "tol" in v and not 0 < v["tol"] < 0.1:
        raise ConfigError("tol must lie in (0, 0.1)")
    if "max_iter" in v and v["max_iter"] < 1:
        raise ConfigError("max_iter must be >= 1")
    if "eps" in v:
        es = v["eps"] if isinstance(v["eps"], tuple) else (v["eps"],)
        closed = cfg.command == "coupled-de"
        for e in es:
            if not (0 <= e <= 1 if closed else 0 <= e < 1):
                raise ConfigError(f"eps={e} outside {'[0, 1]' if closed else '[0, 1)'}")
    if cfg.command == "simulate":
        if v["M"] < 3 or v["trials"] < 1:
            raise ConfigError("need M >= 3 and trials >= 1")
        if any(a <= -1 for a in v["alpha"]):
            raise ConfigError("alpha must exceed -1")
        if v["L"] > 1 and v["M"] // v["L"] < 1:
            raise ConfigError("M must be at least L for a coupled run")


# --- reports ------------------------------------------------------------------------


def _fmt(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits (round-trip exact)."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_fmt(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[\n" + ",\n".join(pad + _fmt(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(report: dict) -> str:
    return _fmt(report) + "\n"


def _report(cfg: RunConfig, results: dict, checks: dict, t0: float) -> dict:
    return {
        "command": cfg.command,
        "config": cfg.echo(),
        "results": results,
        "checks": checks,
        "passed": all(checks.values()),
        "wall_time_s": time.perf_counter() - t0,
    }


def _out_dir(cfg: RunConfig) -> Path:
    p = Path(cfg["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(columns)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])


def _map(fn, items, jobs: int):
    """Ordered map, fanned out to processes when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# --- commands -----------------------------------------------------------------------


def _coupled_eps(args):
    flavor, d, L, w, tol, max_iter = args
    p = CodeParams(*d)
    sys_ = DegreeSystem.primal(p) if flavor == "primal" else DegreeSystem.dual(p)
    return coupled_threshold(sys_, L, w, DERunConfig(max_iter=max_iter), tol=tol)


def cmd_thresholds(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    p = cfg.params
    primal, dual = DegreeSystem.primal(p), DegreeSystem.dual(p)
    d = (p.d_l, p.d_r, p.d_g, p.beta)
    ws = sorted(set(cfg["w"]))
    jobs = [("primal", d, cfg["L"], w, cfg["tol"], cfg["max_iter"]) for w in ws]
    eps_sc = dict(zip(ws, _map(_coupled_eps, jobs, cfg["jobs"])))
    eps_bp = de_threshold(primal, tol=cfg["tol"])
    eps_star = potential_threshold(primal, cfg["grid"])
    results = {
        "eps_shannon": p.eps_shannon,
        "eps_bp": eps_bp,
        "eps_bp_dual": de_threshold(dual, tol=cfg["tol"]),
        "eps_star": eps_star,
        "eps_star_dual": potential_threshold(dual, cfg["grid"]),
        "L": cfg["L"],
        "eps_sc": {str(w): eps_sc[w] for w in ws},
    }
    seq = [eps_sc[w] for w in ws]
    checks = {
        "eps_sc_nondecreasing_in_w": all(b >= a - cfg["tol"] for a, b in zip(seq, seq[1:])),
        "eps_star_at_most_shannon": eps_star <= p.eps_shannon + 1e-3,
        "eps_sc_at_most_eps_star": all(e <= eps_star + 2 * cfg["tol"] + 1e-3 for e in seq),
    }
    return _report(cfg, results, checks, t0)


def _psi_report(psi: pos.IntPolynomial, grid: float) -> tuple:
    chain = pos.sturm_chain(psi)
    s0, s1 = pos.chain_signs(chain, 0), pos.chain_signs(chain, 1)
    roots = pos.count_roots(psi, 0, 1)
    z = pos.open_grid(grid)
    bound = z**2 * psi(z) / 60
    first_bad_bound = pos.scan_positive(bound, z)
    first_bad_gap = pos.scan_positive(pos.beta_u_dual_343(z) - bound, z)
    n = len(chain)
    res = {
        "psi_coefficients": [str(c) for c in psi.coeffs],
        "chain_length": n,
        "sign_table": [{"i": i, "z0": a, "z1": b} for i, (a, b) in enumerate(zip(s0, s1))],
        "published_table": {"z0": list(pos.PUBLISHED_TABLE[0]), "z1": list(pos.PUBLISHED_TABLE[1])},
        "sign_changes_z0": pos.sign_changes(chain, 0),
        "sign_changes_z1": pos.sign_changes(chain, 1),
        "root_count_0_1": roots,
        "root_intervals": [[float(a), float(b)] for a, b in pos.isolate_roots(psi)] if roots else [],
        "bound_first_nonpositive_z": first_bad_bound,
        "gap_first_nonpositive_z": first_bad_gap,
    }
    checks = {
        "343_table_prefix_match": s0 == pos.PUBLISHED_TABLE[0][:n] and s1 == pos.PUBLISHED_TABLE[1][:n],
        "343_table_exact_match": s0 == pos.PUBLISHED_TABLE[0] and s1 == pos.PUBLISHED_TABLE[1],
        "343_psi_no_roots": roots == 0,
        "343_bound_positive": first_bad_bound is None,
        "343_closed_form_above_bound": first_bad_gap is None,
    }
    return res, checks


def cmd_verify_lemmas(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    grid = cfg["grid"]
    z = pos.open_grid(grid)
    b233 = pos.lower_bound_233(z)
    r233 = {
        "phi_root_count_0_1": pos.count_roots(pos.PHI, 0, 1),
        "bound_first_nonpositive_z": pos.scan_positive(b233, z),
        "gap_first_nonpositive_z": pos.scan_positive(pos.beta_u_dual_233(z) - b233, z),
        "phi_second_derivative_negative": pos.phi_second_derivative_negative(),
    }
    psi = pos.PSI
    if cfg["perturb_index"] >= 0:
        psi = pos.perturbed(psi, cfg["perturb_index"], cfg["perturb_delta"])
    r343, c343 = _psi_report(psi, grid)
    try:
        logb = pos.verify_log_bounds(grid)
        log_ok = True
    except pos.BoundViolation as e:
        logb = {"violation": e.name, "z": e.z}
        log_ok = False
    nec = {f"({dr},{dg})": {"bound": pos.necessary_condition_bound(dr),
                            "holds": pos.necessary_condition(dr, dg)}
           for dr, dg in ((3, 3), (4, 3), (3, 2))}
    results = {"lemma_233": r233, "lemma_343": r343, "log_bounds": logb, "necessary_condition": nec}
    checks = {
        "233_phi_no_roots": r233["phi_root_count_0_1"] == 0,
        "233_bound_positive": r233["bound_first_nonpositive_z"] is None,
        "233_closed_form_above_bound": r233["gap_first_nonpositive_z"] is None,
        "233_phi_concave": r233["phi_second_derivative_negative"],
        **c343,
        "log_bounds_strict": log_ok,
        "necessary_condition_values": [v["holds"] for v in nec.values()] == [True, True, False],
    }
    return _report(cfg, results, checks, t0)


def cmd_potential_scan(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    rows = shannon_gap_scan(cfg.params, cfg["grid"])
    kept = [r for r in rows if r[5]]
    path = _out_dir(cfg) / "potential_scan.csv"
    _write_csv(path, ("x", "x2", "eps", "U", "gap"), [tuple(float(v) for v in r[:5]) for r in kept])
    gaps = [r[4] for r in kept]
    results = {
        "csv": str(path),
        "grid_points": len(rows),
        "rows_written": len(kept),
        "excluded_out_of_range": len(rows) - len(kept),
        "min_gap": min(gaps) if gaps else None,
    }
    checks = {"min_gap_positive": bool(gaps) and min(gaps) > 0}
    return _report(cfg, results, checks, t0)


def cmd_coupled_de(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    sys_ = DegreeSystem.primal(cfg.params)
    L, w = cfg["L"], cfg["w"]
    out = coupled_run(sys_, cfg["eps"], L, w, DERunConfig(max_iter=cfg["max_iter"]))
    path = _out_dir(cfg) / "coupled_profile.csv"
    positions = np.arange(-(w - 1), L + w - 1)
    _write_csv(path, ("position", "x1", "x2"),
               [(int(i), float(a), float(b)) for i, (a, b) in zip(positions, out.final_state)])
    results = {
        "csv": str(path),
        "converged_to_zero": out.converged_to_zero,
        "iterations": out.iterations,
        "residual": out.residual,
        "stalled": out.stalled,
    }
    return _report(cfg, results, {"de_terminated": not out.stalled}, t0)


def _trial_job(args):
    d, M, L, w, eps, alpha, master, idx, real = args
    p = CodeParams(*d)
    seed = trial_seed(master, idx)
    if L == 1 and w == 1:
        return run_trial(p, M, alpha, eps, seed, real_codeword=real)
    return run_coupled_trial(p, CoupledLayout(L, w, max(1, M // L)), eps, seed, alpha=alpha)


def cmd_simulate(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    p = cfg.params
    d = (p.d_l, p.d_r, p.d_g, p.beta)
    points = sorted((e, a) for e in cfg["eps"] for a in cfg["alpha"])
    jobs = []
    for pi, (e, a) in enumerate(points):
        for t in range(cfg["trials"]):
            # trial index is unique across the whole batch
            jobs.append((d, cfg["M"], cfg["L"], cfg["w"], e, a, cfg["seed"],
                         pi * cfg["trials"] + t, cfg["real_codeword"]))
    res = _map(_trial_job, jobs, cfg["jobs"])
    path = _out_dir(cfg) / "simulate.csv"
    _write_csv(path, CSV_COLUMNS, [tuple(r.row()[c] for c in CSV_COLUMNS) for r in res])
    agg = []
    for pi, (e, a) in enumerate(points):
        chunk = res[pi * cfg["trials"] : (pi + 1) * cfg["trials"]]
        agg.append({
            "M": chunk[0].M, "L": cfg["L"], "w": cfg["w"], "eps": e, "alpha": a,
            "trials": len(chunk), "failure_rate": failure_rate(chunk),
            "mean_residual": float(np.mean([r.residual for r in chunk])),
        })
    results = {"csv": str(path), "points": agg}
    checks = {}
    alphas = sorted(cfg["alpha"])
    if len(alphas) > 1:
        # more overhead should never hurt, at every eps
        ok = True
        for e in sorted(cfg["eps"]):
            rates = [r["failure_rate"] for r in agg if r["eps"] == e]
            ok &= rates[-1] < rates[0]
        checks["failure_rate_decreases_with_alpha"] = bool(ok)
    return _report(cfg, results, checks, t0)


COMMANDS = {
    "thresholds": cmd_thresholds,
    "verify-lemmas": cmd_verify_lemmas,
    "potential-scan": cmd_potential_scan,
    "coupled-de": cmd_coupled_de,
    "simulate": cmd_simulate,
}


# --- entry point --------------------------------------------------------------------

_FLAG_KEYS = ("out", "jobs", "seed", "dl", "dr", "dg", "beta", "L", "w", "eps", "alpha", "M",
              "trials", "grid")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scrl", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")
        for k in _FLAG_KEYS:
            sp.add_argument(f"--{k}", dest=k, default=None)
    return ap


def run(argv=None) -> tuple:
    """Parse, execute and return (exit code, report or None)."""
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        file_vals = parse_config_text(args.config.read_text()) if args.config else {}
        overrides = {k: getattr(args, k) for k in _FLAG_KEYS}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        cfg = build_config(args.command, file_vals, overrides)
    except (ConfigError, OSError) as e:
        print(f"scrl: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG, None
    report = COMMANDS[args.command](cfg)
    text = dumps_report(report)
    (_out_dir(cfg) / f"{args.command}.json").write_text(text)
    sys.stdout.write(text)
    return (EXIT_OK if report["passed"] else EXIT_FAIL), report


def main(argv=None) -> int:
    level = os.environ.get("SCRL_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
