"""Command-line harness: instance generation, single runs, sweeps and polynomial certification.

Exit codes: 0 success, 2 contract violation (bad flags or inputs), 3 a
certification invariant failed.  Relative output paths are resolved under
``$GIBBSGAME_OUT_DIR`` when that variable is set.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats

from . import solver as slv
from .errors import ConstructionError, ContractViolation, EstimationError, HintViolation
from .game import GAME_KINDS, duality_gap, load_game, random_game, save_game
from .oracles import ORACLE_KINDS
from .poly import C_DEG, SUP_BOUND, build_bounded_exp

OUT_DIR_ENV = "GIBBSGAME_OUT_DIR"
EXIT_CONTRACT = 2
EXIT_CERTIFY = 3

RUN_FIELDS = ["seed", "m", "n", "eps", "alpha", "oracle", "gap", "samp_queries", "update_queries",
              "init_queries", "classical_ops", "wall_ms", "phases", "k", "mean_rho", "mean_acceptance"]
PHASE_FIELDS = ["side", "phase", "tau", "length", "rho", "rho_bound", "Z_tilde", "Z_true", "R",
                "heavy_size", "k", "acceptance_mass", "R_hat0", "successes", "test_trials"]
POLY_FIELDS = ["beta", "xi", "degree", "err_left", "sup_all", "attempts"]


def out_path(p) -> Path:
    p = Path(p)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def append_rows(path, fields, rows) -> None:
    path = out_path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=fields, restval="", extrasaction="ignore")
        if new:
            wr.writeheader()
        wr.writerows(rows)


def write_rows(path, fields, rows) -> None:
    path = out_path(path)
    with path.open("w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=fields, restval="", extrasaction="ignore")
        wr.writeheader()
        wr.writerows(rows)


def run_record(out: slv.NEOutput, A, params: slv.SolverParams, kind: str, wall_ms: float) -> dict:
    led = out.ledger
    col, row = out.oracles
    if kind == "phased-hint":
        logs = col.phase_log + row.phase_log
        phases = len(col.phase_log)
        k = max(col.pconfig.k, row.pconfig.k)
        mean_rho = float(np.mean([r["rho"] for r in logs]))
    else:
        phases, k = 0, 0
        mean_rho = 1.0 if kind == "exact" else 0.5 * (A.m + A.n)
    acc = led.accepted / led.proposals if led.proposals else 1.0
    return {"seed": params.seed, "m": A.m, "n": A.n, "eps": params.eps, "alpha": params.alpha,
            "oracle": kind, "gap": repr(float(out.gap)), "samp_queries": repr(float(led.sample_queries)),
            "update_queries": repr(float(led.update_queries)), "init_queries": repr(float(led.init_queries)),
            "classical_ops": led.classical_ops, "wall_ms": round(wall_ms, 3), "phases": phases,
            "k": k, "mean_rho": repr(float(mean_rho)), "mean_acceptance": repr(float(acc))}


def _params(args, m, n):
    p = slv.default_params(args.eps, args.alpha, m, n, c_T=args.c_T, preset=args.params,
                           seed=args.seed, oracle_kind=args.oracle)
    if getattr(args, "delta", None) is not None:
        p = slv.SolverParams(p.eps, p.alpha, p.eta, args.delta, p.T, p.seed, p.c_T, p.preset)
    return p


def _opts(args) -> slv.OracleOptions:
    return slv.OracleOptions(mode=args.mode, charge=args.charge)


def run_one(A, params, kind, opts, timing=True, iterate_log=False):
    t0 = time.perf_counter()
    out = slv.solve(A, params, kind, np.random.default_rng(params.seed), opts=opts,
                    iterate_log=iterate_log)
    wall = (time.perf_counter() - t0) * 1e3 if timing else 0.0
    return out, run_record(out, A, params, kind, wall)


def cmd_gen(args) -> int:
    save_game(random_game(args.m, args.n, args.kind, args.seed), out_path(args.out))
    return 0


def cmd_solve(args) -> int:
    A = load_game(args.game)
    params = _params(args, A.m, A.n)
    out, rec = run_one(A, params, args.oracle, _opts(args), not args.no_timing,
                       iterate_log=bool(args.iterate_log))
    append_rows(args.out, RUN_FIELDS, [rec])
    if args.phase_log and args.oracle == "phased-hint":
        rows = []
        for side, orc in zip(("col", "row"), out.oracles):
            rows.extend(dict(r, side=side) for r in orc.phase_log)
        write_rows(args.phase_log, PHASE_FIELDS, rows)
    if args.iterate_log:
        log = out.iterate_log
        write_rows(args.iterate_log, ["t", "i", "j"],
                   ({"t": t, "i": int(i), "j": int(j)} for t, (i, j) in enumerate(zip(log.i_seq, log.j_seq))))
        ub, vb = slv.averaged_iterates(log)
        print(f"averaged-iterate gap {duality_gap(A, ub, vb).gap:.6g}", file=sys.stderr)
    print(f"gap {out.gap:.6g}  T {params.T}  queries {out.ledger.total_queries:.6g}")
    return 0


def fit_slope(x, y):
    """Least-squares slope of ln y on ln x, with its standard error."""
    r = stats.linregress(np.log(x), np.log(y))
    return float(r.slope), float(r.stderr)


def cmd_sweep(args) -> int:
    values = args.values
    if len(values) < 3:
        raise ContractViolation("a sweep needs at least 3 axis values")
    rows = []
    for v in values:
        n = int(v) if args.axis == "n" else args.n
        eps = args.eps if args.axis == "n" else float(v)
        for trial in range(args.trials):
            seed = args.seed + trial
            A = random_game(n, n, args.kind, seed)
            for kind in args.oracle:
                params = slv.default_params(eps, args.alpha, n, n, c_T=args.c_T, preset=args.params,
                                            seed=seed, oracle_kind=kind)
                _, rec = run_one(A, params, kind, _opts(args), not args.no_timing)
                rows.append(rec)
    write_rows(args.out, RUN_FIELDS, rows)
    for kind in args.oracle:
        xs, ys = sweep_points(rows, kind, args.axis)
        slope, se = fit_slope(xs, ys)
        label = "n" if args.axis == "n" else "1/eps"
        print(f"{kind}: slope of ln(total queries) vs ln({label}) = {slope:.3f} +/- {se:.3f}")
    return 0


def sweep_points(rows, kind, axis):
    """Axis values and mean total charged queries per point for one oracle."""
    pts = {}
    for r in rows:
        if r["oracle"] != kind:
            continue
        x = float(r["n"]) if axis == "n" else 1.0 / float(r["eps"])
        tot = float(r["samp_queries"]) + float(r["update_queries"]) + float(r["init_queries"])
        pts.setdefault(x, []).append(tot)
    xs = sorted(pts)
    return np.array(xs), np.array([np.mean(pts[x]) for x in xs])


def certify_rows(betas, xis):
    rows, ok = [], True
    for xi in xis:
        if not 0 < xi <= 0.1:
            raise ContractViolation(f"xi = {xi} outside (0, 1/10]")
    for b in betas:
        for xi in xis:
            try:
                P = build_bounded_exp(b, xi)
            except ConstructionError as exc:
                rows.append({"beta": b, "xi": xi, "degree": exc.degree, "err_left": exc.err_left,
                             "sup_all": exc.sup_all, "attempts": -1})
                ok = False
                continue
            good = (P.certified_err_left <= xi and P.certified_sup <= SUP_BOUND
                    and P.degree <= C_DEG * b * math.log(1 / xi))
            ok &= good
            rows.append({"beta": b, "xi": xi, "degree": P.degree, "err_left": repr(float(P.certified_err_left)),
                         "sup_all": repr(float(P.certified_sup)), "attempts": P.attempts})
    return rows, ok


def cmd_certify_poly(args) -> int:
    rows, ok = certify_rows(args.beta_list, args.xi_list)
    write_rows(args.out, POLY_FIELDS, rows)
    if len(rows) >= 2:
        x = np.array([r["beta"] * math.log(1 / r["xi"]) for r in rows])
        y = np.array([r["degree"] for r in rows], dtype=float)
        r2 = stats.linregress(x, y).rvalue ** 2 if np.ptp(x) > 0 else float("nan")
        print(f"degree vs beta*ln(1/xi): R^2 = {r2:.4f}")
    print("all rows certified" if ok else "certification FAILED")
    return 0 if ok else EXIT_CERTIFY


def _common(p, eps_default=None):
    p.add_argument("--eps", type=float, required=eps_default is None, default=eps_default)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", choices=slv.PRESETS, default="default")
    p.add_argument("--c-T", dest="c_T", type=float, default=64.0)
    p.add_argument("--mode", choices=("exact_exp", "poly"), default="exact_exp")
    p.add_argument("--charge", choices=("amortized", "per-call"), default="amortized")
    p.add_argument("--no-timing", action="store_true", help="write wall_ms = 0 for bit-identical rows")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gibbsgame", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="write a random game file")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--kind", choices=GAME_KINDS, default="sign")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one game and append a run record")
    s.add_argument("--game", required=True)
    s.add_argument("--oracle", choices=ORACLE_KINDS, default="exact")
    _common(s)
    s.add_argument("--delta", type=float, default=None, help="override the oracle accuracy")
    s.add_argument("--phase-log", default=None)
    s.add_argument("--iterate-log", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="query-scaling sweep with a log-log slope fit")
    w.add_argument("--axis", choices=("n", "eps"), required=True)
    w.add_argument("--values", type=float, nargs="+", required=True)
    w.add_argument("--oracle", choices=ORACLE_KINDS, nargs="+", default=["phased-hint"])
    w.add_argument("--trials", type=int, default=1)
    w.add_argument("--n", type=int, default=1024, help="fixed n for an eps sweep")
    w.add_argument("--kind", choices=GAME_KINDS, default="sign")
    _common(w, eps_default=0.25)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("certify-poly", help="certify bounded exp polynomials on a grid")
    c.add_argument("--beta-list", type=float, nargs="+", required=True)
    c.add_argument("--xi-list", type=float, nargs="+", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_certify_poly)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractViolation, HintViolation, EstimationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except ConstructionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFY
