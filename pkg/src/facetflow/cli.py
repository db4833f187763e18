"""Command line front end: ``facetflow {run,compare,verify,sweep}``.

Exit codes: 0 success, 1 a check failed, 2 bad configuration or data,
3 the solver failed.  ``FACETFLOW_LOG`` sets the log level.
"""
from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError, RunConfig, load_config
from .diagnostics import (DiagnosticsReport, apriori_report, interpolant_gap_report, lemma21_suite,
                          weak_residual)
from .elliptic import EllipticOperator, solve_dirichlet
from .fileio import Snapshot, sha256, write_csv, write_manifest, write_snapshot
from .grid import laplacian_interior
from .oracle import newton_step, oracle_case
from .presets import elliptic_mms, make_test_function
from .rho_direct import cross_validate, solve_rho_1d
from .stepper import StepFailure, StepperConfig, ValidationError, psi_box_bounds, run_rothe, solve_step

log = logging.getLogger("facetflow")


def _versions() -> dict:
    import scipy

    out = {"facetflow": __version__, "python": platform.python_version(), "numpy": np.__version__,
           "scipy": scipy.__version__, "backend": kernels.BACKEND}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        out["numba"] = None
    return out


def _manifest(command: str, cfg: RunConfig, seed: int, out: Path, files: list[str], summary: dict) -> None:
    write_manifest(out / "manifest.json", {
        "command": command,
        "config": cfg.echo(),
        "seed": seed,
        "versions": _versions(),
        "summary": summary,
        "files": {f: sha256(out / f) for f in files},
    })


# ---------------------------------------------------------------------------
# run


def cmd_run(cfg: RunConfig, out: Path, seed: int = 0) -> int:
    data = cfg.data()
    out.mkdir(parents=True, exist_ok=True)
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    g = data.grid
    tau = cfg.T / cfg.j
    t0 = time.perf_counter()

    def on_step(st):
        if st.k % cfg.snapshot_stride == 0 or st.k == cfg.j:
            snap = Snapshot(g, tau, st.k, time.perf_counter() - t0, st.residual,
                            st.u.values, st.psi.values, st.rho.values)
            write_snapshot(snapdir / f"snap_{st.k:06d}.fctf", snap)

    traj = run_rothe(data, cfg.T, cfg.j, cfg.stepper, callback=on_step)
    rep = apriori_report(traj)
    write_csv(out / "diagnostics.csv", ("k",) + DiagnosticsReport.COLUMNS,
              ([k] + row for k, row in enumerate(rep.rows())))
    wr_rows = []
    for name in cfg.test_functions:
        w = weak_residual(traj, make_test_function(name, g))
        c = w.components
        wr_rows.append([name, w.mode, w.value, w.tol_slack, w.satisfied, c["dissipation"], c["tau_terms"],
                        c["xi_gap"], c["identity_defect"]])
    write_csv(out / "weak_residuals.csv", ("test_function", "mode", "value", "tol_slack", "satisfied",
                                           "dissipation", "tau_terms", "xi_gap", "identity_defect"), wr_rows)
    summary = {
        "steps": traj.j,
        "tau": tau,
        "max_residual": max(s.residual for s in traj.states[1:]),
        "max_iters": max(s.iters for s in traj.states[1:]),
        "homotopy_steps": sum(s.homotopy for s in traj.states),
        "min_rho": float(rep["min_rho"].min()),
    }
    _manifest("run", cfg, seed, out, ["diagnostics.csv", "weak_residuals.csv"], summary)
    log.info("run finished: %d steps, max residual %.2e", traj.j, summary["max_residual"])
    return 0


# ---------------------------------------------------------------------------
# compare


def cmd_compare(cfg_u: RunConfig, cfg_rho: RunConfig, out: Path, seed: int = 0) -> int:
    out.mkdir(parents=True, exist_ok=True)
    if cfg_u.dim != 1 or cfg_rho.dim != 1:
        raise ConfigError("compare is 1D only")
    if cfg_u.T != cfg_rho.T:
        raise ConfigError(f"time horizons differ: {cfg_u.T} vs {cfg_rho.T}")
    traj = run_rothe(cfg_u.data(), cfg_u.T, cfg_u.j, cfg_u.stepper)
    dr = cfg_rho.data()
    gr = dr.grid
    rho0 = 1.0 / dr.b1
    rho0[gr.interior] = 1.0 / laplacian_interior(dr.u0, gr)
    n_steps = cfg_rho.rho_steps or cfg_rho.j
    rt = solve_rho_1d(rho0, (rho0[0], rho0[-1]), cfg_rho.T, n_steps, gr)
    times = cfg_u.compare_times or tuple(float(t) for t in traj.times)
    rows = cross_validate(traj, rt, times)
    tol = cfg_u.stepper.fp_tol
    table = []
    bad = 0
    for r in rows:
        limit = tol * r.rho_max**2
        bad += r.err_identity > limit
        table.append([r.t, r.err_direct, r.err_identity, limit, r.rho_max])
    write_csv(out / "compare.csv", ("t", "err_direct", "err_identity", "identity_limit", "rho_max"), table)
    summary = {"final_err_direct": rows[-1].err_direct, "identity_violations": int(bad),
               "max_rho_defect": max(rt.defects), "rho_steps": n_steps}
    _manifest("compare", cfg_u, seed, out, ["compare.csv"], summary | {"rho_config": cfg_rho.echo()})
    if bad:
        print(f"error[identity]: 1/Laplace_h u differs from rho beyond fp_tol*rho^2 at {bad} times", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# verify


def _check(name: str, passed: bool, value, limit, **extra) -> dict:
    if isinstance(value, np.generic):
        value = value.item()
    ratio = None
    if isinstance(value, (int, float)) and isinstance(limit, (int, float)) and limit:
        ratio = float(value) / float(limit)
    return {"name": name, "passed": bool(passed), "value": value, "limit": limit, "ratio": ratio} | extra


def verify_checks(cfg: RunConfig, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    checks = []
    fails = lemma21_suite(rng, cfg.verify_samples)
    for case, n in fails.items():
        checks.append(_check(f"lemma21_{case}", n == 0, n, 0, samples=cfg.verify_samples))

    worst = 0.0
    for _ in range(cfg.verify_oracle_draws):
        data, u_prev, tau = oracle_case(rng)
        st = solve_step(u_prev, data, replace(cfg.stepper, tau=tau))
        _, psi_n, _ = newton_step(u_prev, data, tau)
        worst = max(worst, float(np.max(np.abs(st.psi.values - psi_n))))
    checks.append(_check("step_vs_newton", worst <= 1e-8, worst, 1e-8, draws=cfg.verify_oracle_draws))

    data = cfg.data()
    g = data.grid
    traj = run_rothe(data, cfg.T, cfg.j, cfg.stepper)
    box_bad = 0
    min_lap = np.inf
    sub_excess = -np.inf
    ident = 0.0
    ident_ratio = 0.0
    bmax = float(data.b0[g.boundary_mask].max())
    for k in range(1, traj.j + 1):
        s, p = traj.states[k], traj.states[k - 1]
        M, L = psi_box_bounds(data, p.u, s.u, traj.tau)
        box_bad += int(s.psi.values.min() < -M or s.psi.values.max() > L)
        lap = laplacian_interior(s.u.values, g)
        min_lap = min(min_lap, float(lap.min()))
        sub_excess = max(sub_excess, float(s.u.values.max()) - bmax)
        rho = s.rho.values
        e = float(np.max(np.abs(1.0 / lap - rho[g.interior])))
        ident = max(ident, e)
        ident_ratio = max(ident_ratio, e / (cfg.stepper.fp_tol * float(rho.max()) ** 2))
    worst_res = max(s.residual for s in traj.states[1:])
    checks.append(_check("step_residual", worst_res < cfg.stepper.fp_tol, worst_res, cfg.stepper.fp_tol,
                         ratio_to_default=worst_res / StepperConfig().fp_tol))
    checks.append(_check("box_bounds", box_bad == 0, box_bad, 0))
    checks.append(_check("positivity", min_lap > 0, min_lap, 0.0))
    checks.append(_check("subharmonic", sub_excess <= 1e-9 * (1 + abs(bmax)), sub_excess, 1e-9 * (1 + abs(bmax))))
    checks.append(_check("identity_inv_lap_u", ident_ratio <= 1.0, ident, None, ratio_to_contract=ident_ratio,
                         ratio_to_default=ident_ratio * cfg.stepper.fp_tol / StepperConfig().fp_tol))
    gaps = interpolant_gap_report(traj, holder_constant=None if g.dim == 1 else 0.0)
    checks.append(_check("uls", gaps.uls_ok, gaps.uls_excess, 1e-12))
    checks.append(_check("rls", gaps.rls_ok and gaps.rls_identity_error <= 1e-12, gaps.rls_identity_error, 1e-12))
    if g.dim == 1:
        checks.append(_check("cubic_gap", gaps.cubic_ok, gaps.cubic_gap, gaps.cubic_bound))
    for name in cfg.test_functions:
        w = weak_residual(traj, make_test_function(name, g))
        checks.append(_check(f"weak_residual_{name}", w.satisfied, w.value, w.tol_slack))
    return checks


def cmd_verify(cfg: RunConfig, out: Path, seed: int = 0) -> int:
    out.mkdir(parents=True, exist_ok=True)
    checks = verify_checks(cfg, seed)
    ok = all(c["passed"] for c in checks)
    write_csv(out / "verify.csv", ("check", "passed", "value", "limit"),
              ([c["name"], c["passed"], c["value"], c["limit"]] for c in checks))
    write_manifest(out / "verify.json", {"seed": seed, "all_passed": ok, "checks": checks})
    _manifest("verify", cfg, seed, out, ["verify.csv"], {"all_passed": ok})
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} value={c['value']!r} limit={c['limit']!r}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# sweep


def _sweep_point(cfg: RunConfig, axis: str, value: float) -> dict:
    if cfg.sweep_mode == "elliptic_mms":
        if axis != "cells":
            raise ConfigError("elliptic_mms sweeps run over cells")
        g, rhs, exact = elliptic_mms(int(value))
        sol = solve_dirichlet(EllipticOperator(g, reaction=1.0), rhs, np.zeros(g.shape), cfg.stepper.linear)
        return {"value": value, "cells": int(value), "h": g.spacing[0],
                "error": float(np.max(np.abs(sol.values - exact))), "residual": sol.residual}
    if axis == "j":
        c = replace(cfg, j=int(value))
    elif axis == "tau":
        c = replace(cfg, j=int(round(cfg.T / value)))
    else:
        c = replace(cfg, cells=(int(value),) * cfg.dim)
    traj = run_rothe(c.data(), c.T, c.j, c.stepper)
    return {"value": value, "j": c.j, "cells": c.cells[0], "tau": traj.tau,
            "max_residual": max(s.residual for s in traj.states[1:]),
            "max_iters": max(s.iters for s in traj.states[1:]), "u": traj.stack("u")}


def _level_difference(a: dict, b: dict) -> float:
    """Max over shared time levels and nodes of ``|u_a - u_b|``."""
    ua, ub = a["u"], b["u"]
    if ub.shape[0] < ua.shape[0]:
        ua, ub = ub, ua
    ja, jb = ua.shape[0] - 1, ub.shape[0] - 1
    if jb % ja:
        return float("nan")
    ub = ub[:: jb // ja]
    sa, sb = ua.shape[1:], ub.shape[1:]
    if sb[0] < sa[0]:
        ua, ub = ub, ua
        sa, sb = sb, sa
    if any((nb - 1) % (na - 1) for na, nb in zip(sa, sb)):
        return float("nan")
    idx = (slice(None),) + tuple(slice(None, None, (nb - 1) // (na - 1)) for na, nb in zip(sa, sb))
    return float(np.max(np.abs(ua - ub[idx])))


def cmd_sweep(cfg: RunConfig, out: Path, seed: int = 0, workers: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    values = sorted(cfg.sweep_values)
    if not values:
        raise ConfigError("sweep.values is empty")
    axis = cfg.sweep_axis
    args = [(cfg, axis, v) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_point, *zip(*args)))
    else:
        results = [_sweep_point(*a) for a in args]
    rows = []
    if cfg.sweep_mode == "elliptic_mms":
        header = ("cells", "h", "error", "ratio", "residual")
        prev = None
        for r in results:
            ratio = prev / r["error"] if prev else float("nan")
            rows.append([r["cells"], r["h"], r["error"], ratio, r["residual"]])
            prev = r["error"]
    else:
        header = ("value", "j", "cells", "tau", "max_residual", "max_iters", "diff_prev", "ratio")
        prev_diff = None
        for i, r in enumerate(results):
            diff = _level_difference(results[i - 1], r) if i else float("nan")
            ratio = prev_diff / diff if (prev_diff is not None and diff > 0) else float("nan")
            rows.append([r["value"], r["j"], r["cells"], r["tau"], r["max_residual"], r["max_iters"], diff, ratio])
            prev_diff = diff if i else None
    write_csv(out / "sweep.csv", header, rows)
    _manifest("sweep", cfg, seed, out, ["sweep.csv"], {"axis": axis, "values": values})
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="facetflow", description="Crystal-surface relaxation solver and verification harness.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "march one configuration and write snapshots and diagnostics"),
                           ("compare", "cross-validate the height march against the direct slope solver"),
                           ("verify", "run the property and certificate suite"),
                           ("sweep", "refinement study over j, cells or tau")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="key = value configuration file")
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
        s.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
        if name == "compare":
            s.add_argument("--rho-config", help="configuration for the slope solver (default: --config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("FACETFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    if args.seed < 0 or args.seed >= 2**64:
        print("error[config]: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            return cmd_run(cfg, out, args.seed)
        if args.command == "compare":
            rcfg = load_config(args.rho_config) if args.rho_config else cfg
            return cmd_compare(cfg, rcfg, out, args.seed)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.seed)
        return cmd_sweep(cfg, out, args.seed, max(1, args.workers))
    except ValidationError as exc:
        print(f"error[{exc.invariant}]: {exc.invariant} {exc.detail}", file=sys.stderr)
        return 2
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2
    except StepFailure as exc:
        print(f"error[step]: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
