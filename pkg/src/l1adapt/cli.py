"""Batch front end: certification, simulation, the filter-gain sweep that
maps the stability condition, and the adaptation-gain sweep.

Subcommands: certify | simulate | fig2 | sweep-gamma.  All outputs are plain
text or CSV; the environment variable L1ADAPT_THREADS caps the worker pool
used by the sweep commands.

Exit codes: 0 success, 1 failed certificate or bound check, 2 malformed
scenario, 3 diverged simulation.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bounds, controller, l1norm, lti, scenario, sim

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_SCHEMA = 2
EXIT_DIVERGED = 3


def _thread_count():
    value = os.environ.get("L1ADAPT_THREADS", "")
    if value.strip():
        return max(1, int(value))
    return os.cpu_count() or 1


def _certificate(sc, rel_tol=l1norm.DEFAULT_REL_TOL):
    const_theta = sc.constant_theta
    return bounds.compute_performance_bounds(
        sc.cfg, sc.plant.c,
        c_o_zeros=sc.c_o_zeros,
        n_points=sc.omega_grid_points,
        conservative_lambda=sc.conservative_lambda,
        rel_tol=rel_tol,
        constant_theta=const_theta,
        true_omega=sc.plant.true_omega if const_theta is not None else None)


def cmd_certify(args):
    sc = scenario.load(args.scenario)
    cert = _certificate(sc)
    print(cert.report())
    return EXIT_OK if cert.passed else EXIT_FAIL


def _check(label, measured, limit, out):
    ok = measured <= limit
    out.append(f"{label}: measured {measured:.6g} <= bound {limit:.6g} "
               f"{'PASS' if ok else 'FAIL'}")
    return ok


def cmd_simulate(args):
    sc = scenario.load(args.scenario)
    cert = None
    if not args.unsafe:
        cert = _certificate(sc)
        if not cert.passed:
            print(cert.report())
            print("certificate failed; rerun with --unsafe to simulate anyway")
            return EXIT_FAIL
    try:
        trace, metrics = sim.run_scenario(
            sc.plant, sc.cfg, sc.r, sc.settings,
            with_reference=args.with_reference,
            initial_estimates=sc.initial_estimates)
    except sim.Diverged as exc:
        print(f"diverged: {exc}")
        return EXIT_DIVERGED
    except sim.EstimateOutOfBounds as exc:
        print(f"aborted: {exc}")
        return EXIT_DIVERGED
    if args.out:
        sim.write_trace_csv(trace, args.out)
    lines = [f"sup_xtilde: {metrics.sup_xtilde:.6g}",
             f"terminal_xtilde: {metrics.terminal_xtilde:.6g}"]
    if args.with_reference:
        lines.append(f"sup_e: {metrics.sup_e:.6g}")
        lines.append(f"sup_u_err: {metrics.sup_u_err:.6g}")
    ok = True
    if cert is None:
        lines.append("bound checks: N/A (no certificate)")
    else:
        ok &= _check("prediction_error_bound", metrics.sup_xtilde,
                     cert.xtilde_bound, lines)
        if args.with_reference:
            ok &= _check("state_error_bound", metrics.sup_e, cert.gamma1,
                         lines)
            ok &= _check("control_error_bound", metrics.sup_u_err,
                         cert.gamma2, lines)
            if cert.gamma3 is not None:
                ok &= _check("state_error_bound_const",
                             metrics.sup_e, cert.gamma3, lines)
                ok &= _check("control_error_bound_const",
                             metrics.sup_u_err, cert.gamma4, lines)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def _parse_range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be lo:hi:steps, got {text!r}")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1 or hi < lo:
        raise ValueError(f"bad range {text!r}")
    return np.linspace(lo, hi, steps)


def cmd_fig2(args):
    sc = scenario.load(args.scenario)
    wks = _parse_range(args.wk_range)
    L = bounds.compute_L(sc.sets)
    H = bounds._H_system(sc.plant.A_m, sc.plant.b)

    def point(wk):
        if L == 0.0:
            return 0.0
        C = lti.feedback(lti.scale(sc.cfg.D, wk))
        if not lti.is_hurwitz(C.A):
            raise bounds.UnstableC(f"loop unstable at omega*k = {wk:g}")
        G = lti.series(lti.one_minus(C), H)
        return l1norm.l1_gain(G).value * L

    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        values = list(pool.map(point, wks))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("wk,l1_gain_times_L\n")
            for wk, v in zip(wks, values):
                fh.write(f"{float(wk)!r},{float(v)!r}\n")
    crossing = next((wk for wk, v in zip(wks, values) if v < 1.0), None)
    if crossing is None:
        print("no grid point satisfies the stability condition")
    else:
        print(f"smallest omega*k with condition satisfied: {crossing:g}")
    return EXIT_OK


def cmd_sweep_gamma(args):
    sc = scenario.load(args.scenario)
    gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
    if not gammas:
        raise ValueError("empty gamma list")

    def run_one(gamma_c):
        cfg = controller.ControllerConfig(
            sc.cfg.A_m, sc.cfg.b, sc.plant.c, gamma_c, sc.cfg.k, sc.cfg.D,
            sc.cfg.Q, sc.cfg.sets, sc.cfg.projection_eps)
        dt = min(sc.settings.dt, 0.25 / gamma_c)
        nsteps = int(math.ceil(sc.settings.horizon / dt))
        dt = sc.settings.horizon / nsteps
        stride = max(1, nsteps // 10000)
        settings = sim.SimSettings(dt, sc.settings.horizon, stride)
        const_theta = sc.constant_theta
        cert = bounds.compute_performance_bounds(
            cfg, sc.plant.c, c_o_zeros=sc.c_o_zeros,
            n_points=sc.omega_grid_points,
            conservative_lambda=sc.conservative_lambda,
            constant_theta=const_theta,
            true_omega=sc.plant.true_omega if const_theta is not None
            else None)
        _, metrics = sim.run_scenario(sc.plant, cfg, sc.r, settings,
                                      with_reference=True,
                                      initial_estimates=sc.initial_estimates)
        return metrics, cert

    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        results = list(pool.map(run_one, gammas))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("gamma_c,sup_xtilde,sup_e,sup_u_err,gamma1,gamma2\n")
            for g, (m, cert) in zip(gammas, results):
                fh.write(f"{g!r},{m.sup_xtilde!r},{m.sup_e!r},"
                         f"{m.sup_u_err!r},{cert.gamma1!r},{cert.gamma2!r}\n")
    for g, (m, cert) in zip(gammas, results):
        print(f"gamma_c={g:g}: sup_xtilde={m.sup_xtilde:.6g} "
              f"sup_e={m.sup_e:.6g} sup_u_err={m.sup_u_err:.6g}")
    sup_e = [m.sup_e for m, _ in results]
    monotone = all(b < a for a, b in zip(sup_e, sup_e[1:]))
    print(f"sup_e strictly decreasing: {monotone}")
    return EXIT_OK if monotone else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="l1adapt",
        description="certify and simulate the adaptive-control architecture")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="print the scenario certificate")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="run a scenario and check bounds")
    p.add_argument("scenario")
    p.add_argument("--with-reference", action="store_true",
                   help="co-simulate the closed-loop reference system")
    p.add_argument("--out", help="write the trace as CSV")
    p.add_argument("--unsafe", action="store_true",
                   help="run even when the certificate fails")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fig2", help="stability-condition value vs omega*k")
    p.add_argument("scenario")
    p.add_argument("--wk-range", default="5:100:96",
                   help="grid as lo:hi:steps")
    p.add_argument("--out", help="write the curve as CSV")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("sweep-gamma",
                       help="error norms across adaptation gains")
    p.add_argument("scenario")
    p.add_argument("--gammas", default="1e2,1e3,1e4,1e5",
                   help="comma-separated adaptation gains")
    p.add_argument("--out", help="write the sweep as CSV")
    p.set_defaults(func=cmd_sweep_gamma)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except scenario.ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
