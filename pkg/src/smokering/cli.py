"""Command-line entry point ``smokering``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 property violation found by ``--self-check``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import ConfigurationError, FitError, NumericalError, SmokeringError
from .kernel import special_table

log = logging.getLogger("smokering")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELF_CHECK = 0, 2, 3, 4


def _simulate(args) -> int:
    cfg = harness.load_config(args.config)
    eps = min(cfg.eps_list, key=lambda e: abs(e - args.eps))
    if not math.isclose(eps, args.eps, rel_tol=1e-12):
        raise ConfigurationError(f"--eps {args.eps} is not in eps_list {list(cfg.eps_list)}")
    res = harness.run_case(cfg, eps)
    log.info("wrote %s and %s", res.diag_path, res.checkpoint_path)
    print(f"eps={eps:g} steps={res.n_steps} delta(T)={res.final_delta:.6e} "
          f"max Rt={res.max_support:.6e} contained={res.containment}")
    if args.self_check:
        problems = []
        if res.sandwich_violations:
            problems.append(f"{res.sandwich_violations} mollifier sandwich violations")
        if not res.circulation_exact:
            problems.append("circulation changed")
        d0 = max(r["delta"] for r in res.rows if r["t"] == 0.0)
        if d0 > 1e-12 * max(1.0, max(map(abs, np.ravel(cfg.centers)))):
            problems.append(f"initial centre deviation {d0:.3e}")
        return _report(problems)
    return EXIT_OK


def _sweep(args) -> int:
    cfg = harness.load_config(args.config)
    rep = harness.sweep_and_fit(cfg)
    print(f"delta slope {rep.delta_slope:.4f} (predicted {rep.delta_slope_predicted:.4f}), "
          f"support slope {rep.support_slope:.4f} (predicted {rep.support_slope_predicted:.4f})"
          + ("  [pre-asymptotic]" if rep.pre_asymptotic else ""))
    if args.self_check:
        problems = []
        if not rep.delta_monotone:
            problems.append("delta(T) is not strictly decreasing")
        if not rep.support_monotone:
            problems.append("max support radius is not strictly decreasing")
        if not all(rep.containment):
            problems.append("containment failed for some eps")
        return _report(problems)
    return EXIT_OK


def _pv_run(args) -> int:
    cfg = harness.load_config(args.config)
    traj = harness.pv_run(cfg)
    print(f"{len(traj) - 1} steps to t={traj[-1].time:g}; wrote {cfg.out_dir()}")
    if args.self_check:
        from .point_vortex import pv_invariants
        i0, i1 = pv_invariants(traj[0]), pv_invariants(traj[-1])
        problems = []
        for name, a, b in (("H", i0.hamiltonian, i1.hamiltonian),
                           ("A", i0.angular_impulse, i1.angular_impulse),
                           ("P1", i0.linear_impulse[0], i1.linear_impulse[0]),
                           ("P2", i0.linear_impulse[1], i1.linear_impulse[1])):
            if abs(b - a) > 1e-8 * max(abs(a), 1.0):
                problems.append(f"{name} drifted by {abs(b - a):.3e}")
        if cfg.drift:
            problems = [p for p in problems if not p.startswith("P1")]
        return _report(problems)
    return EXIT_OK


def _kernel_test(args) -> int:
    if not 0.0 < args.a_min <= args.a_max or args.points < 1:
        raise ConfigurationError("need 0 < a-min <= a-max and points >= 1")
    a = np.geomspace(args.a_min, args.a_max, args.points)
    rows = special_table(a, tol=args.tol)
    out = Path(args.output) if args.output else None
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        wr = csv.writer(fh)
        wr.writerow(("a", "i1", "i2", "r1", "r2", "err_est"))
        for r in rows:
            wr.writerow([repr(float(v)) for v in r])
    finally:
        if out:
            fh.close()
    return EXIT_OK


def _report(problems) -> int:
    for p in problems:
        print(f"self-check: {p}", file=sys.stderr)
    return EXIT_SELF_CHECK if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smokering",
                                 description="Concentrated vortex ring experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one ring simulation at a single eps")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--self-check", action="store_true")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("sweep", help="all eps in the config, plus rate fits")
    p.add_argument("--config", required=True)
    p.add_argument("--self-check", action="store_true")
    p.set_defaults(func=_sweep)

    p = sub.add_parser("pv-run", help="point-vortex trajectory and invariants")
    p.add_argument("--config", required=True)
    p.add_argument("--self-check", action="store_true")
    p.set_defaults(func=_pv_run)

    p = sub.add_parser("kernel-test", help="table of I1, I2 and their remainders")
    p.add_argument("--a-min", type=float, required=True)
    p.add_argument("--a-max", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.set_defaults(func=_kernel_test)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FitError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SmokeringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
