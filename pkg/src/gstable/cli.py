"""Batch command line: simulate / estimate / lan-check / density-validate /
tout-check / tv-study."""
from __future__ import annotations

import argparse
import glob
import os
import sys

import numpy as np

from .convolution import Theta
from .experiments import (Scenario, cmd_density_validate, cmd_estimate, cmd_lan_check,
                          cmd_simulate, cmd_tout_check, cmd_tv_study, summarize)
from .simulate import TemperingSpec


def _parse_theta(text: str) -> Theta:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError('theta must be "sigma,delta,alpha"')
    return Theta(*parts)


def _parse_ints(text: str):
    return tuple(int(x) for x in text.split(","))


def _parse_floats(text: str):
    return tuple(float(x) for x in text.split(","))


def _scenario_from_args(args) -> Scenario:
    if args.scenario:
        with open(args.scenario) as fh:
            scn = Scenario.from_text(fh.read())
        # command line overrides
        kwargs = {}
        if args.seed is not None:
            kwargs["seed"] = args.seed
        if args.out is not None:
            kwargs["outputs"] = args.out
        if args.n is not None:
            kwargs["n_list"] = args.n
        if args.reps is not None:
            kwargs["R"] = args.reps
        if args.theta is not None:
            kwargs["theta0"] = args.theta
        if kwargs:
            from dataclasses import replace
            scn = replace(scn, **kwargs)
        return scn
    if args.theta is None or args.n is None or args.reps is None:
        raise SystemExit("need --scenario or all of --theta/--n/--reps")
    tau = None
    if args.model == "sde":
        tau = TemperingSpec(args.tau, eta=args.eta, lam=args.lam)
    return Scenario(model=args.model, theta0=args.theta, n_list=args.n, R=args.reps,
                    seed=args.seed if args.seed is not None else 0, tau=tau,
                    outputs=args.out or "out", m=args.m, init_mode=args.init)


def _add_common(p):
    p.add_argument("--scenario", help="scenario file (key-value text)")
    p.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel replication workers")
    p.add_argument("--n", type=_parse_ints, default=None, help="sample sizes, comma separated")
    p.add_argument("--reps", type=int, default=None, help="number of replications")
    p.add_argument("--theta", type=_parse_theta, default=None, help='"sigma,delta,alpha"')
    p.add_argument("--model", choices=["levy", "sde"], default="levy")
    p.add_argument("--tau", choices=["truncation", "exponential"], default="truncation")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--m", type=int, default=32, help="Euler refinement (sde)")
    p.add_argument("--init", choices=["perturb", "auto"], default="perturb")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="gstable",
                                 description="Monte Carlo experiments for joint "
                                             "diffusion/jump parameter estimation")
    sub = ap.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write increment files per replication")
    _add_common(p_sim)

    p_est = sub.add_parser("estimate", help="run the estimator over replications or files")
    _add_common(p_est)
    p_est.add_argument("--data", default=None,
                       help="glob of increment files (skips simulation)")

    p_lan = sub.add_parser("lan-check", help="quadratic expansion remainder study")
    _add_common(p_lan)
    p_lan.add_argument("--h", action="append", type=_parse_floats, default=None,
                       help='local parameter vector "h1,h2,h3" (repeatable)')

    p_dv = sub.add_parser("density-validate", help="density invariant suite")
    _add_common(p_dv)
    p_dv.add_argument("--alpha", type=_parse_floats, default=(0.5, 1.0, 1.5))
    p_dv.add_argument("--w", type=_parse_floats, default=(0.01, 0.1, 0.3))

    p_tc = sub.add_parser("tout-check", help="score-moment integral ratios vs limits")
    _add_common(p_tc)

    p_tv = sub.add_parser("tv-study", help="total variation rate study")
    _add_common(p_tv)
    p_tv.add_argument("--alpha-value", type=float, default=0.5)
    p_tv.add_argument("--count", type=int, default=100_000)

    args = ap.parse_args(argv)

    if args.command == "simulate":
        scn = _scenario_from_args(args)
        files = cmd_simulate(scn, args.out)
        print(f"wrote {len(files)} increment files + manifest to {args.out or scn.outputs}")
        return 0

    if args.command == "estimate":
        scn = _scenario_from_args(args)
        data_files = sorted(glob.glob(args.data)) if args.data else None
        rec = cmd_estimate(scn, data_files=data_files, workers=args.workers,
                           out_dir=args.out)
        print(summarize(rec, scn))
        return 0

    if args.command == "lan-check":
        scn = _scenario_from_args(args)
        h_list = args.h or [(1.0, 1.0, 1.0), (1.0, 0.0, -1.0), (0.0, 1.0, 1.0)]
        res = cmd_lan_check(scn.theta0, scn.n_list, h_list, scn.R, seed=scn.seed,
                            workers=args.workers)
        for n, r in res.items():
            print(f"n={n}: remainder mean={np.array2string(r['mean'], precision=5)} "
                  f"sd={np.array2string(r['sd'], precision=5)}")
        return 0

    if args.command == "density-validate":
        rep = cmd_density_validate(args.alpha, args.w)
        bad = 0
        for (a, w), entry in rep.items():
            ok = abs(entry["normalization"] - 1.0) < 1e-6 and entry["envelope_C"] < 10.0
            bad += not ok
            print(f"alpha={a} w={w}: norm={entry['normalization']!r} "
                  f"envelope_C={entry['envelope_C']:.3f} {'PASS' if ok else 'FAIL'}")
        return 1 if bad else 0

    if args.command == "tout-check":
        scn = _scenario_from_args(args)
        res = cmd_tout_check(scn.theta0, scn.n_list)
        for n, ratios in res.items():
            print(f"n={n}: ratios hh={ratios[0]:.4f} hl={ratios[1]:.4f} ll={ratios[2]:.4f}")
        return 0

    if args.command == "tv-study":
        tau = TemperingSpec(args.tau, eta=args.eta, lam=args.lam)
        n_list = args.n or tuple(2 ** k for k in range(6, 15))
        res = cmd_tv_study(args.alpha_value, tau, n_list,
                           R=args.reps or 4, count=args.count,
                           seed=args.seed if args.seed is not None else 0)
        for n, d in zip(res["n_list"], res["distances"]):
            print(f"n={n}: L1={d!r}")
        print(f"slope={res['slope']!r}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
