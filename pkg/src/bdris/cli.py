"""Command-line front end: experiment runs, the bandwidth check, a selftest.

Kept deliberately thin — everything here is a wrapper over
:mod:`bdris.harness` so scripted use and library use stay identical.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness


def _overrides_from_extra(extra: list) -> dict:
    """Interpret trailing ``--key value`` pairs as config overrides."""
    if len(extra) % 2 != 0:
        raise SystemExit(f"dangling override (expected --key value pairs): {extra}")
    overrides = {}
    for flag, value in zip(extra[::2], extra[1::2]):
        if not flag.startswith("--"):
            raise SystemExit(f"override keys must start with '--': {flag!r}")
        overrides[flag[2:].replace("-", "_")] = value
    return overrides


def _cmd_run(args, extra: list) -> int:
    overrides = _overrides_from_extra(extra)
    if args.out is not None:
        overrides["out"] = args.out
    if args.threads is not None:
        overrides["threads"] = str(args.threads)
    config = harness.parse_config(args.config, overrides)
    rows = harness.run(config)
    means = [r for r in rows if r["trial"] == "mean"]
    print(f"{config.experiment}: {len(rows) - len(means)} trial rows, "
          f"{len(means)} mean rows" + (f" -> {config.out}" if config.out else ""))
    for r in means:
        rel = "" if np.isnan(r["relative_pct"]) else f"  rel {r['relative_pct']:7.2f}%"
        print(f"  {r['sweep_var']}={r['sweep_value']:>6} {r['model']:6s} "
              f"{r['metric_name']} {r['metric_value']:.6e}{rel}  "
              f"failures {r['failures']}")
    return 0


def _cmd_validate_prop2(args, extra: list) -> int:
    if extra:
        raise SystemExit(f"unexpected arguments: {extra}")
    res = harness.validate_prop2(n_t=args.n_t, n_r=args.n_r, n_i=args.n_i,
                                 trials=args.trials, seed=args.seed)
    q_opt = res["q_opt"]
    print(f"optimal bandwidth for (n_t={args.n_t}, n_r={args.n_r}, "
          f"n_i={args.n_i}): q = {q_opt}")
    ok = True
    for q in res["bandwidths"]:
        s = res["summary"][q]
        print(f"  band q={q}: median mismatch {s['median']:.3e}, "
              f"fraction below 1e-7: {s['frac_below_1e-7']:.3f}")
        if q >= q_opt:
            ok &= s["frac_below_1e-7"] >= 0.99
        else:
            ok &= s["median"] > 1e-3
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _selftest_checks():
    """Yield (name, bool) pairs covering each layer end to end."""
    from .channels import (channel_compact, channel_exact, channel_explicit,
                           decompose, make_ris_state)
    from .coupling import DipoleGeometry, build_ris_impedance
    from .netparams import PortLayout, Terminations, generate_rayleigh_scenario
    from .topology import make_mask
    from . import optim, sdpsolver

    lay = PortLayout(2, 8, 2)
    term = Terminations.matched(lay)
    params = generate_rayleigh_scenario(lay, 1e-4, 1e-2, 50 * np.eye(8), seed=0)
    dec = decompose(params, term, "exact")
    rng = np.random.default_rng(1)
    b = rng.standard_normal((8, 8))
    b = term.y0 * (b + b.T) / 2
    state = make_ris_state(dec, b)
    h1 = channel_exact(params, term, b)
    h2 = channel_explicit(params, term, b)
    h3 = channel_compact(dec, state)
    scale = np.linalg.norm(h1)
    yield "channel routes agree", (np.linalg.norm(h1 - h2) < 1e-10 * scale
                                   and np.linalg.norm(h1 - h3) < 1e-10 * scale)
    th = state.theta_bar
    yield "surface response unitary", np.linalg.norm(th.conj().T @ th - np.eye(8)) < 1e-10
    yield "surface response symmetric", np.linalg.norm(th - th.T) < 1e-10

    geom = DipoleGeometry.upa(16, 0.25, 0.0107)
    z_ii = build_ris_impedance(geom, 50.0)
    yield "coupling matrix reciprocal", np.linalg.norm(z_ii - z_ii.T) == 0.0
    yield "coupling diagonal pinned", np.allclose(np.diag(z_ii), 50.0)

    lay1 = PortLayout(1, 8, 1)
    term1 = Terminations.matched(lay1)
    params1 = generate_rayleigh_scenario(lay1, 1e-4, 1e-2, 50 * np.eye(8), seed=3)
    dec1 = decompose(params1, term1, "exact")
    st, gain = optim.optimize_siso(dec1)
    realized = abs(channel_compact(dec1, st)[0, 0]) ** 2
    yield "closed-form optimum realized", abs(realized - gain) < 1e-8 * gain
    best = 0.0
    for _ in range(500):
        bb = rng.standard_normal((8, 8)) * 100
        stx = make_ris_state(dec1, term1.y0 * (bb + bb.T) / 2)
        best = max(best, abs(channel_compact(dec1, stx)[0, 0]) ** 2)
    yield "sampled surfaces dominated", best <= gain * (1 + 1e-9)

    sdp, lift = sdpsolver.build_sdp_reduced(dec)
    sol = sdpsolver.solve(sdp)
    yield "relaxation gap closed", sol.gap < 1e-8
    x = sdpsolver.rank_one_extract(sol.x, sdp)
    yield "extraction feasible", abs(np.real(x.conj() @ (sdp.q2 @ x)) - 1.0) < 1e-6

    res = harness.validate_prop2(2, 2, 6, trials=25, seed=5)
    s_opt = res["summary"][res["q_opt"]]
    s_1 = res["summary"][1]
    yield "optimal band exact", s_opt["frac_below_1e-7"] == 1.0
    yield "narrow band lossy", s_1["median"] > 1e-3


def _cmd_selftest(args, extra: list) -> int:
    if extra:
        raise SystemExit(f"unexpected arguments: {extra}")
    failures = 0
    for name, ok in _selftest_checks():
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}")
        failures += 0 if ok else 1
    print("selftest:", "all good" if failures == 0 else f"{failures} failure(s)")
    return 0 if failures == 0 else 1


def main(argv: list | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bdris",
        description="physics-consistent reconfigurable-surface channel models "
                    "and optimizers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured Monte-Carlo study")
    p_run.add_argument("--config", default=None, help="key = value file")
    p_run.add_argument("--out", default=None, help="CSV output path")
    p_run.add_argument("--threads", type=int, default=None)

    p_val = sub.add_parser("validate-prop2",
                           help="numerically verify the optimal-bandwidth result")
    p_val.add_argument("--n-t", type=int, default=2)
    p_val.add_argument("--n-r", type=int, default=2)
    p_val.add_argument("--n-i", type=int, default=8)
    p_val.add_argument("--trials", type=int, default=500)
    p_val.add_argument("--seed", type=int, default=0)

    sub.add_parser("selftest", help="quick end-to-end consistency check")

    args, extra = parser.parse_known_args(argv)
    if args.command == "run":
        return _cmd_run(args, extra)
    if args.command == "validate-prop2":
        return _cmd_validate_prop2(args, extra)
    return _cmd_selftest(args, extra)


if __name__ == "__main__":
    sys.exit(main())
