"""Binding end-to-end acceptance checks, one printed pass/fail line each.

Covers model equivalence at scale, passivity of the effective surface
admittance, the approximation collapse chain, certified global optimality
of the relaxation pipeline (including sampled lower bounds), full/reduced
program equivalence, the bandwidth-optimality validation, the
mutual-coupling and unilateral-approximation study regimes with their
expected operating numbers, and solver certification quality.

Batches shared between criteria (the 1000-instance equivalence loop, the
200-instance certified-optimality batch, the far-field study grid) are
module-scoped fixtures so each expensive sweep runs once.
"""

import time

import numpy as np
import pytest

from bdris import harness, optim, sdpsolver
from bdris.channels import (channel_app1, channel_app2, channel_app3,
                            channel_compact, channel_exact, channel_explicit,
                            compact_decompose, decompose, make_ris_state)
from bdris.netparams import NetworkParameters, PortLayout, Terminations
from bdris.topology import make_mask

from conftest import (make_scenario, random_masked_b, random_passive_network,
                      random_terminations)
from oracles import phase_grid_best_gain

_TINY = 1e-300


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), _TINY))


def _verdict(num, ok, detail):
    print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


# ---------------------------------------------------------------------------
# shared batches
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def equivalence_batch():
    """1000 random valid instances: pairwise model errors plus the minimum
    eigenvalue of the real part of the effective surface admittance."""
    rng = np.random.default_rng(20260815)
    t0 = time.perf_counter()
    worst = 0.0
    min_eigs = np.empty(1000)
    accepted = 0
    attempts = 0
    while accepted < 1000:
        attempts += 1
        if attempts > 1500:
            raise RuntimeError("too many rejected instance draws")
        n_t = int(rng.integers(1, 5))
        n_r = int(rng.integers(1, 5))
        n_i = int(rng.integers(1, 17))
        lay = PortLayout(n_t, n_i, n_r)
        params = NetworkParameters(lay, random_passive_network(lay, rng))
        term = random_terminations(lay, rng)
        b = random_masked_b(make_mask("fully", n_i), rng)
        try:
            h_exact = channel_exact(params, term, b)
            h_explicit = channel_explicit(params, term, b)
            dec = compact_decompose(params, term)
        except np.linalg.LinAlgError:
            continue
        h_compact = channel_compact(dec, make_ris_state(dec, b))
        worst = max(worst, _rel(h_exact, h_explicit),
                    _rel(h_exact, h_compact), _rel(h_explicit, h_compact))
        min_eigs[accepted] = np.linalg.eigvalsh(dec.re_ybar_ii)[0]
        accepted += 1
    return {"worst": worst, "min_eigs": min_eigs,
            "rejected": attempts - accepted,
            "elapsed": time.perf_counter() - t0}


def _masked_sample_best(dec, mask, n_samples, rng, chunk=25_000):
    """Best receive-power gain over random topology-feasible surfaces.

    Batched independent route: symmetric masked susceptances pushed through
    the lossless response directly (solve against the narrow incident block
    only), maximum squared spectral norm of the resulting channels.
    """
    n = dec.n_i
    y0 = dec.y0
    eye = np.eye(n)
    a = dec.hbar_it
    best = 0.0
    remaining = n_samples
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        b = rng.standard_normal((m, n, n)) * y0
        b = (b + np.transpose(b, (0, 2, 1))) / 2.0 * mask
        bbar = dec.l_factor @ (b + dec.im_ybar_ii) @ dec.l_factor
        rhs = (y0 * a)[None] - 1j * (bbar @ a)
        ta = np.linalg.solve(y0 * eye[None] + 1j * bbar, rhs)
        h = dec.hbar_rt + dec.hbar_ri @ ta
        sv = np.linalg.svd(h, compute_uv=False)
        best = max(best, float(np.max(sv[:, 0]) ** 2))
    return best


@pytest.fixture(scope="module")
def sdr_batch():
    """200 certified solves at (n_t, n_r, n_i) = (2, 2, 8) on a band:3
    surface, each checked against 1e5 random feasible samples."""
    topo = make_mask("band:3", 8)
    t0 = time.perf_counter()
    stats = {"cert_err": [], "residual": [], "dominates": [],
             "gap": [], "lam_ratio": []}
    for seed in range(200):
        params, term = make_scenario(2, 8, 2, 41_000 + seed)
        dec = decompose(params, term, "exact")
        sdp, lift = sdpsolver.build_sdp_reduced(dec)
        sol = sdpsolver.solve(sdp, tol=1e-10)
        x1 = sdpsolver.rank_one_extract(sol.x, sdp)
        w, u = lift.split(x1)
        scale = np.linalg.norm(w)
        w = w / scale
        u = u / scale
        a = dec.hbar_it @ w
        target = np.linalg.norm(a)
        if np.linalg.norm(u) > 0:
            u = u * (target / np.linalg.norm(u))
        state = optim.recover_ris_state(u, w, dec, topo)
        a_cols = a[:, None]
        u_cols = u[:, None]
        residual = (np.linalg.norm(state.theta_bar @ a_cols - u_cols)
                    / max(np.linalg.norm(u_cols), _TINY))
        h = channel_compact(dec, state)
        power = float(np.linalg.norm(h @ w) ** 2)
        best = _masked_sample_best(dec, topo.mask, 100_000,
                                   np.random.default_rng(91_000 + seed))
        lam = np.linalg.eigvalsh(sol.x)
        stats["cert_err"].append(abs(power - sol.certificate) / sol.certificate)
        stats["residual"].append(residual)
        stats["dominates"].append(power >= best * (1.0 - 1e-9))
        stats["gap"].append(sol.gap)
        stats["lam_ratio"].append(float(lam[-2] / lam[-1]))
    stats = {k: np.asarray(v) for k, v in stats.items()}
    stats["elapsed"] = time.perf_counter() - t0
    return stats


@pytest.fixture(scope="module")
def reduction_batch():
    """Full and reduced program values on 100 instances, with solver
    certification stats collected along the way."""
    rel_diff = np.empty(100)
    gaps = []
    ratios = []
    for seed in range(100):
        params, term = make_scenario(2, 8, 2, 52_000 + seed)
        dec = decompose(params, term, "exact")
        vals = {}
        for name, build in (("full", sdpsolver.build_sdp_full),
                            ("reduced", sdpsolver.build_sdp_reduced)):
            sdp, _ = build(dec)
            sol = sdpsolver.solve(sdp, tol=1e-10)
            vals[name] = sol.value
            gaps.append(sol.gap)
            lam = np.linalg.eigvalsh(sol.x)
            ratios.append(float(lam[-2] / lam[-1]))
        rel_diff[seed] = abs(vals["full"] - vals["reduced"]) / abs(vals["reduced"])
    return {"rel_diff": rel_diff, "gap": np.asarray(gaps),
            "lam_ratio": np.asarray(ratios)}


@pytest.fixture(scope="module")
def farfield_grid():
    """Receive-power study over spacing {quarter, half wavelength} and
    surface sizes {16, 36, 64}, 100 trials each, designs scored on the
    exact model.  Mean rows keyed by (spacing, n_i, model)."""
    t0 = time.perf_counter()
    means = {}
    failures = 0
    for spacing in (0.25, 0.5):
        cfg = harness.ExperimentConfig(
            experiment="farfield", objective="power", trials=100,
            n_i_list=(16, 36, 64), spacing_wl=spacing,
            models=("exact", "app3"), seed=61, threads=2)
        for row in harness.run(cfg):
            failures += row["failures"] if row["trial"] != "mean" else 0
            if row["trial"] == "mean":
                means[(spacing, row["sweep_value"], row["model"])] = (
                    row["metric_value"], row["relative_pct"])
    return {"means": means, "failures": failures,
            "elapsed": time.perf_counter() - t0}


# A noise floor above the power-study default keeps the sum-rate comparison
# noise-limited at desk-scale surface sizes, where stronger inter-element
# coupling translates into rate instead of being traded away against
# inter-user interference shaping.
SUMRATE_SIGMA2 = 3e-10
SUMRATE_USERS = 2


@pytest.fixture(scope="module")
def sumrate_grid():
    """Sum-rate counterpart of the study grid at one surface size."""
    t0 = time.perf_counter()
    means = {}
    for spacing in (0.25, 0.5):
        cfg = harness.ExperimentConfig(
            experiment="farfield", objective="sumrate", trials=16,
            n_t=4, n_r=SUMRATE_USERS, n_i_list=(16,), spacing_wl=spacing,
            sigma2=SUMRATE_SIGMA2, models=("exact", "app3"), seed=67,
            admm_iters=300, threads=2)
        for row in harness.run(cfg):
            if row["trial"] == "mean":
                means[(spacing, row["model"])] = row["metric_value"]
    return {"means": means, "elapsed": time.perf_counter() - t0}


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_criterion_01_model_equivalence(equivalence_batch):
    worst = equivalence_batch["worst"]
    elapsed = equivalence_batch["elapsed"]
    ok = worst < 1e-10 and elapsed < 60.0
    assert _verdict(1, ok, "exact/explicit/compact pairwise rel err "
                    f"{worst:.2e} (tol 1e-10) on 1000 instances, "
                    f"{elapsed:.1f}s (cap 60s)")


def test_criterion_02_effective_admittance_passivity(equivalence_batch):
    eigs = equivalence_batch["min_eigs"]
    frac = float(np.mean(eigs > 0.0))
    ok = frac == 1.0
    assert _verdict(2, ok, "min eigenvalue of Re(effective surface "
                    f"admittance) > 0 on {100 * frac:.1f}% of instances "
                    f"(smallest {eigs.min():.3e} S)")


def test_criterion_03_model_collapse_chain():
    rng = np.random.default_rng(33_000)
    z0 = 50.0
    worst = {"app1": 0.0, "app2": 0.0, "app3": 0.0}
    for _ in range(334):
        n_t = int(rng.integers(1, 5))
        n_r = int(rng.integers(1, 5))
        n_i = int(rng.integers(2, 17))
        lay = PortLayout(n_t, n_i, n_r)
        sl = {g: lay.group_slice(g) for g in "TIR"}
        z_base = random_passive_network(lay, rng)
        term = random_terminations(lay, rng)
        term_matched = Terminations.matched(lay, z0)
        b = random_masked_b(make_mask("fully", n_i), rng)

        def cut_feedback(z):
            z = z.copy()
            z[sl["T"], sl["I"]] = 0.0
            z[sl["T"], sl["R"]] = 0.0
            z[sl["I"], sl["R"]] = 0.0
            return NetworkParameters(lay, z)

        # unilateral premise alone: no feedback into transmitter or surface
        p1 = cut_feedback(z_base)
        worst["app1"] = max(worst["app1"], _rel(
            channel_app1(p1, term, b), channel_exact(p1, term, b)))

        # plus matched, uncoupled transmit/receive arrays and terminations
        z2 = z_base.copy()
        z2[sl["T"], sl["T"]] = z0 * np.eye(n_t)
        z2[sl["R"], sl["R"]] = z0 * np.eye(n_r)
        p2 = cut_feedback(z2)
        worst["app2"] = max(worst["app2"], _rel(
            channel_app2(p2, term_matched, b),
            channel_exact(p2, term_matched, b)))

        # plus an uncoupled, matched surface
        z3 = z2.copy()
        z3[sl["I"], sl["I"]] = z0 * np.eye(n_i)
        p3 = cut_feedback(z3)
        worst["app3"] = max(worst["app3"], _rel(
            channel_app3(p3, term_matched, b),
            channel_exact(p3, term_matched, b)))
    ok = max(worst.values()) < 1e-10
    assert _verdict(3, ok, "collapse onto each approximation under its own "
                    "premises, worst rel err app1/app2/app3 = "
                    f"{worst['app1']:.2e}/{worst['app2']:.2e}/"
                    f"{worst['app3']:.2e} (tol 1e-10, 334 instances each)")


def test_criterion_04_certified_global_optimality(sdr_batch):
    cert = float(sdr_batch["cert_err"].max())
    resid = float(sdr_batch["residual"].max())
    dom = float(np.mean(sdr_batch["dominates"]))
    elapsed = sdr_batch["elapsed"]
    ok = cert < 1e-6 and resid < 1e-7 and dom == 1.0 and elapsed < 300.0
    assert _verdict(4, ok, "achieved power vs certificate rel err "
                    f"{cert:.2e} (tol 1e-6), recovery residual {resid:.2e} "
                    f"(tol 1e-7), dominates 1e5 samples on {100 * dom:.1f}% "
                    f"of 200 instances, {elapsed:.0f}s (cap 300s)")


def test_criterion_05_reduced_program_equivalence(reduction_batch):
    worst = float(reduction_batch["rel_diff"].max())
    ok = worst < 1e-8
    assert _verdict(5, ok, "full vs reduced program values agree to "
                    f"{worst:.2e} rel (tol 1e-8) on 100 instances")


def test_criterion_06_bandwidth_validation():
    res = harness.validate_prop2(2, 2, 8, trials=500, seed=6)
    q_opt = res["q_opt"]
    frac = res["summary"][q_opt]["frac_below_1e-7"]
    med1 = res["summary"][1]["median"]
    ok = q_opt == 3 and frac >= 0.99 and med1 > 1e-3
    assert _verdict(6, ok, f"band q={q_opt} mismatch < 1e-7 on "
                    f"{100 * frac:.1f}% of 500 trials (need >= 99%), "
                    f"q=1 median {med1:.2e} (need > 1e-3)")


def test_criterion_07_dense_spacing_unaware_performance(farfield_grid):
    _, pct = farfield_grid["means"][(0.25, 64, "app3")]
    elapsed = farfield_grid["elapsed"]
    ok = 55.0 <= pct <= 75.0 and elapsed < 600.0
    assert _verdict(7, ok, "coupling-unaware design at quarter-wavelength "
                    f"spacing, 64 elements: mean relative performance "
                    f"{pct:.1f}% (band 65 +/- 10), grid took {elapsed:.0f}s "
                    "(cap 600s)")


def test_criterion_08_nearfield_unilateral_performance():
    cfg = harness.ExperimentConfig(
        experiment="nearfield", trials=60, n_i=64, r_list_wl=(0.1,),
        models=("exact", "app2"), seed=71, threads=2)
    rows = harness.run(cfg)
    pct = next(r["relative_pct"] for r in rows
               if r["trial"] == "mean" and r["model"] == "app2")
    ok = pct > 95.0
    assert _verdict(8, ok, "unilateral design at 0.1 wavelengths off the "
                    f"surface, 64 elements: mean relative performance "
                    f"{pct:.2f}% (need > 95%)")


def test_criterion_09_coupling_benefit_ordering(farfield_grid, sumrate_grid):
    chain_ok = True
    details = []
    for n_i in (16, 36, 64):
        aware_q = farfield_grid["means"][(0.25, n_i, "exact")][0]
        aware_h = farfield_grid["means"][(0.5, n_i, "exact")][0]
        unaware = max(farfield_grid["means"][(0.25, n_i, "app3")][0],
                      farfield_grid["means"][(0.5, n_i, "app3")][0])
        link = aware_q > aware_h > unaware
        chain_ok = chain_ok and link
        details.append(f"n={n_i}: {aware_q:.2e} > {aware_h:.2e} > "
                       f"{unaware:.2e} {'ok' if link else 'VIOLATED'}")
    sr = sumrate_grid["means"]
    sr_unaware = max(sr[(0.25, "app3")], sr[(0.5, "app3")])
    sr_ok = sr[(0.25, "exact")] > sr[(0.5, "exact")] > sr_unaware
    ok = chain_ok and sr_ok and farfield_grid["failures"] == 0
    assert _verdict(9, ok, "mean receive power aware(quarter) > aware(half) "
                    "> unaware-on-exact at every size [" + "; ".join(details)
                    + f"]; sum-rate ordering {sr[(0.25, 'exact')]:.3f} > "
                    f"{sr[(0.5, 'exact')]:.3f} > {sr_unaware:.3f} "
                    f"{'ok' if sr_ok else 'VIOLATED'}")


def test_criterion_10_solver_certification(sdr_batch, reduction_batch):
    gaps = np.concatenate([sdr_batch["gap"], reduction_batch["gap"]])
    ratios = np.concatenate([sdr_batch["lam_ratio"],
                             reduction_batch["lam_ratio"]])
    params, term = make_scenario(1, 1, 1, 10_077)
    dec = decompose(params, term, "exact")
    sol = optim.optimize_mimo_single_stream(dec, make_mask("fully", 1),
                                            p_t=1.0, sdp_tol=1e-10)
    grid = phase_grid_best_gain(dec.hbar_rt, dec.hbar_ri, dec.hbar_it,
                                n_grid=1_000_000)
    scalar_err = abs(sol.receive_power - grid) / grid
    ok = (float(gaps.max()) < 1e-9 and float(ratios.max()) < 1e-6
          and scalar_err < 1e-6)
    assert _verdict(10, ok, f"duality gap <= {gaps.max():.2e} (tol 1e-9) and "
                    f"second-eigenvalue ratio <= {ratios.max():.2e} "
                    f"(tol 1e-6) over {gaps.size} programs; scalar instance "
                    f"vs 1e6-point phase grid rel err {scalar_err:.2e} "
                    "(tol 1e-6)")
