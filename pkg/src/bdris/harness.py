"""Monte-Carlo study drivers: model-mismatch sweeps and the bandwidth check.

Two experiment families are wired up behind a flat config:

* ``farfield`` — Rayleigh links on both sides of a dipole surface whose
  self-coupling comes from the induced-EMF model; designs are computed under
  each channel model and then scored on the exact one, sweeping the surface
  size.  Covers both the receive-power objective and the multiuser sum rate.
* ``nearfield`` — deterministic transmitter-to-surface coupling with the
  transmit dipole hovering a few wavelengths off the array plane, sweeping
  that distance; isolates how far the unilateral approximation can be pushed.

:func:`validate_prop2` is the numeric check that a band-connected surface of
the size-independent optimal bandwidth loses nothing against fully-connected.

Rows come back as plain dicts (one per trial/model plus per-sweep means) and
are optionally written as CSV with a fixed column set, so downstream plotting
does not depend on this package.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import optim
from .channels import (NotPositiveDefiniteError, channel_compact, decompose,
                       make_ris_state)
from .coupling import (DipoleGeometry, QuadratureConvergenceError,
                       QuadratureSpec, build_ris_impedance,
                       near_field_transmitter_link)
from .netparams import (NetworkParameters, PortLayout, ResampleBudgetError,
                        SingularMatrixError, Terminations,
                        generate_rayleigh_scenario)
from .sdpsolver import SdpSolverError
from .topology import make_mask, optimal_bandwidth

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "run",
    "write_csv",
    "validate_prop2",
    "CSV_COLUMNS",
]

SPEED_OF_LIGHT = 299_792_458.0

CSV_COLUMNS = ["experiment", "sweep_var", "sweep_value", "trial", "model",
               "topology", "metric_name", "metric_value", "relative_pct",
               "wall_ms", "failures"]

# anything raised by a single trial that should be counted, not fatal
_TRIAL_ERRORS = (NotPositiveDefiniteError, SingularMatrixError,
                 ResampleBudgetError, QuadratureConvergenceError,
                 SdpSolverError, optim.RecoveryResidualError,
                 optim.AdmmDivergenceError, optim.NormMismatchError,
                 np.linalg.LinAlgError)


@dataclass
class ExperimentConfig:
    experiment: str = "farfield"       # farfield | nearfield
    objective: str = "power"           # power | sumrate (farfield only)
    seed: int = 0
    trials: int = 20
    n_t: int = 1
    n_r: int = 1
    n_i_list: tuple = (16, 36, 64)     # farfield sweep
    n_i: int = 64                      # nearfield surface size
    spacing_wl: float = 0.25           # element pitch in wavelengths
    r_list_wl: tuple = (0.1, 0.3, 1.0, 3.0, 10.0)   # nearfield sweep
    models: tuple = ("exact", "app2", "app3")
    topology: str = "fully"
    p_t: float = 0.1                   # transmit power, watts
    sigma2: float = 1e-11              # noise power, watts
    pathgain_it: float = 1e-4          # Rayleigh variance, transmitter side
    pathgain_ri: float = 1.0           # Rayleigh variance, receiver side
    z0: float = 50.0
    frequency_hz: float = 28e9
    admm_iters: int = 300
    threads: int = 0                   # 0 -> BDRIS_THREADS env or 1
    out: str = ""                      # CSV path; empty -> don't write

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz


def _coerce(raw: str, default):
    """Parse a flat config value using the default's type as the template."""
    raw = raw.strip()
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        probe = default[0] if default else ""
        if isinstance(probe, int):
            # allow mixed int/float sweeps to stay numeric
            return tuple(int(s) if s.isdigit() else float(s) for s in items)
        if isinstance(probe, float):
            return tuple(float(s) for s in items)
        return tuple(items)
    return raw


def parse_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from a ``key = value`` file plus override pairs.

    Lines starting with ``#`` (or blank) are skipped; unknown keys raise so
    typos do not silently fall back to defaults.
    """
    cfg = ExperimentConfig()
    known = {f.name: getattr(cfg, f.name) for f in fields(cfg)}

    def apply(key: str, raw: str):
        key = key.strip()
        if key not in known:
            raise KeyError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(raw, known[key]))

    if path:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, raw = line.split("=", 1)
                apply(key, raw)
    for key, raw in (overrides or {}).items():
        apply(key, str(raw))
    return cfg


def write_csv(rows: list, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def _thread_count(config: ExperimentConfig) -> int:
    if config.threads > 0:
        return config.threads
    env = os.environ.get("BDRIS_THREADS", "")
    return max(1, int(env)) if env.isdigit() and env else 1


def _run_tasks(tasks, n_threads: int):
    """Run ``(key, fn)`` pairs, returning results sorted by key so thread
    scheduling cannot change the output."""
    if n_threads <= 1:
        results = [(key, fn()) for key, fn in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = [(key, pool.submit(fn)) for key, fn in tasks]
            results = [(key, fut.result()) for key, fut in futures]
    return [rows for _, rows in sorted(results, key=lambda kr: kr[0])]


# ---------------------------------------------------------------------------
# per-trial work
# ---------------------------------------------------------------------------

def _design_states(decomps: dict, topo, config: ExperimentConfig, rng):
    """Optimize under each model; returns model -> (state, w_or_None, ms)."""
    out = {}
    for model, dec in decomps.items():
        t0 = time.perf_counter()
        if config.objective == "sumrate":
            # seed the (local) rate optimizer with the certified
            # single-stream optimum under the same model, which already
            # exploits whatever coupling the model carries
            try:
                warm = optim.optimize_mimo_single_stream(dec, topo, config.p_t).ris
            except _TRIAL_ERRORS:
                warm = None
            sol = optim.optimize_multiuser_admm(
                dec, topo, config.p_t, config.sigma2,
                options=optim.AdmmOptions(max_iters=config.admm_iters),
                rng=np.random.default_rng(rng.integers(2 ** 63)),
                init=warm)
            state, w = sol.ris, sol.w
        elif dec.n_t == 1 and dec.n_r == 1:
            state, _ = optim.optimize_siso(dec, topo)
            w = None
        else:
            sol = optim.optimize_mimo_single_stream(dec, topo, config.p_t)
            state, w = sol.ris, None
        out[model] = (state, w, 1e3 * (time.perf_counter() - t0))
    return out


def _score_on_exact(designs: dict, dec_exact, config: ExperimentConfig):
    """Evaluate each model's design on the exact channel; returns
    model -> (metric_value, wall_ms), metric name, reference value."""
    scored = {}
    for model, (state, w, ms) in designs.items():
        realized = make_ris_state(dec_exact, state.b_i)
        h = channel_compact(dec_exact, realized)
        if config.objective == "sumrate":
            value = optim.sum_rate(h, w, config.sigma2)
            name = "sum_rate_bits"
        else:
            value = config.p_t * np.linalg.norm(h, 2) ** 2
            name = "receive_power_w"
        scored[model] = (float(value), ms)
    return scored, name, scored["exact"][0]


def _trial_rows(experiment: str, sweep_var: str, sweep_value, trial: int,
                config: ExperimentConfig, decomps: dict, rng) -> list:
    topo = make_mask(config.topology, next(iter(decomps.values())).n_i)
    designs = _design_states(decomps, topo, config, rng)
    scored, metric_name, ref = _score_on_exact(designs, decomps["exact"], config)
    rows = []
    for model in config.models:
        value, ms = scored[model]
        rows.append({
            "experiment": experiment, "sweep_var": sweep_var,
            "sweep_value": sweep_value, "trial": trial, "model": model,
            "topology": config.topology, "metric_name": metric_name,
            "metric_value": value,
            "relative_pct": 100.0 * value / ref if ref > 0 else np.nan,
            "wall_ms": ms, "failures": 0,
        })
    return rows


def _failure_rows(experiment: str, sweep_var: str, sweep_value, trial: int,
                  config: ExperimentConfig, err: Exception) -> list:
    return [{
        "experiment": experiment, "sweep_var": sweep_var,
        "sweep_value": sweep_value, "trial": trial, "model": model,
        "topology": config.topology,
        "metric_name": type(err).__name__, "metric_value": np.nan,
        "relative_pct": np.nan, "wall_ms": 0.0, "failures": 1,
    } for model in config.models]


def _mean_rows(rows: list) -> list:
    """One summary row per (sweep, model, metric) with trial='mean'."""
    groups: dict = {}
    for r in rows:
        key = (r["experiment"], r["sweep_var"], r["sweep_value"], r["model"],
               r["topology"], r["metric_name"])
        groups.setdefault(key, []).append(r)
    means = []
    for key, grp in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        vals = np.array([g["metric_value"] for g in grp], dtype=float)
        pcts = np.array([g["relative_pct"] for g in grp], dtype=float)
        if np.all(np.isnan(vals)):   # pure failure groups keep NaN quietly
            mv, mp = np.nan, np.nan
        else:
            mv, mp = np.nanmean(vals), np.nanmean(pcts)
        means.append({
            "experiment": key[0], "sweep_var": key[1], "sweep_value": key[2],
            "trial": "mean", "model": key[3], "topology": key[4],
            "metric_name": key[5], "metric_value": mv, "relative_pct": mp,
            "wall_ms": float(np.mean([g["wall_ms"] for g in grp])),
            "failures": int(sum(g["failures"] for g in grp)),
        })
    return means


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _decompose_models(params, term, models) -> dict:
    decomps = {model: decompose(params, term, model) for model in models}
    if "exact" not in decomps:   # scoring reference is always the exact model
        decomps["exact"] = decompose(params, term, "exact")
    return decomps


def _farfield(config: ExperimentConfig) -> list:
    if config.objective == "sumrate" and config.n_t < config.n_r:
        raise ValueError("sum-rate runs need at least one transmit port per "
                         "served user")
    quad = QuadratureSpec()
    tasks = []
    for si, n_i in enumerate(config.n_i_list):
        geom = DipoleGeometry.upa(n_i, config.spacing_wl, config.wavelength)
        z_ii = build_ris_impedance(geom, config.z0, quad)
        lay = PortLayout(config.n_t, n_i, config.n_r)
        term = Terminations.matched(lay, config.z0)

        def one(si=si, n_i=n_i, z_ii=z_ii, lay=lay, term=term):
            rows = []
            for trial in range(config.trials):
                rng = np.random.default_rng((config.seed, si, trial))
                try:
                    params = generate_rayleigh_scenario(
                        lay, config.pathgain_it, config.pathgain_ri, z_ii, rng,
                        term=term)
                    decomps = _decompose_models(params, term, config.models)
                    rows += _trial_rows("farfield", "n_i", n_i, trial,
                                        config, decomps, rng)
                except _TRIAL_ERRORS as err:
                    rows += _failure_rows("farfield", "n_i", n_i, trial,
                                          config, err)
            return rows

        tasks.append((si, one))
    chunks = _run_tasks(tasks, _thread_count(config))
    rows = [r for chunk in chunks for r in chunk]
    return rows + _mean_rows(rows)


def _nearfield_scenario(lay, term, z_it, pathgain_ri, z_ii, rng,
                        max_attempts: int = 50) -> NetworkParameters:
    """Deterministic transmitter block, random receiver block; redraw the
    random side if a draw fails the passivity checks downstream."""
    z0 = term.z0
    for _ in range(max_attempts):
        z_ri = np.sqrt(pathgain_ri / 2.0) * (
            rng.standard_normal((lay.n_r, lay.n_i))
            + 1j * rng.standard_normal((lay.n_r, lay.n_i)))
        params = NetworkParameters.from_blocks(
            lay, z_tt=z0 * np.eye(lay.n_t), z_it=z_it, z_ii=z_ii,
            z_ri=z_ri, z_rt=np.zeros((lay.n_r, lay.n_t)),
            z_rr=z0 * np.eye(lay.n_r))
        try:
            decompose(params, term, "exact")
        except (NotPositiveDefiniteError, SingularMatrixError):
            continue
        return params
    raise ResampleBudgetError(f"no valid draw in {max_attempts} attempts")


def _nearfield(config: ExperimentConfig) -> list:
    lay = PortLayout(config.n_t, config.n_i, config.n_r)
    term = Terminations.matched(lay, config.z0)
    quad = QuadratureSpec()
    geom = DipoleGeometry.upa(config.n_i, config.spacing_wl, config.wavelength)
    z_ii = build_ris_impedance(geom, config.z0, quad)
    d = config.spacing_wl * config.wavelength
    tasks = []
    for si, r_wl in enumerate(config.r_list_wl):
        # transmit dipoles sit one pitch apart, r_wl wavelengths off the plane
        tx = np.column_stack([d * (1.0 + np.arange(config.n_t)),
                              np.zeros(config.n_t),
                              np.full(config.n_t, r_wl * config.wavelength)])
        z_it = near_field_transmitter_link(geom, r_wl, d, quad, tx_positions=tx)

        def one(si=si, r_wl=r_wl, z_it=z_it):
            rows = []
            for trial in range(config.trials):
                rng = np.random.default_rng((config.seed, si, trial))
                try:
                    params = _nearfield_scenario(lay, term, z_it,
                                                 config.pathgain_ri, z_ii, rng)
                    decomps = _decompose_models(params, term, config.models)
                    rows += _trial_rows("nearfield", "r_wl", r_wl, trial,
                                        config, decomps, rng)
                except _TRIAL_ERRORS as err:
                    rows += _failure_rows("nearfield", "r_wl", r_wl, trial,
                                          config, err)
            return rows

        tasks.append((si, one))
    chunks = _run_tasks(tasks, _thread_count(config))
    rows = [r for chunk in chunks for r in chunk]
    return rows + _mean_rows(rows)


def run(config: ExperimentConfig) -> list:
    """Execute the configured experiment; returns all rows (trials + means)
    and writes them to ``config.out`` when set."""
    if config.experiment == "farfield":
        rows = _farfield(config)
    elif config.experiment == "nearfield":
        rows = _nearfield(config)
    else:
        raise ValueError(f"unknown experiment {config.experiment!r}")
    if config.out:
        write_csv(rows, config.out)
    return rows


# ---------------------------------------------------------------------------
# bandwidth-optimality validation
# ---------------------------------------------------------------------------

def validate_prop2(n_t: int = 2, n_r: int = 2, n_i: int = 8,
                   trials: int = 500, seed: int = 0,
                   bandwidths: tuple | None = None,
                   pathgain: float = 1e-4) -> dict:
    """Check that a band-connected surface of bandwidth
    ``min(2 min(n_t, n_r) - 1, n_i - 1)`` reproduces any fully-connected
    channel exactly, while narrower bands cannot.

    For each trial a random fully-connected surface defines target responses
    (its action on the transmitter-side cascade columns); a banded surface is
    then fitted to the same targets and the end-to-end channels compared.
    Returns per-bandwidth mismatch arrays plus medians and the fraction of
    trials below 1e-7.
    """
    q_opt = optimal_bandwidth(n_t, n_r, n_i)
    if bandwidths is None:
        bandwidths = tuple(sorted({1, q_opt, n_i - 1}))
    lay = PortLayout(n_t, n_i, n_r)
    term = Terminations.matched(lay)
    z_ii = term.z0 * np.eye(n_i)
    mism = {q: np.empty(trials) for q in bandwidths}
    topos = {q: make_mask(f"band:{q}", n_i) for q in bandwidths}

    for trial in range(trials):
        rng = np.random.default_rng((seed, trial))
        params = generate_rayleigh_scenario(lay, pathgain, pathgain, z_ii, rng,
                                            term=term)
        dec = decompose(params, term, "exact")
        b_full = rng.standard_normal((n_i, n_i))
        b_full = term.y0 * (b_full + b_full.T) / 2.0
        full_state = make_ris_state(dec, b_full)
        h_full = channel_compact(dec, full_state)
        a = dec.hbar_it
        b_target = full_state.theta_bar @ a
        for q in bandwidths:
            state, _ = optim._fit_surface_map(dec, topos[q], a, b_target,
                                              residual_tol=np.inf)
            h_q = channel_compact(dec, state)
            mism[q][trial] = (np.linalg.norm(h_q - h_full)
                              / max(np.linalg.norm(h_full), 1e-300))

    summary = {q: {"median": float(np.median(m)),
                   "frac_below_1e-7": float(np.mean(m < 1e-7))}
               for q, m in mism.items()}
    return {"bandwidths": bandwidths, "q_opt": q_opt,
            "mismatch": mism, "summary": summary}
