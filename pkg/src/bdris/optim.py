"""Surface and beamforming optimizers on top of the cascade form.

Everything here consumes a :class:`~bdris.channels.CompactDecomposition`, so
the same code optimizes under the exact model or any of the approximations —
only the decomposition changes.  Provided routines:

* :func:`optimize_siso` — closed-form global optimum of the receive power
  for one transmit and one receive port;
* :func:`optimize_mimo_single_stream` — global single-stream beamforming via
  the two-constraint semidefinite relaxation (tight) plus surface recovery;
* :func:`optimize_multiuser_admm` — sum-rate maximization for one user per
  receive port by alternating fractional-programming beamformer updates and
  ADMM splitting of the unitary-symmetric surface constraint;
* :func:`recover_ris_state` — map an optimal auxiliary vector back to a
  masked susceptance matrix;
* metric helpers (:func:`receive_power`, :func:`sum_rate`,
  :func:`relative_performance`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .channels import (CompactDecomposition, RisState, bbar_to_b,
                       channel_compact, make_ris_state)
from .symfit import SymFitProblem, solve_symfit
from .topology import Topology, make_mask, optimal_bandwidth
from . import sdpsolver

__all__ = [
    "NormMismatchError",
    "RecoveryResidualError",
    "AdmmDivergenceError",
    "MimoSolution",
    "MultiuserSolution",
    "AdmmOptions",
    "optimize_siso",
    "optimize_mimo_single_stream",
    "optimize_multiuser_admm",
    "recover_ris_state",
    "receive_power",
    "sum_rate",
    "relative_performance",
]

_TINY = 1e-300


class NormMismatchError(ValueError):
    """Target norms violate the energy-conservation requirement.

    A unitary surface response maps the incident auxiliary vector to an
    equal-norm reflected one; recovery targets breaking that cannot be met.
    """


class RecoveryResidualError(RuntimeError):
    """The fitted surface does not reproduce the requested mapping.

    Typically means the requested topology is too restrictive for the
    target (bandwidth below the loss-free minimum)."""

    def __init__(self, residual: float, tol: float):
        self.residual = residual
        super().__init__(f"surface recovery residual {residual:.3e} exceeds {tol:.1e}")


class AdmmDivergenceError(RuntimeError):
    """The augmented-Lagrangian value blew up; try a larger penalty rho."""


@dataclass(frozen=True)
class MimoSolution:
    w: np.ndarray            # unit-norm transmit beamformer
    g: np.ndarray            # unit-norm receive combiner
    ris: RisState
    receive_power: float     # watts, at the configured transmit power
    certificate: float       # dual upper bound on the receive power


@dataclass(frozen=True)
class MultiuserSolution:
    w: np.ndarray            # n_t x K precoder, ||W||_F^2 <= p_t
    ris: RisState
    sum_rate: float          # at the returned (W, surface) pair
    trace: dict = field(repr=False, default_factory=dict)


@dataclass(frozen=True)
class AdmmOptions:
    rho: float = 1.0         # constraint penalty (on the normalized split)
    xi: float = 0.1          # proximal weight of the surface update
    max_iters: int = 500
    tol_primal: float = 1e-5
    tol_obj: float = 1e-7
    fp_inner: int = 1        # fractional-programming passes per outer iteration


# ---------------------------------------------------------------------------
# surface recovery
# ---------------------------------------------------------------------------

def _as_cols(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return v[:, None] if v.ndim == 1 else v


def _fit_surface_map(decomp: CompactDecomposition, topology: Topology,
                     a: np.ndarray, b: np.ndarray, residual_tol: float):
    """Masked symmetric B with ``theta_bar(B) a = b`` (columnwise).

    The unitary map condition is linear in the transformed susceptance:
    ``bbar (a + b) = -i y0 (a - b)``.  Fully-connected surfaces solve it
    directly in transformed coordinates (minimum-norm when underdetermined);
    masked ones pull the congruence into the raw-B least squares.
    """
    n = decomp.n_i
    y0 = decomp.y0
    norm_a = np.linalg.norm(a, axis=0)
    norm_b = np.linalg.norm(b, axis=0)
    if np.any(np.abs(norm_a - norm_b) > 1e-8 * np.maximum(np.maximum(norm_a, norm_b), _TINY)):
        raise NormMismatchError(
            "per-column norms of the incident and reflected targets differ "
            "beyond 1e-8; a lossless surface cannot realize this map")
    c = a + b
    g = -1j * y0 * (a - b)
    degenerate = np.linalg.norm(c) <= 1e-12 * (np.linalg.norm(a) + np.linalg.norm(b))
    c_cols = np.hstack([c.real, c.imag])
    g_cols = np.hstack([g.real, g.imag])

    if topology.is_fully_connected:
        problem = SymFitProblem(l_factor=np.eye(n), r_factor=c_cols, gamma1=g_cols,
                                gamma2=None, rho=1.0, xi=0.0, mask=topology)
        bbar = solve_symfit(problem).b_i
        b_i = bbar_to_b(decomp, bbar)
    else:
        l = decomp.l_factor
        lc = l @ c_cols
        shift = l @ (decomp.im_ybar_ii @ lc)
        problem = SymFitProblem(l_factor=l, r_factor=lc, gamma1=g_cols - shift,
                                gamma2=None, rho=1.0, xi=0.0, mask=topology)
        b_i = solve_symfit(problem).b_i

    state = make_ris_state(decomp, b_i)
    residual = np.linalg.norm(state.theta_bar @ a - b) / max(np.linalg.norm(b), _TINY)
    if not degenerate and residual > residual_tol:
        raise RecoveryResidualError(residual, residual_tol)
    return state, residual


def recover_ris_state(u_star: np.ndarray, w_star: np.ndarray,
                      decomp: CompactDecomposition, topology: Topology,
                      residual_tol: float = 1e-7) -> RisState:
    """Surface configuration realizing the optimizer pair (w*, u*).

    The auxiliary vector of the relaxation is exactly what the surface must
    reflect the (transformed) incident signal onto: ``theta_bar hbar_it w = u``.
    """
    a = _as_cols(decomp.hbar_it @ np.asarray(w_star, dtype=complex))
    b = _as_cols(u_star)
    state, _ = _fit_surface_map(decomp, topology, a, b, residual_tol)
    return state


# ---------------------------------------------------------------------------
# SISO
# ---------------------------------------------------------------------------

def optimize_siso(decomp: CompactDecomposition, topology: Topology | None = None
                  ) -> tuple[RisState, float]:
    """Globally optimal surface for one transmit and one receive port.

    The channel magnitude splits into a direct term and a cascade term whose
    phases can always be aligned; the optimal auxiliary vector points along
    the conjugate surface-to-receiver gains with the norm of the incident
    ones.  Returns the surface state and the achieved power gain |h|^2.
    """
    if decomp.n_t != 1 or decomp.n_r != 1:
        raise ValueError("optimize_siso needs exactly one port on each side")
    if topology is None:
        topology = make_mask("fully", decomp.n_i)
    h_rt = complex(decomp.hbar_rt[0, 0])
    h_ri = decomp.hbar_ri[0, :]
    h_it = decomp.hbar_it[:, 0]
    nri = np.linalg.norm(h_ri)
    nit = np.linalg.norm(h_it)
    gain = (abs(h_rt) + nri * nit) ** 2
    if nri * nit == 0.0:
        # the cascade path is dead; any surface does, take the simplest
        return make_ris_state(decomp, np.zeros((decomp.n_i, decomp.n_i))), abs(h_rt) ** 2
    phase = np.exp(1j * np.angle(h_rt)) if h_rt != 0 else 1.0
    u_star = phase * nit * h_ri.conj() / nri
    state = recover_ris_state(u_star, np.ones(1), decomp, topology)
    return state, float(gain)


# ---------------------------------------------------------------------------
# single-stream MIMO
# ---------------------------------------------------------------------------

def optimize_mimo_single_stream(decomp: CompactDecomposition,
                                topology: Topology | None = None,
                                p_t: float = 1.0,
                                use_reduced: bool = True,
                                sdp_tol: float = 1e-9) -> MimoSolution:
    """Globally optimal joint (beamformer, surface) for one data stream.

    Solves the tight two-constraint relaxation, extracts the rank-one
    optimizer, and fits the surface to realize its auxiliary vector.  The
    ``certificate`` field carries the dual bound: receive power can never
    legitimately exceed it, so callers get a global-optimality check for free.
    """
    if topology is None:
        topology = make_mask("fully", decomp.n_i)
    q_opt = optimal_bandwidth(decomp.n_t, decomp.n_r, decomp.n_i)
    count_needed = np.abs(np.subtract.outer(np.arange(decomp.n_i),
                                            np.arange(decomp.n_i))) <= q_opt
    if not topology.is_fully_connected and np.any(count_needed & ~topology.mask):
        warnings.warn("topology is narrower than the loss-free minimum bandwidth; "
                      "the relaxation value may not be attainable", stacklevel=2)

    build = sdpsolver.build_sdp_reduced if use_reduced else sdpsolver.build_sdp_full
    sdp, lift = build(decomp)
    sol = sdpsolver.solve(sdp, tol=sdp_tol)
    x = sdpsolver.rank_one_extract(sol.x, sdp)
    w, u = lift.split(x)
    scale = np.linalg.norm(w)
    if scale <= 1e-12:
        raise sdpsolver.SdpSolverError("extracted beamformer has zero norm")
    w = w / scale
    u = u / scale
    a = decomp.hbar_it @ w
    target = np.linalg.norm(a)
    if np.linalg.norm(u) <= 1e-12 * max(target, _TINY):
        # surface path does not reach the receiver; reflect neutrally
        u = a.copy()
    elif target > 0:
        u = u * (target / np.linalg.norm(u))
    state = recover_ris_state(u, w, decomp, topology)

    h = channel_compact(decomp, state)
    hw = h @ w
    nhw = np.linalg.norm(hw)
    g = hw / nhw if nhw > 0 else np.eye(decomp.n_r, 1, dtype=complex)[:, 0]
    return MimoSolution(w=w, g=g, ris=state,
                        receive_power=float(p_t * nhw ** 2),
                        certificate=float(p_t * sol.certificate))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def receive_power(h: np.ndarray, w: np.ndarray, g: np.ndarray, p_t: float = 1.0) -> float:
    """``p_t |g^H H w|^2`` for unit-norm beamformer/combiner."""
    return float(p_t * np.abs(g.conj() @ h @ w) ** 2)


# ---------------------------------------------------------------------------
# multiuser sum rate via ADMM
# ---------------------------------------------------------------------------

def _power_capped_precoder(m: np.ndarray, v: np.ndarray, p_t: float) -> np.ndarray:
    """argmax of the concave beamformer surrogate under a total power cap.

    Stationarity gives ``(M + mu I) W = V`` with the water-filling multiplier
    ``mu >= 0`` chosen so ||W||_F^2 <= p_t; the power is monotone decreasing
    in mu, so bisection on the eigenbasis of M nails it.
    """
    vals, vecs = np.linalg.eigh(m)
    vt = vecs.conj().T @ v
    row_sq = np.sum(np.abs(vt) ** 2, axis=1)

    def power(mu: float) -> float:
        return float(np.sum(row_sq / (vals + mu) ** 2))

    floor = max(0.0, -float(vals[0])) + 1e-14 * max(1.0, abs(float(vals[-1])))
    if power(floor) <= p_t:
        mu = floor
    else:
        lo, hi = floor, floor + 1.0
        while power(hi) > p_t:
            hi = 2.0 * hi + 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if power(mid) > p_t:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * (1.0 + hi):
                break
        mu = hi
    w = vecs @ (vt / (vals + mu)[:, None])
    nf = np.linalg.norm(w)
    if nf ** 2 > p_t:  # clip the last ulps so the invariant is exact
        w = w * np.sqrt(p_t) / nf
    return w


def optimize_multiuser_admm(decomp: CompactDecomposition, topology: Topology,
                            p_t: float, sigma2: float,
                            options: AdmmOptions | None = None,
                            rng: np.random.Generator | None = None,
                            init: RisState | None = None) -> MultiuserSolution:
    """Sum-rate maximization for one single-antenna user per receive port.

    Alternates (i) closed-form fractional-programming auxiliaries, (ii) a
    power-capped precoder step, and (iii) an ADMM splitting in which a free
    copy ``U`` of the conjugate surface-to-user cascade is optimized and then
    projected back onto the set realizable by a masked lossless surface.  The
    linear consistency constraint couples ``U`` and the transformed
    susceptance through the normalized Cayley relation
    ``(I - i B~) U = (I + i B~) hbar_ri^H`` with ``B~ = bbar / y0``.

    Non-monotone by nature (the surrogate is rebuilt each round), so the best
    feasible iterate is tracked and returned.

    ``init`` seeds the surface with a known-good configuration (for example
    the certified single-stream optimum) instead of the random start; it must
    respect the topology mask.  The scheme is local, so a start that already
    exploits the surface coupling routinely beats a random one on strongly
    coupled arrays.
    """
    opts = options or AdmmOptions()
    if rng is None:
        rng = np.random.default_rng()
    n_t, n_i, n_r = decomp.n_t, decomp.n_i, decomp.n_r
    y0 = decomp.y0
    rho = None  # set from the surrogate curvature after the first pass
    eye = np.eye(n_i)
    l_small = decomp.l_factor / np.sqrt(y0)        # maps raw B into B~ coordinates
    im_small = l_small @ decomp.im_ybar_ii @ l_small
    hri_h = decomp.hbar_ri.conj().T                # n_i x n_r

    if init is not None:
        b_i = np.asarray(init.b_i, dtype=float)
        if np.any((b_i != 0.0) & ~topology.mask):
            raise ValueError("initial surface uses connections outside the "
                             "topology mask")
    else:
        # random masked start: B = 0 can be a dead point (an open-circuited
        # surface does not scatter, so without a direct link the channel is
        # zero and every update fixes it), so kick off from a y0-scale
        # susceptance
        b_i = rng.standard_normal((n_i, n_i))
        b_i = y0 * (b_i + b_i.T) / 2.0 * topology.mask
    state = make_ris_state(decomp, b_i)
    btil = state.bbar_i / y0
    u = state.theta_bar.conj().T @ hri_h           # consistent start
    lam = np.zeros((n_i, n_r), dtype=complex)
    w = rng.standard_normal((n_t, n_r)) + 1j * rng.standard_normal((n_t, n_r))
    w *= np.sqrt(p_t) / np.linalg.norm(w)

    def channel_of(u_mat):
        return decomp.hbar_rt + u_mat.conj().T @ decomp.hbar_it

    def feasible_rate(th_bar, w_mat):
        h = decomp.hbar_rt + decomp.hbar_ri @ th_bar @ decomp.hbar_it
        return sum_rate(h, w_mat, sigma2)

    best_rate = feasible_rate(state.theta_bar, w)
    best = (b_i.copy(), w.copy())
    trace = {"rate": [best_rate], "al": [], "primal": []}
    hri_norm = max(np.linalg.norm(decomp.hbar_ri), _TINY)
    al_prev = None
    al_floor = None

    for _ in range(opts.max_iters):
        h = channel_of(u)
        for _ in range(max(1, opts.fp_inner)):
            # fractional-programming auxiliaries, both closed form
            d = h @ w
            sig = np.abs(np.diagonal(d)) ** 2
            tot = np.sum(np.abs(d) ** 2, axis=1) + sigma2
            gam = sig / np.maximum(tot - sig, _TINY)
            y = np.sqrt(1.0 + gam) * np.diagonal(d) / tot
            # precoder under the power cap
            ysq = np.abs(y) ** 2
            m = (h.conj().T * ysq) @ h
            v = h.conj().T * (np.sqrt(1.0 + gam) * y)
            w = _power_capped_precoder(m, v, p_t)

        # cascade-copy update: one PSD solve per user
        p = decomp.hbar_it @ w
        f = decomp.hbar_rt @ w
        if rho is None:
            # balance the penalty against the surrogate curvature in the
            # U-solve so neither term swamps the other at the start
            curv = float(np.max(np.abs(y)) ** 2 * np.linalg.norm(p, 2) ** 2)
            rho = 10.0 * float(opts.rho) * curv if curv > 0 else float(opts.rho)
            rho_init = rho
        xi = float(opts.xi) * rho
        e = eye - 1j * btil
        ete = eye + btil @ btil
        c_rhs = (eye + 1j * btil) @ hri_h - lam / rho
        coef = np.sqrt(1.0 + gam) * np.conj(y)
        for k in range(n_r):
            a_k = np.abs(y[k]) ** 2 * (p @ p.conj().T) + (rho / 2.0) * ete
            v_k = (coef[k] * p[:, k]
                   - np.abs(y[k]) ** 2 * (p @ f[k, :].conj())
                   + (rho / 2.0) * (e.conj().T @ c_rhs[:, k]))
            u[:, k] = np.linalg.solve(a_k, v_k)

        # surface update: masked least squares on B~ (U + hbar_ri^H) = i-free
        psi = 1j * (u + hri_h)
        phi = u - hri_h + lam / rho
        psi_cols = np.hstack([psi.real, psi.imag])
        lc = l_small @ psi_cols
        problem = SymFitProblem(
            l_factor=l_small, r_factor=lc,
            gamma1=np.hstack([phi.real, phi.imag]) - im_small @ psi_cols,
            gamma2=(btil - im_small) if xi > 0 else None,
            rho=rho, xi=xi, mask=topology)
        b_i = solve_symfit(problem).b_i
        state = make_ris_state(decomp, b_i)
        btil_prev = btil
        btil = state.bbar_i / y0

        gap = (eye - 1j * btil) @ u - (eye + 1j * btil) @ hri_h
        lam = lam + rho * gap

        rate = feasible_rate(state.theta_bar, w)
        if rate > best_rate:
            best_rate = rate
            best = (b_i.copy(), w.copy())
        primal = np.linalg.norm(u - state.theta_bar.conj().T @ hri_h) / hri_norm
        d = channel_of(u) @ w
        al = -(np.sum(np.log1p(gam) - gam)
               + np.sum(2.0 * np.sqrt(1.0 + gam) * (np.conj(y) * np.diagonal(d)).real)
               - np.sum(np.abs(y) ** 2 * (np.sum(np.abs(d) ** 2, axis=1) + sigma2)))
        al = al + np.sum((lam.conj() * gap).real) + (rho / 2.0) * np.linalg.norm(gap) ** 2
        trace["rate"].append(rate)
        trace["al"].append(al)
        trace["primal"].append(primal)

        if al_floor is None:
            al_floor = abs(al)
        if not np.isfinite(al) or al > 10.0 * al_floor + 1e3:
            raise AdmmDivergenceError(
                f"augmented Lagrangian grew to {al:.3e}; increase rho")
        if primal < opts.tol_primal and al_prev is not None and \
                abs(al - al_prev) <= opts.tol_obj * (1.0 + abs(al)):
            break
        al_prev = al
        # continuation: when the split stops tightening, lean harder on it
        # (never loosen -- starting feasible makes early residuals tiny and
        # a symmetric balancing rule would drive the penalty to zero)
        hist = trace["primal"]
        if len(hist) >= 25 and len(hist) % 25 == 0 and primal > opts.tol_primal \
                and primal > 0.7 * hist[-25] and rho < 1e6 * rho_init:
            rho *= 2.0

    b_best, w_best = best
    state = make_ris_state(decomp, b_best)
    nf = np.linalg.norm(w_best)
    if nf ** 2 > p_t * (1.0 + 1e-10):
        w_best = w_best * np.sqrt(p_t) / nf
    return MultiuserSolution(w=w_best, ris=state, sum_rate=float(best_rate), trace=trace)


def sum_rate(h: np.ndarray, w: np.ndarray, sigma2: float, base: str = "bits") -> float:
    """Sum rate of K single-antenna users with channel rows ``h`` and
    precoder columns ``w`` (bits by default, nats on request)."""
    d = h @ w
    sig = np.abs(np.diagonal(d)) ** 2
    intf = np.sum(np.abs(d) ** 2, axis=1) - sig
    sinr = sig / (intf + sigma2)
    if base == "bits":
        return float(np.sum(np.log2(1.0 + sinr)))
    if base == "nats":
        return float(np.sum(np.log1p(sinr)))
    raise ValueError("base must be 'bits' or 'nats'")


def _power_metric(decomp_true: CompactDecomposition, state: RisState) -> float:
    """Best receive power gain on the true model with the given surface:
    squared spectral norm of the realized channel (beams re-derived)."""
    realized = make_ris_state(decomp_true, state.b_i)
    h = channel_compact(decomp_true, realized)
    return float(np.linalg.norm(h, 2) ** 2)


def relative_performance(decomp_true: CompactDecomposition, solution,
                         reference=None, sigma2: float | None = None) -> float:
    """Percentage of the exact-model optimum retained by a solution obtained
    under some (possibly approximate) model, evaluated on the true model.

    For power-type solutions (surface states or single-stream solutions)
    the reference defaults to the exact-model global optimum on a fully-
    connected surface.  Sum-rate solutions must bring their own reference
    (another solution or a precomputed value) since that optimum has no
    closed form.
    """
    if isinstance(solution, MultiuserSolution):
        if sigma2 is None:
            raise ValueError("sigma2 is needed to evaluate sum-rate solutions")
        realized = make_ris_state(decomp_true, solution.ris.b_i)
        value = sum_rate(channel_compact(decomp_true, realized), solution.w, sigma2)
        if isinstance(reference, MultiuserSolution):
            ref_state = make_ris_state(decomp_true, reference.ris.b_i)
            ref = sum_rate(channel_compact(decomp_true, ref_state), reference.w, sigma2)
        elif reference is None:
            raise ValueError("sum-rate comparisons need an explicit reference")
        else:
            ref = float(reference)
        return 100.0 * value / max(ref, _TINY)

    state = solution.ris if isinstance(solution, MimoSolution) else \
        (solution[0] if isinstance(solution, tuple) else solution)
    value = _power_metric(decomp_true, state)
    if reference is None:
        if decomp_true.n_t == 1 and decomp_true.n_r == 1:
            _, ref = optimize_siso(decomp_true)
        else:
            ref = optimize_mimo_single_stream(decomp_true).receive_power
    elif isinstance(reference, (MimoSolution,)):
        ref = _power_metric(decomp_true, reference.ris)
    elif isinstance(reference, (RisState,)):
        ref = _power_metric(decomp_true, reference)
    elif isinstance(reference, tuple):
        ref = _power_metric(decomp_true, reference[0])
    else:
        ref = float(reference)
    return 100.0 * value / max(ref, _TINY)
