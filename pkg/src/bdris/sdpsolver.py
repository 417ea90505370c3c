"""Self-contained semidefinite solver for the single-stream relaxation.

The joint transmit/surface optimization for one data stream relaxes to

    maximize   tr(Q0 X)
    subject to tr(Q1 X) = 0,  tr(Q2 X) = 1,  X >= 0 (Hermitian PSD),

a two-constraint complex SDP whose optimum is always attained at rank one,
so the relaxation is tight and the extracted vector is a global optimizer
of the original quadratic problem.

Nothing external is used: the complex program is embedded into a real
symmetric one of twice the size and solved by a primal-dual path-following
interior-point method with Nesterov-Todd scaling and a Mehrotra-style
adaptive centering parameter (predictor + combined corrector step, no
second-order term — at these sizes robustness beats the iteration shaved
off by the corrector).  Solutions whose top eigenvalue does not dominate
are reduced to rank one by null-space purification steps that preserve
both constraints and the objective exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .channels import CompactDecomposition

__all__ = [
    "SdpSolverError",
    "PurificationError",
    "TwoConstraintSdp",
    "SdrLift",
    "SdpSolution",
    "build_sdp_full",
    "build_sdp_reduced",
    "solve",
    "rank_one_extract",
]


class SdpSolverError(RuntimeError):
    """Interior-point iteration failed to reach the requested accuracy."""


class PurificationError(RuntimeError):
    """Rank reduction could not isolate a rank-one optimizer."""


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True)
class TwoConstraintSdp:
    """Data (Q0, Q1, Q2) of the two-constraint relaxation; all Hermitian."""

    q0: np.ndarray
    q1: np.ndarray
    q2: np.ndarray

    def __post_init__(self):
        n = self.q0.shape[0]
        for name in ("q0", "q1", "q2"):
            m = np.asarray(getattr(self, name), dtype=complex)
            if m.shape != (n, n):
                raise ValueError("q0, q1, q2 must share one square shape")
            if np.abs(m - m.conj().T).max() > 1e-10 * max(1.0, np.abs(m).max()):
                raise ValueError(f"{name} must be Hermitian")
            object.__setattr__(self, name, _herm(m))

    @property
    def dim(self) -> int:
        return self.q0.shape[0]


@dataclass(frozen=True)
class SdrLift:
    """How to map an extracted vector back to (w, u) in model coordinates.

    The builders rescale the auxiliary block by ``u_scale`` so both blocks
    of the program live at comparable magnitudes (the raw cascade gains are
    tiny, which would otherwise leave the interior-point iterates pinched);
    ``basis`` carries the range rotation of the reduced program.
    """

    n_t: int
    u_scale: float
    basis: np.ndarray | None = None

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = x[: self.n_t]
        u = self.u_scale * x[self.n_t:]
        if self.basis is not None:
            u = self.basis @ u
        return w, u


@dataclass(frozen=True)
class SdpSolution:
    x: np.ndarray               # Hermitian PSD optimizer (original scale)
    value: float                # primal objective tr(Q0 X)
    certificate: float          # dual objective, an upper bound on the value
    y: np.ndarray               # dual multipliers of the two constraints
    gap: float                  # normalized primal-dual gap
    primal_residual: float
    dual_residual: float
    iterations: int


# ---------------------------------------------------------------------------
# program builders
# ---------------------------------------------------------------------------

def _gram_blocks(decomp: CompactDecomposition, ri_cols: np.ndarray):
    """Q matrices for variable x = [w; u-block] with the given surface-to-
    receiver columns (already scaled)."""
    n_t = decomp.n_t
    k = ri_cols.shape[1]
    f = np.hstack([decomp.hbar_rt, ri_cols])
    q0 = f.conj().T @ f
    gram_it = decomp.hbar_it.conj().T @ decomp.hbar_it
    scale = max(np.linalg.norm(decomp.hbar_it, 2) ** 2, 1e-300)
    q1 = np.zeros((n_t + k, n_t + k), dtype=complex)
    q1[:n_t, :n_t] = gram_it / scale
    q1[n_t:, n_t:] = -np.eye(k)
    q2 = np.zeros_like(q1)
    q2[:n_t, :n_t] = np.eye(n_t)
    return TwoConstraintSdp(q0=q0, q1=q1, q2=q2), np.sqrt(scale)


def build_sdp_full(decomp: CompactDecomposition) -> tuple[TwoConstraintSdp, SdrLift]:
    """Relaxation over the full variable x = [w; u], dim n_t + n_i."""
    alpha = max(np.linalg.norm(decomp.hbar_it, 2), 1e-300)
    sdp, _ = _gram_blocks(decomp, alpha * decomp.hbar_ri)
    return sdp, SdrLift(n_t=decomp.n_t, u_scale=alpha, basis=None)


def build_sdp_reduced(decomp: CompactDecomposition) -> tuple[TwoConstraintSdp, SdrLift]:
    """Relaxation with the u-block restricted to the (at most n_r dimensional)
    row space of the surface-to-receiver gains — lossless, since norm spent
    outside that space neither radiates toward the receiver nor helps the
    norm-matching constraint."""
    alpha = max(np.linalg.norm(decomp.hbar_it, 2), 1e-300)
    u_mat, sing, vh = np.linalg.svd(decomp.hbar_ri, full_matrices=False)
    k = min(decomp.n_r, decomp.n_i)
    ri_cols = alpha * u_mat[:, :k] * sing[:k]
    sdp, _ = _gram_blocks(decomp, ri_cols)
    return sdp, SdrLift(n_t=decomp.n_t, u_scale=alpha, basis=vh[:k].conj().T)


# ---------------------------------------------------------------------------
# real embedding
# ---------------------------------------------------------------------------

def _embed(m: np.ndarray) -> np.ndarray:
    """Hermitian -> real symmetric of twice the size, preserving the PSD cone
    and doubling inner products."""
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


def _project(m_real: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`_embed` on the symmetric average; PSD-preserving."""
    a = m_real[:n, :n]
    d = m_real[n:, n:]
    c = m_real[n:, :n]
    return _herm(0.5 * (a + d) + 0.5j * (c - c.T))


# ---------------------------------------------------------------------------
# interior-point core (real symmetric SDP, m=2 equality constraints)
# ---------------------------------------------------------------------------

def _step_to_boundary(m: np.ndarray, dm: np.ndarray) -> float:
    """Largest alpha with m + alpha*dm staying PSD (m assumed PD)."""
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(m + 1e-14 * np.trace(m) * np.eye(m.shape[0]))
    k = sla.solve_triangular(chol, dm, lower=True, check_finite=False)
    k = sla.solve_triangular(chol, k.T, lower=True, check_finite=False)
    w_min = np.linalg.eigvalsh(0.5 * (k + k.T))[0]
    if w_min >= -1e-14:
        return np.inf
    return -1.0 / w_min


def _nt_scaling(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Nesterov-Todd scaling point W (satisfies W S W = X)."""
    wx, vx = np.linalg.eigh(x)
    wx = np.clip(wx, 1e-300, None)
    x_half = (vx * np.sqrt(wx)) @ vx.T
    t = _symm(x_half @ s @ x_half)
    wt, vt = np.linalg.eigh(t)
    wt = np.clip(wt, 1e-300, None)
    t_inv_half = (vt / np.sqrt(wt)) @ vt.T
    return _symm(x_half @ t_inv_half @ x_half)


def _symm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _solve_real(c, a_ops, b, tol, max_iters):
    """Path-following solver for min <C,X> s.t. <A_i,X>=b_i, X PSD."""
    n = c.shape[0]
    m = len(a_ops)
    x = np.eye(n)
    s = np.eye(n)
    y = np.zeros(m)
    b_scale = 1.0 + np.linalg.norm(b)
    c_scale = 1.0 + np.linalg.norm(c)

    def a_dot(mat):
        return np.array([np.sum(ai * mat) for ai in a_ops])

    best = None
    for it in range(1, max_iters + 1):
        rp = b - a_dot(x)
        rd = c - s - sum(yi * ai for yi, ai in zip(y, a_ops))
        mu = np.sum(x * s) / n
        pobj = float(np.sum(c * x))
        dobj = float(b @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        feas_p = np.linalg.norm(rp) / b_scale
        feas_d = np.linalg.norm(rd) / c_scale
        compl = n * mu / (1.0 + abs(pobj) + abs(dobj))
        best = (x, y, s, gap, feas_p, feas_d, it)
        if gap < tol and feas_p < tol and feas_d < tol and compl < 10 * tol:
            return best

        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s))
                and np.all(np.isfinite(y))):
            raise SdpSolverError(
                "iterates diverged to non-finite values; the program is "
                "likely infeasible or unbounded")
        try:
            w = _nt_scaling(x, s)
            s_inv = _symm(np.linalg.inv(s))
            wa = [_symm(w @ ai @ w) for ai in a_ops]
            m_schur = np.array([[np.sum(ai * waj) for waj in wa]
                                for ai in a_ops])
            w_rd_w = _symm(w @ rd @ w)

            def direction(sigma_mu):
                r_c = sigma_mu * s_inv - x
                v = a_dot(r_c - w_rd_w)
                try:
                    dy = np.linalg.solve(m_schur, rp - v)
                except np.linalg.LinAlgError:
                    dy, *_ = np.linalg.lstsq(m_schur, rp - v, rcond=None)
                ds = rd - sum(dyi * ai for dyi, ai in zip(dy, a_ops))
                dx = _symm(r_c - w @ ds @ w)
                return dx, dy, _symm(ds)

            # predictor: pure Newton step toward the optimum
            dx_a, dy_a, ds_a = direction(0.0)
            ap = min(1.0, 0.99 * _step_to_boundary(x, dx_a))
            ad = min(1.0, 0.99 * _step_to_boundary(s, ds_a))
            mu_aff = np.sum((x + ap * dx_a) * (s + ad * ds_a)) / n
            sigma = min(0.999, max((max(mu_aff, 0.0) / mu) ** 3, 1e-12))

            dx, dy, ds = direction(sigma * mu)
            tau = 0.98 if it < 10 else 0.995
            ap = min(1.0, tau * _step_to_boundary(x, dx))
            ad = min(1.0, tau * _step_to_boundary(s, ds))
        except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
            # the scaling point and boundary steps only fail once the
            # iterates leave the cone, which a feasible well-posed program
            # never forces
            raise SdpSolverError(
                "iterates left the positive-definite cone; the program is "
                f"likely infeasible or unbounded ({exc})") from exc
        x = _symm(x + ap * dx)
        y = y + ad * dy
        s = _symm(s + ad * ds)

    x, y, s, gap, feas_p, feas_d, it = best
    if gap < 100 * tol and feas_p < 100 * tol and feas_d < 100 * tol:
        return best
    raise SdpSolverError(
        f"no convergence in {max_iters} iterations "
        f"(gap {gap:.2e}, primal {feas_p:.2e}, dual {feas_d:.2e})")


def solve(sdp: TwoConstraintSdp, tol: float = 1e-9, max_iters: int = 200) -> SdpSolution:
    """Solve the relaxation to the requested normalized gap.

    The objective is internally normalized by the spectral scale of Q0 (the
    physical gains are ~1e-10 W at realistic path losses, far from the unit
    scale the interior-point method likes); reported values are unscaled.
    """
    n = sdp.dim
    s0 = max(np.linalg.norm(sdp.q0, 2), 1e-300)
    c = _embed(-sdp.q0 / s0)
    a_ops = [_embed(sdp.q1), _embed(sdp.q2)]
    b = np.array([0.0, 2.0])
    x_r, y_r, s_r, gap, feas_p, feas_d, iters = _solve_real(c, a_ops, b, tol, max_iters)

    x = _project(x_r, n)
    # clip the tiny negative eigenvalues that projection may expose
    wv, vv = np.linalg.eigh(x)
    x = _herm((vv * np.clip(wv, 0.0, None)) @ vv.conj().T)
    value = float(np.real(np.sum(sdp.q0.conj() * x))) * 1.0
    y = -s0 * y_r
    certificate = float(y[1])
    return SdpSolution(x=x, value=value, certificate=certificate, y=y, gap=gap,
                       primal_residual=feas_p, dual_residual=feas_d, iterations=iters)


# ---------------------------------------------------------------------------
# rank-one extraction
# ---------------------------------------------------------------------------

def _null_direction(gs: list[np.ndarray]) -> np.ndarray | None:
    """A nonzero Hermitian D orthogonal to every (Hermitian) G in gs."""
    r = gs[0].shape[0]
    rows = []
    for g in gs:
        row = np.empty(r * r)
        k = 0
        for p in range(r):
            row[k] = g[p, p].real
            k += 1
        for p in range(r):
            for q in range(p + 1, r):
                row[k] = 2.0 * g[p, q].real
                row[k + 1] = 2.0 * g[p, q].imag
                k += 2
        rows.append(row)
    a = np.array(rows)
    _, sv, vt = np.linalg.svd(a)
    null = vt[np.sum(sv > 1e-12 * max(sv[0], 1e-300)):]
    if null.shape[0] == 0:
        return None
    coef = null[0]
    d = np.zeros((r, r), dtype=complex)
    k = 0
    for p in range(r):
        d[p, p] = coef[k]
        k += 1
    for p in range(r):
        for q in range(p + 1, r):
            d[p, q] = coef[k] + 1j * coef[k + 1]
            d[q, p] = coef[k] - 1j * coef[k + 1]
            k += 2
    return d


def rank_one_extract(x: np.ndarray, sdp: TwoConstraintSdp | None = None,
                     ratio_tol: float = 1e-6, max_steps: int = 64) -> np.ndarray:
    """Factor an optimal X into its rank-one representative.

    If the second eigenvalue is already negligible the top eigenpair is
    returned directly.  Otherwise (a degenerate optimal face) the rank is
    walked down by moving along Hermitian directions that keep both
    constraint values and the objective unchanged until an eigenvalue hits
    zero.  The global phase is fixed by making the largest-magnitude entry
    real positive.
    """
    x = _herm(np.asarray(x, dtype=complex))
    for _ in range(max_steps):
        w, v = np.linalg.eigh(x)
        order = np.argsort(w)[::-1]
        w, v = w[order], v[:, order]
        lead = max(w[0], 1e-300)
        if w.size == 1 or w[1] / lead < ratio_tol:
            vec = np.sqrt(lead) * v[:, 0]
            pivot = vec[np.argmax(np.abs(vec))]
            if abs(pivot) > 0:
                vec = vec * (pivot.conj() / abs(pivot))
            return vec
        if sdp is None:
            raise PurificationError(
                "solution is not numerically rank one and no program data "
                "was supplied for purification")
        keep = w > max(1e-12 * lead, 0.0)
        v_r = v[:, keep]
        lam = w[keep]
        gs = [v_r.conj().T @ q @ v_r for q in (sdp.q1, sdp.q2, sdp.q0)]
        d = _null_direction(gs)
        if d is None:
            raise PurificationError("no admissible rank-reducing direction")
        k = (d / np.sqrt(lam)[:, None]) / np.sqrt(lam)[None, :]
        kappa = np.linalg.eigvalsh(_herm(k))
        cands = []
        if kappa[-1] > 1e-14:
            cands.append(-1.0 / kappa[-1])
        if kappa[0] < -1e-14:
            cands.append(-1.0 / kappa[0])
        if not cands:
            raise PurificationError("degenerate direction during purification")
        t = min(cands, key=abs)
        x = _herm(v_r @ (np.diag(lam) + t * d) @ v_r.conj().T)
    raise PurificationError(f"rank did not reach one in {max_steps} steps")
