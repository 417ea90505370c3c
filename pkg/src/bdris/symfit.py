"""Least-squares fitting of masked symmetric susceptance matrices.

Several places in the package need the best real symmetric ``B`` — with a
given circuit topology mask — solving

    minimize  (rho/2) ||L B R - G1||_F^2  +  (xi/2) ||L B L - G2||_F^2

for constant real factors ``L`` (n x n), ``R`` (n x m) and targets ``G1``
(n x m), ``G2`` (n x n).  The free variables are the on/above-diagonal True
entries of the mask; everything else is pinned to zero and symmetry is kept
by construction.

The normal equations are assembled by Gram contraction without ever forming
the (n*m x nfree) design matrix: with ``GL = L^T L`` and ``GR = R R^T`` the
inner product of the columns belonging to entries (i,j) and (k,l) is a sum
of four GL*GR products.  Only genuinely underdetermined problems fall back
to an explicit design matrix and a minimum-norm solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .topology import Topology

__all__ = [
    "MaskViolationError",
    "SymFitProblem",
    "SymFitResult",
    "pack_free_variables",
    "unpack_free_variables",
    "solve_symfit",
]

#: Reciprocal-condition threshold below which the normal equations get a ridge.
RCOND_LIMIT = 1e-12


class MaskViolationError(ValueError):
    """A susceptance matrix has support outside its topology mask."""


def pack_free_variables(b: np.ndarray, topology: Topology) -> np.ndarray:
    """Flatten the free entries of a masked symmetric matrix (row-major,
    upper triangle).  Raises if ``b`` is asymmetric or leaks outside the mask."""
    b = np.asarray(b, dtype=float)
    n = topology.n_i
    if b.shape != (n, n):
        raise ValueError(f"b must be {n}x{n}")
    if np.abs(b - b.T).max() > 1e-9 * max(1.0, np.abs(b).max()):
        raise ValueError("b must be symmetric")
    if np.any(b[~topology.mask] != 0.0):
        raise MaskViolationError("b has nonzero entries outside the topology mask")
    i, j = topology.free_indices()
    return b[i, j]


def unpack_free_variables(x: np.ndarray, topology: Topology) -> np.ndarray:
    """Inverse of :func:`pack_free_variables`."""
    i, j = topology.free_indices()
    x = np.asarray(x, dtype=float)
    if x.shape != i.shape:
        raise ValueError(f"expected {i.size} free variables, got {x.shape}")
    b = np.zeros((topology.n_i, topology.n_i))
    b[i, j] = x
    b[j, i] = x
    return b


@dataclass
class SymFitProblem:
    """One fitting instance; ``r_factor``/``gamma1`` may be None when rho=0
    and ``gamma2`` None when xi=0."""

    l_factor: np.ndarray
    r_factor: np.ndarray | None
    gamma1: np.ndarray | None
    gamma2: np.ndarray | None
    rho: float
    xi: float
    mask: Topology

    def __post_init__(self):
        if self.rho < 0 or self.xi < 0 or (self.rho == 0 and self.xi == 0):
            raise ValueError("need rho, xi >= 0 with at least one positive")
        n = self.mask.n_i
        self.l_factor = np.asarray(self.l_factor, dtype=float)
        if self.l_factor.shape != (n, n):
            raise ValueError(f"l_factor must be {n}x{n}")
        if self.rho > 0:
            self.r_factor = np.asarray(self.r_factor, dtype=float)
            self.gamma1 = np.asarray(self.gamma1, dtype=float)
            if self.r_factor.ndim != 2 or self.r_factor.shape[0] != n:
                raise ValueError(f"r_factor must be {n}xm")
            if self.gamma1.shape != (n, self.r_factor.shape[1]):
                raise ValueError("gamma1 shape must match (n, m)")
        if self.xi > 0:
            self.gamma2 = np.asarray(self.gamma2, dtype=float)
            if self.gamma2.shape != (n, n):
                raise ValueError(f"gamma2 must be {n}x{n}")


@dataclass(frozen=True)
class SymFitResult:
    b_i: np.ndarray
    objective: float
    rank_deficient: bool


def _slots(topology: Topology):
    """Two weighted (row, col) slots per free variable so that diagonal and
    off-diagonal entries share one code path (diagonal slots weigh 1/2 each)."""
    i, j = topology.free_indices()
    w = np.where(i == j, 0.5, 1.0)
    return (i, j, w), (j, i, w)


def _design_matrix(l_factor: np.ndarray, r_factor: np.ndarray, topology: Topology) -> np.ndarray:
    """Explicit (n*m x nfree) design matrix of B -> vec(L B R)."""
    (a1, b1, w), (a2, b2, _) = _slots(topology)
    m1 = np.einsum("pk,kq->pqk", l_factor[:, a1], r_factor[b1, :])
    m2 = np.einsum("pk,kq->pqk", l_factor[:, a2], r_factor[b2, :])
    n, m = r_factor.shape[0], r_factor.shape[1]
    return (w * (m1 + m2)).reshape(l_factor.shape[0] * m, -1)


def _gram_terms(l_factor, r_factor, gamma, topology):
    """Normal-equation contributions (A^T A, A^T b) by Gram contraction."""
    gl = l_factor.T @ l_factor
    gr = r_factor @ r_factor.T
    t = l_factor.T @ gamma @ r_factor.T
    slots = _slots(topology)
    nfree = slots[0][0].size
    ata = np.zeros((nfree, nfree))
    atb = np.zeros(nfree)
    for au, bu, wu in slots:
        atb += wu * t[au, bu]
        for av, bv, wv in slots:
            ata += (wu[:, None] * wv[None, :]) * gl[np.ix_(au, av)] * gr[np.ix_(bu, bv)]
    return ata, atb


def _objective(problem: SymFitProblem, b: np.ndarray) -> float:
    obj = 0.0
    if problem.rho > 0:
        res = problem.l_factor @ b @ problem.r_factor - problem.gamma1
        obj += 0.5 * problem.rho * float(np.sum(res * res))
    if problem.xi > 0:
        res = problem.l_factor @ b @ problem.l_factor - problem.gamma2
        obj += 0.5 * problem.xi * float(np.sum(res * res))
    return obj


def solve_symfit(problem: SymFitProblem) -> SymFitResult:
    """Solve the masked symmetric least-squares problem.

    Determined systems go through Gram-contracted normal equations with a
    Cholesky solve (a trace-scaled ridge of 1e-12 is added if the estimated
    reciprocal condition drops below 1e-12, and the result is flagged).
    Underdetermined systems — fewer residual rows than free variables —
    return the minimum-norm solution via an explicit design matrix, also
    flagged as rank deficient.
    """
    topo = problem.mask
    n = topo.n_i
    i_free, _ = topo.free_indices()
    nfree = i_free.size
    rows = 0
    if problem.rho > 0:
        rows += n * problem.r_factor.shape[1]
    if problem.xi > 0:
        rows += n * n

    if rows < nfree:
        # minimum-norm least squares on the stacked explicit system
        blocks, rhs = [], []
        if problem.rho > 0:
            blocks.append(np.sqrt(problem.rho)
                          * _design_matrix(problem.l_factor, problem.r_factor, topo))
            rhs.append(np.sqrt(problem.rho) * problem.gamma1.ravel())
        if problem.xi > 0:
            blocks.append(np.sqrt(problem.xi)
                          * _design_matrix(problem.l_factor, problem.l_factor, topo))
            rhs.append(np.sqrt(problem.xi) * problem.gamma2.ravel())
        a = np.vstack(blocks)
        y = np.concatenate(rhs)
        x, *_ = np.linalg.lstsq(a, y, rcond=None)
        b = unpack_free_variables(x, topo)
        return SymFitResult(b_i=b, objective=_objective(problem, b), rank_deficient=True)

    normal = np.zeros((nfree, nfree))
    rhs = np.zeros(nfree)
    if problem.rho > 0:
        ata, atb = _gram_terms(problem.l_factor, problem.r_factor, problem.gamma1, topo)
        normal += problem.rho * ata
        rhs += problem.rho * atb
    if problem.xi > 0:
        ctc, ctd = _gram_terms(problem.l_factor, problem.l_factor, problem.gamma2, topo)
        normal += problem.xi * ctc
        rhs += problem.xi * ctd

    rank_deficient = False
    try:
        cho = sla.cho_factor(normal, check_finite=False)
        anorm = np.abs(normal).sum(axis=0).max()
        rcond = sla.lapack.dpocon(cho[0], anorm)[0]
        if rcond < RCOND_LIMIT:
            raise np.linalg.LinAlgError("ill conditioned")
        x = sla.cho_solve(cho, rhs, check_finite=False)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        # near-singular: trace-scaled ridge, flagged
        rank_deficient = True
        ridge = RCOND_LIMIT * max(np.trace(normal) / max(nfree, 1), 1e-300)
        try:
            cho = sla.cho_factor(normal + ridge * np.eye(nfree), check_finite=False)
            x = sla.cho_solve(cho, rhs, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            x, *_ = np.linalg.lstsq(normal, rhs, rcond=None)
    b = unpack_free_variables(x, topo)
    return SymFitResult(b_i=b, objective=_objective(problem, b), rank_deficient=rank_deficient)
