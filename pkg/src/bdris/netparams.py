"""Multiport network parameters for RIS-aided links.

The radio environment (transmit antennas, RIS elements, receive antennas,
and the propagation medium between them) is treated as a single
``N = n_t + n_i + n_r`` port network described by its impedance matrix ``Z``.
This module holds the partitioned-matrix containers, the Z/Y/S parameter
conversions, and the synthetic Rayleigh scenario generator used by the
Monte-Carlo studies.

Conventions
-----------
* Reciprocity: ``Z`` is (complex) symmetric, not Hermitian.
* Port ordering is transmitter block, then RIS block, then receiver block.
* Complex Gaussian entries use the circularly-symmetric convention where the
  variance parameter is the *total* variance (half per real/imag part).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "DEFAULT_COND_CAP",
    "SingularMatrixError",
    "ResampleBudgetError",
    "PortLayout",
    "Terminations",
    "NetworkParameters",
    "z_to_y",
    "y_to_z",
    "z_to_s",
    "block",
    "generate_rayleigh_scenario",
]

#: Inversions refuse to proceed past this condition number unless overridden.
DEFAULT_COND_CAP = 1e12


class SingularMatrixError(np.linalg.LinAlgError):
    """A requested inversion is numerically singular (or past the cond cap)."""

    def __init__(self, what: str, cond: float):
        self.cond = float(cond)
        super().__init__(f"{what} is numerically singular (cond ~ {cond:.3e})")


class ResampleBudgetError(RuntimeError):
    """Scenario generation kept producing non-physical draws."""


def _inv_checked(a: np.ndarray, what: str, cond_cap: float = DEFAULT_COND_CAP) -> np.ndarray:
    """Invert ``a`` after an explicit condition-number check."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {a.shape}")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularMatrixError(what, cond)
    return np.linalg.inv(a)


def z_to_y(z: np.ndarray, cond_cap: float = DEFAULT_COND_CAP) -> np.ndarray:
    """Impedance to admittance parameters: ``Y = Z^{-1}``."""
    return _inv_checked(z, "impedance matrix", cond_cap)


def y_to_z(y: np.ndarray, cond_cap: float = DEFAULT_COND_CAP) -> np.ndarray:
    """Admittance to impedance parameters (same inversion)."""
    return _inv_checked(y, "admittance matrix", cond_cap)


def z_to_s(z: np.ndarray, z0: float, cond_cap: float = DEFAULT_COND_CAP) -> np.ndarray:
    """Impedance to scattering parameters at reference impedance ``z0``.

    ``S = (Z + z0 I)^{-1} (Z - z0 I)``.  For reciprocal (symmetric) ``Z`` the
    result commutes, i.e. it equals ``(Z - z0 I)(Z + z0 I)^{-1}``.
    """
    z = np.asarray(z, dtype=complex)
    eye = np.eye(z.shape[0])
    shifted = z + z0 * eye
    cond = np.linalg.cond(shifted)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularMatrixError("Z + z0*I", cond)
    return np.linalg.solve(shifted, z - z0 * eye)


@dataclass(frozen=True)
class PortLayout:
    """Port counts of the three-section multiport: (transmit, RIS, receive)."""

    n_t: int
    n_i: int
    n_r: int

    def __post_init__(self):
        for name in ("n_t", "n_i", "n_r"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def n(self) -> int:
        return self.n_t + self.n_i + self.n_r

    @property
    def t_slice(self) -> slice:
        return slice(0, self.n_t)

    @property
    def i_slice(self) -> slice:
        return slice(self.n_t, self.n_t + self.n_i)

    @property
    def r_slice(self) -> slice:
        return slice(self.n_t + self.n_i, self.n)

    def group_slice(self, group: str) -> slice:
        try:
            return {"T": self.t_slice, "I": self.i_slice, "R": self.r_slice}[group.upper()]
        except KeyError:
            raise ValueError(f"unknown port group {group!r}, expected T, I or R") from None


@dataclass(frozen=True)
class Terminations:
    """Source and load terminations plus the reference impedance.

    ``z_t`` and ``z_r`` hold the diagonals of the (strictly diagonal) source
    and load impedance matrices, in ohms.
    """

    z_t: np.ndarray
    z_r: np.ndarray
    z0: float

    def __post_init__(self):
        object.__setattr__(self, "z_t", np.atleast_1d(np.asarray(self.z_t, dtype=complex)))
        object.__setattr__(self, "z_r", np.atleast_1d(np.asarray(self.z_r, dtype=complex)))
        if self.z_t.ndim != 1 or self.z_r.ndim != 1:
            raise ValueError("z_t and z_r must be 1-D arrays of diagonal entries")
        if not (np.isreal(self.z0) and self.z0 > 0):
            raise ValueError("z0 must be a positive real reference impedance")
        if np.any(self.z_t.real <= 0) or np.any(self.z_r.real <= 0):
            raise ValueError("source and load impedances need Re(z) > 0")

    @classmethod
    def matched(cls, layout: PortLayout, z0: float = 50.0) -> "Terminations":
        """All sources and loads equal to the reference impedance."""
        return cls(np.full(layout.n_t, z0, dtype=complex),
                   np.full(layout.n_r, z0, dtype=complex), float(z0))

    @property
    def y0(self) -> float:
        return 1.0 / self.z0

    @property
    def y_t(self) -> np.ndarray:
        return 1.0 / self.z_t

    @property
    def y_r(self) -> np.ndarray:
        return 1.0 / self.z_r

    def z_t_matrix(self) -> np.ndarray:
        return np.diag(self.z_t)

    def z_r_matrix(self) -> np.ndarray:
        return np.diag(self.z_r)


class NetworkParameters:
    """Partitioned N-port impedance matrix with named block accessors."""

    def __init__(self, layout: PortLayout, z: np.ndarray, cond_cap: float = DEFAULT_COND_CAP):
        z = np.asarray(z, dtype=complex)
        if z.shape != (layout.n, layout.n):
            raise ValueError(f"z must be {layout.n}x{layout.n}, got {z.shape}")
        self.layout = layout
        self.z = z
        self.cond_cap = cond_cap

    @classmethod
    def from_blocks(cls, layout: PortLayout, *, z_tt, z_it, z_ii, z_ri, z_rt, z_rr,
                    cond_cap: float = DEFAULT_COND_CAP) -> "NetworkParameters":
        """Assemble a reciprocal (symmetric) Z from the lower-triangular blocks.

        The upper blocks are filled in by transposition, so the result is
        symmetric by construction.
        """
        n_t, n_i, n_r = layout.n_t, layout.n_i, layout.n_r
        z_tt = np.broadcast_to(np.asarray(z_tt, dtype=complex), (n_t, n_t))
        z_it = np.asarray(z_it, dtype=complex).reshape(n_i, n_t)
        z_ii = np.asarray(z_ii, dtype=complex).reshape(n_i, n_i)
        z_ri = np.asarray(z_ri, dtype=complex).reshape(n_r, n_i)
        z_rt = np.asarray(z_rt, dtype=complex).reshape(n_r, n_t)
        z_rr = np.broadcast_to(np.asarray(z_rr, dtype=complex), (n_r, n_r))
        z = np.block([
            [z_tt, z_it.T, z_rt.T],
            [z_it, 0.5 * (z_ii + z_ii.T), z_ri.T],
            [z_rt, z_ri, z_rr],
        ])
        return cls(layout, z, cond_cap)

    def block(self, row_group: str, col_group: str) -> np.ndarray:
        rs = self.layout.group_slice(row_group)
        cs = self.layout.group_slice(col_group)
        return self.z[rs, cs]

    # Named accessors mirror the usual Z_XY subscript notation.
    @property
    def z_tt(self): return self.block("T", "T")
    @property
    def z_ti(self): return self.block("T", "I")
    @property
    def z_tr(self): return self.block("T", "R")
    @property
    def z_it(self): return self.block("I", "T")
    @property
    def z_ii(self): return self.block("I", "I")
    @property
    def z_ir(self): return self.block("I", "R")
    @property
    def z_rt(self): return self.block("R", "T")
    @property
    def z_ri(self): return self.block("R", "I")
    @property
    def z_rr(self): return self.block("R", "R")

    @cached_property
    def y(self) -> np.ndarray:
        """Admittance matrix ``Y = Z^{-1}`` (cached)."""
        return z_to_y(self.z, self.cond_cap)

    def y_block(self, row_group: str, col_group: str) -> np.ndarray:
        rs = self.layout.group_slice(row_group)
        cs = self.layout.group_slice(col_group)
        return self.y[rs, cs]

    def symmetry_defect(self) -> float:
        """Reciprocity check: relative Frobenius asymmetry of Z."""
        scale = max(np.linalg.norm(self.z), 1e-300)
        return float(np.linalg.norm(self.z - self.z.T) / scale)

    def is_reciprocal(self, tol: float = 1e-10) -> bool:
        return self.symmetry_defect() < tol


def block(params: NetworkParameters, row_group: str, col_group: str) -> np.ndarray:
    """Functional form of :meth:`NetworkParameters.block`."""
    return params.block(row_group, col_group)


def _complex_gaussian(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries with total variance per entry."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _min_real_eig_symmetric(m: np.ndarray) -> float:
    """Minimum eigenvalue of the symmetrized real part of a complex-symmetric matrix."""
    re = 0.5 * (m.real + m.real.T)
    return float(np.linalg.eigvalsh(re)[0])


def _effective_ris_admittance(params: NetworkParameters, term: Terminations) -> np.ndarray:
    """RIS-side admittance with the receiver loads absorbed.

    ``Y_II - Y_IR (Y_RR + Y_R)^{-1} Y_RI``; its real part must be positive
    definite for a lossy reciprocal environment.
    """
    y_ri = params.y_block("R", "I")
    y_ir = params.y_block("I", "R")
    m_rr = params.y_block("R", "R") + np.diag(term.y_r)
    return params.y_block("I", "I") - y_ir @ np.linalg.solve(m_rr, y_ri)


def generate_rayleigh_scenario(layout: PortLayout, pathgain_it: float, pathgain_ri: float,
                               z_ii: np.ndarray, seed, term: Terminations | None = None,
                               max_attempts: int = 50) -> NetworkParameters:
    """Draw a random Rayleigh-faded scenario with an obstructed direct link.

    ``Z_IT`` and ``Z_RI`` get i.i.d. complex Gaussian entries with total
    variances ``pathgain_it`` and ``pathgain_ri``; the direct block ``Z_RT``
    is zero; ``Z_TT = Z_RR = z0 I`` and ``Z_II`` is the supplied coupling
    matrix.  Draws whose effective admittance real parts fail the positive
    definiteness required of a physical (lossy) network are rejected and
    resampled — this essentially never triggers at realistic path gains,
    where the couplings are far below the reference impedance.

    Parameters
    ----------
    seed : int, sequence, or numpy Generator
        Anything accepted by ``np.random.default_rng``.  Pass per-trial
        generators for reproducible parallel Monte-Carlo runs.
    """
    if pathgain_it <= 0 or pathgain_ri <= 0:
        raise ValueError("path gains must be positive variances")
    z_ii = np.asarray(z_ii, dtype=complex)
    if z_ii.shape != (layout.n_i, layout.n_i):
        raise ValueError(f"z_ii must be {layout.n_i}x{layout.n_i}")
    if np.linalg.norm(z_ii - z_ii.T) > 1e-9 * max(np.linalg.norm(z_ii), 1e-300):
        raise ValueError("z_ii must be symmetric (reciprocal RIS array)")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if term is None:
        term = Terminations.matched(layout)

    for _ in range(max_attempts):
        z_it = _complex_gaussian(rng, (layout.n_i, layout.n_t), pathgain_it)
        z_ri = _complex_gaussian(rng, (layout.n_r, layout.n_i), pathgain_ri)
        params = NetworkParameters.from_blocks(
            layout,
            z_tt=term.z0 * np.eye(layout.n_t),
            z_it=z_it,
            z_ii=z_ii,
            z_ri=z_ri,
            z_rt=np.zeros((layout.n_r, layout.n_t)),
            z_rr=term.z0 * np.eye(layout.n_r),
        )
        try:
            m_rr = params.y_block("R", "R") + np.diag(term.y_r)
            if _min_real_eig_symmetric(m_rr) <= 0:
                continue
            if _min_real_eig_symmetric(_effective_ris_admittance(params, term)) <= 0:
                continue
        except np.linalg.LinAlgError:
            continue
        return params
    raise ResampleBudgetError(
        f"no physically valid draw in {max_attempts} attempts; "
        "check path gains and the coupling matrix")
