"""End-to-end channel models for a reconfigurable-surface link.

Every model here maps a purely-reactive surface load ``i B_I`` (``B_I`` real
symmetric) to the voltage-transfer channel ``H`` seen between the transmit
and receive ports.  Three routes to the same exact channel are provided —
a full admittance inversion (:func:`channel_exact`), a block-elimination
formula (:func:`channel_explicit`), and a cascade form
(:func:`channel_compact`) built from a one-time decomposition — plus three
progressively simpler approximations:

* ``app1``  unilateral: the structural feedback paths (R->T, I->T, R->I) are
  dropped, so power flows one way through the surface;
* ``app2``  unilateral + perfectly matched transmit/receive arrays;
* ``app3``  additionally ignores mutual coupling between surface elements
  (``Z_II -> z0 I``), which recovers the familiar cascaded model with a
  unitary-symmetric reflection matrix.

The cascade form writes ``H = hbar_rt + hbar_ri @ theta_bar @ hbar_it`` where
``theta_bar`` is a Cayley transform of a transformed susceptance and is always
unitary and symmetric.  Crucially, each approximation admits the *same* form
with its own decomposition, so one optimizer front-end serves every model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netparams import NetworkParameters, PortLayout, Terminations

__all__ = [
    "NotPositiveDefiniteError",
    "CompactDecomposition",
    "RisState",
    "channel_exact",
    "channel_explicit",
    "compact_decompose",
    "decompose_app1",
    "decompose_app2",
    "decompose_app3",
    "decompose",
    "make_ris_state",
    "theta_from_bbar",
    "b_to_bbar",
    "bbar_to_b",
    "channel_compact",
    "channel_app1",
    "channel_app2",
    "channel_app3",
]

#: Relative eigenvalue floor below which a "positive definite" real part is
#: treated as numerically singular.
EIG_FLOOR = 1e-14


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """The real part of an effective admittance is not positive definite.

    For a passive lossy environment this real part is provably positive
    definite; hitting this error means the supplied network is not physical
    (or is numerically degenerate).  ``min_eig`` carries the offending
    eigenvalue.
    """

    def __init__(self, what: str, min_eig: float):
        self.min_eig = float(min_eig)
        super().__init__(f"real part of {what} is not positive definite "
                         f"(min eigenvalue {min_eig:.3e})")


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _sqrt_factors(re: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root of a real SPD matrix."""
    w, v = np.linalg.eigh(re)
    if w[0] <= EIG_FLOOR * max(abs(w[-1]), 1.0) or w[0] <= 0:
        raise NotPositiveDefiniteError(what, w[0])
    sqrt = (v * np.sqrt(w)) @ v.T
    inv_sqrt = (v / np.sqrt(w)) @ v.T
    return sqrt, inv_sqrt


@dataclass(frozen=True)
class CompactDecomposition:
    """Constant matrices of the cascade form of one channel model.

    ``H(theta_bar) = hbar_rt + hbar_ri @ theta_bar @ hbar_it`` with
    ``theta_bar = (y0 I + i bbar)^{-1} (y0 I - i bbar)`` and
    ``bbar = y0 * inv_sqrt_re @ (b_i + im_ybar_ii) @ inv_sqrt_re``.

    ``re_ybar_ii``/``im_ybar_ii`` are the real/imaginary parts of the
    model's effective surface admittance; ``sqrt_re``/``inv_sqrt_re`` its
    symmetric square-root factors.
    """

    layout: PortLayout
    hbar_rt: np.ndarray
    hbar_ri: np.ndarray
    hbar_it: np.ndarray
    re_ybar_ii: np.ndarray
    im_ybar_ii: np.ndarray
    sqrt_re: np.ndarray
    inv_sqrt_re: np.ndarray
    y0: float
    model: str = "exact"

    @property
    def n_t(self) -> int:
        return self.hbar_it.shape[1]

    @property
    def n_i(self) -> int:
        return self.re_ybar_ii.shape[0]

    @property
    def n_r(self) -> int:
        return self.hbar_ri.shape[0]

    @property
    def l_factor(self) -> np.ndarray:
        """``sqrt(y0) * inv_sqrt_re`` — the congruence factor taking a raw
        susceptance ``B`` to its transformed version via ``L B L + L Im L``."""
        return np.sqrt(self.y0) * self.inv_sqrt_re


@dataclass(frozen=True)
class RisState:
    """A realized surface configuration under a given decomposition."""

    b_i: np.ndarray          # raw susceptance matrix (real symmetric)
    bbar_i: np.ndarray       # transformed susceptance (real symmetric)
    theta_bar: np.ndarray    # unitary symmetric reflection-like matrix

    @property
    def n_i(self) -> int:
        return self.b_i.shape[0]


def _check_b(b_i, n_i: int) -> np.ndarray:
    b = np.asarray(b_i, dtype=float)
    if b.ndim == 0:
        b = np.full(n_i, float(b))
    if b.ndim == 1:
        b = np.diag(b)
    if b.shape != (n_i, n_i):
        raise ValueError(f"b_i must be {n_i}x{n_i} (or a diagonal vector)")
    if np.abs(b - b.T).max() > 1e-9 * max(1.0, np.abs(b).max()):
        raise ValueError("b_i must be symmetric (reciprocal circuit)")
    return _sym(b)


# ---------------------------------------------------------------------------
# exact model
# ---------------------------------------------------------------------------

def channel_exact(params: NetworkParameters, term: Terminations, b_i) -> np.ndarray:
    """Exact channel through a full admittance-domain inversion.

    Terminate every port (sources ``y_t``, surface ``i b_i``, loads ``y_r``),
    invert once, and read the transfer off the loaded admittance matrix:
    ``H = Yt_RT @ inv(Yt_TT)`` with ``Yt = inv(Y_loads + Y)``.
    """
    lay = params.layout
    b = _check_b(b_i, lay.n_i)
    y_loads = np.zeros((lay.n, lay.n), dtype=complex)
    y_loads[lay.t_slice, lay.t_slice] = np.diag(term.y_t)
    y_loads[lay.i_slice, lay.i_slice] = 1j * b
    y_loads[lay.r_slice, lay.r_slice] = np.diag(term.y_r)
    yt = np.linalg.inv(y_loads + params.y)
    return np.linalg.solve(yt[lay.t_slice, lay.t_slice].T, yt[lay.r_slice, lay.t_slice].T).T


def channel_explicit(params: NetworkParameters, term: Terminations, b_i) -> np.ndarray:
    """Exact channel via block elimination of the surface and receive ports.

    Algebraically identical to :func:`channel_exact`; kept as an independent
    evaluation route.
    """
    lay = params.layout
    b = _check_b(b_i, lay.n_i)
    y_it = params.y_block("I", "T")
    y_ir = params.y_block("I", "R")
    y_ri = params.y_block("R", "I")
    y_rt = params.y_block("R", "T")
    m_rr = params.y_block("R", "R") + np.diag(term.y_r)
    k_ri = np.linalg.solve(m_rr, y_ri)
    ybar_ii = params.y_block("I", "I") - y_ir @ k_ri
    rhs = y_it - y_ir @ np.linalg.solve(m_rr, y_rt)
    inner = np.linalg.solve(1j * b + ybar_ii, rhs)
    return np.linalg.solve(m_rr, -y_rt + y_ri @ inner)


def _cascade_from_parts(layout, g_rt, g_ri, m, g_it, y0, model, what) -> CompactDecomposition:
    """Shared constructor for any model of the shape
    ``H = g_rt + g_ri @ inv(i B + m) @ g_it`` with ``Re(m)`` SPD."""
    re = _sym(np.asarray(m).real)
    im = _sym(np.asarray(m).imag)
    sqrt_re, inv_sqrt_re = _sqrt_factors(re, what)
    half_ri = g_ri @ inv_sqrt_re
    half_it = inv_sqrt_re @ g_it
    return CompactDecomposition(
        layout=layout,
        hbar_rt=g_rt + 0.5 * half_ri @ half_it,
        hbar_ri=-half_ri / np.sqrt(2.0),
        hbar_it=-half_it / np.sqrt(2.0),
        re_ybar_ii=re,
        im_ybar_ii=im,
        sqrt_re=sqrt_re,
        inv_sqrt_re=inv_sqrt_re,
        y0=float(y0),
        model=model,
    )


def compact_decompose(params: NetworkParameters, term: Terminations) -> CompactDecomposition:
    """Cascade decomposition of the exact model.

    Eliminates the receive loads into an effective surface admittance
    ``ybar_ii`` (whose real part is positive definite for any physical
    network), then factors the channel so that the only ``b_i`` dependence
    sits inside a unitary-symmetric ``theta_bar``.
    """
    lay = params.layout
    y_it = params.y_block("I", "T")
    y_ir = params.y_block("I", "R")
    y_ri = params.y_block("R", "I")
    y_rt = params.y_block("R", "T")
    m_rr = params.y_block("R", "R") + np.diag(term.y_r)
    k_ri = np.linalg.solve(m_rr, y_ri)
    ybar_ii = params.y_block("I", "I") - y_ir @ k_ri
    g_rt = -np.linalg.solve(m_rr, y_rt)
    g_ri = k_ri
    g_it = y_it - y_ir @ np.linalg.solve(m_rr, y_rt)
    return _cascade_from_parts(lay, g_rt, g_ri, ybar_ii, g_it, term.y0,
                               "exact", "effective surface admittance")


# ---------------------------------------------------------------------------
# unilateral approximations
# ---------------------------------------------------------------------------

def _unilateral_parts(params: NetworkParameters, term: Terminations):
    """Common pieces of the one-way (feedback-free) impedance-domain models."""
    w = np.linalg.inv(params.z_ii)  # surface coupling admittance Z_II^{-1}
    return params.z_it, params.z_ri, params.z_rt, w


def decompose_app1(params: NetworkParameters, term: Terminations) -> CompactDecomposition:
    """Cascade decomposition of the unilateral model.

    Drops the structural feedback blocks but keeps the array reflections
    (``Z_TT``, ``Z_RR``) and the surface coupling ``Z_II``.
    """
    lay = params.layout
    z_it, z_ri, z_rt, w = _unilateral_parts(params, term)
    pre = term.z_r_matrix() @ np.linalg.inv(term.z_r_matrix() + params.z_rr)
    post = np.linalg.inv(params.z_tt)
    g_rt = pre @ (z_rt - z_ri @ w @ z_it) @ post
    g_ri = pre @ z_ri @ w
    g_it = w @ z_it @ post
    return _cascade_from_parts(lay, g_rt, g_ri, w, g_it, term.y0,
                               "app1", "inverse surface coupling")


def decompose_app2(params: NetworkParameters, term: Terminations) -> CompactDecomposition:
    """As ``app1`` with matched transmit/receive arrays (``Z_TT = Z_RR = z0 I``)."""
    lay = params.layout
    z_it, z_ri, z_rt, w = _unilateral_parts(params, term)
    s = 1.0 / (2.0 * term.z0)
    g_rt = s * (z_rt - z_ri @ w @ z_it)
    g_ri = s * z_ri @ w
    g_it = w @ z_it
    return _cascade_from_parts(lay, g_rt, g_ri, w, g_it, term.y0,
                               "app2", "inverse surface coupling")


def decompose_app3(params: NetworkParameters, term: Terminations) -> CompactDecomposition:
    """As ``app2`` with surface coupling ignored (``Z_II -> z0 I``).

    Here the transformed susceptance equals the raw one and ``theta_bar``
    reduces to the classical unitary-symmetric reflection matrix
    ``(y0 I + i B)^{-1} (y0 I - i B)``.
    """
    lay = params.layout
    z_it, z_ri, z_rt, _ = _unilateral_parts(params, term)
    y0 = term.y0
    s = 1.0 / (2.0 * term.z0)
    g_rt = s * (z_rt - y0 * z_ri @ z_it)
    g_ri = s * y0 * z_ri
    g_it = y0 * z_it
    m = y0 * np.eye(lay.n_i)
    return _cascade_from_parts(lay, g_rt, g_ri, m, g_it, y0,
                               "app3", "reference admittance")


_DECOMPOSERS = {
    "exact": compact_decompose,
    "app1": decompose_app1,
    "app2": decompose_app2,
    "app3": decompose_app3,
}


def decompose(params: NetworkParameters, term: Terminations,
              model: str = "exact") -> CompactDecomposition:
    """Dispatch to the decomposition of the named model."""
    try:
        fn = _DECOMPOSERS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of "
                         f"{sorted(_DECOMPOSERS)}") from None
    return fn(params, term)


# ---------------------------------------------------------------------------
# cascade evaluation
# ---------------------------------------------------------------------------

def make_ris_state(decomp: CompactDecomposition, b_i) -> RisState:
    """Realize a surface configuration under a decomposition.

    ``bbar = y0 * inv_sqrt_re (b_i + im_ybar_ii) inv_sqrt_re`` and
    ``theta_bar`` is its Cayley transform — unitary and symmetric for any
    real symmetric ``b_i``.
    """
    n_i = decomp.n_i
    b = _check_b(b_i, n_i)
    bbar = decomp.y0 * decomp.inv_sqrt_re @ (b + decomp.im_ybar_ii) @ decomp.inv_sqrt_re
    bbar = _sym(bbar)
    eye = np.eye(n_i)
    theta_bar = np.linalg.solve(decomp.y0 * eye + 1j * bbar, decomp.y0 * eye - 1j * bbar)
    return RisState(b_i=b, bbar_i=bbar, theta_bar=theta_bar)


def theta_from_bbar(decomp: CompactDecomposition, bbar: np.ndarray) -> np.ndarray:
    """Cayley transform of a transformed susceptance (no raw-B round trip)."""
    eye = np.eye(decomp.n_i)
    return np.linalg.solve(decomp.y0 * eye + 1j * bbar, decomp.y0 * eye - 1j * bbar)


def bbar_to_b(decomp: CompactDecomposition, bbar: np.ndarray) -> np.ndarray:
    """Invert the susceptance transform: ``B = sqrt_re bbar sqrt_re / y0 - im``."""
    b = decomp.sqrt_re @ np.asarray(bbar) @ decomp.sqrt_re / decomp.y0 - decomp.im_ybar_ii
    return _sym(b)


def b_to_bbar(decomp: CompactDecomposition, b_i) -> np.ndarray:
    """Forward susceptance transform (see :func:`make_ris_state`)."""
    b = _check_b(b_i, decomp.n_i)
    return _sym(decomp.y0 * decomp.inv_sqrt_re @ (b + decomp.im_ybar_ii) @ decomp.inv_sqrt_re)


def channel_compact(decomp: CompactDecomposition, state: RisState) -> np.ndarray:
    """Evaluate the cascade form ``hbar_rt + hbar_ri theta_bar hbar_it``."""
    return decomp.hbar_rt + decomp.hbar_ri @ state.theta_bar @ decomp.hbar_it


# ---------------------------------------------------------------------------
# direct closed forms of the approximations
# ---------------------------------------------------------------------------

def _loaded_surface_inverse(z_ii: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``inv(i B @ z_ii + I) @ (i B)`` — i.e. ``inv(Z_B + Z_II)`` written so a
    singular susceptance (e.g. B = 0, an open surface) stays well defined."""
    n = z_ii.shape[0]
    y_i = 1j * b
    return np.linalg.solve(np.eye(n) + y_i @ z_ii, y_i)


def channel_app1(params: NetworkParameters, term: Terminations, b_i) -> np.ndarray:
    """Unilateral channel (no feedback paths), direct formula."""
    lay = params.layout
    b = _check_b(b_i, lay.n_i)
    inner = _loaded_surface_inverse(params.z_ii, b)
    pre = term.z_r_matrix() @ np.linalg.inv(term.z_r_matrix() + params.z_rr)
    core = params.z_rt - params.z_ri @ inner @ params.z_it
    return pre @ core @ np.linalg.inv(params.z_tt)


def channel_app2(params: NetworkParameters, term: Terminations, b_i) -> np.ndarray:
    """Unilateral + matched arrays, direct formula."""
    lay = params.layout
    b = _check_b(b_i, lay.n_i)
    inner = _loaded_surface_inverse(params.z_ii, b)
    return (params.z_rt - params.z_ri @ inner @ params.z_it) / (2.0 * term.z0)


def channel_app3(params: NetworkParameters, term: Terminations, b_i) -> np.ndarray:
    """Unilateral + matched arrays + coupling-free surface, direct formula."""
    lay = params.layout
    b = _check_b(b_i, lay.n_i)
    inner = _loaded_surface_inverse(term.z0 * np.eye(lay.n_i), b)
    return (params.z_rt - params.z_ri @ inner @ params.z_it) / (2.0 * term.z0)
