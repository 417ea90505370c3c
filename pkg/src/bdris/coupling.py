"""Mutual impedance of thin-wire dipoles by induced-EMF quadrature.

The surface is modeled as an array of parallel cylindrical dipoles aligned
with the y axis, each carrying the usual open-circuit sinusoidal current
profile.  The mutual impedance between two dipoles is the double line
integral of the free-space field kernel weighted by both current profiles;
self terms are taken from the resonant design value instead of the (log-
divergent for zero wire radius) integral.

All geometry is in meters; entries come out in ohms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ETA0",
    "QuadratureConvergenceError",
    "DipoleGeometry",
    "QuadratureSpec",
    "dipole_mutual_impedance",
    "build_ris_impedance",
    "near_field_transmitter_link",
]

#: Free-space wave impedance used throughout, in ohms.
ETA0 = 377.0


class QuadratureConvergenceError(RuntimeError):
    """Panel refinement did not reach the requested relative tolerance."""


@dataclass(frozen=True)
class DipoleGeometry:
    """Array of parallel y-aligned dipoles.

    ``positions`` holds one (x, y) center per dipole — or (x, y, z) if an
    out-of-plane offset is needed; missing z means z = 0.
    """

    wavelength: float
    length: float
    positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[1] == 2:
            pos = np.hstack([pos, np.zeros((pos.shape[0], 1))])
        if pos.shape[1] != 3:
            raise ValueError("positions must be (n, 2) or (n, 3)")
        if self.wavelength <= 0 or self.length <= 0:
            raise ValueError("wavelength and length must be positive")
        if self.length >= self.wavelength:
            raise ValueError("dipole length must stay below one wavelength "
                             "(sinusoidal profile assumption)")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def k0(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @classmethod
    def upa(cls, n_i: int, spacing_wl: float, wavelength: float,
            length_wl: float = 0.25) -> "DipoleGeometry":
        """Uniform planar array in the x-y plane: dipoles parallel to y,
        centers on a near-square grid with the given spacing (wavelengths).

        Elements sharing an x coordinate are collinear; at spacing equal to
        the dipole length adjacent collinear elements touch end to end,
        which the quadrature handles (the current profile vanishes there).
        """
        rows = int(np.floor(np.sqrt(n_i)))
        while n_i % rows != 0 and rows > 1:
            rows -= 1
        cols = n_i // rows
        d = spacing_wl * wavelength
        if d < length_wl * wavelength:
            raise ValueError("spacing below the dipole length makes collinear "
                             "elements overlap")
        xs, ys = np.meshgrid(np.arange(cols) * d, np.arange(rows) * d)
        pos = np.column_stack([xs.ravel()[:n_i], ys.ravel()[:n_i], np.zeros(n_i)])
        return cls(wavelength=wavelength, length=length_wl * wavelength, positions=pos)


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre tensor rule with split panels and refinement control.

    Each dipole axis is split at its center feed point (the current profile
    has a kink there) and ``points`` nodes are placed per panel.  The rule is
    re-evaluated with doubled points until the relative change drops below
    ``rtol``; exceeding ``max_refinements`` doublings raises.
    """

    points: int = 32
    rtol: float = 1e-8
    max_refinements: int = 2

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("need at least 2 quadrature points per panel")
        if self.rtol <= 0:
            raise ValueError("rtol must be positive")


def _panel_rule(breaks: np.ndarray, points: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights over consecutive panels."""
    x, w = np.polynomial.legendre.leggauss(points)
    lo, hi = breaks[:-1], breaks[1:]
    mid = 0.5 * (lo + hi)
    rad = 0.5 * (hi - lo)
    nodes = (mid[:, None] + rad[:, None] * x[None, :]).ravel()
    weights = (rad[:, None] * w[None, :]).ravel()
    return nodes, weights


def _graded_breaks(half: float, levels: int, toward_positive: bool) -> np.ndarray:
    """Breakpoints on [-half, half], split at 0, with one half geometrically
    refined toward its outer end (where a facing dipole tip may sit)."""
    if levels <= 0:
        return np.array([-half, 0.0, half])
    tips = half * (1.0 - 0.5 ** np.arange(1, levels + 1))
    fine = np.concatenate([[0.0], tips, [half]])
    if toward_positive:
        return np.concatenate([[-half], fine])
    return np.concatenate([-fine[::-1], [half]])


def _grading_levels(dx2: float, dy: float, length: float) -> int:
    """How aggressively to refine toward the facing tips.

    The integrand is nearly singular where the inter-segment distance gets
    small; for end-to-end (collinear) pairs that happens at the facing tips.
    Panels shrink geometrically until they resolve the clearance between
    the closest points of the two segments.
    """
    if dy <= 0.99 * length:
        return 0  # no facing-tip approach (side-by-side range)
    gap2 = max(dy - length, 0.0) ** 2
    clearance = np.sqrt(dx2 + gap2)
    if clearance >= 0.5 * length:
        return 0
    # Cap where panels would sink below double-precision resolution of the
    # axial coordinates; the truncated tip contribution is ~2^-36 relative.
    if clearance <= 0.0:
        return 36
    return min(36, int(np.ceil(np.log2(0.5 * length / clearance))) + 2)


def _pair_integral(dx2: np.ndarray, dy: np.ndarray, length: float, k0: float,
                   points: int, levels: int = 0) -> np.ndarray:
    """Coupling integral for a batch of dipole pairs sharing a panel layout.

    ``dx2`` carries the squared center distance transverse to the dipole
    axis, ``dy`` the axial center offset (normalized to be >= 0, which the
    kernel's evenness permits).  ``levels`` grades the panels toward the
    facing tips for close end-to-end pairs.
    """
    half = 0.5 * length
    # source axis refined toward +half, observation axis toward -half:
    # with dy >= 0 the facing tips are s = +half, t = -half.
    s, ws = _panel_rule(_graded_breaks(half, levels, True), points)
    t, wt = _panel_rule(_graded_breaks(half, levels, False), points)
    sin_norm = np.sin(k0 * half) ** 2
    prof_s = np.sin(k0 * (half - np.abs(s)))  # current profile, source
    prof_t = np.sin(k0 * (half - np.abs(t)))

    # axial separation for every (pair, t, s) combination
    sep = dy[:, None, None] + t[None, :, None] - s[None, None, :]
    d = np.sqrt(dx2[:, None, None] + sep ** 2)
    ratio2 = (sep / d) ** 2
    bracket = (ratio2 * (3.0 / d ** 2 + 3j * k0 / d - k0 ** 2)
               - (1j * k0 + 1.0 / d) / d + k0 ** 2)
    kern = bracket * np.exp(-1j * k0 * d) / d
    front = 1j * ETA0 / (4.0 * np.pi * k0 * sin_norm)
    weighted = kern * (wt * prof_t)[None, :, None] * (ws * prof_s)[None, None, :]
    return front * weighted.sum(axis=(1, 2))


def _converged_pair_integral(dx2: np.ndarray, dy: np.ndarray, length: float,
                             k0: float, quad: QuadratureSpec) -> np.ndarray:
    dx2 = np.asarray(dx2, dtype=float)
    dy = np.abs(np.asarray(dy, dtype=float))  # kernel is even in axial offset
    levels = np.array([_grading_levels(x2, y, length) for x2, y in zip(dx2, dy)])
    out = np.empty(dx2.shape[0], dtype=complex)
    for lev in np.unique(levels):
        sel = levels == lev
        out[sel] = _converged_batch(dx2[sel], dy[sel], length, k0, quad, int(lev))
    return out


def _converged_batch(dx2, dy, length, k0, quad: QuadratureSpec, levels: int) -> np.ndarray:
    pts = quad.points
    val = _pair_integral(dx2, dy, length, k0, pts, levels)
    change = np.array([np.inf])  # unverified until a refinement succeeds
    for _ in range(quad.max_refinements):
        ref = _pair_integral(dx2, dy, length, k0, pts * 2, levels)
        change = np.abs(ref - val) / np.maximum(np.abs(ref), 1e-30)
        val, pts = ref, pts * 2
        if not np.all(np.isfinite(val)):
            break
        if change.max() <= quad.rtol:
            return val
    raise QuadratureConvergenceError(
        f"coupling integral stuck at relative change {change.max():.2e} "
        f"with {pts} points per panel")


def dipole_mutual_impedance(p: int, q: int, geom: DipoleGeometry,
                            quad: QuadratureSpec | None = None) -> complex:
    """Mutual impedance between dipoles ``p`` and ``q`` of the array."""
    if quad is None:
        quad = QuadratureSpec()
    if p == q:
        raise ValueError("self impedance is a design value, not an integral; "
                         "see build_ris_impedance")
    rp, rq = geom.positions[p], geom.positions[q]
    dx2 = np.array([(rq[0] - rp[0]) ** 2 + (rq[2] - rp[2]) ** 2])
    dy = np.array([rq[1] - rp[1]])
    if dx2[0] == 0.0 and abs(dy[0]) < geom.length:
        raise ValueError("dipoles overlap along their common axis")
    return complex(_converged_pair_integral(dx2, dy, geom.length, geom.k0, quad)[0])


def build_ris_impedance(geom: DipoleGeometry, z0: float,
                        quad: QuadratureSpec | None = None) -> np.ndarray:
    """Surface impedance matrix: design value ``z0`` on the diagonal, EMF
    integrals off it.

    The integral depends on the pair only through the transverse and axial
    center displacements, so a regular grid needs far fewer integrals than
    pairs; values are computed once per distinct displacement.
    """
    if quad is None:
        quad = QuadratureSpec()
    pos = geom.positions
    n = geom.n
    iu, ju = np.triu_indices(n, k=1)
    dx2 = (pos[ju, 0] - pos[iu, 0]) ** 2 + (pos[ju, 2] - pos[iu, 2]) ** 2
    dy = np.abs(pos[ju, 1] - pos[iu, 1])  # kernel is even in axial offset
    keys = np.round(np.column_stack([dx2, dy]) / max(geom.wavelength, 1e-30) * 1e12)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    first = np.full(uniq.shape[0], -1, dtype=int)
    for idx, inv in enumerate(inverse):
        if first[inv] < 0:
            first[inv] = idx
    vals = _converged_pair_integral(dx2[first], dy[first], geom.length, geom.k0, quad)
    z = np.zeros((n, n), dtype=complex)
    z[iu, ju] = vals[inverse]
    z = z + z.T
    np.fill_diagonal(z, z0)
    return z


def near_field_transmitter_link(geom: DipoleGeometry, r_wl: float, d: float,
                                quad: QuadratureSpec | None = None,
                                tx_positions=None) -> np.ndarray:
    """Deterministic coupling between transmit dipoles and the surface.

    By default a single transmit dipole sits at ``(d, 0, r_wl * wavelength)``
    — broadside distance ``d`` from the array plane origin along x, hovering
    ``r_wl`` wavelengths off the plane — parallel to the surface dipoles.
    Pass explicit ``tx_positions`` (m, 3) for other arrangements.  Returns
    the (n_i, n_t) mutual impedance block.
    """
    if quad is None:
        quad = QuadratureSpec()
    if tx_positions is None:
        tx_positions = np.array([[d, 0.0, r_wl * geom.wavelength]])
    tx = np.atleast_2d(np.asarray(tx_positions, dtype=float))
    if tx.shape[1] == 2:
        tx = np.hstack([tx, np.zeros((tx.shape[0], 1))])
    pos = geom.positions
    n_i, n_t = geom.n, tx.shape[0]
    ii, tt = np.meshgrid(np.arange(n_i), np.arange(n_t), indexing="ij")
    ii, tt = ii.ravel(), tt.ravel()
    dx2 = ((pos[ii, 0] - tx[tt, 0]) ** 2 + (pos[ii, 2] - tx[tt, 2]) ** 2)
    dy = pos[ii, 1] - tx[tt, 1]
    vals = _converged_pair_integral(dx2, dy, geom.length, geom.k0, quad)
    return vals.reshape(n_i, n_t)
