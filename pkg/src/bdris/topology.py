"""Reconfigurable-surface circuit topologies as symmetric boolean masks.

A topology fixes which entries of the RIS susceptance matrix are tunable:
True marks an admittance component that exists between a pair of RIS ports
(or a port and ground, on the diagonal).  All masks are symmetric with a
full True diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Topology", "make_mask", "optimal_bandwidth", "admittance_count"]


@dataclass(frozen=True)
class Topology:
    kind: str
    n_i: int
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.n_i, self.n_i):
            raise ValueError(f"mask must be {self.n_i}x{self.n_i}")
        if not np.array_equal(m, m.T):
            raise ValueError("mask must be symmetric")
        if not m.diagonal().all():
            raise ValueError("mask diagonal must be all True")
        object.__setattr__(self, "mask", m)

    @property
    def is_fully_connected(self) -> bool:
        return bool(self.mask.all())

    def free_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Upper-triangular True positions, row-major: the free variables."""
        i, j = np.nonzero(np.triu(self.mask))
        return i, j


def _band_mask(n_i: int, q: int) -> np.ndarray:
    if not 0 <= q <= n_i - 1:
        raise ValueError(f"bandwidth q must be in [0, {n_i - 1}], got {q}")
    idx = np.arange(n_i)
    return np.abs(idx[:, None] - idx[None, :]) <= q


def make_mask(kind: str, n_i: int, perm=None) -> Topology:
    """Build a named topology.

    ``kind`` is one of ``"single"``, ``"group:G"``, ``"tridiagonal"``,
    ``"band:q"``, ``"generalized:q"`` (requires ``perm``), ``"fully"``.
    """
    if n_i < 1:
        raise ValueError("n_i must be >= 1")
    base, _, arg = kind.partition(":")
    base = base.strip().lower()

    if base == "single":
        mask = np.eye(n_i, dtype=bool)
    elif base == "fully":
        mask = np.ones((n_i, n_i), dtype=bool)
    elif base == "tridiagonal":
        mask = _band_mask(n_i, min(1, n_i - 1))
    elif base == "group":
        g = int(arg)
        if g < 1 or n_i % g != 0:
            raise ValueError(f"group size {g} must divide n_i={n_i}")
        mask = np.kron(np.eye(n_i // g, dtype=bool), np.ones((g, g), dtype=bool))
    elif base == "band":
        mask = _band_mask(n_i, int(arg))
    elif base == "generalized":
        # a band topology on relabeled ports: P band(q) P^T; the permutation
        # comes either as the perm argument or inline ("generalized:q:2,0,1")
        q_str, _, perm_str = arg.partition(":")
        if perm_str:
            if perm is not None:
                raise ValueError("permutation given both inline and as argument")
            perm = [int(s) for s in perm_str.split(",")]
        if perm is None:
            raise ValueError("generalized topology needs a port permutation")
        perm = np.asarray(perm, dtype=int)
        if sorted(perm.tolist()) != list(range(n_i)):
            raise ValueError("perm must be a permutation of 0..n_i-1")
        band = _band_mask(n_i, int(q_str))
        # relabel: mask[perm[a], perm[b]] = band[a, b]
        inv = np.argsort(perm)
        mask = band[np.ix_(inv, inv)]
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return Topology(kind=kind, n_i=n_i, mask=mask)


def optimal_bandwidth(n_t: int, n_r: int, n_i: int) -> int:
    """Smallest band bandwidth that loses nothing against fully-connected.

    Equals ``2*min(n_t, n_r) - 1`` when the surface is large relative to the
    arrays, capped at ``n_i - 1`` (the fully-connected band).
    """
    if min(n_t, n_r, n_i) < 1:
        raise ValueError("port counts must be >= 1")
    return min(2 * min(n_t, n_r) - 1, n_i - 1)


def admittance_count(topology: Topology) -> int:
    """Number of tunable components: True entries on/above the diagonal."""
    return int(np.triu(topology.mask).sum())
