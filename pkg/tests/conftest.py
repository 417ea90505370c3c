"""Shared scenario builders for the test suite."""

import numpy as np

from bdris.netparams import PortLayout, Terminations, generate_rayleigh_scenario


def make_scenario(n_t, n_i, n_r, seed, pathgain_it=1e-4, pathgain_ri=1e-2,
                  z_ii=None, z0=50.0):
    """Matched-termination Rayleigh scenario with optional coupling matrix."""
    lay = PortLayout(n_t, n_i, n_r)
    term = Terminations.matched(lay, z0)
    if z_ii is None:
        z_ii = z0 * np.eye(n_i)
    params = generate_rayleigh_scenario(lay, pathgain_it, pathgain_ri, z_ii,
                                        seed, term=term)
    return params, term


def passive_z_ii(n_i, rng, z0=50.0, re_scale=0.6, im_scale=0.8):
    """Random symmetric surface impedance with strictly positive-definite
    real part (a passive, reciprocal coupling block)."""
    a = rng.standard_normal((n_i, n_i))
    a = (a + a.T) / 2.0
    b = rng.standard_normal((n_i, n_i))
    b = (b + b.T) / 2.0
    re = np.eye(n_i) + re_scale * a / max(np.linalg.norm(a, 2), 1e-12)
    im = im_scale * b / max(np.linalg.norm(b, 2), 1e-12)
    return z0 * (re + 1j * im)


def random_passive_network(layout, rng, z0=50.0):
    """Full random passive reciprocal multiport via a symmetric strict
    contraction: passivity of the scattering description carries over to a
    positive-real impedance matrix."""
    n = layout.n
    s = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    s = (s + s.T) / 2.0
    s *= 0.9 / np.linalg.norm(s, 2)
    eye = np.eye(n)
    return z0 * np.linalg.solve(eye - s, eye + s)


def random_terminations(layout, rng, z0=50.0):
    """Complex source/load impedances with positive resistance."""
    z_t = z0 * (0.3 + rng.random(layout.n_t)) + 1j * z0 * (rng.random(layout.n_t) - 0.5)
    z_r = z0 * (0.3 + rng.random(layout.n_r)) + 1j * z0 * (rng.random(layout.n_r) - 0.5)
    return Terminations(z_t=z_t, z_r=z_r, z0=z0)


def random_masked_b(topology, rng, scale=0.02):
    """Random symmetric susceptance respecting a topology mask."""
    n = topology.n_i
    b = rng.standard_normal((n, n)) * scale
    b = (b + b.T) / 2.0
    return b * topology.mask
