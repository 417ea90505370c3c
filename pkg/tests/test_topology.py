"""Topology masks, free-entry counting, and the optimal bandwidth formula."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdris.topology import (Topology, admittance_count, make_mask,
                            optimal_bandwidth)
from oracles import count_free_entries, mask_by_enumeration


@pytest.mark.parametrize("kind,args", [
    ("single", {}),
    ("fully", {}),
    ("group", {"g": 3}),
    ("band", {"q": 2}),
])
def test_masks_match_enumeration(kind, args):
    n = 6
    spec = {"single": "single", "fully": "fully",
            "group": "group:3", "band": "band:2"}[kind]
    topo = make_mask(spec, n)
    assert np.array_equal(topo.mask, mask_by_enumeration(kind, n, **args))


def test_tridiagonal_is_band_one():
    assert np.array_equal(make_mask("tridiagonal", 7).mask,
                          make_mask("band:1", 7).mask)


@given(st.integers(0, 10 ** 6), st.integers(2, 9), st.integers(0, 8))
@settings(max_examples=40, deadline=None)
def test_generalized_band_is_permuted_band(seed, n, q):
    q = min(q, n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    spec = f"generalized:{q}:" + ",".join(map(str, perm))
    topo = make_mask(spec, n)
    assert np.array_equal(topo.mask,
                          mask_by_enumeration("generalized", n, q=q, perm=perm))
    # a permuted band keeps the free-entry budget of the band
    assert admittance_count(topo) == admittance_count(make_mask(f"band:{q}", n))


def test_free_indices_cover_upper_triangle():
    topo = make_mask("group:2", 6)
    ii, jj = topo.free_indices()
    assert np.all(ii <= jj)
    assert len(ii) == count_free_entries(topo.mask)


@pytest.mark.parametrize("spec,n,count", [
    ("single", 8, 8),                 # one susceptance per element
    ("fully", 8, 36),                 # full upper triangle
    ("band:1", 8, 15),
    ("band:3", 8, 8 + 7 + 6 + 5),
    ("group:4", 8, 2 * 10),
])
def test_admittance_count(spec, n, count):
    assert admittance_count(make_mask(spec, n)) == count


class TestOptimalBandwidth:
    def test_formula_cases(self):
        # the loss-free bandwidth grows with the smaller terminal array and
        # saturates at the surface size
        assert optimal_bandwidth(1, 1, 8) == 1
        assert optimal_bandwidth(2, 2, 8) == 3
        assert optimal_bandwidth(3, 2, 12) == 3
        assert optimal_bandwidth(4, 4, 64) == 7
        assert optimal_bandwidth(8, 8, 6) == 5    # capped by n_i - 1

    @given(st.integers(1, 8), st.integers(1, 8), st.integers(2, 40))
    @settings(max_examples=60, deadline=None)
    def test_band_never_exceeds_fully(self, n_t, n_r, n_i):
        q = optimal_bandwidth(n_t, n_r, n_i)
        assert 1 <= q <= n_i - 1
        assert admittance_count(make_mask(f"band:{q}", n_i)) <= \
            admittance_count(make_mask("fully", n_i))


class TestValidation:
    def test_mask_must_be_symmetric(self):
        bad = np.ones((4, 4), dtype=bool)
        bad[0, 1] = False
        with pytest.raises(ValueError):
            Topology(kind="custom", n_i=4, mask=bad)

    def test_mask_needs_diagonal(self):
        bad = np.zeros((3, 3), dtype=bool)
        with pytest.raises(ValueError):
            Topology(kind="custom", n_i=3, mask=bad)

    def test_group_size_must_divide(self):
        with pytest.raises(ValueError):
            make_mask("group:4", 6)

    def test_band_out_of_range(self):
        with pytest.raises(ValueError):
            make_mask("band:9", 8)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_mask("hexagonal", 8)
