"""Channel model equivalences, the cascade reduction, and surface states.

The load-bearing facts: the exact channel computed by full inversion, by the
explicit block formula, and through the compact cascade must be the same
matrix; the surface response is unitary symmetric; each approximation's
cascade agrees with its direct formula; and the effective surface admittance
keeps a positive-definite real part for passive networks.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdris.channels import (NotPositiveDefiniteError, b_to_bbar, bbar_to_b,
                            channel_app1, channel_app2, channel_app3,
                            channel_compact, channel_exact, channel_explicit,
                            decompose, make_ris_state, theta_from_bbar)
from bdris.netparams import (NetworkParameters, PortLayout, Terminations,
                             generate_rayleigh_scenario)
from bdris.topology import make_mask
from conftest import (make_scenario, passive_z_ii, random_masked_b,
                      random_passive_network, random_terminations)
from oracles import cayley_matrix, cayley_scalar


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


class TestExactRoutes:
    @pytest.mark.parametrize("seed", range(8))
    def test_three_routes_agree(self, seed):
        rng = np.random.default_rng(seed)
        n_t, n_i, n_r = rng.integers(1, 4), rng.integers(2, 9), rng.integers(1, 4)
        params, term = make_scenario(n_t, n_i, n_r, seed=seed,
                                     z_ii=passive_z_ii(n_i, rng))
        b = random_masked_b(make_mask("fully", n_i), rng)
        h_inv = channel_exact(params, term, b)
        h_blk = channel_explicit(params, term, b)
        dec = decompose(params, term, "exact")
        h_cas = channel_compact(dec, make_ris_state(dec, b))
        assert rel(h_blk, h_inv) < 1e-12
        assert rel(h_cas, h_inv) < 1e-12

    def test_routes_agree_with_complex_terminations(self):
        rng = np.random.default_rng(99)
        lay = PortLayout(2, 5, 2)
        term = random_terminations(lay, rng)
        z = random_passive_network(lay, rng)
        params = NetworkParameters(lay, z)
        b = random_masked_b(make_mask("fully", 5), rng)
        h_inv = channel_exact(params, term, b)
        h_blk = channel_explicit(params, term, b)
        dec = decompose(params, term, "exact")
        h_cas = channel_compact(dec, make_ris_state(dec, b))
        assert rel(h_blk, h_inv) < 1e-12
        assert rel(h_cas, h_inv) < 1e-12

    def test_scalar_surface(self):
        # n_i = 1 exercises every degenerate shape at once
        params, term = make_scenario(1, 1, 1, seed=5)
        b = np.array([[0.013]])
        h_inv = channel_exact(params, term, b)
        dec = decompose(params, term, "exact")
        h_cas = channel_compact(dec, make_ris_state(dec, b))
        assert rel(h_cas, h_inv) < 1e-12


class TestSurfaceState:
    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_response_unitary_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        n_i = int(rng.integers(1, 9))
        params, term = make_scenario(1, n_i, 1, seed=seed,
                                     z_ii=passive_z_ii(n_i, rng))
        dec = decompose(params, term, "exact")
        state = make_ris_state(dec, random_masked_b(make_mask("fully", n_i), rng))
        th = state.theta_bar
        assert np.linalg.norm(th.conj().T @ th - np.eye(n_i)) < 1e-12 * n_i
        assert np.linalg.norm(th - th.T) < 1e-12 * max(np.linalg.norm(th), 1)

    def test_state_matches_dense_reference(self):
        rng = np.random.default_rng(1)
        params, term = make_scenario(1, 6, 1, seed=1, z_ii=passive_z_ii(6, rng))
        dec = decompose(params, term, "exact")
        b = random_masked_b(make_mask("fully", 6), rng)
        state = make_ris_state(dec, b)
        assert rel(state.theta_bar, cayley_matrix(state.bbar_i, dec.y0)) < 1e-13
        assert rel(theta_from_bbar(dec, state.bbar_i), state.theta_bar) == 0

    def test_b_bbar_roundtrip(self):
        rng = np.random.default_rng(2)
        params, term = make_scenario(1, 7, 1, seed=2, z_ii=passive_z_ii(7, rng))
        dec = decompose(params, term, "exact")
        b = random_masked_b(make_mask("fully", 7), rng)
        assert rel(bbar_to_b(dec, b_to_bbar(dec, b)), b) < 1e-12

    def test_asymmetric_b_rejected(self):
        params, term = make_scenario(1, 3, 1, seed=0)
        dec = decompose(params, term, "exact")
        bad = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        with pytest.raises(ValueError):
            make_ris_state(dec, bad)

    def test_singular_b_is_fine(self):
        # all-zero susceptance (open-circuit loads) must not blow up the
        # admittance-side formulas; with a direct link present the channel
        # is well away from zero so the routes can be compared meaningfully
        rng = np.random.default_rng(3)
        lay = PortLayout(2, 5, 2)
        term = Terminations.matched(lay)
        params = NetworkParameters(lay, random_passive_network(lay, rng))
        b = np.zeros((5, 5))
        h_inv = channel_exact(params, term, b)
        dec = decompose(params, term, "exact")
        h_cas = channel_compact(dec, make_ris_state(dec, b))
        assert rel(h_cas, h_inv) < 1e-12

    def test_open_circuit_surface_does_not_scatter(self):
        # with no direct link and open-circuit loads the end-to-end channel
        # must vanish: the direct term exactly cancels the cascade one
        params, term = make_scenario(2, 5, 2, seed=3)
        dec = decompose(params, term, "exact")
        h = channel_compact(dec, make_ris_state(dec, np.zeros((5, 5))))
        scale = np.linalg.norm(dec.hbar_ri) * np.linalg.norm(dec.hbar_it)
        assert np.linalg.norm(h) < 1e-12 * scale


class TestApproximations:
    @pytest.mark.parametrize("model,direct", [
        ("app1", channel_app1), ("app2", channel_app2), ("app3", channel_app3)])
    def test_cascade_matches_direct_formula(self, model, direct):
        rng = np.random.default_rng(11)
        params, term = make_scenario(2, 6, 2, seed=11, z_ii=passive_z_ii(6, rng))
        dec = decompose(params, term, model)
        b = random_masked_b(make_mask("fully", 6), rng)
        h_dir = direct(params, term, b)
        h_cas = channel_compact(dec, make_ris_state(dec, b))
        assert rel(h_cas, h_dir) < 1e-11

    def test_unit_surface_model_uses_classic_phase_response(self):
        # with W = y0 I the transformed susceptance is b/y0 and the surface
        # response reduces to the textbook Cayley form
        params, term = make_scenario(1, 4, 1, seed=7)
        dec = decompose(params, term, "app3")
        rng = np.random.default_rng(7)
        b = random_masked_b(make_mask("fully", 4), rng)
        state = make_ris_state(dec, b)
        classic = cayley_matrix(b, term.y0)   # theta = (y0 I + iB)^-1 (y0 I - iB)
        assert rel(state.theta_bar, classic) < 1e-12

    def test_single_element_phase(self):
        # scalar sanity: unit-surface response is a pure phase
        params, term = make_scenario(1, 1, 1, seed=9)
        dec = decompose(params, term, "app3")
        state = make_ris_state(dec, np.array([[0.004]]))
        assert abs(abs(state.theta_bar[0, 0]) - 1.0) < 1e-14
        assert abs(state.theta_bar[0, 0] - cayley_scalar(0.004, term.y0)) < 1e-14


class TestEffectiveAdmittance:
    @pytest.mark.parametrize("seed", range(12))
    def test_real_part_positive_definite_for_passive_networks(self, seed):
        rng = np.random.default_rng(seed)
        lay = PortLayout(2, 6, 2)
        term = random_terminations(lay, rng)
        params = NetworkParameters(lay, random_passive_network(lay, rng))
        dec = decompose(params, term, "exact")
        w = np.linalg.eigvalsh(dec.re_ybar_ii)
        assert w[0] > 0, f"effective admittance lost positivity: {w[0]}"

    def test_active_surface_rejected(self):
        lay = PortLayout(1, 3, 1)
        term = Terminations.matched(lay)
        # a gain medium in the surface block violates the passivity premise
        z_ii = np.diag([-30.0 + 0j, 50.0, 50.0])
        z_it = 0.01 * np.ones((3, 1), dtype=complex)
        z_ri = 0.01 * np.ones((1, 3), dtype=complex)
        params = NetworkParameters.from_blocks(
            lay, z_tt=50.0 * np.eye(1), z_it=z_it, z_ii=z_ii, z_ri=z_ri,
            z_rt=np.zeros((1, 1)), z_rr=50.0 * np.eye(1))
        with pytest.raises(NotPositiveDefiniteError):
            decompose(params, term, "exact")


class TestModelCollapse:
    def test_exact_collapses_onto_unilateral_when_feedback_is_cut(self):
        # zeroing the blocks the unilateral assumption discards must make
        # the exact and approximate models literally identical
        rng = np.random.default_rng(15)
        lay = PortLayout(2, 5, 2)
        term = Terminations.matched(lay)
        z_it = 0.05 * (rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2)))
        z_ri = 0.05 * (rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5)))
        z_rt = 0.01 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        z_ii = passive_z_ii(5, rng)
        params = NetworkParameters.from_blocks(
            lay, z_tt=50 * np.eye(2), z_it=z_it, z_ii=z_ii, z_ri=z_ri,
            z_rt=z_rt, z_rr=50 * np.eye(2))
        cut = params.z.copy()
        lay_sl = {g: lay.group_slice(g) for g in "TIR"}
        cut[lay_sl["T"], lay_sl["I"]] = 0    # no surface-to-source feedback
        cut[lay_sl["T"], lay_sl["R"]] = 0
        cut[lay_sl["I"], lay_sl["R"]] = 0
        params_cut = NetworkParameters(lay, cut)

        b = random_masked_b(make_mask("fully", 5), rng)
        h_exact = channel_exact(params_cut, term, b)
        h_app1 = channel_app1(params_cut, term, b)
        assert rel(h_app1, h_exact) < 1e-12
