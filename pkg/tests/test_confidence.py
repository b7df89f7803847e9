"""PM-EB confidence sequence and Hoeffding interval."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftwatch import (
    BACKEND,
    hoeffding_halfwidth,
    pmeb_fresh,
    pmeb_lower,
    pmeb_lower_path,
    pmeb_update,
)
from shiftwatch.confidence import _reference, pmeb_best_lower_path
from shiftwatch.errors import InvalidInput

REL = 1e-12


class TestHoeffding:
    def test_closed_form_200(self):
        expected = math.sqrt(math.log(40.0) / 400.0)
        assert hoeffding_halfwidth(200, 0.05) == pytest.approx(expected, rel=REL)

    def test_closed_form_50(self):
        expected = math.sqrt(math.log(40.0) / 100.0)
        assert hoeffding_halfwidth(50, 0.05) == pytest.approx(expected, rel=REL)

    def test_quadruple_n_halves_width(self):
        assert hoeffding_halfwidth(800, 0.05) == pytest.approx(
            hoeffding_halfwidth(200, 0.05) / 2.0, rel=REL
        )

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidInput):
            hoeffding_halfwidth(0, 0.05)
        with pytest.raises(InvalidInput):
            hoeffding_halfwidth(10, 0.0)
        with pytest.raises(InvalidInput):
            hoeffding_halfwidth(10, 1.0)

    @given(st.integers(1, 10_000), st.floats(0.001, 0.5), st.floats(0.001, 0.5))
    def test_monotonicity(self, n, a1, a2):
        lo, hi = sorted((a1, a2))
        assert hoeffding_halfwidth(n, lo) >= hoeffding_halfwidth(n, hi)
        assert hoeffding_halfwidth(n + 1, lo) < hoeffding_halfwidth(n, lo)


class TestPmEb:
    def test_fresh_state_vacuous(self):
        state = pmeb_fresh(0.05)
        assert pmeb_lower(state) == 0.0
        assert state.t == 0

    def test_rejects_bad_alpha(self):
        with pytest.raises(InvalidInput):
            pmeb_fresh(0.0)
        with pytest.raises(InvalidInput):
            pmeb_fresh(1.0)

    def test_rejects_out_of_range_observation(self):
        state = pmeb_fresh(0.05)
        with pytest.raises(InvalidInput):
            pmeb_update(state, 1.5)
        with pytest.raises(InvalidInput):
            pmeb_update(state, -0.1)

    def test_single_one_hand_computed(self):
        # First update at alpha=0.05: mu_0 = 1/2, sigma2_0 = 1/4, so
        # lambda_1 = min(sqrt(2 ln20 / (0.25 * 1 * ln2)), 1/2) = 1/2,
        # psi_E(1/2) = (-ln(1/2) - 1/2) / 4, and the raw bound
        # (0.5 - ln20 - psi) / 0.5 is deeply negative, clipping to 0.
        state = pmeb_update(pmeb_fresh(0.05), 1.0)
        psi = (-math.log(0.5) - 0.5) / 4.0
        assert state.t == 1
        assert state.sum_l == pytest.approx(0.5, rel=REL)
        assert state.sum_lx == pytest.approx(0.5, rel=REL)
        assert state.sum_psi == pytest.approx(psi, rel=REL)
        raw = (0.5 - math.log(20.0) - psi) / 0.5
        assert raw < 0.0
        assert state.best_lower == 0.0

    def test_all_zeros_stream(self):
        state = pmeb_fresh(0.05)
        for _ in range(100):
            state = pmeb_update(state, 0.0)
            assert state.best_lower == 0.0

    def test_all_ones_stream_approaches_one(self):
        path = pmeb_best_lower_path(np.ones(5000), 0.05)
        assert np.all(np.diff(path) >= 0.0)
        assert path[-1] > 0.95
        assert path.max() <= 1.0

    def test_streaming_matches_batch_path(self):
        rng = np.random.default_rng(0)
        xs = rng.random(300)
        state = pmeb_fresh(0.1)
        best = []
        for x in xs:
            state = pmeb_update(state, x)
            best.append(state.best_lower)
        assert np.array_equal(np.array(best), pmeb_best_lower_path(xs, 0.1))

    def test_best_lower_is_running_max_of_path(self):
        rng = np.random.default_rng(1)
        xs = rng.random(200)
        path = pmeb_lower_path(xs, 0.05)
        assert np.array_equal(
            pmeb_best_lower_path(xs, 0.05), np.maximum.accumulate(path)
        )

    def test_determinism(self):
        xs = np.random.default_rng(2).random(100)
        a = pmeb_best_lower_path(xs, 0.05)
        b = pmeb_best_lower_path(xs, 0.05)
        assert np.array_equal(a, b)

    def test_path_rejects_bad_input(self):
        with pytest.raises(InvalidInput):
            pmeb_lower_path([0.5, 1.2], 0.05)
        with pytest.raises(InvalidInput):
            pmeb_lower_path([[0.5]], 0.05)
        with pytest.raises(InvalidInput):
            pmeb_lower_path([0.5], 0.0)

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=200),
        st.floats(0.01, 0.5),
    )
    def test_bound_properties(self, xs, alpha):
        path = pmeb_best_lower_path(np.array(xs), alpha)
        assert np.all(path >= 0.0) and np.all(path <= 1.0)
        assert np.all(np.diff(path) >= 0.0)


class TestBackends:
    def test_backend_identifies_itself(self):
        assert BACKEND in ("cython", "python")

    def test_reference_matches_active_backend_bitwise(self):
        # The compiled kernel and the pure-Python fallback must agree
        # exactly so results never depend on which backend loaded.
        rng = np.random.default_rng(7)
        for alpha in (0.01, 0.05, 0.25):
            xs = rng.random(500)
            active = pmeb_lower_path(xs, alpha)
            ref = _reference.lower_path(xs, math.log(1.0 / alpha))
            assert np.array_equal(active, ref)

    def test_reference_step_matches_active_step(self):
        from shiftwatch.confidence import _backend

        state = (0, 0.0, 0.0, 0.0, 0.0, 0.0)
        log_inv_alpha = math.log(20.0)
        rng = np.random.default_rng(11)
        for x in rng.random(50):
            out_a = _backend.step(*state, log_inv_alpha, float(x))
            out_r = _reference.step(*state, log_inv_alpha, float(x))
            assert out_a == out_r
            state = out_a[:6]
