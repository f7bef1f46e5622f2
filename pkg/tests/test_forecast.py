import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_exppoly_spec
from perinet.core import CountSeries, GeneralKernel, JumpRate, ModelSpec, PeriodicBaseline
from perinet.errors import ConfigurationError, DegenerateLossDifferential, PreconditionError
from perinet.forecast import (ForecastReport, _paths_forecast, bh_adjust, bic, compare_reports,
                              diebold_mariano, forecast, rmse, rolling_forecast)
from perinet.inference import intensity_path
from perinet.simulate import SimulationConfig, simulate_direct

finite = st.floats(-10, 10, allow_nan=False)


def _linear_spec(phi, mu=1.0):
    return ModelSpec(1, 1, PeriodicBaseline.constant(mu, 1), GeneralKernel.scalar(phi))


class TestForecast:
    def test_zero_kernel_returns_baseline(self):
        spec = ModelSpec(1, 2, PeriodicBaseline(np.array([[1.0], [3.0]])),
                         GeneralKernel.scalar([0.0], p=2))
        pred = forecast(spec, CountSeries(np.array([[5], [2], [7]])), 4)
        np.testing.assert_array_equal(pred[:, 0], [3.0, 1.0, 3.0, 1.0])

    def test_hand_recursion(self):
        pred = forecast(_linear_spec([0.5]), CountSeries(np.array([[4]])), 3)
        np.testing.assert_array_equal(pred[:, 0], [3.0, 2.5, 2.25])

    def test_exp_matches_general_truncation(self, rng):
        spec = random_exppoly_spec(rng, d=3, jump="identity")
        gen = spec.replace(kernel=GeneralKernel(spec.kernel.table(400)))
        hist = simulate_direct(spec, SimulationConfig(120, seed=2))
        a = forecast(spec, CountSeries(hist.counts), 10)
        b = forecast(gen, CountSeries(hist.counts), 10)
        np.testing.assert_allclose(a, b, rtol=1e-10)

    def test_one_step_is_intensity_for_nonlinear(self, rng):
        spec = random_exppoly_spec(rng, d=2, jump="softplus")
        data = simulate_direct(spec, SimulationConfig(60, seed=1))
        lam = intensity_path(data, spec)
        np.testing.assert_allclose(forecast(spec, data.window(1, 40), 1)[0], lam[39], rtol=1e-13)

    def test_monte_carlo_agrees_with_exact_recursion(self, rng):
        spec = random_exppoly_spec(rng, d=2, jump="identity")
        hist = CountSeries(simulate_direct(spec, SimulationConfig(50, seed=3)).counts)
        exact = forecast(spec, hist, 5)
        mc = _paths_forecast(spec, hist, 5, np.arange(20_000), 0, True)
        np.testing.assert_allclose(mc, exact, rtol=0.02)

    def test_threads_do_not_change_forecast(self, rng):
        spec = random_exppoly_spec(rng, d=2, jump="softplus")
        hist = CountSeries(simulate_direct(spec, SimulationConfig(30)).counts)
        a = forecast(spec, hist, 4, paths=200, seed=5)
        b = forecast(spec, hist, 4, paths=200, seed=5, threads=3)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_bad_horizon(self):
        with pytest.raises(ConfigurationError):
            forecast(_linear_spec([0.5]), CountSeries(np.array([[1]])), 0)

    def test_width_mismatch(self):
        with pytest.raises(ConfigurationError):
            forecast(_linear_spec([0.5]), CountSeries(np.zeros((3, 2), dtype=int)), 1)


class TestRolling:
    def _data(self):
        spec = _linear_spec([0.4, 0.2])
        return spec, simulate_direct(spec, SimulationConfig(40, seed=6))

    def test_h1_is_intensity_path(self):
        spec, data = self._data()
        roll = rolling_forecast(spec, data, 20, 1)
        np.testing.assert_allclose(roll.predictions, data.intensities[20:], rtol=1e-13)
        np.testing.assert_array_equal(roll.anchors, np.arange(20, 40))

    def test_full_tail_is_single_forecast(self):
        spec, data = self._data()
        roll = rolling_forecast(spec, data, 25, 15)
        np.testing.assert_allclose(roll.predictions, forecast(spec, data.window(1, 26), 15))
        assert set(roll.anchors.tolist()) == {25}

    def test_anchor_schedule(self):
        spec, data = self._data()
        roll = rolling_forecast(spec, data, 30, 4)
        assert roll.anchors.tolist() == [30] * 4 + [34] * 4 + [38] * 2
        np.testing.assert_array_equal(roll.times, np.arange(31, 41))

    def test_refit_called_per_anchor(self):
        spec, data = self._data()
        seen = []

        def refit(past):
            seen.append(past.T)
            return spec

        rolling_forecast(spec, data, 30, 4, refit=refit)
        assert seen == [30, 34, 38]

    def test_origin_range(self):
        spec, data = self._data()
        with pytest.raises(ConfigurationError):
            rolling_forecast(spec, data, 40, 1)


class TestRmse:
    def test_examples(self):
        assert rmse(np.array([[3.0], [4.0]]), np.zeros((2, 1)))[0] == pytest.approx(math.sqrt(12.5))
        np.testing.assert_allclose(rmse(np.full((3, 2), 5.0), np.full((3, 2), 3.0)), [2.0, 2.0])
        assert rmse(np.ones((2, 2)), np.ones((2, 2))).sum() == 0

    def test_errors(self):
        with pytest.raises(PreconditionError):
            rmse(np.zeros((0, 1)), np.zeros((0, 1)))
        with pytest.raises(PreconditionError):
            rmse(np.zeros((2, 1)), np.zeros((3, 1)))

    @given(arrays(np.float64, (8, 2), elements=finite), arrays(np.float64, (8, 2), elements=finite),
           st.permutations(list(range(8))))
    def test_permutation_invariant_and_nonnegative(self, a, b, perm):
        r = rmse(a, b)
        assert np.all(r >= 0)
        np.testing.assert_allclose(rmse(a[perm], b[perm]), r, rtol=1e-12, atol=1e-12)


class TestDieboldMariano:
    def test_identical_series_degenerate(self):
        e = np.array([1.0, 2.0, 3.0, 4.0])
        with pytest.raises(DegenerateLossDifferential):
            diebold_mariano(e, e)

    def test_needs_four_observations(self):
        with pytest.raises(PreconditionError):
            diebold_mariano([1, 2, 3], [0, 0, 0])

    def test_pvalue_two_sided_normal(self):
        res = diebold_mariano([1.0, 2, 1, 2, 1], [2.0, 2, 2, 2, 2])
        assert res.pvalue == pytest.approx(2 * (1 - 0.5 * (1 + math.erf(abs(res.statistic) / math.sqrt(2)))))

    def test_negative_variance_falls_back(self):
        ea = np.array([0.5, 1.5, -2.0, 0.3, 1.1, -0.7, 2.2, 0.1])
        eb = np.array([1.0, -1.0, 1.0, 1.2, -0.4, 0.9, 1.0, 0.8])
        assert diebold_mariano(ea, eb, 2).statistic == diebold_mariano(ea, eb, 1).statistic

    def test_harvey_shrinks_statistic(self):
        ea = np.array([1.0, 2, 1, 2, 1, 3, 0.5, 1])
        eb = np.array([2.0, 2, 2, 2, 2, 2, 2, 2])
        plain = diebold_mariano(ea, eb, 2)
        adj = diebold_mariano(ea, eb, 2, harvey=True)
        assert abs(adj.statistic) < abs(plain.statistic)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, 12, elements=finite), arrays(np.float64, 12, elements=finite),
           st.integers(1, 3))
    def test_antisymmetric(self, a, b, h):
        assume(np.var(a**2 - b**2) > 1e-6)
        ab = diebold_mariano(a, b, h)
        ba = diebold_mariano(b, a, h)
        assert ab.statistic == pytest.approx(-ba.statistic, rel=1e-9)
        assert ab.pvalue == pytest.approx(ba.pvalue, rel=1e-9)


class TestBenjaminiHochberg:
    def test_example(self):
        np.testing.assert_array_equal(bh_adjust([0.01, 0.02, 0.03, 0.04]), [0.04] * 4)

    def test_caps_at_one(self):
        assert bh_adjust([0.9, 0.95]).max() <= 1.0

    def test_rejects_invalid(self):
        with pytest.raises(PreconditionError):
            bh_adjust([0.1, 1.2])

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_monotone_and_dominating(self, p):
        p = np.array(p)
        adj = bh_adjust(p)
        assert np.all(adj >= p - 1e-15) and np.all(adj <= 1)
        order = np.argsort(p, kind="stable")
        assert np.all(np.diff(adj[order]) >= -1e-15)


class TestBic:
    def test_values(self):
        assert bic(-100.0, 3, 1000) == 3 * math.log(1000) + 200
        assert bic(0.0, 2, 1) == 0.0

    def test_n_obs(self):
        with pytest.raises(PreconditionError):
            bic(0.0, 1, 0)


class TestReport:
    def _pair(self):
        actual = np.array([[1.0, 2.0], [3.0, 1.0], [0.0, 4.0], [2.0, 2.0], [5.0, 1.0]])
        pa = actual + np.array([[0.5, 0.1], [-0.2, 0.3], [0.4, -0.1], [0.1, 0.2], [-0.3, 0.4]])
        pb = actual.copy()
        pb[:, 0] += 1.0
        pb[:, 1] = pa[:, 1]
        times = np.arange(11, 16)
        a = ForecastReport(1, 10, times, actual, {"ours": pa}, bic={"ours": -5.0})
        b = ForecastReport(1, 10, times, actual, {"pnar": pb}, bic={"pnar": 3.0})
        return a, b

    def test_compare_flags_degenerate_node(self):
        a, b = self._pair()
        merged = compare_reports(a, b)
        assert math.isnan(merged.dm_statistic[1]) and merged.dm_pvalue[1] == 1.0
        assert merged.dm_statistic[0] < 0
        assert merged.flags and merged.bic == {"ours": -5.0, "pnar": 3.0}
        assert merged.table()[0] == ["district", "RMSE_ours", "RMSE_pnar", "DM", "p_adjusted"]

    def test_roundtrip(self, tmp_path):
        a, b = self._pair()
        merged = compare_reports(a, b)
        merged.save(tmp_path / "r.json")
        back = ForecastReport.load(tmp_path / "r.json")
        assert json.dumps(back.to_dict()) == json.dumps(merged.to_dict())
        np.testing.assert_array_equal(back.rmse["ours"], merged.rmse["ours"])
        np.testing.assert_array_equal(back.dm_adjusted, merged.dm_adjusted)

    def test_mismatched_windows(self):
        a, b = self._pair()
        b.times = b.times + 1
        with pytest.raises(PreconditionError):
            compare_reports(a, b)


class TestNonlinearForecast:
    def test_softplus_forecast_is_positive_and_finite(self):
        spec = ModelSpec(1, 1, PeriodicBaseline(np.array([[-0.5]])),
                         GeneralKernel.scalar([0.3]), JumpRate.softplus())
        pred = forecast(spec, CountSeries(np.array([[3]])), 5, paths=500)
        assert np.all(np.isfinite(pred)) and np.all(pred > 0)
