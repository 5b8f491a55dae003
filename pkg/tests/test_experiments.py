import json
from dataclasses import replace

import numpy as np
import pytest

from shiftdet.experiments import (DET_KINDS, SweepRow, asymptotic_sweep,
                                  compute_determinant, fit_decay_slope,
                                  limit_determinants, m_vs_m0,
                                  verify_factorization)
from shiftdet.kernels import (ConfigError, FunctionSpec, NumericsConfig,
                              ShiftSpec, problem_config_from_json)


@pytest.fixture(scope="module")
def standard_report(standard_cfg):
    return verify_factorization(standard_cfg)


class TestVerifyFactorization:
    def test_standard_residuals(self, standard_report):
        assert standard_report.r1 < 1e-8
        assert standard_report.r2 < 1e-8
        assert standard_report.r3 < 1e-4

    def test_standard_certified(self, standard_report):
        assert all(standard_report.certified.values())

    def test_report_values_consistent(self, standard_report):
        rep = standard_report
        v = rep.det_V.value
        assert abs(v - rep.det_Vtilde.value * rep.det_W.value) < 1e-8 * abs(v)
        assert abs(rep.det_W.value - rep.det_M_loop.value) < 1e-8 * abs(v)
        assert abs(rep.det_M_loop.value
                   - rep.det_N_line.value) < 1e-3 * abs(v)

    def test_config_echo_reparses(self, standard_report, standard_cfg):
        echo = json.loads(json.dumps(standard_report.config_echo))
        back = problem_config_from_json(echo)
        assert back.x == standard_cfg.x
        assert back.numerics.m_loop == standard_cfg.numerics.m_loop

    def test_beyond_partial_fractions(self, nonintegrable_cfg):
        rep = verify_factorization(nonintegrable_cfg)
        assert rep.r1 < 1e-8
        assert rep.r2 < 1e-8

    def test_trivial_amplitude(self, trivial_cfg):
        rep = verify_factorization(trivial_cfg)
        for det in (rep.det_V, rep.det_Vtilde, rep.det_W, rep.det_M_loop,
                    rep.det_N_line):
            assert abs(det.value - 1.0) < 1e-12
        assert rep.r1 < 1e-12 and rep.r2 < 1e-12 and rep.r3 < 1e-12

    def test_doubled_resolution_stays_at_floor(self, standard_cfg):
        fine = replace(standard_cfg, numerics=NumericsConfig(
            n_interval=2 * standard_cfg.resolved_n(), m_loop=512,
            m_line=800))
        rep = verify_factorization(fine)
        assert rep.r1 < 1e-12
        assert rep.r2 < 1e-12

    def test_truncated_line_rule_cross_check(self, standard_cfg):
        alt = replace(standard_cfg, numerics=NumericsConfig(
            line_rule="truncated", line_truncation=100.0))
        rep = verify_factorization(alt)
        assert rep.r1 < 1e-8
        assert rep.r2 < 1e-8
        assert rep.r3 < 1e-2   # O(1/T) truncation tail dominates here


@pytest.fixture(scope="module")
def sweep_rows(standard_cfg):
    return asymptotic_sweep(standard_cfg, [25.0, 50.0, 100.0, 200.0, 400.0])


class TestAsymptoticSweep:
    def test_errors_strictly_decrease(self, sweep_rows):
        errs = [r.err for r in sweep_rows]
        assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))

    def test_doubling_halves_error(self, sweep_rows):
        by_x = {r.x: r for r in sweep_rows}
        for x in (100.0, 200.0):
            ratio = by_x[x].err / by_x[2 * x].err
            assert 1.5 < ratio < 3.0

    def test_slope_near_minus_one(self, sweep_rows):
        slope = fit_decay_slope(sweep_rows)
        assert -1.3 < slope < -0.7

    def test_limit_is_x_independent(self, standard_cfg):
        lim50 = limit_determinants(replace(standard_cfg, x=50.0))
        lim200 = limit_determinants(replace(standard_cfg, x=200.0))
        for d50, d200 in zip(lim50, lim200):
            assert abs(d50.value - d200.value) < 1e-12 * abs(d50.value)

    def test_limit_factorizes(self, standard_cfg):
        d_up, d_um = limit_determinants(standard_cfg)
        d_m0 = compute_determinant(standard_cfg, "M0")
        prod = d_up.value * d_um.value
        assert abs(d_m0.value - prod) < 1e-12 * abs(prod)

    def test_trivial_amplitude_errors_vanish(self, trivial_cfg):
        rows = asymptotic_sweep(trivial_cfg, [50.0, 100.0, 200.0, 400.0])
        assert all(r.err < 1e-12 for r in rows)

    @pytest.mark.parametrize("xs", [[], [50.0, -1.0, 100.0, 200.0],
                                    [100.0, 50.0, 200.0, 400.0],
                                    [50.0, 50.0, 100.0, 200.0]])
    def test_bad_grids_rejected(self, standard_cfg, xs):
        with pytest.raises(ConfigError):
            asymptotic_sweep(standard_cfg, xs)


class TestSlopeFit:
    @staticmethod
    def synthetic(law, xs=(50.0, 100.0, 200.0, 400.0, 800.0)):
        return [SweepRow(x=x, ratio=1.0 + law(x), limit=1.0, err=law(x),
                         conv_delta=1e-14, valid=True) for x in xs]

    def test_recovers_inverse_power(self):
        rows = self.synthetic(lambda x: 7.0 / x)
        assert abs(fit_decay_slope(rows) + 1.0) < 1e-12

    def test_recovers_inverse_square(self):
        rows = self.synthetic(lambda x: 3.0 / x ** 2)
        assert abs(fit_decay_slope(rows) + 2.0) < 1e-12

    def test_noise_floor_rows_are_dropped(self):
        rows = self.synthetic(lambda x: 7.0 / x)
        flat = [replace(r, err=5e-14) for r in rows]  # below 10x conv noise
        with pytest.raises(ConfigError, match="insufficient points"):
            fit_decay_slope(flat)

    def test_too_few_rows_rejected(self):
        rows = self.synthetic(lambda x: 7.0 / x, xs=(50.0, 100.0, 200.0))
        with pytest.raises(ConfigError, match="insufficient points"):
            fit_decay_slope(rows)


@pytest.fixture(scope="module")
def comparison_rows(standard_cfg):
    return m_vs_m0(standard_cfg)


class TestMVsM0:
    def test_default_grid(self, comparison_rows):
        assert [r.x for r in comparison_rows] == [50.0, 100.0, 200.0, 400.0]

    def test_error_decays_like_inverse_x(self, comparison_rows):
        by_x = {r.x: r for r in comparison_rows}
        for x in (50.0, 100.0, 200.0):
            ratio = by_x[2 * x].err / by_x[x].err
            assert 0.3 < ratio < 0.8   # err(2x)/err(x) ~ 1/2

    def test_m0_value_is_constant_in_x(self, comparison_rows):
        vals = {r.det_M0 for r in comparison_rows}
        assert len(vals) == 1

    def test_non_canonical_table_rejected(self, nonintegrable_cfg):
        with pytest.raises(ConfigError):
            m_vs_m0(nonintegrable_cfg)


class TestComputeDeterminant:
    def test_all_kinds_run(self, standard_cfg):
        vals = {}
        for which in DET_KINDS:
            res = compute_determinant(standard_cfg, which)
            assert np.isfinite(res.value)
            vals[which] = res.value
        assert abs(vals["V"] - vals["Vtilde"] * vals["W"]) \
            < 1e-8 * abs(vals["V"])
        assert abs(vals["M0"] - vals["Uplus"] * vals["Uminus"]) \
            < 1e-12 * abs(vals["M0"])

    def test_unknown_kind_rejected(self, standard_cfg):
        with pytest.raises(ConfigError):
            compute_determinant(standard_cfg, "Q")

    def test_trivial_values(self, trivial_cfg):
        for which in ("V", "M", "M0"):
            res = compute_determinant(trivial_cfg, which)
            assert abs(res.value - 1.0) < 1e-10


class TestWorkerConfiguration:
    def test_single_thread_accepted(self, standard_cfg, monkeypatch):
        monkeypatch.setenv("SHIFTDET_THREADS", "1")
        rows = asymptotic_sweep(standard_cfg, [50.0, 100.0, 200.0, 400.0])
        assert len(rows) == 4

    def test_garbage_thread_count_rejected(self, standard_cfg, monkeypatch):
        monkeypatch.setenv("SHIFTDET_THREADS", "abc")
        with pytest.raises(ConfigError):
            asymptotic_sweep(standard_cfg, [50.0, 100.0, 200.0, 400.0])


def test_invalid_config_rejected_up_front():
    cfg_kwargs = dict(a=-1.0, b=1.0, x=50.0, c=1.0,
                      F=FunctionSpec.constant(0.5), p=FunctionSpec.identity())
    from shiftdet.kernels import ProblemConfig
    bad = ProblemConfig(numerics=NumericsConfig(h=0.9), **cfg_kwargs)
    with pytest.raises(ConfigError, match="strip"):
        verify_factorization(bad)
