import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qcdkit.decentralized import (
    FusionRule,
    SensorNetworkConfig,
    design_mlr_quantizer,
    fusion_thresholds,
    quantizer_kl,
    simulate_fusion,
)
from qcdkit.dist_models import Bernoulli, ExponentialRate, FixedChange, GaussianMeanShift, GeometricPrior, NeverChange
from qcdkit.errors import EstimationError, InputError
from qcdkit.sim_harness import Metric

UNIT = GaussianMeanShift(0.0, 1.0, 1.0)
SYMMETRIC = GaussianMeanShift(-1.0, 1.0, 1.0)


def brute_force_binary(model, lo=-8.0, hi=8.0, num=160_001):
    """Best single LLR threshold by dense grid search with scipy's normal laws."""
    t = np.linspace(lo, hi, num)
    slope = (model.mu1 - model.mu0) / model.sigma**2
    offset = -(model.mu1**2 - model.mu0**2) / (2 * model.sigma**2)
    x = (t - offset) / slope
    f0, f1 = stats.norm(model.mu0, model.sigma), stats.norm(model.mu1, model.sigma)
    a0, b0, a1, b1 = f0.cdf(x), f0.sf(x), f1.cdf(x), f1.sf(x)
    kl = a1 * np.log(a1 / a0) + b1 * np.log(b1 / b0)
    j = int(np.nanargmax(kl))
    return x[j], kl[j]


class TestQuantizer:
    def test_binary_quantizer_matches_grid_search(self):
        q = design_mlr_quantizer(UNIT, 2)
        x_best, kl_best = brute_force_binary(UNIT)
        assert math.isfinite(q.x_thresholds[0])
        assert q.kl_quantized == pytest.approx(kl_best, rel=1e-6)
        assert q.x_thresholds[0] == pytest.approx(x_best, abs=2e-3)
        assert q.kl_quantized < q.kl_raw == 0.5

    def test_symmetric_pair_optimum(self):
        # the quantized divergence is not symmetric under reflection, so the
        # optimum sits off the midpoint; the grid search is the oracle
        q = design_mlr_quantizer(SYMMETRIC, 2)
        x_best, kl_best = brute_force_binary(SYMMETRIC)
        assert q.kl_quantized == pytest.approx(kl_best, rel=1e-6)
        assert q.x_thresholds[0] == pytest.approx(x_best, abs=2e-3)
        assert q.x_thresholds[0] == pytest.approx(0.601, abs=2e-3)
        assert q.kl_quantized > quantizer_kl(SYMMETRIC, [0.0]) + 1e-3

    def test_many_levels_approach_raw_divergence(self):
        q = design_mlr_quantizer(UNIT, 64)
        assert q.levels == 64
        assert q.kl_quantized == pytest.approx(0.5, rel=0.02)
        assert q.kl_quantized <= 0.5

    def test_quantize_and_symbol_llr(self):
        q = design_mlr_quantizer(UNIT, 4)
        assert list(q.llr_thresholds) == sorted(q.llr_thresholds)
        assert sum(q.q0) == pytest.approx(1.0, abs=1e-12) and sum(q.q1) == pytest.approx(1.0, abs=1e-12)
        assert q.quantize(-100.0) == 0 and q.quantize(100.0) == 3
        assert q.quantize(q.llr_thresholds[1]) == 2
        assert np.all(np.diff(q.symbol_llr) > 0)  # monotone likelihood ratio

    def test_exponential_family_supported(self):
        q = design_mlr_quantizer(ExponentialRate(1.0, 2.0), 3)
        assert 0 < q.kl_quantized < q.kl_raw

    def test_rejections(self):
        with pytest.raises(InputError):
            design_mlr_quantizer(UNIT, 1)
        with pytest.raises(InputError):
            design_mlr_quantizer(Bernoulli(0.3, 0.6), 2)

    @given(st.lists(st.floats(-6, 6), min_size=1, max_size=8))
    def test_data_processing_inequality(self, thresholds):
        assert quantizer_kl(UNIT, thresholds) <= UNIT.kl() + 1e-12

    @given(st.lists(st.floats(-6, 6), min_size=1, max_size=6), st.floats(-6, 6))
    def test_nested_refinement_never_loses_information(self, thresholds, extra):
        coarse = quantizer_kl(SYMMETRIC, thresholds)
        fine = quantizer_kl(SYMMETRIC, thresholds + [extra])
        assert fine >= coarse - 1e-12


class TestFusionThresholds:
    def test_heuristics(self):
        a = 1e-3
        assert fusion_thresholds("min", a, 4) == pytest.approx(math.log(1e3) + math.log(4))
        assert fusion_thresholds("all", a, 4) == pytest.approx(math.log(1e3) / 4)
        assert fusion_thresholds("max", a, 4) == pytest.approx(math.log(1e3))
        with pytest.raises(InputError):
            fusion_thresholds("all", 1.0, 2)

    def test_config_validation(self):
        with pytest.raises(InputError):
            SensorNetworkConfig(0, UNIT, (3.0,))
        with pytest.raises(InputError):
            SensorNetworkConfig(2, UNIT, (3.0, 3.0, 3.0))
        with pytest.raises(InputError):
            SensorNetworkConfig(2, UNIT, (-1.0,))
        with pytest.raises(InputError):
            SensorNetworkConfig(2, UNIT, (3.0,), fusion_rule="sum")
        with pytest.raises(InputError):
            SensorNetworkConfig(2, UNIT, (3.0,), local_detector="shiryaev")


class TestFusion:
    def test_single_sensor_rules_coincide(self):
        cfg = SensorNetworkConfig(1, UNIT, (4.0,), sum_threshold=4.0, centralized_threshold=4.0)
        res = simulate_fusion(cfg, FixedChange(20), 3000, seed=1)
        base = res.stopping_times("min")
        for rule in FusionRule:
            assert np.array_equal(res.stopping_times(rule), base)

    def test_single_sensor_matches_plain_cusum(self):
        # sensor 0 draws from its own stream, so recompute CuSum on that stream by hand
        from qcdkit.dist_models import _family_llr, _family_sample
        from qcdkit.rng import STREAM_SENSOR, trial_key, uniform

        cfg = SensorNetworkConfig(1, UNIT, (3.0,), sum_threshold=3.0)
        res = simulate_fusion(cfg, FixedChange(5), 50, seed=2)
        params = np.asarray(UNIT.params)
        for i in range(50):
            key = np.uint64(trial_key(np.uint64(2), np.uint64(i)))
            w, n = 0.0, 0
            while w < 3.0:
                n += 1
                x = _family_sample(UNIT.family_code, params, n >= 5, uniform(key, np.uint64(STREAM_SENSOR), np.uint64(n)))
                w = max(w + _family_llr(UNIT.family_code, params, x), 0.0)
            assert res.stopping_times("sum")[i] == n == res.stopping_times("min")[i]

    @settings(max_examples=10)
    @given(st.integers(2, 4), st.floats(1.0, 5.0), st.integers(0, 2**32))
    def test_min_rule_is_earliest(self, sensors, b, seed):
        cfg = SensorNetworkConfig(sensors, UNIT, (b,))
        res = simulate_fusion(cfg, GeometricPrior(0.05), 300, seed=seed)
        t = {r: res.stopping_times(r) for r in ("min", "max", "all")}
        assert np.all(t["min"] <= np.minimum(t["max"], t["all"]))
        assert np.all(t["max"] <= t["all"])

    def test_quantized_network(self):
        cfg = SensorNetworkConfig(3, UNIT, (3.0,), quantizer_levels=4)
        assert cfg.quantizer is not None and cfg.quantizer.levels == 4
        raw = simulate_fusion(SensorNetworkConfig(3, UNIT, (3.0,)), FixedChange(1), 4000, seed=3)
        quant = simulate_fusion(cfg, FixedChange(1), 4000, seed=3)
        # coarser messages carry less information, so detection is slower
        assert quant.estimates("min")[0].value > raw.estimates("min")[0].value

    def test_shiryaev_local_detectors(self):
        cfg = SensorNetworkConfig(2, UNIT, (4.0,), local_detector="shiryaev", rho=0.01)
        add, pfa = simulate_fusion(cfg, GeometricPrior(0.01), 4000, seed=4).estimates("all")
        assert add.name is Metric.ADD and pfa.name is Metric.PFA
        assert 0 <= pfa.value < 0.2 and add.value > 0

    def test_unconfigured_rule_reports_no_estimate(self):
        res = simulate_fusion(SensorNetworkConfig(2, UNIT, (2.0,)), NeverChange(), 20, seed=5, horizon_cap=10**4)
        assert res.capped_fraction("sum") == 1.0
        with pytest.raises(EstimationError):
            res.estimates("sum")

    def test_determinism(self):
        cfg = SensorNetworkConfig(2, UNIT, (3.0,), sum_threshold=4.0)
        a = simulate_fusion(cfg, GeometricPrior(0.01), 500, seed=6)
        b = simulate_fusion(cfg, GeometricPrior(0.01), 500, seed=6)
        for rule in FusionRule:
            assert np.array_equal(a.tau[rule], b.tau[rule])

    def test_all_rule_follows_centralized_slope(self):
        # the per-sensor split |log alpha| / L is conservative, so the delay is
        # compared with the false-alarm rate the rule actually achieves
        alpha = 1e-4
        cfg = SensorNetworkConfig(
            2, UNIT, (fusion_thresholds("all", alpha, 2),), centralized_threshold=abs(math.log(alpha))
        )
        far = simulate_fusion(cfg, NeverChange(), 1000, seed=3, horizon_cap=10**7).estimates("all")[0]
        assert far.value <= alpha and not far.flagged
        delay = simulate_fusion(cfg, FixedChange(1), 20_000, seed=4).estimates("all")[0]
        slope = 1.0 / (2 * UNIT.kl())
        assert delay.value / abs(math.log(far.value)) == pytest.approx(slope, rel=0.15)


def test_rule_subset_matches_full_run():
    cfg = SensorNetworkConfig(2, UNIT, (3.0,), sum_threshold=4.0, centralized_threshold=4.0)
    full = simulate_fusion(cfg, FixedChange(10), 500, seed=7)
    only = simulate_fusion(cfg, FixedChange(10), 500, seed=7, rules=["all"])
    assert np.array_equal(full.tau[FusionRule.ALL], only.tau[FusionRule.ALL])
    assert only.capped_fraction("min") == 1.0
