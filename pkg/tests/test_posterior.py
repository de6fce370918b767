"""EPPF, prediction weights and the two normalization identities.

The two-parameter closed forms in nbpk.reference act as quadrature-free
oracles: the generalized-gamma model with r = theta/alpha must reproduce them
exactly, and the stable model must reproduce the theta = 0 case for every r.
"""

import math

import numpy as np
import pytest

from nbpk import reference
from nbpk.levy_models import LevyModel, ModelParamsR
from nbpk.partitions import Configuration, enumerate_afs
from nbpk.posterior import (
    RejectionCapError,
    _log_omega0_direct,
    _log_omega0_tilted,
    check_prediction_sum,
    check_partition_normalization,
    log_eppf,
    log_g_r,
    log_v_moment,
    normalized_predictive,
    predictive_weights,
    sample_jump_given_v,
)

PD_HALF = ModelParamsR(LevyModel.generalized_gamma(0.5), 2.0)  # theta = 1

FOUR_MODELS = [
    ModelParamsR(LevyModel.stable(0.5), 1.5),
    ModelParamsR(LevyModel.gamma(1.0), 2.0),
    ModelParamsR(LevyModel.generalized_gamma(0.5), 2.0),
    ModelParamsR(LevyModel.truncated_stable(0.5), 1.5),
]


def test_log_g_r_fixed_value():
    # hand assembly for the generalized-gamma model at v = 1:
    # r^{[k]} = 2, psi = 2^{0.5}, pi_1 = 0.5 * 2^{-0.5}, exponent r+k = 3
    got = log_g_r(PD_HALF, Configuration((1,)), 1.0)
    assert got == pytest.approx(math.log(0.25), abs=1e-12)


def test_g_r_integrates_to_one_single_block():
    for params in FOUR_MODELS:
        assert log_eppf(params, Configuration((1,))) == pytest.approx(0.0, abs=1e-8)


def test_log_g_r_scaling_hook():
    cfg = Configuration((2, 1, 1))
    base = log_g_r(PD_HALF, cfg, 0.7)
    shifted = log_g_r(PD_HALF, cfg, 0.7, _log_pi_offset=0.3)
    assert shifted - base == pytest.approx(cfg.k * 0.3, abs=1e-12)


def test_eppf_pd_fixed_values():
    assert log_eppf(PD_HALF, Configuration((2,))) == pytest.approx(math.log(0.25), abs=1e-8)
    assert log_eppf(PD_HALF, Configuration((1, 1))) == pytest.approx(math.log(0.75), abs=1e-8)


def test_eppf_symmetry():
    rng = np.random.default_rng(5)
    cfg = (4, 2, 1, 1)
    base = log_eppf(PD_HALF, Configuration(cfg))
    for _ in range(4):
        perm = tuple(rng.permutation(cfg))
        assert log_eppf(PD_HALF, Configuration(perm)) == pytest.approx(base, abs=1e-12)


def test_eppf_pd_reduction_grid():
    for alpha, theta in ((0.3, 0.5), (0.5, 2.0), (0.7, 1.0)):
        params = ModelParamsR(LevyModel.generalized_gamma(alpha), theta / alpha)
        for n in range(2, 7):
            for m in enumerate_afs(n):
                cfg = m.to_configuration()
                want = reference.pd_log_eppf(alpha, theta, cfg.counts)
                assert log_eppf(params, cfg) == pytest.approx(want, abs=1e-6)


def test_stable_r_independence():
    cfg = Configuration((2, 1))
    vals = [log_eppf(ModelParamsR(LevyModel.stable(0.6), r), cfg)
            for r in (0.2, 1.0, 5.0, 25.0)]
    assert max(vals) - min(vals) < 1e-8
    want = reference.pd_log_eppf(0.6, 0.0, cfg.counts)
    assert vals[0] == pytest.approx(want, abs=1e-6)


def test_predictive_pd_case():
    probs = normalized_predictive(PD_HALF, Configuration((3, 1)))
    assert probs == pytest.approx([0.4, 0.5, 0.1], abs=1e-6)
    assert probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_predictive_single_block_sums_to_eppf():
    for params in FOUR_MODELS:
        w = predictive_weights(params, Configuration((1,)))
        assert w.omega0 + w.omega[0] == pytest.approx(1.0, abs=1e-7)


def test_omega0_routes_agree():
    from nbpk.posterior import DEFAULT_SPEC
    for params in FOUR_MODELS:
        for counts in [(2, 1), (3,), (1, 1, 1)]:
            cfg = Configuration(counts)
            a = _log_omega0_direct(params, cfg, DEFAULT_SPEC)
            b = _log_omega0_tilted(params, cfg, DEFAULT_SPEC)
            assert abs(a - b) < 1e-8


def test_new_cluster_prob_is_crp_value_for_stable():
    # PD(alpha, 0): new-cluster probability is k*alpha/n for any r
    for r in (0.7, 3.0):
        params = ModelParamsR(LevyModel.stable(0.5), r)
        probs = normalized_predictive(params, Configuration((2, 2)))
        assert probs[0] == pytest.approx(2 * 0.5 / 4.0, abs=1e-6)


def test_prediction_sum_residuals():
    cases = [
        (ModelParamsR(LevyModel.stable(0.3), 1.7), Configuration((4, 2, 1))),
        (ModelParamsR(LevyModel.gamma(2.5), 0.8), Configuration((5,))),
        (ModelParamsR(LevyModel.truncated_stable(0.6), 3.0), Configuration((2, 2, 1, 1))),
    ]
    for params, cfg in cases:
        assert check_prediction_sum(params, cfg) < 1e-6


def test_partition_normalization_residuals():
    assert check_partition_normalization(ModelParamsR(LevyModel.generalized_gamma(0.5), 2.0), 4) < 1e-6
    assert check_partition_normalization(ModelParamsR(LevyModel.gamma(1.0), 1.0), 1) < 1e-9
    assert check_partition_normalization(ModelParamsR(LevyModel.stable(0.25), 4.0), 6) < 1e-6
    with pytest.raises(ValueError):
        check_partition_normalization(FOUR_MODELS[0], 13)


def test_addition_rule():
    # p(n) equals the sum of backward terms built from the reduced configs
    for params in FOUR_MODELS:
        for counts in [(2, 1), (3, 1), (2, 2)]:
            cfg = Configuration(counts)
            n = cfg.n
            total = 0.0
            for i, ni in enumerate(cfg.counts):
                red = cfg.remove_one(i)
                w = predictive_weights(params, red)
                if ni > 1:
                    total += ni / n / (n - 1) * w.omega[i]
                else:
                    total += w.omega0 / n
            p = math.exp(log_eppf(params, cfg))
            assert total == pytest.approx(p, rel=1e-5)


def test_log_v_moment_against_independent_quadrature():
    from scipy.integrate import quad
    params = ModelParamsR(LevyModel.generalized_gamma(0.7), 10.0)
    cfg = Configuration((2, 1))
    want, _ = quad(lambda v: v * math.exp(log_g_r(params, cfg, v)), 0, np.inf,
                   limit=400, epsabs=0, epsrel=1e-10)
    got = math.exp(log_v_moment(params, cfg, 1.0))
    assert got == pytest.approx(want, rel=1e-7)


def test_jump_sampler_gamma_mean():
    rng = np.random.default_rng(17)
    params = ModelParamsR(LevyModel.gamma(1.0), 1.0)
    draws = np.array([sample_jump_given_v(params, 3, 1.0, rng) for _ in range(100_000)])
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - 1.5) < 3 * se
    assert np.all(draws > 0.0)


def test_jump_sampler_stable_mean():
    rng = np.random.default_rng(23)
    params = ModelParamsR(LevyModel.stable(0.5), 1.0)
    draws = np.array([sample_jump_given_v(params, 2, 4.0, rng) for _ in range(100_000)])
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - 0.375) < 3 * se


def test_jump_sampler_truncated_support():
    rng = np.random.default_rng(29)
    params = ModelParamsR(LevyModel.truncated_stable(0.5), 1.0)
    draws = [sample_jump_given_v(params, 2, 1.0, rng) for _ in range(2000)]
    assert all(0.0 < s <= 1.0 for s in draws)


def test_jump_sampler_rejection_cap():
    rng = np.random.default_rng(3)
    params = ModelParamsR(LevyModel.truncated_stable(0.5), 1.0)
    # proposal mean 1500, so landing in (0, 1] within 50 tries is hopeless
    with pytest.raises(RejectionCapError):
        sample_jump_given_v(params, 2, 0.001, rng, max_rejects=50)


def test_jump_sampler_generic_grid_path():
    rng = np.random.default_rng(41)
    generic = LevyModel.generic(lambda x: math.exp(-x) / x)
    params = ModelParamsR(generic, 1.0)
    draws = np.array([sample_jump_given_v(params, 3, 2.0, rng) for _ in range(20_000)])
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - 1.0) < 3 * se


def test_jump_sampler_domain_errors():
    rng = np.random.default_rng(1)
    with pytest.raises(ValueError):
        sample_jump_given_v(PD_HALF, 2, 0.0, rng)
    with pytest.raises(ValueError):
        sample_jump_given_v(PD_HALF, 0, 1.0, rng)
