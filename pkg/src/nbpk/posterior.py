"""Auxiliary-variable density, EPPF, predictive weights and identity checks.

Everything is assembled in log space: products of tilted moments over blocks
are sums of ``log_pi_n`` values, and all half-line integrals go through the
shift-invariant quadrature in :mod:`nbpk.numerics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .levy_models import ModelKind, ModelParamsR, log_pi_n_lv, log_psi_lv
from .numerics import LogDensityGridSampler, QuadratureSpec, log_integrate_halfline_logv
from .partitions import Configuration, enumerate_afs, log_partition_coefficient

__all__ = [
    "PredictiveWeights",
    "log_g_r",
    "log_eppf",
    "log_v_moment",
    "predictive_weights",
    "normalized_predictive",
    "check_prediction_sum",
    "check_partition_normalization",
    "sample_jump_given_v",
    "RejectionCapError",
]

DEFAULT_SPEC = QuadratureSpec(rel_tol=1e-9)

# Both new-cluster formulations are always computed; a disagreement beyond this
# bound indicates a quadrature failure rather than roundoff.
_OMEGA0_GUARD = 1e-6


class RejectionCapError(RuntimeError):
    """Rejection sampling exceeded its iteration cap."""


@dataclass(frozen=True)
class PredictiveWeights:
    """Raw prediction weights: new-cluster weight, per-block weights, log normalizer.

    The raw weights satisfy omega0 + (1/n) sum_i omega_i = exp(log_eppf);
    they are *not* probabilities until divided by the EPPF value.
    """

    omega0: float
    omega: Tuple[float, ...]
    log_eppf: float

    def normalized(self, config: Configuration) -> np.ndarray:
        p = math.exp(self.log_eppf)
        vec = np.array([self.omega0] + [w / config.n for w in self.omega]) / p
        return vec


def _log_g_r_lv(params: ModelParamsR, config: Configuration, lv, *, _log_pi_offset=0.0):
    """log g_r(v, n) as a function of lv = log v.

    Working from log v keeps the Gamma-family tail (where v overflows a float
    but log v does not) evaluable; every integral below runs in this domain.
    """
    lv = np.asarray(lv, float)
    model, r = params.model, params.r
    n, k = config.n, config.k
    out = (math.lgamma(r + k) - math.lgamma(r)
           - (r + k) * log_psi_lv(model, lv)
           + (n - 1) * lv
           - math.lgamma(n))
    for ni in config.counts:
        out = out + log_pi_n_lv(model, ni, lv) + _log_pi_offset
    if np.ndim(lv) == 0:
        return float(out)
    return out


def log_g_r(params: ModelParamsR, config: Configuration, v, *, _log_pi_offset=0.0):
    """log of the auxiliary density kernel g_r(v, n) (unnormalized in v).

    ``_log_pi_offset`` shifts every log pi_{n_i} term by a constant; it exists
    only so tests can confirm the log-linear assembly.
    """
    v = np.asarray(v, float)
    with np.errstate(divide="ignore"):
        lv = np.log(v)
    return _log_g_r_lv(params, config, lv, _log_pi_offset=_log_pi_offset)


def log_eppf(params: ModelParamsR, config: Configuration,
             spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """log p(n): the auxiliary density integrated over the half line."""
    return log_integrate_halfline_logv(lambda lv: _log_g_r_lv(params, config, lv), spec)


def _log_moment(params, config, extra_log_factor_lv, spec):
    """log int exp(extra(log v) + log g_r) dv for a vectorized extra log factor."""
    def log_f(lv):
        lv = np.asarray(lv, float)
        return extra_log_factor_lv(lv) + _log_g_r_lv(params, config, lv)

    return log_integrate_halfline_logv(log_f, spec)


def log_v_moment(params: ModelParamsR, config: Configuration, power: float,
                 spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """log int v^power g_r(v, n) dv; subtract log_eppf for the posterior moment."""
    return _log_moment(params, config, lambda lv: power * lv, spec)


def _log_omega0_direct(params, config, spec):
    """New-cluster weight via (r+k)/n int v pi_1/psi g_r dv."""
    model = params.model
    n, k = config.n, config.k

    def extra(lv):
        return lv + log_pi_n_lv(model, 1, lv) - log_psi_lv(model, lv)

    return math.log(params.r + k) - math.log(n) + _log_moment(params, config, extra, spec)


def _log_omega0_tilted(params, config, spec):
    """Same weight via r/n int v pi_1 g_{r+1} dv."""
    model = params.model
    bumped = ModelParamsR(model, params.r + 1.0)

    def extra(lv):
        return lv + log_pi_n_lv(model, 1, lv)

    return math.log(params.r) - math.log(config.n) + _log_moment(bumped, config, extra, spec)


def predictive_weights(params: ModelParamsR, config: Configuration,
                       spec: QuadratureSpec = DEFAULT_SPEC) -> PredictiveWeights:
    """Raw prediction weights (omega_0, omega_1..omega_k) and the log EPPF.

    The new-cluster weight is computed by two algebraically equal routes (the
    direct form and the tilted r+1 form) as a built-in cross-check.
    """
    model = params.model
    lo0a = _log_omega0_direct(params, config, spec)
    lo0b = _log_omega0_tilted(params, config, spec)
    if abs(lo0a - lo0b) > _OMEGA0_GUARD:
        raise RuntimeError(
            f"new-cluster weight routes disagree: {lo0a} vs {lo0b} "
            f"(model {model.describe()}, config {config})")
    omega0 = math.exp(0.5 * (lo0a + lo0b))

    omegas = []
    for ni in config.counts:
        def extra(lv, ni=ni):
            return lv + log_pi_n_lv(model, ni + 1, lv) - log_pi_n_lv(model, ni, lv)

        omegas.append(math.exp(_log_moment(params, config, extra, spec)))
    return PredictiveWeights(omega0=omega0, omega=tuple(omegas),
                             log_eppf=log_eppf(params, config, spec))


def normalized_predictive(params: ModelParamsR, config: Configuration,
                          spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """Probability vector (new cluster, block 1, ..., block k); sums to 1."""
    w = predictive_weights(params, config, spec)
    vec = w.normalized(config)
    total = vec.sum()
    if abs(total - 1.0) > 1e-6:
        raise RuntimeError(f"predictive weights sum to {total}, expected 1")
    return vec / total


def check_prediction_sum(params: ModelParamsR, config: Configuration,
               spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Relative residual of omega_0 + (1/n) sum_i omega_i = int g_r dv."""
    w = predictive_weights(params, config, spec)
    lhs = w.omega0 + sum(w.omega) / config.n
    rhs = math.exp(w.log_eppf)
    return abs(lhs - rhs) / rhs


def check_partition_normalization(params: ModelParamsR, n: int,
               spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """|sum over all multiplicity classes of coefficient * EPPF - 1| at sample size n."""
    if n > 12:
        raise ValueError("full-normalization check is intended for small n (<= 12)")
    total = 0.0
    for m in enumerate_afs(n):
        config = m.to_configuration()
        total += math.exp(log_partition_coefficient(m) + log_eppf(params, config, spec))
    return abs(total - 1.0)


def sample_jump_given_v(params: ModelParamsR, n_i: int, v: float, rng,
                        max_rejects: int = 100_000) -> float:
    """One draw of a tied jump size given the auxiliary variable.

    The target density is s^{n_i} e^{-vs} rho(s) / pi_{n_i}(v).  For the
    built-in models this is a (possibly truncated) gamma law; the generic
    model falls back on grid inverse-CDF sampling.
    """
    if v <= 0.0:
        raise ValueError("v must be positive")
    if n_i < 1:
        raise ValueError("n_i must be >= 1")
    model = params.model
    a = model.alpha
    if model.kind is ModelKind.GAMMA:
        return rng.gamma(n_i, 1.0 / (1.0 + v))
    if model.kind is ModelKind.GENERALIZED_GAMMA:
        return rng.gamma(n_i - a, 1.0 / (1.0 + v))
    if model.kind is ModelKind.STABLE:
        return rng.gamma(n_i - a, 1.0 / v)
    if model.kind is ModelKind.TRUNCATED_STABLE:
        for _ in range(max_rejects):
            s = rng.gamma(n_i - a, 1.0 / v)
            if 0.0 < s <= 1.0:
                return s
        raise RejectionCapError(
            f"no draw in (0,1] after {max_rejects} gamma proposals (v={v}, n_i={n_i})")
    rho = model.density

    def log_dens_lv(ls):
        ls = np.atleast_1d(np.asarray(ls, float))
        out = np.full(ls.shape, -np.inf)
        ok = ls < 690.0
        s = np.exp(ls[ok])
        dens = np.array([rho(float(x)) for x in s])
        with np.errstate(divide="ignore"):
            out[ok] = n_i * ls[ok] + np.log(dens) - v * s
        return out

    sampler = LogDensityGridSampler(log_dens_lv)
    return sampler.sample(rng)
