"""Jump intensity families and their Laplace-exponent functionals.

Four built-in intensities are supported together with a user-supplied generic
density.  For each model the package needs two functionals of the intensity
rho: ``psi(v) = 1 + int (1 - e^{-vx}) rho(x) dx`` and the tilted moments
``pi_n(v) = int x^n rho(x) e^{-vx} dx``.  Closed forms are used for the
built-ins; the generic model falls back on adaptive quadrature.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .numerics import QuadratureSpec, QuadratureError, Transform, log_integrate_halfline

__all__ = [
    "ModelKind",
    "LevyModel",
    "ModelParamsR",
    "InvalidDensityError",
    "psi",
    "log_psi",
    "log_pi_n",
    "lower_incomplete_gamma",
    "log_lower_incomplete_gamma",
]


class InvalidDensityError(ValueError):
    """A generic intensity failed an integrability probe or produced non-finite values."""


class ModelKind(enum.Enum):
    STABLE = "stable"
    GAMMA = "gamma"
    GENERALIZED_GAMMA = "gengamma"
    TRUNCATED_STABLE = "truncstable"
    GENERIC = "generic"


@dataclass(frozen=True)
class LevyModel:
    """An intensity specification.

    alpha is the stability index in (0,1) (Stable, GeneralizedGamma,
    TruncatedStable); theta > 0 is the mass parameter of the Gamma model;
    density is the intensity function itself for Generic models.
    """

    kind: ModelKind
    alpha: Optional[float] = None
    theta: Optional[float] = None
    density: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind in (ModelKind.STABLE, ModelKind.GENERALIZED_GAMMA,
                         ModelKind.TRUNCATED_STABLE):
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise ValueError(f"alpha must lie strictly in (0,1), got {self.alpha}")
        elif self.kind is ModelKind.GAMMA:
            if self.theta is None or not (self.theta > 0.0):
                raise ValueError(f"theta must be positive, got {self.theta}")
        elif self.kind is ModelKind.GENERIC:
            if self.density is None:
                raise ValueError("generic model requires a density function")
            _probe_generic_density(self.density)

    @staticmethod
    def stable(alpha: float) -> "LevyModel":
        return LevyModel(ModelKind.STABLE, alpha=alpha)

    @staticmethod
    def gamma(theta: float) -> "LevyModel":
        return LevyModel(ModelKind.GAMMA, theta=theta)

    @staticmethod
    def generalized_gamma(alpha: float) -> "LevyModel":
        return LevyModel(ModelKind.GENERALIZED_GAMMA, alpha=alpha)

    @staticmethod
    def truncated_stable(alpha: float) -> "LevyModel":
        return LevyModel(ModelKind.TRUNCATED_STABLE, alpha=alpha)

    @staticmethod
    def generic(density: Callable[[float], float]) -> "LevyModel":
        return LevyModel(ModelKind.GENERIC, density=density)

    def describe(self) -> str:
        if self.kind is ModelKind.GAMMA:
            return f"gamma(theta={self.theta})"
        if self.kind is ModelKind.GENERIC:
            return "generic"
        return f"{self.kind.value}(alpha={self.alpha})"


@dataclass(frozen=True)
class ModelParamsR:
    """A model together with the shape parameter r > 0 of the point process."""

    model: LevyModel
    r: float

    def __post_init__(self):
        if not (self.r > 0.0):
            raise ValueError(f"r must be positive, got {self.r}")


def _probe_generic_density(density):
    """Best-effort checks: finiteness on a grid and integrability of s*rho(s) near 0.

    The full admissibility conditions (divergence at 0, finiteness away from 0,
    integrability of s*rho near 0) cannot all be verified numerically; residual
    trust stays with the caller.
    """
    for s in (1e-6, 1e-3, 0.1, 1.0, 10.0):
        val = density(s)
        if not np.isfinite(val) or val < 0.0:
            raise InvalidDensityError(
                f"density({s}) = {val}; must be finite and nonnegative on (0, inf)")
    # Probe int_0^1 s rho(s) ds on a crude log grid; divergence shows up as
    # dyadic contributions that fail to decay.
    edges = np.logspace(-12, 0, 49)
    mids = np.sqrt(edges[:-1] * edges[1:])
    widths = np.diff(edges)
    contrib = np.array([m * density(m) for m in mids]) * widths
    if not np.all(np.isfinite(contrib)):
        raise InvalidDensityError("s * density(s) is not finite near 0")
    tail = np.abs(contrib[:16]).sum()
    if tail > 1e6 * (np.abs(contrib).sum() - tail + 1e-300):
        raise InvalidDensityError("s * density(s) does not look integrable near 0")


# ---------------------------------------------------------------------------
# Incomplete gamma kernel
# ---------------------------------------------------------------------------

_MAX_ITER = 500


def _log_lower_series(s, x):
    """log gamma(s,x) by the ascending series; reliable for x < s + 1."""
    total = 1.0 / s
    term = total
    for k in range(1, _MAX_ITER):
        term *= x / (s + k)
        total += term
        if term < total * 1e-17:
            break
    return s * math.log(x) - x + math.log(total)


def _upper_regularized_cf(s, x):
    """Q(s,x) = Gamma(s,x)/Gamma(s) by modified Lentz continued fraction; x >= s + 1."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


def log_lower_incomplete_gamma(s: float, x: float) -> float:
    """log of gamma(s, x) = int_0^x t^{s-1} e^{-t} dt, stable down to tiny x."""
    if s <= 0.0:
        raise ValueError(f"s must be positive, got {s}")
    if x < 0.0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if x == 0.0:
        return -math.inf
    if x < s + 1.0:
        return _log_lower_series(s, x)
    q = _upper_regularized_cf(s, x)
    return math.lgamma(s) + math.log1p(-q)


def lower_incomplete_gamma(s: float, x: float) -> float:
    """gamma(s, x), the lower incomplete gamma function; x = inf gives Gamma(s)."""
    if x == math.inf:
        return math.gamma(s) if s < 170 else math.exp(math.lgamma(s))
    lg = log_lower_incomplete_gamma(s, x)
    return 0.0 if lg == -math.inf else math.exp(lg)


def _vec_log_lower_incomplete_gamma(s, x):
    x = np.asarray(x, float)
    if x.ndim == 0:
        return log_lower_incomplete_gamma(s, float(x))
    return np.array([log_lower_incomplete_gamma(s, xi) for xi in x.ravel()]).reshape(x.shape)


# ---------------------------------------------------------------------------
# psi and pi_n
# ---------------------------------------------------------------------------

_GENERIC_SPEC = QuadratureSpec(rel_tol=1e-10, max_subdivisions=4000, transform=Transform.NONE)


def _generic_scalar(fn, v):
    v = np.asarray(v, float)
    if v.ndim == 0:
        return fn(float(v))
    return np.array([fn(float(x)) for x in v.ravel()]).reshape(v.shape)


def log_psi_lv(model: LevyModel, lv):
    """log psi at v = exp(lv), stable for lv far beyond float overflow of v.

    Posterior integrands of the Gamma family carry mass at astronomically
    large v (the tail decays only like a power of log v), so the auxiliary
    integrals must be evaluated from log v directly.
    """
    scalar = np.ndim(lv) == 0
    lv = np.atleast_1d(np.asarray(lv, float))
    a, th = model.alpha, model.theta
    if model.kind is ModelKind.STABLE:
        out = np.logaddexp(0.0, a * lv)
    elif model.kind is ModelKind.GAMMA:
        out = np.log1p(th * np.logaddexp(0.0, lv))
    elif model.kind is ModelKind.GENERALIZED_GAMMA:
        out = a * np.logaddexp(0.0, lv)
    elif model.kind is ModelKind.TRUNCATED_STABLE:
        out = np.empty_like(lv, dtype=float)
        small = lv < math.log(700.0)
        vs = np.exp(lv[small])
        lg = _vec_log_lower_incomplete_gamma(1.0 - a, vs)
        out[small] = np.logaddexp(-vs, a * lv[small] + lg)
        out[~small] = a * lv[~small] + math.lgamma(1.0 - a)
    else:
        # Generic intensities cannot be probed beyond float range; cap v.
        v = np.exp(np.minimum(lv, 690.0))
        out = np.log(psi(model, v))
    if scalar:
        return float(out[0])
    return out


def log_pi_n_lv(model: LevyModel, n: int, lv):
    """log pi_n at v = exp(lv); the log-v counterpart of :func:`log_pi_n`."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    scalar = np.ndim(lv) == 0
    lv = np.atleast_1d(np.asarray(lv, float))
    a, th = model.alpha, model.theta
    if model.kind is ModelKind.STABLE:
        out = math.log(a) + math.lgamma(n - a) - math.lgamma(1.0 - a) + (a - n) * lv
    elif model.kind is ModelKind.GAMMA:
        out = math.log(th) + math.lgamma(n) - n * np.logaddexp(0.0, lv)
    elif model.kind is ModelKind.GENERALIZED_GAMMA:
        out = (math.log(a) + math.lgamma(n - a) - math.lgamma(1.0 - a)
               + (a - n) * np.logaddexp(0.0, lv))
    elif model.kind is ModelKind.TRUNCATED_STABLE:
        out = np.empty_like(lv, dtype=float)
        small = lv < math.log(700.0)
        out[small] = _vec_log_lower_incomplete_gamma(n - a, np.exp(lv[small]))
        out[~small] = math.lgamma(n - a)
        out = out + math.log(a) + (a - n) * lv
    else:
        v = np.exp(np.minimum(lv, 690.0))
        out = log_pi_n(model, n, v)
    out = np.asarray(out, float)
    if scalar:
        return float(out[0])
    return out


def psi(model: LevyModel, v):
    """1 + int (1 - e^{-vx}) rho(x) dx; equals 1 at v = 0 and increases with v."""
    v = np.asarray(v, float)
    if np.any(v < 0.0):
        raise ValueError("v must be nonnegative")
    a, th = model.alpha, model.theta
    if model.kind is ModelKind.STABLE:
        out = 1.0 + v ** a
    elif model.kind is ModelKind.GAMMA:
        out = 1.0 + th * np.log1p(v)
    elif model.kind is ModelKind.GENERALIZED_GAMMA:
        out = (1.0 + v) ** a
    elif model.kind is ModelKind.TRUNCATED_STABLE:
        # Integration by parts of the defining integral over (0, 1].
        glo = np.exp(_vec_log_lower_incomplete_gamma(1.0 - a, np.maximum(v, 1e-300)))
        out = np.where(v == 0.0, 1.0, np.exp(-v) + v ** a * glo)
    else:
        rho = model.density

        def one(vv):
            if vv == 0.0:
                return 1.0

            def log_f(x):
                x = np.asarray(x, float)
                with np.errstate(divide="ignore"):
                    dens = np.array([rho(float(xi)) for xi in np.atleast_1d(x)])
                    lf = np.log(-np.expm1(-vv * np.atleast_1d(x))) + np.log(dens)
                return lf.reshape(x.shape) if x.ndim else float(lf[0])

            try:
                val = 1.0 + math.exp(log_integrate_halfline(log_f, _GENERIC_SPEC))
            except QuadratureError as exc:
                raise InvalidDensityError(
                    f"psi quadrature failed for generic density: {exc}") from exc
            if not math.isfinite(val):
                raise InvalidDensityError("psi diverged for generic density")
            return val

        out = _generic_scalar(one, v)
    if np.ndim(v) == 0:
        return float(out)
    return out


def log_psi(model: LevyModel, v):
    return np.log(psi(model, v))


def log_pi_n(model: LevyModel, n: int, v):
    """log pi_n(v) = log int x^n rho(x) e^{-vx} dx for n >= 1, v > 0."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    v = np.asarray(v, float)
    if np.any(v <= 0.0):
        raise ValueError("v must be positive")
    a, th = model.alpha, model.theta
    logv = np.log(v)
    if model.kind is ModelKind.STABLE:
        out = math.log(a) + math.lgamma(n - a) - math.lgamma(1.0 - a) + (a - n) * logv
    elif model.kind is ModelKind.GAMMA:
        out = math.log(th) + math.lgamma(n) - n * np.log1p(v)
    elif model.kind is ModelKind.GENERALIZED_GAMMA:
        out = math.log(a) + math.lgamma(n - a) - math.lgamma(1.0 - a) + (a - n) * np.log1p(v)
    elif model.kind is ModelKind.TRUNCATED_STABLE:
        out = math.log(a) + (a - n) * logv + _vec_log_lower_incomplete_gamma(n - a, v)
    else:
        rho = model.density

        def one(vv):
            def log_f(x):
                x = np.asarray(x, float)
                dens = np.array([rho(float(xi)) for xi in np.atleast_1d(x)])
                with np.errstate(divide="ignore"):
                    lf = n * np.log(np.atleast_1d(x)) + np.log(dens) - vv * np.atleast_1d(x)
                return lf.reshape(x.shape) if x.ndim else float(lf[0])

            try:
                return log_integrate_halfline(log_f, _GENERIC_SPEC)
            except QuadratureError as exc:
                raise InvalidDensityError(
                    f"pi_{n} quadrature failed for generic density: {exc}") from exc

        out = _generic_scalar(one, v)
    if np.ndim(v) == 0:
        return float(out)
    return np.asarray(out, float)
