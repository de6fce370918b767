"""Log-space adaptive quadrature on (0, infinity) and grid-based inverse-CDF sampling.

Every integral in this package is of the form ``log I = log int_0^infty exp(log_f(v)) dv``
where ``exp(log_f)`` would overflow or underflow in linear space.  The integrator
keeps a running maximum of the log integrand, works on shifted values, and restores
the shift at the end, so adding a constant to ``log_f`` shifts the result exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Transform",
    "QuadratureSpec",
    "QuadratureError",
    "log_integrate_halfline",
    "log_integrate_halfline_logv",
    "LogDensityGridSampler",
]


class Transform(enum.Enum):
    """Change of variable applied before panel subdivision."""

    NONE = "none"
    RATIONAL_TO_UNIT = "rational_to_unit"


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-9
    max_subdivisions: int = 20000
    transform: Transform = Transform.RATIONAL_TO_UNIT

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-2):
            raise ValueError(f"rel_tol must be in (0, 1e-2], got {self.rel_tol}")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


class QuadratureError(RuntimeError):
    """Raised when the adaptive integrator cannot reach the requested tolerance.

    Carries the best available estimate (log scale) and the relative error bound.
    """

    def __init__(self, message, best_estimate=None, error_bound=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_bound = error_bound


# Gauss-Legendre node/weight pairs on [-1, 1]; the 15-point rule is the panel
# estimate, the 7-point rule supplies the error estimate by comparison.
_GL7 = np.polynomial.legendre.leggauss(7)
_GL15 = np.polynomial.legendre.leggauss(15)


def _as_vectorized(log_f):
    """Wrap log_f so that it accepts a 1-d numpy array, looping if necessary."""

    def call(t):
        t = np.asarray(t, dtype=float)
        try:
            out = np.asarray(log_f(t), dtype=float)
            if out.shape == t.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(log_f(x)) for x in t])

    return call


def _panel_log_values(log_g, a, b):
    """Evaluate log_g at the GL7 and GL15 nodes of the panels [a_i, b_i]."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    t7 = mid[:, None] + half[:, None] * _GL7[0][None, :]
    t15 = mid[:, None] + half[:, None] * _GL15[0][None, :]
    flat = np.concatenate([t7.ravel(), t15.ravel()])
    vals = log_g(flat)
    if np.isnan(vals).any():
        raise QuadratureError("log integrand returned NaN")
    l7 = vals[: t7.size].reshape(t7.shape)
    l15 = vals[t7.size:].reshape(t15.shape)
    return l7, l15


def _log_integrate_unit(log_g, rel_tol, max_subdivisions, n_init=8):
    """log int_0^1 exp(log_g(t)) dt by adaptive bisection with GL15/GL7 estimates."""
    edges = np.linspace(0.0, 1.0, n_init + 1)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    l7, l15 = _panel_log_values(log_g, a, b)
    splits = 0

    while True:
        m = max(l7.max(initial=-np.inf), l15.max(initial=-np.inf))
        if not np.isfinite(m):
            # Integrand is identically zero (all log values -inf).
            return -np.inf
        half = 0.5 * (b - a)
        s7 = half * (np.exp(l7 - m) @ _GL7[1])
        s15 = half * (np.exp(l15 - m) @ _GL15[1])
        err = np.abs(s15 - s7)
        total = s15.sum()
        total_err = err.sum()
        if total > 0.0 and total_err <= rel_tol * total:
            return m + math.log(total)

        # Split every panel whose error exceeds its fair share of the budget;
        # always split at least the worst one.
        if total > 0.0:
            thresh = rel_tol * total / len(err)
            to_split = np.flatnonzero(err > thresh)
        else:
            to_split = np.array([], dtype=int)
        if to_split.size == 0:
            to_split = np.array([int(np.argmax(err))])
        if splits + to_split.size > max_subdivisions:
            best = m + math.log(total) if total > 0 else -np.inf
            raise QuadratureError(
                "adaptive quadrature did not converge within "
                f"{max_subdivisions} subdivisions",
                best_estimate=best,
                error_bound=float(total_err / total) if total > 0 else math.inf,
            )
        splits += to_split.size

        keep = np.ones(len(a), dtype=bool)
        keep[to_split] = False
        mid = 0.5 * (a[to_split] + b[to_split])
        new_a = np.concatenate([a[to_split], mid])
        new_b = np.concatenate([mid, b[to_split]])
        nl7, nl15 = _panel_log_values(log_g, new_a, new_b)
        a = np.concatenate([a[keep], new_a])
        b = np.concatenate([b[keep], new_b])
        l7 = np.concatenate([l7[keep], nl7])
        l15 = np.concatenate([l15[keep], nl15])


def log_integrate_halfline(log_f: Callable, spec: QuadratureSpec | None = None) -> float:
    """Return log of int_0^infty exp(log_f(v)) dv.

    ``log_f`` may return -inf where the integrand vanishes.  With the
    RationalToUnit transform the substitution v = t/(1-t) maps the half line
    to (0, 1); with Transform.NONE the integral is split at v = 1 and the tail
    handled by v = 1/u.
    """
    if spec is None:
        spec = QuadratureSpec()
    f = _as_vectorized(log_f)

    if spec.transform is Transform.RATIONAL_TO_UNIT:
        def log_g(t):
            # Nodes that round onto the endpoints map to v = 0 or v = inf;
            # an integrable integrand vanishes there, so score them as -inf.
            t = np.asarray(t, float)
            out = np.full(t.shape, -np.inf)
            ok = (t > 0.0) & (t < 1.0)
            v = t[ok] / (1.0 - t[ok])
            with np.errstate(all="ignore"):
                out[ok] = f(v) - 2.0 * np.log1p(-t[ok])
            return out

        return _log_integrate_unit(log_g, spec.rel_tol, spec.max_subdivisions)

    # Split at 1; the tail integral uses x = 1/u with Jacobian u^{-2}.
    def log_g_head(t):
        t = np.asarray(t, float)
        out = np.full(t.shape, -np.inf)
        ok = t > 0.0
        with np.errstate(all="ignore"):
            out[ok] = f(t[ok])
        return out

    def log_g_tail(u):
        u = np.asarray(u, float)
        out = np.full(u.shape, -np.inf)
        ok = u > 0.0
        with np.errstate(all="ignore"):
            out[ok] = f(1.0 / u[ok]) - 2.0 * np.log(u[ok])
        return out

    budget = max(1, spec.max_subdivisions // 2)
    lo = _log_integrate_unit(log_g_head, spec.rel_tol, budget)
    hi = _log_integrate_unit(log_g_tail, spec.rel_tol, budget)
    return float(np.logaddexp(lo, hi))


def _log_expm1(w):
    """log(e^w - 1), elementwise, stable for both tiny and huge w."""
    w = np.asarray(w, float)
    out = np.empty_like(w)
    small = w < 0.7
    out[small] = np.log(np.expm1(w[small]))
    out[~small] = w[~small] + np.log1p(-np.exp(-w[~small]))
    return out


def log_integrate_halfline_logv(log_f_lv: Callable, spec: QuadratureSpec | None = None) -> float:
    """log int_0^infty exp(log_f(v)) dv with the integrand given as a function of log v.

    Uses the compound map v = exp(w) - 1, w = t/(1-t).  Integrands whose tail
    decays only like a power of log v (the Gamma intensity family) keep a
    non-negligible share of their mass at v far beyond float range; in the w
    coordinate that tail is algebraic and the panel refinement resolves it.
    """
    if spec is None:
        spec = QuadratureSpec()
    f = _as_vectorized(log_f_lv)

    def log_g(t):
        t = np.asarray(t, float)
        out = np.full(t.shape, -np.inf)
        ok = (t > 0.0) & (t < 1.0)
        w = t[ok] / (1.0 - t[ok])
        lv = _log_expm1(w)
        with np.errstate(all="ignore"):
            # dv = e^w dw contributes the +w term.
            out[ok] = f(lv) + w - 2.0 * np.log1p(-t[ok])
        return out

    return _log_integrate_unit(log_g, spec.rel_tol, spec.max_subdivisions)


def _cell_log_masses(t, logg):
    """Log mass of each piecewise-exponential cell defined by nodes t, values logg.

    Within a cell the log density is linear between the endpoint values; the
    cell integral then has the closed form h * (e^{l1} - e^{l0}) / (l1 - l0).
    Cells with a -inf endpoint are handled by clamping the slope.
    """
    h = np.diff(t)
    l0 = logg[:-1].copy()
    l1 = logg[1:].copy()
    top = np.maximum(l0, l1)
    both_dead = ~np.isfinite(top)
    # Clamp -inf endpoints 45 nats below the live endpoint: the resulting mass
    # error is below e^-45 relative and keeps the exponential inversion finite.
    l0 = np.maximum(l0, top - 45.0)
    l1 = np.maximum(l1, top - 45.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = l1 - l0
        # mass = h * e^top * (1 - e^{-|d|}) / |d|, with the d -> 0 limit h*e^top.
        ad = np.abs(d)
        ratio = np.where(ad < 1e-12, 1.0 - 0.5 * ad, -np.expm1(-ad) / np.where(ad == 0, 1.0, ad))
        logm = top + np.log(h) + np.log(ratio)
    logm[both_dead] = -np.inf
    return logm, l0, l1


class LogDensityGridSampler:
    """Inverse-CDF sampler for an unnormalized log density on (0, infinity).

    The log density is supplied as a function of log v.  The half line is
    mapped to (0, 1) by the same compound coordinate the log-v integrator
    uses (v = exp(w) - 1, w = t/(1-t)); the transformed log density is
    tabulated on a uniform grid that is doubled until the normalized CDF is
    stable, and draws invert the piecewise-exponential interpolant within the
    selected cell.  Draws are capped at 1e300 so downstream arithmetic stays
    finite; the probability mass affected is negligible for any density this
    package samples.
    """

    def __init__(self, log_density_lv, refine_tol=1e-6, n_init=64, max_nodes=1 << 14):
        f = _as_vectorized(log_density_lv)

        def log_g(t):
            out = np.full_like(t, -np.inf)
            interior = (t > 0.0) & (t < 1.0)
            w = t[interior] / (1.0 - t[interior])
            lv = _log_expm1(w)
            with np.errstate(all="ignore"):
                out[interior] = f(lv) + w - 2.0 * np.log1p(-t[interior])
            return out

        n = n_init
        prev_cdf = None
        prev_t = None
        while True:
            t = np.linspace(0.0, 1.0, n + 1)
            logg = log_g(t)
            if np.isnan(logg).any():
                raise ValueError("log density returned NaN")
            logm, l0, l1 = _cell_log_masses(t, logg)
            top = logm.max()
            if not np.isfinite(top):
                raise ValueError("degenerate grid: log density is -inf everywhere")
            masses = np.exp(logm - top)
            cdf = np.concatenate([[0.0], np.cumsum(masses)])
            cdf /= cdf[-1]
            if prev_cdf is not None:
                # Compare at the coarse grid's nodes.
                change = np.abs(cdf[::2] - prev_cdf).max()
                if change < refine_tol or 2 * n > max_nodes:
                    break
            prev_cdf = cdf
            prev_t = t
            n *= 2
        self._t = t
        self._cdf = cdf
        self._l0 = l0
        self._l1 = l1
        self._h = np.diff(t)

    def sample_lv(self, rng) -> float:
        """One draw, returned as log v; exact even where v overflows a float."""
        u = rng.random()
        i = int(np.searchsorted(self._cdf, u, side="right")) - 1
        i = min(max(i, 0), len(self._h) - 1)
        w = self._cdf[i + 1] - self._cdf[i]
        frac = (u - self._cdf[i]) / w if w > 0 else rng.random()
        d = self._l1[i] - self._l0[i]
        if abs(d) < 1e-10:
            x = frac
        else:
            # Invert F(x) = (e^{d x} - 1)/(e^d - 1) on the unit cell.
            x = math.log1p(frac * math.expm1(d)) / d
        t = self._t[i] + x * self._h[i]
        t = min(max(t, 1e-300), 1.0 - 1e-16)
        w = t / (1.0 - t)
        return float(_log_expm1(w))

    def sample(self, rng) -> float:
        lv = self.sample_lv(rng)
        v = math.exp(lv) if lv < 690.0 else math.inf
        return min(v, 1e300)

    def sample_many(self, n, rng):
        return np.array([self.sample(rng) for _ in range(n)])
