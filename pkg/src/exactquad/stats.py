"""Covariance representation and Gruss-type bounds for functions of a
random variable.

For continuous f, g with finite second moments under a probability measure
on an interval, the covariance of f(X) and g(X) equals
(1/4)(f(t1) - f(t2))(g(t1) - g(t2)) for some t1, t2 in the interval.  The
witness pair is built constructively: a two-node exact rule for the system
(x1, x2) = ((f - Ef)(g - Eg), f) gives

    Cov = lambda (1 - lambda) (f(t1) - f(t2)) (g(t1) - g(t2)),

and a bisection along the curve parameter moves the second node until the
factor lambda(1 - lambda) is replaced by its maximal value 1/4.  The
covariance bound |Cov| <= (1/4)(M_f - m_f)(M_g - m_g) then follows with
function extrema over the interval, and a discrete sequence version falls
out by using an atomic measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    MomentDivergenceError,
    NonConvergenceError,
    SchemaError,
    UnboundedFunctionError,
    WeightNormalizationError,
)
from .expr import Expression
from .hull import CurveSystem
from .measure import IntervalSpec, MeasureSpec, integrate_system, total_mass
from .synth import SynthesisConfig, synthesize_rule

__all__ = [
    "CovarianceWitness",
    "GrussReport",
    "covariance",
    "covariance_witness",
    "gruss_check",
    "gruss_discrete",
]

_SCAN_POINTS = 4096
_GOLDEN_TOL = 1e-10
_MAX_EXPAND = 60


@dataclass(frozen=True)
class CovarianceWitness:
    """Two points realizing the covariance as a quarter product gap."""

    t1: float
    t2: float
    covariance: float
    product_gap: float

    def to_json(self) -> dict:
        return {
            "t1": self.t1,
            "t2": self.t2,
            "covariance": self.covariance,
            "product_gap": self.product_gap,
        }


@dataclass(frozen=True)
class GrussReport:
    covariance: float
    m_f: float
    M_f: float
    m_g: float
    M_g: float
    bound: float
    slack: float

    def to_json(self) -> dict:
        return {
            "covariance": self.covariance,
            "m_f": self.m_f,
            "M_f": self.M_f,
            "m_g": self.m_g,
            "M_g": self.M_g,
            "bound": self.bound,
            "slack": self.slack,
        }


def _moments(f: Expression, g: Expression, m: MeasureSpec, tol: float):
    """Probability-normalized Ef, Eg, Efg; checks the second moments."""
    system = CurveSystem(
        components=(f, g, f * g, f * f, g * g), interval=m.interval
    )
    try:
        mass = total_mass(m, tol)
        vals = integrate_system(m, system, tol).values
    except NonConvergenceError as exc:
        raise MomentDivergenceError(
            f"first or second moments do not converge: {exc}"
        ) from exc
    ef, eg, efg, ef2, eg2 = (float(v) / mass for v in vals)
    if not all(math.isfinite(v) for v in (ef, eg, efg, ef2, eg2)):
        raise MomentDivergenceError("moments are not finite")
    return ef, eg, efg


def covariance(f: Expression, g: Expression, m: MeasureSpec,
               tol: float = 1e-11) -> float:
    """Cov(f(X), g(X)) under the measure normalized to a probability law."""
    ef, eg, efg = _moments(f, g, m, tol)
    return efg - ef * eg


def _support_point(m: MeasureSpec) -> float:
    if m.atoms:
        return float(max(m.atoms, key=lambda a: a[1])[0])
    lo, hi = m.interval.lower, m.interval.upper
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + 1.0
    if math.isfinite(hi):
        return hi - 1.0
    return 0.0


def covariance_witness(f: Expression, g: Expression, m: MeasureSpec,
                       config: SynthesisConfig | None = None) -> CovarianceWitness:
    """Points (t1, t2) with Cov(f(X), g(X)) = (1/4)(f(t1)-f(t2))(g(t1)-g(t2)).

    Zero covariance returns t1 = t2.  Otherwise a two-node exact rule for
    ((f - Ef)(g - Eg), f) supplies nodes satisfying the lambda(1 - lambda)
    identity, and a bisection between them (t1 held fixed) locates the
    point where the product gap reaches 4 Cov, which exists by continuity.
    A failed bracket is reported as an error, never patched.
    """
    cfg = config or SynthesisConfig()
    ef, eg, efg = _moments(f, g, m, tol=1e-11)
    cov = efg - ef * eg
    zero_scale = 1e-12 * (1.0 + abs(efg) + abs(ef * eg))
    if abs(cov) <= zero_scale:
        t = _support_point(m)
        return CovarianceWitness(t1=t, t2=t, covariance=cov, product_gap=0.0)

    x1 = (f - ef) * (g - eg)
    system = CurveSystem(components=(x1, f), interval=m.interval)
    rule = synthesize_rule(system, m, cfg)
    nu = rule.weights / math.fsum(rule.weights)

    def gap(a: float, b: float) -> float:
        return (f(a) - f(b)) * (g(a) - g(b))

    if len(rule) == 1:
        # a single node forces lambda in {0, 1}, which forces Cov = 0;
        # reaching here with |Cov| above the gate is an inconsistency
        if abs(cov) > cfg.residual_gate * (1.0 + abs(cov)):
            raise NonConvergenceError(
                "single-node rule is inconsistent with a non-zero covariance"
            )
        t = float(rule.nodes[0])
        return CovarianceWitness(t1=t, t2=t, covariance=cov, product_gap=0.0)

    t1, t2 = float(rule.nodes[0]), float(rule.nodes[1])
    lam = float(nu[0])
    if abs(lam * (1.0 - lam) - 0.25) <= 1e-12:
        return CovarianceWitness(t1=t1, t2=t2, covariance=cov,
                                 product_gap=0.25 * gap(t1, t2))

    # move the second point until the gap h(s) = (f(t1)-f(s))(g(t1)-g(s))
    # grows from 0 to 4 Cov; h(t2) = Cov / (lam (1 - lam)) overshoots it
    sign = 1.0 if cov > 0 else -1.0

    def psi(s: float) -> float:
        return sign * (gap(t1, s) - 4.0 * cov)

    a, b = t1, t2
    psi_b = psi(b)
    if psi_b < 0.0:
        raise NonConvergenceError(
            "witness bracket failed: the two-node gap does not cover 4*Cov "
            f"(psi(t2) = {psi_b:.3e}); continuity assumptions look violated"
        )
    tol_phi = 1e-11 * (1.0 + 4.0 * abs(cov))
    width_floor = 8.0 * np.finfo(float).eps * max(1.0, abs(t1), abs(t2))
    while abs(b - a) > width_floor:
        mid = 0.5 * (a + b)
        val = psi(mid)
        if abs(val) <= tol_phi:
            b = mid
            break
        if val >= 0.0:
            b = mid
        else:
            a = mid
    s_star = b
    product_gap = 0.25 * gap(t1, s_star)
    if abs(product_gap - cov) > 1e-8 * (1.0 + abs(cov)):
        raise NonConvergenceError(
            f"witness bisection left a gap of {abs(product_gap - cov):.3e}; "
            "continuity assumptions look violated"
        )
    return CovarianceWitness(t1=t1, t2=float(s_star), covariance=cov,
                             product_gap=product_gap)


def _refine_extremum(fn, lo: float, hi: float, sign: float) -> float:
    """Golden-section maximum of sign*fn on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = sign * fn(c), sign * fn(d)
    while (b - a) > _GOLDEN_TOL * max(1.0, abs(lo), abs(hi)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = sign * fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = sign * fn(d)
    return sign * max(fc, fd)


def _window_extrema(fn, lo: float, hi: float, extra: np.ndarray):
    ts = np.linspace(lo, hi, _SCAN_POINTS)
    if extra.size:
        ts = np.unique(np.concatenate([ts, extra]))
    vals = fn(ts)
    i_max = int(np.argmax(vals))
    i_min = int(np.argmin(vals))

    def cell(i):
        return ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]

    hi_val = max(float(vals[i_max]), _refine_extremum(fn, *cell(i_max), sign=1.0))
    lo_val = min(float(vals[i_min]), _refine_extremum(fn, *cell(i_min), sign=-1.0))
    return lo_val, hi_val


def _extrema(fn, m: MeasureSpec):
    """Infimum and supremum of fn over the measure's interval."""
    iv = m.interval
    atoms = np.array([loc for loc, _ in m.atoms])
    if iv.is_compact:
        return _window_extrema(fn, iv.lower, iv.upper, atoms)
    prev = None
    stable = 0
    from .measure import _working_windows

    for window in _working_windows(iv):
        inside = atoms[(atoms >= window.lower) & (atoms <= window.upper)]
        lo_val, hi_val = _window_extrema(fn, window.lower, window.upper, inside)
        if prev is not None and inside.size == atoms.size:
            d_lo = abs(lo_val - prev[0]) <= 1e-10 * (1.0 + abs(lo_val))
            d_hi = abs(hi_val - prev[1]) <= 1e-10 * (1.0 + abs(hi_val))
            if d_lo and d_hi:
                stable += 1
                if stable >= 2:
                    return lo_val, hi_val
            else:
                stable = 0
        prev = (lo_val, hi_val)
    raise UnboundedFunctionError(
        "extrema did not stabilize under interval expansion; "
        "the function looks unbounded on the interval"
    )


def gruss_check(f: Expression, g: Expression, m: MeasureSpec,
                config: SynthesisConfig | None = None) -> GrussReport:
    """Covariance bound report: |Cov| <= (1/4)(M_f - m_f)(M_g - m_g)."""
    cov = covariance(f, g, m)
    m_f, big_f = _extrema(f, m)
    m_g, big_g = _extrema(g, m)
    bound = 0.25 * (big_f - m_f) * (big_g - m_g)
    return GrussReport(
        covariance=cov,
        m_f=m_f,
        M_f=big_f,
        m_g=m_g,
        M_g=big_g,
        bound=bound,
        slack=bound - abs(cov),
    )


def gruss_discrete(p, u, v) -> GrussReport:
    """Discrete covariance bound for weighted bounded sequences.

    ``p`` must be non-negative and sum to 1 within 1e-12; all three
    sequences share one length (at most 10^6, so the fixed-order exact
    sums stay reproducible).
    """
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if p.ndim != 1 or p.shape != u.shape or p.shape != v.shape:
        raise SchemaError("p, u, v must be 1-d sequences of one length")
    if p.size == 0 or p.size > 10**6:
        raise SchemaError("sequence length must be between 1 and 10^6")
    if np.any(p < 0.0):
        raise WeightNormalizationError("weights must be non-negative")
    total = math.fsum(p)
    if abs(total - 1.0) > 1e-12:
        raise WeightNormalizationError(
            f"weights sum to {total}, not 1 (within 1e-12)"
        )
    e_u = math.fsum(p * u)
    e_v = math.fsum(p * v)
    e_uv = math.fsum(p * u * v)
    cov = e_uv - e_u * e_v
    m_u, big_u = float(np.min(u)), float(np.max(u))
    m_v, big_v = float(np.min(v)), float(np.max(v))
    bound = 0.25 * (big_u - m_u) * (big_v - m_v)
    return GrussReport(
        covariance=cov,
        m_f=m_u,
        M_f=big_u,
        m_g=m_v,
        M_g=big_v,
        bound=bound,
        slack=bound - abs(cov),
    )
