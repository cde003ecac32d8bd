"""Finite positive measures on an interval and integration against them.

A measure is a non-negative density (an :class:`~exactquad.expr.Expression`
in ``t``) plus a finite list of point atoms, on an interval that may be
open or infinite.  Integration over a compact interval uses interval
bisection with an embedded Gauss 7/15 pair per panel (the error estimate
is the difference of the pair); open or infinite intervals are reduced to
compact ones by a geometric exhaustion schedule and the integrals over the
nested compacts are driven to stability.

Atom contributions are added exactly, as plain sums in sorted-by-location
order, so they are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DivergentMassError,
    NegativeDensityError,
    NonConvergenceError,
    SchemaError,
)
from .expr import Expression, parse

__all__ = [
    "IntervalSpec",
    "MeasureSpec",
    "IntegralVector",
    "total_mass",
    "integrate",
    "integrate_system",
    "exhaust_interval",
    "density_cell_masses",
    "measure_from_json",
    "measure_to_json",
    "interval_from_json",
    "interval_to_json",
]

DEFAULT_TOL = 1e-10

_G7_X, _G7_W = np.polynomial.legendre.leggauss(7)
_G15_X, _G15_W = np.polynomial.legendre.leggauss(15)

_MAX_PANELS = 65536
_MAX_ROUNDS = 48
_MAX_EXHAUST_STEPS = 60


@dataclass(frozen=True)
class IntervalSpec:
    """An interval of the real line; infinite endpoints are always open."""

    lower: float
    upper: float
    lower_open: bool = False
    upper_open: bool = False

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise SchemaError(f"invalid interval [{lo}, {hi}]: need lower < upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if math.isinf(lo):
            object.__setattr__(self, "lower_open", True)
        if math.isinf(hi):
            object.__setattr__(self, "upper_open", True)

    @property
    def is_compact(self) -> bool:
        return (
            math.isfinite(self.lower)
            and math.isfinite(self.upper)
            and not self.lower_open
            and not self.upper_open
        )

    def contains(self, t: float) -> bool:
        if t < self.lower or (t == self.lower and self.lower_open):
            return False
        if t > self.upper or (t == self.upper and self.upper_open):
            return False
        return True


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Finite positive measure: optional density part plus point atoms.

    Atoms are stored sorted by location with coincident locations merged.
    The density must evaluate to >= -1e-12 wherever it is sampled (values
    in (-1e-12, 0) are clipped to zero; anything lower is a modeling error).
    """

    interval: IntervalSpec
    density: Expression | None = None
    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        merged: dict[float, float] = {}
        for loc, mass in self.atoms:
            loc, mass = float(loc), float(mass)
            if not math.isfinite(loc) or not self.interval.contains(loc):
                raise SchemaError(f"atom location {loc} outside the interval")
            if not mass > 0 or not math.isfinite(mass):
                raise SchemaError(f"atom mass must be finite and > 0, got {mass}")
            merged[loc] = merged.get(loc, 0.0) + mass
        object.__setattr__(
            self, "atoms", tuple(sorted(merged.items()))
        )
        if self.density is None and not self.atoms:
            raise SchemaError("measure needs a density or at least one atom")

    def atom_mass(self) -> float:
        return math.fsum(mass for _, mass in self.atoms)


@dataclass(frozen=True, eq=False)
class IntegralVector:
    """Component integrals of a function system with per-component error estimates."""

    values: np.ndarray
    estimated_abs_error: np.ndarray


def _density_callable(m: MeasureSpec):
    dens = m.density

    def w(ts):
        vals = np.asarray(dens(ts), dtype=float)
        if np.any(vals < -1e-12):
            worst = float(np.min(vals))
            raise NegativeDensityError(
                f"density evaluates to {worst} (< -1e-12); not a positive measure"
            )
        return np.maximum(vals, 0.0)

    return w


def _panel_rule(vec_fn, lo, hi):
    """Gauss 15 values and |G15 - G7| error estimates for a batch of panels."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts15 = (mid[:, None] + half[:, None] * _G15_X[None, :]).ravel()
    pts7 = (mid[:, None] + half[:, None] * _G7_X[None, :]).ravel()
    v15 = np.asarray(vec_fn(pts15), dtype=float).reshape(len(lo), 15, -1)
    v7 = np.asarray(vec_fn(pts7), dtype=float).reshape(len(lo), 7, -1)
    i15 = half[:, None] * np.einsum("pkn,k->pn", v15, _G15_W)
    i7 = half[:, None] * np.einsum("pkn,k->pn", v7, _G7_W)
    return i15, np.abs(i15 - i7)


def _integrate_compact(vec_fn, a, b, tol, n_out):
    """Adaptive bisection of [a, b]; returns (totals, error_sums), each (n_out,)."""
    if not b > a:
        return np.zeros(n_out), np.zeros(n_out)
    edges = np.linspace(a, b, 9)
    lo, hi = edges[:-1], edges[1:]
    vals, errs = _panel_rule(vec_fn, lo, hi)
    width_floor = 64.0 * np.finfo(float).eps * max(abs(a), abs(b), 1.0)
    for _ in range(_MAX_ROUNDS):
        order = np.argsort(lo, kind="stable")
        lo, hi, vals, errs = lo[order], hi[order], vals[order], errs[order]
        totals = vals.sum(axis=0)
        err_tot = errs.sum(axis=0)
        fn_tol = tol * (1.0 + np.abs(totals))
        if np.all(err_tot <= fn_tol):
            return totals, err_tot
        share = (hi - lo) / (b - a)
        bad = np.any(errs > 0.5 * fn_tol[None, :] * share[:, None], axis=1)
        bad &= (hi - lo) > width_floor
        if not np.any(bad):
            raise NonConvergenceError(
                f"integral over [{a}, {b}] did not reach tolerance {tol}; "
                f"residual error {float(err_tot.max())}"
            )
        if len(lo) + int(bad.sum()) > _MAX_PANELS:
            raise NonConvergenceError(
                f"integral over [{a}, {b}] exceeded the panel budget at tolerance {tol}"
            )
        mid = 0.5 * (lo[bad] + hi[bad])
        child_lo = np.concatenate([lo[bad], mid])
        child_hi = np.concatenate([mid, hi[bad]])
        child_vals, child_errs = _panel_rule(vec_fn, child_lo, child_hi)
        lo = np.concatenate([lo[~bad], child_lo])
        hi = np.concatenate([hi[~bad], child_hi])
        vals = np.concatenate([vals[~bad], child_vals])
        errs = np.concatenate([errs[~bad], child_errs])
    raise NonConvergenceError(
        f"integral over [{a}, {b}] did not converge within the refinement depth"
    )


def _system_vec_fn(m: MeasureSpec, components):
    w = _density_callable(m) if m.density is not None else None

    def vec(ts):
        cols = np.stack([comp(ts) for comp in components], axis=1)
        if w is not None:
            cols = cols * w(ts)[:, None]
        return cols

    return vec


def _atom_sums(m: MeasureSpec, components, a, b):
    """Exact atom contribution per component over atoms in [a, b]."""
    out = []
    inside = [(loc, mass) for loc, mass in m.atoms if a <= loc <= b]
    for comp in components:
        out.append(math.fsum(mass * comp(loc) for loc, mass in inside))
    return np.array(out), len(inside) == len(m.atoms)


def _compact_window_integrals(m: MeasureSpec, components, a, b, tol):
    n = len(components)
    if m.density is not None:
        vals, errs = _integrate_compact(_system_vec_fn(m, components), a, b, tol, n)
    else:
        vals, errs = np.zeros(n), np.zeros(n)
    atom_vals, covered = _atom_sums(m, components, a, b)
    return vals + atom_vals, errs, covered


def _working_windows(interval: IntervalSpec):
    """Nested compact sub-intervals exhausting an open or infinite interval."""
    lo, hi = interval.lower, interval.upper
    finite_span = hi - lo if math.isfinite(lo) and math.isfinite(hi) else None
    inset = (finite_span / 8.0) if finite_span is not None else 0.125
    anchor_lo = lo if math.isfinite(lo) else (hi if math.isfinite(hi) else 0.0)
    anchor_hi = hi if math.isfinite(hi) else (lo if math.isfinite(lo) else 0.0)
    for p in range(_MAX_EXHAUST_STEPS):
        if math.isinf(lo):
            a = anchor_lo - 2.0**p
        elif interval.lower_open:
            a = lo + inset / 2.0**p
        else:
            a = lo
        if math.isinf(hi):
            b = anchor_hi + 2.0**p
        elif interval.upper_open:
            b = hi - inset / 2.0**p
        else:
            b = hi
        if a < b:
            yield IntervalSpec(a, b)


def _exhausted_integrals(m: MeasureSpec, components, tol):
    """Integrals over a non-compact interval, with the final compact window."""
    prev = None
    stable = 0
    last = None
    for window in _working_windows(m.interval):
        vals, errs, covered = _compact_window_integrals(
            m, components, window.lower, window.upper, tol
        )
        last = (vals, errs, window)
        if prev is not None and covered:
            delta = np.abs(vals - prev)
            if np.all(delta <= 0.25 * tol * (1.0 + np.abs(vals))):
                stable += 1
                if stable >= 2:
                    return vals, errs + delta, window
            else:
                stable = 0
        prev = vals
    assert last is not None
    raise NonConvergenceError(
        "exhaustion of the interval did not stabilize within the expansion "
        f"schedule (last window [{last[2].lower}, {last[2].upper}])"
    )


def total_mass(m: MeasureSpec, tol: float = DEFAULT_TOL) -> float:
    """Total mass of the measure: density integral plus atom masses."""
    one = parse("1")
    try:
        if m.interval.is_compact:
            vals, _, _ = _compact_window_integrals(m, [one], m.interval.lower,
                                                   m.interval.upper, tol)
        else:
            vals, _, _ = _exhausted_integrals(m, [one], tol)
    except NonConvergenceError as exc:
        raise DivergentMassError(str(exc)) from exc
    mass = float(vals[0])
    if not math.isfinite(mass) or mass <= 0.0:
        raise SchemaError(f"measure has non-positive total mass {mass}")
    return mass


def integrate(m: MeasureSpec, f: Expression, tol: float = DEFAULT_TOL) -> float:
    """Integral of ``f`` over the interval against the measure."""
    if m.interval.is_compact:
        vals, _, _ = _compact_window_integrals(m, [f], m.interval.lower,
                                               m.interval.upper, tol)
    else:
        vals, _, _ = _exhausted_integrals(m, [f], tol)
    return float(vals[0])


def integrate_system(m: MeasureSpec, curve, tol: float = DEFAULT_TOL) -> IntegralVector:
    """Componentwise integrals of a function system, sharing adaptive panels.

    ``curve`` is anything with a ``components`` sequence of expressions
    (see :class:`exactquad.hull.CurveSystem`).
    """
    components = list(curve.components)
    if m.interval.is_compact:
        vals, errs, _ = _compact_window_integrals(m, components, m.interval.lower,
                                                  m.interval.upper, tol)
    else:
        vals, errs, _ = _exhausted_integrals(m, components, tol)
    return IntegralVector(values=vals, estimated_abs_error=errs)


def exhaust_interval(m: MeasureSpec, curve, tol: float = DEFAULT_TOL):
    """Reduce an open or infinite interval to a compact working window.

    Returns ``(integrals, window)`` where ``integrals`` estimates the
    system integrals over the whole interval and ``window`` is a compact
    sub-interval carrying all but a ``tol`` fraction of the mass.  Compact
    input is returned unchanged (identity).
    """
    components = list(curve.components)
    if m.interval.is_compact:
        vals, errs, _ = _compact_window_integrals(m, components, m.interval.lower,
                                                  m.interval.upper, tol)
        return IntegralVector(values=vals, estimated_abs_error=errs), m.interval
    vals, errs, window = _exhausted_integrals(m, components, tol)
    return IntegralVector(values=vals, estimated_abs_error=errs), window


def density_cell_masses(m: MeasureSpec, edges: np.ndarray) -> np.ndarray:
    """Density mass of each cell ``[edges[i], edges[i+1])``, atoms excluded.

    Uses one fixed 15-point Gauss rule per cell: the caller corrects the
    resulting weights against exact integrals, so per-cell adaptivity is
    not needed.
    """
    if m.density is None:
        return np.zeros(len(edges) - 1)
    w = _density_callable(m)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = (mid[:, None] + half[:, None] * _G15_X[None, :]).ravel()
    vals = w(pts).reshape(len(lo), 15)
    return np.maximum(half * (vals @ _G15_W), 0.0)


# --- JSON wire format -------------------------------------------------------

def _reject_unknown(obj: dict, allowed: set[str], what: str):
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"unknown field(s) {sorted(unknown)} in {what}")


def interval_from_json(obj) -> IntervalSpec:
    if not isinstance(obj, dict):
        raise SchemaError("interval must be an object")
    _reject_unknown(obj, {"lower", "upper", "lower_open", "upper_open"}, "interval")
    try:
        lower, upper = obj["lower"], obj["upper"]
    except KeyError as exc:
        raise SchemaError(f"interval is missing field {exc.args[0]!r}") from None
    if lower == "-inf":
        lower = -math.inf
    if upper == "inf":
        upper = math.inf
    if not isinstance(lower, (int, float)) or not isinstance(upper, (int, float)):
        raise SchemaError("interval endpoints must be numbers, \"-inf\" or \"inf\"")
    return IntervalSpec(
        lower=float(lower),
        upper=float(upper),
        lower_open=bool(obj.get("lower_open", False)),
        upper_open=bool(obj.get("upper_open", False)),
    )


def interval_to_json(iv: IntervalSpec) -> dict:
    return {
        "lower": "-inf" if math.isinf(iv.lower) else iv.lower,
        "upper": "inf" if math.isinf(iv.upper) else iv.upper,
        "lower_open": iv.lower_open,
        "upper_open": iv.upper_open,
    }


def measure_from_json(obj) -> MeasureSpec:
    if not isinstance(obj, dict):
        raise SchemaError("measure must be an object")
    _reject_unknown(obj, {"interval", "density", "atoms"}, "measure")
    if "interval" not in obj:
        raise SchemaError("measure is missing field 'interval'")
    interval = interval_from_json(obj["interval"])
    density_text = obj.get("density")
    density = None
    if density_text is not None:
        if not isinstance(density_text, str):
            raise SchemaError("measure density must be a string or null")
        density = parse(density_text)
    atoms = []
    for i, atom in enumerate(obj.get("atoms", []) or []):
        if not isinstance(atom, dict):
            raise SchemaError(f"atom #{i} must be an object")
        _reject_unknown(atom, {"t", "mass"}, f"atom #{i}")
        try:
            atoms.append((float(atom["t"]), float(atom["mass"])))
        except KeyError as exc:
            raise SchemaError(f"atom #{i} is missing field {exc.args[0]!r}") from None
    return MeasureSpec(interval=interval, density=density, atoms=tuple(atoms))


def measure_to_json(m: MeasureSpec) -> dict:
    return {
        "interval": interval_to_json(m.interval),
        "density": m.density.text if m.density is not None else None,
        "atoms": [{"t": loc, "mass": mass} for loc, mass in m.atoms],
    }
