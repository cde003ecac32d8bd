"""Convex-combination machinery on curves in R^n.

Two reduction mechanisms live here.  ``caratheodory_finite`` prunes a large
non-negative combination of points in R^n down to at most n+1 support
points by repeatedly shifting weight along a null vector of the homogeneous
system [points; 1] until a weight hits zero.  ``reduce_on_curve`` takes a
strictly positive combination of n+1 ordered points of a continuous curve
and produces at most n curve points with the same total weight and the
same weighted sum: it rebuilds coordinates in the barycentric frame rooted
at the target, slides the parameter from the smallest support point until
one coordinate first crosses zero, and reweights the remaining points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import (
    InfeasibleCombinationError,
    NoCrossingError,
    RankDeficiencyError,
    ReconstructionError,
    SchemaError,
)
from .expr import Expression, parse
from .measure import IntervalSpec

__all__ = [
    "ConvexCombination",
    "CurveSystem",
    "BarycentricFrame",
    "caratheodory_finite",
    "build_frame",
    "coords",
    "first_zero_crossing",
    "reduce_on_curve",
    "combination_from_json",
    "combination_to_json",
]

RECON_TOL = 1e-9
RANK_TOL = 1e-10
BISECT_TOL = 1e-13
ZERO_TOL = 1e-11
CROSSING_GRID = 4096
CROSSING_GRID_CAP = 2**20


@dataclass(frozen=True, eq=False)
class ConvexCombination:
    """Support parameters with non-negative weights summing to ``total``."""

    params: np.ndarray
    weights: np.ndarray
    total: float

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        total = float(self.total)
        if params.ndim != 1 or params.shape != weights.shape or params.size == 0:
            raise SchemaError("params and weights must be equal-length 1-d arrays")
        if not math.isfinite(total) or total <= 0:
            raise SchemaError(f"total must be finite and > 0, got {total}")
        if np.any(np.diff(params) <= 0):
            raise SchemaError("params must be strictly increasing")
        floor = -1e-12 * max(1.0, total)
        if np.any(weights < floor):
            raise SchemaError(f"weights below {floor} are not a convex combination")
        weights = np.maximum(weights, 0.0)
        if abs(math.fsum(weights) - total) > 1e-12 * total:
            raise SchemaError("weights do not sum to total within 1e-12 relative")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "total", total)

    def __len__(self):
        return self.params.size


@dataclass(frozen=True, eq=False)
class CurveSystem:
    """n continuous functions of t on an interval, viewed as a curve in R^n."""

    components: tuple[Expression, ...]
    interval: IntervalSpec

    def __post_init__(self):
        if len(self.components) == 0:
            raise SchemaError("a curve needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def n(self) -> int:
        return len(self.components)

    @classmethod
    def from_texts(cls, texts, interval: IntervalSpec) -> "CurveSystem":
        return cls(tuple(parse(s) for s in texts), interval)

    def evaluate(self, ts) -> np.ndarray:
        """Curve values at the given parameters, one row per parameter."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return np.stack([comp(ts) for comp in self.components], axis=1)

    def evaluate_point(self, t: float) -> np.ndarray:
        return np.array([comp(float(t)) for comp in self.components])


@dataclass(frozen=True, eq=False)
class BarycentricFrame:
    """Coordinates rooted at a target point with curve-point basis vectors."""

    origin: np.ndarray
    basis: np.ndarray  # columns are basis vectors
    lu: tuple


def build_frame(v, curve_points, rank_tol: float = RANK_TOL) -> BarycentricFrame:
    """Frame with origin ``v`` and basis vectors ``curve_points[j] - v``.

    ``curve_points`` holds n points of R^n as rows.  Raises
    :class:`RankDeficiencyError` when the basis is numerically singular
    (smallest singular value <= ``rank_tol`` times the largest).
    """
    v = np.asarray(v, dtype=float)
    pts = np.asarray(curve_points, dtype=float)
    n = v.size
    if pts.shape != (n, n):
        raise SchemaError(f"need exactly {n} points of R^{n}, got shape {pts.shape}")
    basis = (pts - v).T
    s = np.linalg.svd(basis, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
        raise RankDeficiencyError(
            f"frame basis is rank deficient (singular values {s[0]:.3e}..{s[-1]:.3e})"
        )
    return BarycentricFrame(origin=v, basis=basis, lu=lu_factor(basis))


def coords(frame: BarycentricFrame, x) -> np.ndarray:
    """Frame coordinates p with ``frame.basis @ p = x - frame.origin``.

    Accepts a single point (n,) or a batch (k, n); returns matching shape.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return lu_solve(frame.lu, x - frame.origin)
    return lu_solve(frame.lu, (x - frame.origin).T).T


def _null_direction(points, target):
    """Sign-normalized null vector of the homogeneous system [points - target; 1].

    Returns ``(c, smin, smax)``;  smin/smax are the extreme singular values,
    so the caller can tell a structural null vector from a near-dependence.
    """
    a = np.vstack([(points - target).T, np.ones(len(points))])
    _, s, vt = np.linalg.svd(a)
    c = vt[-1]
    i_star = int(np.argmax(np.abs(c)))
    if c[i_star] < 0:
        c = -c
    smin = float(s[-1]) if len(s) == len(c) else 0.0
    return c, smin, float(s[0])


def _shift_to_zero(weights, c):
    """Largest step along -c keeping all weights >= 0; returns (new_w, dropped)."""
    pos = c > 1e-14 * np.abs(c).max()
    ratios = np.where(pos, weights / np.where(pos, c, 1.0), np.inf)
    j = int(np.argmin(ratios))
    theta = ratios[j]
    out = weights - theta * c
    out[j] = 0.0
    return np.maximum(out, 0.0), j


def caratheodory_finite(points, weights, target, params=None,
                        feas_tol: float = RECON_TOL,
                        recon_tol: float = RECON_TOL) -> ConvexCombination:
    """Prune a combination of m points of R^n to at most n+1 support points.

    ``points`` is (m, n), ``weights`` non-negative with positive sum, and
    the weighted mean of the points must already reproduce ``target``
    within ``feas_tol`` (relative); otherwise the input is infeasible.
    ``params`` optionally maps point indices to curve parameters; when
    omitted, point indices serve as the output parameters.

    Eliminations run over batches of n+2 active points: the homogeneous
    system [points; 1] always has a null vector there, and shifting the
    weights along it drives one weight to zero without changing the total
    or the weighted sum.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float).copy()
    target = np.asarray(target, dtype=float)
    if points.ndim != 2 or points.shape[0] != weights.size:
        raise SchemaError("points must be (m, n) with one weight per point")
    m, n = points.shape
    if np.any(weights < -1e-12):
        raise SchemaError("weights must be non-negative")
    weights = np.maximum(weights, 0.0)
    total = float(math.fsum(weights))
    if total <= 0:
        raise SchemaError("weights must have positive sum")
    feas_scale = 1.0 + float(np.max(np.abs(target)))
    gap = np.max(np.abs(weights @ points / total - target))
    if gap > feas_tol * feas_scale:
        raise InfeasibleCombinationError(
            f"input combination misses the target by {gap:.3e} "
            f"(allowed {feas_tol * feas_scale:.3e})"
        )

    floor = 1e-15 * total
    active = np.flatnonzero(weights > floor)
    while active.size > n + 1:
        sub = active[: n + 2]
        c, _, _ = _null_direction(points[sub], target)
        new_w, _ = _shift_to_zero(weights[sub], c)
        weights[sub] = new_w
        active = np.flatnonzero(weights > floor)

    # keep eliminating while the support is still affinely dependent, so a
    # target in a lower-dimensional affine hull gets a matching support size
    snapshot = weights.copy()
    while active.size > 1:
        c, smin, smax = _null_direction(points[active], target)
        if smin > RANK_TOL * smax:
            break
        new_w, _ = _shift_to_zero(weights[active], c)
        weights[active] = new_w
        active = np.flatnonzero(weights > floor)
    w_act = weights[active]
    if (
        np.max(np.abs(w_act @ points[active] / math.fsum(w_act) - target))
        > recon_tol * feas_scale
    ):
        # near-null eliminations drifted too far; the <= n+1 support stands
        weights = snapshot
        active = np.flatnonzero(weights > floor)

    kept = active
    w_out = weights[kept]
    w_out *= total / math.fsum(w_out)
    recon = np.max(np.abs(w_out @ points[kept] / total - target))
    if recon > recon_tol * feas_scale:
        raise ReconstructionError(
            f"reduced combination misses the target by {recon:.3e}"
        )
    if params is None:
        out_params = kept.astype(float)
    else:
        out_params = np.asarray(params, dtype=float)[kept]
    return ConvexCombination(params=out_params, weights=w_out, total=total)


def first_zero_crossing(frame: BarycentricFrame, curve: CurveSystem,
                        t0: float, t_stop: float,
                        grid: int = CROSSING_GRID,
                        grid_cap: int = CROSSING_GRID_CAP,
                        zero_tol: float = ZERO_TOL,
                        bisect_tol: float = BISECT_TOL):
    """First parameter in (t0, t_stop] where some frame coordinate reaches zero.

    Requires all coordinates of ``x(t0) - origin`` negative and a crossing
    before ``t_stop`` (guaranteed when the frame was built from curve
    points at parameters > t0 carrying positive weight).  Returns
    ``(t_bar, k)`` where k is the 0-based index of the vanishing
    coordinate; ties pick the smallest index.
    """
    p0 = coords(frame, curve.evaluate_point(t0))
    if p0.max() >= -zero_tol:
        return float(t0), int(np.flatnonzero(p0 >= -zero_tol)[0])
    scale_t = max(1.0, abs(t0), abs(t_stop))

    m = grid
    lo_t, hi_t = None, None
    while True:
        ts = np.linspace(t0, t_stop, m + 1)
        g = coords(frame, curve.evaluate(ts)).max(axis=1)
        hits = np.flatnonzero(g >= 0.0)
        if hits.size:
            i = int(hits[0])
            lo_t, hi_t = float(ts[i - 1]), float(ts[i])
            break
        if m >= grid_cap:
            raise NoCrossingError(
                f"no coordinate sign change found in ({t0}, {t_stop}] "
                f"at grid resolution {m}"
            )
        m *= 2

    def g_at(t: float) -> float:
        return float(coords(frame, curve.evaluate_point(t)).max())

    width_floor = 8.0 * np.finfo(float).eps * scale_t
    while hi_t - lo_t > width_floor and (
        hi_t - lo_t > bisect_tol * scale_t or g_at(hi_t) > zero_tol
    ):
        mid = 0.5 * (lo_t + hi_t)
        if g_at(mid) >= 0.0:
            hi_t = mid
        else:
            lo_t = mid
    p = coords(frame, curve.evaluate_point(hi_t))
    k = int(np.flatnonzero(p >= -zero_tol)[0])
    return float(hi_t), k


def _clip_bounds(iv: IntervalSpec):
    """Clipping range for node parameters: open finite ends get a tiny inset."""
    span = iv.upper - iv.lower if math.isfinite(iv.upper - iv.lower) else 1.0
    lo = iv.lower
    if math.isfinite(lo) and iv.lower_open:
        lo = lo + 1e-12 * span
    hi = iv.upper
    if math.isfinite(hi) and iv.upper_open:
        hi = hi - 1e-12 * span
    return lo, hi


_LM_LADDER = (0.0, 1e-12, 1e-9, 1e-6, 1e-3, 1e-1)
_LM_ALPHAS = (1.0, 0.5, 0.25)


def polish_combination(curve: CurveSystem, params, weights, target, total,
                       target_resid: float = 1e-12, max_iter: int = 200):
    """Damped Gauss-Newton refinement of a reproducing combination.

    Drives the residual map (sum(w_i x(t_i)) - total*target, sum(w_i) - total)
    toward zero by moving both the support parameters and the weights.
    Residual rows are scaled relative to the target components, so
    ``target_resid`` is a relative stopping measure.  Steps come from an
    SVD factorization of the Jacobian with a ladder of Levenberg damping
    values (near-dependent systems make the plain Gauss-Newton step
    overshoot along weak singular directions); the best strictly-improving
    trial wins.  Parameters are clipped into the curve interval (nudged
    inside open ends) and weights are projected to be non-negative.

    Returns ``(params, weights, converged)``.  A ``False`` flag means the
    iteration stalled at a stationary point above ``target_resid``; the
    caller decides whether the achieved residual is acceptable.
    """
    params = np.asarray(params, dtype=float).copy()
    weights = np.maximum(np.asarray(weights, dtype=float), 0.0)
    target = np.asarray(target, dtype=float)
    n, m = curve.n, params.size
    lo, hi = _clip_bounds(curve.interval)
    row_scale = np.concatenate(
        [1.0 / (1.0 + np.abs(total * target)), [1.0 / (1.0 + abs(total))]]
    )

    def residual(p, w):
        x = curve.evaluate(p)
        raw = np.concatenate([w @ x - total * target, [math.fsum(w) - total]])
        return raw * row_scale

    r = residual(params, weights)
    norm = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if float(np.max(np.abs(r))) <= target_resid:
            return params, weights, True
        x = curve.evaluate(params)
        h = np.cbrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(params))
        up = np.minimum(params + h, hi)
        dn = np.maximum(params - h, lo)
        dx = (curve.evaluate(up) - curve.evaluate(dn)) / (up - dn)[:, None]
        jac = np.zeros((n + 1, 2 * m))
        jac[:n, :m] = (weights[:, None] * dx).T
        jac[:n, m:] = x.T
        jac[n, m:] = 1.0
        jac *= row_scale[:, None]
        u, s, vt = np.linalg.svd(jac, full_matrices=False)
        utr = u.T @ (-r)
        best = None
        for lam_rel in _LM_LADDER:
            lam = lam_rel * s[0]
            step = vt.T @ (s / (s * s + lam * lam) * utr)
            for alpha in _LM_ALPHAS:
                p_try = np.clip(params + alpha * step[:m], lo, hi)
                w_try = np.maximum(weights + alpha * step[m:], 0.0)
                r_try = residual(p_try, w_try)
                norm_try = float(np.linalg.norm(r_try))
                if best is None or norm_try < best[0]:
                    best = (norm_try, p_try, w_try, r_try)
        if best is None or best[0] >= norm:
            break  # first-order stationary; caller checks the residual gate
        norm, params, weights, r = best
    return params, weights, float(np.max(np.abs(r))) <= target_resid


def _rebuild(params, weights, points, target, total, recon_tol):
    order = np.argsort(params, kind="stable")
    params, weights, points = params[order], weights[order], points[order]
    # merge exactly coincident parameters so params stay strictly increasing
    uniq, inverse = np.unique(params, return_inverse=True)
    if uniq.size != params.size:
        merged = np.zeros(uniq.size)
        np.add.at(merged, inverse, weights)
        pts = np.zeros((uniq.size, points.shape[1]))
        pts[inverse] = points
        params, weights, points = uniq, merged, pts
    weights = weights * (total / math.fsum(weights))
    scale = 1.0 + float(np.max(np.abs(target)))
    recon = np.max(np.abs(weights @ points - total * target)) / max(total, 1.0)
    if recon > recon_tol * scale:
        raise ReconstructionError(
            f"reduced combination misses the target by {recon:.3e}"
        )
    return ConvexCombination(params=params, weights=weights, total=total)


def reduce_on_curve(curve: CurveSystem, comb: ConvexCombination, v,
                    recon_tol: float = RECON_TOL,
                    rank_tol: float = RANK_TOL,
                    zero_tol: float = ZERO_TOL,
                    bisect_tol: float = BISECT_TOL) -> ConvexCombination:
    """Re-express ``v`` with at most n points of the curve.

    ``comb`` must reproduce ``v``: sum(w_i x(t_i)) = total * v.  Terms with
    zero weight are dropped first; if more than n+1 positive terms remain
    they are pruned with :func:`caratheodory_finite`.  The n+1 -> n step
    walks the curve from the smallest support parameter to the first
    coordinate zero-crossing and reweights; when the frame is rank
    deficient (the support points are affinely dependent) one point is
    eliminated along a null vector instead.
    """
    v = np.asarray(v, dtype=float)
    n = curve.n
    if v.size != n:
        raise SchemaError(f"target has dimension {v.size}, curve has {n}")
    total = comb.total
    keep = comb.weights > 0.0
    params = comb.params[keep]
    weights = comb.weights[keep]
    points = curve.evaluate(params)

    scale = 1.0 + float(np.max(np.abs(v)))
    gap = np.max(np.abs(weights @ points - total * v)) / max(total, 1.0)
    if gap > recon_tol * scale:
        raise InfeasibleCombinationError(
            f"combination does not reproduce the target (off by {gap:.3e})"
        )

    if params.size > n + 1:
        pruned = caratheodory_finite(points, weights, v, params=params,
                                     recon_tol=recon_tol)
        params, weights = pruned.params, pruned.weights
        points = curve.evaluate(params)
    if params.size <= n:
        return _rebuild(params, weights, points, v, total, recon_tol)

    def finish(new_params, new_weights, new_points):
        try:
            return _rebuild(new_params, new_weights, new_points, v, total,
                            recon_tol)
        except ReconstructionError:
            # an ill-conditioned frame can leave the dropped coordinate at
            # its forward-error floor; a local Gauss-Newton solve recovers
            # the nearby exact root
            scale = 1.0 + float(np.max(np.abs(v)))
            p2, w2, _ = polish_combination(
                curve, new_params, new_weights, v, total,
                target_resid=0.01 * recon_tol * scale * max(total, 1.0),
            )
            return _rebuild(p2, w2, curve.evaluate(p2), v, total, recon_tol)

    try:
        frame = build_frame(v, points[1:], rank_tol=rank_tol)
    except RankDeficiencyError:
        c, _, _ = _null_direction(points, v)
        new_w, _ = _shift_to_zero(weights, c)
        keep = new_w > 0.0
        return finish(params[keep], new_w[keep], points[keep])

    t_bar, k = first_zero_crossing(frame, curve, params[0], params[1],
                                   zero_tol=zero_tol, bisect_tol=bisect_tol)
    p = coords(frame, curve.evaluate_point(t_bar))
    p[k] = 0.0
    p = np.minimum(p, 0.0)  # residual positives are within zero_tol
    denom = 1.0 - p.sum()
    new_params = np.concatenate([[t_bar], np.delete(params[1:], k)])
    new_nu = np.concatenate([[1.0 / denom], -np.delete(p, k) / denom])
    new_points = np.vstack([curve.evaluate_point(t_bar),
                            np.delete(points[1:], k, axis=0)])
    return finish(new_params, new_nu * total, new_points)


def combination_from_json(obj) -> ConvexCombination:
    if not isinstance(obj, dict):
        raise SchemaError("combination must be an object")
    unknown = set(obj) - {"params", "weights", "total"}
    if unknown:
        raise SchemaError(f"unknown field(s) {sorted(unknown)} in combination")
    try:
        return ConvexCombination(
            params=np.asarray(obj["params"], dtype=float),
            weights=np.asarray(obj["weights"], dtype=float),
            total=float(obj["total"]),
        )
    except KeyError as exc:
        raise SchemaError(f"combination is missing field {exc.args[0]!r}") from None


def combination_to_json(comb: ConvexCombination) -> dict:
    return {
        "params": [float(x) for x in comb.params],
        "weights": [float(x) for x in comb.weights],
        "total": float(comb.total),
    }
