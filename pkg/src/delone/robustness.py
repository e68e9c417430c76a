"""Robustness of ordered point configurations and its decay under perturbation.

An ordered set is rho-robust when every vertex lies at distance >= rho from
the affine span of its predecessors.  The recursion rho_m tracks how much
robustness survives after each vertex moves by at most eps; v2_constant is
the minimal parallelogram area over sphere-constrained triples which feeds
the volume lower bounds for robust simplices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .errors import InvalidBudgetError, OutOfChartError

#: Safety factor applied to the numerically-minimized parallelogram area so
#: the reported value is a lower bound despite sampling error.
V2_SAFETY = 0.9

_V2_SEED = 20240915


@dataclass(frozen=True)
class RobustnessReport:
    """Per-prefix distances d(pts[k+1], aff(pts[0..k])) and their minimum."""

    per_prefix_distance: tuple
    rho: float


def robustness_of(pts) -> RobustnessReport:
    """Prefix-order robustness of an ordered point list (>= 2 points)."""
    p = np.asarray(pts, dtype=float)
    if p.shape[0] < 2:
        raise ValueError("robustness needs at least 2 points")
    dists = []
    for k in range(p.shape[0] - 1):
        dists.append(linalg.distance_to_affine_span(p[k + 1], p[: k + 1]))
    return RobustnessReport(per_prefix_distance=tuple(dists), rho=float(min(dists)))


def delta_m_sequence(rho0: float, eps: float, e1: float, e2: float, m: int):
    """The coefficients delta_1..delta_m of the perturbed-robustness recursion.

    delta_1 = 2;  delta_j = 2 + 4 e4/e1 + 2 sum_{k=2}^{j-1} (1+delta_k) e4/rho_k
    with e4 = 4(e2+e1) and rho_k = rho0 - eps*delta_k.
    """
    if not (0 < e1 < e2):
        raise InvalidBudgetError("require 0 < e1 < e2")
    if not (0 <= eps < e1 / 4):
        raise InvalidBudgetError("require 0 <= eps < e1/4")
    if m < 1:
        raise ValueError("m must be >= 1")
    e4 = 4.0 * (e2 + e1)
    deltas = [2.0]
    for j in range(2, m + 1):
        acc = 2.0 + 4.0 * e4 / e1
        for k in range(2, j):
            rho_k = rho0 - eps * deltas[k - 1]
            if rho_k <= 0:
                raise InvalidBudgetError(f"rho_{k} <= 0 in the recursion")
        acc += 2.0 * sum(
            (1.0 + deltas[k - 1]) * e4 / (rho0 - eps * deltas[k - 1])
            for k in range(2, j)
        )
        deltas.append(acc)
    return deltas


def rho_m_recursion(rho0: float, eps: float, e1: float, e2: float, m: int) -> float:
    """Guaranteed robustness after m perturbed steps: rho_m = rho0 - eps*delta_m.

    Raises InvalidBudgetError when the preconditions fail or some
    intermediate rho_k drops to zero.
    """
    deltas = delta_m_sequence(rho0, eps, e1, e2, m)
    rho_m = rho0 - eps * deltas[m - 1]
    if eps > 0 and rho_m <= 0:
        raise InvalidBudgetError(f"rho_{m} = {rho_m:.3e} <= 0")
    return float(rho_m)


def _triple_on_circle(t: float, th2: float, th3: float) -> np.ndarray:
    ang = np.array([0.0, th2, th3])
    return np.column_stack([t * np.cos(ang), t * np.sin(ang)])


def _parallelogram_area(p: np.ndarray) -> float:
    a = p[1] - p[0]
    b = p[2] - p[0]
    return abs(float(a[0] * b[1] - a[1] * b[0]))


@lru_cache(maxsize=64)
def v2_constant(e1: float, e2: float) -> float:
    """Certified lower bound for the minimal parallelogram area spanned by a
    triple of points, pairwise >= e1 apart, lying on a sphere of radius <= e2.

    Any such triple lies on a circle of radius <= e2, so the search runs over
    (circle radius, two angles).  Monte-Carlo seeding plus Nelder-Mead
    refinement, with a 0.9 safety factor on the result.
    """
    if not (0 < e1 < e2):
        raise InvalidBudgetError("require 0 < e1 < e2")
    rng = np.random.default_rng(_V2_SEED)
    t_min = e1 / np.sqrt(3.0)  # equilateral triple needs at least this radius

    def feasible(t, th2, th3):
        p = _triple_on_circle(t, th2, th3)
        d = (
            np.linalg.norm(p[0] - p[1]),
            np.linalg.norm(p[0] - p[2]),
            np.linalg.norm(p[1] - p[2]),
        )
        return min(d) >= e1

    best = None
    for _ in range(4000):
        t = rng.uniform(t_min, e2)
        th2, th3 = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=2))
        if not feasible(t, th2, th3):
            continue
        area = _parallelogram_area(_triple_on_circle(t, th2, th3))
        if best is None or area < best[0]:
            best = (area, (t, th2, th3))
    if best is None:
        raise InvalidBudgetError("no feasible triple found; e1 too close to 2*e2")

    def penalized(x):
        t, th2, th3 = x
        t = min(max(t, t_min), e2)
        p = _triple_on_circle(t, th2, th3)
        pen = 0.0
        for i in range(3):
            for j in range(i + 1, 3):
                gap = e1 - np.linalg.norm(p[i] - p[j])
                if gap > 0:
                    pen += 1e3 * gap * gap
        return _parallelogram_area(p) + pen

    res = minimize(penalized, np.array(best[1]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
    t, th2, th3 = res.x
    t = min(max(float(t), t_min), e2)
    if feasible(t, th2, th3):
        refined = _parallelogram_area(_triple_on_circle(t, th2, th3))
        best_area = min(best[0], refined)
    else:
        best_area = best[0]
    return float(V2_SAFETY * best_area)


def metric_robustness(pts, metric, r_limit: float | None = None) -> float:
    """Robustness of an ordered point list measured inside a metric model.

    For each k the points are mapped to geodesic coordinates at pts[k]
    (frames aligned from a reference frame at pts[0]); the reported value is
    the minimum over k of the distance from pts[k+1] to the exponential
    image of the span of the preceding log vectors.
    """
    from . import metrics as mt

    points = list(pts)
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    if r_limit is None:
        r_limit = metric.convexity_radius()
    for p in points[1:]:
        if metric.distance(points[0], p) > r_limit:
            raise OutOfChartError("points exceed the working radius")

    if metric.kind == "flat":
        return robustness_of(np.asarray(points, dtype=float)).rho

    ref = mt.standard_frame(metric, points[0])
    best = np.inf
    for k in range(len(points) - 1):
        frame = mt.align_frame(metric, ref, points[k])
        vs = [mt.log_frame(metric, frame, points[j]) for j in range(k + 1)]
        target = points[k + 1]
        span = np.array([v for v in vs if np.linalg.norm(v) > 0.0])
        if span.size == 0:
            d = metric.distance(points[k], target)
        else:
            # Orthonormal basis of the span of the log vectors.
            q, r = np.linalg.qr(span.T)
            rank = int(np.sum(np.abs(np.diag(r)) > 1e-12 * np.max(np.abs(r))))
            basis = q[:, :rank]
            w = mt.log_frame(metric, frame, target)
            c0 = basis.T @ w

            def objective(c):
                a = basis @ c
                nrm = np.linalg.norm(a)
                if nrm > r_limit:
                    a = a * (r_limit / nrm)
                return metric.distance(mt.exp_frame(metric, frame, a), target)

            res = minimize(objective, c0, method="Nelder-Mead",
                           options={"xatol": 1e-12, "fatol": 1e-14})
            d = min(objective(c0), float(res.fun))
        best = min(best, float(d))
    return float(best)
