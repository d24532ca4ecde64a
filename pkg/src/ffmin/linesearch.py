"""Inexact one-dimensional searches along a normalized descent direction.

Two procedures with hard oracle-call budgets:

  ls_h    probe/expand/contract on raw function values. At most
          2 + ceil(log_{1/k_minus}(h0/eps_h)) calls.
  ls_par  parabolic interpolation, optionally seeded with the directional
          derivative at the start point. At most K + 2 calls.

Both either find a strictly relaxing step or report no_relaxation with
h = 0. The step returned by ls_par may be negative when the search sampled
behind the start point (the G0 = false branch does so by construction);
ls_h steps are always positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FOUND = "found"
NO_RELAXATION = "no_relaxation"

# vertices this close to an already-sampled abscissa are treated as
# duplicates: refitting through them can only reproduce the same parabola
_DUP_TOL = 1e-13


@dataclass(frozen=True)
class LsHConfig:
    h0: float = 1.0
    eps_h: float = 1e-12
    k_plus: float = 2.0
    k_minus: float = 0.5

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError(f"h0 must be > 0, got {self.h0}")
        if not 0 < self.eps_h < 1:
            raise ValueError(f"eps_h must be in (0,1), got {self.eps_h}")
        if not self.k_plus > 1:
            raise ValueError(f"k_plus must be > 1, got {self.k_plus}")
        if not 0 < self.k_minus < 1:
            raise ValueError(f"k_minus must be in (0,1), got {self.k_minus}")


@dataclass(frozen=True)
class LsParConfig:
    h0: float = 1.0
    K: int = 6
    use_gradient_start: bool = True
    trust: float = 10.0  # vertex steps clamped to trust*h0

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError(f"h0 must be > 0, got {self.h0}")
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if not self.trust > 0:
            raise ValueError(f"trust must be > 0, got {self.trust}")


@dataclass(frozen=True)
class LineSearchResult:
    h: float
    f_at_step: float
    oracle_calls: int
    status: str

    def __post_init__(self):
        if self.status not in (FOUND, NO_RELAXATION):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == NO_RELAXATION and self.h != 0.0:
            raise ValueError("no_relaxation implies h = 0")


@dataclass(frozen=True)
class ParabolaFit:
    points: tuple  # three (h, f) pairs
    vertex: float | None
    curvature_positive: bool


def fit_parabola(points) -> ParabolaFit:
    """Interpolating parabola through three points with distinct abscissae."""
    (x0, f0), (x1, f1), (x2, f2) = points
    if x0 == x1 or x0 == x2 or x1 == x2:
        raise ValueError("parabola fit needs pairwise distinct abscissae")
    # Newton divided differences: a is half the second derivative
    d01 = (f1 - f0) / (x1 - x0)
    d12 = (f2 - f1) / (x2 - x1)
    a = (d12 - d01) / (x2 - x0)
    tol = 1e-12 * max(abs(f0), abs(f1), abs(f2))
    if a <= 0.0 or abs(a) < tol:
        return ParabolaFit(tuple(points), None, a > 0.0)
    # vertex of f0 + d01 (x-x0) + a (x-x0)(x-x1)
    vertex = (x0 + x1) / 2.0 - d01 / (2.0 * a)
    return ParabolaFit(tuple(points), vertex, True)


def parabola_min(points):
    """Vertex abscissa of the interpolating parabola, or None on failure.

    Failure means non-positive or numerically negligible curvature.
    Duplicate abscissae are an input error.
    """
    return fit_parabola(points).vertex


def _check_direction(r):
    r = np.asarray(r, dtype=np.float64)
    nrm = float(np.linalg.norm(r))
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"direction must be unit length, got norm {nrm}")
    return r


def ls_h(oracle, x0, r, config: LsHConfig, f0: float) -> LineSearchResult:
    """Step-halving search: probe h0, expand once if it relaxes, else contract.

    Contraction keeps halving (factor k_minus) until a strictly relaxing
    step appears or the step falls to eps_h, which reports no_relaxation.
    """
    r = _check_direction(r)
    x0 = np.asarray(x0, dtype=np.float64)
    calls = 0

    def phi(h):
        nonlocal calls
        calls += 1
        return oracle.value(x0 + h * r)

    h0 = config.h0
    f_probe = phi(h0)
    if f_probe < f0:
        h_up = config.k_plus * h0
        f_up = phi(h_up)
        if f_up < f_probe:
            return LineSearchResult(h_up, f_up, calls, FOUND)
        return LineSearchResult(h0, f_probe, calls, FOUND)

    h = config.k_minus * h0
    f_c = phi(h)
    while f_c >= f0:  # relaxation must be strict
        h = config.k_minus * h
        if h <= config.eps_h:
            return LineSearchResult(0.0, f0, calls, NO_RELAXATION)
        f_c = phi(h)
    return LineSearchResult(h, f_c, calls, FOUND)


def ls_par(oracle, x0, r, config: LsParConfig, f0: float, g0=None) -> LineSearchResult:
    """Parabolic-interpolation search with at most K + 2 oracle calls.

    With use_gradient_start the first parabola comes from the directional
    derivative at h = 0 plus the sample at h0, and all steps stay forward.
    Without it the search samples +-h0/2 and may return a negative step.
    Each refinement fits the current best three points and evaluates the
    clamped vertex; a degenerate fit stops refining and the best sampled
    point decides the outcome.
    """
    r = _check_direction(r)
    x0 = np.asarray(x0, dtype=np.float64)
    calls = 0

    def phi(h):
        nonlocal calls
        calls += 1
        return oracle.value(x0 + h * r)

    h0 = config.h0
    lo = 0.0 if config.use_gradient_start else -config.trust * h0
    hi = config.trust * h0
    points = [(0.0, f0)]
    failed = False

    if config.use_gradient_start:
        if g0 is None:
            raise ValueError("use_gradient_start requires g0")
        slope = float(np.dot(np.asarray(g0, dtype=np.float64), r))
        f1 = phi(h0)
        points.append((h0, f1))
        a = (f1 - f0 - slope * h0) / (h0 * h0)
        tol = 1e-12 * max(abs(f0), abs(f1))
        if a <= 0.0 or abs(a) < tol:
            failed = True
        else:
            v = _clamp_vertex(-slope / (2.0 * a), lo, hi, points)
            if v is None:
                failed = True
            else:
                points.append((v, phi(v)))
    else:
        points.append((-h0 / 2.0, phi(-h0 / 2.0)))
        points.append((h0 / 2.0, phi(h0 / 2.0)))

    if not failed:
        for _ in range(2, config.K + 1):
            best3 = sorted(points, key=lambda p: (p[1], abs(p[0])))[:3]
            if len({p[0] for p in best3}) < 3:
                break
            fit = fit_parabola(best3)
            if fit.vertex is None:
                break
            v = _clamp_vertex(fit.vertex, lo, hi, points)
            if v is None:
                break
            points.append((v, phi(v)))

    h_best, f_best = min(points, key=lambda p: (p[1], abs(p[0])))
    if h_best != 0.0 and f_best < f0:
        return LineSearchResult(h_best, f_best, calls, FOUND)
    return LineSearchResult(0.0, f0, calls, NO_RELAXATION)


def _clamp_vertex(v, lo, hi, points):
    """Clamp to the trust interval; reject near-duplicate abscissae."""
    if not math.isfinite(v):
        return None
    v = min(max(v, lo), hi)
    scale = max(1.0, abs(v))
    for h, _ in points:
        if abs(v - h) <= _DUP_TOL * max(scale, abs(h)):
            return None
    return v
