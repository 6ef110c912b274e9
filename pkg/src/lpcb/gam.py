"""Golden angle modulation (GAM) points and low-projection 1-D constellations.

A low-projection vector ``A_{M,T}`` is a length-``M`` complex vector that
takes only ``T`` distinct values. It is built from a ``T``-point symmetric
GAM constellation ``A_T`` by repeating some of its points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

GOLDEN_ANGLE = (1.0 - math.sqrt(5.0)) / 2.0


class InvalidPlanError(ValueError):
    """Raised when an overlap plan is inconsistent with ``(T, M)``."""


class PlanInfeasibleError(InvalidPlanError):
    """Raised when no symmetric overlap plan exists for ``(T, M)``."""


@dataclass(frozen=True)
class GamParams:
    num_points: int = 1
    power: float = 1.0
    rho: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if int(self.num_points) != self.num_points or self.num_points < 1:
            raise ValueError(f"num_points must be a positive integer, got {self.num_points}")
        if not self.power > 0:
            raise ValueError(f"power must be > 0, got {self.power}")
        if not self.rho > -1:
            raise ValueError(f"rho must be > -1, got {self.rho}")
        if not 0.0 <= self.phi <= math.pi / 2:
            raise ValueError(f"phi must lie in [0, pi/2], got {self.phi}")

    @property
    def c_norm(self) -> float:
        return math.sqrt(2.0 * self.power / (self.num_points + 1))


@dataclass(frozen=True)
class OverlapPlan:
    """Which points of ``A_T`` are repeated, and how many extra times.

    ``points`` index into ``A_T``; ``counts[l]`` is the number of extra
    copies of ``A_T[points[l]]``.
    """

    points: tuple[int, ...] = ()
    counts: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.points) != len(self.counts):
            raise InvalidPlanError("points and counts must have equal length")
        if len(set(self.points)) != len(self.points):
            raise InvalidPlanError("overlap points must be distinct")
        if any(c < 1 for c in self.counts):
            raise InvalidPlanError("overlap counts must be positive")

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    def count_of(self, index: int) -> int:
        for p, c in zip(self.points, self.counts):
            if p == index:
                return c
        return 0


@dataclass(frozen=True)
class Constellation1D:
    points: np.ndarray
    basic: np.ndarray
    projection_map: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return len(self.points)

    @property
    def distinct_count(self) -> int:
        return len(set(complex(p) for p in self.points))


def gam_point(n: int, params: GamParams) -> complex:
    """Return the ``n``-th (rho, phi)-GAM point, ``1 <= n <= num_points``."""
    if int(n) != n or not 1 <= n <= params.num_points:
        raise ValueError(f"point index n={n} outside 1..{params.num_points}")
    r = params.c_norm * math.sqrt(n + params.rho)
    return complex(r * np.exp(2j * math.pi * (params.phi + GOLDEN_ANGLE) * n))


def build_basic_constellation(T: int, params: GamParams | None = None) -> np.ndarray:
    """Symmetric ``T``-point constellation ``A_T``.

    Layout is ``[x_1, ..., x_Np, -x_1, ..., -x_Np]`` with a trailing zero
    when ``T`` is odd. ``params.num_points`` is ignored; it is set from ``T``.
    """
    if int(T) != T or T < 2:
        raise ValueError(f"T must be an integer >= 2, got {T}")
    params = params or GamParams()
    n_p = T // 2
    params = replace(params, num_points=n_p)
    half = np.array([gam_point(n, params) for n in range(1, n_p + 1)])
    pts = np.concatenate([half, -half])
    if T % 2:
        pts = np.append(pts, 0j)
    return pts


def _pair_of(index: int, T: int) -> int | None:
    n_p = T // 2
    if T % 2 and index == T - 1:
        return None
    return index + n_p if index < n_p else index - n_p


def default_overlap_plan(T: int, M: int) -> OverlapPlan:
    """Deterministic symmetric overlap plan spreading ``M - T`` repeats.

    Repeat counts over the ``T`` points differ by at most one, a point and
    its negation always get the same count, and lower-energy points
    (zero first, then ``+-x_1``, ``+-x_2``, ...) receive the larger counts.
    """
    if T > M:
        raise InvalidPlanError(f"T={T} exceeds M={M}")
    R = M - T
    if R == 0:
        return OverlapPlan()
    n_p = T // 2
    candidates = []
    if T % 2:
        base = R // T
        candidates = [c for c in (base + 1, base, base - 1) if c >= 0 and (R - c) % 2 == 0]
    else:
        if R % 2:
            raise PlanInfeasibleError(
                f"M - T = {R} is odd but T={T} is even: no symmetric plan; choose T of matching parity")
        candidates = [None]
    for c_zero in candidates:
        pair_total = (R - (c_zero or 0)) // 2
        if n_p == 0:
            if pair_total:
                continue
            pair_counts = []
        else:
            base, rem = divmod(pair_total, n_p)
            pair_counts = [base + (1 if k < rem else 0) for k in range(n_p)]
        counts = pair_counts + pair_counts + ([c_zero] if T % 2 else [])
        if max(counts) - min(counts) <= 1:
            pts = tuple(i for i, c in enumerate(counts) if c > 0)
            return OverlapPlan(pts, tuple(counts[i] for i in pts))
    raise PlanInfeasibleError(f"no balanced symmetric plan for T={T}, M={M}")


def build_lp_vector(T: int, M: int, plan: OverlapPlan | None = None,
                    params: GamParams | None = None) -> Constellation1D:
    """Length-``M`` vector with ``T`` distinct values drawn from ``A_T``.

    Each point of ``A_T`` is followed immediately by its copies.
    """
    basic = build_basic_constellation(T, params)
    plan = default_overlap_plan(T, M) if plan is None else plan
    if plan.total != M - T:
        raise InvalidPlanError(f"overlap counts sum to {plan.total}, expected M - T = {M - T}")
    if any(not 0 <= p < T for p in plan.points):
        raise InvalidPlanError(f"overlap point index outside 0..{T - 1}")
    for p in plan.points:
        q = _pair_of(p, T)
        if q is not None and plan.count_of(p) != plan.count_of(q):
            raise InvalidPlanError(
                f"plan repeats point {p} and its negation {q} unequally; the vector would not be zero-mean")
    pmap = []
    for i in range(T):
        pmap.extend([i] * (1 + plan.count_of(i)))
    pmap = np.array(pmap, dtype=int)
    return Constellation1D(points=basic[pmap], basic=basic, projection_map=pmap)
