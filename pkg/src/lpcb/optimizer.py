"""Operator-parameter optimisation and the end-to-end codebook design pipeline.

Two objectives are supported:

* ``P2_1`` (used when ``T**N == M``): MED of the per-resource superimposed
  set ``S_sum``, which equals the MED of the whole superimposed constellation
  when every user codebook is a Cartesian product.
* ``P2_2`` (otherwise): the lower bound ``d1_min + d2_min`` of the Rician
  minimum distance, with ``d1_min`` estimated on common random numbers.

Both are evaluated on the codebook scaled to unit average codeword energy
per user, so that ``rho`` cannot raise the objective by raising power.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .codebook import (CodebookSet, OperatorParams, assemble, builtin_factor_graph,
                       builtin_signature, normalize_power)
from .gam import GamParams, OverlapPlan, build_basic_constellation, build_lp_vector, default_overlap_plan
from .labeling import label_codebooks
from .metrics import delta_lb, med_points, noise_level, resource_sum_sets, s_sum
from .mother import MotherConstellation, cartesian_mother, from_permutations, permutation_search

DEFAULT_MAX_ITERS = {150: 30, 200: 25}
_RHO_EPS = 1e-6


def check_projection_bound(M: int, T: int, N: int) -> None:
    """Reject ``T`` outside ``ceil(M**(1/N)) <= T <= M``."""
    lo = 1
    while lo ** N < M:
        lo += 1
    if not lo <= T <= M:
        raise ValueError(
            f"projection number T={T} violates ceil(M^(1/N)) <= T <= M "
            f"with M={M}, N={N}: need {lo} <= T <= {M}")


def branch_for(M: int, T: int, N: int) -> str:
    return "P2_1" if T ** N == M else "P2_2"


@dataclass
class OptimizationProblem:
    """Fixed structure, channel and budget of one operator-parameter search."""

    M: int
    T: int
    overload: int = 150
    kappa: float = 20.0
    ebn0_db: float = 16.0
    kind: str | None = None
    perms: tuple | None = None
    plan: OverlapPlan | None = None
    max_iters: int | None = None
    restarts: int = 20
    seed: int = 0
    Q: int = 400
    t_max: int = 5
    normalize: bool = True
    init_step: float = 0.1
    min_step: float = 1e-4
    x0: OperatorParams | None = None

    def __post_init__(self):
        self.fg = builtin_factor_graph(self.overload)
        self.zpat = builtin_signature(self.overload)
        check_projection_bound(self.M, self.T, self.N)
        if self.M & (self.M - 1) or self.M < 2:
            raise ValueError(f"M must be a power of two >= 2, got {self.M}")
        expected = branch_for(self.M, self.T, self.N)
        if self.kind is None:
            self.kind = expected
        elif self.kind != expected:
            raise ValueError(f"objective {self.kind} inconsistent with T={self.T}, M={self.M}, N={self.N}: "
                             f"use {expected}")
        if self.plan is None:
            self.plan = default_overlap_plan(self.T, self.M)
        if self.max_iters is None:
            self.max_iters = DEFAULT_MAX_ITERS.get(self.overload, 30)
        if self.max_iters < 0 or self.restarts < 1:
            raise ValueError("max_iters must be >= 0 and restarts >= 1")
        if self.kind == "P2_2" and self.perms is None:
            raise ValueError("P2_2 needs the mother-constellation permutations (perms)")
        if self.x0 is not None:
            if len(self.x0.E) != self.d_f:
                raise ValueError(f"x0 has {len(self.x0.E)} operators, the factor graph needs {self.d_f}")
            bad = [v for v in self.x0.violations(self.energy_sum, self.T) if not v.startswith("sum(E)")]
            if bad:
                raise ValueError("x0 outside the search box: " + "; ".join(bad))

    @property
    def N(self) -> int:
        return self.fg.N

    @property
    def d_f(self) -> int:
        return self.fg.d_f

    @property
    def energy_sum(self) -> float:
        return self.M * self.fg.J / self.fg.K

    def mother(self, rho: float, phi: float) -> MotherConstellation:
        gp = GamParams(rho=rho, phi=phi)
        if self.kind == "P2_1":
            return cartesian_mother(build_basic_constellation(self.T, gp), self.N, self.M)
        lp = build_lp_vector(self.T, self.M, self.plan, gp)
        return from_permutations(lp.points, self.perms)

    def codebook(self, params: OperatorParams) -> CodebookSet:
        cbs = assemble(self.mother(params.rho, params.phi), params, self.fg, self.zpat)
        return normalize_power(cbs) if self.normalize else cbs

    # -- reduced coordinates: [E_1..E_d, theta_2 - theta_1, ..., theta_d - theta_1, rho, phi]
    # A common rotation of all operators leaves every distance unchanged, so
    # only angles relative to theta_1 are searched. They live in [-pi, pi] with
    # spread at most pi, which is exactly the set of rotations of [0, pi]^d.
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.d_f
        lo = np.r_[np.zeros(d), np.full(d - 1, -math.pi), -1 + _RHO_EPS, 0.0]
        hi = np.r_[np.full(d, self.energy_sum), np.full(d - 1, math.pi), float(self.T), math.pi / 2]
        return lo, hi

    def project(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds()
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        d = self.d_f
        e = np.maximum(x[:d], 1e-3 * self.energy_sum / d)
        x[:d] = e * (self.energy_sum / e.sum())
        rel = x[d:2 * d - 1]
        spread = max(0.0, rel.max(initial=0.0)) - min(0.0, rel.min(initial=0.0))
        if spread > math.pi:
            x[d:2 * d - 1] = rel * (math.pi / spread)
        return x

    def params_of(self, x: np.ndarray) -> OperatorParams:
        d = self.d_f
        rel = np.r_[0.0, x[d:2 * d - 1]]
        theta = np.clip(rel - min(0.0, rel.min()), 0.0, math.pi)
        return OperatorParams(tuple(float(e) for e in x[:d]), tuple(float(t) for t in theta),
                              float(x[-2]), float(x[-1]))

    def vector_of(self, p: OperatorParams) -> np.ndarray:
        rel = np.remainder(np.asarray(p.theta[1:]) - p.theta[0] + math.pi, 2 * math.pi) - math.pi
        return self.project(np.r_[p.E, rel, p.rho, p.phi])

    def to_dict(self) -> dict:
        return {
            "M": self.M, "T": self.T, "overload": self.overload, "kind": self.kind,
            "kappa": self.kappa if math.isfinite(self.kappa) else "inf", "ebn0_db": self.ebn0_db,
            "perms": [list(map(int, p)) for p in self.perms] if self.perms is not None else None,
            "plan": {"points": list(self.plan.points), "counts": list(self.plan.counts)},
            "max_iters": self.max_iters, "restarts": self.restarts, "seed": self.seed,
            "Q": self.Q, "t_max": self.t_max, "normalize": self.normalize,
            "init_step": self.init_step, "min_step": self.min_step,
            "x0": _params_dict(self.x0) if self.x0 is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationProblem":
        d = dict(d)
        if d.get("kappa") == "inf":
            d["kappa"] = math.inf
        if d.get("plan") is not None:
            d["plan"] = OverlapPlan(tuple(d["plan"]["points"]), tuple(d["plan"]["counts"]))
        if d.get("perms") is not None:
            d["perms"] = tuple(np.asarray(p, dtype=int) for p in d["perms"])
        if d.get("x0") is not None:
            d["x0"] = OperatorParams(**d["x0"])
        return cls(**d)


def _params_dict(p: OperatorParams) -> dict:
    return {"E": list(p.E), "theta": list(p.theta), "rho": p.rho, "phi": p.phi}


@dataclass
class OptimizationResult:
    params: OperatorParams
    value: float
    trace: list[float]
    restart: int
    evaluations: int
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, include_time: bool = False) -> dict:
        d = {"params": _params_dict(self.params), "value": self.value, "trace": list(self.trace),
             "restart": self.restart, "evaluations": self.evaluations}
        if include_time:
            d["wall_time"] = self.wall_time
        return d


def med_s_sum(z, basic) -> float:
    """MED of ``{sum_i z_i a_i}`` over ``a_i`` in ``basic``."""
    return med_points(s_sum(z, basic))


def objective_p21(params: OperatorParams, problem: OptimizationProblem) -> float:
    """MED of the per-resource superimposed set (smallest over resources)."""
    cbs = problem.codebook(params)
    return min(med_points(s) for s in resource_sum_sets(cbs))


def objective_p22(params: OperatorParams, problem: OptimizationProblem) -> float:
    cbs = problem.codebook(params)
    n0 = noise_level(cbs, problem.ebn0_db)
    return delta_lb(cbs, problem.kappa, n0, problem.Q, problem.t_max, problem.seed)


OBJECTIVES = {"P2_1": objective_p21, "P2_2": objective_p22}


def evaluate(params: OperatorParams, problem: OptimizationProblem) -> float:
    return OBJECTIVES[problem.kind](params, problem)


def _pattern_search(f, x, problem, counter):
    lo, hi = problem.bounds()
    width = hi - lo
    step = problem.init_step * width
    cur = f(x)
    counter[0] += 1
    trace = [cur]
    for _ in range(problem.max_iters):
        if np.all(step < problem.min_step * width):
            break
        best_val, best_x = cur, None
        for i in range(len(x)):
            for sgn in (1.0, -1.0):
                cand = x.copy()
                cand[i] += sgn * step[i]
                cand = problem.project(cand)
                if np.array_equal(cand, x):
                    continue
                v = f(cand)
                counter[0] += 1
                if v > best_val + 1e-12 * abs(best_val):
                    best_val, best_x = v, cand
        if best_x is None:
            step = step * 0.5
        else:
            x, cur = best_x, best_val
            step = np.minimum(step * 2.0, 0.5 * width)
        trace.append(cur)
    return x, cur, trace


def optimize(problem: OptimizationProblem) -> OptimizationResult:
    """Multi-start pattern search maximising the problem's objective."""
    t0 = time.perf_counter()
    lo, hi = problem.bounds()
    dim = len(lo)
    sampler = qmc.LatinHypercube(d=dim, seed=problem.seed)
    starts = [problem.project(lo + u * (hi - lo)) for u in sampler.random(problem.restarts)]
    if problem.x0 is not None:
        starts[0] = problem.vector_of(problem.x0)
    f = lambda x: evaluate(problem.params_of(x), problem)
    counter = [0]
    best = None
    for r, x in enumerate(starts):
        xr, val, trace = _pattern_search(f, x, problem, counter)
        if best is None or val > best[1]:
            best = (xr, val, trace, r)
    xr, val, trace, r = best
    return OptimizationResult(problem.params_of(xr), float(val), [float(v) for v in trace], r,
                              counter[0], time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# pipeline

def _mc_noise(lp, N, ebn0_db):
    eb = N * float(np.mean(np.abs(lp.points) ** 2)) / math.log2(lp.M)
    return eb / 10 ** (ebn0_db / 10)


@dataclass
class DesignResult:
    codebook: CodebookSet
    problem: OptimizationProblem
    result: OptimizationResult
    mother: MotherConstellation


def run_design(M: int, T: int, overload: int = 150, kappa: float = 20.0, ebn0_db: float = 16.0,
               seed: int = 0, restarts: int = 20, max_iters: int | None = None, Q: int = 400,
               t_max: int = 5, label_restarts: int = 10, label_iters: int = 20,
               perm_budget: int = 20000) -> DesignResult:
    """Full construction: GAM points, LP vector, permutations, operators, labels."""
    fg = builtin_factor_graph(overload)
    N = fg.N
    check_projection_bound(M, T, N)
    plan = default_overlap_plan(T, M)
    lp0 = build_lp_vector(T, M, plan, GamParams())
    kind = branch_for(M, T, N)
    perms = None
    if kind == "P2_2":
        mc = permutation_search(lp0, N, kappa, _mc_noise(lp0, N, ebn0_db), budget=perm_budget, seed=seed)
        perms = mc.perms
    problem = OptimizationProblem(M=M, T=T, overload=overload, kappa=kappa, ebn0_db=ebn0_db, kind=kind,
                                  perms=perms, plan=plan, max_iters=max_iters, restarts=restarts,
                                  seed=seed, Q=Q, t_max=t_max)
    res = optimize(problem)
    p = res.params
    mother = problem.mother(p.rho, p.phi)
    cbs = problem.codebook(p)
    n0 = noise_level(cbs, ebn0_db)
    cbs = label_codebooks(cbs, kappa, n0, label_iters, label_restarts, seed)
    cbs.meta.update({
        "T": T, "kappa": kappa if math.isfinite(kappa) else "inf", "ebn0_db": ebn0_db,
        "objective": kind, "objective_value": res.value, "seed": seed,
        "perms": [list(map(int, q)) for q in mother.perms],
        "plan": {"points": list(plan.points), "counts": list(plan.counts)},
        "origin": "designed",
    })
    return DesignResult(cbs, problem, res, mother)


def design_pipeline(M: int, T: int, overload: int = 150, kappa: float = 20.0,
                    ebn0_db: float = 16.0, seed: int = 0, **budget) -> CodebookSet:
    return run_design(M, T, overload, kappa, ebn0_db, seed, **budget).codebook
