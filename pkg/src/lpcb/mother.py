"""N-dimensional mother constellations built from permuted LP vectors."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .gam import Constellation1D

# Relative slack under which two metric values count as a tie.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class MotherConstellation:
    """``N x M`` matrix whose row ``n`` is ``source[perms[n]]``.

    Permutations are 0-based index arrays: position ``m`` of row ``n``
    holds ``source[perms[n][m]]``.
    """

    matrix: np.ndarray
    source: np.ndarray
    perms: tuple[np.ndarray, ...]
    exhausted: bool = False

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def M(self) -> int:
        return self.matrix.shape[1]

    def columns_distinct(self) -> bool:
        cols = {tuple(complex(v) for v in self.matrix[:, m]) for m in range(self.M)}
        return len(cols) == self.M


def from_permutations(source, perms) -> MotherConstellation:
    source = np.asarray(source, dtype=complex)
    perms = tuple(np.asarray(p, dtype=int) for p in perms)
    M = len(source)
    for p in perms:
        if sorted(p.tolist()) != list(range(M)):
            raise ValueError(f"not a permutation of 0..{M - 1}: {p.tolist()}")
    return MotherConstellation(np.stack([source[p] for p in perms]), source, perms)


def cartesian_mother(basic, N: int, M: int | None = None) -> MotherConstellation:
    """All ``T**N`` tuples over ``basic`` as columns.

    The first row varies fastest, so for ``basic = [-a, a]`` and ``N = 2``
    the columns are ``(-a,-a), (a,-a), (-a,a), (a,a)``.
    """
    basic = np.asarray(basic, dtype=complex)
    T = len(basic)
    if M is not None and M != T ** N:
        raise ValueError(f"Cartesian construction needs M = T**N, got M={M}, T={T}, N={N}")
    idx = np.array(list(itertools.product(range(T), repeat=N)))[:, ::-1].T
    source = np.repeat(basic, T ** (N - 1)) if N > 1 else basic.copy()
    # Row n as a permutation of the source layout (each value repeated T^(N-1) times).
    perms = []
    for n in range(N):
        order = np.argsort(idx[n], kind="stable")
        perm = np.empty(T ** N, dtype=int)
        perm[order] = np.arange(T ** N)
        perms.append(perm)
    return MotherConstellation(basic[idx], source, tuple(perms))


def _pair_sq_diffs(matrix: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences for all column pairs ``i < l``: shape (P, N)."""
    i, l = np.triu_indices(matrix.shape[1], k=1)
    return np.abs(matrix[:, i] - matrix[:, l]).T ** 2


def rician_terms(tau, kappa: float, n0: float) -> np.ndarray:
    """Element-wise ``d1^2 + d2^2`` contributions for squared distances ``tau``."""
    if not n0 > 0:
        raise ValueError(f"N0 must be > 0, got {n0}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    tau = np.asarray(tau, dtype=float)
    if math.isinf(kappa):
        return tau.copy()
    d1 = kappa * tau / (1.0 + kappa + tau / (4.0 * n0))
    d2 = 4.0 * n0 * np.log1p(tau / (4.0 * n0 * (1.0 + kappa)))
    return d1 + d2


def mc_distance(matrix, kappa: float, n0: float) -> float:
    """Minimum Rician effective distance over column pairs of an MC."""
    matrix = np.asarray(getattr(matrix, "matrix", matrix))
    d = rician_terms(_pair_sq_diffs(matrix), kappa, n0).sum(axis=1)
    return float(d.min())


def med_mc(matrix) -> float:
    matrix = np.asarray(getattr(matrix, "matrix", matrix))
    return float(np.sqrt(_pair_sq_diffs(matrix).sum(axis=1).min()))


def mpd_mc(matrix) -> float:
    matrix = np.asarray(getattr(matrix, "matrix", matrix))
    sq = _pair_sq_diffs(matrix)
    return float(np.where(sq > 0, sq, 1.0).prod(axis=1).min())


def _perm_metric_batch(source, first, cand_perms, kappa, n0):
    """mc_distance for a 2-D MC whose first row is fixed, for many second rows."""
    M = len(source)
    i, l = np.triu_indices(M, k=1)
    row1 = source[first]
    base = rician_terms(np.abs(row1[i] - row1[l]) ** 2, kappa, n0)
    rows2 = source[cand_perms]
    t2 = rician_terms(np.abs(rows2[:, i] - rows2[:, l]) ** 2, kappa, n0)
    return (base[None, :] + t2).min(axis=1)


def _search_metric(matrix, kappa, n0):
    """``mc_distance`` when columns are distinct, else minus the number of coinciding pairs."""
    sq = _pair_sq_diffs(matrix).sum(axis=1)
    dup = int((sq == 0).sum())
    if dup:
        return -float(dup)
    return mc_distance(matrix, kappa, n0)


def _exhaustive_2d(source, kappa, n0, chunk=20000):
    M = len(source)
    first = np.arange(M)
    best_val, best_perm = -np.inf, None
    it = itertools.permutations(range(M))
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        arr = np.array(block)
        vals = _perm_metric_batch(source, first, arr, kappa, n0)
        top = vals.max()
        # first near-maximiser in lexicographic order
        k = int(np.flatnonzero(vals >= top - TIE_RTOL * abs(top))[0])
        if best_perm is None or vals[k] > best_val + TIE_RTOL * abs(best_val):
            best_val, best_perm = float(vals[k]), arr[k]
    return best_val, best_perm


def permutation_search(lp: Constellation1D | np.ndarray, N: int, kappa: float = 20.0,
                       n0: float = 0.01, budget: int = 20000, restarts: int = 4,
                       seed: int = 0) -> MotherConstellation:
    """Pick per-dimension permutations of ``lp`` maximising :func:`mc_distance`.

    The first dimension keeps the identity order. For ``M <= 8`` and ``N == 2``
    every second-row permutation is enumerated. Otherwise a swap-based
    local search runs from ``restarts`` random starts until no improving swap
    exists or ``budget`` metric evaluations are spent; the returned object's
    ``exhausted`` flag records budget exhaustion. While some columns coincide
    the search minimises the number of coinciding pairs instead.
    """
    source = np.asarray(getattr(lp, "points", lp), dtype=complex)
    M = len(source)
    distinct = len(set(complex(v) for v in source))
    if distinct ** N == M:
        if isinstance(lp, Constellation1D):
            return cartesian_mother(lp.basic, N, M)
        return cartesian_mother(np.array(list(dict.fromkeys(complex(v) for v in source))), N, M)
    if distinct ** N < M:
        raise ValueError(f"{distinct} distinct values cannot give {M} distinct columns in {N} dimensions")
    identity = np.arange(M)
    if N == 1:
        return from_permutations(source, [identity])
    if N == 2 and M <= 8:
        _, perm = _exhaustive_2d(source, kappa, n0)
        return from_permutations(source, [identity, perm])

    rng = np.random.default_rng(seed)
    evals = 0
    best_val, best_perms = -np.inf, None
    pairs = list(itertools.combinations(range(M), 2))
    exhausted = False
    for _ in range(max(1, restarts)):
        perms = [identity.copy()] + [rng.permutation(M) for _ in range(N - 1)]
        cur = _search_metric(np.stack([source[p] for p in perms]), kappa, n0)
        evals += 1
        improved = True
        while improved and not exhausted:
            improved = False
            for n in range(1, N):
                for a, b in pairs:
                    if evals >= budget:
                        exhausted = True
                        break
                    p = perms[n]
                    if source[p[a]] == source[p[b]]:
                        continue
                    p[a], p[b] = p[b], p[a]
                    val = _search_metric(np.stack([source[q] for q in perms]), kappa, n0)
                    evals += 1
                    if val > cur + TIE_RTOL * abs(cur):
                        cur, improved = val, True
                    else:
                        p[a], p[b] = p[b], p[a]
                if exhausted:
                    break
        if cur > best_val:
            best_val, best_perms = cur, [p.copy() for p in perms]
        if exhausted:
            break
    mc = from_permutations(source, best_perms)
    return MotherConstellation(mc.matrix, mc.source, mc.perms, exhausted=exhausted)
