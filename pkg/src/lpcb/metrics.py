"""Distance and pairwise-error metrics for superimposed sparse codewords.

Distances follow one convention throughout: ``tau`` and ``delta`` are
*squared* Euclidean distances, while "MED" is reported as a plain
Euclidean distance (square root of the smallest squared distance).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .codebook import CodebookSet
from .mother import rician_terms

EXACT_CAP = 4096
_BLOCK = 256
_DENSE_MAX = 512


@dataclass(frozen=True)
class QBoundParams:
    """Exponential upper bound ``Q(x) <= sum_i a_i exp(-b_i x^2)``."""

    a: tuple[float, ...] = (0.5,)
    b: tuple[float, ...] = (0.5,)

    def __post_init__(self):
        if len(self.a) != len(self.b) or not self.a:
            raise ValueError("a and b must be non-empty and of equal length")
        if any(v <= 0 for v in self.a + self.b):
            raise ValueError("a_i and b_i must be positive")

    @property
    def L(self) -> int:
        return len(self.a)


CHERNOFF = QBoundParams()
TWO_TERM = QBoundParams(a=(1 / 12, 1 / 4), b=(1 / 2, 2 / 3))


class BoundEstimate(NamedTuple):
    value: float
    stderr: float
    exact: bool


def noise_level(cbs: CodebookSet, ebn0_db: float) -> float:
    """``N0`` for a given ``Eb/N0``; ``Eb`` is the mean codeword energy per bit."""
    eb = cbs.mean_symbol_energy() / cbs.bits_per_symbol
    return eb / 10 ** (ebn0_db / 10)


def rician_pair_distance(tau, kappa: float, n0: float) -> float:
    tau = np.asarray(tau, dtype=float)
    if (tau < 0).any():
        raise ValueError("element-wise distances must be non-negative")
    return float(rician_terms(tau, kappa, n0).sum())


def pep_chernoff(d2: float, n0: float) -> float:
    return 0.5 * math.exp(-d2 / (4.0 * n0))


def pep_general(tau, kappa: float, n0: float, qb: QBoundParams = CHERNOFF) -> float:
    """PEP upper bound averaged over Rician fading via the |h|^2 MGF."""
    tau = np.asarray(tau, dtype=float)
    total = 0.0
    for a, b in zip(qb.a, qb.b):
        s = b * tau / (2.0 * n0)
        if math.isinf(kappa):
            terms = np.exp(-s)
        else:
            terms = (1 + kappa) / (1 + kappa + s) * np.exp(-kappa * s / (1 + kappa + s))
        total += a * float(np.prod(terms))
    return total


# ---------------------------------------------------------------------------
# superimposed constellation helpers

def superimposed_indices(J: int, M: int) -> np.ndarray:
    """All ``M**J`` codeword-index tuples, shape ``(M**J, J)``."""
    return np.array(list(itertools.product(range(M), repeat=J)), dtype=np.int64)


def superimpose(cbs: CodebookSet, idx: np.ndarray) -> np.ndarray:
    """Superimposed codewords for index tuples ``idx`` of shape ``(n, J)`` -> ``(n, K)``."""
    idx = np.asarray(idx)
    out = np.zeros((idx.shape[0], cbs.K), dtype=complex)
    for j in range(cbs.J):
        out += cbs.codebooks[j][:, idx[:, j]].T
    return out


def _check_cap(cbs, cap):
    n = cbs.M ** cbs.J
    if n > cap:
        raise ValueError(
            f"exact enumeration needs {n} superimposed codewords (> cap {cap}); "
            "use mode='montecarlo' or the structural MED path")
    return n


def _pairwise_min_dense(W: np.ndarray, fn) -> float:
    n = W.shape[0]
    best = np.inf
    for start in range(0, n - 1, _BLOCK):
        blk = W[start:start + _BLOCK]
        tau = np.abs(blk[:, None, :] - W[None, start + 1:, :]) ** 2
        vals = fn(tau).sum(axis=-1)
        # keep only j > i
        rows = np.arange(blk.shape[0])[:, None]
        cols = np.arange(start + 1, n)[None, :]
        vals = np.where(cols > rows + start, vals, np.inf)
        best = min(best, float(vals.min()))
    return best


def _radius_for(fn, level: float) -> float | None:
    """Largest ``t`` with ``fn(t) <= level`` (``None`` if ``fn`` never exceeds it)."""
    hi = 1.0
    while float(fn(np.array(hi))) <= level:
        hi *= 4.0
        if hi > 1e12:
            return None
    return brentq(lambda t: float(fn(np.array(t))) - level, 0.0, hi, xtol=1e-14, rtol=1e-12)


def _pairwise_min(W: np.ndarray, fn) -> float:
    """Minimum of ``fn(tau)`` summed over resources across all pairs of rows of ``W``.

    ``fn`` must be increasing and concave with ``fn(0) = 0`` (true for every
    distance term used here). Then ``sum_k fn(tau_k) >= fn(sum_k tau_k)``,
    so once some pair reaches value ``v`` only pairs closer than
    ``fn^-1(v)`` in Euclidean distance can do better; those are found with a
    k-d tree. Small inputs are scanned densely.
    """
    n = W.shape[0]
    if n < 2:
        return np.inf
    if n <= _DENSE_MAX:
        return _pairwise_min_dense(W, fn)
    X = np.column_stack([W.real, W.imag])
    tree = cKDTree(X)
    _, nn = tree.query(X, k=2)
    other = np.where(nn[:, 0] == np.arange(n), nn[:, 1], nn[:, 0])
    best = float(fn(np.abs(W - W[other]) ** 2).sum(axis=1).min())
    if best <= 0.0:
        return max(best, 0.0)
    t = _radius_for(fn, best)
    if t is None:
        return _pairwise_min_dense(W, fn)
    pairs = tree.query_pairs(math.sqrt(t) * (1 + 1e-6) + 1e-12, output_type="ndarray")
    if len(pairs):
        best = min(best, float(fn(np.abs(W[pairs[:, 0]] - W[pairs[:, 1]]) ** 2).sum(axis=1).min()))
    return best


def _dedupe_tuples(idx):
    return np.unique(idx, axis=0)


def delta_min(cbs: CodebookSet, kappa: float, n0: float, mode: str = "exact",
              Q: int = 10000, t_max: int = 20, seed: int = 0, cap: int = EXACT_CAP) -> float:
    """Minimum Rician distance over pairs of superimposed codewords.

    ``mode='exact'`` scans every pair (refused above ``cap`` codewords).
    ``mode='montecarlo'`` takes the minimum over ``t_max`` rounds of ``Q``
    random superimposed codewords each; it can only over-estimate.
    """
    fn = lambda tau: rician_terms(tau, kappa, n0)
    if mode == "exact":
        _check_cap(cbs, cap)
        return _pairwise_min(superimpose(cbs, superimposed_indices(cbs.J, cbs.M)), fn)
    if mode == "montecarlo":
        return _montecarlo_min(cbs, fn, Q, t_max, seed)
    raise ValueError(f"unknown mode {mode!r}")


def _montecarlo_min(cbs, fn, Q, t_max, seed):
    rng = np.random.default_rng(seed)
    total = cbs.M ** cbs.J
    if total <= Q:
        # a round would cover every codeword; the estimate is exact
        return _pairwise_min(superimpose(cbs, superimposed_indices(cbs.J, cbs.M)), fn)
    best = np.inf
    for _ in range(t_max):
        idx = _dedupe_tuples(rng.integers(0, cbs.M, size=(Q, cbs.J)))
        best = min(best, _pairwise_min(superimpose(cbs, idx), fn))
    return best


# ---------------------------------------------------------------------------
# MED

def s_sum(z, basic) -> np.ndarray:
    """All sums ``z_1 a_1 + ... + z_d a_d`` over ``a_i`` in ``basic``, one per index tuple."""
    z = np.asarray(z, dtype=complex)
    basic = np.asarray(basic, dtype=complex)
    pts = np.zeros(1, dtype=complex)
    for zi in z:
        pts = (pts[:, None] + zi * basic[None, :]).ravel()
    return pts


def med_points(points) -> float:
    """Minimum Euclidean distance among a multiset of points (0 on repeats)."""
    p = np.asarray(points)
    if p.ndim == 1:
        p = p[:, None]
    if len(p) < 2:
        return math.inf
    return math.sqrt(_pairwise_min(p, lambda tau: tau))


def is_cartesian(cbs: CodebookSet) -> bool:
    """True when every user's codebook is the Cartesian product of its per-resource values."""
    for j in range(cbs.J):
        res = cbs.fg.resources_of(j)
        maps = [cbs.distinct_values(j, k)[1] for k in res]
        sizes = [m.max() + 1 for m in maps]
        if math.prod(sizes) != cbs.M:
            return False
        if len(set(zip(*(m.tolist() for m in maps)))) != cbs.M:
            return False
    return True


def resource_sum_sets(cbs: CodebookSet) -> list[np.ndarray]:
    """Per-resource superimposed value sets built from each user's distinct values."""
    out = []
    for k in range(cbs.K):
        pts = np.zeros(1, dtype=complex)
        for j in cbs.fg.users_of(k):
            vals = cbs.distinct_values(j, k)[0]
            pts = (pts[:, None] + vals[None, :]).ravel()
        out.append(pts)
    return out


def _combo_sums(diffs):
    acc = np.zeros((1, diffs[0].shape[1]), dtype=complex)
    for D in diffs:
        acc = (acc[:, None, :] + D[None, :, :]).reshape(-1, D.shape[1])
    return acc


def _user_diffs(cbs, j):
    X = cbs.codebooks[j].T  # (M, K)
    d = (X[:, None, :] - X[None, :, :]).reshape(-1, cbs.K)
    d = d[np.any(d != 0, axis=1)]
    if len(d) < cbs.M * (cbs.M - 1):
        return None  # repeated codewords
    d = np.unique(d, axis=0)
    return np.vstack([np.zeros((1, cbs.K), dtype=complex), d])


MITM_LIMIT = 3_000_000


def _mitm_sizes(cbs):
    sizes = [cbs.M * (cbs.M - 1) + 1] * cbs.J
    h = cbs.J // 2
    return math.prod(sizes[:h]), math.prod(sizes[h:])


def med_exact_mitm(cbs: CodebookSet) -> float:
    """Exact MED of the superimposed constellation by a meet-in-the-middle search.

    A pair of superimposed codewords differs by ``sum_j e_j`` with ``e_j``
    a difference of two codewords of user ``j``. Users are split into two
    halves, all partial sums are enumerated per half, and the smallest
    ``|u + v|`` is found with a k-d tree.
    """
    diffs = [_user_diffs(cbs, j) for j in range(cbs.J)]
    if any(d is None for d in diffs):
        return 0.0
    h = cbs.J // 2
    U = _combo_sums(diffs[:h])
    V = _combo_sums(diffs[h:])
    Ur = np.hstack([U.real, U.imag])[1:]
    Vr = np.hstack([V.real, V.imag])[1:]
    nu = np.linalg.norm(Ur, axis=1)
    nv = np.linalg.norm(Vr, axis=1)
    # a nonzero combination within one half that cancels exactly means two tuples collide
    best = float(min(nu.min() if len(nu) else np.inf, nv.min() if len(nv) else np.inf))
    if best == 0.0 or not len(Ur) or not len(Vr):
        return best
    Ur = np.unique(Ur, axis=0)
    Vr = np.unique(Vr, axis=0)
    tree = cKDTree(-Vr)
    d, _ = tree.query(Ur, k=1, distance_upper_bound=best * (1 + 1e-12))
    return float(min(best, d.min()))


def med_sampled(cbs: CodebookSet, n_pairs: int = 1_000_000, seed: int = 0,
                block: int = 100_000) -> float:
    """Upper estimate of the MED from random pairs of superimposed codewords.

    The second codeword of each pair redraws a random subset of users,
    with subset size ``s`` chosen with probability proportional to ``2**-s``.
    """
    rng = np.random.default_rng(seed)
    J, M = cbs.J, cbs.M
    p = 0.5 ** np.arange(1, J + 1)
    p /= p.sum()
    best = np.inf
    done = 0
    while done < n_pairs:
        n = min(block, n_pairs - done)
        a = rng.integers(0, M, size=(n, J))
        sizes = rng.choice(np.arange(1, J + 1), size=n, p=p)
        keys = rng.random((n, J))
        ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
        change = ranks < sizes[:, None]
        shift = rng.integers(1, M, size=(n, J))
        b = np.where(change, (a + shift) % M, a)
        diff = superimpose(cbs, a) - superimpose(cbs, b)
        best = min(best, float((np.abs(diff) ** 2).sum(axis=1).min()))
        done += n
    return math.sqrt(best)


def med_superimposed(cbs: CodebookSet, method: str = "auto", cap: int = EXACT_CAP,
                     n_pairs: int = 1_000_000, seed: int = 0) -> float:
    """MED of the superimposed constellation.

    ``method``: ``"structural"`` (per-resource sum sets; valid when every
    user codebook is a Cartesian product of its per-resource values),
    ``"exact"`` (all pairs, up to ``cap`` codewords), ``"mitm"``
    (exact meet-in-the-middle), ``"sampled"`` or ``"auto"`` (first
    applicable in that order).
    """
    if method == "auto":
        if is_cartesian(cbs):
            method = "structural"
        elif cbs.M ** cbs.J <= cap:
            method = "exact"
        elif max(_mitm_sizes(cbs)) <= MITM_LIMIT:
            method = "mitm"
        else:
            method = "sampled"
    if method == "structural":
        if not is_cartesian(cbs):
            raise ValueError("structural MED requires Cartesian-product user codebooks")
        return min(med_points(s) for s in resource_sum_sets(cbs))
    if method == "exact":
        _check_cap(cbs, cap)
        W = superimpose(cbs, superimposed_indices(cbs.J, cbs.M))
        return math.sqrt(_pairwise_min(W, lambda tau: tau))
    if method == "mitm":
        return med_exact_mitm(cbs)
    if method == "sampled":
        return med_sampled(cbs, n_pairs, seed)
    raise ValueError(f"unknown MED method {method!r}")


def med_method(cbs: CodebookSet, cap: int = EXACT_CAP) -> str:
    if is_cartesian(cbs):
        return "structural"
    if cbs.M ** cbs.J <= cap:
        return "exact"
    if max(_mitm_sizes(cbs)) <= MITM_LIMIT:
        return "mitm"
    return "sampled"


# ---------------------------------------------------------------------------
# lower bound and product distance

def d2_min(cbs: CodebookSet, kappa: float, n0: float) -> float:
    """Single-user minimum of the logarithmic distance term."""
    best = np.inf
    for j in range(cbs.J):
        X = cbs.codebooks[j].T
        i, l = np.triu_indices(cbs.M, k=1)
        tau = np.abs(X[i] - X[l]) ** 2
        v = d2_term(tau, kappa, n0).sum(axis=1)
        best = min(best, float(v.min()))
    return best


def d1_term(tau, kappa, n0):
    if math.isinf(kappa):
        return np.asarray(tau, dtype=float)
    return kappa * tau / (1.0 + kappa + tau / (4.0 * n0))


def d2_term(tau, kappa, n0):
    if math.isinf(kappa):
        return np.zeros_like(np.asarray(tau, dtype=float))
    return 4.0 * n0 * np.log1p(tau / (4.0 * n0 * (1.0 + kappa)))


def delta_lb_terms(cbs: CodebookSet, kappa: float, n0: float, Q: int = 10000,
                   t_max: int = 20, seed: int = 0, d2_mode: str = "see",
                   cap: int = EXACT_CAP) -> tuple[float, float]:
    """``(d1_min, d2_min)`` of the lower-bound objective.

    ``d1_min`` is the Monte Carlo minimum of the first distance term.
    ``d2_min`` is, for ``d2_mode="see"``, the single-user minimum of the
    logarithmic term (cheap, assumes the minimum sits on a single-user
    error). ``d2_mode="pairs"`` minimises the logarithmic term over all
    superimposed pairs instead (exact up to ``cap`` codewords, otherwise
    the same Monte Carlo rounds), which makes ``d1 + d2 <= delta_min`` hold
    unconditionally.
    """
    d1 = _montecarlo_min(cbs, lambda tau: d1_term(tau, kappa, n0), Q, t_max, seed)
    if d2_mode == "see":
        d2 = d2_min(cbs, kappa, n0)
    elif d2_mode == "pairs":
        fn = lambda tau: d2_term(tau, kappa, n0)
        if cbs.M ** cbs.J <= cap:
            d2 = _pairwise_min(superimpose(cbs, superimposed_indices(cbs.J, cbs.M)), fn)
        else:
            d2 = min(d2_min(cbs, kappa, n0), _montecarlo_min(cbs, fn, Q, t_max, seed))
    else:
        raise ValueError(f"unknown d2_mode {d2_mode!r}")
    return d1, d2


def delta_lb(cbs: CodebookSet, kappa: float, n0: float, Q: int = 10000,
             t_max: int = 20, seed: int = 0, d2_mode: str = "see") -> float:
    d1, d2 = delta_lb_terms(cbs, kappa, n0, Q, t_max, seed, d2_mode)
    return d1 + d2


def mpd_codebook(cbs: CodebookSet) -> float:
    """Minimum product distance over same-user codeword pairs (equal entries skipped)."""
    best = np.inf
    i, l = np.triu_indices(cbs.M, k=1)
    for j in range(cbs.J):
        X = cbs.codebooks[j].T
        sq = np.abs(X[i] - X[l]) ** 2
        prod = np.where(X[i] != X[l], sq, 1.0).prod(axis=1)
        best = min(best, float(prod.min()))
    return best


# ---------------------------------------------------------------------------
# union bound

def _popcount_table(bits: int) -> np.ndarray:
    t = np.arange(1 << bits)
    return np.array([bin(v).count("1") for v in t], dtype=np.int64)


def _tuple_labels(cbs, idx):
    lab = cbs.label_ints()
    b = cbs.bits_per_symbol
    out = np.zeros(idx.shape[0], dtype=np.int64)
    for j in range(cbs.J):
        out = (out << b) | lab[j][idx[:, j]]
    return out


def _hamming(x, y):
    v = np.bitwise_xor(x, y)
    c = np.zeros_like(v)
    while np.any(v):
        c += v & 1
        v >>= 1
    return c


def aber_union_bound(cbs: CodebookSet, kappa: float, n0: float, labels=None,
                     cap: int = EXACT_CAP, samples: int = 200_000, seed: int = 0) -> BoundEstimate:
    """Union bound on the average bit error rate (Chernoff PEP terms).

    Exact below ``cap`` superimposed codewords; otherwise a Monte Carlo
    estimate over random ordered pairs with its standard error.
    """
    if labels is not None:
        from .codebook import relabel
        cbs = relabel(cbs, labels)
    J, M = cbs.J, cbs.M
    n_tot = M ** J
    norm = 1.0 / (n_tot * J * cbs.bits_per_symbol)
    if n_tot <= cap:
        idx = superimposed_indices(J, M)
        W = superimpose(cbs, idx)
        lab = _tuple_labels(cbs, idx)
        pop = _popcount_table(J * cbs.bits_per_symbol)
        total = 0.0
        for start in range(0, n_tot, _BLOCK):
            blk = W[start:start + _BLOCK]
            tau = np.abs(blk[:, None, :] - W[None, :, :]) ** 2
            d2 = rician_terms(tau, kappa, n0).sum(axis=-1)
            ne = pop[np.bitwise_xor(lab[start:start + _BLOCK, None], lab[None, :])]
            total += float((ne * 0.5 * np.exp(-d2 / (4 * n0))).sum())
        return BoundEstimate(norm * total, 0.0, True)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, M, size=(samples, J))
    shift = rng.integers(0, M, size=(samples, J))
    b = (a + shift) % M
    same = np.all(shift == 0, axis=1)
    b[same, 0] = (a[same, 0] + 1) % M
    tau = np.abs(superimpose(cbs, a) - superimpose(cbs, b)) ** 2
    d2 = rician_terms(tau, kappa, n0).sum(axis=1)
    ne = _hamming(_tuple_labels(cbs, a), _tuple_labels(cbs, b))
    vals = ne * 0.5 * np.exp(-d2 / (4 * n0))
    scale = (n_tot - 1) / (J * cbs.bits_per_symbol)
    return BoundEstimate(scale * float(vals.mean()), scale * float(vals.std(ddof=1) / math.sqrt(samples)), False)


def metric_report(cbs: CodebookSet, kappa: float, ebn0_db: float, mode: str = "auto",
                  Q: int = 10000, t_max: int = 20, seed: int = 0, cap: int = EXACT_CAP) -> dict:
    """Metric summary of a codebook set as a JSON-ready dict."""
    n0 = noise_level(cbs, ebn0_db)
    if mode == "auto":
        mode = "exact" if cbs.M ** cbs.J <= cap else "montecarlo"
    return {
        "delta_min": delta_min(cbs, kappa, n0, mode, Q, t_max, seed, cap),
        "med": med_superimposed(cbs, cap=cap, seed=seed),
        "med_method": med_method(cbs, cap),
        "mpd": mpd_codebook(cbs),
        "delta_lb": delta_lb(cbs, kappa, n0, Q, t_max, seed),
        "mode": mode,
        "Q": Q,
        "t_max": t_max,
        "seed": seed,
        "kappa": kappa if math.isfinite(kappa) else "inf",
        "ebn0_db": ebn0_db,
        "n0": n0,
    }
