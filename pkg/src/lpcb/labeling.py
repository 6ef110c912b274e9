"""Bit labeling of a single user's codebook by a binary switching search."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codebook import CodebookSet, relabel
from .mother import rician_terms


@dataclass
class Labeling:
    """``z[i]`` is the integer label of codeword ``i``.

    ``trace`` holds the running cost after every swap evaluation, so it is
    non-increasing by construction; ``swap_evals`` counts evaluations in
    the returned restart.
    """

    z: np.ndarray
    cost: float
    xi: np.ndarray
    trace: list[float] = field(default_factory=list)
    swap_evals: int = 0
    restart: int = 0

    def bit_strings(self) -> list[str]:
        b = max(1, int(round(np.log2(len(self.z)))))
        return [format(int(v), f"0{b}b") for v in self.z]


def _as_codewords(cb) -> np.ndarray:
    """Return codewords as rows, accepting a ``K x M`` codebook."""
    cb = np.asarray(cb, dtype=complex)
    if cb.ndim == 1:
        cb = cb[None, :]
    return cb.T


def _hamming_matrix(M: int) -> np.ndarray:
    x = np.bitwise_xor.outer(np.arange(M), np.arange(M))
    return np.array([[bin(v).count("1") for v in row] for row in x], dtype=float)


def pair_weights(cb, kappa: float, n0: float) -> np.ndarray:
    """``exp(-d_il / 4N0)`` for every codeword pair, zero on the diagonal."""
    X = _as_codewords(cb)
    tau = np.abs(X[:, None, :] - X[None, :, :]) ** 2
    d = rician_terms(tau, kappa, n0).sum(axis=-1)
    w = np.exp(-d / (4.0 * n0))
    np.fill_diagonal(w, 0.0)
    return w


def _check_perm(z, M):
    z = np.asarray(z, dtype=int)
    if z.shape != (M,) or sorted(z.tolist()) != list(range(M)):
        raise ValueError(f"labeling must be a permutation of 0..{M - 1}, got {np.asarray(z).tolist()}")
    return z


def _cost(W, H, z):
    xi = (H[np.ix_(z, z)] * W).sum(axis=1)
    return 0.5 * float(xi.sum()), xi


def labeling_cost(cb, z, kappa: float, n0: float) -> tuple[float, np.ndarray]:
    """Total cost ``Pi`` (each unordered pair once) and per-codeword costs ``Xi``."""
    W = pair_weights(cb, kappa, n0)
    z = _check_perm(z, W.shape[0])
    return _cost(W, _hamming_matrix(W.shape[0]), z)


def awgn_labeling_cost(cb, z, n0: float) -> float:
    X = _as_codewords(cb)
    z = _check_perm(z, X.shape[0])
    H = _hamming_matrix(X.shape[0])[np.ix_(z, z)]
    i, l = np.triu_indices(X.shape[0], k=1)
    d = (np.abs(X[i] - X[l]) ** 2).sum(axis=1)
    return float((H[i, l] * np.exp(-d / (4.0 * n0))).sum())


def rayleigh_labeling_cost(cb, z) -> float:
    X = _as_codewords(cb)
    z = _check_perm(z, X.shape[0])
    H = _hamming_matrix(X.shape[0])[np.ix_(z, z)]
    i, l = np.triu_indices(X.shape[0], k=1)
    sq = np.abs(X[i] - X[l]) ** 2
    prod = np.where(sq > 0, sq, 1.0).prod(axis=1)
    return float((H[i, l] / prod).sum())


def bsa_label(cb, kappa: float, n0: float, I_max: int = 20, restarts: int = 10,
              seed: int = 0) -> Labeling:
    """Binary switching search for a low-cost labeling.

    Each restart draws a random labeling. Every outer iteration ranks the
    codewords by individual cost (descending, ties by index) and, taking
    them in that order, tries swapping its label with each other codeword's
    label, keeping any swap that does not raise the total cost.
    """
    W = pair_weights(cb, kappa, n0)
    M = W.shape[0]
    if M < 2:
        raise ValueError("need at least two codewords")
    H = _hamming_matrix(M)
    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, restarts)):
        evals = 0
        z = rng.permutation(M)
        cur, xi = _cost(W, H, z)
        trace = [cur]
        for _ in range(I_max):
            _, xi = _cost(W, H, z)
            order = sorted(range(M), key=lambda i: (-xi[i], i))
            for i in order:
                for l in range(M):
                    if l == i:
                        continue
                    z[i], z[l] = z[l], z[i]
                    val, _ = _cost(W, H, z)
                    evals += 1
                    if val <= cur:
                        cur = val
                    else:
                        z[i], z[l] = z[l], z[i]
                    trace.append(cur)
        cost, xi = _cost(W, H, z)
        if best is None or cost < best.cost:
            best = Labeling(z.copy(), cost, xi, trace, evals, r)
    return best


def label_codebooks(cbs: CodebookSet, kappa: float, n0: float, I_max: int = 20,
                    restarts: int = 10, seed: int = 0) -> CodebookSet:
    """Label every user's codebook independently; user ``j`` uses seed ``(seed, j)``."""
    labels = []
    for j in range(cbs.J):
        ss = int(np.random.SeedSequence([seed, j]).generate_state(1)[0])
        lab = bsa_label(cbs.codebooks[j], kappa, n0, I_max, restarts, ss)
        labels.append(lab.bit_strings())
    return relabel(cbs, labels)
