"""Downlink link-level simulation with a log-domain message passing detector.

One receiver observes ``y = diag(h) sum_j x_j + n`` on the ``K`` resources
and detects all ``J`` users with perfect channel knowledge. Fading is
i.i.d. per resource and per frame.

Random numbers are counter based: frame ``f`` under seed ``s`` always reads
the same block of a Philox stream keyed by ``s``, so results do not depend
on batching or on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import i0e, logsumexp, ndtri
from scipy.stats import beta

from .codebook import CodebookSet
from .metrics import EXACT_CAP, noise_level, superimpose, superimposed_indices


@dataclass(frozen=True)
class ChannelSpec:
    """Rician block fading; ``kappa = inf`` is the fixed ``h = 1`` channel."""

    kappa: float
    n0: float

    def __post_init__(self):
        if not (self.kappa >= 0):
            raise ValueError(f"kappa must be >= 0 or inf, got {self.kappa}")
        if not (self.n0 > 0) or not math.isfinite(self.n0):
            raise ValueError(f"N0 must be finite and > 0, got {self.n0}")

    @property
    def los(self) -> float:
        return 1.0 if math.isinf(self.kappa) else math.sqrt(self.kappa / (1 + self.kappa))

    @property
    def scatter(self) -> float:
        return 0.0 if math.isinf(self.kappa) else math.sqrt(1 / (1 + self.kappa))


def fading_from_normals(kappa: float, g: np.ndarray) -> np.ndarray:
    """Map unit complex Gaussian samples ``g`` to Rician coefficients."""
    if math.isinf(kappa):
        return np.ones_like(g)
    return math.sqrt(kappa / (1 + kappa)) + math.sqrt(1 / (1 + kappa)) * g


def draw_fading(kappa: float, size, rng: np.random.Generator) -> np.ndarray:
    g = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2)
    return fading_from_normals(kappa, g)


def rician_pdf(r, kappa: float) -> np.ndarray:
    """Density of ``|h|`` for unit second moment."""
    r = np.asarray(r, dtype=float)
    x = 2 * r * math.sqrt(kappa * (1 + kappa))
    return 2 * (1 + kappa) * r * np.exp(-kappa - (1 + kappa) * r ** 2 + x) * i0e(x)


# ---------------------------------------------------------------------------
# counter-based frame randomness

@dataclass
class FrameDraws:
    symbols: np.ndarray   # (F, J) codeword indices
    g_fade: np.ndarray    # (F, K) unit complex normals
    g_noise: np.ndarray   # (F, K) unit complex normals


def frame_draws(seed: int, start: int, count: int, J: int, K: int, M: int) -> FrameDraws:
    """Random inputs of frames ``start .. start+count-1`` for ``seed``."""
    words = J + 4 * K
    stride = -(-words // 4)
    bg = np.random.Philox(key=int(seed))
    bg.advance(start * stride)
    raw = bg.random_raw(count * stride * 4).reshape(count, stride * 4)[:, :words]
    sym = ((raw[:, :J] >> np.uint64(32)) % np.uint64(M)).astype(np.int64)
    u = ((raw[:, J:] >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    z = ndtri(u) / math.sqrt(2)
    g = z[:, 0::2] + 1j * z[:, 1::2]
    return FrameDraws(sym, g[:, :K], g[:, K:])


def transmit(cbs: CodebookSet, symbols: np.ndarray, channel: ChannelSpec,
             g_fade: np.ndarray | None = None, g_noise: np.ndarray | None = None,
             rng: np.random.Generator | None = None, noise: bool = True):
    """Received signal and channel for codeword indices ``symbols`` of shape ``(F, J)``.

    Returns ``(y, h)``. Unit Gaussian inputs may be supplied; otherwise they
    are drawn from ``rng``.
    """
    symbols = np.atleast_2d(symbols)
    F = symbols.shape[0]
    rng = rng if rng is not None else np.random.default_rng()
    if g_fade is None:
        g_fade = (rng.standard_normal((F, cbs.K)) + 1j * rng.standard_normal((F, cbs.K))) / math.sqrt(2)
    if g_noise is None:
        g_noise = (rng.standard_normal((F, cbs.K)) + 1j * rng.standard_normal((F, cbs.K))) / math.sqrt(2)
    h = fading_from_normals(channel.kappa, g_fade)
    y = h * superimpose(cbs, symbols)
    if noise:
        y = y + math.sqrt(channel.n0) * g_noise
    return y, h


# ---------------------------------------------------------------------------
# decoder

@dataclass
class DecodeStats:
    frames: int = 0
    iterations: np.ndarray = None
    converged: np.ndarray = None
    max_delta: list = field(default_factory=list)
    norm_error: list = field(default_factory=list)
    n_mult: int = 0
    n_add: int = 0
    bit_errors: int = 0
    decisions_by_iter: np.ndarray | None = None

    @property
    def avg_iters(self) -> float:
        return float(np.mean(self.iterations)) if self.frames else 0.0


class _Graph:
    """Per-resource tables for the check-node update."""

    def __init__(self, cbs: CodebookSet, lp: bool):
        self.J, self.K, self.M = cbs.J, cbs.K, cbs.M
        self.users = [cbs.fg.users_of(k).tolist() for k in range(cbs.K)]
        self.res = [cbs.fg.resources_of(j).tolist() for j in range(cbs.J)]
        self.maps, self.sums, self.shapes = {}, [], []
        for k in range(self.K):
            vals = []
            for j in self.users[k]:
                if lp:
                    v, p = cbs.distinct_values(j, k)
                else:
                    v, p = cbs.codebooks[j, k].copy(), np.arange(self.M)
                self.maps[(k, j)] = p
                vals.append(v)
            shape = tuple(len(v) for v in vals)
            s = np.zeros(shape, dtype=complex)
            for i, v in enumerate(vals):
                idx = [None] * len(vals)
                idx[i] = slice(None)
                s = s + v[tuple(idx)]
            self.sums.append(s.ravel())
            self.shapes.append(shape)
        self.lp = lp
        self._count_ops()

    def _count_ops(self):
        mult = add = 0
        for k in range(self.K):
            C = math.prod(self.shapes[k])
            d = len(self.shapes[k])
            for T in self.shapes[k]:
                mult += (d + 3) * C
                add += (d + 1) * C + (C - T)
        self.t_user = []
        for j in range(self.J):
            T = max(len(np.unique(self.maps[(k, j)])) for k in self.res[j])
            N = len(self.res[j])
            self.t_user.append(T)
            mult += (N - 2) * T * N
            add += (T - 1) * N
        self.iter_mult, self.iter_add = mult, add
        self.final_mult = sum(T * (len(self.res[j]) - 1) for j, T in enumerate(self.t_user))


def _check_inputs(y, h, n0):
    if not (n0 > 0) or not math.isfinite(n0):
        raise ValueError(f"N0 must be finite and > 0, got {n0}")
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if y.shape != h.shape:
        raise ValueError("y and h must have the same shape")
    if not (np.isfinite(y).all() and np.isfinite(h).all()):
        raise ValueError("non-finite received samples or channel")
    return y, h


def _decode(y, h, cbs, n0, max_iters, damping, tol, lp, record):
    y, h = _check_inputs(y, h, n0)
    if not 0 <= damping < 1:
        raise ValueError("damping must lie in [0, 1)")
    g = _Graph(cbs, lp)
    F, J, M = y.shape[0], cbs.J, cbs.M
    uniform = -math.log(M)
    nu = {e: np.full((F, M), uniform) for e in g.maps}
    mu = {e: np.full((F, M), uniform) for e in g.maps}
    post = np.full((F, J, M), 1.0 / M)
    iters = np.zeros(F, dtype=int)
    conv = np.zeros(F, dtype=bool)
    stats = DecodeStats(frames=F)
    hist = np.zeros((max_iters, F, J), dtype=np.int64) if record else None
    active = np.arange(F)
    it = 0
    for it in range(1, max_iters + 1):
        if active.size == 0:
            if record:
                hist[it - 1] = hist[it - 2]
            continue
        a = active
        n = a.size
        for k in range(g.K):
            users = g.users[k]
            shape = g.shapes[k]
            ll = -(np.abs(y[a, k, None] - h[a, k, None] * g.sums[k][None, :]) ** 2) / n0
            ll = ll.reshape((n,) + shape)
            incoming = []
            for j in users:
                p = g.maps[(k, j)]
                v = nu[(k, j)][a]
                if lp:
                    v = np.stack([logsumexp(v[:, p == t], axis=1) for t in range(shape[users.index(j)])], axis=1)
                incoming.append(v)
            for i, j in enumerate(users):
                tot = ll.copy()
                for i2, v in enumerate(incoming):
                    if i2 == i:
                        continue
                    bshape = [n] + [1] * len(shape)
                    bshape[1 + i2] = shape[i2]
                    tot += v.reshape(bshape)
                axes = tuple(1 + x for x in range(len(shape)) if x != i)
                msg_t = logsumexp(tot, axis=axes) if axes else tot
                new = msg_t[:, g.maps[(k, j)]]
                new -= logsumexp(new, axis=1, keepdims=True)
                if damping:
                    new = (1 - damping) * new + damping * mu[(k, j)][a]
                    new -= logsumexp(new, axis=1, keepdims=True)
                mu[(k, j)][a] = new
        belief = np.empty((n, J, M))
        for j in range(J):
            total = sum(mu[(k, j)][a] for k in g.res[j])
            lse = logsumexp(total, axis=1, keepdims=True)
            belief[:, j] = np.exp(total - lse)
            for k in g.res[j]:
                v = total - mu[(k, j)][a]
                nu[(k, j)][a] = v - logsumexp(v, axis=1, keepdims=True)
        delta = np.abs(belief - post[a]).reshape(n, -1).max(axis=1)
        stats.max_delta.append(float(delta.max()))
        stats.norm_error.append(float(np.abs(belief.sum(axis=2) - 1).max()))
        post[a] = belief
        iters[a] = it
        stats.n_mult += g.iter_mult * n
        stats.n_add += g.iter_add * n
        done = delta < tol
        conv[a[done]] = True
        if record:
            hist[it - 1] = post.argmax(axis=2)
        active = a[~done]
    stats.n_mult += g.final_mult * F
    stats.iterations = iters
    stats.converged = conv
    stats.decisions_by_iter = hist
    decisions = post.argmax(axis=2)
    lab = cbs.label_ints()
    bits = np.stack([lab[j][decisions[:, j]] for j in range(J)], axis=1)
    return bits, post, stats


def mpa_decode(y, h, cbs: CodebookSet, n0: float, max_iters: int = 10, damping: float = 0.0,
               tol: float = 1e-5, record: bool = False):
    """Message passing detection enumerating all ``M**d_f`` codeword combinations.

    Returns ``(labels, posteriors, stats)``: the integer bit label decided
    for each user (shape ``(F, J)``), the final beliefs ``(F, J, M)`` and
    :class:`DecodeStats`. A frame stops iterating once its largest belief
    change falls below ``tol``.
    """
    return _decode(y, h, cbs, n0, max_iters, damping, tol, False, record)


def lp_mpa_decode(y, h, cbs: CodebookSet, n0: float, max_iters: int = 10, damping: float = 0.0,
                  tol: float = 1e-5, record: bool = False):
    """Same detector, enumerating only the distinct projected values per user and resource."""
    return _decode(y, h, cbs, n0, max_iters, damping, tol, True, record)


DECODERS = {"mpa": mpa_decode, "lp-mpa": lp_mpa_decode}


def ml_decode(y, h, cbs: CodebookSet, n0: float | None = None, cap: int = EXACT_CAP,
              block: int = 512) -> np.ndarray:
    """Exhaustive joint maximum-likelihood detection; returns codeword indices ``(F, J)``."""
    y = np.atleast_2d(y)
    h = np.atleast_2d(h)
    if cbs.M ** cbs.J > cap:
        raise ValueError(f"joint ML over {cbs.M ** cbs.J} hypotheses exceeds cap {cap}")
    idx = superimposed_indices(cbs.J, cbs.M)
    W = superimpose(cbs, idx)
    out = np.empty((y.shape[0], cbs.J), dtype=np.int64)
    for s in range(0, y.shape[0], block):
        yy, hh = y[s:s + block], h[s:s + block]
        d = (np.abs(yy[:, None, :] - hh[:, None, :] * W[None, :, :]) ** 2).sum(axis=2)
        out[s:s + block] = idx[d.argmin(axis=1)]
    return out


# ---------------------------------------------------------------------------
# error counting

def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64).copy()
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x >>= 1
    return c


def bit_errors(cbs: CodebookSet, sent: np.ndarray, decided_labels: np.ndarray) -> int:
    lab = cbs.label_ints()
    tx = np.stack([lab[j][sent[:, j]] for j in range(cbs.J)], axis=1)
    return int(_popcount(np.bitwise_xor(tx, decided_labels)).sum())


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = 1 - level
    lo = 0.0 if k == 0 else float(beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass
class SimResult:
    frames: int
    bits: int
    bit_errors: int
    n_mult: int
    n_add: int
    iter_sum: int
    errors_by_iter: np.ndarray | None = None

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0


def _run_block(cbs, channel, seed, start, count, decoder, max_iters, tol, damping, record):
    d = frame_draws(seed, start, count, cbs.J, cbs.K, cbs.M)
    y, h = transmit(cbs, d.symbols, channel, d.g_fade, d.g_noise)
    labels, _, st = DECODERS[decoder](y, h, cbs, channel.n0, max_iters, damping, tol, record)
    errs = bit_errors(cbs, d.symbols, labels)
    by_iter = None
    if record:
        lab = cbs.label_ints()
        by_iter = np.array([
            bit_errors(cbs, d.symbols, np.stack([lab[j][dec[:, j]] for j in range(cbs.J)], axis=1))
            for dec in st.decisions_by_iter])
    return SimResult(count, count * cbs.J * cbs.bits_per_symbol, errs, st.n_mult, st.n_add,
                     int(st.iterations.sum()), by_iter)


def simulate(cbs: CodebookSet, channel: ChannelSpec, frames: int, seed: int = 0,
             decoder: str = "lp-mpa", max_iters: int = 10, tol: float = 1e-5,
             damping: float = 0.0, record: bool = False, block: int = 2048,
             threads: int = 1) -> SimResult:
    """Simulate ``frames`` frames and count bit errors (optionally per iteration)."""
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}; choose from {sorted(DECODERS)}")
    starts = list(range(0, frames, block))
    job = lambda s: _run_block(cbs, channel, seed, s, min(block, frames - s), decoder,
                               max_iters, tol, damping, record)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(job, starts))
    else:
        parts = [job(s) for s in starts]
    res = SimResult(0, 0, 0, 0, 0, 0, np.zeros(max_iters, dtype=np.int64) if record else None)
    for p in parts:
        res.frames += p.frames
        res.bits += p.bits
        res.bit_errors += p.bit_errors
        res.n_mult += p.n_mult
        res.n_add += p.n_add
        res.iter_sum += p.iter_sum
        if record:
            res.errors_by_iter += p.errors_by_iter
    return res


def ber_by_iteration(cbs: CodebookSet, ebn0_db: float, kappa: float, frames: int,
                     max_iters: int = 10, seed: int = 0, decoder: str = "lp-mpa",
                     threads: int = 1) -> np.ndarray:
    """BER after each of ``1..max_iters`` iterations, from one run on common frames."""
    ch = ChannelSpec(kappa, noise_level(cbs, ebn0_db))
    r = simulate(cbs, ch, frames, seed, decoder, max_iters, tol=0.0, record=True, threads=threads)
    return r.errors_by_iter / r.bits


CSV_COLUMNS = ["ebn0_db", "kappa", "frames", "bit_errors", "ber", "ci_low", "ci_high",
               "avg_iters", "n_mult", "n_add", "seed"]


def ber_sweep(cbs: CodebookSet, ebn0_grid, kappas, frames: int, max_iters: int = 10,
              seed: int = 0, decoder: str = "lp-mpa", tol: float = 1e-5,
              damping: float = 0.0, threads: int = 1) -> list[dict]:
    """BER table over an Eb/N0 x kappa grid.

    Every grid point reuses the same frame draws (common random numbers);
    ``n_mult``/``n_add`` are average detector operations per frame.
    """
    rows = []
    for kappa in kappas:
        for eb in ebn0_grid:
            ch = ChannelSpec(kappa, noise_level(cbs, eb))
            r = simulate(cbs, ch, frames, seed, decoder, max_iters, tol, damping, threads=threads)
            lo, hi = clopper_pearson(r.bit_errors, r.bits)
            rows.append({
                "ebn0_db": float(eb), "kappa": "inf" if math.isinf(kappa) else float(kappa),
                "frames": r.frames, "bit_errors": r.bit_errors, "ber": r.ber,
                "ci_low": lo, "ci_high": hi, "avg_iters": r.iter_sum / r.frames,
                "n_mult": r.n_mult / r.frames, "n_add": r.n_add / r.frames, "seed": seed,
            })
    return rows
