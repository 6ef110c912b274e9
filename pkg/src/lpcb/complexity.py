"""Closed-form MPA operation counts and complexity-reduction ratios."""
from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ComplexityParams:
    """Decoder size: projection number ``T``, row weight ``d_f``, column weight ``N``,
    ``J`` users and ``I_t`` message-passing iterations."""

    T: int
    d_f: int
    N: int
    J: int
    I_t: int

    def __post_init__(self):
        for name in ("T", "d_f", "N", "J"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.I_t < 0:
            raise ValueError("I_t must be >= 0")


def mpa_op_counts(T: int, d_f: int, N: int, J: int, I_t: int) -> tuple[int, int]:
    """Multiplications and additions of an MPA detector with projection number ``T``.

    >>> mpa_op_counts(2, 3, 2, 6, 1)[0]
    588
    """
    n_m = ((d_f + 3) * T ** d_f * N + (N - 2) * T * N) * J * I_t + T * (N - 1) * J
    n_a = ((d_f + 1) * T ** d_f * N + (T - 1) * N + (T ** (d_f - 1) - 1) * T * N) * J * I_t
    return int(n_m), int(n_a)


@dataclass(frozen=True)
class ComplexityReport:
    lp: ComplexityParams
    baseline: ComplexityParams
    n_mult: int
    n_add: int
    baseline_mult: int
    baseline_add: int
    crr_mult: float
    crr_add: float
    baseline_inferred: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


def crr(lp: ComplexityParams, baseline: ComplexityParams, inferred: bool = False) -> ComplexityReport:
    """Complexity reduction ratio ``1 - ops(lp) / ops(baseline)`` per operation class."""
    m, a = mpa_op_counts(lp.T, lp.d_f, lp.N, lp.J, lp.I_t)
    bm, ba = mpa_op_counts(baseline.T, baseline.d_f, baseline.N, baseline.J, baseline.I_t)
    return ComplexityReport(
        lp=lp, baseline=baseline, n_mult=m, n_add=a, baseline_mult=bm, baseline_add=ba,
        crr_mult=1.0 - m / bm if bm else 0.0,
        crr_add=1.0 - a / ba if ba else 0.0,
        baseline_inferred=inferred,
    )
