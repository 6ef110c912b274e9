"""Sparse codebook sets: factor graphs, signature patterns, assembly and JSON I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .mother import MotherConstellation


class CodebookFormatError(ValueError):
    """Malformed or inconsistent codebook file."""


F_4x6 = np.array([
    [0, 1, 1, 0, 1, 0],
    [1, 0, 1, 0, 0, 1],
    [0, 1, 0, 1, 0, 1],
    [1, 0, 0, 1, 1, 0],
])

F_5x10 = np.array([
    [1, 1, 1, 1, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 1, 1, 1, 0, 0, 0],
    [0, 1, 0, 0, 1, 0, 0, 1, 1, 0],
    [0, 0, 1, 0, 0, 1, 0, 1, 0, 1],
    [0, 0, 0, 1, 0, 0, 1, 0, 1, 1],
])

# Entry i > 0 means operator z_i sits at (resource, user); 0 means no connection.
Z_4x6 = np.array([
    [0, 1, 2, 0, 3, 0],
    [1, 0, 2, 0, 0, 3],
    [0, 3, 0, 2, 0, 1],
    [3, 0, 0, 2, 1, 0],
])

Z_5x10 = np.array([
    [1, 2, 3, 4, 0, 0, 0, 0, 0, 0],
    [4, 0, 0, 0, 1, 2, 3, 0, 0, 0],
    [0, 3, 0, 0, 4, 0, 0, 1, 2, 0],
    [0, 0, 2, 0, 0, 3, 0, 4, 0, 1],
    [0, 0, 0, 1, 0, 0, 2, 0, 3, 4],
])

_BUILTIN = {150: (F_4x6, Z_4x6), 200: (F_5x10, Z_5x10)}


@dataclass(frozen=True)
class FactorGraph:
    F: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=int)
        if F.ndim != 2 or not np.isin(F, (0, 1)).all():
            raise ValueError("factor matrix must be a binary 2-D array")
        object.__setattr__(self, "F", F)

    @property
    def K(self) -> int:
        return self.F.shape[0]

    @property
    def J(self) -> int:
        return self.F.shape[1]

    @property
    def d_f(self) -> int:
        rows = set(self.F.sum(axis=1).tolist())
        if len(rows) != 1:
            raise ValueError(f"irregular factor graph: row weights {sorted(rows)}")
        return rows.pop()

    @property
    def N(self) -> int:
        cols = set(self.F.sum(axis=0).tolist())
        if len(cols) != 1:
            raise ValueError(f"irregular factor graph: column weights {sorted(cols)}")
        return cols.pop()

    def users_of(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.F[k])

    def resources_of(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.F[:, j])

    @property
    def overload(self) -> int | None:
        for key, (F, _) in _BUILTIN.items():
            if F.shape == self.F.shape and (F == self.F).all():
                return key
        return None


def builtin_factor_graph(overload: int) -> FactorGraph:
    if overload not in _BUILTIN:
        raise ValueError(f"overload must be one of {sorted(_BUILTIN)}, got {overload}")
    return FactorGraph(_BUILTIN[overload][0].copy())


def builtin_signature(overload: int) -> np.ndarray:
    """Symbolic signature pattern (K x J ints, 1-based operator index, 0 off-support)."""
    if overload not in _BUILTIN:
        raise ValueError(f"overload must be one of {sorted(_BUILTIN)}, got {overload}")
    return _BUILTIN[overload][1].copy()


@dataclass(frozen=True)
class OperatorParams:
    """Constellation operators ``z_i = E_i exp(j theta_i)`` plus the GAM shape parameters."""

    E: tuple[float, ...]
    theta: tuple[float, ...]
    rho: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "E", tuple(float(e) for e in self.E))
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        if len(self.E) != len(self.theta):
            raise ValueError("E and theta must have the same length")
        if any(not e > 0 for e in self.E):
            raise ValueError(f"energies must be > 0, got {self.E}")

    @property
    def z(self) -> np.ndarray:
        return np.array(self.E) * np.exp(1j * np.array(self.theta))

    def violations(self, target_sum: float, T: int, tol: float = 1e-9) -> list[str]:
        """Names of violated design constraints; empty when feasible."""
        out = []
        if abs(sum(self.E) - target_sum) > tol * max(1.0, target_sum):
            out.append(f"sum(E)={sum(self.E)!r} != {target_sum}")
        if any(not -tol <= t <= math.pi + tol for t in self.theta):
            out.append("theta outside [0, pi]")
        if not (-1 < self.rho <= T + tol):
            out.append(f"rho={self.rho} outside (-1, {T}]")
        if not -tol <= self.phi <= math.pi / 2 + tol:
            out.append(f"phi={self.phi} outside [0, pi/2]")
        return out


@dataclass
class CodebookSet:
    """``J`` sparse codebooks, stored as an array of shape ``(J, K, M)``.

    ``labels[j][m]`` is the bit string carried by codeword ``m`` of user ``j``.
    """

    codebooks: np.ndarray
    fg: FactorGraph
    labels: list[list[str]] = None
    signature: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.codebooks = np.asarray(self.codebooks, dtype=complex)
        if self.codebooks.ndim != 3:
            raise ValueError("codebooks must have shape (J, K, M)")
        J, K, M = self.codebooks.shape
        if (K, J) != self.fg.F.shape:
            raise ValueError(f"codebooks shape {self.codebooks.shape} does not match F {self.fg.F.shape}")
        if M < 2 or M & (M - 1):
            raise ValueError(f"M must be a power of two >= 2, got {M}")
        if self.labels is None:
            self.labels = [natural_labels(M) for _ in range(J)]

    @property
    def J(self) -> int:
        return self.codebooks.shape[0]

    @property
    def K(self) -> int:
        return self.codebooks.shape[1]

    @property
    def M(self) -> int:
        return self.codebooks.shape[2]

    @property
    def N(self) -> int:
        return self.fg.N

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.M)))

    @property
    def Z(self) -> np.ndarray | None:
        """Complex signature matrix when operator values are recorded in ``meta``."""
        if self.signature is None or not self.meta.get("E") or not self.meta.get("theta"):
            return None
        z = OperatorParams(self.meta["E"], self.meta["theta"]).z
        out = np.zeros(self.signature.shape, dtype=complex)
        mask = self.signature > 0
        out[mask] = z[self.signature[mask] - 1]
        return out

    def label_ints(self) -> np.ndarray:
        """``(J, M)`` integer label of each codeword."""
        return np.array([[int(b, 2) for b in lab] for lab in self.labels])

    def codeword_of_label(self) -> np.ndarray:
        """``(J, M)`` inverse of :meth:`label_ints`: codeword index carrying label ``b``."""
        lab = self.label_ints()
        inv = np.empty_like(lab)
        for j in range(self.J):
            inv[j, lab[j]] = np.arange(self.M)
        return inv

    def distinct_values(self, j: int, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Distinct values of user ``j`` on resource ``k`` and the projection map."""
        vals, inv = [], []
        seen = {}
        for v in self.codebooks[j, k]:
            key = complex(v)
            if key not in seen:
                seen[key] = len(vals)
                vals.append(key)
            inv.append(seen[key])
        return np.array(vals), np.array(inv)

    def projection_numbers(self) -> np.ndarray:
        """``(J, K)`` count of distinct values per user per occupied resource (0 elsewhere)."""
        out = np.zeros((self.J, self.K), dtype=int)
        for j in range(self.J):
            for k in self.fg.resources_of(j):
                out[j, k] = len(self.distinct_values(j, k)[0])
        return out

    def mean_symbol_energy(self) -> float:
        """Average codeword energy per user."""
        return float(np.mean(np.sum(np.abs(self.codebooks) ** 2, axis=1)))

    def validate(self) -> None:
        J, K, M = self.codebooks.shape
        for j in range(J):
            support = set(self.fg.resources_of(j).tolist())
            nz = set(np.flatnonzero(np.any(self.codebooks[j] != 0, axis=1)).tolist())
            if not nz <= support:
                raise CodebookFormatError(
                    f"user {j}: nonzero entries on resources {sorted(nz - support)} outside F support {sorted(support)}")
            if nz != support:
                raise CodebookFormatError(
                    f"user {j}: resources {sorted(support - nz)} in F support are never used")
            lab = self.labels[j]
            if len(lab) != M or len(set(lab)) != M or any(len(b) != self.bits_per_symbol for b in lab):
                raise CodebookFormatError(f"user {j}: labels must be {M} distinct {self.bits_per_symbol}-bit strings")
            if any(set(b) - {"0", "1"} for b in lab):
                raise CodebookFormatError(f"user {j}: labels must be binary strings")
        if self.signature is not None:
            if ((self.signature > 0) != (self.fg.F > 0)).any():
                raise CodebookFormatError("signature pattern support differs from F")


def natural_labels(M: int) -> list[str]:
    b = int(round(math.log2(M)))
    return [format(m, f"0{b}b") for m in range(M)]


def assemble(mc: MotherConstellation | np.ndarray, params: OperatorParams, fg: FactorGraph,
             zpat: np.ndarray) -> CodebookSet:
    """Embed ``diag(z) @ C_MC`` of every user into its sparse support.

    The ``n``-th occupied resource of user ``j`` (in increasing resource
    order) carries dimension ``n`` of the MC scaled by the operator given by
    the signature pattern at that position.
    """
    C = np.asarray(getattr(mc, "matrix", mc), dtype=complex)
    zpat = np.asarray(zpat, dtype=int)
    if zpat.shape != fg.F.shape or ((zpat > 0) != (fg.F > 0)).any():
        raise ValueError("signature pattern does not match the factor graph")
    if C.shape[0] != fg.N:
        raise ValueError(f"MC has {C.shape[0]} dimensions but users occupy N={fg.N} resources")
    z = params.z
    if zpat.max() > len(z):
        raise ValueError(f"signature uses operator z_{zpat.max()} but only {len(z)} given")
    out = np.zeros((fg.J, fg.K, C.shape[1]), dtype=complex)
    for j in range(fg.J):
        for n, k in enumerate(fg.resources_of(j)):
            out[j, k] = z[zpat[k, j] - 1] * C[n]
    meta = {"E": list(params.E), "theta": list(params.theta), "rho": params.rho, "phi": params.phi}
    return CodebookSet(out, fg, signature=zpat, meta=meta)


def normalize_power(cbs: CodebookSet, energy: float = 1.0) -> CodebookSet:
    """Scale all codebooks so the average codeword energy per user equals ``energy``.

    The returned set records the applied amplitude factor as ``meta['scale']``.
    """
    s = math.sqrt(energy / cbs.mean_symbol_energy())
    meta = dict(cbs.meta)
    meta["scale"] = s * meta.get("scale", 1.0)
    return CodebookSet(cbs.codebooks * s, cbs.fg, [list(l) for l in cbs.labels], cbs.signature, meta)


def relabel(cbs: CodebookSet, labels: list[list[str]]) -> CodebookSet:
    return CodebookSet(cbs.codebooks.copy(), cbs.fg, [list(l) for l in labels], cbs.signature, dict(cbs.meta))


# ---------------------------------------------------------------------------
# JSON interchange

def to_dict(cbs: CodebookSet) -> dict:
    d = {
        "M": cbs.M,
        "K": cbs.K,
        "J": cbs.J,
        "N": cbs.N,
        "overload": cbs.fg.overload,
        "F": cbs.fg.F.tolist(),
    }
    if cbs.signature is not None:
        d["signature"] = np.asarray(cbs.signature).tolist()
    d["users"] = [
        {
            "id": j + 1,
            "codewords": [[[float(v.real), float(v.imag)] for v in cbs.codebooks[j, :, m]]
                          for m in range(cbs.M)],
            "labels": list(cbs.labels[j]),
        }
        for j in range(cbs.J)
    ]
    d["design_meta"] = cbs.meta
    return d


def _c(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "))


def serialize(cbs: CodebookSet) -> bytes:
    """Deterministic JSON text: one matrix row / codeword per line."""
    d = to_dict(cbs)
    lines = ["{"]
    for key in ("M", "K", "J", "N", "overload"):
        lines.append(f' "{key}": {_c(d[key])},')
    for key in ("F", "signature"):
        if key in d:
            rows = ",\n".join(f"  {_c(r)}" for r in d[key])
            lines.append(f' "{key}": [\n{rows}\n ],')
    users = []
    for u in d["users"]:
        words = ",\n".join(f"    {_c(w)}" for w in u["codewords"])
        users.append(f'  {{"id": {u["id"]},\n   "codewords": [\n{words}\n   ],\n   "labels": {_c(u["labels"])}}}')
    lines.append(' "users": [\n' + ",\n".join(users) + "\n ],")
    lines.append(f' "design_meta": {_c(d["design_meta"])}')
    lines.append("}")
    return ("\n".join(lines) + "\n").encode()


def _require(d: dict, key: str, where: str = "codebook"):
    if not isinstance(d, dict) or key not in d:
        raise CodebookFormatError(f"missing field '{key}' in {where}")
    return d[key]


def from_dict(d: dict) -> CodebookSet:
    M, K, J, N = (int(_require(d, k)) for k in ("M", "K", "J", "N"))
    F = np.array(_require(d, "F"), dtype=int)
    _require(d, "overload")
    if F.shape != (K, J):
        raise CodebookFormatError(f"F has shape {F.shape}, expected ({K}, {J})")
    users = _require(d, "users")
    if len(users) != J:
        raise CodebookFormatError(f"expected {J} users, found {len(users)}")
    cb = np.zeros((J, K, M), dtype=complex)
    labels = []
    for j, u in enumerate(users):
        where = f"user {j + 1}"
        _require(u, "id", where)
        words = _require(u, "codewords", where)
        if len(words) != M or any(len(w) != K for w in words):
            raise CodebookFormatError(f"{where}: codewords must be {M} lists of {K} [re, im] pairs")
        for m, w in enumerate(words):
            for k, pair in enumerate(w):
                if len(pair) != 2:
                    raise CodebookFormatError(f"{where}: complex values must be [re, im] pairs")
                cb[j, k, m] = complex(pair[0], pair[1])
        labels.append([str(b) for b in _require(u, "labels", where)])
    meta = _require(d, "design_meta")
    sig = np.array(d["signature"], dtype=int) if d.get("signature") is not None else None
    try:
        fg = FactorGraph(F)
        if fg.N != N:
            raise CodebookFormatError(f"N={N} disagrees with F column weight {fg.N}")
        cbs = CodebookSet(cb, fg, labels, sig, dict(meta))
    except CodebookFormatError:
        raise
    except ValueError as exc:
        raise CodebookFormatError(str(exc)) from exc
    cbs.validate()
    return cbs


def deserialize(data: bytes | str) -> CodebookSet:
    try:
        d = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CodebookFormatError(f"not valid JSON: {exc}") from exc
    return from_dict(d)


def load(path) -> CodebookSet:
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def save(cbs: CodebookSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(cbs))


FIXTURES = {
    "A4_3_150": "A4_3_150.json",
    "A4_2_200": "A4_2_200.json",
    "A8_4_150": "A8_4_150.json",
}


def load_fixture(name: str) -> CodebookSet:
    """Bundled published codebooks: ``A4_3_150``, ``A4_2_200``, ``A8_4_150``."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    data = resources.files("lpcb").joinpath("data", FIXTURES[name]).read_bytes()
    return deserialize(data)
