"""Bit-mask Pauli algebra on n qubits.

Basis labels are integers; qubit ``i`` (1-based in text, 0-based in code) is
bit ``i`` of the label, so the leftmost character of ``"ZII"`` acts on bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, SizeExceeded

DENSE_LIMIT = 10

_CODE = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}


def popcount(v: int) -> int:
    return int(v).bit_count()


def check_dense(n: int, limit: int = DENSE_LIMIT) -> None:
    if n > limit:
        raise SizeExceeded(f"n={n} exceeds the dense limit {limit}")


@dataclass(frozen=True, order=True)
class ZString:
    """A Pauli-Z string stored as a bit mask."""

    mask: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 <= self.mask < (1 << self.n):
            raise ValueError(f"mask {self.mask} out of range for n={self.n}")

    @classmethod
    def parse(cls, text: str) -> "ZString":
        p = PauliString.parse(text)
        if p.x_mask:
            bad = next(i for i, c in enumerate(text.strip().upper()) if c in "XY")
            raise ConfigError(f"{text!r}: non-diagonal character {text.strip()[bad]!r} at position {bad + 1}")
        return cls(p.z_mask, p.n)

    @classmethod
    def single(cls, qubit: int, n: int) -> "ZString":
        return cls(1 << qubit, n)

    def is_identity(self) -> bool:
        return self.mask == 0

    def eigenvalue(self, x: int) -> int:
        if not 0 <= x < (1 << self.n):
            raise ValueError(f"basis label {x} out of range for n={self.n}")
        return -1 if popcount(self.mask & x) & 1 else 1

    def eigenvalues(self) -> np.ndarray:
        """Diagonal of the string over all 2**n labels."""
        return 1 - 2 * parity_vector(self.mask & np.arange(1 << self.n))

    def to_pauli(self) -> "PauliString":
        return PauliString(0, self.mask, self.n)

    def __str__(self):
        return "".join("Z" if self.mask >> i & 1 else "I" for i in range(self.n))


def parity_vector(values: np.ndarray) -> np.ndarray:
    """Parity of the popcount of each entry (vectorised)."""
    v = np.asarray(values, dtype=np.uint64).copy()
    out = np.zeros(v.shape, dtype=np.int64)
    while np.any(v):
        out ^= (v & np.uint64(1)).astype(np.int64)
        v >>= np.uint64(1)
    return out


@dataclass(frozen=True, order=True)
class PauliString:
    x_mask: int
    z_mask: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        full = 1 << self.n
        if not (0 <= self.x_mask < full and 0 <= self.z_mask < full):
            raise ValueError("mask out of range")

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        s = text.strip().upper()
        if not s:
            raise ConfigError("empty Pauli string")
        x = z = 0
        for i, c in enumerate(s):
            if c not in _CODE:
                raise ConfigError(f"{text!r}: invalid character {c!r} at position {i + 1}")
            xi, zi = _CODE[c]
            x |= xi << i
            z |= zi << i
        return cls(x, z, len(s))

    def is_diagonal(self) -> bool:
        return self.x_mask == 0

    def is_single_z(self) -> bool:
        return self.x_mask == 0 and popcount(self.z_mask) == 1

    def __str__(self):
        chars = []
        for i in range(self.n):
            xi, zi = self.x_mask >> i & 1, self.z_mask >> i & 1
            chars.append("IXZY"[xi + 2 * zi])
        return "".join(chars)


@dataclass(frozen=True)
class GeneratorSet:
    """Ordered, deduplicated non-identity Z-strings."""

    generators: tuple[ZString, ...]
    n: int

    def __post_init__(self):
        seen = set()
        for g in self.generators:
            if g.n != self.n:
                raise ValueError("generator qubit count mismatch")
            if g.is_identity():
                raise ValueError("identity is not a valid generator")
            if g.mask in seen:
                raise ValueError(f"duplicate generator {g}")
            seen.add(g.mask)

    @classmethod
    def from_masks(cls, masks: Iterable[int], n: int) -> "GeneratorSet":
        return cls(tuple(ZString(int(m), n) for m in masks), n)

    @classmethod
    def parse(cls, texts: Sequence[str]) -> "GeneratorSet":
        gens = tuple(ZString.parse(t) for t in texts)
        if not gens:
            raise ConfigError("generator list is empty")
        n = gens[0].n
        if any(g.n != n for g in gens):
            raise ConfigError("generator strings have different lengths")
        try:
            return cls(gens, n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def local(cls, n: int) -> "GeneratorSet":
        return cls.from_masks((1 << i for i in range(n)), n)

    @classmethod
    def all_nonidentity(cls, n: int) -> "GeneratorSet":
        return cls.from_masks(range(1, 1 << n), n)

    @property
    def m(self) -> int:
        return len(self.generators)

    @property
    def masks(self) -> list[int]:
        return [g.mask for g in self.generators]

    def __iter__(self):
        return iter(self.generators)

    def __len__(self):
        return len(self.generators)


def eigenvalue(z: ZString, x: int) -> int:
    return z.eigenvalue(x)


def build_eigenvalue_matrix(gens: GeneratorSet, prepend_ones: bool = False,
                            columns: Sequence[int] | None = None) -> np.ndarray:
    """Matrix of +-1 eigenvalues, rows in generator order, one column per label."""
    if columns is None:
        cols = np.arange(1 << gens.n)
    else:
        cols = np.asarray(list(columns), dtype=np.int64)
        if len(set(cols.tolist())) != len(cols):
            raise ValueError("duplicate columns")
        if len(cols) and (cols.min() < 0 or cols.max() >= 1 << gens.n):
            raise ValueError("column label out of range")
    masks = np.asarray(gens.masks, dtype=np.int64)
    h = 1 - 2 * parity_vector(masks[:, None] & cols[None, :])
    if prepend_ones:
        h = np.vstack([np.ones(len(cols), dtype=np.int64), h])
    return h.astype(float)


def hadamard(n: int) -> np.ndarray:
    """Sylvester Hadamard matrix; entry (s, x) = (-1)^popcount(s & x)."""
    h = np.array([[1.0]])
    base = np.array([[1.0, 1.0], [1.0, -1.0]])
    for _ in range(n):
        h = np.kron(base, h)
    return h


@dataclass(frozen=True)
class DiagonalHamiltonian:
    n: int
    terms: tuple[tuple[ZString, float], ...] = field(default=())

    def energies(self) -> np.ndarray:
        """Diagonal of the Hamiltonian over every label."""
        e = np.zeros(1 << self.n)
        for z, c in self.terms:
            e += c * z.eigenvalues()
        return e

    def energy(self, x: int) -> float:
        return float(sum(c * z.eigenvalue(x) for z, c in self.terms))

    @classmethod
    def from_generators(cls, gens: GeneratorSet, theta: Sequence[float]) -> "DiagonalHamiltonian":
        if len(theta) != gens.m:
            raise ValueError("theta length must match generator count")
        return cls(gens.n, tuple((g, float(c)) for g, c in zip(gens, theta)))


@dataclass(frozen=True)
class InteractingHamiltonian:
    """Local Z fields plus Pauli-string interactions."""

    n: int
    theta: tuple[float, ...]
    interactions: tuple[tuple[PauliString, float], ...] = ()

    def __post_init__(self):
        if len(self.theta) != self.n:
            raise ValueError("theta must have one entry per qubit")
        for p, _ in self.interactions:
            if p.n != self.n:
                raise ValueError("interaction qubit count mismatch")
            if p.is_single_z():
                raise ValueError(f"single-qubit Z term {p} belongs in theta")

    @classmethod
    def build(cls, theta: Sequence[float], interactions: Iterable[tuple[str | PauliString, float]] = ()):
        terms = tuple((PauliString.parse(p) if isinstance(p, str) else p, float(g)) for p, g in interactions)
        return cls(len(theta), tuple(float(v) for v in theta), terms)

    def has_offdiagonal(self) -> bool:
        return any(not p.is_diagonal() for p, g in self.interactions if g != 0)


def project_effective(h: InteractingHamiltonian) -> DiagonalHamiltonian:
    """Stabilizer-averaged Hamiltonian: drop every term with an X or Y factor."""
    terms = [(ZString.single(i, h.n), th) for i, th in enumerate(h.theta)]
    terms += [(ZString(p.z_mask, h.n), g) for p, g in h.interactions if p.is_diagonal()]
    return DiagonalHamiltonian(h.n, tuple(terms))


def _pauli_dense(p: PauliString) -> np.ndarray:
    dim = 1 << p.n
    b = np.arange(dim)
    phase = (1j) ** popcount(p.x_mask & p.z_mask)
    signs = 1 - 2 * parity_vector(p.z_mask & b)
    m = np.zeros((dim, dim), dtype=complex)
    m[b ^ p.x_mask, b] = phase * signs
    return m


def dense_matrix(obj, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense 2**n x 2**n matrix of a Pauli string or Hamiltonian."""
    check_dense(obj.n, limit)
    if isinstance(obj, PauliString):
        return _pauli_dense(obj)
    if isinstance(obj, ZString):
        return np.diag(obj.eigenvalues().astype(complex))
    if isinstance(obj, DiagonalHamiltonian):
        return np.diag(obj.energies()).astype(complex)
    if isinstance(obj, InteractingHamiltonian):
        m = np.diag(project_local(obj)).astype(complex)
        for p, g in obj.interactions:
            m += g * _pauli_dense(p)
        return m
    raise TypeError(f"no dense form for {type(obj).__name__}")


def project_local(h: InteractingHamiltonian) -> np.ndarray:
    """Energies of the local field part sum_i theta_i Z_i."""
    e = np.zeros(1 << h.n)
    for i, th in enumerate(h.theta):
        e += th * ZString.single(i, h.n).eigenvalues()
    return e


def all_zstrings(n: int) -> list[ZString]:
    return [ZString(m, n) for m in range(1 << n)]

