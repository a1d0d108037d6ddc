"""Exact arithmetic on vectors over Z_d.

Index vectors hold the shift/phase labels of a sequence of maximally
entangled pairs, laid out as ``(k_1, ..., k_n, l_1, ..., l_n)``, or the
multiplicities of bilateral operations in the same layout.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence, Union

import numpy as np

#: Largest number of measurement vectors enumerated by the brute-force path.
ENUMERATION_LIMIT = 2**24


class IndexVector:
    """Immutable vector of residues modulo ``modulus``."""

    __slots__ = ("_modulus", "_entries")

    def __init__(self, entries: Iterable[int], modulus: int):
        modulus = int(modulus)
        if modulus < 2:
            raise ValueError(f"modulus must be >= 2, got {modulus}")
        arr = np.array(list(entries) if not isinstance(entries, np.ndarray) else entries, dtype=np.int64)
        if arr.ndim != 1:
            arr = arr.reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= modulus):
            raise ValueError(f"entries must lie in [0, {modulus}), got {arr.tolist()}")
        arr.setflags(write=False)
        self._modulus = modulus
        self._entries = arr

    @classmethod
    def reduce(cls, entries: Iterable[int], modulus: int) -> "IndexVector":
        """Build a vector from arbitrary integers, reducing them mod ``modulus``."""
        arr = np.asarray(list(entries) if not isinstance(entries, np.ndarray) else entries, dtype=np.int64)
        return cls(np.mod(arr, modulus), modulus)

    @classmethod
    def zeros(cls, length: int, modulus: int) -> "IndexVector":
        return cls(np.zeros(length, dtype=np.int64), modulus)

    @property
    def modulus(self) -> int:
        return self._modulus

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    def __len__(self) -> int:
        return int(self._entries.size)

    def __iter__(self):
        return (int(x) for x in self._entries)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return IndexVector(self._entries[idx], self._modulus)
        return int(self._entries[idx])

    def _check_compatible(self, other: "IndexVector") -> None:
        if not isinstance(other, IndexVector):
            raise TypeError(f"expected IndexVector, got {type(other).__name__}")
        if other._modulus != self._modulus:
            raise ValueError(f"modulus mismatch: {self._modulus} vs {other._modulus}")
        if len(other) != len(self):
            raise ValueError(f"length mismatch: {len(self)} vs {len(other)}")

    def __add__(self, other: "IndexVector") -> "IndexVector":
        self._check_compatible(other)
        return IndexVector((self._entries + other._entries) % self._modulus, self._modulus)

    def __sub__(self, other: "IndexVector") -> "IndexVector":
        self._check_compatible(other)
        return IndexVector((self._entries - other._entries) % self._modulus, self._modulus)

    def __neg__(self) -> "IndexVector":
        return IndexVector((-self._entries) % self._modulus, self._modulus)

    def scale(self, c: int) -> "IndexVector":
        return IndexVector((self._entries * int(c)) % self._modulus, self._modulus)

    def is_zero(self) -> bool:
        return not bool(np.any(self._entries))

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexVector):
            return NotImplemented
        return self._modulus == other._modulus and np.array_equal(self._entries, other._entries)

    def __hash__(self) -> int:
        return hash((self._modulus, self._entries.tobytes()))

    def __repr__(self) -> str:
        return f"IndexVector({self._entries.tolist()}, modulus={self._modulus})"

    def tolist(self) -> list[int]:
        return self._entries.tolist()


VectorLike = Union[IndexVector, Sequence[int], np.ndarray]


def _as_array(v: VectorLike, modulus: int, name: str) -> np.ndarray:
    arr = v.entries if isinstance(v, IndexVector) else np.asarray(v, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= modulus):
        raise ValueError(f"{name} has entries outside [0, {modulus})")
    return arr


def dot_mod(M: VectorLike, S: VectorLike, modulus: int) -> int:
    """Return ``sum(M_i * S_i) mod modulus``.

    ``S`` may carry a smaller modulus than ``modulus`` (residues of Z_d embed
    into Z_d' for d' > d); every entry must still be below ``modulus``.
    """
    m = _as_array(M, modulus, "M")
    s = _as_array(S, modulus, "S")
    if m.shape != s.shape:
        raise ValueError(f"length mismatch: {m.size} vs {s.size}")
    return int(np.dot(m, s) % modulus)


def is_prime(n: int) -> bool:
    """Trial-division primality test."""
    n = int(n)
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _collision_count_brute(delta: np.ndarray, modulus: int) -> int:
    # Walk every M in Z_modulus^m, accumulating <M, delta> mod modulus.
    dtype = np.int32 if modulus < 2**15 else np.int64
    sums = np.zeros(1, dtype=dtype)
    residues = np.arange(modulus, dtype=dtype)
    for c in delta:
        sums = ((sums[:, None] + (residues * int(c)) % modulus) % modulus).ravel()
    return int(np.count_nonzero(sums == 0))


def collision_count(deltaS: VectorLike, modulus: int, method: str = "auto") -> int:
    """Number of ``M`` in Z_modulus^m with ``<M, deltaS> = 0``.

    ``method`` is ``"brute"`` (full enumeration), ``"closed"`` (``g * d^(m-1)``
    with ``g = gcd(deltaS, d)``) or ``"auto"`` (brute when enumerable).
    """
    delta = _as_array(deltaS, modulus, "deltaS")
    m = delta.size
    if m == 0 or not np.any(delta):
        raise ValueError("deltaS must be a nonzero vector")
    if method == "auto":
        method = "brute" if modulus**m <= ENUMERATION_LIMIT else "closed"
    if method == "brute":
        if modulus**m > ENUMERATION_LIMIT:
            raise ValueError(
                f"{modulus}^{m} vectors exceed the enumeration limit {ENUMERATION_LIMIT}; use method='closed'"
            )
        return _collision_count_brute(delta, modulus)
    if method == "closed":
        g = modulus
        for c in delta:
            g = gcd(g, int(c))
        return g * modulus ** (m - 1)
    raise ValueError(f"unknown method {method!r}")


def collision_probability(deltaS: VectorLike, modulus: int, method: str = "auto") -> Fraction:
    """Exact probability that a uniform ``M`` gives ``<M, deltaS> = 0``.

    Equals ``1/d`` for every nonzero ``deltaS`` when ``d`` is prime; for
    composite ``d`` it is ``gcd(deltaS, d) / d`` and may exceed ``1/d``.
    """
    delta = _as_array(deltaS, modulus, "deltaS")
    count = collision_count(delta, modulus, method)
    return Fraction(count, modulus ** delta.size)


def find_collision_witness(modulus: int, m_max: int = 3):
    """Search for a nonzero ``deltaS`` of length <= m_max with probability > 1/d.

    Returns ``(deltaS, probability)`` or ``None``; never succeeds for prime d.
    """
    target = Fraction(1, modulus)
    for m in range(1, m_max + 1):
        for delta in iter_nonzero_vectors(m, modulus):
            p = collision_probability(delta, modulus, method="brute")
            if p > target:
                return IndexVector(delta, modulus), p
    return None


def iter_nonzero_vectors(m: int, modulus: int):
    """Yield every nonzero vector of Z_modulus^m as an int64 array."""
    if m == 0:
        return
    grid = np.indices((modulus,) * m).reshape(m, -1).T
    for row in grid[1:]:
        yield row


def make_rng(seed=None) -> np.random.Generator:
    """PCG64 generator; identical streams on every platform for a given seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def fork_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent child generators derived from ``seed`` via SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(child)) for child in ss.spawn(count)]


def sample_uniform_vector(length: int, modulus: int, rng) -> IndexVector:
    """Uniform random vector of Z_modulus^length."""
    if length < 0:
        raise ValueError("length must be non-negative")
    rng = make_rng(rng)
    return IndexVector(rng.integers(0, modulus, size=length, dtype=np.int64), modulus)
