"""Entropy-reducing preprocessing for isotropic states and the resulting rates.

Two preprocessing families are covered: iterated recurrence (two copies,
bilateral controlled shift, keep on equal target outcomes, re-twirl) and
local projection onto matching blocks of the computational basis.  Both are
followed by hashing/breeding on whatever survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .states import isotropic_hashing_rate

#: Which keep probability drives recurrence yields by default.
DEFAULT_KEEP = "total"
KEEP_CONVENTIONS = ("total", "single")
#: Full integer-partition search is used up to this dimension.
PARTITION_ENUM_MAX_D = 12


@dataclass(frozen=True)
class Partition:
    d: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(int(q) for q in self.blocks)
        if not blocks or any(q < 1 for q in blocks):
            raise ValueError(f"blocks must be positive integers, got {self.blocks}")
        if sum(blocks) != self.d:
            raise ValueError(f"blocks {blocks} do not sum to d={self.d}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def equal(cls, d: int, q: int) -> "Partition":
        if d % q:
            raise ValueError(f"block size {q} does not divide d={d}")
        return cls(d, (q,) * (d // q))

    @classmethod
    def near_equal(cls, d: int, b: int) -> "Partition":
        """``b`` blocks whose sizes differ by at most one."""
        q, extra = divmod(d, b)
        return cls(d, (q + 1,) * extra + (q,) * (b - extra))

    def label(self) -> str:
        sizes = sorted(set(self.blocks), reverse=True)
        if len(sizes) == 1 and len(self.blocks) > 1:
            return f"{len(self.blocks)}x{sizes[0]}"
        return "+".join(str(q) for q in self.blocks)


@dataclass(frozen=True)
class RecurrenceResult:
    f_prime: float
    p_keep: float
    p_single: float
    p_total: float

    @property
    def survival(self) -> float:
        """Copies kept per input copy: half are consumed as targets."""
        return self.p_keep / 2


def recurrence_step(d: int, f: float, keep: str = DEFAULT_KEEP) -> RecurrenceResult:
    """One recurrence round on two isotropic copies of fidelity ``f``.

    Returns the output fidelity and two keep probabilities: ``p_single`` is
    ``N / ((d+1)^2 d (d-1))`` and ``p_total`` is ``N / ((d+1)^2 (d-1))``
    with ``N = d^3 f^2 - 2 d f + d^2 + d - 1``.  The dense simulation in
    :func:`qudit_distill.oracle.recurrence_dense` reproduces ``p_total``,
    the total probability of equal outcomes; ``p_single`` is the probability
    of one particular equal outcome.  ``keep`` selects which one is reported
    as ``p_keep``.
    """
    if keep not in KEEP_CONVENTIONS:
        raise ValueError(f"keep must be one of {KEEP_CONVENTIONS}")
    if not 0.0 <= f <= 1.0:
        raise ValueError("f must lie in [0, 1]")
    num = d**3 * f * f - 2 * d * f + d * d + d - 1
    f_prime = (1 + f * (d * f * (d * d + d - 1) - 2)) / num
    p_single = num / ((d + 1) ** 2 * d * (d - 1))
    p_total = num / ((d + 1) ** 2 * (d - 1))
    return RecurrenceResult(f_prime, p_total if keep == "total" else p_single, p_single, p_total)


def recurrence_then_hash_rate(d: int, f: float, rounds: int, keep: str = DEFAULT_KEEP) -> float:
    """Rate of ``rounds`` recurrence steps (re-twirled each time) followed by hashing."""
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    factor = 1.0
    for _ in range(rounds):
        res = recurrence_step(d, f, keep)
        factor *= res.survival
        f = res.f_prime
    return factor * isotropic_hashing_rate(d, f)


def recurrence_trajectory(d: int, f: float, rounds: int, keep: str = DEFAULT_KEEP) -> list[tuple[int, float, float]]:
    """``(k, f_k, rate_k)`` for ``k = 0..rounds``."""
    out = [(0, f, isotropic_hashing_rate(d, f))]
    factor = 1.0
    for k in range(1, rounds + 1):
        res = recurrence_step(d, f, keep)
        factor *= res.survival
        f = res.f_prime
        out.append((k, f, factor * isotropic_hashing_rate(d, f)))
    return out


def _as_partition(d: int, partition) -> Partition:
    if isinstance(partition, Partition):
        if partition.d != d:
            raise ValueError(f"partition is for d={partition.d}, not {d}")
        return partition
    return Partition(d, tuple(partition))


def _block(d: int, f: float, q: int) -> tuple[float, float]:
    noise = (1.0 - f) / (d * d - 1.0)
    p = q / d * f + noise * (q * q - q / d)
    if p <= 0:
        return 0.0, 0.0
    fi = (f * q / d + noise * (1.0 - q / d)) / p
    return p, min(1.0, max(0.0, fi))


def subspace_projection(d: int, f: float, partition) -> list[tuple[float, int, float]]:
    """``(p_i, q_i, f_i)`` for each block: probability both parties see block ``i``
    and the fidelity of the isotropic state left on it."""
    part = _as_partition(d, partition)
    if not 0.0 <= f <= 1.0:
        raise ValueError("f must lie in [0, 1]")
    out = []
    for q in part.blocks:
        p, fi = _block(d, f, q)
        out.append((p, q, fi))
    return out


def subspace_rate(d: int, f: float, partition) -> float:
    """Sum over blocks of ``p_i * max(0, log2 q_i - S(isotropic(q_i, f_i)))``."""
    part = _as_partition(d, partition)
    total = 0.0
    for q, mult in _counts(part.blocks):
        if q == 1:
            continue
        p, fi = _block(d, f, q)
        total += mult * p * isotropic_hashing_rate(q, fi)
    return total


def _counts(blocks: Sequence[int]) -> list[tuple[int, int]]:
    vals, counts = np.unique(np.asarray(blocks), return_counts=True)
    return [(int(v), int(c)) for v, c in zip(vals, counts)]


def pair_fidelity(m: int, f: float) -> float:
    """Fidelity of one qubit pair of an isotropic state on ``d = 2^m``."""
    return f + (1.0 - f) * (4.0 ** (m - 1) - 1.0) / (4.0**m - 1.0)


def qubit_level_rate(m: int, f: float) -> float:
    """Treat ``d = 2^m`` as ``m`` qubit pairs, twirl each and hash at the qubit level."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return m * isotropic_hashing_rate(2, pair_fidelity(m, f))


@dataclass(frozen=True)
class AsymptoticReport:
    m: int
    f: float
    p_tilde: float
    f_tilde: float
    p_block: float
    f_block: float
    normalized_rate: float


def large_d_asymptotics(m: int, f: float) -> AsymptoticReport:
    """Lower bounds for ``m`` equal blocks of size ``2^m / m`` on ``d = 2^m``.

    Requires ``m`` a power of two and ``m >= 1/(1-f)``.  Raises
    AssertionError if the exact block values fall below the bounds.
    """
    if m < 1 or m & (m - 1):
        raise ValueError(f"m={m} must be a power of two")
    if f >= 1.0 or m < 1.0 / (1.0 - f):
        raise ValueError(f"need m >= 1/(1-f); m={m}, f={f}")
    d = 2**m
    q = d // m
    p_block, f_block = _block(d, f, q)
    p_tilde = (f - 4.0**-m) / m
    f_tilde = f * m / (f * m + 1)
    if p_block < p_tilde or f_block < f_tilde:
        raise AssertionError(f"block values ({p_block}, {f_block}) below bounds ({p_tilde}, {f_tilde})")
    rate = m * p_block * isotropic_hashing_rate(q, f_block)
    return AsymptoticReport(m, f, p_tilde, f_tilde, p_block, f_block, rate / m)


# -- strategy search --------------------------------------------------------


@lru_cache(maxsize=None)
def _integer_partitions(d: int, largest: Optional[int] = None) -> tuple:
    largest = d if largest is None else largest
    if d == 0:
        return ((),)
    out = []
    for q in range(min(d, largest), 0, -1):
        for rest in _integer_partitions(d - q, q):
            out.append((q,) + rest)
    return tuple(out)


def candidate_partitions(d: int) -> list[Partition]:
    """Nontrivial block partitions searched by :func:`best_strategy_rate`.

    Every integer partition for ``d <= 12``; otherwise near-equal splits
    into ``b = 2..d`` blocks plus, for ``d = 2^m``, every equal power-of-two
    split.
    """
    if d <= PARTITION_ENUM_MAX_D:
        return [Partition(d, p) for p in _integer_partitions(d) if len(p) > 1]
    seen = set()
    out = []
    for b in range(2, d + 1):
        part = Partition.near_equal(d, b)
        if part.blocks not in seen:
            seen.add(part.blocks)
            out.append(part)
    return out


def power_of_two_partitions(d: int) -> list[Partition]:
    """Equal splits into blocks of size ``2^j``, ``j = 1..m-1`` for ``d = 2^m``."""
    m = int(round(math.log2(d)))
    if 2**m != d:
        raise ValueError(f"d={d} is not a power of two")
    return [Partition.equal(d, 2**j) for j in range(1, m)]


def subspace_envelope(
    d: int, f: float, partitions: Optional[Iterable[Partition]] = None, include_full: bool = True
) -> tuple[float, Optional[Partition]]:
    """Best subspace rate over ``partitions`` (default: :func:`candidate_partitions`).

    With ``include_full`` the unprojected space (plain hashing) competes too.
    """
    best, arg = 0.0, None
    if include_full:
        best, arg = isotropic_hashing_rate(d, f), Partition(d, (d,))
    for part in partitions if partitions is not None else candidate_partitions(d):
        r = subspace_rate(d, f, part)
        if r > best:
            best, arg = r, part
    return best, arg


def best_strategy_rate(d: int, f: float, max_rounds: int = 8, keep: str = DEFAULT_KEEP) -> tuple[str, float]:
    """Largest rate among plain hashing, 1..max_rounds recurrence rounds, and block projections."""
    best = ("hashing", isotropic_hashing_rate(d, f))
    for k, _, rate in recurrence_trajectory(d, f, max_rounds, keep)[1:]:
        if rate > best[1]:
            best = (f"recurrence:{k}", rate)
    rate, part = subspace_envelope(d, f, include_full=False)
    if part is not None and rate > best[1]:
        best = (f"subspace:{part.label()}", rate)
    return best
