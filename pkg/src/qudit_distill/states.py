"""Bell-diagonal, isotropic and low-rank states at the probability level."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

RENORM_TOL = 1e-9


def shannon_entropy(p) -> float:
    """Shannon entropy in bits with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float).reshape(-1)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))


class BellDiagonalState:
    """Weights ``lam[k, l]`` of a mixture of maximally entangled states.

    Row index is the shift label ``k``, column index the phase label ``l``.
    ``factor = (dprime, p)`` marks a state on ``d = dprime**p`` described in
    the product basis of ``p`` prime-dimensional pairs; entry ``[k, l]`` then
    refers to the digits of ``k`` and ``l`` written in base ``dprime``.
    """

    __slots__ = ("d", "lam", "factor")

    def __init__(self, d: int, lam, factor: Optional[tuple[int, int]] = None):
        d = int(d)
        if d < 1:
            raise ValueError("d must be positive")
        lam = np.array(lam, dtype=float).reshape(d, d)
        if np.any(lam < 0):
            raise ValueError("weights must be non-negative")
        total = lam.sum()
        if abs(total - 1.0) > RENORM_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        lam = lam / total
        lam.setflags(write=False)
        if factor is not None:
            dp, p = factor
            if dp**p != d:
                raise ValueError(f"factor {factor} does not match d={d}")
        self.d = d
        self.lam = lam
        self.factor = factor

    def __repr__(self) -> str:
        return f"BellDiagonalState(d={self.d}, factor={self.factor})"

    @property
    def probabilities(self) -> np.ndarray:
        """Flat weights indexed by ``k * d + l``."""
        return self.lam.reshape(-1)

    def mix(self, other: "BellDiagonalState", t: float) -> "BellDiagonalState":
        """Convex combination ``t * self + (1 - t) * other``."""
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return BellDiagonalState(self.d, t * self.lam + (1 - t) * other.lam)

    def factor_pmf(self) -> np.ndarray:
        """Joint weights over the ``p`` prime factors.

        Returns an array of shape ``(dprime,) * 2p`` indexed by
        ``(k_1, ..., k_p, l_1, ..., l_p)``, the most significant digit first.
        """
        dp, p = self.factor if self.factor is not None else (self.d, 1)
        return self.lam.reshape((dp,) * (2 * p))

    @classmethod
    def pure(cls, d: int, k: int = 0, l: int = 0) -> "BellDiagonalState":
        lam = np.zeros((d, d))
        lam[k, l] = 1.0
        return cls(d, lam)

    @classmethod
    def maximally_mixed(cls, d: int) -> "BellDiagonalState":
        return cls(d, np.full((d, d), 1.0 / (d * d)))


@dataclass(frozen=True)
class IsotropicState:
    d: int
    f: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if not 0.0 <= self.f <= 1.0:
            raise ValueError(f"fidelity {self.f} outside [0, 1]")


@dataclass(frozen=True)
class LowRankSpectrum:
    """Weights ``mu_l`` of a mixture of the states ``|Psi_{0,l}>``."""

    mu: tuple

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or mu.size < 2:
            raise ValueError("mu must be a vector of length d >= 2")
        if np.any(mu < 0):
            raise ValueError("mu must be non-negative")
        if abs(mu.sum() - 1.0) > RENORM_TOL:
            raise ValueError(f"mu sums to {mu.sum()!r}, not 1")
        object.__setattr__(self, "mu", tuple((mu / mu.sum()).tolist()))

    @property
    def d(self) -> int:
        return len(self.mu)


@dataclass
class RateReport:
    """Per-copy rates in bits, keyed by strategy name."""

    d: int
    rates: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, r in self.rates.items():
            if r < 0:
                raise ValueError(f"rate {name} is negative")

    def add(self, name: str, bits: float) -> None:
        if bits < 0:
            raise ValueError(f"rate {name} is negative")
        self.rates[name] = float(bits)

    def normalized(self) -> dict:
        scale = np.log2(self.d)
        return {name: r / scale for name, r in self.rates.items()}

    @property
    def hashing(self) -> Optional[float]:
        return self.rates.get("hashing")

    @property
    def er_bound(self) -> Optional[float]:
        return self.rates.get("er")


def entropy(state: BellDiagonalState) -> float:
    """Entropy in bits of the Bell-diagonal spectrum."""
    return shannon_entropy(state.lam)


def isotropic_to_bell_diagonal(s: IsotropicState) -> BellDiagonalState:
    d, f = s.d, s.f
    if d == 1:
        return BellDiagonalState(1, [[1.0]])
    lam = np.full((d, d), (1.0 - f) / (d * d - 1))
    lam[0, 0] = f
    return BellDiagonalState(d, lam)


def isotropic(d: int, f: float) -> BellDiagonalState:
    return isotropic_to_bell_diagonal(IsotropicState(d, f))


def isotropic_entropy(d: int, f: float) -> float:
    """Entropy of the isotropic state without building the d x d table."""
    if d == 1:
        return 0.0
    rest = 1.0 - f
    h = binary_entropy(f)
    if rest > 0:
        h += rest * np.log2(d * d - 1.0)
    return float(h)


def hashing_rate(state: BellDiagonalState) -> float:
    """``max(0, log2 d - S)``."""
    return max(0.0, float(np.log2(state.d)) - entropy(state))


def isotropic_hashing_rate(d: int, f: float) -> float:
    if d == 1:
        return 0.0
    return max(0.0, float(np.log2(d)) - isotropic_entropy(d, f))


def er_isotropic(d: int, f: float) -> float:
    """Relative entropy of entanglement of an isotropic state, in bits."""
    if not 0.0 <= f <= 1.0:
        raise ValueError("f must lie in [0, 1]")
    if d < 2 or f <= 1.0 / d:
        return 0.0
    return float(np.log2(d) - (1.0 - f) * np.log2(d - 1.0) - binary_entropy(f))


def er_normalized_limit(d: int, f: float) -> float:
    """``E_R / log2 d``; tends to ``f`` as d grows."""
    return er_isotropic(d, f) / float(np.log2(d))


def low_rank_state(mu: LowRankSpectrum) -> BellDiagonalState:
    d = mu.d
    lam = np.zeros((d, d))
    lam[0, :] = mu.mu
    return BellDiagonalState(d, lam)


def er_bound_low_rank(mu: LowRankSpectrum) -> float:
    """Relative-entropy bound ``log2 d - S(mu)`` against the maximally correlated state."""
    return float(np.log2(mu.d)) - shannon_entropy(mu.mu)
