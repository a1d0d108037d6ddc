"""Breeding and hashing as classical processes on index vectors.

A sequence of ``n`` pairs is a vector ``S = (k_1..k_n, l_1..l_n)`` over Z_d.
Breeding measures ``<M, S>`` using predistilled targets and leaves ``S``
untouched.  Hashing sacrifices the last pair of ``S`` as the target; the
measured value picks up extra terms from the target's labels, and the
remaining sources are shifted by the target's phase label.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .states import BellDiagonalState, entropy, isotropic
from .zmod import IndexVector, is_prime, make_rng, sample_uniform_vector

MODES = ("breeding", "breeding-crossdim", "hashing", "hashing-prime-power")
#: Largest sequence space d^(2n) handled by exact posterior enumeration.
EXACT_LIMIT = 2**24


class PrimeDimensionRequired(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementPlan:
    """Multiplicities ``(s_1..s_n, p_1..p_n)`` plus the hashing pre-rotation ``g``."""

    M: IndexVector
    g: int = 0

    def __post_init__(self):
        if not 0 <= self.g < self.M.modulus:
            raise ValueError(f"g={self.g} outside Z_{self.M.modulus}")

    @property
    def modulus(self) -> int:
        return self.M.modulus

    @classmethod
    def random(cls, length: int, modulus: int, rng) -> "MeasurementPlan":
        rng = make_rng(rng)
        M = sample_uniform_vector(length, modulus, rng)
        return cls(M, int(rng.integers(0, modulus)))


@dataclass
class ProtocolRun:
    mode: str
    n: int
    rounds: int
    identified: bool
    pairs_consumed: int
    yield_bits: float

    def __post_init__(self):
        if self.yield_bits < 0:
            raise ValueError("yield must be non-negative")


@dataclass
class IdentificationStats:
    """Outcome of :func:`simulate_identification`.

    ``success_prob[r]`` is the fraction of trials identified after at most
    ``r`` rounds (singleton set or posterior mass of the truth >= 1 - delta);
    ``singleton_prob`` counts singleton sets only.  ``mean_yield[r]`` is the
    expected yield in bits per input copy if the protocol stops after ``r``
    rounds.  ``shrink_ratios`` holds, for every round with wrong candidates
    left, the surviving fraction of those wrong candidates.
    """

    mode: str
    n: int
    d: int
    rounds: np.ndarray
    success_prob: np.ndarray
    singleton_prob: np.ndarray
    mean_yield: np.ndarray
    stderr: np.ndarray
    runs: list = field(default_factory=list)
    shrink_ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))
    truth_always_kept: bool = True
    method: str = "exact"


# -- single-sequence rules -------------------------------------------------


def sample_sequence(state: BellDiagonalState, n: int, rng) -> IndexVector:
    """Draw ``n`` i.i.d. pairs from ``state`` in ``(k..., l...)`` layout."""
    rng = make_rng(rng)
    d = state.d
    idx = rng.choice(d * d, size=n, p=state.probabilities)
    k, l = np.divmod(idx, d)
    return IndexVector(np.concatenate([k, l]), d)


def breeding_outcome(S: IndexVector, plan: MeasurementPlan, crossdim: bool = False) -> int:
    """Target reading ``<M, S>`` modulo the plan's modulus.

    With ``crossdim`` the plan lives in Z_d' for a prime ``d' >= d`` and the
    labels of ``S`` are embedded as integers.
    """
    mod = plan.modulus
    if crossdim:
        if mod < S.modulus or not is_prime(mod):
            raise PrimeDimensionRequired(f"cross-dimension target d'={mod} must be a prime >= d={S.modulus}")
    elif mod != S.modulus:
        raise ValueError(f"plan modulus {mod} differs from sequence modulus {S.modulus}")
    if len(plan.M) != len(S):
        raise ValueError(f"length mismatch: {len(plan.M)} vs {len(S)}")
    return int(np.dot(plan.M.entries, S.entries) % mod)


def _split_hashing(S: IndexVector, plan: MeasurementPlan):
    d = S.modulus
    if plan.modulus != d:
        raise ValueError(f"plan modulus {plan.modulus} differs from sequence modulus {d}")
    n = len(S) // 2
    if len(S) != 2 * n or n < 1:
        raise ValueError("sequence must have even length 2n with n >= 1")
    if len(plan.M) != 2 * (n - 1):
        raise ValueError(f"hashing plan needs length {2 * (n - 1)}, got {len(plan.M)}")
    return d, n


def hashing_outcome(S: IndexVector, plan: MeasurementPlan) -> int:
    """Final target shift when the last pair of ``S`` is the target."""
    d, n = _split_hashing(S, plan)
    out = _hashing_outcomes(S.entries[None, :], plan.M.entries, plan.g, d)
    return int(out[0])


def hashing_update(S: IndexVector, plan: MeasurementPlan) -> IndexVector:
    """Sources after one hashing round, target removed.

    Each source ``a`` moves to ``(k_a + p_a l_t, l_a - s_a l_t)``.
    """
    d, n = _split_hashing(S, plan)
    out = _hashing_updates(S.entries[None, :], plan.M.entries, d)
    return IndexVector(out[0], d)


def _hashing_outcomes(C: np.ndarray, M: np.ndarray, g: int, d: int) -> np.ndarray:
    n = C.shape[1] // 2
    s, p = M[: n - 1].astype(np.int64), M[n - 1 :].astype(np.int64)
    k_t = C[:, n - 1].astype(np.int64)
    l_t = C[:, 2 * n - 1].astype(np.int64)
    acc = k_t + (g - int(np.dot(s, p))) * l_t
    for a in range(n - 1):
        if s[a]:
            acc += s[a] * C[:, a]
        if p[a]:
            acc += p[a] * C[:, n + a]
    return acc % d


def _hashing_updates(C: np.ndarray, M: np.ndarray, d: int) -> np.ndarray:
    n = C.shape[1] // 2
    s, p = M[: n - 1].astype(np.int64), M[n - 1 :].astype(np.int64)
    l_t = C[:, 2 * n - 1].astype(np.int64)[:, None]
    ks = (C[:, : n - 1].astype(np.int64) + p[None, :] * l_t) % d
    ls = (C[:, n : 2 * n - 1].astype(np.int64) - s[None, :] * l_t) % d
    return np.concatenate([ks, ls], axis=1).astype(C.dtype)


def _breeding_outcomes(C: np.ndarray, M: np.ndarray, mod: int) -> np.ndarray:
    acc = np.zeros(C.shape[0], dtype=np.int64)
    for j, m in enumerate(M):
        if m:
            acc += int(m) * C[:, j].astype(np.int64)
    return acc % mod


def asymptotic_breeding_rounds(state: BellDiagonalState, n: int, modulus: Optional[int] = None) -> int:
    """``ceil(n S / log2 modulus)`` measurements to single out the sequence."""
    mod = modulus or state.d
    x = n * entropy(state) / math.log2(mod)
    return max(0, math.ceil(x - 1e-9))


def prime_power_distribution(dprime: int, p: int, f: float) -> BellDiagonalState:
    """Isotropic weights on ``d = dprime**p`` in the product basis of ``p`` prime pairs."""
    if not is_prime(dprime):
        raise PrimeDimensionRequired(f"d'={dprime} is not prime")
    d = dprime**p
    base = isotropic(d, f)
    return BellDiagonalState(d, base.lam, factor=(dprime, p))


# -- identification simulation ---------------------------------------------


@dataclass
class _Model:
    mode: str
    n: int
    d: int  # dimension of one copy
    d0: int  # dimension of one measured factor
    p: int  # factors per copy
    modulus: int  # measurement modulus
    pmf: np.ndarray  # weights over (k_1..k_p, l_1..l_p) for one copy
    entropy: float

    @property
    def pairs(self) -> int:
        return self.n * self.p

    def yield_bits(self, r: int) -> float:
        if self.mode.startswith("breeding"):
            return max(0.0, self.n * math.log2(self.d) - r * math.log2(self.modulus))
        return max(0, self.pairs - r) * math.log2(self.d0)


def _build_model(state: BellDiagonalState, n: int, mode: str, dprime: Optional[int]) -> _Model:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    d = state.d
    if mode == "hashing-prime-power":
        if state.factor is None:
            raise ValueError("hashing-prime-power needs a factored state (see prime_power_distribution)")
        d0, p = state.factor
        if not is_prime(d0):
            raise PrimeDimensionRequired(f"prime dimension required: factor d'={d0}")
        modulus = d0
    else:
        d0, p = d, 1
        if mode == "breeding-crossdim":
            if dprime is None:
                dprime = d
                while not is_prime(dprime):
                    dprime += 1
            if dprime < d or not is_prime(dprime):
                raise PrimeDimensionRequired(f"prime dimension required: d'={dprime} must be a prime >= {d}")
            modulus = dprime
        else:
            if not is_prime(d):
                raise PrimeDimensionRequired(f"prime dimension required for {mode}: d={d}")
            modulus = d
    pmf = state.lam.reshape((d0,) * (2 * p)).reshape(-1)
    return _Model(mode, n, d, d0, p, modulus, pmf, entropy(state))


def _digits(idx: np.ndarray, base: int, width: int) -> np.ndarray:
    out = np.zeros(idx.shape + (width,), dtype=np.int64)
    for w in range(width - 1, -1, -1):
        idx, out[..., w] = np.divmod(idx, base)
    return out


def _copies_to_vectors(model: _Model, copy_idx: np.ndarray) -> np.ndarray:
    """Map per-copy outcome indices of shape (N, n) to sequence vectors (N, 2np)."""
    p, d0 = model.p, model.d0
    digits = _digits(copy_idx, d0, 2 * p)  # (N, n, 2p): k digits then l digits
    ks = digits[..., :p].reshape(copy_idx.shape[0], -1)
    ls = digits[..., p:].reshape(copy_idx.shape[0], -1)
    dtype = np.uint8 if model.modulus < 256 else np.int32
    return np.concatenate([ks, ls], axis=1).astype(dtype)


def _enumerate_support(model: _Model):
    if model.d ** (2 * model.n) > EXACT_LIMIT:
        raise ValueError(
            f"exact posterior needs d^(2n) <= {EXACT_LIMIT}, got {model.d}^{2 * model.n}; use method='typical'"
        )
    support = np.flatnonzero(model.pmf > 0)
    logp = np.log(model.pmf[support])
    s = support.size
    grid = np.indices((s,) * model.n).reshape(model.n, -1).T if model.n else np.zeros((1, 0), dtype=np.int64)
    copy_idx = support[grid]
    weights = logp[grid].sum(axis=1)
    return _copies_to_vectors(model, copy_idx), weights


def _vector_keys(C: np.ndarray, base: int) -> np.ndarray:
    keys = np.zeros(C.shape[0], dtype=object if C.shape[1] * math.log2(base) > 62 else np.int64)
    for j in range(C.shape[1]):
        keys = keys * base + C[:, j].astype(np.int64)
    return keys


def _typical_candidates(model: _Model, truth_copies: np.ndarray, rng, cap: int):
    size = min(2 ** math.ceil(model.n * model.entropy - 1e-9), cap)
    draws = rng.choice(model.pmf.size, size=(max(size - 1, 0), model.n), p=model.pmf)
    copies = np.vstack([truth_copies[None, :], draws])
    copies = np.unique(copies, axis=0)
    truth_row = int(np.flatnonzero((copies == truth_copies).all(axis=1))[0])
    weights = np.log(model.pmf[copies]).sum(axis=1)
    return _copies_to_vectors(model, copies), weights, truth_row


@dataclass
class _TrialResult:
    success_round: Optional[int]
    singleton_round: Optional[int]
    shrink: list
    truth_kept: bool


def _run_trial(model: _Model, base, rng, max_rounds: int, delta: float, method: str, cap: int, target: str):
    truth_copies = rng.choice(model.pmf.size, size=model.n, p=model.pmf)
    if method == "exact":
        C, logw, keys = base
        truth_vec = _copies_to_vectors(model, truth_copies[None, :])
        truth_row = int(np.flatnonzero(keys == _vector_keys(truth_vec, model.d0)[0])[0])
    else:
        C, logw, truth_row = _typical_candidates(model, truth_copies, rng, cap)
    is_true = np.zeros(C.shape[0], dtype=bool)
    is_true[truth_row] = True
    w = np.exp(logw - logw.max())
    hashing = model.mode.startswith("hashing")
    mod = model.modulus

    success_round = singleton_round = None
    shrink = []
    truth_kept = True
    r = 0
    while True:
        ti = int(np.flatnonzero(is_true)[0])
        if hashing:
            same = np.all(C == C[ti], axis=1) if C.shape[1] else np.ones(C.shape[0], dtype=bool)
        else:
            same = is_true
        singleton = bool(same.all())
        mass = float(w[same].sum() / w.sum())
        if success_round is None and (singleton or mass >= 1.0 - delta):
            success_round = r
        if singleton:
            singleton_round = r
            break
        if r >= max_rounds:
            break
        if hashing:
            pairs = C.shape[1] // 2
            if pairs == 0:
                break
            if target == "random" and pairs > 1:
                t = int(rng.integers(0, pairs))
                order = [a for a in range(pairs) if a != t] + [t]
                C = C[:, order + [pairs + a for a in order]]
            plan = MeasurementPlan.random(2 * (pairs - 1), mod, rng)
            out = _hashing_outcomes(C, plan.M.entries, plan.g, mod)
        else:
            plan = MeasurementPlan.random(C.shape[1], mod, rng)
            out = _breeding_outcomes(C, plan.M.entries, mod)
        keep = out == out[ti]
        wrong_before = int((~same).sum())
        if not keep[ti]:
            truth_kept = False
            break
        C, w, is_true = C[keep], w[keep], is_true[keep]
        if hashing:
            C = _hashing_updates(C, plan.M.entries, mod)
            ti = int(np.flatnonzero(is_true)[0])
            wrong_after = int((~np.all(C == C[ti], axis=1)).sum()) if C.shape[1] else 0
        else:
            wrong_after = int((~is_true).sum())
        if wrong_before:
            shrink.append(wrong_after / wrong_before)
        r += 1
    return _TrialResult(success_round, singleton_round, shrink, truth_kept)


def _trial_chunk(args):
    state, n, mode, dprime, seeds, max_rounds, delta, method, cap, target = args
    model = _build_model(state, n, mode, dprime)
    base = None
    if method == "exact":
        C, logw = _enumerate_support(model)
        base = (C, logw, _vector_keys(C, model.d0))
    return [
        _run_trial(model, base, np.random.Generator(np.random.PCG64(ss)), max_rounds, delta, method, cap, target)
        for ss in seeds
    ]


def worker_count(tasks: int) -> int:
    """Worker pool size: ``QD_THREADS`` if set, else the CPU count, never above ``tasks``."""
    env = os.environ.get("QD_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, tasks))


def simulate_identification(
    state: BellDiagonalState,
    n: int,
    mode: str = "breeding",
    max_rounds: Optional[int] = None,
    trials: int = 100,
    delta: float = 1e-6,
    seed=0,
    method: str = "auto",
    dprime: Optional[int] = None,
    cap: int = 4096,
    target: str = "last",
    workers: Optional[int] = None,
) -> IdentificationStats:
    """Monte Carlo estimate of how fast random measurements identify ``S``.

    ``method`` is ``"exact"`` (enumerate every sequence with nonzero prior),
    ``"typical"`` (truth plus a sampled set of ``min(2^ceil(nS), cap)``
    likely sequences) or ``"auto"`` (exact when ``d^(2n) <= 2^16``).
    Composite ``d`` raises :class:`PrimeDimensionRequired` except in the
    cross-dimension breeding mode.  Results depend only on ``seed``.
    """
    model = _build_model(state, n, mode, dprime)
    if method == "auto":
        method = "exact" if model.d ** (2 * n) <= 2**16 else "typical"
    if method not in ("exact", "typical"):
        raise ValueError(f"unknown method {method!r}")
    if method == "exact" and model.d ** (2 * n) > EXACT_LIMIT:
        raise ValueError(f"exact posterior needs d^(2n) <= {EXACT_LIMIT}")
    if target not in ("last", "random"):
        raise ValueError("target must be 'last' or 'random'")
    if max_rounds is None:
        max_rounds = 2 * model.pairs + 2
    seeds = np.random.SeedSequence(seed).spawn(trials)
    workers = workers or worker_count(trials)
    chunks = [seeds[i::workers] for i in range(workers)]
    args = [(state, n, mode, dprime, ch, max_rounds, delta, method, cap, target) for ch in chunks if ch]
    if len(args) > 1:
        with ProcessPoolExecutor(max_workers=len(args)) as pool:
            parts = list(pool.map(_trial_chunk, args))
    else:
        parts = [_trial_chunk(a) for a in args]
    # undo the round-robin split so results follow seed order
    results: list = [None] * trials
    for i, part in enumerate(parts):
        for j, res in enumerate(part):
            results[i + j * len(parts)] = res

    rounds = np.arange(max_rounds + 1)
    succ = np.array([[res.success_round is not None and res.success_round <= r for r in rounds] for res in results])
    single = np.array([[res.singleton_round is not None and res.singleton_round <= r for r in rounds] for res in results])
    yields = np.array([model.yield_bits(r) for r in rounds]) / n
    success_prob = succ.mean(axis=0)
    runs = []
    for res in results:
        r = res.success_round if res.success_round is not None else max_rounds
        ok = res.success_round is not None
        runs.append(ProtocolRun(mode, n, r, ok, r, model.yield_bits(r) if ok else 0.0))
    shrink = np.array([x for res in results for x in res.shrink])
    return IdentificationStats(
        mode=mode,
        n=n,
        d=model.d,
        rounds=rounds,
        success_prob=success_prob,
        singleton_prob=single.mean(axis=0),
        mean_yield=success_prob * yields,
        stderr=np.sqrt(success_prob * (1 - success_prob) / trials),
        runs=runs,
        shrink_ratios=shrink,
        truth_always_kept=all(res.truth_kept for res in results),
        method=method,
    )


def hashing_pair_agreement(d: int, n: int) -> tuple[float, float]:
    """Exhaustive worst case over ``S != S'`` of one hashing round.

    Returns ``(max P[outcomes agree], max P[outcomes agree and updated
    sequences still differ])`` with ``M`` and ``g`` uniform.
    """
    total = d ** (2 * n)
    if total**2 * d ** (2 * n - 1) > 2**26:
        raise ValueError("instance too large for exhaustive enumeration")
    C = np.indices((d,) * (2 * n)).reshape(2 * n, -1).T.astype(np.int64)
    plans = np.indices((d,) * (2 * n - 1)).reshape(2 * n - 1, -1).T
    outs = np.empty((len(plans), total), dtype=np.int64)
    upd_keys = np.empty((len(plans), total), dtype=np.int64)
    for i, row in enumerate(plans):
        M, g = row[:-1], int(row[-1])
        outs[i] = _hashing_outcomes(C, M, g, d)
        upd = _hashing_updates(C, M, d)
        upd_keys[i] = _vector_keys(upd, d) if upd.shape[1] else 0
    agree = (outs[:, :, None] == outs[:, None, :]).mean(axis=0)
    still = ((outs[:, :, None] == outs[:, None, :]) & (upd_keys[:, :, None] != upd_keys[:, None, :])).mean(axis=0)
    np.fill_diagonal(agree, 0.0)
    np.fill_diagonal(still, 0.0)
    return float(agree.max()), float(still.max())
