import itertools
import math

import numpy as np
import pytest

from qudit_distill import oracle, protocols, states
from qudit_distill.protocols import MeasurementPlan, PrimeDimensionRequired
from qudit_distill.states import BellDiagonalState
from qudit_distill.zmod import IndexVector


def plan(M, d, g=0):
    return MeasurementPlan(IndexVector(M, d), g)


def two_point_state():
    # weight 1/2 on (0,0) and (1,0): one bit of entropy per pair
    return BellDiagonalState(2, [[0.5, 0.0], [0.5, 0.0]])


def test_sample_sequence():
    assert protocols.sample_sequence(BellDiagonalState.pure(3), 5, 0).is_zero()
    a = protocols.sample_sequence(states.isotropic(3, 0.5), 20, 7)
    assert a == protocols.sample_sequence(states.isotropic(3, 0.5), 20, 7)
    assert len(a) == 40


def test_sample_sequence_frequencies():
    st = BellDiagonalState(2, [[0.4, 0.3], [0.2, 0.1]])
    S = protocols.sample_sequence(st, 10**5, 5).entries
    pairs = S[: 10**5] * 2 + S[10**5 :]
    freq = np.bincount(pairs, minlength=4) / 10**5
    sigma = np.sqrt(st.probabilities * (1 - st.probabilities) / 10**5)
    assert np.all(np.abs(freq - st.probabilities) < 3 * sigma)


def test_breeding_outcome_examples():
    S = IndexVector([1, 2, 0, 2, 1, 1], 3)
    assert protocols.breeding_outcome(S, plan([1, 0, 2, 0, 1, 1], 3)) == 0
    e = [0, 0, 1, 0, 0, 0]
    assert protocols.breeding_outcome(S, plan(e, 3)) == S[2]


def test_breeding_crossdim():
    S = IndexVector([1, 1], 2)
    assert protocols.breeding_outcome(S, plan([2, 2], 3), crossdim=True) == 1
    with pytest.raises(PrimeDimensionRequired):
        protocols.breeding_outcome(S, plan([1, 1], 4), crossdim=True)
    with pytest.raises(ValueError):
        protocols.breeding_outcome(S, plan([1, 1], 3))


def test_hashing_outcome_examples():
    assert protocols.hashing_outcome(IndexVector([2, 1], 3), MeasurementPlan(IndexVector([], 3), 2)) == 1
    S = IndexVector([1, 0, 1, 1], 2)
    assert protocols.hashing_outcome(S, plan([1, 1], 2, 1)) == 0
    # g = 0 and a (0,0) target reduce to the breeding reading of the sources
    S = IndexVector([2, 0, 1, 0], 3)
    assert protocols.hashing_outcome(S, plan([1, 2], 3)) == (1 * 2 + 2 * 1) % 3


def test_hashing_update_examples():
    S = IndexVector([1, 0, 1, 1], 2)
    assert protocols.hashing_update(S, plan([1, 1], 2)).tolist() == [0, 0]
    S = IndexVector([2, 1, 1, 0], 3)
    assert protocols.hashing_update(S, plan([2, 2], 3)).tolist() == [2, 1]
    # source (0,0), target (1,2) in (k..., l...) layout
    S = IndexVector([0, 1, 0, 2], 3)
    assert protocols.hashing_update(S, plan([2, 1], 3)).tolist() == [2, 2]
    with pytest.raises(ValueError):
        protocols.hashing_update(S, plan([2, 1, 0, 0], 3))


@pytest.mark.parametrize("d", [2, 3])
def test_hashing_rules_match_dense_oracle(d):
    for S in itertools.product(range(d), repeat=4):
        for M in itertools.product(range(d), repeat=2):
            for g in range(d):
                p = plan(list(M), d, g)
                Sv = IndexVector(S, d)
                out, rest = oracle.hashing_round_dense(d, S, M, g)
                assert out == protocols.hashing_outcome(Sv, p)
                assert rest == protocols.hashing_update(Sv, p).tolist()


def test_hashing_three_party_matches_dense_oracle():
    rng = np.random.default_rng(2)
    for _ in range(30):
        S = rng.integers(0, 2, 6)
        M = rng.integers(0, 2, 4)
        g = int(rng.integers(0, 2))
        out, rest = oracle.hashing_round_dense(2, S, M, g)
        Sv = IndexVector(S, 2)
        assert out == protocols.hashing_outcome(Sv, plan(M, 2, g))
        assert rest == protocols.hashing_update(Sv, plan(M, 2, g)).tolist()


@pytest.mark.parametrize("d", [2, 3])
def test_hashing_pairwise_survival(d):
    agree, still = protocols.hashing_pair_agreement(d, 2)
    assert still <= 1 / d + 1e-12
    assert agree <= 1 / d + 1e-12


def test_asymptotic_breeding_rounds():
    assert protocols.asymptotic_breeding_rounds(BellDiagonalState.pure(3), 10) == 0
    assert protocols.asymptotic_breeding_rounds(BellDiagonalState.maximally_mixed(5), 7) == 14
    assert protocols.asymptotic_breeding_rounds(states.isotropic(2, 0.9), 100) == 63


def test_prime_power_distribution():
    assert np.allclose(protocols.prime_power_distribution(3, 1, 0.6).lam, states.isotropic(3, 0.6).lam)
    assert protocols.prime_power_distribution(2, 3, 1.0).lam[0, 0] == 1.0
    st = protocols.prime_power_distribution(2, 2, 0.5)
    assert states.entropy(st) == pytest.approx(states.entropy(states.isotropic(4, 0.5)))
    assert st.factor == (2, 2)
    with pytest.raises(PrimeDimensionRequired):
        protocols.prime_power_distribution(4, 2, 0.5)


def test_pure_state_succeeds_immediately():
    for mode in ("breeding", "hashing"):
        stats = protocols.simulate_identification(BellDiagonalState.pure(3, 1, 2), 3, mode, max_rounds=3, trials=5)
        assert stats.success_prob[0] == 1.0
        assert stats.mean_yield[0] == pytest.approx(math.log2(3))


def test_composite_dimension_is_refused():
    with pytest.raises(PrimeDimensionRequired, match="prime dimension required"):
        protocols.simulate_identification(states.isotropic(6, 0.9), 2, "hashing", trials=2)
    with pytest.raises(PrimeDimensionRequired, match="prime dimension required"):
        protocols.simulate_identification(states.isotropic(4, 0.9), 2, "breeding", trials=2)


def test_exact_mode_bound():
    with pytest.raises(ValueError):
        protocols.simulate_identification(states.isotropic(5, 0.9), 6, "breeding", trials=1, method="exact")


def test_small_breeding_identifies_and_respects_bound():
    st = two_point_state()
    stats = protocols.simulate_identification(st, 2, "breeding", max_rounds=6, trials=400, seed=3)
    assert stats.truth_always_kept
    assert stats.method == "exact"
    for r in range(7):
        bound = 1 - 2.0 ** (2 * 1.0 - r)
        assert stats.success_prob[r] >= bound - 3 * stats.stderr[r] - 1e-12
    assert stats.success_prob[-1] > 0.9
    assert np.all(np.diff(stats.success_prob) >= 0)


def test_simulation_is_deterministic_and_worker_independent():
    st = states.isotropic(3, 0.9)
    a = protocols.simulate_identification(st, 3, "hashing", max_rounds=6, trials=40, seed=9, workers=1)
    b = protocols.simulate_identification(st, 3, "hashing", max_rounds=6, trials=40, seed=9, workers=3)
    assert np.array_equal(a.success_prob, b.success_prob)
    assert np.array_equal(a.shrink_ratios, b.shrink_ratios)


def test_hashing_monte_carlo_rises():
    st = states.isotropic(2, 0.95)
    n = 10
    stats = protocols.simulate_identification(st, n, "hashing", trials=300, seed=4, method="typical")
    r0 = math.ceil(n * states.entropy(st))
    curve = stats.success_prob[r0:r0 + 8]
    assert np.all(np.diff(curve) >= 0)
    assert curve[-1] > curve[0]
    assert stats.truth_always_kept


def test_hashing_prime_power_mode():
    st = protocols.prime_power_distribution(2, 2, 0.95)
    stats = protocols.simulate_identification(st, 2, "hashing-prime-power", trials=100, seed=2)
    assert stats.truth_always_kept
    assert stats.success_prob[-1] > 0.9
    assert stats.mean_yield[0] == pytest.approx(stats.success_prob[0] * 2.0)


def test_crossdim_breeding_yield_uses_dprime():
    st = states.isotropic(4, 0.95)
    stats = protocols.simulate_identification(st, 2, "breeding-crossdim", max_rounds=8, trials=50, seed=1)
    assert stats.truth_always_kept
    r = 2
    expected = max(0.0, 2 * 2 - r * math.log2(5)) / 2
    assert stats.mean_yield[r] == pytest.approx(stats.success_prob[r] * expected)


def test_runs_are_protocol_runs():
    stats = protocols.simulate_identification(two_point_state(), 3, "breeding", trials=10, seed=0)
    for run in stats.runs:
        assert isinstance(run, protocols.ProtocolRun)
        assert run.yield_bits >= 0
        assert run.rounds <= 2 * 3 + 2
