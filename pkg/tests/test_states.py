import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qudit_distill import states
from qudit_distill.states import BellDiagonalState, IsotropicState, LowRankSpectrum, RateReport


def test_bell_diagonal_validation():
    with pytest.raises(ValueError):
        BellDiagonalState(2, [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(ValueError):
        BellDiagonalState(2, [0.3, 0.3, 0.3, 0.3])
    s = BellDiagonalState(2, [0.25 + 1e-10, 0.25, 0.25, 0.25])
    assert s.lam.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        s.lam[0, 0] = 1.0


def test_entropy_examples():
    assert states.entropy(BellDiagonalState.pure(3)) == 0.0
    assert states.entropy(BellDiagonalState.maximally_mixed(3)) == pytest.approx(2 * math.log2(3))
    assert states.entropy(states.isotropic(2, 0.9)) == pytest.approx(0.6275, abs=5e-5)


def test_isotropic_examples():
    assert states.isotropic(3, 1.0).lam[0, 0] == 1.0
    assert np.allclose(states.isotropic(3, 1 / 9).lam, 1 / 9)
    assert np.allclose(states.isotropic(2, 0.7).probabilities, [0.7, 0.1, 0.1, 0.1])
    with pytest.raises(ValueError):
        IsotropicState(2, 1.2)


@pytest.mark.parametrize("d", [2, 3, 7, 16])
def test_isotropic_entropy_closed_form(d):
    for f in np.linspace(0, 1, 11):
        assert states.isotropic_entropy(d, f) == pytest.approx(states.entropy(states.isotropic(d, f)), abs=1e-12)


def test_hashing_rate_examples():
    assert states.hashing_rate(BellDiagonalState.pure(5)) == pytest.approx(math.log2(5))
    assert states.hashing_rate(BellDiagonalState.maximally_mixed(5)) == 0.0
    assert states.hashing_rate(states.isotropic(2, 0.9)) == pytest.approx(0.3725, abs=5e-5)


def test_er_isotropic_examples():
    for d in (2, 3, 10):
        assert states.er_isotropic(d, 1 / d) == 0.0
        assert states.er_isotropic(d, 1.0) == math.log2(d)
    assert states.er_isotropic(2, 0.9) == pytest.approx(0.5310, abs=5e-5)
    assert states.er_normalized_limit(2**10, 0.5) == pytest.approx(0.4001, abs=5e-5)
    assert states.er_normalized_limit(2**10, 1.0) == 1.0


@pytest.mark.parametrize("d", range(2, 10))
def test_er_monotone_and_dominates_hashing(d):
    fs = np.linspace(0, 1, 200)
    er = np.array([states.er_isotropic(d, f) for f in fs])
    assert np.all(er[fs <= 1 / d] == 0)
    above = er[fs > 1 / d]
    assert np.all(np.diff(above) > 0)
    hr = np.array([states.isotropic_hashing_rate(d, f) for f in fs])
    assert np.all(hr <= er + 1e-12)


def test_low_rank_examples():
    assert states.low_rank_state(LowRankSpectrum((1.0, 0.0, 0.0))).lam[0, 0] == 1.0
    s = states.low_rank_state(LowRankSpectrum((0.5, 0.3, 0.2)))
    assert np.allclose(s.lam[0], [0.5, 0.3, 0.2]) and s.lam[1:].sum() == 0
    u = LowRankSpectrum((0.25,) * 4)
    assert states.er_bound_low_rank(u) == pytest.approx(0.0)
    assert states.er_bound_low_rank(LowRankSpectrum((1.0, 0.0))) == 1.0
    with pytest.raises(ValueError):
        LowRankSpectrum((0.5, 0.6))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8).filter(lambda v: sum(v) > 1e-3))
def test_low_rank_hashing_equals_bound(weights):
    mu = np.array(weights) / sum(weights)
    spectrum = LowRankSpectrum(tuple(mu))
    assert states.hashing_rate(states.low_rank_state(spectrum)) == pytest.approx(states.er_bound_low_rank(spectrum), abs=1e-12)


def test_entropy_concave_under_mixing():
    rng = np.random.default_rng(11)
    for _ in range(50):
        d = int(rng.integers(2, 6))
        a = BellDiagonalState(d, rng.dirichlet(np.ones(d * d)))
        b = BellDiagonalState(d, rng.dirichlet(np.ones(d * d)))
        t = rng.random()
        mixed = states.entropy(a.mix(b, t))
        assert mixed >= t * states.entropy(a) + (1 - t) * states.entropy(b) - 1e-12


def test_rate_report():
    rep = RateReport(4, {"hashing": 1.0})
    rep.add("er", 1.5)
    assert rep.normalized() == {"hashing": 0.5, "er": 0.75}
    assert rep.hashing == 1.0 and rep.er_bound == 1.5
    with pytest.raises(ValueError):
        rep.add("bad", -0.1)


def test_factor_pmf_layout():
    s = BellDiagonalState(4, np.arange(16) / 120, factor=(2, 2))
    pmf = s.factor_pmf()
    assert pmf.shape == (2, 2, 2, 2)
    # k = 2 (digits 1,0), l = 3 (digits 1,1) -> index (1, 0, 1, 1)
    assert pmf[1, 0, 1, 1] == s.lam[2, 3]
    with pytest.raises(ValueError):
        BellDiagonalState(4, np.full(16, 1 / 16), factor=(3, 1))
