import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affineproj.affine import BernoulliWeights, SelfAffineIFS, svf, word_matrix
from affineproj.errors import BudgetExceeded, ConfigError, NotStrictlyPositive
from affineproj.spectral import (affinity_dimension, affinity_dimension_report, block_bernoulli,
                                 cone_constant, cone_ratios, lyapunov_dimension, lyapunov_exponents,
                                 pressure, sample_word_pairs, shannon_entropy, word_products)
from systems import CLOSED_FORM_DIM, SYM, diagonal_pair, eigenline_pair, generic_pair, symmetric_pair


def test_pressure_commuting_closed_form():
    est = pressure(symmetric_pair(), 1.0, 5)
    assert est.value == pytest.approx(math.log(2) + math.log(0.4), abs=1e-12)
    assert est.lower_bound <= est.value <= est.upper_bound


def test_pressure_at_zero_is_log_k():
    for ifs in (symmetric_pair(), generic_pair(), diagonal_pair()):
        assert pressure(ifs, 0.0, 3).value == pytest.approx(math.log(ifs.k), abs=1e-12)


def test_pressure_monotone_in_s():
    ifs = symmetric_pair()
    assert pressure(ifs, 1.5, 6).value < pressure(ifs, 0.5, 6).value


def test_pressure_bounds_bracket_limit():
    ifs = generic_pair()
    coarse, fine = pressure(ifs, 1.0, 4), pressure(ifs, 1.0, 12)
    assert coarse.lower_bound <= fine.value <= coarse.upper_bound + 1e-12
    assert fine.upper_bound - fine.lower_bound < coarse.upper_bound - coarse.lower_bound


def test_pressure_lower_bound_needs_positivity():
    assert pressure(diagonal_pair(), 1.0, 3).lower_bound == -math.inf


def test_pressure_enumeration_matches_direct_sum():
    ifs = generic_pair()
    direct = sum(svf(word_matrix(ifs, w), 1.3) for w in np.ndindex(2, 2, 2, 2))
    assert pressure(ifs, 1.3, 4).value == pytest.approx(math.log(direct) / 4, abs=1e-12)


def test_word_products_order():
    ifs = generic_pair()
    P = word_products(ifs, 3)
    assert np.allclose(P[0b011], ifs.linear[0] @ ifs.linear[1] @ ifs.linear[1])


def test_budget(monkeypatch):
    ifs = symmetric_pair()
    with pytest.raises(BudgetExceeded):
        pressure(ifs, 1.0, 10, budget=100)
    monkeypatch.setenv("AFFINEPROJ_BUDGET", "8")
    pressure(ifs, 1.0, 3)
    with pytest.raises(BudgetExceeded):
        pressure(ifs, 1.0, 4)
    monkeypatch.setenv("AFFINEPROJ_BUDGET", "lots")
    with pytest.raises(ConfigError):
        pressure(ifs, 1.0, 2)


def test_affinity_dimension_examples():
    assert affinity_dimension(symmetric_pair()) == pytest.approx(CLOSED_FORM_DIM, abs=1e-3)
    assert affinity_dimension(SelfAffineIFS.from_arrays([SYM])) == 0.0
    halves = SelfAffineIFS.from_arrays([0.5 * np.eye(2)] * 4)
    assert affinity_dimension(halves) == pytest.approx(2.0, abs=1e-3)


def test_affinity_dimension_root_of_pressure():
    ifs = generic_pair()
    rep = affinity_dimension_report(ifs, n=10)
    assert abs(pressure(ifs, rep.value, 10).value) < 1e-8
    assert rep.lower <= rep.value


def test_affinity_dimension_clamped():
    rep = affinity_dimension_report(SelfAffineIFS.from_arrays([0.5 * np.eye(2)] * 8))
    assert rep.clamped and rep.value == 2.0
    assert rep.raw == pytest.approx(3.0, abs=1e-6)
    assert "exceeds 2" in rep.note


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(*[st.floats(0.02, 0.45)] * 4), min_size=1, max_size=4))
def test_bisection_bracket(mats):
    ifs = SelfAffineIFS.from_arrays([np.array(m).reshape(2, 2) for m in mats])
    assert pressure(ifs, 0.0, 3).value == pytest.approx(math.log(ifs.k))
    assert pressure(ifs, 4.0, 3).value < 0


def test_lyapunov_symmetric_exact():
    rep = lyapunov_exponents(symmetric_pair(), n_steps=500, n_samples=20)
    assert abs(rep.lambda1 - math.log(0.4)) <= 3 * rep.std_err[0] + 1e-12
    assert abs(rep.lambda2 - math.log(0.2)) <= 3 * rep.std_err[1] + 1e-12
    assert rep.dim_L == pytest.approx(CLOSED_FORM_DIM, abs=1e-2)
    assert rep.entropy == pytest.approx(math.log(2))


def test_lyapunov_diagonal_closed_form():
    rep = lyapunov_exponents(diagonal_pair(), n_steps=1000, n_samples=100, seed=1)
    target = -(math.log(2) + math.log(3)) / 2
    assert abs(rep.lambda1 - target) <= 3 * rep.std_err[0]
    assert abs(rep.lambda2 - target) <= 3 * rep.std_err[1]
    assert rep.lambda1 >= rep.lambda2 - 3 * max(rep.std_err)


def test_lyapunov_coverage_commuting():
    ifs = diagonal_pair()
    target = -(math.log(2) + math.log(3)) / 2
    hits = 0
    for seed in range(100):
        rep = lyapunov_exponents(ifs, n_steps=100, n_samples=10, seed=seed)
        hits += abs(rep.lambda1 - target) <= 3 * rep.std_err[0]
    assert hits >= 95


def test_lyapunov_workers_reproducible():
    ifs, w = eigenline_pair()
    a = lyapunov_exponents(ifs, w, n_steps=200, n_samples=40, seed=3, workers=4)
    b = lyapunov_exponents(ifs, w, n_steps=200, n_samples=40, seed=3, workers=4)
    c = lyapunov_exponents(ifs, w, n_steps=200, n_samples=40, seed=3, workers=1)
    assert a == b
    assert abs(a.lambda1 - c.lambda1) < 5 * (a.std_err[0] + c.std_err[0])


def test_lyapunov_rejects_short_runs():
    with pytest.raises(ValueError):
        lyapunov_exponents(symmetric_pair(), n_steps=99)


def test_lyapunov_dimension_branches_and_clamp():
    assert lyapunov_dimension(math.log(2), math.log(0.4), math.log(0.2)) == pytest.approx(CLOSED_FORM_DIM)
    assert lyapunov_dimension(math.log(4), -math.log(2), -math.log(2)) == pytest.approx(2.0)
    big = lyapunov_exponents(SelfAffineIFS.from_arrays([0.5 * np.eye(2)] * 8), n_steps=100, n_samples=2)
    assert big.clamped and big.dim_L == 2.0 and big.dim_L_raw == pytest.approx(3.0)


def test_shannon_entropy():
    assert shannon_entropy(BernoulliWeights((0.5, 0.5))) == pytest.approx(0.693147, abs=1e-6)
    assert shannon_entropy(BernoulliWeights((1.0,))) == 0.0
    assert shannon_entropy(BernoulliWeights.uniform(4)) == pytest.approx(math.log(4))


def test_block_bernoulli_examples():
    ifs = symmetric_pair()
    b1, b2 = block_bernoulli(ifs, 1), block_bernoulli(ifs, 2)
    assert b1.s_N == pytest.approx(CLOSED_FORM_DIM, abs=1e-10)
    assert np.allclose(b1.weights, 0.5)
    assert b2.s_N == pytest.approx(b1.s_N, abs=1e-10)
    assert np.allclose(b2.weights, 0.25)


def test_block_bernoulli_weights():
    ifs = generic_pair()
    for N in (1, 2, 3):
        b = block_bernoulli(ifs, N, tol=1e-10)
        assert abs(b.weights.sum() - 1) < 1e-9
        for w, p in zip(b.words, b.weights):
            assert p == pytest.approx(svf(word_matrix(ifs, w), b.s_N), abs=1e-10)
        lower = affinity_dimension_report(ifs, n=N).lower
        assert b.s_N >= lower - 1e-10


def test_block_bernoulli_as_bernoulli():
    ifs = generic_pair()
    blocks, weights = block_bernoulli(ifs, 2).as_bernoulli(ifs)
    assert blocks.k == 4
    assert np.allclose(blocks.linear[1], ifs.linear[0] @ ifs.linear[1])
    assert math.fsum(weights.p) == pytest.approx(1.0, abs=1e-12)


def test_cone_constant_commuting_is_one():
    assert cone_constant(symmetric_pair()) == pytest.approx(1.0, abs=1e-10)


def test_cone_ratios_submultiplicative_and_running_max():
    ifs = generic_pair()
    assert np.all(cone_ratios(ifs, 8, 500, seed=2) >= 1 - 1e-12)
    values = [cone_constant(ifs, n_pairs=n, seed=2) for n in (10, 100, 1000)]
    assert values == sorted(values) and values[0] >= 1


def test_cone_constant_needs_positivity():
    with pytest.raises(NotStrictlyPositive):
        cone_constant(diagonal_pair())


def test_cone_sandwich():
    ifs = generic_pair()
    c = cone_constant(ifs, n_max=8, n_pairs=1000, seed=4)
    la, sa, lb, sb = sample_word_pairs(ifs, 8, 1000, seed=4)
    for j in range(1000):
        Aa = word_matrix(ifs, sa[j, :la[j]])
        Ab = word_matrix(ifs, sb[j, :lb[j]])
        for s in (0.5, 1.5):
            lhs = svf(Aa, s) * svf(Ab, s)
            assert svf(Aa @ Ab, s) <= lhs * (1 + 1e-12)
            assert lhs <= c ** (1 + 1e-6) * svf(Aa @ Ab, s)
