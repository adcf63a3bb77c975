import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from btrank.data import cooccurrence_matrix, pair_dataset, ranking_dataset
from btrank.models import (
    GammaPrior,
    Likelihood,
    ModelMismatch,
    ModelSpec,
    evaluate,
    gradient,
    log_likelihood,
    log_posterior,
    outcome_probability,
    prior_log_density,
    surrogate_value,
)

from _instances import FAMILIES, model_for, random_dataset

BT = ModelSpec("bt")
PAIR = pair_dataset(("1", "2"), {(0, 1): 3, (1, 0): 1})


def test_log_likelihood_examples():
    ds = pair_dataset(("1", "2"), {(0, 1): 1})
    assert log_likelihood(BT, ds, [0, 0]) == pytest.approx(-0.693147, abs=1e-6)
    expected = 3 * math.log(3 / 4) + math.log(1 / 4)
    assert log_likelihood(BT, PAIR, [math.log(3), 0]) == pytest.approx(expected, rel=1e-14)
    pl = ranking_dataset("xyz", [(0, 1, 2)])
    assert log_likelihood(ModelSpec("plackett-luce"), pl, np.zeros(3)) == pytest.approx(math.log(1 / 3) + math.log(1 / 2))


def test_prior_examples():
    assert prior_log_density(GammaPrior(), [3.0, -7.0]) == 0
    assert prior_log_density(GammaPrior(2, 1), [0, 0]) == -2
    assert prior_log_density(GammaPrior(2, 1), [math.log(1), math.log(1)]) == -2


def test_prior_validation():
    with pytest.raises(ValueError):
        GammaPrior(0.5, 1)
    with pytest.raises(ValueError):
        GammaPrior(2, -1)
    assert GammaPrior.mode_one(0.3) == GammaPrior(1.3, 0.3)


def test_gradient_examples():
    sym = pair_dataset(("1", "2"), {(0, 1): 4, (1, 0): 4})
    assert np.array_equal(gradient(BT, sym, GammaPrior(), [0, 0]), [0, 0])
    ev = evaluate(BT, PAIR, GammaPrior(2, 1), [0.3, -0.2])
    assert ev.log_posterior == ev.log_likelihood + ev.log_prior


@pytest.mark.parametrize("family", FAMILIES)
def test_ml_gradient_sums_to_zero(family):
    rng = np.random.default_rng(1)
    ds = random_dataset(rng, family, 7)
    g = gradient(model_for(family), ds, GammaPrior(), rng.normal(0, 2, 7))
    assert abs(math.fsum(g)) <= 1e-10


@given(st.sampled_from(FAMILIES), st.integers(2, 8), st.integers(0, 2**31), st.floats(-20, 20))
def test_shift_invariance(family, n, seed, c):
    rng = np.random.default_rng(seed)
    lik = Likelihood(model_for(family), random_dataset(rng, family, n))
    w = rng.uniform(-2, 2, n)
    assert lik.log_likelihood(w + c) == pytest.approx(lik.log_likelihood(w), rel=1e-12, abs=1e-10)
    assert np.allclose(lik.gradient(w + c), lik.gradient(w), rtol=1e-9, atol=1e-9)


def test_outcome_probability_examples():
    assert outcome_probability(BT, [0.4, 0.4], (0, 1)) == 0.5
    assert outcome_probability(BT, [math.log(2), 0], (0, 1)) == pytest.approx(2 / 3)
    rk1 = ModelSpec("rao-kupper", 1.0)
    assert outcome_probability(rk1, [1.0, -2.0], (0, 1), tie=True) == 0.0


def test_outcome_probability_errors():
    with pytest.raises(ValueError):
        outcome_probability(BT, [0, 0, 0], (0, 1, 2))
    with pytest.raises(ValueError):
        outcome_probability(BT, [0, 0], (0, 1), tie=True)
    with pytest.raises(ValueError):
        outcome_probability(ModelSpec("luce"), [0, 0], (0, 0))


@given(st.integers(2, 5), st.integers(0, 2**31), st.floats(1.0, 4.0))
def test_probabilities_normalize(k, seed, theta):
    w = np.random.default_rng(seed).uniform(-3, 3, 6)
    items = tuple(range(k))
    if k == 2:
        total = outcome_probability(BT, w, (0, 1)) + outcome_probability(BT, w, (1, 0))
        assert total == pytest.approx(1, abs=1e-10)
        rk = ModelSpec("rao-kupper", theta)
        total = sum(outcome_probability(rk, w, o) for o in ((0, 1), (1, 0))) + outcome_probability(rk, w, (0, 1), tie=True)
        assert total == pytest.approx(1, abs=1e-10)
    luce = sum(outcome_probability(ModelSpec("luce"), w, (i,) + tuple(j for j in items if j != i)) for i in items)
    assert luce == pytest.approx(1, abs=1e-10)
    pl = sum(outcome_probability(ModelSpec("plackett-luce"), w, p) for p in itertools.permutations(items))
    assert pl == pytest.approx(1, abs=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
def test_likelihood_matches_probabilities(family):
    rng = np.random.default_rng(3)
    model = model_for(family)
    ds = random_dataset(rng, family, 5, n_obs=6)
    w = rng.normal(size=5)
    total = 0.0
    for (i, j), c in ds.pair_wins.items():
        total += c * math.log(outcome_probability(model, w, (i, j)))
    for (i, j), c in ds.tie_counts.items():
        total += c * math.log(outcome_probability(model, w, (i, j), tie=True))
    for win, members, c in ds.choice_obs:
        total += c * math.log(outcome_probability(model, w, (win,) + tuple(m for m in members if m != win)))
    for order, c in ds.ranking_obs:
        total += c * math.log(outcome_probability(model, w, order))
    assert log_likelihood(model, ds, w) == pytest.approx(total, rel=1e-12)


@given(st.sampled_from(FAMILIES), st.integers(2, 8), st.integers(0, 2**31), st.sampled_from([0.0, 0.5, 3.0]))
def test_minorization(family, n, seed, beta):
    rng = np.random.default_rng(seed)
    model = model_for(family)
    ds = random_dataset(rng, family, n)
    prior = GammaPrior(1 + beta, beta)
    lik = Likelihood(model, ds)
    x, y = rng.uniform(-3, 3, n), rng.uniform(-3, 3, n)
    assert surrogate_value(model, ds, prior, x, y) <= log_posterior(lik, prior, x) + 1e-12
    assert surrogate_value(model, ds, prior, x, x) == pytest.approx(log_posterior(lik, prior, x), abs=1e-12)


@given(st.integers(2, 8), st.integers(0, 2**31), st.floats(0.1, 1.5))
def test_bt_surrogate_gap_bound(n, seed, omega):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, "bt", n)
    lik = Likelihood(BT, ds)
    d = cooccurrence_matrix(ds).sum(axis=1).max()
    delta = 0.5 * math.exp(2 * omega) * d
    x, y = rng.uniform(-omega, omega, n), rng.uniform(-omega, omega, n)
    assert lik.log_likelihood(x) - lik.surrogate(x, y) <= delta / 2 * np.sum((x - y) ** 2) + 1e-9


def test_surrogate_dimension_mismatch():
    with pytest.raises(ValueError):
        surrogate_value(BT, PAIR, GammaPrior(), [0, 0], [0, 0, 0])


def test_rao_kupper_unit_theta_is_bt():
    rng = np.random.default_rng(2)
    ds = random_dataset(rng, "bt", 6)
    w = rng.normal(size=6)
    assert log_likelihood(ModelSpec("rao-kupper", 1.0), ds, w) == log_likelihood(BT, ds, w)


def test_rao_kupper_unit_theta_with_ties():
    ds = pair_dataset(("a", "b"), {(0, 1): 1}, {(0, 1): 1})
    assert log_likelihood(ModelSpec("rao-kupper", 1.0), ds, [0, 0]) == -math.inf


def test_model_mismatch():
    ties = pair_dataset(("a", "b"), {(0, 1): 1}, {(0, 1): 1})
    with pytest.raises(ModelMismatch):
        Likelihood(BT, ties)
    with pytest.raises(ModelMismatch):
        Likelihood(ModelSpec("rao-kupper"), ranking_dataset("ab", [(0, 1)]))
    with pytest.raises(ValueError):
        ModelSpec("rao-kupper", 0.5)
    with pytest.raises(ValueError):
        ModelSpec("thurstone")


def test_large_scores_stay_finite():
    w = np.array([700.0, -700.0])
    assert math.isfinite(log_likelihood(BT, PAIR, w))
    assert np.isfinite(gradient(BT, PAIR, GammaPrior(), w)).all()
