import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from btrank.data import cooccurrence_matrix, item_names, pair_dataset
from btrank.models import GammaPrior, Likelihood, ModelSpec, gradient, log_posterior, surrogate_value
from btrank.solvers import (
    AccelerationUnavailable,
    DivergenceSuspected,
    NonconvergentItem,
    SolverConfig,
    acc_gd_step,
    acc_mm_step,
    auto_eta,
    gd_step,
    mm_step,
    reference_optimum,
    rescale_map,
    solve,
    two_item_closed_form,
    unit_norm_step,
)

from _instances import FAMILIES, model_for, random_dataset, section_instance, two_item_dataset

BT = ModelSpec("bt")
PAIR = pair_dataset(("1", "2"), {(0, 1): 3, (1, 0): 1})


def round_robin(n, k=2):
    return pair_dataset(item_names(n), {(i, j): k for i in range(n) for j in range(n) if i != j})


# --- single steps ------------------------------------------------------------


def test_mm_step_examples():
    assert np.allclose(np.exp(mm_step(BT, PAIR, GammaPrior(), [0, 0])), [1.5, 0.5], rtol=1e-14)
    assert np.allclose(np.exp(mm_step(BT, PAIR, GammaPrior(2, 1), [0, 0])), [4 / 3, 2 / 3], rtol=1e-14)
    assert np.array_equal(mm_step(BT, round_robin(5), GammaPrior(), np.zeros(5)), np.zeros(5))


def test_mm_step_winless_item():
    ds = pair_dataset(("a", "b"), {(0, 1): 2})
    with pytest.raises(NonconvergentItem, match="b"):
        mm_step(BT, ds, GammaPrior(), [0, 0])
    # a prior pseudo-count fixes it
    assert np.isfinite(mm_step(BT, ds, GammaPrior(1.5, 0.5), [0, 0])).all()


def test_gd_step_examples():
    sym = two_item_dataset(6, 3)
    assert np.array_equal(gd_step(BT, sym, GammaPrior(), [0, 0], 0.3), [0, 0])
    rng = np.random.default_rng(0)
    for family in FAMILIES:
        ds = random_dataset(rng, family, 6)
        lik = Likelihood(model_for(family), ds)
        d = cooccurrence_matrix(ds).sum(axis=1).max()
        w1 = gd_step(model_for(family), ds, GammaPrior(), np.zeros(6), 2 / d)
        assert log_posterior(lik, GammaPrior(), w1) > log_posterior(lik, GammaPrior(), np.zeros(6))
    with pytest.raises(ValueError):
        gd_step(BT, PAIR, GammaPrior(), [0, 0], 0)


def test_rescale_map_examples():
    w = np.log(np.array([0.5, 1.5, 1.0]))
    assert np.allclose(rescale_map(w, GammaPrior(1.5, 0.5)), w, rtol=0, atol=1e-15)
    assert np.array_equal(rescale_map([0.0, 0.0], GammaPrior(2, 1)), [0.0, 0.0])
    v = rescale_map(np.random.default_rng(1).normal(size=5), GammaPrior(2, 0.5))
    assert abs(np.exp(v).sum() - 10) <= 1e-9


@pytest.mark.parametrize("prior", [GammaPrior(1, 0.5), GammaPrior(2, 0), GammaPrior()])
def test_acceleration_unavailable(prior):
    with pytest.raises(AccelerationUnavailable):
        rescale_map([0, 0], prior)
    with pytest.raises(AccelerationUnavailable):
        acc_mm_step(BT, PAIR, prior, [0, 0])
    with pytest.raises(AccelerationUnavailable):
        solve(BT, PAIR, prior, SolverConfig(algorithm="acc-gd"))


@given(st.sampled_from(FAMILIES), st.integers(2, 10), st.integers(0, 2**31))
def test_accelerated_steps_are_compositions(family, n, seed):
    rng = np.random.default_rng(seed)
    model, prior = model_for(family), GammaPrior(1 + rng.uniform(0.1, 2), rng.uniform(0.1, 2))
    ds = random_dataset(rng, family, n)
    w = rng.normal(size=n)
    assert np.array_equal(acc_mm_step(model, ds, prior, w), rescale_map(mm_step(model, ds, prior, w), prior))
    assert np.array_equal(acc_gd_step(model, ds, prior, w, 0.01), rescale_map(gd_step(model, ds, prior, w, 0.01), prior))


@given(st.sampled_from(FAMILIES), st.integers(2, 10), st.integers(0, 2**31))
def test_rescale_zeroes_gradient_sum_and_ascends(family, n, seed):
    rng = np.random.default_rng(seed)
    model, prior = model_for(family), GammaPrior(1 + rng.uniform(0.1, 2), rng.uniform(0.1, 2))
    ds = random_dataset(rng, family, n)
    lik = Likelihood(model, ds)
    w = rng.normal(0, 2, n)
    v = rescale_map(w, prior)
    assert abs(math.fsum(gradient(model, ds, prior, v))) <= 1e-8
    assert log_posterior(lik, prior, v) >= log_posterior(lik, prior, w) - 1e-12 * (1 + abs(log_posterior(lik, prior, w)))


def test_unit_norm_step():
    ds = section_instance(0)
    prior = GammaPrior.mode_one(1.0)
    w = np.random.default_rng(0).normal(size=10)
    v = unit_norm_step(BT, ds, prior, w)
    assert abs(np.exp(v).sum() - 1) <= 1e-9
    assert not np.allclose(v, acc_mm_step(BT, ds, prior, w))


# --- MM properties ---------------------------------------------------------


@given(st.sampled_from(FAMILIES), st.integers(2, 10), st.integers(0, 2**31), st.sampled_from([0.0, 0.1, 1.0]))
def test_mm_maximizes_minorant(family, n, seed, beta):
    rng = np.random.default_rng(seed)
    model, prior = model_for(family), GammaPrior(1 + beta, beta)
    ds = random_dataset(rng, family, n)
    lik = Likelihood(model, ds)
    w = rng.uniform(-1, 1, n)
    w1 = mm_step(model, ds, prior, w)
    top = surrogate_value(model, ds, prior, w1, w)
    assert log_posterior(lik, prior, w1) >= top - 1e-10
    for _ in range(10):
        cand = w1 + rng.normal(0, 0.3, n)
        assert surrogate_value(model, ds, prior, cand, w) <= top + 1e-9


@given(st.sampled_from(FAMILIES), st.integers(2, 12), st.integers(0, 2**31), st.sampled_from([0.0, 0.1, 1.0]))
def test_mm_ascent_property(family, n, seed, beta):
    rng = np.random.default_rng(seed)
    model = model_for(family)
    prior = GammaPrior(1 + beta, beta)
    ds = random_dataset(rng, family, n)
    for alg in ("mm", "acc-mm") if beta else ("mm",):
        res = solve(model, ds, prior, SolverConfig(algorithm=alg, record_trace=True, max_iters=200))
        values = [v for _, v, _ in res.trace]
        assert all(b >= a - 1e-10 for a, b in zip(values, values[1:]))


def test_acc_mm_mass_invariant():
    rng = np.random.default_rng(4)
    ds = random_dataset(rng, "plackett-luce", 9)
    prior = GammaPrior(3, 0.5)
    w = np.zeros(9)
    for _ in range(20):
        w = acc_mm_step(ModelSpec("plackett-luce"), ds, prior, w)
        assert abs(np.exp(w).sum() - 9 * 2 / 0.5) <= 1e-9 * 36


@pytest.mark.parametrize("family", FAMILIES)
def test_gd_and_mm_agree(family):
    rng = np.random.default_rng(7)
    model, prior = model_for(family), GammaPrior(1.5, 0.5)
    ds = random_dataset(rng, family, 8)
    mm = solve(model, ds, prior, SolverConfig(xi=1e-6))
    gd = solve(model, ds, prior, SolverConfig(algorithm="gd", xi=1e-6))
    assert mm.converged and gd.converged
    assert abs(mm.log_posterior - gd.log_posterior) <= 1e-6


def test_acc_mm_fixed_point_is_stationary():
    ds = section_instance(1)
    prior = GammaPrior(2, 0.1)
    res = solve(BT, ds, prior, SolverConfig(algorithm="acc-mm", xi=1e-10))
    assert np.max(np.abs(gradient(BT, ds, prior, res.w_hat))) <= 1e-6


# --- solve ------------------------------------------------------------------


def test_solve_symmetric_round_robin():
    res = solve(BT, round_robin(6), GammaPrior())
    assert res.iterations == 1 and res.converged and np.array_equal(res.w_hat, np.zeros(6))


def test_solve_two_item_rate():
    m, prior = 10, GammaPrior(1.5, 0.5)
    ds = two_item_dataset(m, 7)
    res = solve(BT, ds, prior, SolverConfig(record_trace=True, xi=1e-9), w0=[1.0, 0.0])
    _, best = reference_optimum(BT, ds, prior, SolverConfig(xi=1e-9), res)
    g = np.array([best - v for _, v, _ in res.trace])
    assert g[60] > 1e-8
    assert g[60] / g[59] == pytest.approx(1.1**-2, abs=1e-3)


def test_solve_beta_extremes_on_section_instance():
    ds = section_instance(0)
    slow = solve(BT, ds, GammaPrior(2, 1e-3)).iterations
    fast = solve(BT, ds, GammaPrior(2, 10)).iterations
    assert slow > fast


def test_solve_trace_and_notes():
    res = solve(BT, section_instance(0), GammaPrior(2, 0.1), SolverConfig(record_trace=True, max_iters=5))
    assert not res.converged and res.iterations == 5
    assert len(res.trace) == 6 and math.isnan(res.trace[0][2])
    assert any("max_iters" in note for note in res.status_notes)


def test_solve_rejects_bad_w0_and_config():
    with pytest.raises(ValueError):
        solve(BT, PAIR, GammaPrior(), w0=[0, 0, 0])
    with pytest.raises(ValueError):
        SolverConfig(xi=0)
    with pytest.raises(ValueError):
        SolverConfig(algorithm="newton")
    with pytest.raises(ValueError):
        SolverConfig(eta=-1)


def test_ml_without_strong_connectivity():
    disconnected = pair_dataset(tuple("abcd"), {(0, 1): 2, (1, 0): 1, (2, 3): 1, (3, 2): 1})
    with pytest.raises(DivergenceSuspected) as err:
        solve(BT, disconnected, GammaPrior())
    assert err.value.iteration == 0
    one_way = pair_dataset(("a", "b"), {(0, 1): 2})
    with pytest.raises(DivergenceSuspected):
        solve(BT, one_way, GammaPrior())
    # the prior makes the problem well posed
    assert solve(BT, disconnected, GammaPrior(2, 1)).converged


def test_overflow_guard():
    with pytest.raises(DivergenceSuspected) as err:
        solve(BT, PAIR, GammaPrior(), SolverConfig(algorithm="gd", eta=1e3))
    assert err.value.iteration >= 1


def test_auto_eta():
    eta = auto_eta(BT, PAIR, GammaPrior(2, 1), np.zeros(2))
    assert eta == pytest.approx(2 / (4 + 2 * math.e))
    ds = random_dataset(np.random.default_rng(0), "rao-kupper", 5)
    d = cooccurrence_matrix(ds).sum(axis=1).max()
    assert auto_eta(ModelSpec("rao-kupper"), ds, GammaPrior(), np.zeros(5)) == pytest.approx(1 / d)


# --- two-item oracle ---------------------------------------------------------


def test_two_item_fixed_point_and_rate():
    s0 = 2 * 0.5 / 0.5
    for t in range(5):
        assert two_item_closed_form(10, 1.5, 0.5, s0, t)[0] == pytest.approx(s0, rel=1e-15)
    assert two_item_closed_form(10, 1.5, 0.5, 1.0, 0)[2] == pytest.approx(0.826446, abs=1e-6)


def test_two_item_recursion_matches_mm():
    ds = two_item_dataset(12, 9)
    prior = GammaPrior(1.3, 0.7)
    w = np.array([0.4, -1.0])
    s0 = np.exp(w).sum()
    for t in range(1, 40):
        w = mm_step(BT, ds, prior, w)
        assert abs(two_item_closed_form(12, 1.3, 0.7, s0, t)[0] - np.exp(w).sum()) <= 1e-10


def test_two_item_gap_formula():
    m, a1, beta = 10, 0.5, 0.5
    ds = two_item_dataset(m, 7)
    prior = GammaPrior(1 + a1, beta)
    lik = Likelihood(BT, ds)
    w = mm_step(BT, ds, prior, [2.0, 0.0])  # ratio is optimal after one step
    s = np.exp(w).sum()
    w_star = np.log(np.array([7 + a1, 3 + a1]) / (m + 2 * a1) * 2 * a1 / beta)
    gap = log_posterior(lik, prior, w_star) - log_posterior(lik, prior, w)
    _, formula, _ = two_item_closed_form(m, 1 + a1, beta, s, 0)
    assert gap == pytest.approx(formula, rel=1e-9)


def test_two_item_invalid():
    with pytest.raises(ValueError):
        two_item_closed_form(10, 1.0, 0.5, 1.0, 3)
    with pytest.raises(ValueError):
        two_item_closed_form(0, 1.5, 0.5, 1.0, 3)
