"""Likelihoods, Gamma prior, gradients and MM minorants for generalized Bradley-Terry models.

Every supported model is compiled into weighted *choice events*: an event lists
its members (winner first) with fixed log-weight offsets, and contributes

    count * (w[winner] - log(sum_j exp(w[j] + offset[j])))

to the log-likelihood. Paired comparisons are events of size two, a Luce choice
is one event, a Plackett-Luce ranking of length k is k - 1 events (one per
finishing position), and a Rao-Kupper comparison carries offset ``log(theta)``
on the non-winning member.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ComparisonDataset, Kind

__all__ = [
    "FAMILIES",
    "ModelSpec",
    "GammaPrior",
    "ObjectiveEval",
    "Likelihood",
    "log_likelihood",
    "prior_log_density",
    "prior_gradient",
    "gradient",
    "log_posterior",
    "evaluate",
    "outcome_probability",
    "surrogate_value",
]

FAMILIES = ("bt", "rao-kupper", "luce", "plackett-luce")

_COMPATIBLE = {
    "bt": {Kind.PAIR_WINS},
    "rao-kupper": {Kind.PAIR_WINS, Kind.PAIR_WINS_TIES},
    "luce": {Kind.CHOICES, Kind.PAIR_WINS},
    "plackett-luce": {Kind.RANKINGS, Kind.PAIR_WINS},
}


@dataclass(frozen=True)
class ModelSpec:
    family: str = "bt"
    rk_theta: float = 1.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "rao-kupper" and not self.rk_theta >= 1:
            raise ValueError("rk_theta must be >= 1")


@dataclass(frozen=True)
class GammaPrior:
    """Independent Gamma(alpha, beta) prior on each ``exp(w_i)``.

    ``alpha=1, beta=0`` makes the posterior equal to the likelihood.
    """

    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ValueError("alpha must be >= 1")
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")

    @property
    def is_ml(self) -> bool:
        return self.alpha == 1 and self.beta == 0

    @classmethod
    def mode_one(cls, beta: float) -> "GammaPrior":
        """Prior with ``alpha - 1 = beta`` (marginal mode fixed at 1)."""
        return cls(1.0 + beta, beta)


@dataclass(frozen=True)
class ObjectiveEval:
    log_likelihood: float
    log_prior: float
    log_posterior: float
    gradient: np.ndarray


class ModelMismatch(ValueError):
    pass


class Likelihood:
    """A (model, dataset) pair compiled to flat event arrays."""

    def __init__(self, model: ModelSpec, dataset: ComparisonDataset):
        if dataset.kind not in _COMPATIBLE[model.family]:
            raise ModelMismatch(
                f"model {model.family!r} cannot be fitted to {dataset.kind.value} data"
            )
        self.model = model
        self.dataset = dataset
        self.n = dataset.n
        events: list[tuple[Sequence[int], Sequence[float], int]] = []
        self.const = 0.0

        if model.family == "rao-kupper":
            lt = math.log(model.rk_theta)
            dbar: dict = dict(dataset.pair_wins)
            for (i, j), t in dataset.tie_counts.items():
                dbar[(i, j)] = dbar.get((i, j), 0) + t
                dbar[(j, i)] = dbar.get((j, i), 0) + t
            events = [((i, j), (0.0, lt), c) for (i, j), c in dbar.items()]
            ties = sum(dataset.tie_counts.values())
            if ties:
                tie_term = model.rk_theta**2 - 1
                self.const = ties * math.log(tie_term) if tie_term > 0 else -math.inf
        elif dataset.kind is Kind.PAIR_WINS:
            events = [((i, j), (0.0, 0.0), c) for (i, j), c in dataset.pair_wins.items()]
        elif dataset.kind is Kind.CHOICES:
            for w, members, c in dataset.choice_obs:
                order = (w,) + tuple(i for i in members if i != w)
                events.append((order, (0.0,) * len(order), c))
        else:
            for order, c in dataset.ranking_obs:
                for r in range(len(order) - 1):
                    tail = order[r:]
                    events.append((tail, (0.0,) * len(tail), c))

        self.num_events = len(events)
        sizes = np.array([len(e[0]) for e in events], dtype=np.intp)
        self.members = np.array([i for e in events for i in e[0]], dtype=np.intp)
        self.offsets = np.array([o for e in events for o in e[1]], dtype=float)
        self.counts = np.array([e[2] for e in events], dtype=float)
        self.ptr = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.intp) if events else np.zeros(0, np.intp)
        self.sizes = sizes
        self.winners = self.members[self.ptr] if events else np.zeros(0, np.intp)
        self.member_counts = np.repeat(self.counts, sizes)
        self.event_of_member = np.repeat(np.arange(self.num_events), sizes)
        # times each item is the chosen member; the MM numerator without prior
        self.win_counts = np.bincount(self.winners, weights=self.counts, minlength=self.n)

    def _check(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n,):
            raise ValueError(f"parameter vector has shape {w.shape}, expected ({self.n},)")
        return w

    def event_lse(self, w: np.ndarray) -> np.ndarray:
        """``log(sum_j exp(w_j + offset_j))`` for every event."""
        if not self.num_events:
            return np.zeros(0)
        z = w[self.members] + self.offsets
        mx = np.maximum.reduceat(z, self.ptr)
        s = np.add.reduceat(np.exp(z - mx[self.event_of_member]), self.ptr)
        return mx + np.log(s)

    def log_likelihood(self, w) -> float:
        w = self._check(w)
        if not self.num_events:
            return self.const
        terms = self.counts * (w[self.winners] - self.event_lse(w))
        return math.fsum(terms) + self.const

    def gradient(self, w) -> np.ndarray:
        w = self._check(w)
        if not self.num_events:
            return np.zeros(self.n)
        lse = self.event_lse(w)
        z = w[self.members] + self.offsets
        p = np.exp(z - lse[self.event_of_member])
        return self.win_counts - np.bincount(self.members, weights=self.member_counts * p, minlength=self.n)

    def mm_denominator(self, w) -> np.ndarray:
        """Sum over events of ``count * exp(offset_i) / sum_j exp(w_j + offset_j)``."""
        if not self.num_events:
            return np.zeros(self.n)
        lse = self.event_lse(w)
        contrib = self.member_counts * np.exp(self.offsets - lse[self.event_of_member])
        return np.bincount(self.members, weights=contrib, minlength=self.n)

    def surrogate(self, x, y) -> float:
        """Minorant of the log-likelihood at ``x`` built around ``y``."""
        x, y = self._check(x), self._check(y)
        if not self.num_events:
            return self.const
        lx, ly = self.event_lse(x), self.event_lse(y)
        # x_win - ratio - log S(y) + 1, with ratio - 1 taken via expm1
        terms = self.counts * ((x[self.winners] - ly) - np.expm1(lx - ly))
        return math.fsum(terms) + self.const

    def event_log_probs(self, w) -> np.ndarray:
        """Per-event log-probability (without counts)."""
        w = self._check(w)
        return w[self.winners] - self.event_lse(w)


def prior_log_density(prior: GammaPrior, w) -> float:
    w = np.asarray(w, dtype=float)
    if prior.is_ml:
        return 0.0
    return math.fsum((prior.alpha - 1) * w - prior.beta * np.exp(w))


def prior_gradient(prior: GammaPrior, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return (prior.alpha - 1) - prior.beta * np.exp(w)


def log_likelihood(model: ModelSpec, dataset: ComparisonDataset, w) -> float:
    return Likelihood(model, dataset).log_likelihood(w)


def gradient(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, w) -> np.ndarray:
    """Gradient of the log-posterior."""
    return Likelihood(model, dataset).gradient(w) + prior_gradient(prior, w)


def log_posterior(lik: Likelihood, prior: GammaPrior, w) -> float:
    return lik.log_likelihood(w) + prior_log_density(prior, w)


def evaluate(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, w) -> ObjectiveEval:
    lik = Likelihood(model, dataset)
    ll = lik.log_likelihood(w)
    lp = prior_log_density(prior, w)
    return ObjectiveEval(ll, lp, ll + lp, lik.gradient(w) + prior_gradient(prior, w))


def surrogate_value(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    return Likelihood(model, dataset).surrogate(x, y) + prior_log_density(prior, x)


def outcome_probability(model: ModelSpec, w, items: Sequence[int], tie: bool = False) -> float:
    """Probability of one outcome.

    ``items`` is ``(i, j)`` for a paired comparison (``i`` beats ``j``, or ties
    with it when ``tie`` is set), ``(winner, *others)`` for a Luce choice from
    ``set(items)``, and a finishing order for Plackett-Luce.
    """
    w = np.asarray(w, dtype=float)
    items = tuple(int(i) for i in items)
    if len(set(items)) != len(items) or any(not 0 <= i < len(w) for i in items):
        raise ValueError(f"invalid outcome items {items}")
    fam = model.family
    if tie and fam != "rao-kupper":
        raise ValueError("only the Rao-Kupper model has tie outcomes")
    if fam in ("bt", "rao-kupper") and len(items) != 2:
        raise ValueError("paired-comparison outcomes need exactly two items")
    if len(items) < 2:
        raise ValueError("outcomes need at least two items")

    if fam == "rao-kupper":
        i, j = items
        lt = math.log(model.rk_theta)
        if tie:
            if model.rk_theta == 1:
                return 0.0
            log_p = (
                math.log(model.rk_theta**2 - 1)
                + w[i]
                + w[j]
                - np.logaddexp(w[i], lt + w[j])
                - np.logaddexp(lt + w[i], w[j])
            )
            return float(np.exp(log_p))
        return float(np.exp(w[i] - np.logaddexp(w[i], lt + w[j])))
    if fam == "plackett-luce":
        z = w[list(items)]
        log_p = sum(z[r] - np.logaddexp.reduce(z[r:]) for r in range(len(z) - 1))
        return float(np.exp(log_p))
    z = w[list(items)]
    return float(np.exp(z[0] - np.logaddexp.reduce(z)))
