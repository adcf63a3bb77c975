"""MM and gradient-ascent solvers, their rescaled (accelerated) variants, and the
closed-form two-item dynamics used as a rate oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse.csgraph import connected_components
import scipy.sparse as sp

from .data import ComparisonDataset, cooccurrence_matrix
from .models import GammaPrior, Likelihood, ModelSpec, log_posterior, prior_gradient

__all__ = [
    "ALGORITHMS",
    "SolverError",
    "NonconvergentItem",
    "DivergenceSuspected",
    "AccelerationUnavailable",
    "SolverConfig",
    "SolverResult",
    "mm_step",
    "gd_step",
    "rescale_map",
    "acc_mm_step",
    "acc_gd_step",
    "unit_norm_step",
    "auto_eta",
    "ford_condition",
    "solve",
    "reference_optimum",
    "two_item_closed_form",
]

ALGORITHMS = ("mm", "acc-mm", "gd", "acc-gd", "mm-unit-norm")
W_MAX = 50.0


class SolverError(RuntimeError):
    """Numerical failure inside an iteration; ``iteration`` is set by :func:`solve`."""

    iteration: Optional[int] = None


class NonconvergentItem(SolverError):
    def __init__(self, item: int, name: Optional[str] = None):
        self.item = item
        label = name if name is not None else str(item)
        super().__init__(f"item {label} has a zero MM numerator (no wins and alpha = 1)")


class DivergenceSuspected(SolverError):
    pass


class AccelerationUnavailable(ValueError):
    pass


def _name(lik: Likelihood, i: int) -> str:
    return lik.dataset.names[i]


def _guard(lik: Likelihood, w: np.ndarray, w_max: float) -> np.ndarray:
    if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > w_max:
        i = int(np.argmax(np.where(np.isfinite(w), np.abs(w), np.inf)))
        raise DivergenceSuspected(
            f"|w| exceeded {w_max} at item {_name(lik, i)} (w = {w[i]:.4g})"
        )
    return w


def _mm(lik: Likelihood, prior: GammaPrior, w: np.ndarray, w_max: float = W_MAX) -> np.ndarray:
    num = lik.win_counts + (prior.alpha - 1)
    zero = np.flatnonzero(num <= 0)
    if zero.size:
        raise NonconvergentItem(int(zero[0]), _name(lik, int(zero[0])))
    den = lik.mm_denominator(w) + prior.beta
    with np.errstate(divide="ignore"):
        theta = num / den
    return _guard(lik, np.log(theta), w_max)


def _gd(lik: Likelihood, prior: GammaPrior, w: np.ndarray, eta: float, w_max: float = W_MAX):
    g = lik.gradient(w) + prior_gradient(prior, w)
    return _guard(lik, w + eta * g, w_max)


def _check_acc(prior: GammaPrior):
    if not (prior.alpha > 1 and prior.beta > 0):
        raise AccelerationUnavailable(
            f"rescaling needs alpha > 1 and beta > 0 (got alpha={prior.alpha}, beta={prior.beta})"
        )


def rescale_map(w, prior: GammaPrior) -> np.ndarray:
    """Shift ``w`` so that ``sum(exp(w)) == n (alpha - 1) / beta``."""
    _check_acc(prior)
    w = np.asarray(w, dtype=float)
    c = math.log((prior.alpha - 1) * len(w) / prior.beta) - np.logaddexp.reduce(w)
    return w + c


def _unit(w: np.ndarray) -> np.ndarray:
    return w - np.logaddexp.reduce(w)


def mm_step(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, w) -> np.ndarray:
    """One MM update: the maximizer of the minorant built at ``w``."""
    return _mm(Likelihood(model, dataset), prior, np.asarray(w, dtype=float))


def gd_step(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, w, eta: float):
    """One gradient-ascent step on the log-posterior."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    return _gd(Likelihood(model, dataset), prior, np.asarray(w, dtype=float), eta)


def acc_mm_step(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, w):
    _check_acc(prior)
    return rescale_map(mm_step(model, dataset, prior, w), prior)


def acc_gd_step(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, w, eta: float):
    _check_acc(prior)
    return rescale_map(gd_step(model, dataset, prior, w, eta), prior)


def unit_norm_step(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, w):
    """MM update followed by normalization to ``sum(exp(w)) == 1``.

    Kept for comparison only: unlike :func:`acc_mm_step` it can decrease the
    log-posterior.
    """
    return _unit(mm_step(model, dataset, prior, w))


def _smoothness_multiplier(model: ModelSpec, dataset: ComparisonDataset) -> float:
    # Hessian of -loglik is dominated by kappa/4 * L_M
    if model.family == "rao-kupper":
        return 2.0
    if model.family == "plackett-luce":
        return float(max(dataset.max_set_size - 1, 1))
    return 1.0


def auto_eta(model: ModelSpec, dataset: ComparisonDataset, prior: GammaPrior, w0) -> float:
    """Conservative constant step ``2 / (kappa d(M) + 2 beta e^omega)``."""
    d = float(cooccurrence_matrix(dataset, sparse=True).sum(axis=1).max()) if dataset.n else 0.0
    omega = max(1.0, float(np.max(np.abs(w0))) if len(w0) else 0.0)
    denom = _smoothness_multiplier(model, dataset) * d + 2 * prior.beta * math.exp(omega)
    if denom <= 0:
        raise ValueError("cannot choose a step size for an empty dataset with beta = 0")
    return 2.0 / denom


def ford_condition(lik: Likelihood) -> bool:
    """True when the directed 'beat' graph is strongly connected, i.e. the
    maximum-likelihood estimate exists and is unique up to a shift."""
    n = lik.n
    if n <= 1:
        return True
    winners = np.repeat(lik.winners, lik.sizes)
    mask = lik.members != winners
    g = sp.coo_matrix(
        (np.ones(int(mask.sum())), (winners[mask], lik.members[mask])), shape=(n, n)
    ).tocsr()
    ncomp, _ = connected_components(g, directed=True, connection="strong")
    return ncomp == 1


@dataclass
class SolverConfig:
    algorithm: str = "mm"
    xi: float = 1e-4
    max_iters: int = 100_000
    eta: Optional[float] = None  # None selects auto_eta
    record_trace: bool = False
    w_max: float = W_MAX

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")


@dataclass
class SolverResult:
    w_hat: np.ndarray
    iterations: int
    converged: bool
    log_posterior: float
    algorithm: str
    eta: Optional[float] = None
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    status_notes: list[str] = field(default_factory=list)


def make_step(
    lik: Likelihood, prior: GammaPrior, config: SolverConfig, eta: Optional[float]
) -> Callable[[np.ndarray], np.ndarray]:
    alg, w_max = config.algorithm, config.w_max
    if alg in ("acc-mm", "acc-gd"):
        _check_acc(prior)
    if alg == "mm":
        return lambda w: _mm(lik, prior, w, w_max)
    if alg == "acc-mm":
        return lambda w: rescale_map(_mm(lik, prior, w, w_max), prior)
    if alg == "mm-unit-norm":
        return lambda w: _unit(_mm(lik, prior, w, w_max))
    if alg == "gd":
        return lambda w: _gd(lik, prior, w, eta, w_max)
    return lambda w: rescale_map(_gd(lik, prior, w, eta, w_max), prior)


def solve(
    model: ModelSpec,
    dataset: ComparisonDataset,
    prior: GammaPrior,
    config: Optional[SolverConfig] = None,
    w0=None,
) -> SolverResult:
    """Iterate until ``max|w(t) - w(t-1)| <= xi`` or ``max_iters`` steps.

    Step failures are re-raised with ``iteration`` set. Hitting ``max_iters`` is
    reported through ``converged=False``.
    """
    config = config or SolverConfig()
    lik = Likelihood(model, dataset)
    w = np.zeros(lik.n) if w0 is None else np.array(w0, dtype=float)
    if w.shape != (lik.n,):
        raise ValueError(f"w0 has shape {w.shape}, expected ({lik.n},)")
    notes: list[str] = []
    if config.algorithm in ("acc-mm", "acc-gd"):
        _check_acc(prior)
    if prior.beta == 0 and not ford_condition(lik):
        err = DivergenceSuspected(
            "maximum-likelihood estimate does not exist: the comparison digraph is not "
            "strongly connected"
        )
        err.iteration = 0
        raise err

    eta = None
    if config.algorithm in ("gd", "acc-gd"):
        eta = config.eta if config.eta is not None else auto_eta(model, dataset, prior, w)
        notes.append(f"eta={eta:.6g}")
    step = make_step(lik, prior, config, eta)

    trace: list[tuple[int, float, float]] = []
    if config.record_trace:
        trace.append((0, log_posterior(lik, prior, w), math.nan))
    converged = False
    t = 0
    for t in range(1, config.max_iters + 1):
        try:
            w_new = step(w)
        except SolverError as err:
            err.iteration = t
            raise
        diff = float(np.max(np.abs(w_new - w))) if lik.n else 0.0
        w = w_new
        if config.record_trace:
            trace.append((t, log_posterior(lik, prior, w), diff))
        if diff <= config.xi:
            converged = True
            break
    if not converged:
        notes.append(f"max_iters={config.max_iters} reached")
    return SolverResult(
        w_hat=w,
        iterations=t,
        converged=converged,
        log_posterior=log_posterior(lik, prior, w),
        algorithm=config.algorithm,
        eta=eta,
        trace=trace,
        status_notes=notes,
    )


def reference_optimum(
    model: ModelSpec,
    dataset: ComparisonDataset,
    prior: GammaPrior,
    config: SolverConfig,
    result: SolverResult,
) -> tuple[np.ndarray, float]:
    """Long-run estimate of the optimum: keep iterating from ``result`` for ten
    times its horizon at a hundredth of its tolerance; the best value seen wins."""
    long = SolverConfig(
        algorithm=config.algorithm,
        xi=config.xi / 100,
        max_iters=max(10 * result.iterations, 10),
        eta=result.eta if result.eta is not None else config.eta,
        record_trace=False,
        w_max=config.w_max,
    )
    ref = solve(model, dataset, prior, long, w0=result.w_hat)
    best = max(ref.log_posterior, result.log_posterior)
    if result.trace:
        best = max(best, max(v for _, v, _ in result.trace))
    return ref.w_hat, best


def two_item_closed_form(m: int, alpha: float, beta: float, s0: float, t: int):
    """Total mass, optimality gap and limit rate of MM on two items compared ``m`` times.

    The mass ``s = exp(w1) + exp(w2)`` follows
    ``s <- (m + 2(alpha-1)) s / (m + beta s)``; once the ratio of the two scores is
    optimal (after the first MM step) the log-posterior gap is
    ``2(alpha-1)(a - log(1 + a))`` with ``s = 2(alpha-1)/beta * (1 + a)``.
    Returns ``(s_t, gap_t, limit_rate)``.
    """
    if m < 1 or not alpha > 1 or not beta > 0 or not s0 > 0 or t < 0:
        raise ValueError("need m >= 1, alpha > 1, beta > 0, s0 > 0, t >= 0")
    a1 = alpha - 1
    s = float(s0)
    for _ in range(t):
        s = (m + 2 * a1) * s / (m + beta * s)
    a = s * beta / (2 * a1) - 1
    gap = 2 * a1 * (a - math.log1p(a))
    rate = (1 + 2 * a1 / m) ** -2
    return s, gap, rate
