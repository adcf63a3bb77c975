"""Laplacian diagnostics of a comparison design and the convergence-rate bounds
they imply for GD, MM and their rescaled variants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path

from .models import GammaPrior, ModelSpec

__all__ = [
    "LaplacianSummary",
    "Constants",
    "BoundReport",
    "laplacian",
    "laplacian_summary",
    "fiedler_value",
    "convexity_constants",
    "improvement_factors",
    "predicted_iterations",
    "uniform_bound",
    "bound_report",
]


@dataclass(frozen=True)
class LaplacianSummary:
    n: int
    d_M: float
    a_M: float
    lambda_n: float
    connected: bool
    diameter: Optional[int]
    r: Optional[float]
    max_degree: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Constants:
    """Strong-convexity, smoothness and surrogate-gap constants on ``[-omega, omega]^n``."""

    gamma: float
    mu: float
    delta: float


def laplacian(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return np.diag(M.sum(axis=1)) - M


def _validate(M: np.ndarray):
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("co-occurrence matrix must be square")
    if not np.array_equal(M, M.T):
        raise ValueError("co-occurrence matrix must be symmetric")
    if np.any(M < 0):
        raise ValueError("co-occurrence matrix must be nonnegative")


def _dense(M) -> np.ndarray:
    M = np.asarray(M.toarray() if sp.issparse(M) else M, dtype=float).copy()
    _validate(M)
    np.fill_diagonal(M, 0.0)
    return M


def fiedler_value(M) -> float:
    """Second-smallest Laplacian eigenvalue (0 for fewer than two items)."""
    M = _dense(M)
    if M.shape[0] < 2:
        return 0.0
    return max(float(np.linalg.eigvalsh(laplacian(M))[1]), 0.0)


def laplacian_summary(M) -> LaplacianSummary:
    """Dense eigendecomposition of ``L_M``; connectivity and diameter by BFS."""
    M = _dense(M)
    n = M.shape[0]
    if n == 0:
        return LaplacianSummary(0, 0.0, 0.0, 0.0, True, 0, None, 0)
    eig = np.linalg.eigvalsh(laplacian(M))
    a_M = float(eig[1]) if n > 1 else 0.0
    adj = sp.csr_matrix(M > 0)
    ncomp, _ = connected_components(adj, directed=False)
    connected = ncomp == 1
    diameter = None
    if connected:
        dist = shortest_path(adj, method="D", unweighted=True, directed=False)
        diameter = int(dist.max())
    positive = M[M > 0]
    r = float(positive.max() / positive.min()) if positive.size else None
    return LaplacianSummary(
        n=n,
        d_M=float(M.sum(axis=1).max()),
        a_M=max(a_M, 0.0),
        lambda_n=float(eig[-1]),
        connected=connected,
        diameter=diameter,
        r=r,
        max_degree=int((M > 0).sum(axis=1).max()),
    )


def _c(omega: float) -> float:
    return 1.0 / (math.exp(-omega) + math.exp(omega)) ** 2


def _likelihood_constants(model: ModelSpec, summary: LaplacianSummary, omega: float, k: int, lam_n: float):
    """(gamma, mu, delta) of the negative log-likelihood."""
    lam2, d = summary.a_M, summary.d_M
    e2 = math.exp(2 * omega)
    fam = model.family
    if fam in ("bt", "rao-kupper") and k != 2:
        raise ValueError("paired-comparison models need k = 2")
    if k < 2:
        raise ValueError("k must be >= 2")
    if fam == "bt":
        return _c(omega) * lam2, lam_n / 4, e2 * d / 2
    if fam == "rao-kupper":
        th = model.rk_theta
        c = th / (th * math.exp(-omega) + math.exp(omega)) ** 2
        return c * lam2, lam_n / 2, e2 * d
    if fam == "luce":
        c = _c(omega) if k == 2 else 1.0 / ((k - 2) * e2 + 2) ** 2
        dk = 1.0 / ((k - 2) / e2 + 2) ** 2
        return c * lam2, dk * lam_n, e2 * d / (k * (k - 1))
    return math.exp(-4 * omega) * lam2 / k**2, (2 - 1 / k) * math.exp(4 * omega) * lam_n, e2 * d / 2


def convexity_constants(
    model: ModelSpec, summary: LaplacianSummary, prior: GammaPrior, omega: float, k: int = 2
) -> Constants:
    """Constants of the negative log-likelihood (ML) or log-posterior (``beta > 0``)."""
    if omega < 0:
        raise ValueError("omega must be >= 0")
    gamma, mu, delta = _likelihood_constants(model, summary, omega, k, summary.lambda_n)
    if prior.beta > 0:
        gamma = math.exp(-omega) * prior.beta
        mu += math.exp(omega) * prior.beta
    return Constants(gamma, mu, delta)


def improvement_factors(
    model: ModelSpec, summary: LaplacianSummary, prior: GammaPrior, omega: float, k: int = 2
) -> dict[str, float]:
    """Per-iteration improvement guarantees on ``[-omega, omega]^n``.

    Smoothness uses the Gershgorin bound ``lambda_n <= 2 d(M)``, so for BT these
    are ``2 c a/d`` (GD), ``2 c a/((1 + e^{2 omega}) d)`` (MM), their MAP
    counterparts with ``e^{-omega} beta`` curvature, and the rescaled variants that
    combine both curvature sources.
    """
    g_ml, mu_ml, delta = _likelihood_constants(model, summary, omega, k, 2 * summary.d_M)
    beta = prior.beta
    g_prior = math.exp(-omega) * beta
    mu_map = mu_ml + math.exp(omega) * beta

    def ratio(num, den):
        return num / den if den > 0 else 0.0

    return {
        "ml_gd": ratio(g_ml, mu_ml),
        "ml_mm": ratio(g_ml, mu_ml + delta),
        "map_gd": ratio(g_prior, mu_map),
        "map_mm": ratio(g_prior, mu_map + delta),
        "acc_gd": ratio(g_ml + g_prior, mu_map),
        "acc_mm": ratio(g_ml + g_prior, mu_map + delta),
    }


def predicted_iterations(factor: float, epsilon: float) -> float:
    """Iterations for the gap to shrink by ``epsilon`` at a constant ``factor``."""
    if factor <= 0:
        return math.inf
    if factor >= 1:
        return 0.0
    return math.log(1 / epsilon) / -math.log1p(-factor)


def uniform_bound(summary: LaplacianSummary, epsilon: float) -> float:
    """``r d(n) D(n) n log(1/epsilon) / 4``; depends only on the graph of ``M``."""
    if not summary.connected or summary.diameter is None:
        raise ValueError("uniform bound needs a connected comparison graph")
    r = summary.r if summary.r is not None else 1.0
    return 0.25 * r * summary.max_degree * summary.diameter * summary.n * math.log(1 / epsilon)


@dataclass(frozen=True)
class BoundReport:
    omega: float
    k: int
    gamma: float
    mu: float
    delta: float
    improvement: dict
    predicted_iters: dict
    epsilon: float
    uniform_bound: Optional[float]

    def to_dict(self) -> dict:
        return {
            key: (None if isinstance(v, float) and not math.isfinite(v) else v)
            for key, v in asdict(self).items()
        } | {
            "predicted_iters": {
                k: (None if not math.isfinite(v) else v) for k, v in self.predicted_iters.items()
            }
        }


def bound_report(
    model: ModelSpec,
    summary: LaplacianSummary,
    prior: GammaPrior,
    omega: float,
    k: int = 2,
    epsilon: float = 1e-4,
) -> BoundReport:
    if model.family in ("bt", "rao-kupper"):
        k = 2
    const = convexity_constants(model, summary, prior, omega, k)
    factors = improvement_factors(model, summary, prior, omega, k)
    uni = uniform_bound(summary, epsilon) if summary.connected and summary.n > 1 else None
    return BoundReport(
        omega=omega,
        k=k,
        gamma=const.gamma,
        mu=const.mu,
        delta=const.delta,
        improvement=factors,
        predicted_iters={name: predicted_iterations(f, epsilon) for name, f in factors.items()},
        epsilon=epsilon,
        uniform_bound=uni,
    )
