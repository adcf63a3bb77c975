"""Empirical MM contraction on two items against the closed-form limit rate."""

import argparse
import itertools
import sys

import numpy as np

from btrank import GammaPrior, ModelSpec, SolverConfig, solve
from btrank.data import pair_dataset
from btrank.models import Likelihood, log_posterior
from btrank.solvers import two_item_closed_form


def empirical_rate(m, a1, beta, win_share=0.7, tail=20):
    d1 = int(win_share * m)
    ds = pair_dataset(("a", "b"), {(0, 1): d1, (1, 0): m - d1})
    prior = GammaPrior(1 + a1, beta)
    res = solve(ModelSpec("bt"), ds, prior, SolverConfig(record_trace=True), w0=[1.0, 0.0])
    w_star = np.log(np.array([d1 + a1, m - d1 + a1]) / (m + 2 * a1) * 2 * a1 / beta)
    best = log_posterior(Likelihood(ModelSpec("bt"), ds), prior, w_star)
    gaps = np.array([best - v for _, v, _ in res.trace])
    T = res.iterations
    return res.iterations, float(np.mean(gaps[T - tail : T] / gaps[T - tail - 1 : T - 1]))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", default="10,100")
    ap.add_argument("--a1", default="0.1,0.5")
    ap.add_argument("--betas", default="0.1,1")
    args = ap.parse_args()
    grid = [[float(x) for x in s.split(",")] for s in (args.m, args.a1, args.betas)]
    print("m,alpha_minus_1,beta,iterations,empirical_rate,limit_rate")
    for m, a1, beta in itertools.product(*grid):
        its, rate = empirical_rate(int(m), a1, beta)
        limit = two_item_closed_form(int(m), 1 + a1, beta, 1.0, 0)[2]
        print(f"{int(m)},{a1},{beta},{its},{rate:.6f},{limit:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
