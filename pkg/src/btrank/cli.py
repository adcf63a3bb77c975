"""Command-line experiment runner.

Exit codes: 0 success, 2 usage/parse/configuration error, 3 numerical
nonconvergence (a report is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data as D
from .models import FAMILIES, GammaPrior, Likelihood, ModelMismatch, ModelSpec, log_posterior
from .solvers import (
    ALGORITHMS,
    AccelerationUnavailable,
    SolverConfig,
    SolverError,
    reference_optimum,
    solve,
)
from .spectral import bound_report, laplacian_summary

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

_FORMAT_FOR_MODEL = {"bt": "pairwise", "rao-kupper": "pairwise", "luce": "choice", "plackett-luce": "ranking"}
_PARSERS = {
    "pairwise": (D.parse_pairwise_csv, D.serialize_pairwise_csv),
    "ranking": (D.parse_ranking_csv, D.serialize_ranking_csv),
    "choice": (D.parse_choice_csv, D.serialize_choice_csv),
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _eta(value: str):
    if value == "auto":
        return None
    try:
        eta = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("--eta takes a positive number or 'auto'") from None
    if not eta > 0:
        raise argparse.ArgumentTypeError("--eta must be positive")
    return eta


def _floats(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from None


def _prior(args, beta=None) -> GammaPrior:
    beta = args.beta if beta is None else beta
    alpha = args.alpha if args.alpha is not None else 1.0 + beta
    if beta == 0 and alpha != 1:
        raise UsageError("beta = 0 is maximum likelihood and needs alpha = 1")
    try:
        return GammaPrior(alpha, beta)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _model(args) -> ModelSpec:
    try:
        return ModelSpec(args.model, args.rk_theta)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _load(args):
    fmt = args.format or _FORMAT_FOR_MODEL[args.model]
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read {args.input}: {err}") from None
    try:
        ds = _PARSERS[fmt][0](text)
    except D.ParseError as err:
        raise UsageError(f"{args.input}: {err}") from None
    mapping = None
    if getattr(args, "lcc", False):
        ds, mapping = D.largest_connected_component(ds)
    return ds, mapping


def _config(args, algorithm=None, record_trace=False) -> SolverConfig:
    try:
        return SolverConfig(
            algorithm=algorithm or args.algorithm,
            xi=args.xi,
            max_iters=args.max_iters,
            eta=args.eta,
            record_trace=record_trace,
        )
    except ValueError as err:
        raise UsageError(str(err)) from None


def _dataset_stats(ds, summary) -> dict:
    return {
        "n": ds.n,
        "kind": ds.kind.value,
        "observations": ds.num_comparisons,
        "d_M": summary.d_M,
        "a_M": summary.a_M,
        "connected": summary.connected,
    }


def _omega(w, prior) -> float:
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        return 0.0
    if prior.beta == 0:
        w = w - w.mean()
    return float(np.max(np.abs(w)))


def _config_echo(args) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    started = time.perf_counter()
    model = _model(args)
    prior = _prior(args)
    config = _config(args, record_trace=bool(args.trace))
    ds, mapping = _load(args)
    try:
        Likelihood(model, ds)
    except ModelMismatch as err:
        raise UsageError(str(err)) from None
    summary = laplacian_summary(D.cooccurrence_matrix(ds))

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "config": _config_echo(args),
        "dataset": _dataset_stats(ds, summary),
        "laplacian": summary.to_dict(),
        "solver": None,
        "bounds": None,
        "error": None,
        "wall_ms": None,
    }
    code = EXIT_OK
    result = None
    try:
        result = solve(model, ds, prior, config)
    except AccelerationUnavailable as err:
        raise UsageError(f"AccelerationUnavailable: {err}") from None
    except SolverError as err:
        report["error"] = {"type": type(err).__name__, "message": str(err), "iteration": err.iteration}
        code = EXIT_NUMERIC

    if result is not None:
        omega = args.omega if args.omega is not None else _omega(result.w_hat, prior)
        report["solver"] = {
            "algorithm": result.algorithm,
            "iterations": result.iterations,
            "converged": result.converged,
            "log_posterior": result.log_posterior,
            "eta": result.eta,
            "status_notes": result.status_notes,
            "w_hat": result.w_hat,
        }
        report["bounds"] = bound_report(model, summary, prior, omega, k=ds.max_set_size, epsilon=args.epsilon).to_dict()
        if args.scores:
            _write(_scores_csv(ds, result.w_hat), args.scores)
        if args.trace:
            _write(_trace_csv(model, ds, prior, config, result), args.trace)
    if mapping is not None:
        report["dataset"]["lcc_original_indices"] = mapping
    if args.timing:
        report["wall_ms"] = (time.perf_counter() - started) * 1000
    _write(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n", args.out)
    return code


def _scores_csv(ds, w) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["item", "w", "theta", "rank"])
    order = np.argsort(-w, kind="stable")
    rank = np.empty(len(w), dtype=int)
    rank[order] = np.arange(1, len(w) + 1)
    for i, name in enumerate(ds.names):
        writer.writerow([name, repr(float(w[i])), repr(float(np.exp(w[i]))), int(rank[i])])
    return buf.getvalue()


def _trace_csv(model, ds, prior, config, result) -> str:
    _, best = reference_optimum(model, ds, prior, config, result)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "log_posterior", "gap_to_best"])
    for t, value, _ in result.trace:
        writer.writerow([t, repr(value), repr(max(best - value, 0.0))])
    return buf.getvalue()


def _sweep_cell(model, ds, args, algorithm, beta):
    # beta = 0 always means maximum likelihood
    alpha = 1.0 if beta == 0 else (args.alpha if args.alpha is not None else 1.0 + beta)
    row = {"algorithm": algorithm, "beta": beta, "alpha": alpha, "iterations": "", "converged": "",
           "log_posterior": "", "status": "ok"}
    try:
        prior = GammaPrior(alpha, beta)
        res = solve(model, ds, prior, _config(args, algorithm=algorithm))
    except (AccelerationUnavailable, UsageError):
        row["status"] = "unavailable"
        return row
    except (SolverError, ValueError) as err:
        row["status"] = f"error:{type(err).__name__}"
        return row
    row.update(iterations=res.iterations, converged=res.converged, log_posterior=repr(res.log_posterior))
    return row


def cmd_sweep(args) -> int:
    model = _model(args)
    ds, _ = _load(args)
    try:
        Likelihood(model, ds)
    except ModelMismatch as err:
        raise UsageError(str(err)) from None
    for alg in args.algorithms:
        if alg not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {alg!r}")
    _config(args, algorithm=args.algorithms[0])
    cells = [(alg, beta) for alg in args.algorithms for beta in args.betas]
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(lambda c: _sweep_cell(model, ds, args, *c), cells))
    fields = ["algorithm", "beta", "alpha", "iterations", "converged", "log_posterior", "status"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_trace(args) -> int:
    model = _model(args)
    prior = _prior(args)
    config = _config(args, record_trace=True)
    ds, _ = _load(args)
    try:
        result = solve(model, ds, prior, config)
    except ModelMismatch as err:
        raise UsageError(str(err)) from None
    except AccelerationUnavailable as err:
        raise UsageError(f"AccelerationUnavailable: {err}") from None
    except SolverError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(_trace_csv(model, ds, prior, config, result), args.trace or args.out)
    return EXIT_OK


def cmd_diag(args) -> int:
    model = _model(args)
    prior = _prior(args)
    ds, mapping = _load(args)
    summary = laplacian_summary(D.cooccurrence_matrix(ds))
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "diag",
        "config": _config_echo(args),
        "dataset": _dataset_stats(ds, summary),
        "laplacian": summary.to_dict(),
        "bounds": bound_report(model, summary, prior, args.omega, k=ds.max_set_size, epsilon=args.epsilon).to_dict(),
    }
    if mapping is not None:
        report["dataset"]["lcc_original_indices"] = mapping
    _write(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    model = _model(args)
    graph = args.graph
    try:
        design = D.DesignSpec(
            n=args.n,
            pairs_per_distinct_pair=args.pairs if graph is None else None,
            graph_family=graph,
            p=args.p,
            comparisons_per_edge=args.per_edge or 1,
            set_size=args.k,
            num_observations=args.observations,
        )
        if args.w_pattern == "split":
            w = D.split_scores(args.n, args.omega)
        else:
            w = np.random.default_rng([args.seed, 1]).uniform(-args.omega, args.omega, args.n)
        ds = D.synthesize(design, model, w, seed=args.seed)
    except ValueError as err:
        raise UsageError(str(err)) from None
    fmt = args.format or _FORMAT_FOR_MODEL[args.model]
    if ds.kind is D.Kind.PAIR_WINS_TIES and fmt != "pairwise":
        raise UsageError("tie data can only be written as pairwise CSV")
    _write(_PARSERS[fmt][1](ds), args.out)
    truth = json.dumps({"names": list(ds.names), "w_true": _jsonable(w)}) + "\n"
    if args.truth:
        Path(args.truth).write_text(truth, encoding="utf-8")
    else:
        sys.stderr.write(truth)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_model_flags(p, with_solver=True):
    p.add_argument("--input", required=True, help="dataset file")
    p.add_argument("--format", choices=sorted(_PARSERS), help="input format (default: from --model)")
    p.add_argument("--model", choices=FAMILIES, default="bt")
    p.add_argument("--rk-theta", type=float, default=1.5, help="Rao-Kupper tie parameter (>= 1)")
    p.add_argument("--alpha", type=float, default=None, help="Gamma shape (default 1 + beta)")
    p.add_argument("--beta", type=float, default=0.0, help="Gamma rate; 0 means maximum likelihood")
    p.add_argument("--lcc", action="store_true", help="restrict to the largest connected component")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    if with_solver:
        p.add_argument("--algorithm", choices=ALGORITHMS, default="mm")
        p.add_argument("--xi", type=float, default=1e-4, help="stopping tolerance on max |w(t) - w(t-1)|")
        p.add_argument("--max-iters", type=int, default=100_000)
        p.add_argument("--eta", type=_eta, default=None, help="GD step size or 'auto'")
        p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; fitting is deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit scores and report diagnostics as JSON")
    _add_model_flags(p)
    p.add_argument("--trace", default=None, help="also write the iteration trace CSV here")
    p.add_argument("--scores", default=None, help="write per-item scores CSV here")
    p.add_argument("--omega", type=float, default=None, help="box radius for bounds (default: from the fit)")
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--timing", action="store_true", help="record wall-clock time (breaks byte-identity)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="iterations per (algorithm, beta) as CSV")
    _add_model_flags(p)
    p.add_argument("--betas", type=_floats, default=[0.0, 0.01, 0.1, 1.0, 10.0])
    p.add_argument("--algorithms", type=lambda s: [a.strip() for a in s.split(",") if a.strip()],
                   default=["mm", "acc-mm"])
    p.add_argument("--jobs", type=int, default=1, help="cells solved concurrently")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", help="log-posterior and gap per iteration as CSV")
    _add_model_flags(p)
    p.add_argument("--trace", default=None, help="output path (same as --out)")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("diag", help="Laplacian summary and convergence bounds as JSON")
    _add_model_flags(p, with_solver=False)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--model", choices=FAMILIES, default="bt")
    p.add_argument("--format", choices=sorted(_PARSERS), help="output format (default: from --model)")
    p.add_argument("--rk-theta", type=float, default=1.5)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pairs", type=int, default=None, help="comparisons per distinct pair (round robin)")
    p.add_argument("--graph", choices=D.GRAPH_FAMILIES, default=None)
    p.add_argument("--p", type=float, default=1.0, help="edge probability for erdos_renyi")
    p.add_argument("--per-edge", type=int, default=None, help="comparisons per graph edge")
    p.add_argument("--k", type=int, default=2, help="set size for choices/rankings")
    p.add_argument("--observations", type=int, default=0, help="number of choice/ranking observations")
    p.add_argument("--omega", type=float, default=0.5)
    p.add_argument("--w-pattern", choices=("split", "uniform"), default="split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--truth", default=None, help="write true scores JSON here (default stderr)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
