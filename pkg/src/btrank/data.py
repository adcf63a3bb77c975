"""Comparison datasets: construction, CSV ingestion, synthesis and connectivity."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Kind",
    "ComparisonDataset",
    "DesignSpec",
    "ParseError",
    "parse_pairwise_csv",
    "parse_ranking_csv",
    "parse_choice_csv",
    "serialize_pairwise_csv",
    "serialize_ranking_csv",
    "serialize_choice_csv",
    "cooccurrence_matrix",
    "largest_connected_component",
    "synthesize",
    "split_scores",
]


class Kind(str, Enum):
    PAIR_WINS = "pair_wins"
    PAIR_WINS_TIES = "pair_wins_ties"
    CHOICES = "choices"
    RANKINGS = "rankings"


class ParseError(ValueError):
    """Malformed input file; ``lineno`` is 1-based (0 when not line-specific)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


@dataclass(frozen=True)
class ComparisonDataset:
    """Aggregated comparison outcomes over ``n`` densely indexed items.

    Only the field group matching ``kind`` is populated. ``tie_counts`` keys are
    stored with ``i < j``; use :meth:`tie` for symmetric access. Instances are
    treated as immutable.
    """

    names: tuple[str, ...]
    kind: Kind
    pair_wins: Mapping[tuple[int, int], int] = field(default_factory=dict)
    tie_counts: Mapping[tuple[int, int], int] = field(default_factory=dict)
    choice_obs: tuple[tuple[int, tuple[int, ...], int], ...] = ()
    ranking_obs: tuple[tuple[tuple[int, ...], int], ...] = ()

    def __post_init__(self):
        n = len(self.names)
        if len(set(self.names)) != n:
            raise ValueError("item names must be unique")
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)

        def check_index(i):
            if not (0 <= i < n):
                raise ValueError(f"item index {i} out of range for n={n}")

        def check_count(c):
            if int(c) != c or c <= 0:
                raise ValueError(f"counts must be positive integers, got {c!r}")

        for (i, j), c in self.pair_wins.items():
            check_index(i), check_index(j), check_count(c)
            if i == j:
                raise ValueError(f"self-comparison of item {i}")
        for (i, j), c in self.tie_counts.items():
            check_index(i), check_index(j), check_count(c)
            if not i < j:
                raise ValueError("tie keys must satisfy i < j")
        for winner, members, c in self.choice_obs:
            check_count(c)
            if len(members) < 2 or len(set(members)) != len(members):
                raise ValueError("choice sets need at least 2 distinct items")
            if winner not in members or list(members) != sorted(members):
                raise ValueError("choice set must be sorted and contain the winner")
            for i in members:
                check_index(i)
        for order, c in self.ranking_obs:
            check_count(c)
            if len(order) < 2 or len(set(order)) != len(order):
                raise ValueError("rankings need at least 2 distinct items")
            for i in order:
                check_index(i)

        populated = {
            Kind.PAIR_WINS: not (self.tie_counts or self.choice_obs or self.ranking_obs),
            Kind.PAIR_WINS_TIES: not (self.choice_obs or self.ranking_obs),
            Kind.CHOICES: not (self.pair_wins or self.tie_counts or self.ranking_obs),
            Kind.RANKINGS: not (self.pair_wins or self.tie_counts or self.choice_obs),
        }
        if not populated[kind]:
            raise ValueError(f"fields populated inconsistently with kind {kind.value}")

    @property
    def n(self) -> int:
        return len(self.names)

    def tie(self, i: int, j: int) -> int:
        return self.tie_counts.get((min(i, j), max(i, j)), 0)

    def wins(self, i: int, j: int) -> int:
        return self.pair_wins.get((i, j), 0)

    @property
    def num_comparisons(self) -> int:
        """Total number of observed outcomes (with multiplicity)."""
        return (
            sum(self.pair_wins.values())
            + sum(self.tie_counts.values())
            + sum(c for _, _, c in self.choice_obs)
            + sum(c for _, c in self.ranking_obs)
        )

    @property
    def max_set_size(self) -> int:
        sizes = [len(m) for _, m, _ in self.choice_obs] + [len(o) for o, _ in self.ranking_obs]
        return max(sizes, default=2)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def relabel(self, keep: Sequence[int]) -> "ComparisonDataset":
        """Restrict to items ``keep`` (old indices, in new order), dropping any
        observation that touches another item."""
        remap = {old: new for new, old in enumerate(keep)}
        names = tuple(self.names[i] for i in keep)

        def ok(items):
            return all(i in remap for i in items)

        pw = {(remap[i], remap[j]): c for (i, j), c in self.pair_wins.items() if ok((i, j))}
        ties = {}
        for (i, j), c in self.tie_counts.items():
            if ok((i, j)):
                a, b = remap[i], remap[j]
                ties[(min(a, b), max(a, b))] = c
        choices = tuple(
            (remap[w], tuple(sorted(remap[i] for i in m)), c)
            for w, m, c in self.choice_obs
            if ok(m)
        )
        rankings = tuple((tuple(remap[i] for i in o), c) for o, c in self.ranking_obs if ok(o))
        return ComparisonDataset(names, self.kind, pw, ties, choices, rankings)

    def canonical(self) -> "ComparisonDataset":
        """Same observations with items indexed in lexicographic name order."""
        order = sorted(range(self.n), key=lambda i: self.names[i])
        ds = self.relabel(order)
        return ComparisonDataset(
            ds.names,
            ds.kind,
            dict(sorted(ds.pair_wins.items())),
            dict(sorted(ds.tie_counts.items())),
            tuple(sorted(ds.choice_obs)),
            tuple(sorted(ds.ranking_obs)),
        )


def pair_dataset(names, wins: Mapping, ties: Optional[Mapping] = None) -> ComparisonDataset:
    """Build a paired-comparison dataset; kind follows from whether ties occur."""
    wins = {k: int(v) for k, v in wins.items() if v}
    canon_ties: dict = {}
    for (i, j), c in (ties or {}).items():
        if c:
            key = (min(i, j), max(i, j))
            canon_ties[key] = canon_ties.get(key, 0) + int(c)
    kind = Kind.PAIR_WINS_TIES if canon_ties else Kind.PAIR_WINS
    return ComparisonDataset(tuple(names), kind, wins, canon_ties)


def choice_dataset(names, observations: Iterable[tuple[int, Sequence[int]]]) -> ComparisonDataset:
    """Aggregate ``(winner, choice_set)`` observations."""
    counts: Counter = Counter()
    for winner, members in observations:
        counts[(winner, tuple(sorted(members)))] += 1
    obs = tuple((w, m, c) for (w, m), c in counts.items())
    return ComparisonDataset(tuple(names), Kind.CHOICES, choice_obs=obs)


def ranking_dataset(names, rankings: Iterable[Sequence[int]]) -> ComparisonDataset:
    counts: Counter = Counter(tuple(r) for r in rankings)
    return ComparisonDataset(tuple(names), Kind.RANKINGS, ranking_obs=tuple(counts.items()))


# ---------------------------------------------------------------------------
# CSV formats


def _rows(text: str):
    """Yield ``(lineno, fields)`` for non-blank, non-comment lines."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = next(csv.reader([stripped]))
        yield lineno, [f.strip() for f in fields]


class _Names:
    def __init__(self):
        self.index: dict[str, int] = {}

    def __call__(self, name: str, lineno: int) -> int:
        if not name:
            raise ParseError("empty item id", lineno)
        return self.index.setdefault(name, len(self.index))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.index)


def parse_pairwise_csv(text: str) -> ComparisonDataset:
    """Parse ``item_a,item_b,outcome[,count]`` lines, outcome in win/loss/tie."""
    ids = _Names()
    wins: Counter = Counter()
    ties: Counter = Counter()
    for lineno, fields in _rows(text):
        if len(fields) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(fields)}", lineno)
        a, b, outcome = fields[:3]
        if a == b:
            raise ParseError(f"self-comparison of {a!r}", lineno)
        count = 1
        if len(fields) == 4:
            try:
                count = int(fields[3])
            except ValueError:
                raise ParseError(f"invalid count {fields[3]!r}", lineno) from None
            if count < 0:
                raise ParseError(f"negative count {count}", lineno)
        i, j = ids(a, lineno), ids(b, lineno)
        outcome = outcome.lower()
        if outcome == "win":
            wins[(i, j)] += count
        elif outcome == "loss":
            wins[(j, i)] += count
        elif outcome == "tie":
            ties[(min(i, j), max(i, j))] += count
        else:
            raise ParseError(f"unknown outcome {outcome!r}", lineno)
    return pair_dataset(ids.names, wins, ties)


def _parse_sequences(text: str, what: str):
    ids = _Names()
    seqs = []
    for lineno, fields in _rows(text):
        if len(fields) < 2:
            raise ParseError(f"a {what} needs at least 2 ids", lineno)
        if len(set(fields)) != len(fields):
            raise ParseError(f"duplicate id within {what}", lineno)
        seqs.append(tuple(ids(f, lineno) for f in fields))
    return ids.names, seqs


def parse_ranking_csv(text: str) -> ComparisonDataset:
    """Parse one finishing order per line, first id finished first."""
    names, seqs = _parse_sequences(text, "ranking")
    return ranking_dataset(names, seqs)


def parse_choice_csv(text: str) -> ComparisonDataset:
    """Parse one choice per line: the chosen id followed by the other offered ids."""
    names, seqs = _parse_sequences(text, "choice set")
    return choice_dataset(names, ((s[0], s) for s in seqs))


def serialize_pairwise_csv(ds: ComparisonDataset) -> str:
    if ds.kind not in (Kind.PAIR_WINS, Kind.PAIR_WINS_TIES):
        raise ValueError(f"cannot write {ds.kind.value} as pairwise CSV")
    nm = ds.names
    lines = [(nm[i], nm[j], "win", c) for (i, j), c in ds.pair_wins.items()]
    for (i, j), c in ds.tie_counts.items():
        a, b = sorted((nm[i], nm[j]))
        lines.append((a, b, "tie", c))
    lines.sort()
    return "".join(f"{a},{b},{o},{c}\n" for a, b, o, c in lines)


def _write_sequences(seqs) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for seq, count in sorted(seqs):
        for _ in range(count):
            writer.writerow(seq)
    return buf.getvalue()


def serialize_ranking_csv(ds: ComparisonDataset) -> str:
    if ds.kind is not Kind.RANKINGS:
        raise ValueError(f"cannot write {ds.kind.value} as ranking CSV")
    return _write_sequences((tuple(ds.names[i] for i in o), c) for o, c in ds.ranking_obs)


def serialize_choice_csv(ds: ComparisonDataset) -> str:
    if ds.kind is not Kind.CHOICES:
        raise ValueError(f"cannot write {ds.kind.value} as choice CSV")
    nm = ds.names
    return _write_sequences(
        ((nm[w],) + tuple(sorted(nm[i] for i in m if i != w)), c) for w, m, c in ds.choice_obs
    )


# ---------------------------------------------------------------------------
# Graph structure


def cooccurrence_matrix(ds: ComparisonDataset, sparse: bool = False):
    """Symmetric matrix of item-pair co-occurrence counts with zero diagonal.

    Paired data: ``d_ij + d_ji + t_ij``. Set data: number of observations in
    which both items appear.
    """
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    def add(i, j, c):
        rows.extend((i, j))
        cols.extend((j, i))
        vals.extend((c, c))

    for (i, j), c in ds.pair_wins.items():
        add(i, j, c)
    for (i, j), c in ds.tie_counts.items():
        add(i, j, c)
    sets = [(m, c) for _, m, c in ds.choice_obs] + list(ds.ranking_obs)
    for members, c in sets:
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                add(members[a], members[b], c)
    M = sp.coo_matrix((vals, (rows, cols)), shape=(ds.n, ds.n), dtype=float).tocsr()
    M.sum_duplicates()
    return M if sparse else M.toarray()


def largest_connected_component(ds: ComparisonDataset):
    """Restrict ``ds`` to the largest connected component of its comparison graph.

    Equal-size components are resolved in favour of the one containing the
    smallest original index. Returns ``(dataset, mapping)`` where
    ``mapping[new] = old``.
    """
    if ds.n == 0:
        return ds, np.arange(0)
    M = cooccurrence_matrix(ds, sparse=True)
    _, labels = connected_components(M, directed=False)
    sizes = np.bincount(labels)
    first_index = {}
    for idx, lab in enumerate(labels):
        first_index.setdefault(lab, idx)
    best = min(range(len(sizes)), key=lambda lab: (-sizes[lab], first_index[lab]))
    keep = np.flatnonzero(labels == best)
    if len(keep) == ds.n:
        return ds, keep
    return ds.relabel(keep.tolist()), keep


# ---------------------------------------------------------------------------
# Synthetic data

GRAPH_FAMILIES = ("complete", "star", "path", "circuit", "erdos_renyi")


@dataclass(frozen=True)
class DesignSpec:
    """Comparison design for synthetic data.

    Paired models use either a round-robin design (``pairs_per_distinct_pair``
    comparisons of every distinct pair) or a graph family with
    ``comparisons_per_edge`` comparisons per edge. Set models (Luce, Plackett-Luce)
    draw ``num_observations`` uniformly random sets of ``set_size`` items.
    """

    n: int
    pairs_per_distinct_pair: Optional[int] = None
    graph_family: Optional[str] = None
    p: float = 1.0
    comparisons_per_edge: int = 1
    set_size: int = 2
    num_observations: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("design needs n >= 2")
        if self.set_size < 2 or self.set_size > self.n:
            raise ValueError("set_size must be in [2, n]")
        if self.pairs_per_distinct_pair is not None and self.pairs_per_distinct_pair < 1:
            raise ValueError("pairs_per_distinct_pair must be >= 1")
        if self.comparisons_per_edge < 1:
            raise ValueError("comparisons_per_edge must be >= 1")
        if self.graph_family is not None and self.graph_family not in GRAPH_FAMILIES:
            raise ValueError(f"unknown graph family {self.graph_family!r}")
        if not 0 < self.p <= 1:
            raise ValueError("edge probability p must be in (0, 1]")
        if self.num_observations < 0:
            raise ValueError("num_observations must be >= 0")

    def edges(self, rng: np.random.Generator) -> list[tuple[int, int, int]]:
        """``(i, j, comparisons)`` for every compared pair."""
        n = self.n
        if self.graph_family is None:
            k = self.pairs_per_distinct_pair or self.comparisons_per_edge
            return [(i, j, k) for i in range(n) for j in range(i + 1, n)]
        k = self.comparisons_per_edge
        fam = self.graph_family
        if fam == "complete":
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        elif fam == "star":
            pairs = [(0, j) for j in range(1, n)]
        elif fam == "path":
            pairs = [(i, i + 1) for i in range(n - 1)]
        elif fam == "circuit":
            pairs = [(i, i + 1) for i in range(n - 1)] + ([(0, n - 1)] if n > 2 else [])
        else:
            draws = rng.random(n * (n - 1) // 2)
            all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            pairs = [e for e, u in zip(all_pairs, draws) if u < self.p]
        return [(i, j, k) for i, j in pairs]


def item_names(n: int) -> tuple[str, ...]:
    width = len(str(n - 1))
    return tuple(f"item{i:0{width}d}" for i in range(n))


def split_scores(n: int, omega: float) -> np.ndarray:
    """First half of the items at ``-omega``, the rest at ``+omega``."""
    w = np.full(n, float(omega))
    w[: n // 2] = -omega
    return w


def synthesize(design: DesignSpec, model, w_true, seed: int = 0) -> ComparisonDataset:
    """Sample a dataset from ``model`` with log-scores ``w_true``; deterministic in ``seed``."""
    w = np.asarray(w_true, dtype=float)
    if w.shape != (design.n,):
        raise ValueError(f"w_true has shape {w.shape}, design expects ({design.n},)")
    rng = np.random.default_rng(seed)
    names = item_names(design.n)
    family = model.family

    if family in ("bt", "rao-kupper"):
        theta_rk = model.rk_theta if family == "rao-kupper" else 1.0
        if family == "rao-kupper" and theta_rk < 1:
            raise ValueError("rk_theta must be >= 1 for Rao-Kupper synthesis")
        wins: Counter = Counter()
        ties: Counter = Counter()
        for i, j, k in design.edges(rng):
            # probabilities in the log domain so large scores cannot overflow
            wi, wj = w[i], w[j]
            lt = np.log(theta_rk)
            p_i = np.exp(wi - np.logaddexp(wi, lt + wj))
            p_j = np.exp(wj - np.logaddexp(wj, lt + wi))
            if family == "bt":
                a = rng.binomial(k, p_i)
                wins[(i, j)] += a
                wins[(j, i)] += k - a
            else:
                a, b, t = rng.multinomial(k, [p_i, p_j, max(0.0, 1.0 - p_i - p_j)])
                wins[(i, j)] += a
                wins[(j, i)] += b
                ties[(i, j)] += t
        return pair_dataset(names, wins, ties)

    if design.num_observations < 1:
        raise ValueError("set-based synthesis needs num_observations >= 1")
    k = design.set_size
    seqs = []
    for _ in range(design.num_observations):
        members = rng.choice(design.n, size=k, replace=False)
        # Gumbel-max: sorting perturbed scores samples Plackett-Luce exactly,
        # and its first element is a Luce choice from the same set.
        keys = w[members] + rng.gumbel(size=k)
        seqs.append(tuple(int(i) for i in members[np.argsort(-keys)]))
    if family == "luce":
        return choice_dataset(names, ((s[0], s) for s in seqs))
    if family == "plackett-luce":
        return ranking_dataset(names, seqs)
    raise ValueError(f"unknown model family {family!r}")
