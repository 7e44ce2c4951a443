"""Reconstruction-quality metrics: NHI, EMD, NMI and eventually-follows F1."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from math import lcm
from statistics import fmean
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .errors import EMDCapExceeded, EmptyLogError
from .logio import EventLog, length_histogram, variant_distribution

Trace = tuple[str, ...]

DEFAULT_EMD_CAP = 2000 * 2000


def nhi(reconstructed: Mapping[int, int], original: Mapping[int, int]) -> float:
    """Normalized histogram intersection; bins are trace lengths, the original
    histogram provides the denominator."""
    denominator = sum(original.values())
    if denominator <= 0:
        raise EmptyLogError("original histogram is empty")
    overlap = sum(min(reconstructed.get(k, 0), v) for k, v in original.items())
    return float(Fraction(overlap, denominator))


def levenshtein(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        current = [i]
        for j, y in enumerate(b, 1):
            current.append(min(previous[j] + 1, current[j - 1] + 1,
                               previous[j - 1] + (x != y)))
        previous = current
    return previous[-1]


@lru_cache(maxsize=1 << 18)
def _normalized_cached(a: tuple, b: tuple) -> Fraction:
    longest = max(len(a), len(b))
    if longest == 0:
        return Fraction(0)
    return Fraction(levenshtein(a, b), longest)


def normalized_levenshtein_exact(a: Sequence, b: Sequence) -> Fraction:
    return _normalized_cached(tuple(a), tuple(b))


def normalized_levenshtein(a: Sequence, b: Sequence) -> float:
    """Edit distance divided by the longer length (0 for two empty traces)."""
    return float(normalized_levenshtein_exact(a, b))


# --------------------------------------------------------------------------
# earth mover's distance


@dataclass
class TransportPlan:
    sources: list[Trace]
    targets: list[Trace]
    flows: dict[tuple[int, int], Fraction]
    cost: Fraction


def transport(source: Mapping[Trace, Fraction], target: Mapping[Trace, Fraction],
              cap: int | None = DEFAULT_EMD_CAP) -> TransportPlan:
    """Exact minimum-cost transport between two variant distributions with
    normalized Levenshtein ground cost.

    All masses and costs are brought to common integer denominators and solved
    with network simplex, so the optimum is exact.
    """
    sources, targets = list(source), list(target)
    if not sources or not targets:
        raise EmptyLogError("empty variant distribution")
    if cap is not None and len(sources) * len(targets) > cap:
        raise EMDCapExceeded(
            f"{len(sources)} x {len(targets)} variant pairs exceed the cap of {cap}"
        )
    mass_scale = lcm(*(f.denominator for f in source.values()),
                     *(f.denominator for f in target.values()))
    costs = {(i, j): normalized_levenshtein_exact(s, t)
             for i, s in enumerate(sources) for j, t in enumerate(targets)}
    cost_scale = lcm(*(c.denominator for c in costs.values()))

    graph = nx.DiGraph()
    for i, s in enumerate(sources):
        graph.add_node(("s", i), demand=-int(source[s] * mass_scale))
    for j, t in enumerate(targets):
        graph.add_node(("t", j), demand=int(target[t] * mass_scale))
    for (i, j), c in costs.items():
        graph.add_edge(("s", i), ("t", j), weight=int(c * cost_scale))
    total, flow = nx.network_simplex(graph)

    flows = {}
    for i in range(len(sources)):
        for (_, j), amount in flow[("s", i)].items():
            if amount:
                flows[(i, j)] = Fraction(amount, mass_scale)
    return TransportPlan(sources, targets, flows, Fraction(total, mass_scale * cost_scale))


def emd(log1: EventLog, log2: EventLog, cap: int | None = DEFAULT_EMD_CAP) -> float:
    """Earth mover's distance between the variant distributions of two logs."""
    return float(transport(variant_distribution(log1), variant_distribution(log2), cap).cost)


# --------------------------------------------------------------------------
# multiset intersection


def nmi(original: EventLog, reconstructed: EventLog) -> float:
    """Share of the original log's traces that reappear in the reconstruction."""
    if not original:
        raise EmptyLogError("original log is empty")
    shared = sum(min(count, reconstructed.multiplicity(trace))
                 for trace, count in original.items())
    return float(Fraction(shared, len(original)))


# --------------------------------------------------------------------------
# eventually-follows relations


class EF(str, Enum):
    ALWAYS = "AF"
    SOMETIMES = "SF"
    NEVER = "NF"


@dataclass
class EFRelationMap:
    alphabet: frozenset[str]
    relations: dict[tuple[str, str], EF] = field(default_factory=dict)

    def __getitem__(self, pair: tuple[str, str]) -> EF:
        return self.relations[pair]

    def count(self, kind: EF) -> int:
        return sum(1 for v in self.relations.values() if v is kind)


def _follow_pairs(trace: Trace) -> set[tuple[str, str]]:
    pairs = set()
    later: set[str] = set()
    for a in reversed(trace):
        for b in later:
            pairs.add((a, b))
        later.add(a)
    return pairs


def ef_relations(log: EventLog, alphabet: Iterable[str] | None = None, *,
                 strict: bool = False, absent: str = "never") -> EFRelationMap:
    """Classify every ordered activity pair as always, sometimes or never follows.

    ``(a, b)`` holds in a trace when some occurrence of ``a`` is followed later by
    an occurrence of ``b``. By default "always" means in every trace that contains
    ``a``; ``strict=True`` requires every trace of the log instead. Pairs whose
    first activity never occurs are NEVER, or left out with ``absent="exclude"``.
    """
    if absent not in ("never", "exclude"):
        raise ValueError("absent must be 'never' or 'exclude'")
    sigma = frozenset(alphabet) if alphabet is not None else frozenset(log.alphabet)
    missing = log.alphabet - sigma
    if missing:
        raise ValueError(f"log activities outside the alphabet: {sorted(missing)}")
    holds: dict[tuple[str, str], int] = {}
    contains: dict[str, int] = {}
    for trace, count in log.items():
        for a in set(trace):
            contains[a] = contains.get(a, 0) + count
        for pair in _follow_pairs(trace):
            holds[pair] = holds.get(pair, 0) + count
    total = len(log)
    relations = {}
    for a in sigma:
        if absent == "exclude" and not contains.get(a):
            continue
        for b in sigma:
            h = holds.get((a, b), 0)
            scope = total if strict else contains.get(a, 0)
            if h == 0:
                relations[(a, b)] = EF.NEVER
            elif h == scope:
                relations[(a, b)] = EF.ALWAYS
            else:
                relations[(a, b)] = EF.SOMETIMES
    return EFRelationMap(sigma, relations)


def ef_f1(original: EFRelationMap, reconstructed: EFRelationMap) -> dict[EF, float | None]:
    """Per-class F1 of the reconstructed relations against the original ones.

    A class absent from both maps scores ``None``. Only pairs classified in both
    maps are compared.
    """
    if original.alphabet != reconstructed.alphabet:
        raise ValueError("relation maps are over different alphabets")
    pairs = original.relations.keys() & reconstructed.relations.keys()
    scores: dict[EF, float | None] = {}
    for kind in EF:
        predicted = sum(1 for p in pairs if reconstructed.relations[p] is kind)
        actual = sum(1 for p in pairs if original.relations[p] is kind)
        if predicted == 0 and actual == 0:
            scores[kind] = None
            continue
        hits = sum(1 for p in pairs
                   if reconstructed.relations[p] is kind and original.relations[p] is kind)
        precision = Fraction(hits, predicted) if predicted else Fraction(0)
        recall = Fraction(hits, actual) if actual else Fraction(0)
        if precision + recall == 0:
            scores[kind] = 0.0
        else:
            scores[kind] = float(2 * precision * recall / (precision + recall))
    return scores


# --------------------------------------------------------------------------
# aggregate report

METRIC_KEYS = ("nhi", "emd", "nmi", "af_f1", "sf_f1", "nf_f1")


@dataclass
class EvaluationReport:
    per_playout: list[dict[str, float | None]]
    means: dict[str, float | None]
    emd_computed: bool = True


def _mean(values: Iterable[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return fmean(present) if present else None


def evaluate(original: EventLog, playout_logs: Sequence[EventLog],
             alphabet: Iterable[str] | None = None, *,
             emd_cap: int | None = DEFAULT_EMD_CAP, strict: bool = False,
             absent: str = "never") -> EvaluationReport:
    """Score each play-out log against the original and average across play-outs.

    EMD values are ``None`` when the variant product exceeds ``emd_cap``.
    """
    if not playout_logs:
        raise ValueError("need at least one play-out log")
    sigma = frozenset(alphabet) if alphabet is not None else None
    if sigma is None:
        sigma = frozenset(original.alphabet.union(*(p.alphabet for p in playout_logs)))
    original_hist = length_histogram(original)
    original_ef = ef_relations(original, sigma, strict=strict, absent=absent)
    original_dist = variant_distribution(original)
    rows = []
    emd_computed = True
    for log in playout_logs:
        row: dict[str, float | None] = {}
        row["nhi"] = nhi(length_histogram(log), original_hist) if log else 0.0
        if emd_computed and log:
            try:
                row["emd"] = float(transport(original_dist, variant_distribution(log),
                                             emd_cap).cost)
            except EMDCapExceeded:
                emd_computed = False
                row["emd"] = None
        else:
            row["emd"] = None
        row["nmi"] = nmi(original, log)
        scores = ef_f1(original_ef, ef_relations(log, sigma, strict=strict, absent=absent))
        row["af_f1"] = scores[EF.ALWAYS]
        row["sf_f1"] = scores[EF.SOMETIMES]
        row["nf_f1"] = scores[EF.NEVER]
        rows.append(row)
    if not emd_computed:
        for row in rows:
            row["emd"] = None
    means = {k: _mean(r[k] for r in rows) for k in METRIC_KEYS}
    return EvaluationReport(rows, means, emd_computed)
