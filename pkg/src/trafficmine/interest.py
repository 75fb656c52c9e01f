"""Interest factor, directly-follows statistics and the pruned dependency graph.

The interest factor of an activity occurrence relates its (normalized) mean
duration to those of its antecedent and consequent::

    f = norm(act) / (norm(pred) * norm(succ))

Durations are divided by the global mean event duration so that ``f`` is
dimensionless and ``f == 1`` is the neutral value. The virtual ``SOURCE`` and
``SINK`` activities bound every trace and have normalized duration 1.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .eventlog import SINK, SOURCE, EventLog, EventLogError

EPSILON = 1e-6
# Smallest positive double; pruning at this threshold keeps every edge.
THETA_MIN = math.ulp(0.0)
DEFAULT_THETA = 0.1

VIRTUAL = frozenset({SOURCE, SINK})


def normalize_durations(log: EventLog) -> dict:
    """Mean duration per activity divided by the global mean event duration."""
    totals: dict = defaultdict(float)
    counts: Counter = Counter()
    for e in log.events():
        totals[e.activity] += e.duration
        counts[e.activity] += 1
    n = sum(counts.values())
    if n == 0:
        raise EventLogError("log has no events")
    global_mean = math.fsum(totals.values()) / n
    norm = {}
    for a in sorted(counts):
        mean = totals[a] / counts[a]
        norm[a] = mean / global_mean if mean > 0 else EPSILON
    return norm


def _norm_of(norm: Mapping[str, float], label: str) -> float:
    if label in VIRTUAL:
        return 1.0
    try:
        return norm[label]
    except KeyError:
        raise KeyError(f"unknown activity {label!r}") from None


def interest_factor(norm: Mapping[str, float], pred: str, act: str, succ: str) -> float:
    return _norm_of(norm, act) / (_norm_of(norm, pred) * _norm_of(norm, succ))


@dataclass(frozen=True)
class TripleObservation:
    predecessor: str
    activity: str
    successor: str
    count: int
    f: float


@dataclass(frozen=True)
class DependencyEdge:
    source: str
    target: str
    f: float
    confidence: float
    count: int = 0
    synthetic: bool = False

    @property
    def strength(self) -> float:
        return abs(self.f - 1.0)

    @property
    def pair(self) -> tuple:
        return (self.source, self.target)

    def to_dict(self) -> dict:
        return {
            "from": self.source,
            "to": self.target,
            "f": self.f,
            "confidence": self.confidence,
            "strength": self.strength,
            "count": self.count,
            "synthetic": self.synthetic,
        }


def strength(edge: DependencyEdge) -> float:
    return abs(edge.f - 1.0)


@dataclass(frozen=True)
class DependencyGraph:
    nodes: frozenset
    edges: tuple  # sorted by (source, target)

    def __post_init__(self):
        edges = tuple(sorted(self.edges, key=lambda e: e.pair))
        object.__setattr__(self, "edges", edges)
        pairs = [e.pair for e in edges]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate edge in dependency graph")
        for u, v in pairs:
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"edge {u}->{v} has an endpoint outside the node set")
            if u == SINK or v == SOURCE:
                raise ValueError(f"edge {u}->{v} violates source/sink orientation")

    @property
    def activities(self) -> frozenset:
        return self.nodes - VIRTUAL

    def edge(self, u: str, v: str) -> Optional[DependencyEdge]:
        for e in self.edges:
            if e.pair == (u, v):
                return e
        return None

    def edge_map(self) -> dict:
        return {e.pair: e for e in self.edges}

    def to_dict(self) -> dict:
        return {"nodes": sorted(self.nodes), "edges": [e.to_dict() for e in self.edges]}


def triples(log: EventLog, norm: Optional[Mapping[str, float]] = None) -> list:
    """Distinct (pred, act, succ) triples with counts and interest factors."""
    if norm is None:
        norm = normalize_durations(log)
    counts: Counter = Counter()
    for t in log.traces:
        seq = (SOURCE,) + t.activities + (SINK,)
        for k in range(1, len(seq) - 1):
            counts[seq[k - 1], seq[k], seq[k + 1]] += 1
    return [TripleObservation(p, a, s, c, interest_factor(norm, p, a, s))
            for (p, a, s), c in sorted(counts.items())]


def build_graph(log: EventLog) -> DependencyGraph:
    """Directly-follows graph weighted by the aggregated interest factor.

    Edge ``p -> a`` takes the count-weighted geometric mean of ``f`` over all
    triples ``(p, a, *)``. Edges into SINK use the virtual triple
    ``(p, SINK, -)``, i.e. ``f = 1 / norm(p)``.
    """
    if not log.traces:
        raise EventLogError("cannot build a dependency graph from an empty log")
    norm = normalize_durations(log)

    log_f_sum: dict = defaultdict(float)
    df_count: Counter = Counter()
    occurrences: Counter = Counter()
    for tri in triples(log, norm):
        log_f_sum[tri.predecessor, tri.activity] += tri.count * math.log(tri.f)
        df_count[tri.predecessor, tri.activity] += tri.count
        occurrences[tri.activity] += tri.count
        if tri.successor == SINK:
            df_count[tri.activity, SINK] += tri.count
    occurrences[SOURCE] = len(log.traces)

    edges = []
    for (u, v), c in df_count.items():
        if v == SINK:
            f = 1.0 / _norm_of(norm, u)
        else:
            f = math.exp(log_f_sum[u, v] / c)
        edges.append(DependencyEdge(u, v, f, c / occurrences[u], c))
    return DependencyGraph(frozenset(norm) | VIRTUAL, tuple(edges))


def _reachable(start: str, adjacency: Mapping[str, Iterable[str]]) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency.get(u, ()):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def prune(graph: DependencyGraph, theta: float, min_confidence: float = 0.0) -> DependencyGraph:
    """Keep edges with ``f >= theta`` (and ``confidence >= min_confidence``).

    Afterwards every activity is reconnected: an activity with no incoming edge
    gets ``SOURCE -> a``, one with no outgoing edge gets ``a -> SINK``, then any
    activity still unreachable from SOURCE (or unable to reach SINK) gets the
    same repair, in label order. Repair edges are synthetic with ``f = theta``
    and zero confidence. Earlier synthetic edges are discarded first.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    kept = {e.pair: e for e in graph.edges
            if not e.synthetic and e.f >= theta and e.confidence >= min_confidence}
    activities = sorted(graph.activities)

    def add_repair(u, v):
        kept[u, v] = DependencyEdge(u, v, theta, 0.0, 0, synthetic=True)

    has_in = {v for _, v in kept}
    has_out = {u for u, _ in kept}
    for a in activities:
        if a not in has_in:
            add_repair(SOURCE, a)
        if a not in has_out:
            add_repair(a, SINK)

    while True:
        succ = defaultdict(list)
        for u, v in kept:
            succ[u].append(v)
        reach = _reachable(SOURCE, succ)
        missing = [a for a in activities if a not in reach]
        if not missing:
            break
        add_repair(SOURCE, missing[0])
    while True:
        pred = defaultdict(list)
        for u, v in kept:
            pred[v].append(u)
        reach = _reachable(SINK, pred)
        missing = [a for a in activities if a not in reach]
        if not missing:
            break
        add_repair(missing[0], SINK)
    return DependencyGraph(graph.nodes, tuple(kept.values()))
