"""Workflow-net discovery with optional decomposition over activity subsets."""
from __future__ import annotations

import json
import logging
from collections import defaultdict, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

from .eventlog import SINK, SOURCE, EventLog, EventLogError, project
from .interest import DEFAULT_THETA, DependencyGraph, build_graph, prune

logger = logging.getLogger(__name__)

SOURCE_PLACE = "i"
SINK_PLACE = "o"


def transition_id(label: str) -> str:
    return "t" + json.dumps(label, ensure_ascii=False)


def place_id(pre: Iterable[str], post: Iterable[str]) -> str:
    """Deterministic place id from the sorted labels on either side."""
    return "p" + json.dumps([sorted(pre), sorted(post)], ensure_ascii=False, separators=(",", ":"))


@dataclass(frozen=True, order=True)
class Transition:
    id: str
    label: Optional[str]  # None marks a silent transition

    @property
    def silent(self) -> bool:
        return self.label is None


@dataclass(frozen=True)
class WorkflowNet:
    places: frozenset
    transitions: frozenset
    arcs: frozenset
    source: str = SOURCE_PLACE
    sink: str = SINK_PLACE

    @cached_property
    def transition_by_id(self) -> dict:
        return {t.id: t for t in self.transitions}

    @cached_property
    def postset(self) -> dict:
        out = defaultdict(set)
        for u, v in self.arcs:
            out[u].add(v)
        return out

    @cached_property
    def preset(self) -> dict:
        inc = defaultdict(set)
        for u, v in self.arcs:
            inc[v].add(u)
        return inc

    @property
    def labels(self) -> frozenset:
        return frozenset(t.label for t in self.transitions if t.label is not None)

    def label_of(self, node: str) -> Optional[str]:
        t = self.transition_by_id.get(node)
        return t.label if t is not None else None

    def directly_follows(self) -> frozenset:
        """Label pairs (x, y) joined through one internal place."""
        pairs = set()
        for p in self.places:
            if p in (self.source, self.sink):
                continue
            for x in self.preset.get(p, ()):
                lx = self.label_of(x)
                if lx is None:
                    continue
                for y in self.postset.get(p, ()):
                    ly = self.label_of(y)
                    if ly is not None:
                        pairs.add((lx, ly))
        return frozenset(pairs)

    def to_dict(self) -> dict:
        return {
            "places": sorted(self.places),
            "transitions": [{"id": t.id, "label": t.label} for t in sorted(self.transitions)],
            "arcs": [list(a) for a in sorted(self.arcs)],
            "source": self.source,
            "sink": self.sink,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorkflowNet":
        return cls(
            frozenset(data["places"]),
            frozenset(Transition(t["id"], t["label"]) for t in data["transitions"]),
            frozenset(tuple(a) for a in data["arcs"]),
            data.get("source", SOURCE_PLACE),
            data.get("sink", SINK_PLACE),
        )


def net_from_edges(edges: Iterable[tuple], activities: Iterable[str] = ()) -> WorkflowNet:
    """Causal-net style construction: one place per dependency edge.

    ``SOURCE -> a`` becomes the arc ``i -> a``; ``a -> SINK`` becomes ``a -> o``;
    every other edge ``x -> y`` becomes ``x -> p(x,y) -> y``.
    """
    labels = set(activities)
    places = {SOURCE_PLACE, SINK_PLACE}
    arcs = set()
    for u, v in edges:
        if u == SOURCE:
            labels.add(v)
            arcs.add((SOURCE_PLACE, transition_id(v)))
        elif v == SINK:
            labels.add(u)
            arcs.add((transition_id(u), SINK_PLACE))
        else:
            labels.update((u, v))
            p = place_id([u], [v])
            places.add(p)
            arcs.add((transition_id(u), p))
            arcs.add((p, transition_id(v)))
    transitions = frozenset(Transition(transition_id(a), a) for a in labels)
    return WorkflowNet(frozenset(places), transitions, frozenset(arcs))


def sequence_net(labels: Sequence[str]) -> WorkflowNet:
    path = [SOURCE, *labels, SINK]
    return net_from_edges(zip(path, path[1:]))


def graph_to_net(graph: DependencyGraph) -> WorkflowNet:
    return net_from_edges((e.pair for e in graph.edges), graph.activities)


def discover_subnet(projected_log: EventLog, theta: float = DEFAULT_THETA,
                    min_confidence: float = 0.0) -> WorkflowNet:
    return graph_to_net(prune(build_graph(projected_log), theta, min_confidence))


def _node_key(net: WorkflowNet, node: str, tag: str) -> str:
    t = net.transition_by_id.get(node)
    if t is None:
        return node
    return transition_id(t.label) if t.label is not None else f"{tag}{t.id}"


def merge(nets: Sequence[WorkflowNet]) -> WorkflowNet:
    """Union of nets with label fusion.

    Transitions with equal labels fuse; all sources fuse into ``i`` and all
    sinks into ``o``. Internal places are renamed by their (preset, postset)
    signature, so structurally identical places collapse into one and the
    result does not depend on the order of ``nets``.
    """
    if not nets:
        raise ValueError("merge needs at least one net")
    places = {SOURCE_PLACE, SINK_PLACE}
    transitions = set()
    arcs = set()
    for k, net in enumerate(nets):
        tag = f"n{k}:"
        # Silent transitions are never fused; they keep a per-net id.
        tmap = {t.id: _node_key(net, t.id, tag) for t in net.transitions}
        transitions.update(Transition(tmap[t.id], t.label) for t in net.transitions)
        sig = {t.id: t.label if t.label is not None else tmap[t.id] for t in net.transitions}
        pmap = {net.source: SOURCE_PLACE, net.sink: SINK_PLACE}
        for p in net.places:
            if p in pmap:
                continue
            pre = [sig.get(x, x) for x in net.preset.get(p, ())]
            post = [sig.get(y, y) for y in net.postset.get(p, ())]
            pmap[p] = place_id(pre, post)
        places.update(pmap.values())
        for u, v in net.arcs:
            arcs.add((pmap.get(u) or tmap.get(u, u), pmap.get(v) or tmap.get(v, v)))
    return WorkflowNet(frozenset(places), frozenset(transitions), frozenset(arcs))


def validate_wfnet(net: WorkflowNet) -> list:
    """Structural well-formedness problems; an empty list means a valid net."""
    violations = []
    tids = set(net.transition_by_id)
    if net.source not in net.places:
        violations.append(f"source place missing: {net.source}")
    if net.sink not in net.places:
        violations.append(f"sink place missing: {net.sink}")
    overlap = tids & net.places
    for n in sorted(overlap):
        violations.append(f"node is both place and transition: {n}")
    nodes = net.places | tids
    for u, v in sorted(net.arcs):
        if u not in nodes or v not in nodes:
            violations.append(f"arc with unknown endpoint: {u}->{v}")
        elif (u in net.places) == (v in net.places):
            violations.append(f"non-bipartite arc: {u}->{v}")
        if v == net.source:
            violations.append(f"source has incoming arc: {u}->{v}")
        if u == net.sink:
            violations.append(f"sink has outgoing arc: {u}->{v}")

    def reach(start, adjacency):
        seen = {start}
        queue = deque([start])
        while queue:
            for w in adjacency.get(queue.popleft(), ()):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return seen

    forward = reach(net.source, net.postset)
    backward = reach(net.sink, net.preset)
    for n in sorted(nodes):
        if n not in forward:
            violations.append(f"node unreachable: {n}")
        elif n not in backward:
            violations.append(f"node cannot reach sink: {n}")
    return violations


# -- decomposition ------------------------------------------------------------

AUTO = "auto"
SINGLE = "single"


def partition_activities(alphabet: Iterable[str], strategy: str = AUTO,
                         max_subset_size: int = 8) -> list:
    """Split the alphabet into overlapping subsets.

    ``auto`` slides a window of ``max_subset_size`` over the sorted labels,
    consecutive windows sharing one label. ``single`` returns the whole alphabet.
    """
    labels = sorted(set(alphabet))
    if not labels:
        raise ValueError("alphabet is empty")
    if strategy == SINGLE:
        return [frozenset(labels)]
    if strategy != AUTO:
        raise ValueError(f"unknown partition strategy {strategy!r}")
    if max_subset_size < 2:
        raise ValueError("max_subset_size must be at least 2")
    subsets = []
    step = max_subset_size - 1
    k = 0
    while True:
        subsets.append(frozenset(labels[k:k + max_subset_size]))
        if k + max_subset_size >= len(labels):
            break
        k += step
    return subsets


class PartitionError(ValueError):
    def __init__(self, missing, extra):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        parts = []
        if self.missing:
            parts.append(f"missing labels: {self.missing}")
        if self.extra:
            parts.append(f"unknown labels: {self.extra}")
        super().__init__("partition does not cover the alphabet exactly; " + "; ".join(parts))


@dataclass(frozen=True)
class DiscoveryConfig:
    theta: float = DEFAULT_THETA
    partition: Union[str, Sequence[Iterable[str]]] = SINGLE
    max_subset_size: int = 8
    min_confidence: float = 0.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError("min_confidence must lie in [0, 1]")
        if isinstance(self.partition, str):
            if self.partition not in (AUTO, SINGLE):
                raise ValueError(f"unknown partition strategy {self.partition!r}")
        else:
            object.__setattr__(self, "partition", tuple(frozenset(s) for s in self.partition))

    def resolve_partition(self, alphabet: frozenset) -> list:
        if isinstance(self.partition, str):
            return partition_activities(alphabet, self.partition, self.max_subset_size)
        covered = frozenset().union(*self.partition) if self.partition else frozenset()
        if covered != alphabet:
            raise PartitionError(alphabet - covered, covered - alphabet)
        return [s for s in self.partition if s]


@dataclass(frozen=True)
class DiscoveryResult:
    net: WorkflowNet
    partition: list
    graphs: list = field(default_factory=list)
    coverage_gaps: list = field(default_factory=list)

    def edge_annotations(self) -> dict:
        """Per label pair: max strength over subnets and whether every occurrence is synthetic."""
        notes: dict = {}
        for g in self.graphs:
            for e in g.edges:
                s, syn = notes.get(e.pair, (0.0, True))
                notes[e.pair] = (max(s, e.strength), syn and e.synthetic)
        return notes


def coverage_gaps(log: EventLog, partition: Sequence[frozenset]) -> list:
    """Directly-follows pairs of the log not contained in any single subset."""
    pairs = set()
    for t in log.traces:
        acts = t.activities
        pairs.update(zip(acts, acts[1:]))
    return sorted((a, b) for a, b in pairs if not any(a in s and b in s for s in partition))


def _subnet_job(args):
    sub_log, theta, min_confidence = args
    graph = prune(build_graph(sub_log), theta, min_confidence)
    return graph, graph_to_net(graph)


def discover_detailed(log: EventLog, config: DiscoveryConfig = DiscoveryConfig(),
                      parallel: bool = False) -> DiscoveryResult:
    if not log.traces:
        raise EventLogError("cannot discover from an empty log")
    partition = config.resolve_partition(log.alphabet)
    jobs = [(project(log, subset), config.theta, config.min_confidence) for subset in partition]
    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_subnet_job, jobs))
    else:
        results = [_subnet_job(j) for j in jobs]
    gaps = coverage_gaps(log, partition) if len(partition) > 1 else []
    if gaps:
        shown = ", ".join(f"{a}->{b}" for a, b in gaps[:10])
        logger.warning("%d directly-follows pair(s) span no subset: %s", len(gaps), shown)
    return DiscoveryResult(
        net=merge([net for _, net in results]),
        partition=partition,
        graphs=[g for g, _ in results],
        coverage_gaps=gaps,
    )


def discover(log: EventLog, config: DiscoveryConfig = DiscoveryConfig(),
             parallel: bool = False) -> WorkflowNet:
    """Discover a workflow net, decomposing over ``config.partition``."""
    return discover_detailed(log, config, parallel).net
