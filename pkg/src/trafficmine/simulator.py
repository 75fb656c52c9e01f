"""Synthetic timed logs from ground-truth nets, and discovery error measurement.

Walks treat a net as a directed graph: from the source place, every step picks
uniformly among the successors of the current node (transition or place)
until the sink is reached. Fired transitions emit their label.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Mapping, Optional, Sequence

import numpy as np

from .discovery import DiscoveryConfig, WorkflowNet, discover, net_from_edges, validate_wfnet
from .eventlog import SINK, SOURCE, Event, EventLog, Trace
from .interest import DEFAULT_THETA

logger = logging.getLogger(__name__)

EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)
DEFAULT_DURATION = ("lognormal", (math.log(3600.0), 0.5))
STEP_CAP_FACTOR = 10
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class DurationSpec:
    kind: str
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        p = self.params
        if self.kind == "constant":
            ok = len(p) == 1 and p[0] >= 0
        elif self.kind == "uniform":
            ok = len(p) == 2 and 0 <= p[0] <= p[1]
        elif self.kind == "lognormal":
            ok = len(p) == 2 and p[1] >= 0
        else:
            raise ValueError(f"unknown duration distribution {self.kind!r}")
        if not ok:
            raise ValueError(f"bad parameters for {self.kind}: {p}")

    def mean(self) -> float:
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "uniform":
            return (self.params[0] + self.params[1]) / 2
        mu, sigma = self.params
        return math.exp(mu + sigma * sigma / 2)

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "uniform":
            return float(rng.uniform(*self.params))
        return float(rng.lognormal(*self.params))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


@dataclass(frozen=True)
class GroundTruthModel:
    net: WorkflowNet
    duration_profile: Mapping[str, DurationSpec] = field(default_factory=dict)
    loop_activities: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        problems = validate_wfnet(self.net)
        if problems:
            raise ValueError(f"ground-truth net is not a workflow net: {problems[:3]}")
        profile = {a: DurationSpec(*DEFAULT_DURATION) for a in self.net.labels}
        for a, spec in self.duration_profile.items():
            profile[a] = spec if isinstance(spec, DurationSpec) else DurationSpec(*spec)
        object.__setattr__(self, "duration_profile", profile)
        loops = dict(self.loop_activities)
        for a, prob in loops.items():
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"repeat probability of {a!r} outside [0, 1]")
            if a not in self.net.labels:
                raise ValueError(f"loop activity {a!r} is not in the net")
        object.__setattr__(self, "loop_activities", loops)

    @property
    def arc_count(self) -> int:
        return len(self.net.arcs)

    def edges(self) -> frozenset:
        """Labeled directly-follows edges, including injected self-repeats."""
        loops = {(a, a) for a, prob in self.loop_activities.items() if prob > 0}
        return self.net.directly_follows() | loops

    def to_dict(self) -> dict:
        return {
            "net": self.net.to_dict(),
            "arc_count": self.arc_count,
            "duration_profile": {a: s.to_dict() for a, s in sorted(self.duration_profile.items())},
            "loop_activities": dict(sorted(self.loop_activities.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruthModel":
        return cls(
            WorkflowNet.from_dict(data["net"]),
            {a: DurationSpec(s["kind"], s["params"]) for a, s in data.get("duration_profile", {}).items()},
            data.get("loop_activities", {}),
        )


@dataclass(frozen=True)
class SimulationConfig:
    num_traces: int
    noise_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_traces < 1:
            raise ValueError("num_traces must be positive")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")


@dataclass(frozen=True)
class ErrorReport:
    ape: float
    false_positive_edges: int
    false_negative_edges: int
    gt_edges: int
    runtime_ms: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([seed & _SEED_MASK, *stream])


def activity_labels(n: int) -> list:
    width = len(str(n - 1))
    return [f"act_{i:0{width}d}" for i in range(n)]


def min_arcs(num_activities: int) -> int:
    """Arcs of the backbone chain: one place per link plus the two boundary arcs."""
    return 2 * num_activities


def max_arcs(num_activities: int) -> int:
    n = num_activities
    return n * (n - 1) + 2 * n


def generate_model(num_activities: int, target_arcs: int, seed: int = 0, *,
                   num_loops: int = 0, loop_probability: float = 0.3,
                   duration: Optional[tuple] = None) -> GroundTruthModel:
    """Random acyclic workflow net with exactly ``target_arcs`` arcs.

    Activities ``act_0 .. act_{n-1}`` form a backbone chain; extra forward
    edges are drawn from a window whose width grows with the arc budget, so
    walks stay long and every edge sees traffic. An odd leftover arc becomes an
    extra start or end edge.
    """
    n = num_activities
    if n < 3:
        raise ValueError("need at least 3 activities")
    if not min_arcs(n) <= target_arcs <= max_arcs(n):
        raise ValueError(f"infeasible target: {n} activities allow {min_arcs(n)}..{max_arcs(n)} arcs")
    if not 0 <= num_loops <= n:
        raise ValueError("num_loops must lie in [0, num_activities]")
    rng = _rng(seed, 2)
    labels = activity_labels(n)

    needed = (target_arcs - min_arcs(n)) // 2
    window = 2
    while window < n - 1 and sum(n - d for d in range(2, window + 1)) < 3 * needed:
        window += 1
    pool = [(i, j) for i in range(n) for j in range(i + 2, min(n, i + window + 1))]
    take = min(needed, len(pool))
    chosen = sorted(pool[k] for k in rng.choice(len(pool), size=take, replace=False)) if take else []

    edges = [(SOURCE, labels[0]), (labels[-1], SINK)]
    edges += [(labels[i], labels[i + 1]) for i in range(n - 1)]
    edges += [(labels[i], labels[j]) for i, j in chosen]

    leftover = target_arcs - min_arcs(n) - 2 * take
    boundary = [(SOURCE, labels[j]) for j in range(1, n)] + [(labels[i], SINK) for i in range(n - 1)]
    if leftover:
        picks = rng.choice(len(boundary), size=leftover, replace=False)
        edges += [boundary[k] for k in sorted(picks)]

    net = net_from_edges(edges)
    spec = DurationSpec(*(duration or DEFAULT_DURATION))
    loop_labels = sorted(labels[k] for k in rng.choice(n, size=num_loops, replace=False)) if num_loops else []
    return GroundTruthModel(net, {a: spec for a in labels},
                            {a: loop_probability for a in loop_labels})


class _Walker:
    def __init__(self, model: GroundTruthModel):
        net = model.net
        self.source, self.sink = net.source, net.sink
        self.succ = {node: sorted(vs) for node, vs in net.postset.items()}
        self.label = {t.id: t.label for t in net.transitions}
        self.loops = model.loop_activities
        self.cap = STEP_CAP_FACTOR * len(net.transitions)

    def walk(self, rng: np.random.Generator) -> Optional[list]:
        """Label sequence of one source-to-sink walk, or None past the step cap."""
        out = []
        node = self.source
        while node != self.sink:
            choices = self.succ[node]
            node = choices[int(rng.integers(len(choices)))] if len(choices) > 1 else choices[0]
            label = self.label.get(node, False)
            if label is False:
                continue
            if label is not None:
                out.append(label)
                prob = self.loops.get(label, 0.0)
                while prob and rng.random() < prob and len(out) <= self.cap:
                    out.append(label)
            if len(out) > self.cap:
                return None
        return out


def _apply_noise(seq: list, alphabet: Sequence[str], rng: np.random.Generator) -> list:
    """One random insertion, deletion or adjacent swap."""
    seq = list(seq)
    op = ("insert", "delete", "swap")[int(rng.integers(3))]
    if op == "delete" and len(seq) < 2 or op == "swap" and len(seq) < 2:
        op = "insert"
    if op == "insert":
        seq.insert(int(rng.integers(len(seq) + 1)), alphabet[int(rng.integers(len(alphabet)))])
    elif op == "delete":
        del seq[int(rng.integers(len(seq)))]
    else:
        k = int(rng.integers(len(seq) - 1))
        seq[k], seq[k + 1] = seq[k + 1], seq[k]
    return seq


def _timed_trace(case_id: str, index: int, seq: list, model: GroundTruthModel,
                 rng: np.random.Generator) -> Trace:
    profile = model.duration_profile
    base = EPOCH + timedelta(hours=index)
    t_ms = 0
    events = []
    for k, label in enumerate(seq):
        spec = profile[label]
        if k:
            t_ms += round(float(rng.uniform(0.0, spec.mean())) * 1000)
        dur_ms = round(spec.sample(rng) * 1000)
        start = base + timedelta(milliseconds=t_ms)
        events.append(Event(case_id, label, start, start + timedelta(milliseconds=dur_ms)))
        t_ms += dur_ms
    return Trace.from_events(case_id, events)


def simulate_trace(model: GroundTruthModel, index: int, seed: int, noisy: bool = False,
                   walker: Optional[_Walker] = None) -> Optional[Trace]:
    """Trace ``index`` of a run; depends only on (model, seed, index, noisy)."""
    walker = walker or _Walker(model)
    rng = _rng(seed, 0, index)
    seq = walker.walk(rng)
    if seq is None:
        return None
    if noisy:
        seq = _apply_noise(seq, sorted(model.net.labels), rng)
    width = 6
    return _timed_trace(f"case_{index:0{width}d}", index, seq, model, rng)


def noisy_indices(config: SimulationConfig) -> frozenset:
    k = math.ceil(config.noise_rate * config.num_traces)
    if k == 0:
        return frozenset()
    picks = _rng(config.seed, 1).choice(config.num_traces, size=k, replace=False)
    return frozenset(int(i) for i in picks)


def generate_log(model: GroundTruthModel, config: SimulationConfig) -> EventLog:
    walker = _Walker(model)
    noisy = noisy_indices(config)
    traces = []
    aborted = 0
    for idx in range(config.num_traces):
        trace = simulate_trace(model, idx, config.seed, idx in noisy, walker)
        if trace is None:
            aborted += 1
        else:
            traces.append(trace)
    if aborted:
        logger.warning("%d trace(s) aborted at the step cap", aborted)
    if not traces:
        raise RuntimeError("every walk hit the step cap; the net traps its walks")
    return EventLog(tuple(traces))


def accepts(net: WorkflowNet, labels: Sequence[str]) -> bool:
    """Whether ``labels`` is the label sequence of some source-to-sink path."""
    succ = net.postset
    label_of = {t.id: t.label for t in net.transitions}

    def closure(places):
        # Follow silent transitions without consuming input.
        seen = set(places)
        stack = list(places)
        while stack:
            p = stack.pop()
            for t in succ.get(p, ()):
                if t in label_of and label_of[t] is None:
                    for q in succ.get(t, ()):
                        if q not in seen:
                            seen.add(q)
                            stack.append(q)
        return seen

    current = closure({net.source})
    for a in labels:
        nxt = set()
        for p in current:
            for t in succ.get(p, ()):
                if label_of.get(t) == a:
                    nxt.update(succ.get(t, ()))
        current = closure(nxt)
        if not current:
            return False
    return net.sink in current


def count_paths(net: WorkflowNet) -> int:
    """Number of distinct source-to-sink node paths of an acyclic net."""
    memo = {}

    def paths(node):
        if node == net.sink:
            return 1
        if node not in memo:
            memo[node] = None
            memo[node] = sum(paths(v) for v in net.postset.get(node, ()))
        if memo[node] is None:
            raise ValueError("net has a cycle")
        return memo[node]

    return paths(net.source)


def measure_error(ground_truth, discovered: WorkflowNet, runtime_ms: int = 0) -> ErrorReport:
    """Average percentage error over labeled directly-follows edges.

    ``ape = 100 * (false positives + false negatives) / ground-truth edges``.
    """
    if isinstance(ground_truth, GroundTruthModel):
        gt = ground_truth.edges()
    else:
        gt = ground_truth.directly_follows()
    if not gt:
        raise ValueError("ground truth has no directly-follows edges")
    found = discovered.directly_follows()
    fp = len(found - gt)
    fn = len(gt - found)
    return ErrorReport(100.0 * (fp + fn) / len(gt), fp, fn, len(gt), int(runtime_ms))


def run_discovery_timed(log: EventLog, config: DiscoveryConfig, parallel: bool = False):
    """Discover and return ``(net, cpu_ms)``."""
    t0 = time.process_time_ns()
    net = discover(log, config, parallel=parallel)
    return net, (time.process_time_ns() - t0) // 1_000_000


def bench(num_activities: int, target_arcs: int, num_traces: int, seed: int = 0, *,
          noise_rate: float = 0.1, theta: float = DEFAULT_THETA,
          min_confidence: float = 0.0, parallel: bool = False) -> ErrorReport:
    """Generate a model and a log, discover, and measure error and discovery CPU time."""
    model = generate_model(num_activities, target_arcs, seed)
    log = generate_log(model, SimulationConfig(num_traces, noise_rate, seed))
    config = DiscoveryConfig(theta=theta, min_confidence=min_confidence)
    net, cpu_ms = run_discovery_timed(log, config, parallel)
    return measure_error(model, net, cpu_ms)
