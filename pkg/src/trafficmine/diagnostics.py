"""Rework-loop and waiting-time diagnostics.

Loop score, with occurrence-id sets for activity ``a``::

    O = occurrences of a
    P = occurrences directly preceding some occurrence of a (trace start counts)
    S = occurrences directly following some occurrence of a (trace end counts)
    score = |(O | P) - (O | S)| / |P|

On a trace where ``a`` never repeats the score is exactly 1. Short rework
(``a a`` or ``a x a``) puts predecessors into ``O`` or ``S`` and lowers it, so
activities are flagged on the deficit ``1 - score``.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Optional

from .eventlog import EventLog, EventLogError

DEFAULT_MARGIN = 0.05


@dataclass(frozen=True)
class LoopReport:
    activity: str
    score: float
    signal: float  # 1 - score
    flagged: bool
    oracle_repeats: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DelayReport:
    edge: tuple
    mean_wait: float
    max_wait: float
    count: int

    def to_dict(self) -> dict:
        return {"edge": list(self.edge), "mean_wait": self.mean_wait,
                "max_wait": self.max_wait, "count": self.count}


def _occurrence_sets(log: EventLog) -> dict:
    """Activity -> (O, P, S) occurrence-id sets; ids are (case_id, position)."""
    sets = defaultdict(lambda: (set(), set(), set()))
    for t in log.traces:
        acts = t.activities
        for k, a in enumerate(acts):
            O, P, S = sets[a]
            # Positions -1 and n stand for the trace's start and end.
            O.add((t.case_id, k))
            P.add((t.case_id, k - 1))
            S.add((t.case_id, k + 1))
    return sets


def _score(O: set, P: set, S: set) -> float:
    return len((O | P) - (O | S)) / len(P)


def loop_score(log: EventLog, activity: str) -> float:
    sets = _occurrence_sets(log)
    if activity not in sets:
        raise EventLogError(f"activity {activity!r} does not occur in log")
    return _score(*sets[activity])


def brute_force_repeats(log: EventLog, activity: str) -> int:
    """Number of traces in which ``activity`` occurs at least twice."""
    return sum(1 for t in log.traces if t.activities.count(activity) >= 2)


def _all_scores(log: EventLog) -> dict:
    sets = _occurrence_sets(log)
    return {a: _score(*sets[a]) for a in sorted(sets)}


def calibrate_tau(log: EventLog, margin: float = DEFAULT_MARGIN) -> tuple:
    """Threshold on the loop signal from the repeat-free traces of ``log``.

    Returns ``(tau, details)`` where tau is the largest signal seen on the
    baseline plus ``margin``.
    """
    baseline = EventLog(tuple(t for t in log.traces
                              if len(set(t.activities)) == len(t.activities)))
    if baseline.traces:
        signals = [1.0 - s for s in _all_scores(baseline).values()]
        baseline_max = max(signals)
    else:
        baseline_max = 0.0
    tau = baseline_max + margin
    details = {
        "baseline_traces": len(baseline.traces),
        "excluded_traces": len(log.traces) - len(baseline.traces),
        "baseline_max_signal": baseline_max,
        "margin": margin,
        "tau": tau,
    }
    return tau, details


def detect_loops(log: EventLog, tau: Optional[float] = None) -> list:
    """Per-activity loop reports, flagged when ``1 - score > tau``.

    ``tau=None`` calibrates the threshold with :func:`calibrate_tau`.
    Sorted by signal descending, then label.
    """
    if tau is None:
        tau, _ = calibrate_tau(log)
    if math.isnan(tau):
        raise ValueError("tau must not be NaN")
    reports = []
    for a, score in _all_scores(log).items():
        signal = 1.0 - score
        reports.append(LoopReport(a, score, signal, signal > tau, brute_force_repeats(log, a)))
    reports.sort(key=lambda r: (-r.signal, r.activity))
    return reports


def waiting_times(log: EventLog) -> dict:
    """All clamped waits, keyed by directly-follows pair."""
    waits = defaultdict(list)
    for t in log.traces:
        for prev, cur in zip(t.events, t.events[1:]):
            waits[prev.activity, cur.activity].append(max(0.0, (cur.start - prev.end).total_seconds()))
    return waits


def detect_delays(log: EventLog, top_k: int = 10) -> list:
    """Directly-follows pairs ranked by mean waiting time (seconds)."""
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    reports = [DelayReport(edge, sum(w) / len(w), max(w), len(w))
               for edge, w in waiting_times(log).items()]
    reports.sort(key=lambda r: (-r.mean_wait, r.edge))
    return reports[:top_k]
