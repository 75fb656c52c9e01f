import math
import random
import statistics
from collections import defaultdict
from datetime import datetime, timedelta, timezone
from pathlib import Path

import networkx as nx
import pytest
from hypothesis import strategies as st

from trafficmine.eventlog import Event, EventLog, Trace

FIXTURES = Path(__file__).parent / "fixtures"
BASE = datetime(2024, 3, 1, tzinfo=timezone.utc)
LETTERS = "abcdefghij"


def make_log(sequences, durations=None, gap=1.0):
    """Log from label sequences; ``durations`` parallels ``sequences`` (seconds)."""
    traces = []
    for k, seq in enumerate(sequences):
        cid = f"c{k:03d}"
        t = BASE + timedelta(days=k)
        events = []
        for j, a in enumerate(seq):
            d = 60.0 if durations is None else durations[k][j]
            end = t + timedelta(seconds=d)
            events.append(Event(cid, a, t, end))
            t = end + timedelta(seconds=gap)
        traces.append(Trace(cid, tuple(events)))
    return EventLog(tuple(traces))


def random_log(rnd: random.Random, max_traces=50, max_acts=10, max_len=8, zero_prob=0.0, min_dur=1):
    n_acts = rnd.randint(1, max_acts)
    acts = [f"a{i}" for i in range(n_acts)]
    seqs, durs = [], []
    for _ in range(rnd.randint(1, max_traces)):
        length = rnd.randint(1, max_len)
        seqs.append([rnd.choice(acts) for _ in range(length)])
        durs.append([0 if rnd.random() < zero_prob else rnd.randint(min_dur, 3600) for _ in range(length)])
    return make_log(seqs, durs)


@st.composite
def logs(draw, max_traces=12, max_acts=6, max_len=7, uniform=False):
    acts = LETTERS[:draw(st.integers(1, max_acts))]
    seqs = draw(st.lists(st.lists(st.sampled_from(acts), min_size=1, max_size=max_len),
                         min_size=1, max_size=max_traces))
    if uniform:
        return make_log(seqs)
    durs = [draw(st.lists(st.integers(0, 5000), min_size=len(s), max_size=len(s))) for s in seqs]
    return make_log(seqs, durs)


# -- independent oracle for edge interest factors ------------------------------------

def brute_force_edge_f(log):
    """Enumerate triples straight from the events and aggregate per edge."""
    per_act = defaultdict(list)
    all_durs = []
    for t in log.traces:
        for e in t.events:
            d = (e.end - e.start) / timedelta(seconds=1)
            per_act[e.activity].append(d)
            all_durs.append(d)
    gmean = sum(all_durs) / len(all_durs)
    norm = {}
    for a, ds in per_act.items():
        m = sum(ds) / len(ds)
        norm[a] = m / gmean if m > 0 else 1e-6
    norm["^"] = norm["$"] = 1.0

    samples = defaultdict(list)
    for t in log.traces:
        seq = ["^"] + [e.activity for e in t.events] + ["$"]
        for k in range(1, len(seq) - 1):
            p, a, s = seq[k - 1], seq[k], seq[k + 1]
            samples[p, a].append(norm[a] / (norm[p] * norm[s]))
        samples[seq[-2], "$"].append(1.0 / norm[seq[-2]])
    return {pair: statistics.geometric_mean(fs) for pair, fs in samples.items()}


def rename_virtual(pair):
    from trafficmine.eventlog import SINK, SOURCE
    return tuple({SOURCE: "^", SINK: "$"}.get(x, x) for x in pair)


# -- net comparison -------------------------------------------------------------------

def net_to_nx(net):
    g = nx.DiGraph()
    for p in net.places:
        role = "source" if p == net.source else "sink" if p == net.sink else "place"
        g.add_node(p, kind=role)
    for t in net.transitions:
        g.add_node(t.id, kind="transition", label=t.label)
    g.add_edges_from(net.arcs)
    return g


def isomorphic(a, b) -> bool:
    return nx.is_isomorphic(net_to_nx(a), net_to_nx(b),
                            node_match=lambda x, y: x.get("kind") == y.get("kind")
                            and x.get("label") == y.get("label"))


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# -- acceptance summary -----------------------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    key, title = marker.args
    entry = _CRITERIA.setdefault(key, {"title": title, "ok": True, "values": []})
    entry["ok"] &= report.passed
    if report.when == "call":
        entry["values"].extend(f"{k}={v}" for k, v in item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k[2:])):
        entry = _CRITERIA[key]
        status = "PASS" if entry["ok"] else "FAIL"
        values = ("  [" + ", ".join(entry["values"]) + "]") if entry["values"] else ""
        terminalreporter.write_line(f"{key} {status}: {entry['title']}{values}")
