import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, logs, make_log, random_log
from trafficmine.eventlog import (
    SOURCE,
    Event,
    EventLog,
    EventLogError,
    Trace,
    alphabet_of,
    mean_duration,
    parse_csv,
    parse_timestamp,
    parse_xes_subset,
    project,
    write_csv,
    write_xes,
)

HEADER = b"case_id,activity,start,end\n"


def row(case, act, start, end):
    return f"{case},{act},{start},{end}\n".encode()


def test_parse_three_sequential_rows():
    data = HEADER + row("c1", "x", "2024-03-01T10:00:00+00:00", "2024-03-01T10:05:00+00:00") \
        + row("c1", "y", "2024-03-01T10:06:00+00:00", "2024-03-01T10:07:00+00:00") \
        + row("c1", "z", "2024-03-01T10:08:00+00:00", "2024-03-01T10:09:00+00:00")
    log = parse_csv(data)
    assert len(log) == 1
    assert log.traces[0].activities == ("x", "y", "z")
    assert log.alphabet == {"x", "y", "z"}


def test_end_before_start_names_the_row():
    data = HEADER + row("c1", "x", "2024-03-01T10:00:00+00:00", "2024-03-01T10:05:00+00:00") \
        + row("c1", "y", "2024-03-01T10:06:00+00:00", "2024-03-01T10:01:00+00:00")
    with pytest.raises(EventLogError, match="row 2") as info:
        parse_csv(data)
    assert info.value.row == 2


@pytest.mark.parametrize("data, message", [
    (b"", "empty"),
    (HEADER, "empty"),
    (b"case_id,activity,start\nc1,x,2024-03-01T10:00:00+00:00\n", "missing column"),
    (HEADER + b"c1,x,yesterday,2024-03-01T10:00:00+00:00\n", "row 1: malformed timestamp"),
    (HEADER + b"c1,x,2024-03-01T10:00:00,2024-03-01T10:00:00\n", "no UTC offset"),
    (HEADER + b"c1,x\n", "row 1"),
])
def test_parse_csv_errors(data, message):
    with pytest.raises(EventLogError, match=message):
        parse_csv(data)


def test_naive_timestamps_accepted_with_default_offset():
    data = HEADER + b"c1,x,2024-03-01T10:00:00,2024-03-01T10:30:00\n"
    log = parse_csv(data, default_offset=timezone(timedelta(hours=2)))
    e = log.traces[0].events[0]
    assert e.start == datetime(2024, 3, 1, 8, tzinfo=timezone.utc)
    assert e.duration == 1800.0


def test_custom_schema():
    data = b"ticket,step,begin,finish\nT1,x,2024-03-01T10:00:00Z,2024-03-01T10:00:10Z\n"
    log = parse_csv(data, {"case_id": "ticket", "activity": "step", "start": "begin", "end": "finish"})
    assert log.traces[0].case_id == "T1"
    assert log.traces[0].events[0].duration == 10.0


def test_timestamps_normalized_to_utc_and_milliseconds():
    ts = parse_timestamp("2024-03-01T12:00:00.123456+02:00")
    assert ts == datetime(2024, 3, 1, 10, 0, 0, 123000, tzinfo=timezone.utc)
    assert parse_timestamp("2024-03-01T10:00:00Z") == datetime(2024, 3, 1, 10, tzinfo=timezone.utc)


def test_ties_broken_by_end_then_label():
    t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
    evs = [Event("c", "b", t0, t0 + timedelta(seconds=5)),
           Event("c", "z", t0, t0 + timedelta(seconds=1)),
           Event("c", "a", t0, t0 + timedelta(seconds=5))]
    assert Trace.from_events("c", evs).activities == ("z", "a", "b")


def test_reserved_and_invalid_events_rejected():
    t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
    with pytest.raises(EventLogError):
        Event("c", SOURCE, t0, t0)
    with pytest.raises(EventLogError):
        Event("c", "", t0, t0)
    with pytest.raises(EventLogError):
        Trace("c", ())
    log = make_log([["x"]])
    with pytest.raises(EventLogError, match="duplicate case"):
        EventLog(log.traces + log.traces)


def test_hundred_row_fixture_matches_hand_count():
    # Counted with awk on the raw file: 100 rows, 10 cases, 8 activities.
    log = parse_csv(FIXTURES / "ten_cases.csv")
    assert len(log) == 10
    assert log.num_events == 100
    assert all(len(t) == 10 for t in log.traces)
    assert alphabet_of(log) == {"ad_tag_setup", "brief_intake", "creative_qa", "io_review",
                                "launch", "pacing_review", "pixel_check", "report"}
    counts = {a: sum(t.activities.count(a) for t in log.traces) for a in log.alphabet}
    assert counts == {"ad_tag_setup": 10, "brief_intake": 11, "creative_qa": 12, "io_review": 19,
                      "launch": 18, "pacing_review": 11, "pixel_check": 11, "report": 8}


def test_fixture_alphabet_matches_text_scan():
    lines = (FIXTURES / "ten_cases.csv").read_text().splitlines()[1:]
    assert alphabet_of(parse_csv(FIXTURES / "ten_cases.csv")) == {ln.split(",")[1] for ln in lines}


def test_xes_pairing_and_complete_only():
    log = parse_xes_subset(FIXTURES / "twin.xes")
    first = log.traces[0].events
    assert first[0].activity == "io_review" and first[0].duration == 1800.0
    assert first[2].activity == "launch" and first[2].duration == 0.0


def test_xes_matches_csv_twin():
    assert parse_xes_subset(FIXTURES / "twin.xes") == parse_csv(FIXTURES / "twin.csv")


@pytest.mark.parametrize("body, message", [
    (b"<log><trace><event>", "malformed XML"),
    (b"<log><trace><event><string key='concept:name' value='x'/>"
     b"<string key='lifecycle:transition' value='start'/>"
     b"<date key='time:timestamp' value='2024-01-01T00:00:00Z'/></event></trace></log>",
     "start without complete"),
    (b"<log><trace><event><string key='concept:name' value='x'/></event></trace></log>",
     "missing"),
])
def test_xes_errors(body, message):
    with pytest.raises(EventLogError, match=message):
        parse_xes_subset(body)


def test_csv_round_trip_on_fixture():
    log = parse_csv(FIXTURES / "ten_cases.csv")
    assert parse_csv(write_csv(log)) == log
    assert parse_xes_subset(write_xes(log)) == log


def test_alphabet_small_cases():
    assert alphabet_of(make_log([["x", "y"], ["y", "z"]])) == {"x", "y", "z"}
    assert alphabet_of(EventLog(())) == frozenset()


def test_project_keeps_order_and_drops_empty_traces():
    log = make_log([["x", "y", "z"], ["y"]])
    p = project(log, {"x", "z"})
    assert [t.activities for t in p.traces] == [("x", "z")]
    assert project(log, log.alphabet) == log
    with pytest.raises(EventLogError, match="not in log alphabet"):
        project(log, {"x", "w"})


def test_mean_duration():
    log = make_log([["x", "x", "y"]], [[10, 20, 0]])
    assert mean_duration(log, "x") == 15.0
    assert mean_duration(log, "y") == 0.0
    with pytest.raises(EventLogError):
        mean_duration(log, "q")


def test_mean_duration_matches_brute_force():
    rnd = random.Random(7)
    for _ in range(20):
        log = random_log(rnd)
        for a in log.alphabet:
            ds = [(e.end - e.start).total_seconds() for t in log.traces for e in t.events if e.activity == a]
            assert mean_duration(log, a) == pytest.approx(sum(ds) / len(ds), rel=1e-12)


@given(logs())
def test_alphabet_is_union_of_trace_label_sets(log):
    union = set()
    for t in log.traces:
        union |= set(t.activities)
    assert alphabet_of(log) == union == log.alphabet


@given(logs(), st.data())
def test_projection_properties(log, data):
    subset = set(data.draw(st.sets(st.sampled_from(sorted(log.alphabet)))))
    once = project(log, subset)
    assert alphabet_of(once) <= subset
    if subset:
        assert project(once, subset & once.alphabet) == once
    expected = [tuple(a for a in t.activities if a in subset) for t in log.traces]
    assert [t.activities for t in once.traces] == [s for s in expected if s]


@settings(max_examples=30)
@given(logs())
def test_parsing_is_deterministic_and_round_trips(log):
    data = write_csv(log)
    assert parse_csv(data) == parse_csv(data) == log
    assert all(e.end >= e.start for e in log.events())
