"""Timed event logs: types, CSV/XES readers and writers, projection."""
from __future__ import annotations

import csv
import io
import os
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import BinaryIO, Iterable, Mapping, Optional, Union

# Virtual boundary activities; never valid as real labels.
SOURCE = "[source]"
SINK = "[sink]"
RESERVED_LABELS = frozenset({SOURCE, SINK})

DEFAULT_SCHEMA = {"case_id": "case_id", "activity": "activity", "start": "start", "end": "end"}

Source = Union[bytes, str, os.PathLike, BinaryIO]


class EventLogError(ValueError):
    """Raised for malformed or inconsistent event data."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    start: datetime
    end: datetime

    def __post_init__(self):
        if not self.activity:
            raise EventLogError("empty activity label")
        if self.activity in RESERVED_LABELS:
            raise EventLogError(f"activity label {self.activity!r} is reserved")
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise EventLogError("timestamps must be timezone-aware")
        if self.end < self.start:
            raise EventLogError(f"end precedes start for activity {self.activity!r}")

    @property
    def duration(self) -> float:
        """Duration in seconds."""
        return (self.end - self.start).total_seconds()

    def sort_key(self):
        return (self.start, self.end, self.activity)


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple

    def __post_init__(self):
        if not self.events:
            raise EventLogError(f"trace {self.case_id!r} has no events")
        keys = []
        for e in self.events:
            if e.case_id != self.case_id:
                raise EventLogError(f"event of case {e.case_id!r} placed in trace {self.case_id!r}")
            keys.append(e.sort_key())
        if any(keys[k] > keys[k + 1] for k in range(len(keys) - 1)):
            raise EventLogError(f"events of trace {self.case_id!r} are not ordered")

    @classmethod
    def from_events(cls, case_id: str, events: Iterable[Event]) -> "Trace":
        return cls(case_id, tuple(sorted(events, key=Event.sort_key)))

    @property
    def activities(self) -> tuple:
        return tuple(e.activity for e in self.events)

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class EventLog:
    """A multiset of traces keyed by case id; trace order is kept as given."""

    traces: tuple
    alphabet: frozenset = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        seen = set()
        labels = set()
        for t in self.traces:
            if t.case_id in seen:
                raise EventLogError(f"duplicate case id {t.case_id!r}")
            seen.add(t.case_id)
            labels.update(t.activities)
        object.__setattr__(self, "alphabet", frozenset(labels))

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "EventLog":
        """Group events by case id (first-appearance order) and sort each trace."""
        groups: dict = {}
        for e in events:
            groups.setdefault(e.case_id, []).append(e)
        return cls(tuple(Trace.from_events(cid, evs) for cid, evs in groups.items()))

    @classmethod
    def from_sequences(cls, sequences: Iterable[Iterable[str]], duration: float = 60.0,
                       gap: float = 0.0, prefix: str = "case") -> "EventLog":
        """Build a log from label sequences with constant durations (handy for tests)."""
        base = datetime(2024, 1, 1, tzinfo=timezone.utc)
        traces = []
        for k, seq in enumerate(sequences):
            cid = f"{prefix}_{k:05d}"
            t = base + timedelta(days=k)
            events = []
            for label in seq:
                end = t + timedelta(seconds=duration)
                events.append(Event(cid, label, t, end))
                t = end + timedelta(seconds=gap)
            traces.append(Trace(cid, tuple(events)))
        return cls(tuple(traces))

    def __len__(self):
        return len(self.traces)

    @property
    def num_events(self) -> int:
        return sum(len(t) for t in self.traces)

    def events(self):
        for t in self.traces:
            yield from t.events


def alphabet_of(log: EventLog) -> frozenset:
    return frozenset(a for t in log.traces for a in t.activities)


def project(log: EventLog, subset: Iterable[str]) -> EventLog:
    """Keep only events whose activity is in `subset`; drop traces left empty."""
    subset = frozenset(subset)
    unknown = subset - log.alphabet
    if unknown:
        raise EventLogError(f"labels not in log alphabet: {sorted(unknown)}")
    traces = []
    for t in log.traces:
        kept = tuple(e for e in t.events if e.activity in subset)
        if kept:
            traces.append(Trace(t.case_id, kept))
    return EventLog(tuple(traces))


def mean_duration(log: EventLog, activity: str) -> float:
    durations = [e.duration for e in log.events() if e.activity == activity]
    if not durations:
        raise EventLogError(f"activity {activity!r} does not occur in log")
    return sum(durations) / len(durations)


# -- timestamps ---------------------------------------------------------------

def parse_offset(text: str) -> timezone:
    """Parse '+HH:MM' / '-HH:MM' / 'Z' into a fixed-offset timezone."""
    text = text.strip()
    if text in ("Z", "z", "UTC"):
        return timezone.utc
    try:
        sign = -1 if text[0] == "-" else 1
        hh, mm = text.lstrip("+-").split(":")
        return timezone(sign * timedelta(hours=int(hh), minutes=int(mm)))
    except (ValueError, IndexError):
        raise EventLogError(f"malformed UTC offset {text!r}") from None


def parse_timestamp(text: str, default_offset: Optional[timezone] = None) -> datetime:
    """ISO-8601 to an aware UTC datetime truncated to milliseconds."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError:
        raise EventLogError(f"malformed timestamp {text!r}") from None
    if ts.tzinfo is None:
        if default_offset is None:
            raise EventLogError(f"timestamp {text!r} has no UTC offset")
        ts = ts.replace(tzinfo=default_offset)
    ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=ts.microsecond // 1000 * 1000)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat(timespec="milliseconds")


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    return source.read()


# -- CSV ----------------------------------------------------------------------

def parse_csv(source: Source, schema: Optional[Mapping[str, str]] = None,
              default_offset: Optional[timezone] = None) -> EventLog:
    """Read a CSV event log.

    ``schema`` maps the logical columns ``case_id``, ``activity``, ``start``
    and ``end`` to header names. Data rows are numbered from 1 in errors.
    """
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        cols.update(schema)
    try:
        text = _read_bytes(source).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise EventLogError(f"input is not UTF-8: {exc}") from None
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if not reader.fieldnames:
        raise EventLogError("empty file")
    missing = [cols[k] for k in ("case_id", "activity", "start", "end") if cols[k] not in reader.fieldnames]
    if missing:
        raise EventLogError(f"missing column(s): {', '.join(missing)}")

    events = []
    for row_no, row in enumerate(reader, start=1):
        try:
            case_id = row[cols["case_id"]]
            activity = row[cols["activity"]]
            if case_id is None or activity is None or row[cols["end"]] is None:
                raise EventLogError("too few fields")
            start = parse_timestamp(row[cols["start"]], default_offset)
            end = parse_timestamp(row[cols["end"]], default_offset)
            events.append(Event(case_id, activity, start, end))
        except EventLogError as exc:
            raise EventLogError(str(exc), row=row_no) from None
    if not events:
        raise EventLogError("empty file")
    return EventLog.from_events(events)


def write_csv(log: EventLog, dest: Union[str, os.PathLike, None] = None) -> bytes:
    """Serialize in the default schema; returns the bytes and writes them to `dest` if given."""
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case_id", "activity", "start", "end"])
    for e in log.events():
        w.writerow([e.case_id, e.activity, format_timestamp(e.start), format_timestamp(e.end)])
    data = buf.getvalue().encode("utf-8")
    if dest is not None:
        with open(dest, "wb") as fh:
            fh.write(data)
    return data


# -- XES subset ---------------------------------------------------------------

def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _attrs(elem) -> dict:
    return {c.get("key"): c.get("value") for c in elem if c.get("key") is not None}


def parse_xes_subset(source: Source, default_offset: Optional[timezone] = None) -> EventLog:
    """Read traces whose events carry concept:name and time:timestamp.

    A ``start`` transition is paired with the next ``complete`` of the same
    activity in the same trace; a lone ``complete`` is an instantaneous event.
    """
    try:
        root = ET.fromstring(_read_bytes(source))
    except ET.ParseError as exc:
        raise EventLogError(f"malformed XML: {exc}") from None

    events = []
    traces = [el for el in root if _local(el.tag) == "trace"]
    for t_idx, trace_el in enumerate(traces):
        case_id = _attrs(trace_el).get("concept:name") or f"trace_{t_idx}"
        open_starts = defaultdict(list)
        for ev_idx, ev_el in enumerate(el for el in trace_el if _local(el.tag) == "event"):
            attrs = _attrs(ev_el)
            label = attrs.get("concept:name")
            stamp = attrs.get("time:timestamp")
            if not label or stamp is None:
                raise EventLogError(f"trace {case_id!r} event {ev_idx}: missing concept:name or time:timestamp")
            ts = parse_timestamp(stamp, default_offset)
            transition = (attrs.get("lifecycle:transition") or "complete").lower()
            if transition == "start":
                open_starts[label].append(ts)
            elif transition == "complete":
                start = open_starts[label].pop(0) if open_starts[label] else ts
                try:
                    events.append(Event(case_id, label, start, ts))
                except EventLogError as exc:
                    raise EventLogError(f"trace {case_id!r} event {ev_idx}: {exc}") from None
            else:
                raise EventLogError(f"trace {case_id!r} event {ev_idx}: unsupported transition {transition!r}")
        unpaired = sorted(k for k, v in open_starts.items() if v)
        if unpaired:
            raise EventLogError(f"trace {case_id!r}: start without complete for {unpaired}")
    if not events:
        raise EventLogError("empty file")
    return EventLog.from_events(events)


def write_xes(log: EventLog, dest: Union[str, os.PathLike, None] = None) -> bytes:
    """Emit start/complete pairs (complete only for zero-duration events)."""
    root = ET.Element("log", {"xes.version": "1.0"})
    for t in log.traces:
        t_el = ET.SubElement(root, "trace")
        ET.SubElement(t_el, "string", key="concept:name", value=t.case_id)
        for e in t.events:
            stamps = [("complete", e.end)] if e.start == e.end else [("start", e.start), ("complete", e.end)]
            for transition, ts in stamps:
                ev = ET.SubElement(t_el, "event")
                ET.SubElement(ev, "string", key="concept:name", value=e.activity)
                ET.SubElement(ev, "string", key="lifecycle:transition", value=transition)
                ET.SubElement(ev, "date", key="time:timestamp", value=format_timestamp(ts))
    ET.indent(root)
    data = ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"
    if dest is not None:
        with open(dest, "wb") as fh:
            fh.write(data)
    return data
