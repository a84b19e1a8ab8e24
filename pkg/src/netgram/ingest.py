"""Reading per-sample JSONL event logs and the labels CSV into a corpus."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

from .errors import (DuplicateSampleId, EmptyCorpus, MalformedLine, MissingLabel,
                     NegativeTimestamp, UnknownKind)
from .events import DnsRecord, HttpMethod, Kind, NetworkEvent, Protocol

log = logging.getLogger(__name__)

NEGATIVE = "NEGATIVE"

_ALLOWED_KEYS = {
    Kind.FLOW: {"proto", "port", "new_ip"},
    Kind.HTTP_REQUEST: {"method", "bytes"},
    Kind.HTTP_RESPONSE: {"status", "bytes"},
    Kind.DNS_QUERY: {"dns"},
    Kind.DNS_RESPONSE: {"dns"},
}


@dataclass(frozen=True)
class SampleTrace:
    sample_id: str
    family: str
    events: tuple

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class Corpus:
    traces: tuple
    positive_family: str

    def __len__(self):
        return len(self.traces)

    def is_positive(self, trace: SampleTrace) -> bool:
        return trace.family == self.positive_family

    def class_counts(self):
        pos = sum(1 for t in self.traces if self.is_positive(t))
        return pos, len(self.traces) - pos


def _enum(cls, value, line_no, field_name):
    try:
        return cls(value)
    except ValueError:
        raise MalformedLine(line_no, f"bad {field_name} {value!r}") from None


def _int(value, line_no, field_name, lo=0, hi=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedLine(line_no, f"{field_name} must be an integer")
    if value < lo or (hi is not None and value > hi):
        raise MalformedLine(line_no, f"{field_name} {value} out of range")
    return value


def parse_event(record: dict, line_no: int) -> NetworkEvent:
    if not isinstance(record, dict):
        raise MalformedLine(line_no, "record is not a JSON object")
    if "kind" not in record or "t" not in record:
        raise MalformedLine(line_no, "missing 't' or 'kind'")
    try:
        kind = Kind(record["kind"])
    except ValueError:
        raise UnknownKind(line_no, f"unknown kind {record['kind']!r}") from None
    t = record["t"]
    if isinstance(t, bool) or not isinstance(t, int):
        raise MalformedLine(line_no, "'t' must be an integer")
    if t < 0:
        raise NegativeTimestamp(line_no, f"negative timestamp {t}")
    extra = set(record) - {"t", "kind"} - _ALLOWED_KEYS[kind]
    if extra:
        raise MalformedLine(line_no, f"keys {sorted(extra)} not valid for {kind.value}")

    kw = {}
    if kind is Kind.FLOW:
        if "proto" in record:
            kw["protocol"] = _enum(Protocol, record["proto"], line_no, "proto")
        if "port" in record:
            kw["dest_port"] = _int(record["port"], line_no, "port", 0, 65535)
        if "new_ip" in record:
            if not isinstance(record["new_ip"], bool):
                raise MalformedLine(line_no, "new_ip must be a boolean")
            kw["dest_ip_is_new"] = record["new_ip"]
    elif kind is Kind.HTTP_REQUEST:
        if "method" in record:
            kw["http_method"] = _enum(HttpMethod, record["method"], line_no, "method")
    elif kind is Kind.HTTP_RESPONSE:
        if "status" in record:
            kw["status"] = _int(record["status"], line_no, "status", 200, 599)
    else:
        if "dns" in record:
            kw["dns_record"] = _enum(DnsRecord, record["dns"], line_no, "dns")
    if "bytes" in record:
        kw["payload_bytes"] = _int(record["bytes"], line_no, "bytes")
    return NetworkEvent(t, kind, **kw)


def event_to_record(ev: NetworkEvent) -> dict:
    rec = {"t": ev.timestamp, "kind": ev.kind.value}
    if ev.protocol is not None:
        rec["proto"] = ev.protocol.value
    if ev.dest_port is not None:
        rec["port"] = ev.dest_port
    if ev.dest_ip_is_new is not None:
        rec["new_ip"] = ev.dest_ip_is_new
    if ev.http_method is not None:
        rec["method"] = ev.http_method.value
    if ev.status is not None:
        rec["status"] = ev.status
    if ev.payload_bytes is not None:
        rec["bytes"] = ev.payload_bytes
    if ev.dns_record is not None:
        rec["dns"] = ev.dns_record.value
    return rec


def read_trace(stream: Iterable[str], sample_id: str = "", family: str = NEGATIVE) -> SampleTrace:
    """Parse a JSONL event log. Blank lines are skipped; events are sorted by
    timestamp, keeping file order on ties."""
    events = []
    for line_no, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from None
        events.append(parse_event(record, line_no))
    events.sort(key=lambda e: e.timestamp)
    return SampleTrace(sample_id, family, tuple(events))


def write_trace(trace: SampleTrace, stream: TextIO) -> None:
    for ev in trace.events:
        stream.write(json.dumps(event_to_record(ev), separators=(",", ":")) + "\n")


def read_labels(path) -> dict:
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row_no, row in enumerate(reader, 1):
            if not row or (row_no == 1 and [c.strip() for c in row[:2]] == ["sample_id", "family"]):
                continue
            if len(row) < 2:
                raise MalformedLine(row_no, "labels row needs sample_id,family")
            sid, fam = row[0].strip(), row[1].strip()
            if sid in labels and labels[sid] != fam:
                raise DuplicateSampleId(f"conflicting labels for {sid!r}")
            labels[sid] = fam
    return labels


def write_labels(traces: Iterable[SampleTrace], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "family"])
        for t in traces:
            w.writerow([t.sample_id, t.family])


def read_corpus(directory, labels_file, positive_family: str) -> Corpus:
    """Every ``*.jsonl`` below ``directory`` is one sample, named by its file stem."""
    labels = read_labels(labels_file)
    paths = sorted(Path(directory).rglob("*.jsonl"))
    if not paths:
        raise EmptyCorpus(f"no .jsonl traces under {directory}")
    traces = []
    seen = {}
    for path in paths:
        sid = path.stem
        if sid in seen:
            raise DuplicateSampleId(f"{sid!r} in both {seen[sid]} and {path}")
        seen[sid] = path
        if sid not in labels:
            raise MissingLabel(f"no label for sample {sid!r}")
        with open(path, encoding="utf-8") as fh:
            try:
                traces.append(read_trace(fh, sid, labels[sid]))
            except MalformedLine as exc:
                raise type(exc)(exc.line_no, f"{path.name}: {exc.reason}") from None
    corpus = Corpus(tuple(traces), positive_family)
    pos, neg = corpus.class_counts()
    log.info("read %d traces: %d %s, %d negative", len(traces), pos, positive_family, neg)
    return corpus
