"""Behavioral documents: one character string per sample."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from .errors import NoSizedEvents
from .events import AlphabetMap, SizeQuartiles, classify_event, iter_size_events
from .ingest import Corpus, SampleTrace

__all__ = ["BehavioralDocument", "SizeQuartiles", "compute_quartiles", "build_document",
           "build_corpus_documents", "read_documents", "write_documents"]


@dataclass(frozen=True)
class BehavioralDocument:
    sample_id: str
    label: str
    text: str


def compute_quartiles(traces: Iterable[SampleTrace]) -> SizeQuartiles:
    """25/50/75th percentiles (linear interpolation) of every sized request and
    response across ``traces``."""
    if isinstance(traces, Corpus):
        traces = traces.traces
    sizes = [ev.payload_bytes for t in traces for ev in iter_size_events(t.events)]
    if not sizes:
        raise NoSizedEvents("no request/response carries a payload size")
    q1, q2, q3 = np.percentile(np.asarray(sizes, dtype=float), [25, 50, 75])
    return SizeQuartiles(float(q1), float(q2), float(q3))


def build_document(trace: SampleTrace, amap: AlphabetMap,
                   quartiles: Optional[SizeQuartiles] = None) -> BehavioralDocument:
    chars = []
    for ev in trace.events:
        ch = classify_event(ev, amap, quartiles)
        if ch is not None:
            chars.append(ch)
    return BehavioralDocument(trace.sample_id, trace.family, "".join(chars))


def build_corpus_documents(corpus: Corpus, amap: AlphabetMap):
    """Two passes: shared quartiles over the whole corpus, then one document
    per trace. Returns ``(documents, quartiles)``; quartiles is None when the
    alphabet has no size entries."""
    quartiles = compute_quartiles(corpus.traces) if amap.uses_size else None
    docs = [build_document(t, amap, quartiles) for t in corpus.traces]
    return docs, quartiles


def write_documents(docs: Iterable[BehavioralDocument], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_NONNUMERIC, lineterminator="\n")
        w.writerow(["sample_id", "label", "text"])
        for d in docs:
            w.writerow([d.sample_id, d.label, d.text])


def read_documents(path) -> List[BehavioralDocument]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if header != ["sample_id", "label", "text"]:
            raise ValueError(f"{path}: expected header sample_id,label,text, got {header}")
        return [BehavioralDocument(*row) for row in reader if row]
