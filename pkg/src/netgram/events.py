"""Network event taxonomy and the event -> character alphabet.

An alphabet file is line oriented::

    # comment
    !ports 20 21 22 80 443
    d DNS_QUERY:MX
    h HTTP_REQUEST:GET
    3 SIZE_REQ:Q3

Entries are tried in file order and the first matching one wins.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

from .errors import DuplicateCharacter, EmptyAlphabet, MalformedPredicate


class Kind(str, enum.Enum):
    FLOW = "FLOW"
    HTTP_REQUEST = "HTTP_REQUEST"
    HTTP_RESPONSE = "HTTP_RESPONSE"
    DNS_QUERY = "DNS_QUERY"
    DNS_RESPONSE = "DNS_RESPONSE"


class Protocol(str, enum.Enum):
    TCP = "TCP"
    UDP = "UDP"
    RAW = "RAW"


class HttpMethod(str, enum.Enum):
    POST = "POST"
    GET = "GET"
    HEAD = "HEAD"


class DnsRecord(str, enum.Enum):
    MX = "MX"
    NS = "NS"
    A = "A"
    PTR = "PTR"
    SOA = "SOA"
    CNAME = "CNAME"


RESPONSE_CLASSES = ("2xx", "3xx", "4xx", "5xx")

DEFAULT_PORTS = frozenset(
    {20, 21, 22, 25, 53, 80, 102, 110, 143, 389, 443, 465, 587, 636, 993, 995,
     6665, 6347, 6679, 6697, 8080}
)


@dataclass(frozen=True)
class NetworkEvent:
    """One timestamped observation. Fields that do not apply to ``kind`` are None."""

    timestamp: int
    kind: Kind
    protocol: Optional[Protocol] = None
    dest_port: Optional[int] = None
    dest_ip_is_new: Optional[bool] = None
    http_method: Optional[HttpMethod] = None
    status: Optional[int] = None
    payload_bytes: Optional[int] = None
    dns_record: Optional[DnsRecord] = None

    @property
    def response_class(self) -> Optional[str]:
        if self.status is None:
            return None
        return f"{self.status // 100}xx"


@dataclass(frozen=True)
class SizeQuartiles:
    q1: float
    q2: float
    q3: float

    def __post_init__(self):
        if not self.q1 <= self.q2 <= self.q3:
            raise ValueError(f"quartiles not ordered: {self.q1}, {self.q2}, {self.q3}")

    def bucket(self, size: float) -> int:
        """Quartile code in 1..4; upper bounds are inclusive."""
        if size <= self.q1:
            return 1
        if size <= self.q2:
            return 2
        if size <= self.q3:
            return 3
        return 4


# pseudo-kinds accepted in the config on top of the concrete Kind values
_DNS_ANY = "DNS"
_SIZE_KINDS = {"SIZE_REQ": (Kind.HTTP_REQUEST,),
               "SIZE_RESP": (Kind.HTTP_RESPONSE,),
               "SIZE": (Kind.HTTP_REQUEST, Kind.HTTP_RESPONSE)}
_QUARTILES = {"Q1": 1, "Q2": 2, "Q3": 3, "Q4": 4}


@dataclass(frozen=True)
class Predicate:
    kind: str
    qualifier: Optional[str] = None

    @classmethod
    def parse(cls, text: str) -> "Predicate":
        kind, _, qual = text.partition(":")
        kind = kind.strip().upper()
        qual = qual.strip() or None
        pred = cls(kind, qual)
        pred._validate(text)
        return pred

    @property
    def uses_size(self) -> bool:
        return self.kind in _SIZE_KINDS

    def _validate(self, text):
        k, q = self.kind, self.qualifier
        if k == Kind.FLOW.value:
            if q is None or q in Protocol.__members__ or q in ("NEW_IP", "WHITELIST_PORT"):
                return
            if q.startswith("PORT="):
                try:
                    port = int(q[5:])
                except ValueError:
                    port = -1
                if 0 <= port <= 65535:
                    return
        elif k == Kind.HTTP_REQUEST.value:
            if q is None or q in HttpMethod.__members__:
                return
        elif k == Kind.HTTP_RESPONSE.value:
            if q is None or q.lower() in RESPONSE_CLASSES:
                return
        elif k in (Kind.DNS_QUERY.value, Kind.DNS_RESPONSE.value, _DNS_ANY):
            if q is None or q in DnsRecord.__members__:
                return
        elif k in _SIZE_KINDS:
            if q in _QUARTILES:
                return
        raise MalformedPredicate(f"cannot parse predicate {text!r}")

    def matches(self, event: NetworkEvent, quartiles: Optional[SizeQuartiles],
                ports: frozenset) -> bool:
        k, q = self.kind, self.qualifier
        if k in _SIZE_KINDS:
            if event.kind not in _SIZE_KINDS[k] or event.payload_bytes is None:
                return False
            if quartiles is None:
                raise ValueError("size predicate evaluated without quartiles")
            return quartiles.bucket(event.payload_bytes) == _QUARTILES[q]
        if k == _DNS_ANY:
            if event.kind not in (Kind.DNS_QUERY, Kind.DNS_RESPONSE):
                return False
        elif event.kind.value != k:
            return False
        if q is None:
            return True
        if event.kind is Kind.FLOW:
            if q == "NEW_IP":
                return bool(event.dest_ip_is_new)
            if q == "WHITELIST_PORT":
                return event.dest_port in ports
            if q.startswith("PORT="):
                return event.dest_port == int(q[5:])
            return event.protocol is not None and event.protocol.value == q
        if event.kind is Kind.HTTP_REQUEST:
            return event.http_method is not None and event.http_method.value == q
        if event.kind is Kind.HTTP_RESPONSE:
            return event.response_class == q.lower()
        return event.dns_record is not None and event.dns_record.value == q

    def __str__(self):
        return self.kind if self.qualifier is None else f"{self.kind}:{self.qualifier}"


@dataclass(frozen=True)
class AlphabetMap:
    entries: tuple  # of (Predicate, char)
    ports: frozenset = field(default=DEFAULT_PORTS)

    @property
    def alphabet_size(self) -> int:
        return len(self.entries)

    @property
    def characters(self) -> str:
        return "".join(ch for _, ch in self.entries)

    @property
    def uses_size(self) -> bool:
        return any(p.uses_size for p, _ in self.entries)

    def predicate_for(self, ch: str) -> Predicate:
        for pred, c in self.entries:
            if c == ch:
                return pred
        raise KeyError(ch)

    def dumps(self) -> str:
        lines = ["!ports " + " ".join(str(p) for p in sorted(self.ports))]
        lines += [f"{ch} {pred}" for pred, ch in self.entries]
        return "\n".join(lines) + "\n"


def _check_char(ch, line_no):
    if len(ch) != 1 or not ch.isascii() or not ch.isalnum():
        raise MalformedPredicate(
            f"line {line_no}: character must be one ASCII letter or digit, got {ch!r}")


def load_alphabet(config_text: str) -> AlphabetMap:
    entries = []
    seen_chars = {}
    seen_preds = {}
    ports = DEFAULT_PORTS
    for line_no, raw in enumerate(config_text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("!ports"):
            try:
                ports = frozenset(int(p) for p in line.split()[1:])
            except ValueError:
                raise MalformedPredicate(f"line {line_no}: bad port list") from None
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MalformedPredicate(f"line {line_no}: expected '<char> <kind>[:<qualifier>]'")
        ch, pred_text = parts
        _check_char(ch, line_no)
        pred = Predicate.parse(pred_text)
        if ch in seen_chars:
            raise DuplicateCharacter(
                f"line {line_no}: {ch!r} already assigned on line {seen_chars[ch]}")
        if pred in seen_preds:
            # an exact repeat can never fire under first-match-wins
            raise MalformedPredicate(
                f"line {line_no}: {pred} repeats line {seen_preds[pred]}")
        seen_chars[ch] = line_no
        seen_preds[pred] = line_no
        entries.append((pred, ch))
    if not entries:
        raise EmptyAlphabet("alphabet config has no entries")
    return AlphabetMap(tuple(entries), ports)


def default_alphabet_text() -> str:
    return resources.files("netgram").joinpath("default_alphabet.txt").read_text("utf-8")


def default_alphabet() -> AlphabetMap:
    return load_alphabet(default_alphabet_text())


def classify_event(event: NetworkEvent, amap: AlphabetMap,
                   quartiles: Optional[SizeQuartiles] = None) -> Optional[str]:
    """Character of the first entry matching ``event``; None when unmapped."""
    for pred, ch in amap.entries:
        if pred.matches(event, quartiles, amap.ports):
            return ch
    return None


def canonical_event(pred: Predicate, timestamp: int = 0) -> NetworkEvent:
    """A representative event satisfying ``pred``, used to render documents back to traces."""
    k, q = pred.kind, pred.qualifier
    if k == Kind.FLOW.value:
        proto, port, new_ip = Protocol.TCP, 9, False
        if q in Protocol.__members__:
            proto = Protocol(q)
        elif q == "NEW_IP":
            new_ip = True
        elif q == "WHITELIST_PORT":
            port = 80
        elif q is not None:
            port = int(q[5:])
        return NetworkEvent(timestamp, Kind.FLOW, protocol=proto, dest_port=port,
                            dest_ip_is_new=new_ip)
    if k == Kind.HTTP_REQUEST.value:
        return NetworkEvent(timestamp, Kind.HTTP_REQUEST,
                            http_method=HttpMethod(q) if q else None)
    if k == Kind.HTTP_RESPONSE.value:
        status = 200 if q is None else int(q[0]) * 100
        return NetworkEvent(timestamp, Kind.HTTP_RESPONSE, status=status)
    if k in (Kind.DNS_QUERY.value, Kind.DNS_RESPONSE.value, _DNS_ANY):
        kind = Kind.DNS_RESPONSE if k == Kind.DNS_RESPONSE.value else Kind.DNS_QUERY
        return NetworkEvent(timestamp, kind, dns_record=DnsRecord(q) if q else None)
    raise ValueError(f"no canonical event for size predicate {pred}")


def iter_size_events(events: Iterable[NetworkEvent]):
    for ev in events:
        if ev.kind in (Kind.HTTP_REQUEST, Kind.HTTP_RESPONSE) and ev.payload_bytes is not None:
            yield ev
