"""Seeded synthetic corpora whose family signal lives only in event order.

:func:`matched_pair` builds two Markov chains sharing one stationary
distribution, so documents from either family have the same expected
character frequencies; the families differ only in which characters tend
to follow which.  Family B mixes A's pair-flow matrix ``F = diag(pi) P``
with its transpose, i.e. with A run backwards, which keeps both the row
and column marginals of ``F`` (hence ``pi``) fixed.

With ``order=2`` the two families also share all bigram statistics and
differ only in trigrams.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .documents import BehavioralDocument
from .errors import BadStrength
from .events import AlphabetMap, canonical_event, classify_event, default_alphabet
from .ingest import SampleTrace

# Weight of the planted cycle in the base chain. Weaker cycles make long
# fixed grams too sparse to generalise (fixed n>=7 loses accuracy).
CYCLE_WEIGHT = 0.85
# order 2 needs spread-out predecessor/successor marginals, not a dominant cycle
SECOND_ORDER_CYCLE_WEIGHT = 0.5


@dataclass
class FamilySpec:
    name: str
    transition_matrix: np.ndarray
    stationary: np.ndarray
    doc_length_mean: int = 60
    samples: int = 500
    # P(next | prev2, prev1), shape (l, l, l); None for a first-order chain
    second_order: Optional[np.ndarray] = None
    pair_flow: Optional[np.ndarray] = None
    symbols: str = ""

    def __post_init__(self):
        P = np.asarray(self.transition_matrix, dtype=np.float64)
        self.transition_matrix = P
        self.stationary = np.asarray(self.stationary, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("transition matrix rows must be probability vectors")
        if not np.allclose(self.stationary @ P, self.stationary, atol=1e-6):
            raise ValueError("stationary is not invariant under the transition matrix")
        if not self.symbols:
            self.symbols = default_symbols(self.alphabet_size)
        if len(self.symbols) != self.alphabet_size:
            raise ValueError("need one symbol per state")

    @property
    def alphabet_size(self):
        return self.transition_matrix.shape[0]


def default_symbols(size: int) -> str:
    if size > 26:
        raise ValueError("default symbols cover at most 26 states")
    return string.ascii_lowercase[:size]


def stationary_distribution(P) -> np.ndarray:
    """Left Perron eigenvector of ``P``, normalised to sum 1."""
    vals, vecs = np.linalg.eig(np.asarray(P, dtype=np.float64).T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    v = np.abs(v)
    return v / v.sum()


def _first_order_base(size, rng, cycle_weight):
    perm = rng.permutation(size)
    cycle = np.zeros((size, size))
    cycle[perm, np.roll(perm, -1)] = 1.0
    noise = rng.dirichlet(np.ones(size), size=size)
    P = cycle_weight * cycle + (1.0 - cycle_weight) * noise
    pi = stationary_distribution(P)
    return P, pi


def _northwest_corner(rows, cols):
    """Greedy coupling of two equal-mass marginals (monotone transport plan)."""
    rows, cols = rows.copy(), cols.copy()
    out = np.zeros((len(rows), len(cols)))
    i = j = 0
    while i < len(rows) and j < len(cols):
        m = min(rows[i], cols[j])
        out[i, j] = m
        rows[i] -= m
        cols[j] -= m
        if rows[i] <= cols[j]:
            i += 1
        else:
            j += 1
    return out


def _plant_trigrams(T0, rng):
    """Replace each middle-symbol slice of the joint trigram table, which is
    independent in the base chain, by a maximally dependent coupling with the
    same marginals. Both bigram marginals are unchanged."""
    T = np.empty_like(T0)
    size = T0.shape[0]
    for b in range(size):
        M = T0[:, b, :]
        pa, pc = rng.permutation(size), rng.permutation(size)
        plan = _northwest_corner(M.sum(axis=1)[pa], M.sum(axis=0)[pc])
        T[pa[:, None], b, pc[None, :]] = plan
    return T


def _conditional(T, F):
    with np.errstate(invalid="ignore", divide="ignore"):
        C = T / F[:, :, None]
    # unreachable pairs: fall back to a uniform next-state
    C[~np.isfinite(C).all(axis=2)] = 1.0 / T.shape[0]
    return C / C.sum(axis=2, keepdims=True)


def matched_pair(alphabet_size: int, seed: int, strength: float, order: int = 1,
                 doc_length_mean: int = 60, samples: int = 500,
                 names=("A", "B"), cycle_weight: float | None = None):
    if not 0.0 < strength <= 1.0:
        raise BadStrength(f"strength must lie in (0, 1], got {strength}")
    if alphabet_size < 2:
        raise ValueError("alphabet_size must be >= 2")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    rng = np.random.default_rng(seed)
    if cycle_weight is None:
        cycle_weight = CYCLE_WEIGHT if order == 1 else SECOND_ORDER_CYCLE_WEIGHT
    if not 0.0 <= cycle_weight < 1.0:
        raise ValueError("cycle_weight must lie in [0, 1)")
    P, pi = _first_order_base(alphabet_size, rng, cycle_weight)
    F = pi[:, None] * P
    if order == 1:
        F_b = (1.0 - strength) * F + strength * F.T
        P_b = F_b / pi[:, None]
        P_b /= P_b.sum(axis=1, keepdims=True)
        a = FamilySpec(names[0], P, pi, doc_length_mean, samples, pair_flow=F)
        b = FamilySpec(names[1], P_b, pi, doc_length_mean, samples, pair_flow=F_b)
        return a, b
    T0 = F[:, :, None] * P[None, :, :]
    T_a = _plant_trigrams(T0, rng)
    T_b = (1.0 - strength) * T_a + strength * T0
    a = FamilySpec(names[0], P, pi, doc_length_mean, samples,
                   second_order=_conditional(T_a, F), pair_flow=F)
    b = FamilySpec(names[1], P, pi, doc_length_mean, samples,
                   second_order=_conditional(T_b, F), pair_flow=F)
    return a, b


def _draw(cdf, u):
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


def _sample_text(spec: FamilySpec, length: int, rng) -> str:
    u = rng.random(length)
    syms = spec.symbols
    states = []
    if spec.second_order is None:
        cdf = np.cumsum(spec.transition_matrix, axis=1)
        s = _draw(np.cumsum(spec.stationary), u[0])
        states.append(s)
        for i in range(1, length):
            s = _draw(cdf[s], u[i])
            states.append(s)
    else:
        size = spec.alphabet_size
        flat = _draw(np.cumsum(spec.pair_flow.ravel()), u[0])
        states.extend(divmod(flat, size))
        cdf = np.cumsum(spec.second_order, axis=2)
        for i in range(2, length):
            states.append(_draw(cdf[states[-2], states[-1]], u[i]))
        states = states[:length]
    return "".join(syms[s] for s in states)


def _lengths(mean, count, rng):
    base = mean // 2
    extra = rng.geometric(1.0 / (mean - base), size=count) if mean - base > 0 else \
        np.ones(count, dtype=np.int64)
    return base + extra


def generate_corpus(specs: Sequence[FamilySpec], seed: int) -> List[BehavioralDocument]:
    """``spec.samples`` documents per family, lengths ``mean//2 + Geometric``
    (mean ``doc_length_mean``), each started from the stationary law."""
    if not specs:
        raise ValueError("no family specs")
    docs = []
    children = np.random.SeedSequence(seed).spawn(len(specs))
    for spec, child in zip(specs, children):
        rng = np.random.default_rng(child)
        for i, length in enumerate(_lengths(spec.doc_length_mean, spec.samples, rng)):
            docs.append(BehavioralDocument(f"{spec.name}-{i:05d}", spec.name,
                                           _sample_text(spec, int(length), rng)))
    return docs


def symbol_alphabet(symbols: str, base: Optional[AlphabetMap] = None) -> AlphabetMap:
    """Assign ``symbols`` to the non-size entries of ``base`` in file order, so
    rendered traces rebuild into the same documents."""
    base = base or default_alphabet()
    preds = [p for p, _ in base.entries if not p.uses_size]
    if len(symbols) > len(preds):
        raise ValueError(f"{len(symbols)} symbols but only {len(preds)} non-size events")
    return AlphabetMap(tuple(zip(preds, symbols)), base.ports)


def documents_to_traces(docs: Sequence[BehavioralDocument], amap: AlphabetMap,
                        step_us: int = 1000) -> List[SampleTrace]:
    traces = []
    cache = {}
    for doc in docs:
        events = []
        for i, ch in enumerate(doc.text):
            if ch not in cache:
                pred = amap.predicate_for(ch)
                ev = canonical_event(pred)
                if classify_event(ev, amap) != ch:
                    raise ValueError(f"{ch!r} is shadowed by an earlier alphabet entry")
                cache[ch] = pred
            events.append(canonical_event(cache[ch], timestamp=i * step_us))
        traces.append(SampleTrace(doc.sample_id, doc.label, tuple(events)))
    return traces
