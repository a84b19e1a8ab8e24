"""n-gram tokens, the observed-gram vocabulary and sparse count features."""

from __future__ import annotations

import enum
import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import EmptyVocabulary, SpecMismatch


class GramMode(str, enum.Enum):
    FIXED = "fixed"
    COMBINED = "combined"
    SKIP = "skip"


@dataclass(frozen=True)
class GramSpec:
    mode: GramMode = GramMode.FIXED
    n: int = 1
    skip: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", GramMode(self.mode))
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.mode is GramMode.SKIP:
            if self.n != 2:
                raise ValueError("skip-grams are bigrams (n=2)")
            if self.skip is None or self.skip < 0:
                raise ValueError("skip-gram spec needs skip >= 0")
        elif self.skip is not None:
            raise ValueError(f"{self.mode.value} spec takes no skip")

    @classmethod
    def fixed(cls, n):
        return cls(GramMode.FIXED, n)

    @classmethod
    def combined(cls, n):
        return cls(GramMode.COMBINED, n)

    @classmethod
    def skipgram(cls, skip):
        return cls(GramMode.SKIP, 2, skip)

    def __str__(self):
        if self.mode is GramMode.SKIP:
            return f"skip:{self.skip}"
        return f"{self.mode.value}:{self.n}"

    @classmethod
    def parse(cls, text: str) -> "GramSpec":
        mode, _, arg = text.partition(":")
        if mode == "skip":
            return cls.skipgram(int(arg))
        return cls(GramMode(mode), int(arg))


def _fixed(text: str, n: int) -> List[str]:
    return [text[i:i + n] for i in range(len(text) - n + 1)]


def tokenize(text: str, spec: GramSpec) -> List[str]:
    if spec.mode is GramMode.FIXED:
        return _fixed(text, spec.n)
    if spec.mode is GramMode.COMBINED:
        out = []
        for n in range(1, spec.n + 1):
            out.extend(_fixed(text, n))
        return out
    out = []
    L = len(text)
    for i in range(L):
        for j in range(spec.skip + 1):
            k = i + 1 + j
            if k >= L:
                break
            out.append(text[i] + text[k])
    return out


def _gram_order(g):
    return (len(g), g)


@dataclass(frozen=True)
class Vocabulary:
    grams: Tuple[str, ...]
    spec: GramSpec
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {g: i for i, g in enumerate(self.grams)})

    def __len__(self):
        return len(self.grams)

    def __contains__(self, gram):
        return gram in self.index

    def digest(self) -> str:
        h = hashlib.sha256(str(self.spec).encode())
        for g in self.grams:
            h.update(b"\0" + g.encode("utf-8"))
        return h.hexdigest()

    def subset(self, columns: Sequence[int]) -> "Vocabulary":
        """Vocabulary restricted to ``columns`` (re-sorted)."""
        return Vocabulary(tuple(sorted((self.grams[c] for c in columns), key=_gram_order)),
                          self.spec)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#spec\t{self.spec}\n")
            for i, g in enumerate(self.grams):
                fh.write(f"{i}\t{g}\n")

    @classmethod
    def read(cls, path) -> "Vocabulary":
        grams = []
        spec = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                col, _, gram = line.partition("\t")
                if col == "#spec":
                    spec = GramSpec.parse(gram)
                    continue
                if int(col) != len(grams):
                    raise ValueError(f"{path}: column ids must be 0..n-1 in order")
                grams.append(gram)
        if spec is None:
            raise ValueError(f"{path}: missing #spec line")
        return cls(tuple(grams), spec)


def fit_vocabulary(documents, spec: GramSpec) -> Vocabulary:
    seen = set()
    for doc in documents:
        seen.update(tokenize(_text(doc), spec))
    if not seen:
        raise EmptyVocabulary("no grams observed in any document")
    return Vocabulary(tuple(sorted(seen, key=_gram_order)), spec)


def _text(doc):
    return doc if isinstance(doc, str) else doc.text


@dataclass
class FeatureMatrix:
    vocabulary: Vocabulary
    X: sp.csr_matrix
    y: np.ndarray            # +1 / -1
    sample_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.sample_ids:
            self.sample_ids = tuple(str(i) for i in range(self.X.shape[0]))

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def rows(self):
        """Yield each row as a list of ``(column, count)`` pairs, columns ascending."""
        X = self.X
        for i in range(X.shape[0]):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            yield list(zip(X.indices[lo:hi].tolist(), X.data[lo:hi].tolist()))

    def take_rows(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(self.vocabulary, self.X[idx], self.y[idx],
                             tuple(self.sample_ids[i] for i in idx))

    def take_columns(self, columns: Sequence[int]) -> "FeatureMatrix":
        """Restrict to ``columns``; the result's columns follow vocabulary order."""
        sub = self.vocabulary.subset(columns)
        order = [self.vocabulary.index[g] for g in sub.grams]
        X = self.X[:, order].tocsr()
        X.sort_indices()
        return FeatureMatrix(sub, X, self.y, self.sample_ids)


def featurize(documents, vocabulary: Vocabulary, spec: GramSpec,
              positive_family: Optional[str] = None, tf_normalize: bool = False) -> FeatureMatrix:
    """Count each vocabulary gram per document. Grams missing from the
    vocabulary are dropped. Labels are +1 for ``positive_family``, else -1."""
    if spec != vocabulary.spec:
        raise SpecMismatch(f"vocabulary fitted with {vocabulary.spec}, featurizing with {spec}")
    index = vocabulary.index
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    labels = []
    ids = []
    for doc in documents:
        counts = Counter(tokenize(_text(doc), spec))
        cols = sorted(index[g] for g in counts if g in index)
        row = [counts[vocabulary.grams[c]] for c in cols]
        if tf_normalize and row:
            total = float(sum(row))
            row = [v / total for v in row]
        indices.extend(cols)
        data.extend(row)
        indptr.append(len(indices))
        if isinstance(doc, str):
            labels.append(-1)
            ids.append(str(len(ids)))
        else:
            labels.append(1 if doc.label == positive_family else -1)
            ids.append(doc.sample_id)
    dtype = np.float64 if tf_normalize else np.int64
    X = sp.csr_matrix((np.asarray(data, dtype=dtype), np.asarray(indices, dtype=np.int32),
                       np.asarray(indptr, dtype=np.int64)),
                      shape=(len(indptr) - 1, len(vocabulary)))
    return FeatureMatrix(vocabulary, X, np.asarray(labels, dtype=np.int64), tuple(ids))


def write_libsvm(matrix: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(matrix.y.tolist(), matrix.rows()):
            parts = ["+1" if label > 0 else "-1"]
            parts += [f"{c}:{_num(v)}" for c, v in row]
            fh.write(" ".join(parts) + "\n")


def _num(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def read_libsvm(path, vocabulary: Vocabulary) -> FeatureMatrix:
    indptr, indices, data, labels = [0], [], [], []
    integral = True
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            labels.append(1 if float(parts[0]) > 0 else -1)
            last = -1
            for tok in parts[1:]:
                c, _, v = tok.partition(":")
                c = int(c)
                if c <= last or c >= len(vocabulary):
                    raise ValueError(f"{path}:{line_no}: bad column {c}")
                last = c
                val = float(v)
                integral &= val.is_integer()
                indices.append(c)
                data.append(val)
            indptr.append(len(indices))
    dtype = np.int64 if integral else np.float64
    X = sp.csr_matrix((np.asarray(data, dtype=dtype), np.asarray(indices, dtype=np.int32),
                       np.asarray(indptr, dtype=np.int64)),
                      shape=(len(labels), len(vocabulary)))
    return FeatureMatrix(vocabulary, X, np.asarray(labels, dtype=np.int64))
