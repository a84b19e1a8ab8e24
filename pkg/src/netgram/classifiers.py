"""Linear SVM (squared hinge, primal SGD), k-nearest neighbours and a
gain-ratio decision tree over sparse count rows.

Every model exposes ``predict(X) -> {+1,-1}`` and ``scores(X)``; rows are
scipy CSR matrices (or anything ``scipy.sparse.csr_matrix`` accepts).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numba
import numpy as np
import scipy.sparse as sp

from .errors import (DimensionMismatch, EmptyTrainingSet, KTooLarge, NonPositiveC,
                     SingleClassTraining, VocabularyMismatch)

MODEL_FORMAT = "netgram-model"
MODEL_VERSION = 1


def _as_csr(X, n_features=None):
    if not sp.issparse(X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionMismatch(f"rows have {X.shape[1]} columns, model expects {n_features}")
    return X


def _labels(y):
    y = np.asarray(y, dtype=np.int64)
    if not np.isin(y, (-1, 1)).all():
        raise ValueError("labels must be +1/-1")
    return y


# ---------------------------------------------------------------- SVM

@numba.njit(cache=True)
def _objective(indptr, indices, data, y, w, b, C):
    loss = 0.0
    for i in range(len(y)):
        s = b
        for p in range(indptr[i], indptr[i + 1]):
            s += w[indices[p]] * data[p]
        xi = 1.0 - y[i] * s
        if xi > 0.0:
            loss += xi * xi
    return 0.5 * np.dot(w, w) + C * loss


@numba.njit(cache=True)
def _sgd(indptr, indices, data, y, perms, C, lam, t0, n_features):
    w = np.zeros(n_features)
    b = 0.0
    best = _objective(indptr, indices, data, y, w, b, C)
    trace = np.empty(perms.shape[0] + 1)
    trace[0] = best
    v = np.zeros(n_features)
    t = 0
    for epoch in range(perms.shape[0]):
        v[:] = w
        scale = 1.0
        bb = b
        for i in perms[epoch]:
            t += 1
            eta = 1.0 / (lam * (t + t0))
            s = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                s += v[indices[p]] * data[p]
            margin = y[i] * (scale * s + bb)
            scale *= 1.0 - eta * lam
            if margin < 1.0:
                g = eta * 2.0 * (1.0 - margin) * y[i]
                for p in range(indptr[i], indptr[i + 1]):
                    v[indices[p]] += g * data[p] / scale
                bb += g
            if scale < 1e-9:
                v *= scale
                scale = 1.0
        cand = v * scale
        obj = _objective(indptr, indices, data, y, cand, bb, C)
        # an epoch that raises the objective is discarded
        if obj <= best:
            w = cand
            b = bb
            best = obj
        trace[epoch + 1] = best
    return w, b, trace


@dataclass
class SvmModel:
    w: np.ndarray
    b: float
    C: float
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    kind = "svm"

    @property
    def n_features(self):
        return len(self.w)

    def scores(self, X):
        X = _as_csr(X, self.n_features)
        return X @ self.w + self.b

    def predict(self, X):
        return np.where(self.scores(X) >= 0.0, 1, -1)

    def params(self):
        return {"C": self.C}

    def payload(self):
        return {"w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_payload(cls, params, payload):
        return cls(np.asarray(payload["w"], dtype=np.float64), float(payload["b"]),
                   float(params["C"]))


def _canonical_order(X, y):
    keys = []
    for i in range(X.shape[0]):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        keys.append((int(y[i]), X.indices[lo:hi].tobytes(), X.data[lo:hi].tobytes()))
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


def svm_train(X, y, C: float = 0.01, epochs: int = 30, seed: int = 0) -> SvmModel:
    """Minimise ``0.5*|w|^2 + C * sum(max(0, 1 - y(w.x + b))^2)``.

    Seeded SGD with step ``1/(lam*(t + t0))``, ``lam = 1/(C*m)``; ``t0``
    caps the first step at the inverse of the largest per-sample curvature.
    Rows are put in a canonical order before shuffling, so the result does
    not depend on the order rows were supplied in.
    """
    if not C > 0:
        raise NonPositiveC(f"C must be positive, got {C}")
    X = _as_csr(X)
    y = _labels(y)
    m = X.shape[0]
    if m == 0:
        raise EmptyTrainingSet("no training rows")
    if len(np.unique(y)) < 2:
        raise SingleClassTraining("SVM training needs both labels present")
    order = _canonical_order(X, y)
    X = X[order]
    y = y[order].astype(np.float64)
    lam = 1.0 / (C * m)
    sq_norms = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    t0 = (lam + 2.0 * (sq_norms.max() + 1.0)) / lam
    rng = np.random.default_rng(seed)
    perms = np.stack([rng.permutation(m) for _ in range(epochs)]) if epochs else \
        np.empty((0, m), dtype=np.int64)
    w, b, trace = _sgd(X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data, y,
                       perms.astype(np.int64), float(C), lam, t0, X.shape[1])
    return SvmModel(w, float(b), float(C), trace)


def svm_objective(model: SvmModel, X, y) -> float:
    X = _as_csr(X, model.n_features)
    return float(_objective(X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data,
                            _labels(y).astype(np.float64), model.w, model.b, model.C))


def svm_predict(model: SvmModel, row):
    """Label and margin for one row given as ``[(column, value), ...]``."""
    margin = model.b
    for col, val in row:
        if not 0 <= col < model.n_features:
            raise DimensionMismatch(f"column {col} outside 0..{model.n_features - 1}")
        margin += model.w[col] * val
    return (1 if margin >= 0.0 else -1), float(margin)


# ---------------------------------------------------------------- kNN

@dataclass
class KnnModel:
    X: sp.csr_matrix
    y: np.ndarray
    k: int = 5

    kind = "knn"

    @property
    def n_features(self):
        return self.X.shape[1]

    def neighbours(self, X):
        """Indices of the k nearest stored rows per query, nearest first;
        equal distances resolve to the lower stored index."""
        Q = _as_csr(X, self.n_features)
        qn = np.asarray(Q.multiply(Q).sum(axis=1)).ravel()
        sn = np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel()
        d2 = qn[:, None] + sn[None, :] - 2.0 * (Q @ self.X.T).toarray()
        np.maximum(d2, 0.0, out=d2)
        return np.argsort(d2, axis=1, kind="stable")[:, :self.k]

    def scores(self, X):
        """Vote balance: (#positive - #negative) among the k neighbours."""
        return self.y[self.neighbours(X)].sum(axis=1).astype(np.float64)

    def predict(self, X):
        return np.where(self.scores(X) > 0, 1, -1)

    def params(self):
        return {"k": self.k}

    def payload(self):
        rows = []
        for i in range(self.X.shape[0]):
            lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
            rows.append([self.X.indices[lo:hi].tolist(), self.X.data[lo:hi].tolist()])
        return {"n_features": self.n_features, "rows": rows, "y": self.y.tolist()}

    @classmethod
    def from_payload(cls, params, payload):
        indptr, indices, data = [0], [], []
        for cols, vals in payload["rows"]:
            indices.extend(cols)
            data.extend(vals)
            indptr.append(len(indices))
        X = sp.csr_matrix((np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32),
                           np.asarray(indptr)), shape=(len(payload["rows"]), payload["n_features"]))
        return cls(X, np.asarray(payload["y"], dtype=np.int64), int(params["k"]))


def knn_train(X, y, k: int = 5) -> KnnModel:
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be a positive odd integer, got {k}")
    X = _as_csr(X)
    y = _labels(y)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    if k > X.shape[0]:
        raise KTooLarge(f"k={k} exceeds the {X.shape[0]} stored rows")
    return KnnModel(X, y, k)


def knn_predict(model: KnnModel, row):
    return int(model.predict(_row_to_csr(row, model.n_features))[0])


def _row_to_csr(row, n_features):
    if sp.issparse(row) or isinstance(row, np.ndarray):
        return _as_csr(row, n_features)
    cols = [c for c, _ in row]
    if cols and (min(cols) < 0 or max(cols) >= n_features):
        raise DimensionMismatch(f"column outside 0..{n_features - 1}")
    return sp.csr_matrix(([v for _, v in row], ([0] * len(cols), cols)),
                         shape=(1, n_features), dtype=np.float64)


# ---------------------------------------------------------------- tree

@dataclass
class Node:
    label: int
    column: int = -1
    threshold: float = 0.0
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self):
        return self.left is None

    def depth(self):
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self):
        if self.is_leaf:
            return {"label": self.label}
        return {"label": self.label, "column": self.column, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if "column" not in d:
            return cls(int(d["label"]))
        return cls(int(d["label"]), int(d["column"]), float(d["threshold"]),
                   cls.from_dict(d["left"]), cls.from_dict(d["right"]))


def _entropy(p):
    """Binary entropy in bits, elementwise; 0*log0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    m = (p > 0) & (p < 1)
    q = p[m]
    out[m] = -(q * np.log2(q) + (1 - q) * np.log2(1 - q))
    return out


def _majority(y):
    return 1 if (y > 0).sum() * 2 >= len(y) else -1


_MIN_GAIN = 1e-12


def best_split(Xd, y):
    """(column, threshold, gain_ratio) maximising gain ratio over midpoints
    between sorted distinct values, or None when no split has positive gain.
    Ties go to the lowest column, then the lowest threshold."""
    n, F = Xd.shape
    if n < 2 or F == 0:
        return None
    order = np.argsort(Xd, axis=0, kind="stable")
    xs = np.take_along_axis(Xd, order, axis=0)
    pos = (y[order] > 0).astype(np.int64)
    cum = np.cumsum(pos, axis=0)[:-1]              # positives left of split i|i+1
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    total_pos = cum[-1] + pos[-1]
    h_parent = _entropy(total_pos[0] / n)
    h_left = _entropy(cum / n_left)
    h_right = _entropy((total_pos[None, :] - cum) / n_right)
    gain = h_parent - (n_left * h_left + n_right * h_right) / n
    split_info = _entropy(n_left / n)              # >0 for every 1 <= n_left < n
    ratio = np.where(valid & (gain > _MIN_GAIN), gain / split_info, -np.inf)
    flat = int(np.argmax(ratio.T))
    col, i = divmod(flat, n - 1)
    if not np.isfinite(ratio[i, col]):
        return None
    thr = 0.5 * (xs[i, col] + xs[i + 1, col])
    return col, float(thr), float(ratio[i, col])


def _grow(Xd, y, depth, max_depth):
    label = _majority(y)
    if depth >= max_depth or np.all(y == y[0]):
        return Node(label)
    split = best_split(Xd, y)
    if split is None:
        return Node(label)
    col, thr, _ = split
    go_left = Xd[:, col] <= thr
    return Node(label, col, thr,
                _grow(Xd[go_left], y[go_left], depth + 1, max_depth),
                _grow(Xd[~go_left], y[~go_left], depth + 1, max_depth))


@dataclass
class TreeModel:
    root: Node
    n_features: int
    max_depth: int = 16

    kind = "tree"

    def predict(self, X):
        X = _as_csr(X, self.n_features)
        out = np.empty(X.shape[0], dtype=np.int64)
        for i in range(X.shape[0]):
            row = X.getrow(i).toarray().ravel()
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.column] <= node.threshold else node.right
            out[i] = node.label
        return out

    def scores(self, X):
        return self.predict(X).astype(np.float64)

    def params(self):
        return {"max_depth": self.max_depth}

    def payload(self):
        return {"n_features": self.n_features, "root": self.root.to_dict()}

    @classmethod
    def from_payload(cls, params, payload):
        return cls(Node.from_dict(payload["root"]), int(payload["n_features"]),
                   int(params["max_depth"]))


def tree_train(X, y, max_depth: int = 16) -> TreeModel:
    """Greedy top-down binary tree; leaves hold the majority label (ties -> +1)."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    X = _as_csr(X)
    y = _labels(y)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    root = _grow(X.toarray(), y, 0, max_depth)
    return TreeModel(root, X.shape[1], max_depth)


def tree_predict(model: TreeModel, row):
    return int(model.predict(_row_to_csr(row, model.n_features))[0])


# ---------------------------------------------------------------- dispatch

@dataclass(frozen=True)
class AlgorithmSpec:
    name: str = "svm"
    C: float = 0.01
    epochs: int = 30
    k: int = 5
    max_depth: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.name not in _MODELS:
            raise ValueError(f"unknown algorithm {self.name!r}; choose from {sorted(_MODELS)}")

    def describe(self):
        if self.name == "svm":
            return f"svm(C={self.C},epochs={self.epochs})"
        if self.name == "knn":
            return f"knn(k={self.k})"
        return f"tree(max_depth={self.max_depth})"


def train(spec: AlgorithmSpec, X, y):
    if spec.name == "svm":
        return svm_train(X, y, spec.C, spec.epochs, spec.seed)
    if spec.name == "knn":
        return knn_train(X, y, spec.k)
    return tree_train(X, y, spec.max_depth)


_MODELS = {"svm": SvmModel, "knn": KnnModel, "tree": TreeModel}


def dump_model(model, vocabulary, extra_params=None) -> str:
    params = dict(model.params())
    params.update(extra_params or {})
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "type": model.kind,
           "params": params, "vocabulary_hash": vocabulary.digest(),
           "payload": model.payload()}
    return json.dumps(doc, sort_keys=True)


def load_model(text: str, vocabulary=None):
    """Returns ``(model, params)``; checks the vocabulary hash when given one."""
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ValueError("not a netgram model file (or unsupported version)")
    if vocabulary is not None and doc["vocabulary_hash"] != vocabulary.digest():
        raise VocabularyMismatch("model was trained against a different vocabulary")
    model = _MODELS[doc["type"]].from_payload(doc["params"], doc["payload"])
    return model, doc["params"]
