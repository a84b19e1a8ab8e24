"""Recursive (backward) feature selection over a FeatureMatrix."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .classifiers import AlgorithmSpec, svm_train
from .errors import TargetTooLarge
from .evaluation import ReportRow, cross_validate
from .ngrams import FeatureMatrix, GramSpec, featurize, fit_vocabulary

log = logging.getLogger(__name__)

EXACT = "exact"
FAST = "fast"
AUTO = "auto"
EXACT_LIMIT = 256
DEFAULT_FAST_STEP = 0.1


@dataclass
class SelectionResult:
    kept_columns: List[int]
    elimination_trace: List[Tuple[int, float]] = field(default_factory=list)
    strategy: str = EXACT

    @property
    def removed_columns(self):
        return [c for c, _ in self.elimination_trace]


def _cv_accuracy(matrix, columns, algo, cv_k, seed, jobs=1):
    sub = FeatureMatrix(matrix.vocabulary, matrix.X[:, columns], matrix.y, matrix.sample_ids)
    return cross_validate(sub, algo, cv_k, seed, jobs).mean.accuracy


def _exact_step(matrix, current, algo, cv_k, seed, jobs):
    def score(c):
        cols = [x for x in current if x != c]
        return _cv_accuracy(matrix, cols, algo, cv_k, seed)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            accs = list(ex.map(score, current))
    else:
        accs = [score(c) for c in current]
    grams = matrix.vocabulary.grams
    # best accuracy; among ties drop the lexicographically last gram
    best = max(range(len(current)), key=lambda i: (accs[i], grams[current[i]]))
    return current[best], accs[best]


def _n_per_round(step, remaining, excess):
    if isinstance(step, float):
        n = max(1, int(step * remaining))
    else:
        n = int(step)
    return max(1, min(n, excess))


def rfs(matrix: FeatureMatrix, algo: AlgorithmSpec, target_k: int, cv_k: int = 10,
        seed: int = 0, strategy: str = AUTO, step: Optional[Union[int, float]] = None,
        jobs: int = 1) -> SelectionResult:
    """Backward elimination from all columns down to ``target_k``.

    ``exact`` scores every single-column removal by CV accuracy and drops the
    best one. ``fast`` ranks columns by |w| of a linear SVM fitted on all
    rows (with ``algo``'s C/epochs/seed) and drops the smallest; ``step``
    removes that many columns per round (a float is a fraction of those
    remaining) and each removed column is logged with the CV accuracy of the
    round that dropped it. ``auto`` uses exact up to 256 columns.
    """
    n = matrix.n_features
    if not 1 <= target_k < n:
        raise TargetTooLarge(f"target_k={target_k} must lie in [1, {n - 1}]")
    if strategy == AUTO:
        strategy = EXACT if n <= EXACT_LIMIT else FAST
    if strategy not in (EXACT, FAST):
        raise ValueError(f"unknown strategy {strategy!r}")
    grams = matrix.vocabulary.grams
    current = list(range(n))
    trace = []
    if strategy == EXACT:
        while len(current) > target_k:
            col, acc = _exact_step(matrix, current, algo, cv_k, seed, jobs)
            current.remove(col)
            trace.append((col, acc))
            log.debug("exact: dropped %r, %d left, acc %.2f", grams[col], len(current), acc)
        return SelectionResult(current, trace, EXACT)

    step = DEFAULT_FAST_STEP if step is None else step
    while len(current) > target_k:
        sub = matrix.X[:, current]
        model = svm_train(sub, matrix.y, algo.C, algo.epochs, algo.seed)
        weight = np.abs(model.w)
        count = _n_per_round(step, len(current), len(current) - target_k)
        ranked = sorted(range(len(current)),
                        key=lambda i: (weight[i], _desc(grams[current[i]])))
        drop = [current[i] for i in ranked[:count]]
        dropped = set(drop)
        current = [c for c in current if c not in dropped]
        acc = _cv_accuracy(matrix, current, algo, cv_k, seed, jobs)
        trace.extend((c, acc) for c in drop)
        log.debug("fast: dropped %d, %d left, acc %.2f", count, len(current), acc)
    return SelectionResult(current, trace, FAST)


def _desc(s):
    """Sort key that orders strings in reverse lexicographic order."""
    return [-ord(ch) for ch in s] + [1]


def top_fraction_k(n_features: int, fraction: float) -> int:
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    return max(1, math.ceil(round(fraction * n_features, 9)))


def select_top_fraction(matrix: FeatureMatrix, algo: AlgorithmSpec, fraction: float,
                        **kw) -> SelectionResult:
    target = top_fraction_k(matrix.n_features, fraction)
    if target >= matrix.n_features:
        return SelectionResult(list(range(matrix.n_features)), [], kw.get("strategy", AUTO))
    return rfs(matrix, algo, target, **kw)


def rfs_sweep(documents, positive_family: str, algo: AlgorithmSpec, n_max: int,
              fraction: float = 0.1, cv_k: int = 10, seed: int = 0,
              strategy: str = AUTO, step=None, jobs: int = 1) -> List[ReportRow]:
    """For n in 1..n_max: combined 1..n grams, keep the top ``fraction`` by
    RFS, report CV metrics on the kept columns."""
    rows = []
    for n in range(1, n_max + 1):
        spec = GramSpec.combined(n)
        matrix = featurize(documents, fit_vocabulary(documents, spec), spec, positive_family)
        sel = select_top_fraction(matrix, algo, fraction, cv_k=cv_k, seed=seed,
                                  strategy=strategy, step=step, jobs=jobs)
        kept = matrix.take_columns(sel.kept_columns)
        res = cross_validate(kept, algo, cv_k, seed, jobs)
        rows.append(ReportRow(f"rfs-{sel.strategy}", f"1..{n}", algo.name, res.mean,
                              kept.n_features))
    return rows


def write_selection(result: SelectionResult, matrix: FeatureMatrix, csv_path,
                    vocab_path=None) -> None:
    grams = matrix.vocabulary.grams
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "column", "gram", "accuracy_after_removal"])
        for rank, (col, acc) in enumerate(result.elimination_trace, 1):
            w.writerow([rank, col, grams[col], f"{acc:.4f}"])
    if vocab_path is not None:
        matrix.vocabulary.subset(result.kept_columns).write(vocab_path)
