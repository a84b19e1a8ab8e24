"""Confusion counts, percentage metrics, stratified k-fold CV and the
n-gram sweep scenarios."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence

import numpy as np

from .classifiers import AlgorithmSpec, train
from .errors import EmptyConfusion, SingleClass, TooFewSamples
from .ngrams import FeatureMatrix, GramMode, GramSpec, featurize, fit_vocabulary


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other):
        return Confusion(self.tp + other.tp, self.fp + other.fp,
                         self.tn + other.tn, self.fn + other.fn)

    @classmethod
    def from_predictions(cls, y_true, y_pred):
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        t = y_true > 0
        p = y_pred > 0
        return cls(int((t & p).sum()), int((~t & p).sum()),
                   int((~t & ~p).sum()), int((t & ~p).sum()))


@dataclass(frozen=True)
class MetricReport:
    """Percentages in [0, 100]. ``undefined`` names metrics whose denominator
    was zero; those are reported as 0."""

    precision: float
    recall: float
    accuracy: float
    f1: float
    undefined: FrozenSet[str] = frozenset()

    def as_row(self):
        return [self.precision, self.recall, self.accuracy, self.f1]


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.add(name)
        return 0.0
    return 100.0 * num / den


def metrics(c: Confusion) -> MetricReport:
    if c.total == 0:
        raise EmptyConfusion("no samples evaluated")
    undefined = set()
    p = _ratio(c.tp, c.tp + c.fp, "precision", undefined)
    r = _ratio(c.tp, c.tp + c.fn, "recall", undefined)
    a = 100.0 * (c.tp + c.tn) / c.total
    if p + r == 0:
        undefined.add("f1")
        f1 = 0.0
    else:
        f1 = 2.0 * p * r / (p + r)
    return MetricReport(p, r, a, f1, frozenset(undefined))


def mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    arr = np.array([r.as_row() for r in reports], dtype=np.float64)
    p, r, a, f1 = arr.mean(axis=0).tolist()
    undefined = frozenset().union(*(r.undefined for r in reports))
    return MetricReport(p, r, a, f1, undefined)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray  # fold id per sample, aligned with the matrix rows
    seed: int

    def test_indices(self, fold):
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignment != fold)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.k)


def make_folds(labels, k: int = 10, seed: int = 0) -> FoldPlan:
    """Stratified, seeded partition into ``k`` folds.

    Each class is shuffled and dealt round-robin; the negative deal picks up
    at the fold where the positive deal stopped, which keeps total fold sizes
    within one of each other as well as per-class counts.
    """
    y = labels.y if isinstance(labels, FeatureMatrix) else np.asarray(labels)
    n = len(y)
    if k < 2 or k > n:
        raise TooFewSamples(f"cannot split {n} samples into {k} folds")
    pos = np.flatnonzero(y > 0)
    neg = np.flatnonzero(y <= 0)
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClass("stratified folds need both classes")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(pos), rng.permutation(neg)])
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return FoldPlan(k, assignment, seed)


@dataclass
class CVResult:
    mean: MetricReport
    pooled: MetricReport
    folds: List[MetricReport] = field(default_factory=list)
    confusions: List[Confusion] = field(default_factory=list)


def _recount(y_true, y_pred):
    tp = fp = tn = fn = 0
    for t, p in zip(y_true.tolist(), y_pred.tolist()):
        if p > 0:
            if t > 0:
                tp += 1
            else:
                fp += 1
        elif t > 0:
            fn += 1
        else:
            tn += 1
    return Confusion(tp, fp, tn, fn)


def _run_fold(matrix, algo, plan, fold):
    tr, te = plan.train_indices(fold), plan.test_indices(fold)
    model = train(algo, matrix.X[tr], matrix.y[tr])
    pred = model.predict(matrix.X[te])
    c = Confusion.from_predictions(matrix.y[te], pred)
    if c != _recount(matrix.y[te], pred):
        raise RuntimeError(f"confusion cross-check failed on fold {fold}")
    return c


def cross_validate(matrix: FeatureMatrix, algo: AlgorithmSpec, k: int = 10,
                   seed: int = 0, jobs: int = 1) -> CVResult:
    """Per-fold metrics averaged over the folds, plus pooled-confusion metrics."""
    plan = make_folds(matrix.y, k, seed)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            confusions = list(ex.map(lambda f: _run_fold(matrix, algo, plan, f), range(k)))
    else:
        confusions = [_run_fold(matrix, algo, plan, f) for f in range(k)]
    reports = [metrics(c) for c in confusions]
    pooled = sum(confusions, Confusion())
    return CVResult(mean_report(reports), metrics(pooled), reports, confusions)


@dataclass(frozen=True)
class ReportRow:
    scenario: str
    n: str
    algorithm: str
    report: MetricReport
    n_features: int = 0


def scenario_sweep(documents, positive_family: str, algo: AlgorithmSpec, n_max: int,
                   mode: GramMode = GramMode.FIXED, k: int = 10, seed: int = 0,
                   jobs: int = 1) -> List[ReportRow]:
    """One CV run per n in 1..n_max: grams of exactly n (FIXED) or of every
    length up to n (COMBINED)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    mode = GramMode(mode)
    if mode is GramMode.SKIP:
        raise ValueError("sweeps run over fixed or combined grams")
    rows = []
    for n in range(1, n_max + 1):
        spec = GramSpec(mode, n)
        matrix = featurize(documents, fit_vocabulary(documents, spec), spec, positive_family)
        res = cross_validate(matrix, algo, k, seed, jobs)
        label = str(n) if mode is GramMode.FIXED else f"1..{n}"
        rows.append(ReportRow(mode.value, label, algo.name, res.mean, matrix.n_features))
    return rows


def balance(documents, positive_family: str, seed: int = 0):
    """Downsample the larger class to the size of the smaller one, keeping
    input order."""
    pos = [i for i, d in enumerate(documents) if d.label == positive_family]
    neg = [i for i, d in enumerate(documents) if d.label != positive_family]
    small, big = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    keep = set(small) | set(rng.choice(big, size=len(small), replace=False).tolist())
    return [d for i, d in enumerate(documents) if i in keep]


REPORT_COLUMNS = ["scenario", "n", "algorithm", "precision", "recall", "accuracy", "f1"]


def write_report_csv(rows: Sequence[ReportRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([r.scenario, r.n, r.algorithm] + [f"{v:.1f}" for v in r.report.as_row()])


def format_table(rows: Sequence[ReportRow]) -> str:
    head = ["scenario", "n", "algorithm", "features", "P", "R", "A", "F1"]
    body = [[r.scenario, r.n, r.algorithm, str(r.n_features)]
            + [f"{v:.1f}" for v in r.report.as_row()] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(c.rjust(wd) for c, wd in zip(line, widths)) for line in [head] + body]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines) + "\n"


def is_non_decreasing(values: Sequence[float], tolerance: float = 0.0) -> bool:
    best = -np.inf
    for v in values:
        if v < best - tolerance:
            return False
        best = max(best, v)
    return True
