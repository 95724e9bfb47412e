"""Repeated random-split evaluation, confusion matrices and rank tests."""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .classify import ecoc_train
from .features import FeatureSpaceSpec, base_features, fit_from_base, fit_hist_ranges
from .signal import Dataset, FTSignal, LabeledSample


def worker_count() -> int:
    env = os.environ.get("GRID_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"GRID_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SplitPlan:
    repeats: int
    train_per_class: int
    test_per_class: int
    seed: int
    # assignments[r][k] = (train indices, test indices) of class k in repeat r
    assignments: tuple[tuple[tuple[np.ndarray, np.ndarray], ...], ...]

    def split(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        parts = self.assignments[r]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def make_split_plan(dataset: Dataset | Sequence[int], repeats: int = 20, n_train: int = 50, n_test: int = 12, seed: int = 0) -> SplitPlan:
    labels = dataset.label_indices() if isinstance(dataset, Dataset) else np.asarray(dataset)
    n_classes = len(dataset.classes) if isinstance(dataset, Dataset) else int(labels.max()) + 1
    if repeats < 1 or n_train < 1 or n_test < 1:
        raise ValueError("repeats, n_train and n_test must be positive")
    members = [np.flatnonzero(labels == k) for k in range(n_classes)]
    for k, idx in enumerate(members):
        if len(idx) < n_train + n_test:
            raise ValueError(f"class {k} has {len(idx)} samples, needs {n_train + n_test}")
    rng = np.random.default_rng(seed)
    plan = []
    for _ in range(repeats):
        parts = []
        for idx in members:
            perm = rng.permutation(idx)
            parts.append((perm[:n_train], perm[n_train:n_train + n_test]))
        plan.append(tuple(parts))
    return SplitPlan(repeats, n_train, n_test, seed, tuple(plan))


def confusion_matrix(pred, truth, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized confusion matrix and a mask of rows with no true samples."""
    pred = np.asarray(pred, dtype=np.intp)
    truth = np.asarray(truth, dtype=np.intp)
    if pred.shape != truth.shape:
        raise ValueError("pred and truth lengths differ")
    if pred.size and (min(pred.min(), truth.min()) < 0 or max(pred.max(), truth.max()) >= K):
        raise ValueError("labels out of range")
    counts = np.zeros((K, K))
    np.add.at(counts, (truth, pred), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    empty = totals[:, 0] == 0
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0), empty


@dataclass(frozen=True)
class EvalReport:
    space_id: str
    per_repeat_accuracy: np.ndarray
    confusion: np.ndarray
    classes: tuple[str, ...]
    fit_digests: tuple[str, ...] = ()
    notes: dict = field(default_factory=dict, compare=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_repeat_accuracy))

    @property
    def sd(self) -> float:
        a = self.per_repeat_accuracy
        return float(np.std(a, ddof=1)) if a.size > 1 else 0.0

    @property
    def chance_level(self) -> float:
        return 1.0 / len(self.classes)


def _digest(ext, model) -> str:
    h = hashlib.sha256()
    for name, arr in sorted(ext.arrays().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    h.update(model.weights.tobytes())
    h.update(model.biases.tobytes())
    return h.hexdigest()


class _BaseCache:
    """Per-sample base features for spaces whose base stage needs no fitting."""

    def __init__(self, spec: FeatureSpaceSpec, signals: np.ndarray):
        self.spec = spec
        self.signals = signals
        self.fitted_base = "raw_hist" in spec.parts
        self.all = None if self.fitted_base else base_features(spec, signals)

    def get(self, train: np.ndarray, test: np.ndarray):
        if not self.fitted_base:
            return self.all[train], self.all[test], None
        ranges = fit_hist_ranges(self.signals[train])
        return (base_features(self.spec, self.signals[train], ranges),
                base_features(self.spec, self.signals[test], ranges), ranges)


def run_experiment(dataset: Dataset, spec: FeatureSpaceSpec | str, plan: SplitPlan, C: float = 1.0,
                   seed: int = 0, workers: int | None = None) -> EvalReport:
    """Fit on each repeat's training split only and score its test split."""
    spec = FeatureSpaceSpec(spec) if isinstance(spec, str) else spec
    labels = dataset.label_indices()
    K = len(dataset.classes)
    cache = _BaseCache(spec, dataset.signal_array())

    def one(r: int):
        train, test = plan.split(r)
        B_tr, B_te, ranges = cache.get(train, test)
        rspec = replace(spec, seed=seed + r)
        ext = fit_from_base(rspec, B_tr, ranges)
        model = ecoc_train(ext.transform_base(B_tr), labels[train], dataset.classes, C, seed=seed + 1000 * r)
        pred = model.predict_index(ext.transform_base(B_te))
        conf, _ = confusion_matrix(pred, labels[test], K)
        return float(np.mean(pred == labels[test])), conf, _digest(ext, model)

    n_workers = min(workers or worker_count(), plan.repeats)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            results = list(pool.map(one, range(plan.repeats)))
    else:
        results = [one(r) for r in range(plan.repeats)]
    acc = np.array([r[0] for r in results])
    conf = np.mean([r[1] for r in results], axis=0)
    return EvalReport(spec.id, acc, conf, dataset.classes, tuple(r[2] for r in results))


def permute_dataset(dataset: Dataset, seed: int) -> Dataset:
    """Independently shuffle the time order of every channel of every sample."""
    out = []
    for i, s in enumerate(dataset.samples):
        rng = np.random.default_rng([seed, i])
        data = s.signal.data
        shuffled = np.stack([row[rng.permutation(row.size)] for row in data])
        out.append(LabeledSample(FTSignal.from_array(shuffled, s.signal.sample_rate_hz), s.label, s.source_id))
    return Dataset(tuple(out), dataset.classes, dict(dataset.metadata))


def permuted_signal_ablation(dataset: Dataset, plan: SplitPlan, C: float = 1.0, seed: int = 0,
                             space: str = "raw", workers: int | None = None) -> EvalReport:
    report = run_experiment(permute_dataset(dataset, seed), space, plan, C, seed, workers)
    return replace(report, space_id=f"{space}_permuted", notes={"chance_level": report.chance_level})


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sv = values[order]
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


EXACT_LIMIT = 12


def mann_whitney_u(a, b, exact_limit: int = EXACT_LIMIT) -> tuple[float, float]:
    """U statistic of ``a`` and its two-sided p-value.

    Exact permutation distribution (ties kept as midranks) when the pooled
    size is at most ``exact_limit``; otherwise the tie-corrected normal
    approximation with continuity correction.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("both samples must be non-empty")
    ranks = _midranks(np.concatenate([a, b]))
    shift = na * (na + 1) / 2
    u = float(ranks[:na].sum() - shift)
    n = na + nb
    if n <= exact_limit:
        dist = np.array([ranks[list(c)].sum() - shift for c in itertools.combinations(range(n), na)])
        lower = np.mean(dist <= u + 1e-9)
        upper = np.mean(dist >= u - 1e-9)
        return u, float(min(1.0, 2 * min(lower, upper)))
    mu = na * nb / 2
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1))
    var = na * nb / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return u, 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return u, float(min(1.0, math.erfc(z / math.sqrt(2))))


@dataclass(frozen=True)
class Comparison:
    reports: tuple[EvalReport, ...]
    pvalues: dict  # (space_a, space_b) -> two-sided p, for a listed before b

    def p_matrix(self) -> np.ndarray:
        ids = [r.space_id for r in self.reports]
        P = np.ones((len(ids), len(ids)))
        for (x, y), p in self.pvalues.items():
            i, j = ids.index(x), ids.index(y)
            P[i, j] = P[j, i] = p
        return P

    def ranking(self) -> list[str]:
        return [r.space_id for r in sorted(self.reports, key=lambda r: -r.mean)]


def compare_spaces(dataset: Dataset, specs: Sequence[FeatureSpaceSpec | str], plan: SplitPlan, C: float = 1.0,
                   seed: int = 0, workers: int | None = None, progress=None) -> Comparison:
    if not specs:
        raise ValueError("need at least one feature space")
    reports = []
    for spec in specs:
        reports.append(run_experiment(dataset, spec, plan, C, seed, workers))
        if progress is not None:
            progress(reports[-1])
    pvalues = {}
    for ra, rb in itertools.combinations(reports, 2):
        pvalues[(ra.space_id, rb.space_id)] = mann_whitney_u(ra.per_repeat_accuracy, rb.per_repeat_accuracy)[1]
    return Comparison(tuple(reports), pvalues)


def write_report_csv(reports: Sequence[EvalReport], path) -> None:
    n = max(r.per_repeat_accuracy.size for r in reports)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["space_id", "mean", "sd"] + [f"repeat_{i + 1}" for i in range(n)])
        for r in reports:
            w.writerow([r.space_id, repr(r.mean), repr(r.sd)] + [repr(float(v)) for v in r.per_repeat_accuracy])


def write_confusion_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([""] + list(report.classes))
        for name, row in zip(report.classes, report.confusion):
            w.writerow([name] + [repr(float(v)) for v in row])


def write_pvalues_csv(comparison: Comparison, path) -> None:
    ids = [r.space_id for r in comparison.reports]
    P = comparison.p_matrix()
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([""] + ids)
        for name, row in zip(ids, P):
            w.writerow([name] + [repr(float(v)) for v in row])
