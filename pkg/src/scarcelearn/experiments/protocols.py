"""Evaluation protocols: stratified fivefold CV and the chronological prefix split."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InputError, SplitError
from ..features import FeatureMatrix
from .methods import FitAudit, HyperParams, StackCache, method_spec, run_method

PAPER_FRACTIONS = (0.01, 0.03, 0.05, 0.10, 0.15, 0.20)


def prefix_split(features: FeatureMatrix, fraction: float):
    """Earliest ``ceil(fraction * N_class)`` labeled epochs of each class train; the rest test."""
    if not 0 < fraction < 1:
        raise SplitError(f"fraction must lie in (0, 1), got {fraction}")
    labeled = features.labeled()
    if len(labeled) == 0:
        raise InputError("prefix split needs labeled rows")
    train_rows, test_rows = [], []
    for cls in np.unique(labeled.labels):
        rows = np.flatnonzero(labeled.labels == cls)
        rows = rows[np.argsort(labeled.times[rows], kind="stable")]
        k = math.ceil(round(fraction * rows.size, 9))
        if k == 0 or k >= rows.size:
            raise SplitError(f"fraction {fraction} leaves an empty train or test set for class {cls}")
        train_rows.append(rows[:k])
        test_rows.append(rows[k:])
    return labeled.take(np.concatenate(train_rows)), labeled.take(np.concatenate(test_rows))


def stratified_folds(labels, n_folds: int = 5, rng=None) -> list[np.ndarray]:
    """Random fold assignment that spreads each class evenly over the folds."""
    rng = np.random.default_rng(rng)
    labels = np.asarray(labels)
    folds = [[] for _ in range(n_folds)]
    offset = 0
    for cls in np.unique(labels):
        rows = rng.permutation(np.flatnonzero(labels == cls))
        if rows.size < n_folds:
            raise InputError(f"class {cls} has {rows.size} rows, fewer than {n_folds} folds")
        for k, row in enumerate(rows):
            folds[(k + offset) % n_folds].append(row)
        offset += rows.size
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def cv_accuracies(features: FeatureMatrix, method, repeats: int = 5, seed: int = 0,
                  hyper: HyperParams | None = None, n_folds: int = 5, audit: FitAudit | None = None):
    """Accuracy (percent) of each repeat of stratified k-fold CV on one subject."""
    method = method_spec(method)
    labeled = features.labeled()
    if len(labeled) == 0:
        raise InputError("cross-validation needs labeled rows")
    unlabeled = features.unlabeled()
    accs = []
    for r in range(repeats):
        ss = np.random.SeedSequence([seed, r])
        split_seed, fit_seed = ss.generate_state(2)
        folds = stratified_folds(labeled.labels, n_folds, int(split_seed))
        cache = StackCache()
        correct = 0.0
        for k, test_rows in enumerate(folds):
            train_rows = np.setdiff1d(np.arange(len(labeled)), test_rows)
            test = labeled.take(test_rows)
            acc = run_method(labeled.take(train_rows), test, unlabeled, method, hyper,
                             int(fit_seed) + k, audit, cache)
            correct += acc * len(test_rows)
        accs.append(correct / len(labeled))
    return accs


def fivefold_cv(features, method, repeats: int = 5, seed: int = 0, hyper: HyperParams | None = None,
                audit: FitAudit | None = None):
    """Mean and std over repeats of fivefold CV accuracy.

    ``features`` may be one subject's FeatureMatrix or a dict of them; with
    several subjects each repeat's accuracy is the subject average.
    """
    subjects = features if isinstance(features, dict) else {features.subject_id: features}
    per_subject = {sid: cv_accuracies(fm, method, repeats, seed, hyper, audit=audit)
                   for sid, fm in sorted(subjects.items())}
    runs = np.mean(np.array(list(per_subject.values())), axis=0)
    return float(runs.mean()), float(runs.std())
