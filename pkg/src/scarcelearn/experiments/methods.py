"""The ten compared methods and the leakage-audited pipeline that runs them."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..deepnet import (AUTOENCODER, CLASSIFIER, NO_DROPOUT, PAPER_DROPOUT, DropoutConfig, FinetuneConfig,
                       NetworkSpec, build_autoencoder, build_classifier, extract_representation, finetune,
                       one_hot, pretrain_stack)
from ..errors import InputError, LeakageError, ParameterError
from ..features import FeatureMatrix, fit_standardizer, pca_fit
from ..rbm import CdConfig
from ..svm import svm_predict, svm_train

RAW, PCA = "raw", "pca"


@dataclass(frozen=True)
class MethodSpec:
    id: int
    representation: str
    pretraining: bool = False
    dropout: bool = False

    @property
    def is_deep(self) -> bool:
        return self.representation in (CLASSIFIER, AUTOENCODER)

    @property
    def name(self) -> str:
        if self.representation == RAW:
            return "low level features"
        if self.representation == PCA:
            return "PCA features"
        model = "Deep classifier" if self.representation == CLASSIFIER else "Deep autoencoder"
        return (f"{model} {'+' if self.pretraining else '-'} pretraining "
                f"{'+' if self.dropout else '-'} dropout")


METHODS = {
    1: MethodSpec(1, RAW),
    2: MethodSpec(2, PCA),
    3: MethodSpec(3, CLASSIFIER, True, True),
    4: MethodSpec(4, CLASSIFIER, False, True),
    5: MethodSpec(5, CLASSIFIER, True, False),
    6: MethodSpec(6, CLASSIFIER, False, False),
    7: MethodSpec(7, AUTOENCODER, True, True),
    8: MethodSpec(8, AUTOENCODER, False, True),
    9: MethodSpec(9, AUTOENCODER, True, False),
    10: MethodSpec(10, AUTOENCODER, False, False),
}


def method_spec(method) -> MethodSpec:
    if isinstance(method, MethodSpec):
        return method
    try:
        return METHODS[int(method)]
    except (KeyError, ValueError, TypeError):
        raise ParameterError(f"method id must be 1-10, got {method!r}") from None


def parse_methods(text: str) -> list[int]:
    """'1-10', '3,7' or '1-2,5' -> sorted unique ids."""
    ids = set()
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        ids.update(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    for i in ids:
        method_spec(i)
    return sorted(ids)


@dataclass(frozen=True)
class HyperParams:
    spec: NetworkSpec = NetworkSpec()
    cd: CdConfig = CdConfig(learning_rate=0.01, momentum=0.9, batch_size=100, iterations=100)
    finetune: FinetuneConfig = FinetuneConfig(learning_rate=0.01, momentum=0.9, iterations=2000)
    dropout: DropoutConfig = PAPER_DROPOUT
    svm_C: float = 1.0
    pca_components: int = 30

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        d = dict(d or {})
        spec = d.pop("spec", None)
        if isinstance(spec, (str, list, tuple)):
            spec = NetworkSpec.parse(spec) if isinstance(spec, str) else NetworkSpec(tuple(spec))
        elif isinstance(spec, dict):
            spec = NetworkSpec(**{**spec, "hidden_sizes": tuple(spec.get("hidden_sizes", (100, 20)))})
        out = cls()
        if spec is not None:
            out = replace(out, spec=spec)
        if "cd" in d:
            out = replace(out, cd=replace(out.cd, **d.pop("cd")))
        if "finetune" in d:
            out = replace(out, finetune=replace(out.finetune, **d.pop("finetune")))
        if "dropout" in d:
            dv = d.pop("dropout")
            out = replace(out, dropout=DropoutConfig(*dv) if isinstance(dv, (list, tuple)) else DropoutConfig(**dv))
        return replace(out, **d)


class FitAudit:
    """Records the row ids handed to every fit call and rejects test rows.

    ``forbid`` starts a new split: only that split's test rows are off limits,
    since rows tested in one split may train in another.
    """

    def __init__(self):
        self.forbidden = np.empty(0, dtype=np.int64)
        self.calls: list[tuple[str, int, int]] = []

    def forbid(self, rows):
        self.forbidden = np.unique(np.asarray(rows, dtype=np.int64).ravel())

    def check(self, stage: str, fm: FeatureMatrix):
        ids = fm.index
        hits = int(np.isin(ids, self.forbidden).sum())
        self.calls.append((stage, int(ids.size), hits))
        if hits:
            raise LeakageError(f"{hits} test rows passed to the {stage} fit")

    @property
    def violations(self) -> int:
        return sum(h for _, _, h in self.calls)

    def summary(self) -> dict:
        return {"fit_calls": len(self.calls), "rows_fitted": sum(n for _, n, _ in self.calls),
                "test_rows_used": self.violations}


class StackCache:
    """Pretrained stacks keyed by pool rows and seed, shared across methods."""

    def __init__(self):
        self._store = {}

    def get(self, pool_x, pool_ids, spec: NetworkSpec, cd: CdConfig):
        key = (np.asarray(pool_ids).tobytes(), spec, cd)
        if key not in self._store:
            self._store[key] = pretrain_stack(pool_x, spec, cd)
        return self._store[key]


def _split_xy(fm: FeatureMatrix):
    if fm.labels is None or (fm.labels < 0).any():
        raise InputError("expected fully labeled rows")
    return fm.values, fm.labels


def run_method(train: FeatureMatrix, test: FeatureMatrix, unlabeled: FeatureMatrix | None, method,
               hyper: HyperParams | None = None, seed: int = 0, audit: FitAudit | None = None,
               cache: StackCache | None = None) -> float:
    """Fit one method on ``train`` (+ unlabeled pool) and return test accuracy in percent."""
    method = method_spec(method)
    hyper = hyper or HyperParams()
    audit = audit if audit is not None else FitAudit()
    audit.forbid(test.index)
    x_tr, y_tr = _split_xy(train)
    x_te, y_te = _split_xy(test)
    if np.unique(y_tr).size < 2:
        raise InputError("training rows must contain both classes")
    pool = train if unlabeled is None or len(unlabeled) == 0 else FeatureMatrix.concat([train, unlabeled])

    if method.representation == RAW:
        audit.check("standardizer", train)
        std = fit_standardizer(train)
        z_tr, z_te = std.apply(x_tr), std.apply(x_te)
    elif method.representation == PCA:
        audit.check("pca", pool)
        m = min(hyper.pca_components, len(pool) - 1, pool.dim)
        pca = pca_fit(pool, m)
        audit.check("standardizer", train)
        std = fit_standardizer(pca.transform(x_tr))
        z_tr, z_te = std.apply(pca.transform(x_tr)), std.apply(pca.transform(x_te))
    else:
        audit.check("standardizer", pool)
        std = fit_standardizer(pool)
        pool_x = std.apply(pool.values)
        seeds = np.random.SeedSequence([seed, method.pretraining]).generate_state(2)
        cd = replace(hyper.cd, seed=int(seeds[0]),
                     iterations=hyper.cd.iterations if method.pretraining else 0)
        spec = replace(hyper.spec, input_dim=pool.dim)
        if method.pretraining:
            audit.check("rbm_pretraining", pool)
        stack = (cache.get(pool_x, pool.index, spec, cd) if cache is not None
                 else pretrain_stack(pool_x, spec, cd))
        dcfg = hyper.dropout if method.dropout else NO_DROPOUT
        fcfg = replace(hyper.finetune, seed=int(seeds[1]))
        if method.representation == CLASSIFIER:
            net = build_classifier(stack, hyper.spec.n_classes)
            audit.check("finetune", train)
            net, _ = finetune(net, std.apply(x_tr), one_hot(y_tr, hyper.spec.n_classes), dcfg, fcfg)
        else:
            net = build_autoencoder(stack)
            audit.check("finetune", pool)
            net, _ = finetune(net, pool_x, pool_x, dcfg, fcfg)
        z_tr = extract_representation(net, std.apply(x_tr))
        z_te = extract_representation(net, std.apply(x_te))

    audit.check("svm", train)
    model = svm_train(z_tr, y_tr, hyper.svm_C, seed=seed)
    pred, _ = svm_predict(model, z_te)
    return float(100.0 * np.mean(pred == y_te))
