"""Grid runs over methods x fractions, structure sweeps, and report rendering.

Reports are plain dicts ready for JSON. They carry no timestamps, so two runs
with the same master seed serialize to identical bytes.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..deepnet import AUTOENCODER, CLASSIFIER, FinetuneConfig, NetworkSpec
from ..errors import ParameterError
from ..features import FeatureMatrix
from ..io import provenance
from ..rbm import CdConfig
from .methods import METHODS, FitAudit, HyperParams, MethodSpec, StackCache, method_spec, run_method
from .protocols import PAPER_FRACTIONS, cv_accuracies, prefix_split

PAPER_STRUCTURES = ("600-200-100-20", "200-100-20", "100-20", "20", "800-200-100-10")


def repeat_seeds(seed: int, repeats: int) -> list[int]:
    """Per-repeat fit seeds derived from the master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(repeats)]


def fraction_key(fraction: float) -> str:
    return f"{fraction:g}"


def _run_cells(fn, cells, n_jobs: int):
    """Apply ``fn`` to argument tuples, in order, optionally in worker processes."""
    if n_jobs <= 1 or len(cells) <= 1:
        return [fn(*cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, *zip(*cells)))


def _merge_audits(summaries) -> dict:
    keys = ("fit_calls", "rows_fitted", "test_rows_used")
    summaries = list(summaries)
    return {k: int(sum(s[k] for s in summaries)) for k in keys}


def _stats(runs) -> dict:
    runs = np.asarray(runs, dtype=np.float64)
    return {"mean": float(runs.mean()), "std": float(runs.std()), "runs": runs.tolist()}


# -- prefix protocol grid --------------------------------------------------------

def _prefix_cell(fm: FeatureMatrix, fractions, methods, hyper: HyperParams, seed: int):
    """One subject, one repeat: every fraction and method, sharing pretraining."""
    audit = FitAudit()
    unlabeled = fm.unlabeled()
    acc = {}
    for frac in fractions:
        train, test = prefix_split(fm, frac)
        cache = StackCache()
        for m in methods:
            acc[(m, frac)] = run_method(train, test, unlabeled, m, hyper, seed, audit, cache)
    return acc, audit.summary()


def reproduce_table(dataset: dict, fractions=PAPER_FRACTIONS, methods=tuple(METHODS), repeats: int = 5,
                    seed: int = 0, hyper: HyperParams | None = None, jobs: int = 1,
                    config: dict | None = None) -> dict:
    """Prefix-protocol accuracy for every (method, fraction).

    Every repeat refits all pipelines on every subject with its own seed. A
    repeat's accuracy is the subject average; mean and std are over repeats.
    ``config`` is copied into the report snapshot (e.g. the generator settings).
    """
    hyper = hyper or HyperParams()
    methods = [method_spec(m).id for m in methods]
    fractions = [float(f) for f in fractions]
    if repeats < 1:
        raise ParameterError("repeats must be >= 1")
    if not dataset:
        raise ParameterError("dataset has no subjects")
    subjects = sorted(dataset)
    seeds = repeat_seeds(seed, repeats)
    cells = [(dataset[sid], fractions, methods, hyper, s) for s in seeds for sid in subjects]
    out = _run_cells(_prefix_cell, cells, jobs)

    # acc[r][k] is repeat r, subject k
    by_cell = [out[r * len(subjects):(r + 1) * len(subjects)] for r in range(repeats)]
    grid = {}
    for m in methods:
        grid[str(m)] = {}
        for frac in fractions:
            table = np.array([[acc[(m, frac)] for acc, _ in rep] for rep in by_cell])
            cell = _stats(table.mean(axis=1))
            cell["per_subject"] = {sid: float(table[:, k].mean()) for k, sid in enumerate(subjects)}
            grid[str(m)][fraction_key(frac)] = cell

    snapshot = {"hyper": dataclasses.asdict(hyper), "fractions": fractions, "methods": methods,
                "repeats": repeats, "subjects": subjects, **(config or {})}
    return {
        "kind": "prefix_table",
        "provenance": provenance(seed, snapshot),
        "config": snapshot,
        "seeds": {"master": seed, "repeats": seeds},
        "method_names": {str(m): METHODS[m].name for m in methods},
        "grid": grid,
        "leakage_audit": _merge_audits(s for _, s in out),
    }


def grid_means(report: dict) -> dict:
    """{(method, fraction): mean} from a prefix report."""
    return {(int(m), float(f)): cell["mean"] for m, row in report["grid"].items() for f, cell in row.items()}


def check_trends(report: dict, small: float = 0.05, gap: float = 3.0) -> dict:
    """Qualitative orderings the paper's table shows, evaluated on a prefix report.

    Returns {name: bool}; a check whose methods are absent from the grid is
    left out.
    """
    mean = grid_means(report)
    methods = {m for m, _ in mean}
    fracs = sorted({f for _, f in mean})
    low = [f for f in fracs if f <= small + 1e-12]
    out = {}
    if {1, 3, 7} <= methods and low:
        out["deep_beats_raw"] = all(mean[(d, f)] >= mean[(1, f)] + gap for d in (3, 7) for f in low)
    if {1, 2} <= methods:
        out["raw_beats_pca"] = all(mean[(1, f)] > mean[(2, f)] for f in fracs)
    deep = sorted(m for m in methods if METHODS[m].is_deep)
    if deep and len(fracs) > 1:
        out["more_labels_help"] = all(mean[(m, fracs[-1])] >= mean[(m, fracs[0])] for m in deep)
    if {3, 6, 7, 10} <= methods and low:
        out["pretraining_dropout_help"] = all(
            mean[(7, f)] >= mean[(10, f)] and mean[(3, f)] >= mean[(6, f)] for f in low)
    return out


def render_markdown(report: dict) -> str:
    """The table in the paper's layout; deep methods show (std) after the mean."""
    grid = report["grid"]
    fracs = list(next(iter(grid.values())).keys())
    head = "| Method | " + " | ".join(f"Top {float(f) * 100:g}%" for f in fracs) + " |"
    lines = ["Engagement assessment results (prefix protocol, accuracy %)", "", head,
             "|" + "---|" * (len(fracs) + 1)]
    for m, row in grid.items():
        spec: MethodSpec = METHODS[int(m)]
        cells = []
        for f in fracs:
            c = row[f]
            cells.append(f"{c['mean']:.2f} ({c['std']:.2f})" if spec.is_deep else f"{c['mean']:.2f}")
        lines.append(f"| Method {m} {spec.name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def series_csv(report: dict) -> str:
    """Accuracy-versus-fraction series, one line per (method, fraction)."""
    rows = ["method,fraction,mean,std"]
    for m, row in report["grid"].items():
        for f, c in row.items():
            rows.append(f"{m},{f},{c['mean']:.6f},{c['std']:.6f}")
    return "\n".join(rows) + "\n"


# -- structure sweep -------------------------------------------------------------

def _sweep_cell(fm: FeatureMatrix, structure: str, topology: str, hyper: HyperParams, repeats: int, seed: int):
    spec = NetworkSpec.parse(structure, input_dim=fm.dim)
    h = dataclasses.replace(hyper, spec=spec)
    method = MethodSpec(0, topology, pretraining=h.cd.iterations > 0, dropout=h.dropout.enabled)
    audit = FitAudit()
    accs = cv_accuracies(fm, method, repeats, seed, h, audit=audit)
    return accs, audit.summary()


def sweep_structures(dataset: dict, structures=PAPER_STRUCTURES, topologies=(CLASSIFIER, AUTOENCODER),
                     repeats: int = 1, seed: int = 0, hyper: HyperParams | None = None, jobs: int = 1) -> dict:
    """Fivefold CV accuracy of every structure under both network types.

    Every structure gets the same CD budget per layer (``hyper.cd``), the same
    fine-tuning budget and the same dropout setting.
    """
    hyper = hyper or HyperParams()
    for s in structures:
        NetworkSpec.parse(s)
    subjects = sorted(dataset)
    combos = [(s, t) for s in structures for t in topologies]
    cells = [(dataset[sid], s, t, hyper, repeats, seed) for s, t in combos for sid in subjects]
    out = _run_cells(_sweep_cell, cells, jobs)
    results = {t: {} for t in topologies}
    for i, (s, t) in enumerate(combos):
        chunk = out[i * len(subjects):(i + 1) * len(subjects)]
        per_rep = np.array([accs for accs, _ in chunk]).mean(axis=0)
        cell = _stats(per_rep)
        cell["per_subject"] = {sid: float(np.mean(accs)) for sid, (accs, _) in zip(subjects, chunk)}
        results[t][s] = cell
    best = {t: max(results[t], key=lambda s: results[t][s]["mean"]) for t in topologies}
    snapshot = {"hyper": dataclasses.asdict(hyper), "structures": list(structures),
                "topologies": list(topologies), "repeats": repeats, "subjects": subjects}
    return {
        "kind": "structure_sweep",
        "provenance": provenance(seed, snapshot),
        "config": snapshot,
        "seeds": {"master": seed},
        "results": results,
        "best_structure": {t: {"structure": s, "mean": results[t][s]["mean"]} for t, s in best.items()},
        "leakage_audit": _merge_audits(s for _, s in out),
    }


# -- desk-scale defaults ---------------------------------------------------------

# The paper's budgets (100 CD epochs per layer, 2000 fine-tuning epochs) make a
# full 10 x 6 x 5 grid take hours on one core. These reduced budgets keep the
# whole grid, on the subjects below, inside half an hour.
REDUCED_HYPER = HyperParams(cd=CdConfig(iterations=30), finetune=FinetuneConfig(iterations=50))
REDUCED_SUBJECTS = 6


def default_reproduce_config() -> dict:
    """JSON-ready config used by ``scarcelearn reproduce`` when none is given."""
    return {
        "synth": {"n_subjects": REDUCED_SUBJECTS},
        "hyper": {"cd": {"iterations": REDUCED_HYPER.cd.iterations},
                  "finetune": {"iterations": REDUCED_HYPER.finetune.iterations}},
        "fractions": list(PAPER_FRACTIONS),
        "methods": list(METHODS),
        "repeats": 5,
    }
