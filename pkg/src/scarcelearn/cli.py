"""Command-line entry point: ``scarcelearn <command> ...``.

Exit codes: 0 success, 1 usage error, 2 invalid data or parameters,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .deepnet import (AUTOENCODER, CLASSIFIER, DropoutConfig, FinetuneConfig, NetworkSpec, build_autoencoder,
                      build_classifier, finetune, one_hot, pretrain_stack)
from .errors import DataError, DivergenceError, InputError, ParameterError
from .experiments import report as reports
from .experiments.methods import FitAudit, HyperParams, method_spec, parse_methods
from .experiments.protocols import PAPER_FRACTIONS, fivefold_cv
from .experiments.synth import SynthConfig, generate_synthetic, session_features
from .features import UNLABELED, FeatureMatrix, Standardizer, featurize, fit_standardizer
from .io import (provenance, rbm_to_dict, read_features, read_json, read_recording, read_stack, to_jsonable,
                 write_features, write_json, write_net, write_recording)
from .signal import denoise

log = logging.getLogger("scarcelearn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
SEED_ENV = "SCARCELEARN_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# -- helpers ---------------------------------------------------------------------

def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ParameterError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return int(args.seed)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ParameterError(f"expected comma-separated numbers, got {text!r}") from None


def _load_config(path) -> dict:
    return read_json(path) if path else {}


def _hyper(cfg: dict) -> HyperParams:
    try:
        return HyperParams.from_dict(cfg)
    except TypeError as exc:
        raise ParameterError(f"bad hyperparameter config: {exc}") from None


def _synth_config(d: dict, seed: int) -> SynthConfig:
    d = dict(d or {})
    d["seed"] = seed
    for key in ("channels", "alpha_channels"):
        if key in d:
            d[key] = tuple(d[key])
    if "bands" in d:
        d["bands"] = tuple(tuple(b) for b in d["bands"])
    try:
        return SynthConfig(**d)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"bad synth config: {exc}") from None


def load_dataset(path) -> dict[str, FeatureMatrix]:
    """A features CSV, or a directory of ``*.features.csv`` files (one per subject)."""
    path = Path(path)
    files = [path] if path.is_file() else sorted(path.glob("*.features.csv"))
    if not files:
        raise InputError(f"no feature files found at {path}")
    out = {}
    for f in files:
        fm = read_features(f)
        out[fm.subject_id or f.stem] = fm
    return out


def read_label_segments(path) -> list[tuple[float, float, int]]:
    """CSV rows ``start_s,end_s,label`` (header optional)."""
    segs = []
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    for k, line in enumerate(lines):
        parts = [p.strip() for p in line.split(",")]
        if not line.strip() or line.startswith("#"):
            continue
        try:
            lo, hi, lab = float(parts[0]), float(parts[1]), int(parts[2])
        except (ValueError, IndexError):
            if k == 0:
                continue  # header
            raise InputError(f"{path}:{k + 1}: expected start_s,end_s,label") from None
        if lab not in (0, 1) or hi <= lo:
            raise InputError(f"{path}:{k + 1}: need end > start and label 0 or 1")
        segs.append((lo, hi, lab))
    return segs


def segment_labels(times, window_s: float, segments) -> np.ndarray:
    """Label of the segment holding each epoch's centre; unlabeled elsewhere."""
    centre = np.asarray(times, dtype=np.float64) + window_s / 2
    labels = np.full(centre.size, UNLABELED, dtype=np.int64)
    for lo, hi, lab in segments:
        labels[(centre >= lo) & (centre < hi)] = lab
    return labels


def _standardizer_dict(s: Standardizer) -> dict:
    return {"mean": s.mean.tolist(), "std": s.std.tolist()}


def _standardizer_from(d: dict) -> Standardizer:
    return Standardizer(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def _write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_trace(path, values, column: str):
    _write_text(path, "iteration," + column + "\n"
                + "".join(f"{k + 1},{v!r}\n" for k, v in enumerate(values)))


# -- commands --------------------------------------------------------------------

def cmd_synth(args):
    seed = _seed(args)
    cfg = _synth_config(_load_config(args.config), seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = provenance(seed, cfg)
    subjects = []
    for session in generate_synthetic(cfg):
        sid = session.subject_id
        fm = session_features(session, cfg.preprocess)
        write_features(out / f"{sid}.features.csv", fm, meta)
        if args.raw:
            write_recording(out / f"{sid}.rec.json", session.recording, meta)
            _write_label_segments(out / f"{sid}.labels.csv", session.labeled, session.recording.sample_rate_hz)
        subjects.append(sid)
        log.info("wrote %s (%d epochs)", sid, len(fm))
    write_json(out / "manifest.json", {"provenance": meta, "synth_config": cfg, "subjects": subjects})
    print(f"wrote {len(subjects)} subjects to {out}")


def _write_label_segments(path, labeled, fs):
    per_s = labeled[::int(round(fs))]
    rows = ["start_s,end_s,label"]
    start = 0
    for k in range(1, per_s.size + 1):
        if k == per_s.size or per_s[k] != per_s[start]:
            if per_s[start] != UNLABELED:
                rows.append(f"{start},{k},{int(per_s[start])}")
            start = k
    _write_text(path, "\n".join(rows) + "\n")


def cmd_preprocess(args):
    rec = read_recording(args.inp)
    k = None if args.no_wavelet else args.wavelet_k
    notch = None if args.no_notch else args.notch_hz
    clean = denoise(rec, highpass_hz=args.highpass_hz, notch_hz=notch, wavelet_k=k)
    cfg = {"highpass_hz": args.highpass_hz, "notch_hz": notch, "wavelet_k": k}
    write_recording(args.out, clean, {**provenance(_seed(args), cfg), "preprocess": cfg})
    print(f"wrote {args.out}")


def cmd_features(args):
    rec = read_recording(args.inp)
    fm = featurize(rec, args.window, args.step, subject_id=args.subject or Path(args.inp).name.split(".")[0])
    if args.labels:
        fm.labels = segment_labels(fm.times, args.window, read_label_segments(args.labels))
    cfg = {"window_s": args.window, "step_s": args.step, "labels": bool(args.labels)}
    write_features(args.out, fm, provenance(_seed(args), cfg))
    print(f"wrote {len(fm)} epochs x {fm.dim} features to {args.out}")


def cmd_pretrain(args):
    seed = _seed(args)
    fm = read_features(args.features)
    hyper = _hyper(_load_config(args.config))
    cd = hyper.cd
    overrides = {k: v for k, v in (("iterations", args.iters), ("learning_rate", args.lr),
                                   ("momentum", args.momentum)) if v is not None}
    cd = replace(cd, seed=seed, **overrides)
    spec = NetworkSpec.parse(args.spec, input_dim=fm.dim)
    std = fit_standardizer(fm)
    x = std.apply(fm.values)
    traces = []
    stack = pretrain_stack(x, spec, cd, traces)
    if args.trace:
        cols = ",".join(f"layer{k + 1}" for k in range(len(traces)))
        rows = zip(*(t.errors for t in traces))
        _write_text(args.trace, f"iteration,{cols}\n"
                    + "".join(f"{i + 1}," + ",".join(repr(v) for v in r) + "\n" for i, r in enumerate(rows)))
    cfg = {"spec": spec, "cd": cd}
    write_json(args.out, {"rbms": [rbm_to_dict(p) for p in stack], "standardizer": _standardizer_dict(std),
                          "provenance": provenance(seed, cfg)})
    print(f"wrote {len(stack)}-layer stack to {args.out}")


def cmd_finetune(args):
    seed = _seed(args)
    stack = read_stack(args.stack)
    payload = read_json(args.stack)
    fm = read_features(args.features)
    std = _standardizer_from(payload["standardizer"]) if "standardizer" in payload else fit_standardizer(fm)
    dcfg = DropoutConfig.parse(args.dropout) if args.dropout else DropoutConfig()
    fcfg = FinetuneConfig(learning_rate=args.lr, momentum=args.momentum, iterations=args.iters, seed=seed)
    if args.mode == CLASSIFIER:
        lab = fm.labeled()
        if len(lab) == 0:
            raise InputError("classifier fine-tuning needs labeled rows")
        net = build_classifier(stack)
        net, trace = finetune(net, std.apply(lab.values), one_hot(lab.labels), dcfg, fcfg)
    else:
        net = build_autoencoder(stack)
        x = std.apply(fm.values)
        net, trace = finetune(net, x, x, dcfg, fcfg)
    if args.trace:
        _write_trace(args.trace, trace, "loss")
    cfg = {"mode": args.mode, "dropout": dcfg, "finetune": fcfg}
    write_net(args.out, net, {**provenance(seed, cfg), "standardizer": _standardizer_dict(std)})
    print(f"wrote {args.mode} net to {args.out}")


def cmd_eval(args):
    seed = _seed(args)
    data = load_dataset(args.data)
    hyper = _hyper(_load_config(args.config))
    if args.protocol == "cv":
        spec = method_spec(args.method)
        audit = FitAudit()
        mean, std = fivefold_cv(data, spec, args.repeats, seed, hyper, audit)
        result = {"protocol": "fivefold_cv", "method": spec.id, "name": spec.name, "mean": mean, "std": std,
                  "leakage_audit": audit.summary()}
        cfg = {"hyper": hyper, "method": spec.id, "repeats": args.repeats, "subjects": sorted(data)}
    else:
        fracs = _floats(args.fractions)
        report = reports.reproduce_table(data, fracs, parse_methods(args.methods), args.repeats, seed, hyper,
                                         args.jobs)
        result = {"protocol": "prefix", **report}
        cfg = report["config"]
    result["provenance"] = provenance(seed, cfg)
    _emit(result, args.out)


def _emit(payload, out):
    if out:
        write_json(out, payload)
        print(f"wrote {out}")
    else:
        print(json.dumps(to_jsonable(payload), indent=2, sort_keys=True))


def _reproduce_inputs(args, cfg):
    seed = _seed(args)
    if args.data:
        data = load_dataset(args.data)
        synth_snapshot = {"data": str(args.data)}
    else:
        scfg = _synth_config(cfg.get("synth", {}), seed)
        data = {s.subject_id: session_features(s, scfg.preprocess) for s in generate_synthetic(scfg)}
        synth_snapshot = {"synth": scfg}
    return seed, data, synth_snapshot


def cmd_reproduce(args):
    cfg = _load_config(args.config) if args.config else reports.default_reproduce_config()
    seed, data, snapshot = _reproduce_inputs(args, cfg)
    hyper = _hyper(cfg.get("hyper", {}))
    fracs = cfg.get("fractions", list(PAPER_FRACTIONS))
    methods = cfg.get("methods", list(range(1, 11)))
    if isinstance(methods, str):
        methods = parse_methods(methods)
    repeats = int(cfg.get("repeats", 5))
    report = reports.reproduce_table(data, fracs, methods, repeats, seed, hyper, args.jobs, to_jsonable(snapshot))
    report["trends"] = reports.check_trends(report)
    write_json(args.out, report)
    print(f"wrote {args.out}")
    if args.render:
        _write_text(args.render, reports.render_markdown(report))
        print(f"wrote {args.render}")
    if args.series:
        _write_text(args.series, reports.series_csv(report))


def cmd_sweep(args):
    cfg = _load_config(args.config)
    seed, data, _ = _reproduce_inputs(args, cfg)
    hyper = _hyper(cfg.get("hyper", {}))
    structures = args.structures.split(";") if args.structures else reports.PAPER_STRUCTURES
    result = reports.sweep_structures(data, structures, repeats=args.repeats, seed=seed, hyper=hyper,
                                      jobs=args.jobs)
    _emit(result, args.out)


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help=f"master seed ({SEED_ENV} overrides)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="scarcelearn", description="Scarce-label deep learning for EEG engagement assessment.")
    p.add_argument("--version", action="version", version=f"scarcelearn {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic multi-subject dataset")
    s.add_argument("--config", help="JSON with SynthConfig fields")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--raw", action="store_true", help="also write raw recordings and label segments")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("preprocess", parents=[common], help="high-pass, notch and wavelet-denoise a recording")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--no-notch", action="store_true")
    s.add_argument("--notch-hz", type=float, default=60.0)
    s.add_argument("--highpass-hz", type=float, default=0.5)
    s.add_argument("--wavelet-k", type=float, default=1.5)
    s.add_argument("--no-wavelet", action="store_true")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("features", parents=[common], help="PSD features of a recording")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--labels", help="CSV of start_s,end_s,label segments")
    s.add_argument("--out", required=True)
    s.add_argument("--window", type=float, default=3.0)
    s.add_argument("--step", type=float, default=1.0)
    s.add_argument("--subject")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("pretrain", parents=[common], help="greedy RBM pretraining of a stack")
    s.add_argument("--features", required=True)
    s.add_argument("--spec", default="100,20")
    s.add_argument("--iters", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--momentum", type=float)
    s.add_argument("--config", help="JSON hyperparameters ({'cd': {...}})")
    s.add_argument("--trace", help="write first-layer reconstruction error per iteration (CSV)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pretrain)

    s = sub.add_parser("finetune", parents=[common], help="fine-tune a pretrained stack")
    s.add_argument("--stack", required=True)
    s.add_argument("--mode", choices=(CLASSIFIER, AUTOENCODER), required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--dropout", help="p_visible,p_hidden, e.g. 0.2,0.5")
    s.add_argument("--iters", type=int, default=2000)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--momentum", type=float, default=0.9)
    s.add_argument("--trace", help="write loss per iteration (CSV)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_finetune)

    s = sub.add_parser("eval", parents=[common], help="evaluate methods under a protocol")
    s.add_argument("protocol", choices=("cv", "prefix"))
    s.add_argument("--data", required=True, help="features CSV or directory of *.features.csv")
    s.add_argument("--method", default="3", help="method id for cv")
    s.add_argument("--methods", default="1-10", help="method ids for prefix, e.g. 1-10 or 1,3,7")
    s.add_argument("--fractions", default=",".join(f"{f:g}" for f in PAPER_FRACTIONS))
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--config", help="JSON hyperparameters")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("reproduce", parents=[common], help="full method x fraction table")
    s.add_argument("--data", help="features directory; synthetic data is generated when omitted")
    s.add_argument("--config", help="JSON with synth, hyper, fractions, methods, repeats")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--render", help="write the markdown table here")
    s.add_argument("--series", help="write accuracy-vs-fraction CSV here")
    s.set_defaults(func=cmd_reproduce)

    s = sub.add_parser("sweep", parents=[common], help="fivefold CV over network structures")
    s.add_argument("--data")
    s.add_argument("--config")
    s.add_argument("--structures", help="';'-separated, e.g. '100-20;20'")
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
