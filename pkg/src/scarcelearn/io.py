"""File formats: recordings, feature CSVs, and JSON for RBMs, nets and SVMs.

Every artifact carries a small provenance block with the tool version, the
seed and a hash of the producing configuration.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .deepnet import DeepNet, DropoutConfig, Layer
from .errors import InputError
from .features import UNLABELED, FeatureMatrix
from .rbm import RbmParams
from .signal import RawRecording
from .svm import SvmModel


def to_jsonable(obj):
    """Dataclasses, numpy arrays and tuples turned into plain JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def provenance(seed, config) -> dict:
    return {"tool": "scarcelearn", "version": __version__, "seed": seed, "config_hash": config_hash(config)}


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


# -- recordings ---------------------------------------------------------------

def write_recording(path, rec: RawRecording, meta: dict | None = None):
    """JSON header at ``path`` plus little-endian float64 samples, channel-major,
    in a sibling ``.f64`` file."""
    path = Path(path)
    data_path = path.with_suffix(".f64")
    path.parent.mkdir(parents=True, exist_ok=True)
    rec.data.astype("<f8").tofile(data_path)
    header = {
        "sample_rate_hz": rec.sample_rate_hz,
        "channel_names": rec.channel_names,
        "sample_count": rec.n_samples,
        "encoding": "f64le",
        "data_file": data_path.name,
    }
    if meta:
        header["meta"] = meta
    write_json(path, header)


def read_recording(path) -> RawRecording:
    path = Path(path)
    header = read_json(path)
    if header.get("encoding") != "f64le":
        raise InputError(f"unsupported sample encoding {header.get('encoding')!r}")
    data_path = path.parent / header.get("data_file", path.with_suffix(".f64").name)
    try:
        raw = np.fromfile(data_path, dtype="<f8")
    except FileNotFoundError:
        raise InputError(f"missing sample file {data_path}") from None
    names = header["channel_names"]
    count = int(header["sample_count"])
    if raw.size != len(names) * count:
        raise InputError(f"{data_path} holds {raw.size} samples, header promises {len(names) * count}")
    return RawRecording(float(header["sample_rate_hz"]), names, raw.reshape(len(names), count))


# -- feature matrices ------------------------------------------------------------

def write_features(path, fm: FeatureMatrix, meta: dict | None = None):
    """CSV with header ``t,label,f000..``; unlabeled rows have an empty label.

    Provenance goes in leading ``#`` comment lines.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = fm.labels if fm.labels is not None else np.full(len(fm), UNLABELED)
    with path.open("w", newline="") as fh:
        if meta:
            fh.write("# " + canonical_json(meta) + "\n")
        if fm.subject_id:
            fh.write(f"# subject={fm.subject_id}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "label"] + [f"f{k:03d}" for k in range(fm.dim)])
        for t, lab, row in zip(fm.times, labels, fm.values):
            writer.writerow([repr(float(t)), "" if lab == UNLABELED else int(lab)]
                            + [repr(float(v)) for v in row])


def read_features(path, subject_id: str | None = None) -> FeatureMatrix:
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    sid = subject_id
    rows, labels, times = [], [], []
    with path.open(newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                if line.startswith("# subject=") and sid is None:
                    sid = line.strip().split("=", 1)[1]
                continue
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader, None)
    if not header or header[:2] != ["t", "label"]:
        raise InputError(f"{path} does not start with a 't,label,...' header")
    for rec in reader:
        if not rec:
            continue
        if len(rec) != len(header):
            raise InputError(f"{path}: row with {len(rec)} fields, header has {len(header)}")
        times.append(float(rec[0]))
        labels.append(UNLABELED if rec[1] == "" else int(rec[1]))
        rows.append([float(v) for v in rec[2:]])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 2)
    return FeatureMatrix(values, np.array(labels, dtype=np.int64), np.array(times), sid or path.stem)


# -- models ---------------------------------------------------------------------

def rbm_to_dict(p: RbmParams) -> dict:
    return {"kind": p.kind, "D": p.n_visible, "K": p.n_hidden, "W": p.W.ravel().tolist(),
            "b": p.b.tolist(), "c": p.c.tolist(), "sigma": p.sigma}


def rbm_from_dict(d: dict) -> RbmParams:
    W = np.asarray(d["W"], dtype=np.float64).reshape(int(d["D"]), int(d["K"]))
    return RbmParams(d["kind"], W, d["c"], d["b"], float(d.get("sigma", 1.0)))


def write_stack(path, stack, meta: dict | None = None):
    write_json(path, {"rbms": [rbm_to_dict(p) for p in stack], "provenance": meta or {}})


def read_stack(path) -> list[RbmParams]:
    return [rbm_from_dict(d) for d in read_json(path)["rbms"]]


def net_to_dict(net: DeepNet) -> dict:
    return {
        "topology": net.topology,
        "layer_sizes": net.layer_sizes,
        "representation_layer_index": net.representation_layer_index,
        "weights": [l.W.ravel().tolist() for l in net.layers],
        "biases": [l.b.tolist() for l in net.layers],
        "activations": [l.activation for l in net.layers],
        "dropout_config": {"p_visible": net.dropout.p_visible, "p_hidden": net.dropout.p_hidden},
    }


def net_from_dict(d: dict) -> DeepNet:
    sizes = d["layer_sizes"]
    layers = [
        Layer(np.asarray(w, dtype=np.float64).reshape(sizes[k], sizes[k + 1]),
              np.asarray(b, dtype=np.float64), act)
        for k, (w, b, act) in enumerate(zip(d["weights"], d["biases"], d["activations"]))
    ]
    dc = d.get("dropout_config", {})
    return DeepNet(d["topology"], layers, int(d["representation_layer_index"]),
                   DropoutConfig(dc.get("p_visible", 0.0), dc.get("p_hidden", 0.0)))


def write_net(path, net: DeepNet, meta: dict | None = None):
    write_json(path, {**net_to_dict(net), "provenance": meta or {}})


def read_net(path) -> DeepNet:
    return net_from_dict(read_json(path))


def svm_to_dict(m: SvmModel) -> dict:
    return {"w": m.w.tolist(), "bias": m.bias, "C": m.C}


def svm_from_dict(d: dict) -> SvmModel:
    return SvmModel(np.asarray(d["w"], dtype=np.float64), float(d["bias"]), float(d["C"]))
