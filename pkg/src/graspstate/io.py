"""Plain-text persistence: trials, datasets, trained bundles, reports.

Every format is line-oriented text. Floats that must survive a round
trip exactly are written with repr() (shortest exact form); report CSVs
round to %.9g since they are read by people, not reloaded. Nothing here
writes timestamps or machine-specific fields, so rerunning a command
reproduces output files byte for byte.
"""

from __future__ import annotations

import json
import os
from typing import Optional, Sequence

import numpy as np

from .core import (
    CAMERA_HEIGHT,
    CAMERA_WIDTH,
    CameraFrame,
    Dataset,
    GraspState,
    Trial,
)
from .evaluation import COUNTER_NAMES, ClassificationStream, EvalReport
from .features import NormalizationParams, PcaModel, SensorMask
from .forest import DecisionTree, RfHyperparams, RfModel
from .lstm import LstmHyperparams, LstmModel
from .pipeline import Bundle

TRIAL_FORMAT = "graspstate-trial/1"
DATASET_FORMAT = "graspstate-dataset/1"
BUNDLE_FORMAT = "graspstate-bundle/1"
REPORT_FORMAT = "graspstate-report/1"

_SPLIT_ORDER = ("train", "val", "test")


def _f(value) -> str:
    return repr(float(value))


def _csv_f(value) -> str:
    return "%.9g" % float(value)


def _float_row(values) -> str:
    return " ".join(_f(v) for v in np.asarray(values, dtype=float))


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split()], dtype=float)


# ------------------------------------------------------------ mask RLE


def encode_mask(mask: np.ndarray) -> str:
    """Row-wise run lengths, zeros first within each row, rows '|'-joined."""
    rows = []
    for row in np.asarray(mask):
        change = np.flatnonzero(np.diff(row)) + 1
        bounds = np.concatenate(([0], change, [len(row)]))
        runs = np.diff(bounds).tolist()
        if row[0] == 1:
            runs = [0] + runs
        rows.append(" ".join(str(r) for r in runs))
    return "|".join(rows)


def decode_mask(text: str, height: int = CAMERA_HEIGHT, width: int = CAMERA_WIDTH) -> np.ndarray:
    rows = text.split("|")
    if len(rows) != height:
        raise ValueError(f"expected {height} mask rows, got {len(rows)}")
    mask = np.zeros((height, width), dtype=np.uint8)
    for r, row_text in enumerate(rows):
        pos = 0
        value = 0
        for run in row_text.split():
            n = int(run)
            if value:
                mask[r, pos : pos + n] = 1
            pos += n
            value ^= 1
        if pos != width:
            raise ValueError(f"mask row {r} spans {pos} cells, expected {width}")
    return mask


# ---------------------------------------------------------------- trial


def save_trial(trial: Trial, path: str) -> None:
    lines = [
        f"format {TRIAL_FORMAT}",
        f"id {trial.trial_id}",
        f"scenario {trial.scenario.key}",
        f"frames {len(trial)}",
        f"camera_frames {len(trial.camera)}",
        f"slip_onset {'none' if trial.slip_onset is None else trial.slip_onset}",
        f"terminal_event {trial.terminal_event}",
        "begin frames",
    ]
    for i in range(len(trial)):
        fields = [_f(trial.t[i])]
        fields.extend(_f(v) for v in trial.imu[i])
        fields.append(str(int(trial.ir[i])))
        fields.append(str(int(trial.tension[i])))
        fields.append(str(int(trial.tactile[i])))
        fields.append(str(int(trial.camera_index[i])))
        fields.append(str(int(trial.labels[i])))
        lines.append(" ".join(fields))
    lines.append("begin camera")
    for frame in trial.camera:
        lines.append(f"{_f(frame.t)}: {encode_mask(frame.mask)}")
    lines.append("end")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _header_value(line: str, key: str) -> str:
    prefix = key + " "
    if not line.startswith(prefix):
        raise ValueError(f"expected {key!r} header, got {line!r}")
    return line[len(prefix) :]


def load_trial(path: str) -> Trial:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if _header_value(lines[0], "format") != TRIAL_FORMAT:
        raise ValueError(f"{path}: not a {TRIAL_FORMAT} file")
    trial_id = _header_value(lines[1], "id")
    scenario = GraspState.from_key(_header_value(lines[2], "scenario"))
    n = int(_header_value(lines[3], "frames"))
    n_cam = int(_header_value(lines[4], "camera_frames"))
    onset_text = _header_value(lines[5], "slip_onset")
    slip_onset = None if onset_text == "none" else int(onset_text)
    terminal_event = int(_header_value(lines[6], "terminal_event"))
    if lines[7] != "begin frames":
        raise ValueError(f"{path}: missing frame table")

    t = np.empty(n)
    imu = np.empty((n, 18))
    ir = np.empty(n, dtype=np.int64)
    tension = np.empty(n, dtype=np.int64)
    tactile = np.empty(n, dtype=np.int64)
    camera_index = np.empty(n, dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    base = 8
    for i in range(n):
        fields = lines[base + i].split()
        if len(fields) != 24:
            raise ValueError(f"{path}: frame row {i} has {len(fields)} fields")
        t[i] = float(fields[0])
        imu[i] = [float(v) for v in fields[1:19]]
        ir[i], tension[i], tactile[i] = int(fields[19]), int(fields[20]), int(fields[21])
        camera_index[i] = int(fields[22])
        labels[i] = int(fields[23])
    if lines[base + n] != "begin camera":
        raise ValueError(f"{path}: missing camera table")
    camera = []
    for j in range(n_cam):
        stamp, _, body = lines[base + n + 1 + j].partition(": ")
        camera.append(CameraFrame(t=float(stamp), mask=decode_mask(body)))
    if lines[base + n + 1 + n_cam] != "end":
        raise ValueError(f"{path}: missing end marker")
    return Trial(
        trial_id=trial_id,
        scenario=scenario,
        t=t,
        imu=imu,
        ir=ir,
        tension=tension,
        tactile=tactile,
        camera_index=camera_index,
        labels=labels,
        camera=camera,
        slip_onset=slip_onset,
        terminal_event=terminal_event,
    )


# -------------------------------------------------------------- dataset


def write_config(path: str, mapping: dict) -> None:
    """Deterministic JSON: sorted keys, two-space indent, one trailing \\n."""
    with open(path, "w", newline="\n") as fh:
        json.dump(mapping, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_dataset(
    dataset: Dataset,
    root: str,
    base_seed: Optional[int] = None,
    counts: Optional[dict] = None,
) -> None:
    os.makedirs(root, exist_ok=True)
    manifest = {
        "format": DATASET_FORMAT,
        "base_seed": base_seed,
        "counts": {k: list(v) for k, v in counts.items()} if counts else None,
        "splits": {},
    }
    for split in _SPLIT_ORDER:
        trials = dataset.split(split)
        split_dir = os.path.join(root, split)
        os.makedirs(split_dir, exist_ok=True)
        manifest["splits"][split] = [tr.trial_id for tr in trials]
        for tr in trials:
            save_trial(tr, os.path.join(split_dir, f"{tr.trial_id}.trial"))
    write_config(os.path.join(root, "manifest.json"), manifest)


def load_dataset(root: str) -> Dataset:
    manifest = read_config(os.path.join(root, "manifest.json"))
    if manifest.get("format") != DATASET_FORMAT:
        raise ValueError(f"{root}: not a {DATASET_FORMAT} directory")
    loaded = {}
    for split in _SPLIT_ORDER:
        loaded[split] = [
            load_trial(os.path.join(root, split, f"{trial_id}.trial"))
            for trial_id in manifest["splits"][split]
        ]
    return Dataset(**loaded)


# ---------------------------------------------------------------- models


def _save_norm(params: NormalizationParams, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(_float_row(params.lo) + "\n")
        fh.write(_float_row(params.hi) + "\n")


def _load_norm(path: str) -> NormalizationParams:
    with open(path) as fh:
        lo = _parse_floats(fh.readline())
        hi = _parse_floats(fh.readline())
    return NormalizationParams(lo=lo, hi=hi)


def _save_pca(pca: PcaModel, path: str) -> None:
    k, dim = pca.components.shape
    with open(path, "w", newline="\n") as fh:
        fh.write(f"pca {k} {dim}\n")
        fh.write(_float_row(pca.mean) + "\n")
        fh.write(_float_row(pca.eigenvalues) + "\n")
        for row in pca.components:
            fh.write(_float_row(row) + "\n")


def _load_pca(path: str) -> PcaModel:
    with open(path) as fh:
        tag, k, dim = fh.readline().split()
        if tag != "pca":
            raise ValueError(f"{path}: not a pca file")
        k, dim = int(k), int(dim)
        mean = _parse_floats(fh.readline())
        eigenvalues = _parse_floats(fh.readline())
        components = np.stack([_parse_floats(fh.readline()) for _ in range(k)])
    if mean.shape != (dim,) or components.shape != (k, dim):
        raise ValueError(f"{path}: inconsistent dimensions")
    return PcaModel(mean=mean, components=components, eigenvalues=eigenvalues)


def _save_forest(model: RfModel, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"forest {model.n_features} {len(model.trees)}\n")
        for tree in model.trees:
            fh.write(f"tree {tree.n_nodes}\n")
            for i in range(tree.n_nodes):
                counts = " ".join(str(int(c)) for c in tree.counts[i])
                fh.write(
                    f"{tree.feature[i]} {_f(tree.threshold[i])} "
                    f"{tree.left[i]} {tree.right[i]} {counts}\n"
                )


def _load_forest(path: str, hp: RfHyperparams) -> RfModel:
    with open(path) as fh:
        tag, n_features, n_trees = fh.readline().split()
        if tag != "forest":
            raise ValueError(f"{path}: not a forest file")
        trees = []
        for _ in range(int(n_trees)):
            marker, n_nodes = fh.readline().split()
            if marker != "tree":
                raise ValueError(f"{path}: corrupt tree marker")
            n_nodes = int(n_nodes)
            feature = np.empty(n_nodes, dtype=np.int64)
            threshold = np.empty(n_nodes)
            left = np.empty(n_nodes, dtype=np.int64)
            right = np.empty(n_nodes, dtype=np.int64)
            counts = np.empty((n_nodes, 4), dtype=np.int64)
            for i in range(n_nodes):
                fields = fh.readline().split()
                feature[i] = int(fields[0])
                threshold[i] = float(fields[1])
                left[i] = int(fields[2])
                right[i] = int(fields[3])
                counts[i] = [int(v) for v in fields[4:8]]
            trees.append(
                DecisionTree(
                    feature=feature,
                    threshold=threshold,
                    left=left,
                    right=right,
                    counts=counts,
                )
            )
    return RfModel(trees=trees, hyperparams=hp, n_features=int(n_features))


def _save_lstm(model: LstmModel, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(
            f"lstm {model.n_inputs} {model.hidden_size} {model.seq_len}\n"
        )
        for name, p in model.param_items():
            mat = np.atleast_2d(p)
            fh.write(f"{name} {mat.shape[0]} {mat.shape[1]}\n")
            for row in mat:
                fh.write(_float_row(row) + "\n")


def _load_lstm(path: str) -> LstmModel:
    with open(path) as fh:
        tag, n_inputs, hidden, seq_len = fh.readline().split()
        if tag != "lstm":
            raise ValueError(f"{path}: not an lstm file")
        params = {}
        for _ in range(5):
            name, rows, cols = fh.readline().split()
            mat = np.stack([_parse_floats(fh.readline()) for _ in range(int(rows))])
            params[name] = mat if int(rows) > 1 else mat[0]
    return LstmModel(
        w_x=params["w_x"],
        w_h=params["w_h"],
        b=params["b"],
        w_out=params["w_out"],
        b_out=params["b_out"],
        n_inputs=int(n_inputs),
        hidden_size=int(hidden),
        seq_len=int(seq_len),
    )


def _rf_hp_dict(hp: RfHyperparams) -> dict:
    return {
        "n_estimators": hp.n_estimators,
        "criterion": hp.criterion,
        "max_features": hp.max_features,
        "min_samples_split": hp.min_samples_split,
        "max_depth": hp.max_depth,
        "seed": hp.seed,
    }


def _lstm_hp_dict(hp: LstmHyperparams) -> dict:
    return {
        "seq_len": hp.seq_len,
        "learning_rate": hp.learning_rate,
        "n_layers": hp.n_layers,
        "epochs": hp.epochs,
        "hidden_size": hp.hidden_size,
        "batch_size": hp.batch_size,
        "grad_clip_norm": hp.grad_clip_norm,
        "adam_beta1": hp.adam_beta1,
        "adam_beta2": hp.adam_beta2,
        "adam_eps": hp.adam_eps,
        "seed": hp.seed,
    }


def save_bundle(bundle: Bundle, out_dir: str, extra_config: Optional[dict] = None) -> None:
    """Write a trained bundle as a self-contained model directory."""
    os.makedirs(out_dir, exist_ok=True)
    config = {
        "format": BUNDLE_FORMAT,
        "family": bundle.family,
        "mask": bundle.mask.label(),
        "has_pca": bundle.pca is not None,
        "loss_trace": (
            [float(v) for v in bundle.loss_trace]
            if bundle.loss_trace is not None
            else None
        ),
    }
    if bundle.family == "rf":
        config["hyperparams"] = _rf_hp_dict(bundle.model.hyperparams)
        _save_forest(bundle.model, os.path.join(out_dir, "forest.txt"))
    else:
        config["hyperparams"] = None
        _save_lstm(bundle.model, os.path.join(out_dir, "lstm.txt"))
    if extra_config:
        config.update(extra_config)
    _save_norm(bundle.norm, os.path.join(out_dir, "norm.txt"))
    if bundle.pca is not None:
        _save_pca(bundle.pca, os.path.join(out_dir, "pca.txt"))
    write_config(os.path.join(out_dir, "config.json"), config)


def load_bundle(model_dir: str) -> Bundle:
    config = read_config(os.path.join(model_dir, "config.json"))
    if config.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"{model_dir}: not a {BUNDLE_FORMAT} directory")
    from .evaluation import mask_from_label

    mask = mask_from_label(config["mask"])
    norm = _load_norm(os.path.join(model_dir, "norm.txt"))
    pca = (
        _load_pca(os.path.join(model_dir, "pca.txt")) if config["has_pca"] else None
    )
    family = config["family"]
    if family == "rf":
        hp = RfHyperparams(**config["hyperparams"])
        model: object = _load_forest(os.path.join(model_dir, "forest.txt"), hp)
    elif family == "lstm":
        model = _load_lstm(os.path.join(model_dir, "lstm.txt"))
    else:
        raise ValueError(f"{model_dir}: unknown family {family!r}")
    return Bundle(
        family=family,
        model=model,
        mask=mask,
        norm=norm,
        pca=pca,
        loss_trace=config.get("loss_trace"),
    )


# --------------------------------------------------------------- reports


def write_report_csv(report: EvalReport, path: str) -> None:
    """Four class rows (precision/recall/f1) then seven counter rows."""
    lines = ["kind,name,precision,recall,f1,count"]
    for state in GraspState:
        p, r, f = report.per_class[int(state)]
        lines.append(f"class,{state.key},{_csv_f(p)},{_csv_f(r)},{_csv_f(f)},")
    for name in COUNTER_NAMES:
        lines.append(f"counter,{name},,,,{report.counters[name]}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_confusion_csv(confusion: np.ndarray, path: str) -> None:
    header = "actual," + ",".join(s.key for s in GraspState)
    lines = [header]
    for state in GraspState:
        row = ",".join(str(int(v)) for v in confusion[int(state)])
        lines.append(f"{state.key},{row}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_stream_csv(trial: Trial, stream: ClassificationStream, path: str) -> None:
    lines = ["frame,label,prediction"]
    labels = trial.labels[stream.end_frames]
    for i in range(len(stream)):
        lines.append(
            f"{int(stream.end_frames[i])},{int(labels[i])},{int(stream.predictions[i])}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ablation_csv(rows: Sequence, path: str) -> None:
    header = "subset," + ",".join(f"{s.key}_f1" for s in GraspState)
    lines = [header]
    for label, f1 in rows:
        lines.append(label + "," + ",".join(_csv_f(v) for v in f1))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_taxonomy_csv(rows: Sequence, path: str) -> None:
    """Per-trial counter table; rows are (trial_id, scenario, counters)."""
    header = "trial_id,scenario," + ",".join(COUNTER_NAMES)
    lines = [header]
    for trial_id, scenario, counters in rows:
        values = ",".join(str(counters[name]) for name in COUNTER_NAMES)
        lines.append(f"{trial_id},{scenario.key},{values}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
