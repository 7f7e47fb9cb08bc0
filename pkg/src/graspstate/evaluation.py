"""Stream post-processing, per-class metrics and the failure taxonomy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import GraspState, Trial
from .features import (
    NormalizationParams,
    PcaModel,
    SensorMask,
    assemble_lstm_sequences,
    assemble_rf_windows,
)
from .forest import RfModel, rf_predict_batch
from .lstm import LstmModel, predict_batch as lstm_predict_batch

N_CLASSES = len(GraspState)
DEFAULT_FILTER_WINDOW = 15
DEFAULT_SLACK = 10

COUNTER_NAMES = (
    "missed_slips",
    "false_slips",
    "missed_successful_pick",
    "false_successful_pick",
    "missed_failed_grasp",
    "false_failed_grasp",
    "unsustained_successful_pick",
)


@dataclass
class ClassificationStream:
    """Per-frame predictions aligned to trial frame indices."""

    trial_id: str
    end_frames: np.ndarray
    predictions: np.ndarray

    def __post_init__(self):
        self.end_frames = np.asarray(self.end_frames, dtype=np.int64)
        self.predictions = np.asarray(self.predictions, dtype=np.int64)
        if self.end_frames.shape != self.predictions.shape:
            raise ValueError("end_frames and predictions differ in length")
        if len(self.end_frames) > 1 and not (np.diff(self.end_frames) == 1).all():
            raise ValueError("stream indices must increase with unit stride")

    def __len__(self) -> int:
        return len(self.end_frames)


def majority_filter(
    stream: ClassificationStream, window: int = DEFAULT_FILTER_WINDOW
) -> ClassificationStream:
    """Replace each tumbling window with its majority class.

    Windows are consecutive and non-overlapping; the final partial
    window is still polled over the samples it has. A tie keeps the
    previous window's class when that class is among the leaders, and
    otherwise (or for the first window) falls to canonical class order.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    pred = stream.predictions
    out = pred.copy()
    prev: Optional[int] = None
    for start in range(0, len(pred), window):
        chunk = pred[start : start + window]
        counts = np.bincount(chunk, minlength=N_CLASSES)
        top = counts.max()
        leaders = np.nonzero(counts == top)[0]
        if prev is not None and prev in leaders:
            winner = prev
        else:
            winner = int(leaders[0])
        out[start : start + window] = winner
        prev = winner
    return ClassificationStream(
        trial_id=stream.trial_id, end_frames=stream.end_frames, predictions=out
    )


def prf1(confusion: np.ndarray) -> np.ndarray:
    """Per-class (precision, recall, f1) from a rows=actual confusion matrix.

    Classes absent from both axes read 0 across the board rather than
    dividing by zero.
    """
    confusion = np.asarray(confusion, dtype=np.int64)
    if confusion.shape != (N_CLASSES, N_CLASSES):
        raise ValueError(f"confusion must be {N_CLASSES}x{N_CLASSES}")
    out = np.zeros((N_CLASSES, 3))
    for k in range(N_CLASSES):
        tp = confusion[k, k]
        predicted = confusion[:, k].sum()
        actual = confusion[k, :].sum()
        p = tp / predicted if predicted > 0 else 0.0
        r = tp / actual if actual > 0 else 0.0
        f = 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0
        out[k] = (p, r, f)
    return out


def _runs(values: np.ndarray, target: int) -> list:
    """Maximal [start, end] index runs where values == target."""
    hits = np.nonzero(values == target)[0]
    if len(hits) == 0:
        return []
    breaks = np.nonzero(np.diff(hits) > 1)[0]
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [len(hits) - 1]])
    return [(int(hits[a]), int(hits[b])) for a, b in zip(starts, ends)]


def failure_taxonomy(
    trial: Trial, stream: ClassificationStream, slack: int = DEFAULT_SLACK
) -> dict:
    """Binary per-trial failure counters from a prediction stream.

    Segment matching tolerates +-slack frames. The stream must align to
    the trial (same id, frame indices inside the trial). Counters:

    * missed_slips: a labeled slip segment no predicted-slip sample touches;
    * false_slips: a predicted slip run touching no labeled slip segment;
    * missed_successful_pick: pick trial with no pick prediction from the
      terminal event onward;
    * false_successful_pick: a predicted pick run entirely before the
      terminal event (the fruit was still attached);
    * missed_failed_grasp: failed trial whose post-event stream says
      successful pick and never failed grasp;
    * false_failed_grasp: pick trial containing any failed-grasp prediction;
    * unsustained_successful_pick: pick trial where the pick is detected
      after the terminal event but the final sample no longer says so.
    """
    if slack < 0:
        raise ValueError("slack must be >= 0")
    if stream.trial_id != trial.trial_id:
        raise ValueError(
            f"stream is for {stream.trial_id!r}, trial is {trial.trial_id!r}"
        )
    if len(stream) == 0:
        raise ValueError("empty prediction stream")
    frames = stream.end_frames
    if frames[0] < 0 or frames[-1] >= len(trial):
        raise ValueError("stream frame indices fall outside the trial")

    pred = stream.predictions
    slip = int(GraspState.SLIP)
    pick = int(GraspState.SUCCESSFUL_PICK)
    fail = int(GraspState.FAILED_GRASP)
    counters = {name: 0 for name in COUNTER_NAMES}

    label_segments = _runs(trial.labels, slip)
    pred_slip_frames = frames[pred == slip]
    for seg_start, seg_end in label_segments:
        touched = (
            (pred_slip_frames >= seg_start - slack)
            & (pred_slip_frames <= seg_end + slack)
        ).any()
        if not touched:
            counters["missed_slips"] = 1
            break
    for run_a, run_b in _runs(pred, slip):
        lo, hi = frames[run_a], frames[run_b]
        touches = any(
            lo <= seg_end + slack and hi >= seg_start - slack
            for seg_start, seg_end in label_segments
        )
        if not touches:
            counters["false_slips"] = 1
            break

    term = trial.terminal_event
    post = frames >= term - slack
    pick_runs = _runs(pred, pick)
    has_pick_post = bool(((pred == pick) & post).any())
    if any(frames[b] < term - slack for _, b in pick_runs):
        counters["false_successful_pick"] = 1

    if trial.scenario == GraspState.SUCCESSFUL_PICK:
        if not has_pick_post:
            counters["missed_successful_pick"] = 1
        if (pred == fail).any():
            counters["false_failed_grasp"] = 1
        if has_pick_post and pred[-1] != pick:
            counters["unsustained_successful_pick"] = 1
    else:
        has_fail_post = bool(((pred == fail) & post).any())
        if has_pick_post and not has_fail_post:
            counters["missed_failed_grasp"] = 1
    return counters


@dataclass
class EvalReport:
    """Aggregated evaluation of one model over a list of trials."""

    confusion: np.ndarray
    per_class: np.ndarray  # (N_CLASSES, 3): precision, recall, f1
    counters: dict
    trial_counts: dict
    n_windows: int
    filtered: bool
    slack: int

    def f1(self, state: GraspState) -> float:
        return float(self.per_class[int(state), 2])


def classify_trial(
    model,
    trial: Trial,
    mask: SensorMask,
    norm: Optional[NormalizationParams] = None,
    pca: Optional[PcaModel] = None,
) -> ClassificationStream:
    """Dense stride-1 prediction stream for one trial."""
    if isinstance(model, RfModel):
        windows = assemble_rf_windows(trial, mask, norm=norm, pca=pca)
        X = np.stack([w.values for w in windows])
        pred = rf_predict_batch(model, X)
        start = windows[0].end_frame
    elif isinstance(model, LstmModel):
        samples = assemble_lstm_sequences(
            trial, mask, seq_len=model.seq_len, norm=norm, pca=pca
        )
        X = np.stack([s.values for s in samples])
        pred = lstm_predict_batch(model, X)
        start = samples[0].end_frame
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return ClassificationStream(
        trial_id=trial.trial_id,
        end_frames=np.arange(start, start + len(pred)),
        predictions=pred,
    )


def _window_labels(trial: Trial, stream: ClassificationStream) -> np.ndarray:
    return trial.labels[stream.end_frames]


def default_filter(model) -> bool:
    """Smoothing default per family: off for forests, on for the LSTM."""
    return isinstance(model, LstmModel)


def evaluate(
    model,
    trials: Sequence[Trial],
    mask: SensorMask,
    norm: Optional[NormalizationParams] = None,
    pca: Optional[PcaModel] = None,
    filter_on: Optional[bool] = None,
    filter_window: int = DEFAULT_FILTER_WINDOW,
    slack: int = DEFAULT_SLACK,
    streams_out: Optional[list] = None,
) -> EvalReport:
    """Classify trials and aggregate metrics, optionally smoothing first.

    filter_on None picks the family default. streams_out, when given,
    collects the (possibly filtered) per-trial streams in trial order.
    """
    if len(trials) == 0:
        raise ValueError("no trials to evaluate")
    use_filter = default_filter(model) if filter_on is None else filter_on
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    counters = {name: 0 for name in COUNTER_NAMES}
    trial_counts: dict = {}
    n_windows = 0
    for trial in sorted(trials, key=lambda tr: tr.trial_id):
        stream = classify_trial(model, trial, mask, norm=norm, pca=pca)
        if use_filter:
            stream = majority_filter(stream, filter_window)
        if streams_out is not None:
            streams_out.append(stream)
        labels = _window_labels(trial, stream)
        np.add.at(confusion, (labels, stream.predictions), 1)
        for name, value in failure_taxonomy(trial, stream, slack).items():
            counters[name] += value
        key = trial.scenario.key
        trial_counts[key] = trial_counts.get(key, 0) + 1
        n_windows += len(stream)
    return EvalReport(
        confusion=confusion,
        per_class=prf1(confusion),
        counters=counters,
        trial_counts=trial_counts,
        n_windows=n_windows,
        filtered=use_filter,
        slack=slack,
    )


SINGLE_SENSOR_NAMES = (
    "imu",
    "ir",
    "tension",
    "tactile",
    "camera(com)",
    "camera(pixel)",
    "camera(regions)",
    "camera(pca)",
)

# standard multi-sensor combinations studied alongside the singles; the
# IMU anchors every one of them, the camera always reduces to COM
COMBO_NAMES = (
    "imu+ir",
    "imu+ir+tension",
    "imu+ir+tactile",
    "imu+ir+tension+tactile",
    "imu+tension+tactile",
    "imu+tension",
    "imu+tactile",
    "imu+ir+camera(com)",
    "imu+camera(com)",
    "imu+tension+camera(com)",
    "imu+ir+tension+tactile+camera(com)",
    "imu+tension+tactile+camera(com)",
)


def mask_from_label(label: str) -> SensorMask:
    """Parse a subset label like "imu+tension+camera(com)"."""
    names = []
    method = "com"
    for part in label.split("+"):
        part = part.strip()
        if part.startswith("camera(") and part.endswith(")"):
            method = part[len("camera(") : -1]
            part = "camera"
        names.append(part)
    return SensorMask.from_names(names, camera_method=method)


def ablation_run(
    dataset,
    family: str,
    subsets: Sequence[str],
    eval_split: str = "test",
    **train_kwargs,
) -> list:
    """Train one model per sensor subset and tabulate per-class F1.

    Returns [(subset label, f1 array over classes in canonical order)].
    Duplicate subset labels produce identical rows because every run
    derives its seeds the same way.
    """
    from .pipeline import train_bundle  # local import; pipeline imports us

    if len(subsets) == 0:
        raise ValueError("no sensor subsets given")
    rows = []
    for label in subsets:
        mask = mask_from_label(label)
        bundle = train_bundle(dataset.train, family, mask, **train_kwargs)
        report = bundle.evaluate(dataset.split(eval_split))
        rows.append((label, report.per_class[:, 2].copy()))
    return rows
