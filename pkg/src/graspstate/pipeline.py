"""Training orchestration: assemble features, fit, bundle for evaluation.

Dense stride-1 windows are kept for evaluation, but training thins them
by a per-trial stride so the from-scratch learners stay fast at desk
scale; normalization is then fit on exactly the windows the model sees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Trial
from .evaluation import EvalReport, classify_trial, evaluate
from .features import (
    NormalizationParams,
    PcaModel,
    SensorMask,
    apply_normalization,
    apply_sequence_normalization,
    assemble_lstm_sequences,
    assemble_rf_windows,
    fit_normalization,
    fit_sequence_normalization,
    pca_fit,
)
from .forest import RfHyperparams, rf_train
from .lstm import LstmHyperparams, lstm_train

FAMILIES = ("rf", "lstm")
DEFAULT_RF_TRAIN_STRIDE = 5
DEFAULT_LSTM_TRAIN_STRIDE = 10
DEFAULT_PCA_MAX_FRAMES = 1024


def select_pca_frames(trials: Sequence[Trial], max_frames: int = DEFAULT_PCA_MAX_FRAMES):
    """Evenly thin the pooled camera frames down to max_frames."""
    frames = [f for trial in sorted(trials, key=lambda tr: tr.trial_id) for f in trial.camera]
    if len(frames) <= max_frames:
        return frames
    keep = np.unique(np.linspace(0, len(frames) - 1, max_frames).round().astype(int))
    return [frames[i] for i in keep]


@dataclass
class Bundle:
    """A trained model plus everything needed to replay its pipeline."""

    family: str
    model: object
    mask: SensorMask
    norm: NormalizationParams
    pca: Optional[PcaModel] = None
    loss_trace: Optional[list] = None

    def classify(self, trial: Trial):
        return classify_trial(self.model, trial, self.mask, norm=self.norm, pca=self.pca)

    def evaluate(self, trials: Sequence[Trial], **kwargs) -> EvalReport:
        return evaluate(
            self.model, trials, self.mask, norm=self.norm, pca=self.pca, **kwargs
        )


def train_bundle(
    train_trials: Sequence[Trial],
    family: str,
    mask: SensorMask,
    rf_hp: Optional[RfHyperparams] = None,
    lstm_hp: Optional[LstmHyperparams] = None,
    train_stride: Optional[int] = None,
    pca_max_frames: int = DEFAULT_PCA_MAX_FRAMES,
) -> Bundle:
    """Fit one classifier family on the training trials under a mask."""
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}")
    if len(train_trials) == 0:
        raise ValueError("no training trials")
    pca = None
    if mask.camera and mask.camera_method == "pca":
        pca = pca_fit(select_pca_frames(train_trials, pca_max_frames))

    ordered = sorted(train_trials, key=lambda tr: tr.trial_id)
    if family == "rf":
        hp = rf_hp or RfHyperparams()
        stride = DEFAULT_RF_TRAIN_STRIDE if train_stride is None else train_stride
        if stride < 1:
            raise ValueError("train_stride must be >= 1")
        windows = [
            w
            for trial in ordered
            for w in assemble_rf_windows(trial, mask, pca=pca)[::stride]
        ]
        norm = fit_normalization(windows)
        windows = [apply_normalization(norm, w) for w in windows]
        model: object = rf_train(windows, hp)
        trace = None
    else:
        hp = lstm_hp or LstmHyperparams()
        stride = DEFAULT_LSTM_TRAIN_STRIDE if train_stride is None else train_stride
        if stride < 1:
            raise ValueError("train_stride must be >= 1")
        samples = [
            s
            for trial in ordered
            for s in assemble_lstm_sequences(trial, mask, seq_len=hp.seq_len, pca=pca)[
                ::stride
            ]
        ]
        norm = fit_sequence_normalization(samples)
        samples = [apply_sequence_normalization(norm, s) for s in samples]
        model, trace = lstm_train(samples, hp)
    return Bundle(
        family=family, model=model, mask=mask, norm=norm, pca=pca, loss_trace=trace
    )
