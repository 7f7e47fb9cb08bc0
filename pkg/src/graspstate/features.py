"""Feature extraction: FFT windows, camera reducers, normalization, assembly.

Two representations come out of the same trials. Forest windows compress
25 samples into frequency magnitudes per IMU channel plus the latest
scalar/camera readings; sequence samples keep 15 raw per-frame vectors
for the recurrent model. Both carry the label of their final sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import (
    CAMERA_HEIGHT,
    CAMERA_WIDTH,
    CameraFrame,
    GraspState,
    IMU_CHANNEL_COUNT,
    Trial,
)

FFT_WINDOW = 25
FFT_BINS = FFT_WINDOW // 2 + 1  # non-negative-frequency magnitudes
SEQUENCE_LENGTH = 15

CAMERA_METHODS = ("com", "pixel", "regions", "pca")
SCALAR_CHANNELS = ("ir", "tension", "tactile")

# center-of-mass sentinel when the mask holds no set cell
COM_ABSENT = (-1.0, -1.0)

# seven 8x8 occupancy regions strung along the horizontal mid-line
REGION_CENTERS_X = (4, 13, 22, 31, 40, 49, 58)
REGION_CENTER_Y = 24
REGION_SIZE = 8
REGION_THRESHOLD = 0.25

PCA_COMPONENTS = 5

_CAMERA_WIDTHS = {"com": 2, "pixel": 1, "regions": 7, "pca": PCA_COMPONENTS}


@dataclass(frozen=True)
class SensorMask:
    """Which channels feed the feature pipeline.

    Single-channel masks are legal (channel studies train on exactly one
    sensor), but at least one channel must stay enabled. camera_method
    is required exactly when the camera is enabled.
    """

    imu: bool = True
    ir: bool = False
    tension: bool = False
    tactile: bool = False
    camera: bool = False
    camera_method: Optional[str] = None

    def __post_init__(self):
        if self.camera:
            if self.camera_method not in CAMERA_METHODS:
                raise ValueError(
                    f"camera_method must be one of {CAMERA_METHODS}, "
                    f"got {self.camera_method!r}"
                )
        elif self.camera_method is not None:
            raise ValueError("camera_method given but camera disabled")
        if not (self.imu or self.ir or self.tension or self.tactile or self.camera):
            raise ValueError("mask enables no channels")

    @classmethod
    def from_names(cls, names: Sequence[str], camera_method: str = "com") -> "SensorMask":
        flags = {"imu": False, "ir": False, "tension": False, "tactile": False,
                 "camera": False}
        for name in names:
            key = name.strip().lower()
            if key not in flags:
                raise ValueError(f"unknown sensor channel {key!r}")
            flags[key] = True
        method = camera_method if flags["camera"] else None
        return cls(camera_method=method, **flags)

    def enabled_scalars(self) -> tuple:
        return tuple(ch for ch in SCALAR_CHANNELS if getattr(self, ch))

    def camera_width(self) -> int:
        return _CAMERA_WIDTHS[self.camera_method] if self.camera else 0

    def window_width(self) -> int:
        """Feature count of one forest window under this mask."""
        w = IMU_CHANNEL_COUNT * FFT_BINS if self.imu else 0
        return w + len(self.enabled_scalars()) + self.camera_width()

    def frame_width(self) -> int:
        """Feature count of one raw per-frame vector under this mask."""
        w = IMU_CHANNEL_COUNT if self.imu else 0
        return w + len(self.enabled_scalars()) + self.camera_width()

    def label(self) -> str:
        parts = [ch for ch in ("imu", "ir", "tension", "tactile") if getattr(self, ch)]
        if self.camera:
            parts.append(f"camera({self.camera_method})")
        return "+".join(parts)


@dataclass
class FeatureWindow:
    """One forest sample: feature vector labeled at its final frame."""

    values: np.ndarray
    label: GraspState
    trial_id: str
    end_frame: int


@dataclass
class SequenceSample:
    """One recurrent sample: (seq_len, width) raw vectors, final-frame label."""

    values: np.ndarray
    label: GraspState
    trial_id: str
    end_frame: int


def fft_magnitudes(samples: np.ndarray) -> np.ndarray:
    """Magnitudes of the 13 non-negative-frequency bins of a 25-sample DFT.

    Unnormalized forward transform: a constant c maps to bin 0 magnitude
    25*c, an exact-bin unit cosine to magnitude 12.5 at its bin.
    """
    x = np.asarray(samples, dtype=float)
    if x.shape != (FFT_WINDOW,):
        raise ValueError(f"expected {FFT_WINDOW} samples, got shape {x.shape}")
    return np.abs(np.fft.rfft(x))


def camera_com(frame: CameraFrame) -> Optional[tuple]:
    """(x, y) centroid of the set cells, or None for an empty mask."""
    ys, xs = np.nonzero(frame.mask)
    if len(xs) == 0:
        return None
    return (float(xs.mean()), float(ys.mean()))


def camera_pixels(frame: CameraFrame) -> int:
    """Count of set cells."""
    return int(frame.mask.sum())


def camera_regions(frame: CameraFrame) -> list:
    """Seven occupancy booleans over fixed 8x8 boxes on the mid-line.

    A region reads True when at least REGION_THRESHOLD of its cells are
    set.
    """
    half = REGION_SIZE // 2
    y0 = REGION_CENTER_Y - half
    need = REGION_THRESHOLD * REGION_SIZE * REGION_SIZE
    out = []
    for cx in REGION_CENTERS_X:
        box = frame.mask[y0 : y0 + REGION_SIZE, cx - half : cx - half + REGION_SIZE]
        out.append(bool(box.sum() >= need))
    return out


@dataclass
class PcaModel:
    """Top principal components of flattened training masks."""

    mean: np.ndarray
    components: np.ndarray  # (n_components, dim), orthonormal rows
    eigenvalues: np.ndarray  # non-increasing
    fitted: bool = True


def _flat_mask(frame) -> np.ndarray:
    mask = frame.mask if isinstance(frame, CameraFrame) else np.asarray(frame)
    return mask.ravel().astype(float)


def _complete_basis(components: list, dim: int, count: int) -> list:
    """Deterministically extend an orthonormal set with canonical axes."""
    out = list(components)
    axis = 0
    while len(out) < count:
        v = np.zeros(dim)
        v[axis] = 1.0
        axis += 1
        for c in out:
            v -= (v @ c) * c
        norm = np.linalg.norm(v)
        if norm > 1e-9:
            out.append(v / norm)
    return out


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    # orient each component so its largest-magnitude entry is positive
    i = int(np.argmax(np.abs(vec)))
    return -vec if vec[i] < 0 else vec


def pca_fit(frames: Sequence[CameraFrame], n_components: int = PCA_COMPONENTS) -> PcaModel:
    """Fit principal components to flattened masks.

    With fewer frames than pixels the Gram-matrix route keeps the
    eigenproblem at (n_frames x n_frames); otherwise the pixel-space
    covariance is decomposed directly. Zero-variance directions are
    padded with canonical axes so the component count always holds.
    """
    if len(frames) < n_components:
        raise ValueError(f"need at least {n_components} frames, got {len(frames)}")
    X = np.stack([_flat_mask(f) for f in frames])
    k, dim = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean

    comps: list = []
    eigs: list = []
    if k < dim:
        gram = (Xc @ Xc.T) / k
        w, u = np.linalg.eigh(gram)
        for i in range(len(w) - 1, -1, -1):
            if len(comps) == n_components:
                break
            lam = float(w[i])
            if lam <= 1e-10:
                break
            v = Xc.T @ u[:, i]
            comps.append(_fix_sign(v / np.linalg.norm(v)))
            eigs.append(lam)
    else:
        cov = (Xc.T @ Xc) / k
        w, u = np.linalg.eigh(cov)
        for i in range(len(w) - 1, -1, -1):
            if len(comps) == n_components:
                break
            lam = float(w[i])
            if lam <= 1e-10:
                break
            comps.append(_fix_sign(u[:, i].copy()))
            eigs.append(lam)

    comps = _complete_basis(comps, dim, n_components)
    eigs += [0.0] * (n_components - len(eigs))
    return PcaModel(
        mean=mean,
        components=np.stack(comps),
        eigenvalues=np.asarray(eigs),
    )


def pca_project(model: PcaModel, frame: CameraFrame) -> np.ndarray:
    """Project one mask onto the fitted components."""
    if not model.fitted:
        raise ValueError("projection before fit")
    flat = _flat_mask(frame)
    if flat.shape != model.mean.shape:
        raise ValueError("frame dimension differs from the fitted model")
    return model.components @ (flat - model.mean)


@dataclass
class NormalizationParams:
    """Per-feature min/max from the training split."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo/hi shape mismatch")
        if (self.hi < self.lo).any():
            raise ValueError("hi must be >= lo")


def _fit_minmax(matrix: np.ndarray) -> NormalizationParams:
    if matrix.size == 0:
        raise ValueError("cannot fit normalization on an empty set")
    return NormalizationParams(lo=matrix.min(axis=0), hi=matrix.max(axis=0))


def normalize_matrix(params: NormalizationParams, matrix: np.ndarray) -> np.ndarray:
    """Map rows into [0, 1]; constant features pin to 0, outliers clamp."""
    span = params.hi - params.lo
    safe = np.where(span > 0, span, 1.0)
    out = (matrix - params.lo) / safe
    out = np.where(span > 0, out, 0.0)
    return np.clip(out, 0.0, 1.0)


def fit_normalization(train_windows: Sequence[FeatureWindow]) -> NormalizationParams:
    """Per-feature bounds over training forest windows."""
    if len(train_windows) == 0:
        raise ValueError("no training windows")
    return _fit_minmax(np.stack([w.values for w in train_windows]))


def apply_normalization(params: NormalizationParams, window: FeatureWindow) -> FeatureWindow:
    if window.values.shape != params.lo.shape:
        raise ValueError(
            f"window has {window.values.shape[0]} features, "
            f"params expect {params.lo.shape[0]}"
        )
    values = normalize_matrix(params, window.values[None, :])[0]
    return FeatureWindow(
        values=values,
        label=window.label,
        trial_id=window.trial_id,
        end_frame=window.end_frame,
    )


def fit_sequence_normalization(samples: Sequence[SequenceSample]) -> NormalizationParams:
    """Per-feature bounds over every frame vector of the training sequences."""
    if len(samples) == 0:
        raise ValueError("no training sequences")
    return _fit_minmax(np.concatenate([s.values for s in samples], axis=0))


def apply_sequence_normalization(
    params: NormalizationParams, sample: SequenceSample
) -> SequenceSample:
    if sample.values.shape[1] != params.lo.shape[0]:
        raise ValueError(
            f"sequence has {sample.values.shape[1]} features, "
            f"params expect {params.lo.shape[0]}"
        )
    return SequenceSample(
        values=normalize_matrix(params, sample.values),
        label=sample.label,
        trial_id=sample.trial_id,
        end_frame=sample.end_frame,
    )


def camera_feature_table(
    frames: Sequence[CameraFrame], method: str, pca: Optional[PcaModel] = None
) -> np.ndarray:
    """Per-camera-frame feature rows for one reducer method."""
    if method not in CAMERA_METHODS:
        raise ValueError(f"unknown camera method {method!r}")
    if method == "pca":
        if pca is None:
            raise ValueError("camera method 'pca' needs a fitted PcaModel")
        return np.stack([pca_project(pca, f) for f in frames])
    rows = np.empty((len(frames), _CAMERA_WIDTHS[method]))
    for j, f in enumerate(frames):
        if method == "com":
            rows[j] = camera_com(f) or COM_ABSENT
        elif method == "pixel":
            rows[j] = camera_pixels(f)
        else:
            rows[j] = np.asarray(camera_regions(f), dtype=float)
    return rows


def _scalar_columns(trial: Trial, mask: SensorMask) -> list:
    return [getattr(trial, ch).astype(float) for ch in mask.enabled_scalars()]


def assemble_rf_windows(
    trial: Trial,
    mask: SensorMask,
    norm: Optional[NormalizationParams] = None,
    pca: Optional[PcaModel] = None,
) -> list:
    """Slide 25-sample windows over a trial and emit forest features.

    Per window: 13 FFT magnitudes for each enabled IMU channel
    (channel-major), then the final-sample value of each enabled scalar
    channel, then the camera features of the frame current at the final
    sample. Stride 1; the window label is the trial label at its final
    sample.
    """
    n = len(trial)
    if n < FFT_WINDOW:
        raise ValueError(f"trial shorter than one {FFT_WINDOW}-sample window")
    blocks = []
    if mask.imu:
        swept = sliding_window_view(trial.imu, FFT_WINDOW, axis=0)  # (n-24, 18, 25)
        mags = np.abs(np.fft.rfft(swept, axis=2))  # (n-24, 18, 13)
        blocks.append(mags.reshape(len(mags), IMU_CHANNEL_COUNT * FFT_BINS))
    for col in _scalar_columns(trial, mask):
        blocks.append(col[FFT_WINDOW - 1 :, None])
    if mask.camera:
        table = camera_feature_table(trial.camera, mask.camera_method, pca)
        blocks.append(table[trial.camera_index[FFT_WINDOW - 1 :]])
    X = np.hstack(blocks)
    if norm is not None:
        X = normalize_matrix(norm, X)
    labels = trial.labels[FFT_WINDOW - 1 :]
    return [
        FeatureWindow(
            values=X[i],
            label=GraspState(labels[i]),
            trial_id=trial.trial_id,
            end_frame=FFT_WINDOW - 1 + i,
        )
        for i in range(len(X))
    ]


def assemble_lstm_sequences(
    trial: Trial,
    mask: SensorMask,
    seq_len: int = SEQUENCE_LENGTH,
    norm: Optional[NormalizationParams] = None,
    pca: Optional[PcaModel] = None,
) -> list:
    """Slide raw per-frame vectors into fixed-length labeled sequences.

    Frame vectors hold raw IMU channels (no FFT), enabled scalars and
    current camera features. Stride 1; the sequence label is the trial
    label at its final frame.
    """
    n = len(trial)
    if seq_len < 1:
        raise ValueError("seq_len must be >= 1")
    if n < seq_len:
        raise ValueError(f"trial shorter than one {seq_len}-frame sequence")
    blocks = []
    if mask.imu:
        blocks.append(trial.imu)
    for col in _scalar_columns(trial, mask):
        blocks.append(col[:, None])
    if mask.camera:
        table = camera_feature_table(trial.camera, mask.camera_method, pca)
        blocks.append(table[trial.camera_index])
    F = np.hstack(blocks)
    if norm is not None:
        F = normalize_matrix(norm, F)
    swept = sliding_window_view(F, seq_len, axis=0)  # (n-seq_len+1, width, seq_len)
    values = np.swapaxes(swept, 1, 2)  # (n-seq_len+1, seq_len, width)
    labels = trial.labels[seq_len - 1 :]
    return [
        SequenceSample(
            values=values[i],
            label=GraspState(labels[i]),
            trial_id=trial.trial_id,
            end_frame=seq_len - 1 + i,
        )
        for i in range(len(values))
    ]
