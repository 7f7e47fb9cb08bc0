"""Domain types: grasp states, transition legality, trials and datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional, Sequence

import numpy as np

SENSOR_RATE_HZ = 150
CAMERA_RATE_HZ = 30
CAMERA_DECIMATION = SENSOR_RATE_HZ // CAMERA_RATE_HZ  # sensor frames per camera frame
IMU_CHANNEL_COUNT = 18  # 3 IMUs x (accel xyz + gyro xyz)
ADC_MAX = 1023  # 10-bit converters on the scalar channels
CAMERA_WIDTH = 64
CAMERA_HEIGHT = 48


class GraspState(IntEnum):
    """Grasp states in canonical order; the order breaks classifier ties."""

    NO_SLIP = 0
    SLIP = 1
    FAILED_GRASP = 2
    SUCCESSFUL_PICK = 3

    @property
    def key(self) -> str:
        return self.name.lower()

    @classmethod
    def from_key(cls, key: str) -> "GraspState":
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown grasp state {key!r}") from None


STATES = tuple(GraspState)
TERMINAL_STATES = frozenset({GraspState.FAILED_GRASP, GraspState.SUCCESSFUL_PICK})

_DEFAULT_EDGES = frozenset(
    {(s, s) for s in GraspState}
    | {
        (GraspState.NO_SLIP, GraspState.SLIP),
        (GraspState.SLIP, GraspState.NO_SLIP),
        (GraspState.NO_SLIP, GraspState.SUCCESSFUL_PICK),
        (GraspState.SLIP, GraspState.SUCCESSFUL_PICK),
        (GraspState.NO_SLIP, GraspState.FAILED_GRASP),
        (GraspState.SLIP, GraspState.FAILED_GRASP),
    }
)


@dataclass(frozen=True)
class TransitionTable:
    """Set of legal (from, to) state pairs.

    Every state must keep its self-loop and terminal states must not
    lead anywhere else; both are enforced at construction.
    """

    edges: frozenset = _DEFAULT_EDGES

    def __post_init__(self):
        edges = frozenset(
            (GraspState(a), GraspState(b)) for a, b in self.edges
        )
        object.__setattr__(self, "edges", edges)
        for s in GraspState:
            if (s, s) not in edges:
                raise ValueError(f"missing self-loop for {s.key}")
        for a, b in edges:
            if a in TERMINAL_STATES and a != b:
                raise ValueError(f"terminal state {a.key} must not exit to {b.key}")

    @classmethod
    def default(cls) -> "TransitionTable":
        return cls()


def valid_transition(table: TransitionTable, a: GraspState, b: GraspState) -> bool:
    """True when the table allows moving from state a to state b."""
    return (GraspState(a), GraspState(b)) in table.edges


def validate_label_sequence(table: TransitionTable, labels: Sequence) -> Optional[int]:
    """Return the index of the first illegal step, or None if all legal.

    Index i refers to the transition labels[i-1] -> labels[i]. An empty
    sequence is rejected outright.
    """
    if len(labels) == 0:
        raise ValueError("empty label sequence")
    prev = GraspState(labels[0])
    for i in range(1, len(labels)):
        cur = GraspState(labels[i])
        if (prev, cur) not in table.edges:
            return i
        prev = cur
    return None


@dataclass
class SensorFrame:
    """One 150 Hz sample: 18 IMU scalars plus three 10-bit ADC channels."""

    t: float
    imu: np.ndarray  # shape (18,): body, left finger, right finger; accel then gyro
    ir: int
    tension: int
    tactile: int
    camera_index: int

    def __post_init__(self):
        self.imu = np.asarray(self.imu, dtype=float)
        if self.imu.shape != (IMU_CHANNEL_COUNT,):
            raise ValueError(f"imu must have {IMU_CHANNEL_COUNT} channels")
        for name in ("ir", "tension", "tactile"):
            v = getattr(self, name)
            if not 0 <= v <= ADC_MAX:
                raise ValueError(f"{name}={v} outside [0, {ADC_MAX}]")


@dataclass
class CameraFrame:
    """One 30 fps binary segmentation mask, stored row-major (height, width)."""

    t: float
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if self.mask.shape != (CAMERA_HEIGHT, CAMERA_WIDTH):
            raise ValueError(
                f"mask must be {CAMERA_HEIGHT}x{CAMERA_WIDTH}, got {self.mask.shape}"
            )
        if not np.isin(self.mask, (0, 1)).all():
            raise ValueError("mask cells must be 0 or 1")


@dataclass
class Trial:
    """One picking attempt: aligned sensor arrays, camera masks and labels.

    Scalar channels live in column arrays rather than per-frame objects;
    frame(i) materializes a SensorFrame view when object access helps.
    slip_velocity carries generator kinematics and is absent on trials
    read back from disk.
    """

    trial_id: str
    scenario: GraspState
    t: np.ndarray
    imu: np.ndarray  # (n, 18) float
    ir: np.ndarray
    tension: np.ndarray
    tactile: np.ndarray
    camera_index: np.ndarray
    labels: np.ndarray  # (n,) GraspState values
    camera: list = field(default_factory=list)
    slip_onset: Optional[int] = None
    terminal_event: int = 0
    slip_velocity: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.scenario not in TERMINAL_STATES:
            raise ValueError("scenario must be a terminal state")
        n = len(self.t)
        for name in ("imu", "ir", "tension", "tactile", "camera_index", "labels"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from time axis")
        if not 0 <= self.terminal_event < n:
            raise ValueError("terminal_event outside the trial")

    def __len__(self) -> int:
        return len(self.t)

    def frame(self, i: int) -> SensorFrame:
        return SensorFrame(
            t=float(self.t[i]),
            imu=self.imu[i],
            ir=int(self.ir[i]),
            tension=int(self.tension[i]),
            tactile=int(self.tactile[i]),
            camera_index=int(self.camera_index[i]),
        )

    def label_sequence(self) -> list:
        return [GraspState(v) for v in self.labels]

    def validate(self, table: Optional[TransitionTable] = None) -> None:
        """Raise if labels, rates or camera indexing break the trial contract."""
        table = table or TransitionTable.default()
        bad = validate_label_sequence(table, self.labels)
        if bad is not None:
            raise ValueError(f"illegal label transition at frame {bad}")
        if GraspState(self.labels[-1]) != self.scenario:
            raise ValueError("final label must equal the scenario outcome")
        if not (self.labels[self.terminal_event :] == int(self.scenario)).all():
            raise ValueError("labels after terminal_event must stay terminal")
        if len(self.camera) == 0:
            raise ValueError("trial has no camera frames")
        idx = self.camera_index
        if idx.min() < 0 or idx.max() >= len(self.camera):
            raise ValueError("camera_index points outside the camera list")
        for name in ("ir", "tension", "tactile"):
            col = getattr(self, name)
            if col.min() < 0 or col.max() > ADC_MAX:
                raise ValueError(f"{name} outside [0, {ADC_MAX}]")


@dataclass
class Dataset:
    """Train/validation/test split of trials."""

    train: list
    val: list
    test: list

    def split(self, name: str) -> list:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError:
            raise ValueError(f"unknown split {name!r}") from None

    def splits(self) -> Iterable:
        yield "train", self.train
        yield "val", self.val
        yield "test", self.test
