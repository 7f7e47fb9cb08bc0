"""Toolkit for grasp-state classification on synthetic picking trials.

Generates labeled multimodal sensor streams (IMU, IR, tension, tactile,
binary camera masks) and turns them into windowed feature sets for two
classifier families built from scratch: a random forest over FFT windows
and a single-layer LSTM over raw sample sequences. Evaluation adds a
majority smoothing filter, per-class metrics and a failure-event
taxonomy, all behind a deterministic command-line harness.
"""

from .core import (
    CameraFrame,
    Dataset,
    GraspState,
    SensorFrame,
    TERMINAL_STATES,
    TransitionTable,
    Trial,
    valid_transition,
    validate_label_sequence,
)

__all__ = [
    "CameraFrame",
    "Dataset",
    "GraspState",
    "SensorFrame",
    "TERMINAL_STATES",
    "TransitionTable",
    "Trial",
    "valid_transition",
    "validate_label_sequence",
]

__version__ = "0.1.0"
