"""Synthetic picking trials with per-state multimodal sensor signatures.

The generator mimics a tomato-picking rig: a gripper closes on a mounted
fruit and pulls at constant speed until the attempt ends in either a
clean separation (successful pick) or the fruit escaping the gripper
(failed grasp), optionally preceded by a slip phase. Channel behavior encodes
what each sensor can physically witness:

* tension rises while the fruit stays attached, saws downward during
  slip, settles at a small hanging-weight residual after a successful
  pick and collapses to an idle level after a failed grasp;
* IR and tactile report fruit presence, drift while the fruit slides,
  and fall to an empty-gripper baseline after a failed grasp;
* finger IMUs carry a band-limited slip vibration, a terminal jerk in
  both outcomes and a sustained empty-gripper rattle (distinct band)
  after failures;
* the camera sees a binary fruit blob that drifts with slip and exits
  the frame after a failed grasp.

All randomness flows from one 64-bit seed per trial, so identical
parameters reproduce identical trials byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .core import (
    ADC_MAX,
    CAMERA_DECIMATION,
    CAMERA_HEIGHT,
    CAMERA_WIDTH,
    CameraFrame,
    Dataset,
    GraspState,
    SENSOR_RATE_HZ,
    TERMINAL_STATES,
    Trial,
)
from .seeding import derive_seed

_DT = 1.0 / SENSOR_RATE_HZ
# two FFT windows of samples is the least a trial can carry and still
# produce features on both sides of an event
_MIN_FRAMES = 50


@dataclass(frozen=True)
class NoiseLevels:
    """Per-channel multipliers on the signature model's noise sigmas."""

    imu: float = 1.0
    ir: float = 1.0
    tension: float = 1.0
    tactile: float = 1.0

    def __post_init__(self):
        for name in ("imu", "ir", "tension", "tactile"):
            if getattr(self, name) < 0:
                raise ValueError(f"noise level {name} must be >= 0")


@dataclass(frozen=True)
class ScenarioParams:
    """Timeline of one trial: pull kinematics plus event fractions.

    slip_onset_fraction and terminal_fraction are measured as fractions
    of the pull duration, counted from the moment the pull starts (the
    settle margins sit outside them). slip_onset_fraction None means the
    trial never slips.
    """

    pull_speed: float  # mm/s
    seed: int
    pull_distance: float = 180.0  # mm
    settle_pre: float = 0.5  # s of quiet data before the pull
    settle_post: float = 0.5  # s of quiet data after the pull completes
    slip_onset_fraction: Optional[float] = None
    terminal_fraction: float = 0.85
    noise: NoiseLevels = field(default_factory=NoiseLevels)

    def __post_init__(self):
        if not 15.0 <= self.pull_speed <= 25.0:
            raise ValueError("pull_speed must lie in [15, 25] mm/s")
        if self.pull_distance <= 0:
            raise ValueError("pull_distance must be positive")
        if self.settle_pre < 0 or self.settle_post < 0:
            raise ValueError("settle margins must be >= 0")
        if not 0.0 < self.terminal_fraction <= 1.0:
            raise ValueError("terminal_fraction must lie in (0, 1]")
        if self.slip_onset_fraction is not None and not (
            0.0 < self.slip_onset_fraction < self.terminal_fraction
        ):
            raise ValueError("need 0 < slip_onset_fraction < terminal_fraction")

    @property
    def pull_time(self) -> float:
        return self.pull_distance / self.pull_speed

    @property
    def duration(self) -> float:
        return self.settle_pre + self.pull_time + self.settle_post


@dataclass(frozen=True)
class SignatureModel:
    """Channel response levels per grasp state, shared across a dataset.

    Scalar-channel sigmas default to 2% of the 10-bit range; IMU sigmas
    to 2% of the working accel/gyro spans. Presence levels must clear
    the empty baseline by at least 3 sigma so presence stays readable.
    """

    # tension (ADC counts)
    tension_preload: float = 280.0  # gripper closed, fruit still mounted
    tension_ramp_slope: float = 55.0  # counts/s while pulling
    tension_dip_fraction: float = 0.15  # sawtooth dip depth during slip
    tension_dip_hz: float = 3.0
    tension_success_residual: float = 160.0  # picked fruit hanging in the gripper
    tension_fail_residual: float = 30.0  # empty gripper
    tension_decay_s: float = 0.08
    tension_sigma: float = 20.0

    # IR and tactile (ADC counts)
    ir_present: float = 700.0
    ir_absent: float = 60.0
    ir_drift_per_mm: float = 12.0  # counts lost per mm of slip travel
    ir_sigma: float = 20.0
    tactile_present: float = 650.0
    tactile_absent: float = 50.0
    tactile_drift_per_mm: float = 15.0
    tactile_sigma: float = 20.0
    level_jitter: float = 25.0  # per-trial spread of the presence levels
    absent_decay_s: float = 0.03

    # IMU (accel m/s^2, gyro rad/s)
    imu_accel_sigma: float = 0.8
    imu_gyro_sigma: float = 0.4
    slip_vib_amp: float = 4.0
    slip_vib_band: tuple = (42.0, 54.0)
    rattle_amp: float = 3.5
    rattle_band: tuple = (60.0, 72.0)
    jerk_amp_success: float = 12.0
    jerk_amp_fail: float = 18.0
    jerk_ring_hz: float = 30.0
    jerk_decay_s: float = 0.08

    # camera blob (pixels)
    blob_radius: float = 10.0
    blob_radius_jitter: float = 1.5
    blob_radius_flicker: float = 1.2  # per-frame segmentation noise, 1 sigma
    blob_start_jitter: float = 3.0
    blob_drift_px_per_mm: float = 0.8
    blob_exit_velocity: tuple = (-110.0, 36.0)  # px/s after a failed grasp
    blob_center_sigma: float = 0.3

    # slip kinematics (mm/s of fruit-vs-gripper travel)
    slip_severity_range: tuple = (2.0, 6.0)

    def __post_init__(self):
        if self.ir_present - self.ir_absent < 3.0 * self.ir_sigma:
            raise ValueError("ir presence level must clear the baseline by 3 sigma")
        if self.tactile_present - self.tactile_absent < 3.0 * self.tactile_sigma:
            raise ValueError("tactile presence level must clear the baseline by 3 sigma")
        if self.tension_sigma < 0 or self.ir_sigma < 0 or self.tactile_sigma < 0:
            raise ValueError("sigmas must be >= 0")
        lo, hi = self.slip_severity_range
        if not 0 < lo <= hi:
            raise ValueError("slip_severity_range must be positive and ordered")


def _first_index_at(t_event: float, n: int) -> int:
    """First frame index whose timestamp is >= t_event."""
    idx = int(math.ceil(t_event * SENSOR_RATE_HZ - 1e-9))
    return min(max(idx, 0), n - 1)


def _disc_mask(cx: float, cy: float, radius: float) -> np.ndarray:
    ys = np.arange(CAMERA_HEIGHT, dtype=float)[:, None]
    xs = np.arange(CAMERA_WIDTH, dtype=float)[None, :]
    return (((xs - cx) ** 2 + (ys - cy) ** 2) <= radius * radius).astype(np.uint8)


def _adc(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, ADC_MAX).astype(np.int64)


def generate_trial(
    scenario: GraspState,
    params: ScenarioParams,
    model: Optional[SignatureModel] = None,
    trial_id: str = "trial",
) -> Trial:
    """Synthesize one labeled trial for the given outcome scenario.

    The label stream starts at NO_SLIP when the gripper closes, moves to
    SLIP at the slip onset (when present) and pins the scenario outcome
    from the terminal event to the end of the trial.
    """
    scenario = GraspState(scenario)
    if scenario not in TERMINAL_STATES:
        raise ValueError("scenario must be FAILED_GRASP or SUCCESSFUL_PICK")
    model = model or SignatureModel()

    n = int(round(params.duration * SENSOR_RATE_HZ)) + 1
    if n < _MIN_FRAMES:
        raise ValueError(f"trial too short: {n} frames < {_MIN_FRAMES}")
    t = np.arange(n, dtype=float) * _DT

    t_pull = params.settle_pre
    t_term = params.settle_pre + params.terminal_fraction * params.pull_time
    term_idx = _first_index_at(t_term, n)
    slip_idx = None
    if params.slip_onset_fraction is not None:
        t_slip = params.settle_pre + params.slip_onset_fraction * params.pull_time
        slip_idx = _first_index_at(t_slip, n)
        if slip_idx >= term_idx:
            raise ValueError("slip onset collapsed onto the terminal event")

    labels = np.full(n, int(GraspState.NO_SLIP), dtype=np.int64)
    if slip_idx is not None:
        labels[slip_idx:term_idx] = int(GraspState.SLIP)
    labels[term_idx:] = int(scenario)

    rng = np.random.default_rng(params.seed & ((1 << 64) - 1))
    # fixed draw order keeps trials reproducible when parameters repeat
    sev_peak = rng.uniform(*model.slip_severity_range)
    vib_freqs = rng.uniform(*model.slip_vib_band, size=3)
    vib_phases = rng.uniform(0.0, 2.0 * math.pi, size=3)
    rattle_freqs = rng.uniform(*model.rattle_band, size=3)
    rattle_phases = rng.uniform(0.0, 2.0 * math.pi, size=3)
    ir_level = model.ir_present + rng.uniform(-model.level_jitter, model.level_jitter)
    tac_level = model.tactile_present + rng.uniform(
        -model.level_jitter, model.level_jitter
    )
    blob_r = model.blob_radius + rng.uniform(
        -model.blob_radius_jitter, model.blob_radius_jitter
    )
    blob_cx0 = CAMERA_WIDTH / 2.0 + rng.uniform(
        -model.blob_start_jitter, model.blob_start_jitter
    )
    blob_cy0 = CAMERA_HEIGHT / 2.0 + rng.uniform(
        -model.blob_start_jitter, model.blob_start_jitter
    )

    # slip kinematics: relative fruit-gripper velocity, zero outside slip
    slip_v = np.zeros(n)
    if slip_idx is not None:
        span = np.arange(slip_idx, term_idx)
        ramp = np.linspace(0.0, 1.0, len(span))
        slip_v[span] = sev_peak * (0.3 + 0.7 * ramp)
    slip_mm = np.cumsum(slip_v) * _DT  # plateaus once slip stops

    dt_term = np.maximum(t - t_term, 0.0)
    post = t >= t_term
    pulling = (t >= t_pull) & ~post

    # --- tension ---
    tension = np.full(n, model.tension_preload)
    tension[pulling] += model.tension_ramp_slope * (t[pulling] - t_pull)
    if slip_idx is not None:
        saw = (t * model.tension_dip_hz) % 1.0
        in_slip = labels == int(GraspState.SLIP)
        tension[in_slip] *= 1.0 - model.tension_dip_fraction * saw[in_slip]
    peak = model.tension_preload + model.tension_ramp_slope * (t_term - t_pull)
    residual = (
        model.tension_success_residual
        if scenario == GraspState.SUCCESSFUL_PICK
        else model.tension_fail_residual
    )
    tension[post] = residual + (peak - residual) * np.exp(
        -dt_term[post] / model.tension_decay_s
    )
    tension += rng.normal(0.0, model.tension_sigma * params.noise.tension, n)

    # --- IR / tactile presence channels ---
    def presence(level, drift_per_mm, absent, sigma, scale):
        sig = np.full(n, level) - drift_per_mm * slip_mm
        if scenario == GraspState.FAILED_GRASP:
            at_term = sig[term_idx]
            sig[post] = absent + (at_term - absent) * np.exp(
                -dt_term[post] / model.absent_decay_s
            )
        return sig + rng.normal(0.0, sigma * scale, n)

    ir = presence(
        ir_level, model.ir_drift_per_mm, model.ir_absent, model.ir_sigma,
        params.noise.ir,
    )
    tactile = presence(
        tac_level, model.tactile_drift_per_mm, model.tactile_absent,
        model.tactile_sigma, params.noise.tactile,
    )

    # --- IMU ---
    imu = np.empty((n, 18))
    for col in range(18):
        sigma = model.imu_accel_sigma if col % 6 < 3 else model.imu_gyro_sigma
        imu[:, col] = rng.normal(0.0, sigma * params.noise.imu, n)
    col_gains = rng.uniform(0.7, 1.0, size=18)

    def add_bands(mask, freqs, phases, amp, envelope=None):
        if not mask.any():
            return
        wave = np.zeros(mask.sum())
        tm = t[mask]
        for f, ph, scale in zip(freqs, phases, (1.0, 0.8, 0.6)):
            wave += scale * np.sin(2.0 * math.pi * f * tm + ph)
        if envelope is not None:
            wave *= envelope
        for col in range(18):
            imu_gain = (0.3, 1.0, 1.0)[col // 6]  # body couples weakly
            gyro_gain = 1.0 if col % 6 < 3 else 0.4
            imu[mask, col] += amp * imu_gain * gyro_gain * col_gains[col] * wave

    if slip_idx is not None:
        in_slip = labels == int(GraspState.SLIP)
        env = 0.5 + 0.5 * slip_v[in_slip] / sev_peak
        add_bands(in_slip, vib_freqs, vib_phases, model.slip_vib_amp, env)
    if scenario == GraspState.FAILED_GRASP:
        add_bands(post, rattle_freqs, rattle_phases, model.rattle_amp)

    jerk_amp = (
        model.jerk_amp_fail
        if scenario == GraspState.FAILED_GRASP
        else model.jerk_amp_success
    )
    ring = (
        jerk_amp
        * np.exp(-dt_term[post] / model.jerk_decay_s)
        * np.sin(2.0 * math.pi * model.jerk_ring_hz * dt_term[post])
    )
    for col in range(18):
        imu_gain = (0.8, 1.0, 1.0)[col // 6]
        gyro_gain = 1.0 if col % 6 < 3 else 0.5
        imu[post, col] += imu_gain * gyro_gain * ring

    # --- camera ---
    cam_ids = np.arange(n) // CAMERA_DECIMATION
    m = int(cam_ids[-1]) + 1
    cam_t = t[::CAMERA_DECIMATION]
    assert len(cam_t) == m
    cam_jitter = rng.normal(0.0, model.blob_center_sigma, size=(m, 2))
    # per-frame radius flicker keeps the segmented area from acting as a
    # trial fingerprint; floor keeps the disc visible
    cam_radius = np.maximum(
        blob_r + rng.normal(0.0, model.blob_radius_flicker, size=m), 2.0
    )
    frames = []
    for j in range(m):
        i = j * CAMERA_DECIMATION
        cx = blob_cx0 - model.blob_drift_px_per_mm * slip_mm[i]
        cy = blob_cy0 - 0.25 * model.blob_drift_px_per_mm * slip_mm[i]
        if scenario == GraspState.FAILED_GRASP and post[i]:
            cx += model.blob_exit_velocity[0] * dt_term[i]
            cy += model.blob_exit_velocity[1] * dt_term[i]
        cx += cam_jitter[j, 0]
        cy += cam_jitter[j, 1]
        frames.append(
            CameraFrame(t=float(cam_t[j]), mask=_disc_mask(cx, cy, cam_radius[j]))
        )

    return Trial(
        trial_id=trial_id,
        scenario=scenario,
        t=t,
        imu=imu,
        ir=_adc(ir),
        tension=_adc(tension),
        tactile=_adc(tactile),
        camera_index=cam_ids,
        labels=labels,
        camera=frames,
        slip_onset=slip_idx,
        terminal_event=term_idx,
        slip_velocity=slip_v,
    )


def slip_severity_profile(trial: Trial) -> np.ndarray:
    """Per-frame relative fruit-gripper speed (mm/s) of a generated trial."""
    if trial.slip_velocity is None:
        raise ValueError("trial carries no stored kinematics (not generator-produced)")
    return trial.slip_velocity.copy()


def draw_scenario_params(scenario: GraspState, seed: int) -> ScenarioParams:
    """Draw one trial's timeline parameters from a 64-bit seed.

    Failed grasps always slip first; successful picks slip about half
    the time, which keeps the quiet-pull pick in the mix.
    """
    scenario = GraspState(scenario)
    rng = np.random.default_rng(derive_seed(seed, "scenario-params"))
    pull_speed = rng.uniform(15.0, 25.0)
    if scenario == GraspState.FAILED_GRASP:
        slips = True
        onset = rng.uniform(0.35, 0.55)
        terminal = rng.uniform(0.70, 0.85)
    else:
        slips = rng.random() < 0.5
        onset = rng.uniform(0.40, 0.60)
        terminal = rng.uniform(0.80, 0.95)
    return ScenarioParams(
        pull_speed=pull_speed,
        seed=derive_seed(seed, "signals"),
        slip_onset_fraction=onset if slips else None,
        terminal_fraction=terminal,
    )


def generate_dataset(
    counts: Mapping[str, tuple],
    base_seed: int,
    model: Optional[SignatureModel] = None,
) -> Dataset:
    """Generate a dataset from per-split (n_success, n_fail) counts.

    Every trial gets an independent seed derived from the base seed, the
    split name and the trial index, so any split can be regenerated in
    isolation. Scenarios alternate within a split.
    """
    model = model or SignatureModel()
    splits = {}
    for split in ("train", "val", "test"):
        if split not in counts:
            raise ValueError(f"counts missing split {split!r}")
        n_success, n_fail = counts[split]
        if n_success < 1 or n_fail < 1:
            raise ValueError(f"split {split!r} needs at least one trial per scenario")
        # alternate scenarios while both remain, then exhaust the leftovers
        order = []
        left = {GraspState.SUCCESSFUL_PICK: n_success, GraspState.FAILED_GRASP: n_fail}
        for i in range(n_success + n_fail):
            pick = GraspState.SUCCESSFUL_PICK if i % 2 == 0 else GraspState.FAILED_GRASP
            other = (
                GraspState.FAILED_GRASP
                if pick == GraspState.SUCCESSFUL_PICK
                else GraspState.SUCCESSFUL_PICK
            )
            if left[pick] == 0:
                pick = other
            left[pick] -= 1
            order.append(pick)
        trials = []
        for idx, scenario in enumerate(order):
            trial_seed = derive_seed(base_seed, split, idx)
            params = draw_scenario_params(scenario, trial_seed)
            trials.append(
                generate_trial(
                    scenario,
                    params,
                    model,
                    trial_id=f"{split}-{idx:03d}",
                )
            )
        splits[split] = trials
    return Dataset(train=splits["train"], val=splits["val"], test=splits["test"])
