import numpy as np
import pytest

from graspstate.core import GraspState
from graspstate.synth import ScenarioParams, draw_scenario_params, generate_trial


@pytest.fixture(scope="session")
def slip_pick_trial():
    """One successful pick with a slip phase, fixed seed."""
    params = ScenarioParams(
        pull_speed=20.0,
        seed=1234,
        slip_onset_fraction=0.5,
        terminal_fraction=0.85,
    )
    return generate_trial(GraspState.SUCCESSFUL_PICK, params, trial_id="pick-slip")


@pytest.fixture(scope="session")
def fail_trial():
    params = ScenarioParams(
        pull_speed=18.0,
        seed=99,
        slip_onset_fraction=0.45,
        terminal_fraction=0.8,
    )
    return generate_trial(GraspState.FAILED_GRASP, params, trial_id="fail-slip")


@pytest.fixture(scope="session")
def quiet_pick_trial():
    params = ScenarioParams(pull_speed=22.0, seed=7, terminal_fraction=0.9)
    return generate_trial(GraspState.SUCCESSFUL_PICK, params, trial_id="pick-quiet")


@pytest.fixture(scope="session")
def tiny_trials():
    """Short trials for pipeline tests: small pulls, both scenarios."""
    out = []
    for i, scenario in enumerate(
        [
            GraspState.SUCCESSFUL_PICK,
            GraspState.FAILED_GRASP,
            GraspState.SUCCESSFUL_PICK,
            GraspState.FAILED_GRASP,
        ]
    ):
        params = ScenarioParams(
            pull_speed=24.0,
            pull_distance=60.0,
            seed=1000 + i,
            slip_onset_fraction=0.4 if i > 0 else None,
            terminal_fraction=0.8,
        )
        out.append(generate_trial(scenario, params, trial_id=f"tiny-{i:02d}"))
    return out


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)
