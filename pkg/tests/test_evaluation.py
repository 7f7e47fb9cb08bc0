import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graspstate.core import GraspState, Trial
from graspstate.evaluation import (
    COMBO_NAMES,
    COUNTER_NAMES,
    ClassificationStream,
    SINGLE_SENSOR_NAMES,
    _runs,
    classify_trial,
    default_filter,
    evaluate,
    failure_taxonomy,
    majority_filter,
    mask_from_label,
    prf1,
)
from graspstate.features import (
    SensorMask,
    assemble_rf_windows,
    fit_normalization,
)
from graspstate.forest import RfHyperparams, rf_train

from oracles import reference_taxonomy

NS, SL, FG, SP = (int(s) for s in GraspState)

ALL_MASK = SensorMask(
    imu=True, ir=True, tension=True, tactile=True, camera=True, camera_method="com"
)


def _stream(pred, start=0, trial_id="t"):
    pred = np.asarray(pred, dtype=np.int64)
    return ClassificationStream(
        trial_id=trial_id,
        end_frames=np.arange(start, start + len(pred)),
        predictions=pred,
    )


def _stub_trial(labels, scenario, terminal_event, trial_id="t"):
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    return Trial(
        trial_id=trial_id,
        scenario=scenario,
        t=np.arange(n) / 150.0,
        imu=np.zeros((n, 18)),
        ir=np.zeros(n, dtype=int),
        tension=np.zeros(n, dtype=int),
        tactile=np.zeros(n, dtype=int),
        camera_index=np.zeros(n, dtype=int),
        labels=labels,
        terminal_event=terminal_event,
    )


# ------------------------------------------------------- majority filter


def test_filter_replaces_windows_with_majorities():
    got = majority_filter(_stream([NS, NS, SL, NS, NS, SP, SP, SP, SL, SL]), window=5)
    assert got.predictions.tolist() == [NS] * 5 + [SP] * 5


def test_filter_first_window_tie_takes_canonical_order():
    got = majority_filter(_stream([NS, NS, SL, SL, SP]), window=5)
    assert got.predictions.tolist() == [NS] * 5


def test_filter_tie_keeps_previous_winner_when_among_leaders():
    got = majority_filter(_stream([SL] * 5 + [NS, NS, SL, SL, SP]), window=5)
    assert got.predictions.tolist() == [SL] * 10


def test_filter_tie_without_previous_leader_takes_canonical_order():
    got = majority_filter(_stream([SP] * 5 + [NS, NS, SL, SL, FG]), window=5)
    assert got.predictions.tolist() == [SP] * 5 + [NS] * 5


def test_filter_polls_partial_final_window():
    got = majority_filter(_stream([NS] * 5 + [SP, SP]), window=5)
    assert got.predictions.tolist() == [NS] * 5 + [SP] * 2


def test_filter_removes_isolated_outlier():
    pred = [SP] * 15
    pred[7] = FG
    got = majority_filter(_stream(pred), window=15)
    assert got.predictions.tolist() == [SP] * 15


def test_filter_preserves_metadata(slip_pick_trial):
    stream = _stream([NS] * 40, start=24, trial_id="abc")
    got = majority_filter(stream, window=5)
    assert got.trial_id == "abc"
    np.testing.assert_array_equal(got.end_frames, stream.end_frames)
    assert len(got) == len(stream)


def test_filter_rejects_even_or_tiny_windows():
    stream = _stream([NS] * 10)
    with pytest.raises(ValueError):
        majority_filter(stream, window=4)
    with pytest.raises(ValueError):
        majority_filter(stream, window=0)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(0, 3), min_size=1, max_size=60),
    st.sampled_from([1, 3, 5, 15]),
)
def test_filter_output_constant_per_window_and_idempotent(pred, window):
    stream = _stream(pred)
    once = majority_filter(stream, window)
    for start in range(0, len(pred), window):
        chunk_in = stream.predictions[start : start + window]
        chunk_out = once.predictions[start : start + window]
        assert len(set(chunk_out.tolist())) == 1
        # the winner always occurs in its own window
        assert chunk_out[0] in chunk_in
    twice = majority_filter(once, window)
    np.testing.assert_array_equal(once.predictions, twice.predictions)


def test_stream_validation():
    with pytest.raises(ValueError):
        ClassificationStream(
            trial_id="t", end_frames=np.array([0, 2]), predictions=np.array([1, 1])
        )
    with pytest.raises(ValueError):
        ClassificationStream(
            trial_id="t", end_frames=np.array([0, 1]), predictions=np.array([1])
        )


# ----------------------------------------------------------------- prf1


def test_prf1_hand_example():
    confusion = np.array(
        [
            [5, 1, 0, 0],
            [2, 3, 0, 0],
            [0, 0, 4, 0],
            [0, 0, 0, 0],
        ]
    )
    table = prf1(confusion)
    np.testing.assert_allclose(table[0], [5 / 7, 5 / 6, 2 * (5 / 7) * (5 / 6) / (5 / 7 + 5 / 6)])
    np.testing.assert_allclose(table[2], [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(table[3], [0.0, 0.0, 0.0])


def test_prf1_perfect_diagonal():
    table = prf1(np.diag([10, 20, 30, 40]))
    np.testing.assert_array_equal(table, np.ones((4, 3)))


def test_prf1_rejects_wrong_shape():
    with pytest.raises(ValueError):
        prf1(np.zeros((3, 3)))


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.lists(st.integers(0, 50), min_size=4, max_size=4), min_size=4, max_size=4
    )
)
def test_prf1_stays_in_unit_interval(rows):
    table = prf1(np.array(rows))
    assert (table >= 0.0).all() and (table <= 1.0).all()
    for k in range(4):
        p, r, f = table[k]
        assert f <= max(p, r) + 1e-12
        if p > 0 and r > 0:
            assert f == pytest.approx(2 * p * r / (p + r))


# ---------------------------------------------------------------- _runs


def test_runs_extraction():
    assert _runs(np.array([1, 0, 1, 1, 0]), 1) == [(0, 0), (2, 3)]
    assert _runs(np.array([0, 0]), 1) == []
    assert _runs(np.array([2, 2, 2]), 2) == [(0, 2)]


# ------------------------------------------------------ failure taxonomy


def _oracle_taxonomy(trial, frames, pred, slack):
    return reference_taxonomy(
        trial, frames, pred, slack, COUNTER_NAMES, (NS, SL, FG, SP)
    )


def _pick_stub(n=60, slip=(20, 29), term=40):
    labels = np.full(n, NS)
    if slip is not None:
        labels[slip[0] : slip[1] + 1] = SL
    labels[term:] = SP
    return _stub_trial(labels, GraspState.SUCCESSFUL_PICK, term)


def _fail_stub(n=60, slip=(20, 29), term=40):
    labels = np.full(n, NS)
    if slip is not None:
        labels[slip[0] : slip[1] + 1] = SL
    labels[term:] = FG
    return _stub_trial(labels, GraspState.FAILED_GRASP, term)


def test_taxonomy_perfect_stream_is_clean():
    for trial in (_pick_stub(), _fail_stub()):
        counters = failure_taxonomy(trial, _stream(trial.labels))
        assert counters == {name: 0 for name in COUNTER_NAMES}


def test_taxonomy_missed_slip():
    trial = _pick_stub()
    pred = trial.labels.copy()
    pred[pred == SL] = NS
    assert failure_taxonomy(trial, _stream(pred))["missed_slips"] == 1


def test_taxonomy_slip_inside_slack_still_counts_as_found():
    trial = _pick_stub(slip=(20, 29))
    pred = np.full(60, NS)
    pred[31] = SL  # 2 frames late, inside the 10-frame slack
    pred[40:] = SP
    counters = failure_taxonomy(trial, _stream(pred))
    assert counters["missed_slips"] == 0
    assert counters["false_slips"] == 0


def test_taxonomy_false_slip_far_from_any_segment():
    trial = _pick_stub(slip=(20, 29))
    pred = trial.labels.copy()
    pred[2] = SL  # 18 frames before the segment starts
    counters = failure_taxonomy(trial, _stream(pred))
    assert counters["false_slips"] == 1


def test_taxonomy_missed_and_unsustained_pick():
    trial = _pick_stub()
    never = trial.labels.copy()
    never[never == SP] = NS
    got = failure_taxonomy(trial, _stream(never))
    assert got["missed_successful_pick"] == 1
    assert got["unsustained_successful_pick"] == 0

    dropped = trial.labels.copy()
    dropped[-5:] = NS  # detected, then lost before the stream ends
    got = failure_taxonomy(trial, _stream(dropped))
    assert got["missed_successful_pick"] == 0
    assert got["unsustained_successful_pick"] == 1


def test_taxonomy_early_pick_is_false_pick():
    trial = _pick_stub(term=40)
    pred = trial.labels.copy()
    pred[5:10] = SP  # claims a pick while the fruit is still attached
    got = failure_taxonomy(trial, _stream(pred))
    assert got["false_successful_pick"] == 1
    # the same early claim on a failed grasp also counts
    trial = _fail_stub(term=40)
    pred = trial.labels.copy()
    pred[5:10] = SP
    assert failure_taxonomy(trial, _stream(pred))["false_successful_pick"] == 1


def test_taxonomy_false_failed_grasp_on_pick():
    trial = _pick_stub()
    pred = trial.labels.copy()
    pred[50] = FG
    assert failure_taxonomy(trial, _stream(pred))["false_failed_grasp"] == 1


def test_taxonomy_missed_failed_grasp():
    trial = _fail_stub(term=40)
    pred = trial.labels.copy()
    pred[40:] = SP  # post-event stream claims the pick succeeded
    assert failure_taxonomy(trial, _stream(pred))["missed_failed_grasp"] == 1
    pred[55:] = FG  # a late failed-grasp call clears the counter
    assert failure_taxonomy(trial, _stream(pred))["missed_failed_grasp"] == 0


def test_taxonomy_validates_inputs():
    trial = _pick_stub()
    with pytest.raises(ValueError):
        failure_taxonomy(trial, _stream(trial.labels), slack=-1)
    with pytest.raises(ValueError):
        failure_taxonomy(trial, _stream(trial.labels, trial_id="other"))
    with pytest.raises(ValueError):
        failure_taxonomy(
            trial, _stream(np.full(70, NS))
        )  # runs past the trial end
    with pytest.raises(ValueError):
        failure_taxonomy(
            trial,
            ClassificationStream(
                trial_id="t", end_frames=np.array([]), predictions=np.array([])
            ),
        )


def test_taxonomy_matches_bruteforce_reference():
    rng = np.random.default_rng(31337)
    for case in range(1000):
        n = int(rng.integers(30, 120))
        term = int(rng.integers(5, n))
        scenario = (
            GraspState.SUCCESSFUL_PICK if rng.random() < 0.5 else GraspState.FAILED_GRASP
        )
        labels = np.full(n, NS)
        # random slip mask before the terminal event
        walk = rng.random(term) < 0.3
        labels[:term][walk] = SL
        labels[term:] = int(scenario)
        trial = _stub_trial(labels, scenario, term, trial_id=f"r{case}")

        start = int(rng.integers(0, min(10, n - 1)))
        m = n - start
        if rng.random() < 0.5:
            pred = rng.integers(0, 4, size=m)
        else:
            pred = labels[start:].copy()
            flips = rng.random(m) < 0.15
            pred[flips] = rng.integers(0, 4, size=int(flips.sum()))
        slack = int(rng.integers(0, 15))
        stream = _stream(pred, start=start, trial_id=f"r{case}")
        got = failure_taxonomy(trial, stream, slack=slack)
        want = _oracle_taxonomy(trial, stream.end_frames, pred, slack)
        assert got == want, f"case {case}"


# -------------------------------------------------------------- evaluate


@pytest.fixture(scope="module")
def rf_setup(tiny_trials):
    windows = []
    for tr in tiny_trials:
        windows.extend(assemble_rf_windows(tr, ALL_MASK)[::5])
    norm = fit_normalization(windows)
    from graspstate.features import apply_normalization

    normed = [apply_normalization(norm, w) for w in windows]
    model = rf_train(normed, RfHyperparams(n_estimators=10, seed=42))
    return model, norm


def test_classify_trial_covers_every_window_end(rf_setup, tiny_trials):
    model, norm = rf_setup
    stream = classify_trial(model, tiny_trials[0], ALL_MASK, norm=norm)
    assert stream.end_frames[0] == 24
    assert stream.end_frames[-1] == len(tiny_trials[0]) - 1
    assert stream.trial_id == tiny_trials[0].trial_id


def test_classify_trial_rejects_unknown_model(tiny_trials):
    with pytest.raises(TypeError):
        classify_trial(object(), tiny_trials[0], ALL_MASK)


def test_default_filter_per_family(rf_setup):
    model, _ = rf_setup
    assert default_filter(model) is False


def test_evaluate_aggregates_consistently(rf_setup, tiny_trials):
    model, norm = rf_setup
    streams = []
    report = evaluate(model, tiny_trials, ALL_MASK, norm=norm, streams_out=streams)
    assert report.filtered is False
    assert report.confusion.sum() == report.n_windows
    assert report.n_windows == sum(len(t) - 24 for t in tiny_trials)
    np.testing.assert_allclose(report.per_class, prf1(report.confusion))
    assert report.trial_counts == {"successful_pick": 2, "failed_grasp": 2}
    assert set(report.counters) == set(COUNTER_NAMES)
    assert all(0 <= v <= len(tiny_trials) for v in report.counters.values())
    assert len(streams) == len(tiny_trials)
    ids = [s.trial_id for s in streams]
    assert ids == sorted(ids)
    # per-trial counters re-derived from the emitted streams must agree
    recount = {name: 0 for name in COUNTER_NAMES}
    by_id = {t.trial_id: t for t in tiny_trials}
    for s in streams:
        for name, v in failure_taxonomy(by_id[s.trial_id], s).items():
            recount[name] += v
    assert recount == report.counters


def test_evaluate_filter_flag_overrides_default(rf_setup, tiny_trials):
    model, norm = rf_setup
    report = evaluate(model, tiny_trials[:2], ALL_MASK, norm=norm, filter_on=True)
    assert report.filtered is True


def test_evaluate_rejects_empty(rf_setup):
    model, norm = rf_setup
    with pytest.raises(ValueError):
        evaluate(model, [], ALL_MASK, norm=norm)


# ------------------------------------------------------- subset parsing


def test_subset_labels_round_trip():
    for name in SINGLE_SENSOR_NAMES + COMBO_NAMES:
        assert mask_from_label(name).label() == name


def test_combo_table_shape():
    assert len(SINGLE_SENSOR_NAMES) == 8
    assert len(COMBO_NAMES) == 12
    assert all(c.startswith("imu") for c in COMBO_NAMES)


def test_mask_from_label_pca():
    mask = mask_from_label("imu+camera(pca)")
    assert mask.camera_method == "pca"
    assert mask.imu and mask.camera
