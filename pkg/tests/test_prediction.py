import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from compredict.prediction import (
    Trial,
    TrialTooShortError,
    direction_score,
    predict_horizon,
    sweep,
)
from compredict.profiles import HorizonSpec, ProfileKind, generate_profile
from compredict.synth import SyntheticSpec, constant_discrepancy_spec, make_trial

from oracles import brute_force_trajectory

DT = 0.005


def coasting_trial(n=200, v0=(0.4, -0.2, 0.1)):
    """Zero true acceleration: position moves on a straight line."""
    spec = SyntheticSpec(kind="constant_acceleration", duration=(n - 1) * DT, dt=DT, accel=0.0,
                         initial_velocity=np.array(v0))
    return make_trial(spec)


def test_zero_profile_is_exact_on_coasting_motion():
    trial = coasting_trial()
    spec = HorizonSpec.from_duration(125, DT)
    for result in sweep(trial, spec, ProfileKind.ZERO):
        assert np.all(result.error_series <= 1e-12)


def test_zero_profile_error_matches_constant_discrepancy_closed_form():
    c = 1.3
    trial = make_trial(constant_discrepancy_spec(c, duration=0.8))
    spec = HorizonSpec.from_duration(250, DT)
    k = np.arange(1, spec.n_samples + 1)
    expected = 0.5 * (k - 1) ** 2 * DT * DT * c
    for result in sweep(trial, spec, ProfileKind.ZERO):
        assert result.error_series[0] == 0.0
        assert_allclose(result.error_series[1:], expected[1:], rtol=1e-9)


def test_zero_profile_error_matches_brute_force():
    c = 0.9
    trial = make_trial(constant_discrepancy_spec(c, duration=0.8))
    spec = HorizonSpec.from_duration(125, DT)
    result = predict_horizon(trial, 17, spec, ProfileKind.ZERO)
    p0, v0 = trial.positions[17, 0], trial.velocities[17, 0]
    pred_ps, _ = brute_force_trajectory(p0, v0, [0.0] * (spec.n_samples - 1), DT)
    ref_ps = trial.positions[17 : 17 + spec.n_samples, 0]
    expected = np.abs(np.asarray(pred_ps) - ref_ps)
    assert_allclose(result.error_series, expected, rtol=1e-12, atol=1e-15)


def test_oracle_and_cubic_match_brute_force():
    trial = make_trial(SyntheticSpec(kind="sinusoid", duration=0.8, dt=DT, amplitude=1.5))
    spec = HorizonSpec.from_duration(250, DT)
    start = 23
    for kind in (ProfileKind.ORACLE, ProfileKind.CUBIC, ProfileKind.CONST):
        result = predict_horizon(trial, start, spec, kind)
        future = trial.accel_inputs[start : start + spec.n_samples]
        profile = generate_profile(kind, trial.accel_inputs[start], spec, measured_future=future)
        for axis in range(3):
            pred_ps, _ = brute_force_trajectory(
                trial.positions[start, axis],
                trial.velocities[start, axis],
                profile[: spec.n_samples - 1, axis],
                DT,
            )
            assert_allclose(
                result.predicted_positions[:, axis], pred_ps, rtol=1e-12, atol=1e-15
            )


def test_oracle_profile_reproduces_model_consistent_reference():
    spec_gen = SyntheticSpec(kind="sinusoid", duration=1.0, dt=DT, amplitude=1.2, frequency_hz=1.5)
    trial = make_trial(spec_gen)
    for t_ms in (125, 250, 375, 500, 625):
        hspec = HorizonSpec.from_duration(t_ms, DT)
        for result in sweep(trial, hspec, ProfileKind.ORACLE):
            assert np.all(result.error_series <= 1e-12)


def test_error_series_starts_at_zero_for_every_profile():
    trial = make_trial(SyntheticSpec(kind="sinusoid", duration=0.8, dt=DT, amplitude=2.0))
    hspec = HorizonSpec.from_duration(125, DT)
    for kind in ProfileKind:
        for result in sweep(trial, hspec, kind):
            assert result.error_series[0] == 0.0


def test_constant_discrepancy_error_is_strictly_increasing():
    trial = make_trial(constant_discrepancy_spec(1.0, duration=0.8))
    hspec = HorizonSpec.from_duration(375, DT)
    result = predict_horizon(trial, 0, hspec, ProfileKind.ZERO)
    assert np.all(np.diff(result.error_series[1:]) > 0.0)


def test_sweep_start_count():
    trial = coasting_trial(n=200)
    assert len(sweep(trial, HorizonSpec.from_duration(125, DT), ProfileKind.ZERO)) == 175
    # a trial exactly one horizon long yields a single start
    trial = coasting_trial(n=26)
    results = sweep(trial, HorizonSpec.from_duration(125, DT), ProfileKind.ZERO)
    assert [r.start_index for r in results] == [0]


def test_sweep_too_short_names_trial_and_horizon():
    trial = coasting_trial(n=25)
    with pytest.raises(TrialTooShortError) as err:
        sweep(trial, HorizonSpec.from_duration(125, DT), ProfileKind.ZERO)
    message = str(err.value)
    assert "s00" in message and "125" in message


def test_sweep_stride():
    trial = coasting_trial(n=60)
    results = sweep(trial, HorizonSpec.from_duration(125, DT), ProfileKind.ZERO, stride=7)
    assert [r.start_index for r in results] == [0, 7, 14, 21, 28]
    with pytest.raises(ValueError):
        sweep(trial, HorizonSpec.from_duration(125, DT), ProfileKind.ZERO, stride=0)


def test_sweep_equals_per_start_prediction_bitwise():
    trial = make_trial(SyntheticSpec(kind="sinusoid", duration=0.7, dt=DT, amplitude=1.0))
    hspec = HorizonSpec.from_duration(250, DT)
    for kind in ProfileKind:
        swept = sweep(trial, hspec, kind)
        for result in swept:
            single = predict_horizon(trial, result.start_index, hspec, kind)
            assert_array_equal(result.predicted_positions, single.predicted_positions)
            assert_array_equal(result.error_series, single.error_series)
            assert result.direction_score == single.direction_score


def test_sweep_is_deterministic_across_calls():
    trial = make_trial(SyntheticSpec(kind="sinusoid", duration=0.7, dt=DT, amplitude=1.0))
    hspec = HorizonSpec.from_duration(125, DT)
    first = sweep(trial, hspec, ProfileKind.CUBIC)
    second = sweep(trial, hspec, ProfileKind.CUBIC)
    for a, b in zip(first, second):
        assert_array_equal(a.error_series, b.error_series)


def test_profiles_collapse_when_measured_acceleration_is_zero():
    trial = coasting_trial()
    hspec = HorizonSpec.from_duration(125, DT)
    zero = sweep(trial, hspec, ProfileKind.ZERO)
    const = sweep(trial, hspec, ProfileKind.CONST)
    cubic = sweep(trial, hspec, ProfileKind.CUBIC)
    for a, b, c in zip(zero, const, cubic):
        assert_array_equal(a.predicted_positions, b.predicted_positions)
        assert_array_equal(a.predicted_positions, c.predicted_positions)
        assert_array_equal(a.error_series, b.error_series)
        assert_array_equal(a.error_series, c.error_series)
        assert a.direction_score == b.direction_score == c.direction_score


def test_predict_horizon_bounds_and_dt_check():
    trial = coasting_trial(n=50)
    hspec = HorizonSpec.from_duration(125, DT)
    with pytest.raises(IndexError):
        predict_horizon(trial, 25, hspec, ProfileKind.ZERO)
    wrong_dt = HorizonSpec.from_duration(125, 0.0025)
    with pytest.raises(ValueError):
        predict_horizon(trial, 0, wrong_dt, ProfileKind.ZERO)


def _two_point_trial(ref_disp):
    positions = np.vstack([np.zeros(3), np.asarray(ref_disp, dtype=float)])
    return Trial(
        subject_id="s",
        activity_id="a",
        repeat_index=0,
        is_static=False,
        mass=70.0,
        dt=DT,
        positions=positions,
        velocities=np.zeros((2, 3)),
        accel_inputs=np.zeros((2, 3)),
    )


def test_direction_score_sign_agreement():
    hspec = HorizonSpec(horizon_ms=5.0, dt=DT, n_samples=2)
    trial = _two_point_trial([0.05, 0.0, 0.0])
    agree = np.vstack([np.zeros(3), [0.002, 0.0, 0.0]])
    oppose = np.vstack([np.zeros(3), [-0.002, 0.0, 0.0]])
    assert direction_score(trial, 0, hspec, agree) == 1
    assert direction_score(trial, 0, hspec, oppose) == 0


def test_direction_score_uses_largest_reference_axis():
    hspec = HorizonSpec(horizon_ms=5.0, dt=DT, n_samples=2)
    trial = _two_point_trial([0.03, 0.01, -0.005])
    predicted = np.vstack([np.zeros(3), [0.02, -0.02, 0.01]])
    # X has the largest reference displacement; both move +X
    assert direction_score(trial, 0, hspec, predicted) == 1


def test_direction_score_zero_displacement_convention():
    hspec = HorizonSpec(horizon_ms=5.0, dt=DT, n_samples=2)
    still = _two_point_trial([0.0, 0.0, 0.0])
    moving = np.vstack([np.zeros(3), [0.01, 0.0, 0.0]])
    frozen = np.zeros((2, 3))
    # sign(0) == sign(0) counts as agreement; sign(+) != sign(0) does not
    assert direction_score(still, 0, hspec, frozen) == 1
    assert direction_score(still, 0, hspec, moving) == 0


def test_sweep_kernel_matches_brute_force_on_random_trials():
    # randomized cross-check of the closed-form response against plain
    # sequential integration, all profiles, arbitrary inputs
    rng = np.random.default_rng(99)
    for trial_round in range(5):
        n = int(rng.integers(40, 90))
        trial = Trial(
            subject_id="s",
            activity_id=f"rand{trial_round}",
            repeat_index=0,
            is_static=False,
            mass=70.0,
            dt=DT,
            positions=rng.normal(size=(n, 3)),
            velocities=rng.normal(size=(n, 3)),
            accel_inputs=rng.normal(size=(n, 3)) * 3.0,
        )
        hspec = HorizonSpec.from_duration(125, DT)
        for kind in ProfileKind:
            results = sweep(trial, hspec, kind)
            start = int(rng.integers(0, len(results)))
            result = results[start]
            future = trial.accel_inputs[start : start + hspec.n_samples]
            profile = generate_profile(
                kind, trial.accel_inputs[start], hspec, measured_future=future
            )
            for axis in range(3):
                expected, _ = brute_force_trajectory(
                    trial.positions[start, axis],
                    trial.velocities[start, axis],
                    profile[: hspec.n_samples - 1, axis],
                    DT,
                )
                assert_allclose(
                    result.predicted_positions[:, axis], expected, rtol=1e-11, atol=1e-13
                )


def test_sweep_scores_agree_with_direction_score_function():
    trial = make_trial(
        SyntheticSpec(
            kind="piecewise_constant",
            duration=1.0,
            dt=DT,
            segments=((0.4, 1.0), (0.6, -1.0)),
        )
    )
    hspec = HorizonSpec.from_duration(250, DT)
    for kind in (ProfileKind.ZERO, ProfileKind.CUBIC):
        for result in sweep(trial, hspec, kind):
            recomputed = direction_score(
                trial, result.start_index, hspec, result.predicted_positions
            )
            assert result.direction_score == recomputed


def test_trial_validation():
    with pytest.raises(ValueError):
        Trial(
            subject_id="s",
            activity_id="a",
            repeat_index=0,
            is_static=False,
            mass=70.0,
            dt=DT,
            positions=np.zeros((5, 3)),
            velocities=np.zeros((4, 3)),
            accel_inputs=np.zeros((5, 3)),
        )
    with pytest.raises(ValueError):
        Trial(
            subject_id="s",
            activity_id="a",
            repeat_index=0,
            is_static=False,
            mass=-1.0,
            dt=DT,
            positions=np.zeros((5, 3)),
            velocities=np.zeros((5, 3)),
            accel_inputs=np.zeros((5, 3)),
        )
