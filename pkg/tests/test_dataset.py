"""
Tests for trajectories, measurement operators, SNR noise, schedules and splits.
"""

import numpy as np
import pytest

from noda.dataset import (
    Equation,
    MeasurementOperator,
    ObservationSet,
    Schedule,
    Trajectory,
    add_noise_snr,
    apply_measurement,
    assimilation_count,
    observe,
    sample_schedule,
    split,
)
from noda.errors import MissingObservationError, ShapeError, ZeroSignalError
from noda.grid_fft import Grid1D, Grid2D


def _trajectory(n_frames: int = 5, n: int = 8) -> Trajectory:
    frames = np.arange(n_frames * n, dtype=float).reshape(n_frames, n) + 1.0
    return Trajectory(Equation.KS, Grid1D(n, 2 * np.pi), 0.25, frames, seed=3)


# ============================================================
# TRAJECTORY
# ============================================================

class TestTrajectory:

    def test_frames_are_read_only(self):
        traj = _trajectory()
        with pytest.raises(ValueError):
            traj.frames[0, 0] = 5.0

    def test_shape_checked_against_grid(self):
        with pytest.raises(ShapeError):
            Trajectory(Equation.KS, Grid1D(8, 1.0), 0.25, np.zeros((3, 16)))

    def test_non_finite_rejected(self):
        frames = np.zeros((2, 8))
        frames[1, 2] = np.inf
        with pytest.raises(ValueError):
            Trajectory(Equation.KS, Grid1D(8, 1.0), 0.25, frames)

    def test_time_helpers(self):
        traj = _trajectory(n_frames=9)
        assert traj.t_f == 2.0
        assert traj.frame_index(1.5) == 6
        with pytest.raises(ValueError):
            traj.frame_index(0.3)

    def test_truncate(self):
        traj = _trajectory(n_frames=9).truncate(4)
        assert traj.n_frames == 4
        assert traj.seed == 3

    def test_equation_parse(self):
        assert Equation.parse("KdV") == Equation.KDV
        assert Equation.parse(3) == Equation.NS
        with pytest.raises(ValueError):
            Equation.parse("burgers")


# ============================================================
# MEASUREMENT
# ============================================================

class TestMeasurement:

    def test_identity_copies_flattened_frame(self):
        frame = np.arange(64, dtype=float).reshape(8, 8)
        y = apply_measurement(MeasurementOperator.identity(64), frame)
        assert np.array_equal(y, frame.ravel())

    def test_all_ones_rows_sum(self):
        op = MeasurementOperator("dense_random", d=4, p=2, matrix=np.ones((2, 4)))
        assert np.array_equal(apply_measurement(op, np.ones(4)), [4.0, 4.0])

    def test_dense_random_matches_naive_product(self):
        op = MeasurementOperator.dense_random(8, 16, seed=5)
        frame = np.linspace(-1, 1, 16)
        expected = [sum(op.matrix[i, j] * frame[j] for j in range(16)) for i in range(8)]
        assert np.allclose(apply_measurement(op, frame), expected, rtol=1e-14, atol=1e-14)

    def test_dense_random_entries_in_unit_interval(self):
        op = MeasurementOperator.dense_random(32, 64, seed=1)
        assert op.matrix.min() >= 0.0 and op.matrix.max() <= 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            apply_measurement(MeasurementOperator.identity(16), np.zeros(8))

    def test_identity_requires_square(self):
        with pytest.raises(ShapeError):
            MeasurementOperator("identity", d=8, p=4)

    def test_batched_apply_on_2d_frames(self):
        op = MeasurementOperator.dense_random(5, 64, seed=2)
        frames = np.random.default_rng(0).normal(size=(3, 8, 8))
        out = op.apply(frames)
        assert out.shape == (3, 5)
        assert np.allclose(out[1], apply_measurement(op, frames[1]))

    def test_from_name(self):
        assert MeasurementOperator.from_name("identity", 16).p == 16
        assert MeasurementOperator.from_name("random", 16, p=4).matrix.shape == (4, 16)
        with pytest.raises(ValueError):
            MeasurementOperator.from_name("sparse", 16)

    def test_adjoint(self):
        assert MeasurementOperator.identity(8).adjoint() is None
        op = MeasurementOperator.dense_random(3, 8, seed=0)
        assert np.array_equal(op.adjoint(), op.matrix)


# ============================================================
# NOISE
# ============================================================

class TestNoise:

    def test_infinite_snr_is_unchanged(self):
        y = np.random.default_rng(0).normal(size=(4, 8))
        assert np.array_equal(add_noise_snr(y, float("inf"), seed=1), y)

    def test_empirical_snr(self):
        y = np.random.default_rng(0).normal(size=(100, 1000))
        noisy = add_noise_snr(y, 20.0, seed=2)
        noise = noisy - y
        snr = 10 * np.log10(np.mean(y**2) / np.mean(noise**2))
        assert abs(snr - 20.0) < 0.2

    def test_zero_signal_rejected(self):
        with pytest.raises(ZeroSignalError):
            add_noise_snr(np.zeros((3, 4)), 10.0, seed=0)

    def test_noise_uncorrelated(self):
        y = np.ones(100_000)
        noise = add_noise_snr(y, 10.0, seed=3) - y
        corr = np.corrcoef(noise[:-1], noise[1:])[0, 1]
        assert abs(corr) < 0.01

    def test_seed_determinism(self):
        y = np.ones((5, 5))
        assert np.array_equal(add_noise_snr(y, 10.0, seed=4), add_noise_snr(y, 10.0, seed=4))


# ============================================================
# OBSERVATIONS
# ============================================================

class TestObservations:

    def test_observe_selects_times(self):
        traj = _trajectory(n_frames=6)
        obs = observe(traj, MeasurementOperator.identity(8), [4, 1, 2], float("inf"), seed=0)
        assert obs.times == (1, 2, 4)
        assert np.array_equal(obs.at(4), traj.frames[4])
        assert 3 not in obs

    def test_missing_frame(self):
        traj = _trajectory(n_frames=6)
        obs = observe(traj, MeasurementOperator.identity(8), [1], float("inf"), seed=0)
        with pytest.raises(MissingObservationError):
            obs.at(2)

    def test_out_of_range_times(self):
        with pytest.raises(ValueError):
            observe(_trajectory(n_frames=3), MeasurementOperator.identity(8), [3], 20.0, seed=0)

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            ObservationSet(times=(2, 1), y=np.zeros((2, 4)), snr_db=10.0,
                           op=MeasurementOperator.identity(4))


# ============================================================
# SCHEDULES
# ============================================================

class TestSchedule:

    def test_alpha_zero(self):
        assert sample_schedule(10, 100, 0.0, seed=0).assim_times == ()

    def test_alpha_one(self):
        schedule = sample_schedule(10, 100, 1.0, seed=0)
        assert schedule.assim_times == tuple(range(11, 101))

    def test_alpha_count(self):
        schedule = sample_schedule(50, 200, 0.3, seed=7)
        assert len(schedule.assim_times) == 45
        assert len(set(schedule.assim_times)) == 45
        assert list(schedule.assim_times) == sorted(schedule.assim_times)
        assert min(schedule.assim_times) > 50 and max(schedule.assim_times) <= 200

    def test_half_up_rounding(self):
        assert assimilation_count(0.5, 5) == 3
        assert assimilation_count(0.1, 15) == 2

    def test_same_seed_same_schedule(self):
        assert sample_schedule(0, 100, 0.2, seed=3) == sample_schedule(0, 100, 0.2, seed=3)

    def test_different_seeds_differ(self):
        a = sample_schedule(0, 200, 0.2, seed=1).assim_times
        b = sample_schedule(0, 200, 0.2, seed=2).assim_times
        assert a != b

    def test_warmup_frames_observed(self):
        schedule = Schedule(t_h=3, t_f=10, alpha=0.2, assim_times=(5, 9))
        assert schedule.observed_frames() == (1, 2, 3, 5, 9)
        assert schedule.is_corrected(2) and schedule.is_corrected(9)
        assert not schedule.is_corrected(0) and not schedule.is_corrected(4)

    def test_invalid_schedules(self):
        with pytest.raises(ValueError):
            sample_schedule(10, 10, 0.1, seed=0)
        with pytest.raises(ValueError):
            sample_schedule(0, 10, 1.5, seed=0)
        with pytest.raises(ValueError):
            Schedule(t_h=3, t_f=10, alpha=0.1, assim_times=(2,))


# ============================================================
# SPLITS
# ============================================================

class TestSplit:

    @pytest.mark.parametrize("size,n_train,n_test", [(1200, 1000, 200), (200, 180, 20), (5, 5, 0)])
    def test_sizes(self, size, n_train, n_test):
        train, test = split(list(range(size)), n_train)
        assert len(train) == n_train and len(test) == n_test
        assert train + test == list(range(size))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            split([1, 2], 3)

    def test_2d_trajectory_accepted(self):
        traj = Trajectory("ns", Grid2D(8, 8), 1.0, np.ones((2, 8, 8)))
        assert traj.d == 64
