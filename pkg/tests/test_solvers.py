"""
Tests for the PDE solvers and initial-condition samplers.

Oracles: closed-form linear semigroups, the KdV one-soliton solution,
mass and enstrophy budgets, and the streamfunction construction.
"""

import numpy as np
import pytest

from noda.dataset import Equation
from noda.errors import BlowUpError
from noda.grid_fft import Grid1D, Grid2D, rfft_wavenumbers
from noda.solvers import (
    GrfSpec,
    KdVConfig,
    KSConfig,
    NSConfig,
    default_config,
    etdrk4_step,
    generate_trajectories,
    get_stepper,
    ns_crank_nicolson_step,
    recover_velocity,
    rollout,
    sample_initial_condition,
)
from noda.solvers.factory import frame_count
from noda.solvers.navier_stokes import divergence, forcing_field


# ============================================================
# INITIAL CONDITIONS
# ============================================================

class TestInitialConditions:

    def test_same_seed_bit_identical(self):
        grid = Grid2D(32, 32)
        spec = GrfSpec(seed=11)
        a = sample_initial_condition(spec, grid)
        b = sample_initial_condition(spec, grid)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        grid = Grid1D(128, 64 * np.pi)
        a = sample_initial_condition(GrfSpec(kind="sine", seed=1), grid)
        b = sample_initial_condition(GrfSpec(kind="sine", seed=2), grid)
        assert not np.array_equal(a, b)

    def test_zero_amplitude_gives_zero_field(self):
        z = sample_initial_condition(GrfSpec(amplitude=0.0), Grid2D(16, 16))
        assert np.all(z == 0.0)

    @pytest.mark.parametrize("kind,grid", [
        ("gaussian", Grid2D(32, 32)),
        ("gaussian", Grid1D(64, 2 * np.pi)),
        ("sine", Grid1D(128, 128.0)),
    ])
    def test_zero_mean(self, kind, grid):
        z = sample_initial_condition(GrfSpec(kind=kind, seed=3), grid)
        assert abs(z.mean()) < 1e-12

    def test_sine_amplitude_normalised(self):
        z = sample_initial_condition(GrfSpec(kind="sine", amplitude=2.0, seed=4), Grid1D(512, 64 * np.pi))
        assert np.max(np.abs(z)) == pytest.approx(2.0)

    def test_steep_decay_concentrates_energy_at_low_k(self):
        grid = Grid1D(64, 2 * np.pi)
        k = np.abs(np.fft.fftfreq(64, d=1.0 / 64))
        high, total = 0.0, 0.0
        for seed in range(100):
            z = sample_initial_condition(GrfSpec(kind="gaussian", decay=4.0, tau=7.0, seed=seed), grid)
            power = np.abs(np.fft.fft(z)) ** 2
            high += power[k > 10].sum()
            total += power.sum()
        assert high / total < 0.01


# ============================================================
# ETDRK4 (KS / KdV)
# ============================================================

class TestEtdrk4:

    def test_linear_ks_matches_exponential(self):
        config = KSConfig(grid=Grid1D(512, 64 * np.pi), nonlinear=False)
        x = np.arange(512) * config.grid.dx
        k = 2 * np.pi * 3 / config.grid.length
        z0 = np.sin(k * x)
        dt = config.h / config.inner_steps
        expected = np.exp((k**2 - k**4) * dt) * z0
        assert np.max(np.abs(etdrk4_step(z0, config) - expected)) < 1e-10

    def test_linear_kdv_matches_phase_shift(self):
        config = KdVConfig(nonlinear=False)
        grid = config.grid
        z0 = np.random.default_rng(0).normal(size=grid.n)
        dt = config.h / config.inner_steps
        k = rfft_wavenumbers(grid.n, grid.length)
        expected = np.fft.irfft(np.exp(1j * k**3 * dt) * np.fft.rfft(z0), n=grid.n)
        assert np.max(np.abs(etdrk4_step(z0, config) - expected)) < 1e-9

    def test_zero_field_stays_zero(self):
        config = KSConfig(grid=Grid1D(64, 64 * np.pi))
        assert np.all(etdrk4_step(np.zeros(64), config) == 0.0)

    def test_nan_state_reports_frame(self):
        config = KSConfig(grid=Grid1D(64, 64 * np.pi))
        state = np.zeros(64)
        state[3] = np.nan
        with pytest.raises(BlowUpError) as exc:
            etdrk4_step(state, config, frame=17)
        assert exc.value.frame == 17

    def test_kdv_soliton_propagation(self):
        config = KdVConfig(grid=Grid1D(256, 128.0), h=0.5, inner_steps=8)
        x = np.arange(256) * config.grid.dx
        c, x0 = 0.25, 40.0

        def soliton(t):
            return 3 * c / np.cosh(0.5 * np.sqrt(c) * (x - x0 - c * t)) ** 2

        traj = rollout("kdv", config, soliton(0.0), t_f=5.0)
        exact = soliton(5.0)
        err = np.linalg.norm(traj.frames[-1] - exact) / np.linalg.norm(exact)
        assert err < 1e-4

    def test_kdv_mass_conserved(self):
        config = default_config("kdv")
        z0 = sample_initial_condition(GrfSpec(kind="sine", amplitude=0.5, seed=5), config.grid)
        traj = rollout("kdv", config, z0, t_f=99 * config.h)
        mass = traj.frames.sum(axis=1) * config.grid.dx
        assert traj.n_frames == 100
        assert np.max(np.abs(mass - mass[0])) < 1e-8


# ============================================================
# NAVIER-STOKES
# ============================================================

class TestNavierStokes:

    def test_unforced_enstrophy_decreases(self):
        config = NSConfig(grid=Grid2D(32, 32), forcing=False)
        z0 = sample_initial_condition(GrfSpec(seed=8, amplitude=7.0 ** 1.5), config.grid)
        traj = rollout("ns", config, z0, t_f=10.0)
        enstrophy = np.sum(traj.frames**2, axis=(1, 2))
        assert np.all(np.diff(enstrophy) < 0)

    def test_forcing_response_from_rest(self):
        config = NSConfig(grid=Grid2D(32, 32))
        dt = config.h / config.inner_steps
        kx = 2 * np.pi * np.fft.fftfreq(32, d=1.0 / 32)
        ky = 2 * np.pi * np.arange(17)
        lap = kx[:, None] ** 2 + ky[None, :] ** 2
        f_hat = np.fft.rfft2(forcing_field(config.grid))
        expected = np.fft.irfft2(dt * f_hat / (1 + 0.5 * dt * config.nu * lap), s=(32, 32))
        out = ns_crank_nicolson_step(np.zeros((32, 32)), config)
        assert np.max(np.abs(out)) > 0
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_linear_step_is_crank_nicolson(self):
        config = NSConfig(grid=Grid2D(16, 16), forcing=False, nonlinear=False)
        dt = config.h / config.inner_steps
        x = np.arange(16) / 16
        z0 = np.sin(2 * np.pi * x)[:, None] * np.ones(16)[None, :]
        a = dt * config.nu * (2 * np.pi) ** 2
        expected = (1 - a / 2) / (1 + a / 2) * z0
        assert np.max(np.abs(ns_crank_nicolson_step(z0, config) - expected)) < 1e-12

    def test_velocity_is_divergence_free(self):
        config = NSConfig(grid=Grid2D(32, 32))
        z0 = sample_initial_condition(GrfSpec(seed=2, amplitude=7.0 ** 1.5), config.grid)
        traj = rollout("ns", config, z0, t_f=3.0)
        for frame in traj.frames:
            u, v = recover_velocity(frame, config.grid)
            assert np.max(np.abs(divergence(u, v, config.grid))) < 1e-10

    def test_mean_vorticity_stays_zero(self):
        config = NSConfig(grid=Grid2D(32, 32))
        z0 = sample_initial_condition(GrfSpec(seed=4, amplitude=7.0 ** 1.5), config.grid)
        traj = rollout("ns", config, z0, t_f=3.0)
        assert np.max(np.abs(traj.frames.mean(axis=(1, 2)))) < 1e-12

    def test_invalid_reynolds_rejected(self):
        with pytest.raises(ValueError):
            NSConfig(re=0.0)


# ============================================================
# ROLLOUT AND GENERATION
# ============================================================

class TestRollout:

    def test_ks_frame_count(self):
        config = default_config("ks")
        z0 = sample_initial_condition(GrfSpec(kind="sine", amplitude=2.0, seed=0), config.grid)
        traj = rollout("ks", config, z0, t_f=60.0)
        assert traj.frames.shape == (241, 512)
        assert np.max(np.abs(traj.frames[-40:])) < 10.0

    def test_ns_frame_shape(self):
        config = default_config("ns")
        z0 = sample_initial_condition(GrfSpec(seed=0, amplitude=7.0 ** 1.5), config.grid)
        traj = rollout("ns", config, z0, t_f=5.0)
        assert traj.frames.shape == (6, 64, 64)
        assert traj.equation == Equation.NS

    def test_frame_count_arithmetic(self):
        assert frame_count(500.0, 1.0) == 501
        assert frame_count(60.0, 0.25) == 241
        with pytest.raises(ValueError):
            frame_count(1.1, 0.25)

    def test_zero_horizon_is_initial_frame(self):
        config = default_config("ks", resolution=64)
        z0 = np.sin(np.arange(64) * config.grid.dx / 4)
        traj = rollout("ks", config, z0, t_f=0.0)
        assert traj.n_frames == 1
        assert np.array_equal(traj.frames[0], z0)

    def test_mismatched_config_rejected(self):
        with pytest.raises(ValueError):
            get_stepper("ns", KSConfig())

    def test_resolution_override(self):
        assert default_config("ns", resolution=(32, 32)).grid.shape == (32, 32)
        assert default_config("kdv", resolution=64).grid.n == 64
        assert default_config("ns", re=500.0).re == 500.0

    def test_generation_deterministic_across_workers(self):
        config = default_config("ks", resolution=64)
        one = generate_trajectories("ks", config, 3, t_f=2.0, base_seed=10, workers=1)
        many = generate_trajectories("ks", config, 3, t_f=2.0, base_seed=10, workers=3)
        assert [t.seed for t in one] == [10, 11, 12]
        for a, b in zip(one, many):
            assert np.array_equal(a.frames, b.frames)
