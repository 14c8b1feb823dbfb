import numpy as np
import pytest

from sdlr.do_method import DoState, do_init, do_moments, do_step
from sdlr.ensemble import noise_for_step
from sdlr.errors import DomainError
from sdlr.linalg import frame_defect, hs_norm, random_stiefel
from sdlr.lowrank import LowRankState, ensemble_moments
from sdlr.models import gbm_initial_measure, make_gbm, sample_initial

from conftest import random_complex


def moderate_gbm(rng, n):
    lam = random_complex(rng, n, n) / np.sqrt(n) - np.eye(n)
    theta = 0.3 * random_complex(rng, n, n) / np.sqrt(n)
    return make_gbm(lam, theta)


class TestInit:
    def test_identical_samples(self, rng):
        x0 = random_complex(rng, 5)
        state = do_init(np.repeat(x0[None, :], 12, axis=0), 2)
        assert np.allclose(state.mean, x0)
        assert np.abs(state.ensemble).max() < 1e-12

    def test_centered_exact_rank_lossless(self, rng):
        n, r, m = 8, 3, 100
        base = random_stiefel(n, r, rng)
        mean = random_complex(rng, n)
        samples = mean + random_complex(rng, m, r) @ base.T
        state = do_init(samples, r)
        recon = state.mean + state.ensemble @ state.frame.T
        assert np.abs(recon - samples).max() < 1e-8

    def test_mean_is_centered(self, rng):
        samples = random_complex(rng, 64, 6)
        state = do_init(samples, 3)
        assert hs_norm(state.ensemble.mean(axis=0)) < 1e-10

    def test_rank_too_large(self, rng):
        with pytest.raises(DomainError):
            do_init(random_complex(rng, 10, 3), 4)


class TestStep:
    def test_deterministic_ode_reduction(self, rng):
        # no diffusion and a degenerate ensemble: the mean follows explicit
        # Euler and the frame freezes
        n, m, dt = 5, 16, 1e-2
        lam = random_complex(rng, n, n) / np.sqrt(n)
        model = make_gbm(lam, np.zeros((n, n)))
        x0 = random_complex(rng, n)
        state = do_init(np.repeat(x0[None, :], m, axis=0), 2)
        frame0 = state.frame
        xbar = x0.copy()
        for k in range(20):
            state = do_step(state, model, dt, np.zeros((m, 1)))
            xbar = xbar + dt * (lam @ xbar)
        assert np.abs(state.mean - xbar).max() < 1e-12
        assert hs_norm(state.frame - frame0) < 1e-12
        assert np.abs(state.ensemble).max() < 1e-12

    def test_zero_mean_and_frame_invariants(self, rng):
        model = moderate_gbm(rng, 7)
        samples = sample_initial(gbm_initial_measure(7, rng), 300, rng)
        state = do_init(samples, 3)
        for k in range(40):
            xi = noise_for_step(21, 2, k + 1, 300, model.num_channels)
            state = do_step(state, model, 0.01, xi)
            assert hs_norm(state.ensemble.mean(axis=0)) <= 1e-10
            assert frame_defect(state.frame) <= 1e-10


class TestRankOrdering:
    def test_gbm_second_moment_error_decreases_with_rank(self):
        # fully deterministic given (config, seed); the gaps between ranks
        # are several times the Monte Carlo scale
        from sdlr.config import ExperimentConfig
        from sdlr.experiments import run_experiment

        cfg = ExperimentConfig(
            experiment="gbm",
            n=20,
            rank_list=(1, 3, 5),
            samples=4000,
            dt=1.0 / 300.0,
            T=1.0,
            seed=20250809,
            method_list=("do",),
        )
        result = run_experiment(cfg)
        errs = {r: result.runs[("do", r)].records[-1].rel_err_second for r in (1, 3, 5)}
        assert errs[5] < errs[3] < errs[1]


class TestMoments:
    def test_degenerate_ensemble(self, rng):
        x0 = random_complex(rng, 4)
        state = do_init(np.repeat(x0[None, :], 8, axis=0), 1)
        mom = do_moments(state)
        assert np.allclose(mom.second_moment, np.outer(x0, x0.conj()), atol=1e-12)

    def test_zero_mean_matches_lowrank_moments(self, rng):
        u = random_stiefel(6, 2, rng)
        y = random_complex(rng, 50, 2)
        y = y - y.mean(axis=0)
        do_state = DoState(0.0, np.zeros(6, dtype=complex), u, y)
        lr_state = LowRankState(0.0, u, y)
        mom_do = do_moments(do_state)
        mom_lr = ensemble_moments(lr_state)
        assert hs_norm(mom_do.second_moment - mom_lr.second_moment) < 1e-12
        assert hs_norm(mom_do.reduced_second - mom_lr.reduced_second) < 1e-12

    def test_trace_identity(self, rng):
        samples = random_complex(rng, 120, 5)
        state = do_init(samples, 3)
        mom = do_moments(state)
        expected = np.linalg.norm(state.mean) ** 2 + np.mean(
            np.linalg.norm(state.ensemble, axis=1) ** 2
        )
        assert np.trace(mom.second_moment).real == pytest.approx(expected, abs=1e-10)
