"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.  Sample counts are desk
scale; tolerances include Monte Carlo slack.  The heavier runs share
module-scoped fixtures.
"""

import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from sdlr.config import ExperimentConfig
from sdlr.diagnostics import pseudometric
from sdlr.ensemble import em_step, noise_for_step, stream_generator
from sdlr.experiments import run_experiment, write_csv
from sdlr.lindblad import (
    LindbladGenerator,
    LowRankQmeState,
    integrate_lindblad,
    integrate_lowrank_qme,
    make_damped_oscillator,
)
from sdlr.linalg import hermitize, hs_norm, projectors, random_hermitian, random_stiefel
from sdlr.lowrank import (
    LowRankState,
    ensemble_moments,
    gronwall_bound,
    growth_rate_bound,
    init_low_rank,
    residual_epsilon_sq,
    sdlr_step,
)
from sdlr.models import (
    burgers_initial_measure,
    gbm_initial_measure,
    make_gbm,
    make_lqsd,
    make_qsd,
    measure_moments,
    oscillator_initial_measure,
    sample_initial,
    verify_unraveling,
)
from sdlr.diagnostics import moment_ode_oracle

from conftest import em_oracle_gap, random_complex


def report(criterion, passed, detail):
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    assert passed, f"{criterion}: {detail}"


@contextmanager
def worker_env(value):
    old = os.environ.get("SDLR_THREADS")
    os.environ["SDLR_THREADS"] = str(value)
    try:
        yield
    finally:
        if old is None:
            os.environ.pop("SDLR_THREADS", None)
        else:
            os.environ["SDLR_THREADS"] = old


GBM_CONFIG = ExperimentConfig(
    experiment="gbm",
    n=20,
    rank_list=(1, 3, 5),
    samples=10_000,
    dt=1.0 / 300.0,
    T=1.0,
    seed=20250809,
    method_list=("sdlr",),
)


@pytest.fixture(scope="module")
def gbm_outputs(tmp_path_factory):
    """Criterion-5 experiment run twice, under 1 and 4 workers."""
    outs = {}
    results = {}
    elapsed = {}
    for workers in (1, 4):
        out = tmp_path_factory.mktemp(f"gbm_w{workers}")
        start = time.time()
        with worker_env(workers):
            result = run_experiment(GBM_CONFIG)
        elapsed[workers] = time.time() - start
        for (method, rank), run in sorted(result.runs.items()):
            write_csv(run.records, out / f"{method}_r{rank}.csv", GBM_CONFIG.spectrum_k)
        outs[workers] = out
        results[workers] = result
    return results, outs, elapsed


def batch_relative_errors(state, ref_second, n_batches=10):
    """Per-batch relative HS errors of the assembled second moment."""
    u = state.frame
    y = state.ensemble
    splits = np.array_split(np.arange(y.shape[0]), n_batches)
    errs = []
    for idx in splits:
        yb = y[idx]
        second = hermitize(u @ (yb.T @ yb.conj() / len(idx)) @ u.conj().T)
        errs.append(hs_norm(second - ref_second) / hs_norm(ref_second))
    return np.array(errs)


def test_criterion_01_unraveling_identity():
    rng = np.random.default_rng(7777)
    start = time.time()
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        n_ops = int(rng.integers(1, 4))
        ops = tuple(random_complex(rng, n, n) / np.sqrt(n) for _ in range(n_ops))
        gen = LindbladGenerator(random_hermitian(n, rng), ops)
        for model in (make_lqsd(gen), make_qsd(gen)):
            for _ in range(100):
                x = random_complex(rng, n)
                worst = max(worst, verify_unraveling(model, gen, x))
    elapsed = time.time() - start
    report(
        "criterion 1 (unraveling identity)",
        worst <= 1e-10 and elapsed < 5.0,
        f"max residual {worst:.3e} (tol 1e-10), {elapsed:.2f}s (< 5s)",
    )


def test_criterion_02_full_rank_recovery():
    rng = np.random.default_rng(41)
    n, m, steps, dt = 6, 512, 200, 1e-3
    lam = random_complex(rng, n, n) / np.sqrt(n) - np.eye(n)
    theta = 0.4 * random_complex(rng, n, n) / np.sqrt(n)
    model = make_gbm(lam, theta)
    x0 = random_complex(rng, m, n)
    start = time.time()
    state = LowRankState(0.0, np.eye(n, dtype=complex), x0.copy())
    x = x0.copy()
    worst_path = 0.0
    worst_frame = 0.0
    for k in range(steps):
        xi = noise_for_step(17, 1, k + 1, m, model.num_channels)
        state = sdlr_step(state, model, dt, xi)
        x = em_step(x, model, k * dt, dt, xi)
        worst_path = max(worst_path, np.abs(state.ensemble - x).max())
        worst_frame = max(worst_frame, hs_norm(state.frame - np.eye(n)))
    elapsed = time.time() - start
    report(
        "criterion 2 (full-rank recovery)",
        worst_path <= 1e-12 and worst_frame <= 1e-12 and elapsed < 1.0,
        f"pathwise {worst_path:.3e}, frame {worst_frame:.3e} (tol 1e-12), "
        f"{elapsed:.2f}s (< 1s)",
    )


def test_criterion_03_subspace_consistency():
    rng = np.random.default_rng(97)
    n, r, m, dt = 8, 2, 256, 1e-3
    v = random_stiefel(n, r, rng)
    p = v @ v.conj().T
    lam = p @ (random_complex(rng, n, n) / np.sqrt(n) - np.eye(n)) @ p
    theta = 0.4 * p @ (random_complex(rng, n, n) / np.sqrt(n)) @ p
    model = make_gbm(lam, theta)
    state = init_low_rank(random_complex(rng, m, r) @ v.T, r)
    _, qv = projectors(v)
    start = time.time()
    worst_residual = 0.0
    worst_drift = 0.0
    for k in range(1000):
        worst_residual = max(worst_residual, residual_epsilon_sq(state, model))
        worst_drift = max(worst_drift, hs_norm(qv @ state.frame))
        xi = noise_for_step(23, 1, k + 1, m, model.num_channels)
        state = sdlr_step(state, model, dt, xi)
    worst_residual = max(worst_residual, residual_epsilon_sq(state, model))
    worst_drift = max(worst_drift, hs_norm(qv @ state.frame))
    elapsed = time.time() - start
    report(
        "criterion 3 (subspace consistency)",
        worst_residual <= 1e-10 and worst_drift <= 1e-6 and elapsed < 10.0,
        f"max defect {worst_residual:.3e} (tol 1e-10), max subspace drift "
        f"{worst_drift:.3e} (tol 1e-6), {elapsed:.2f}s (< 10s)",
    )


def test_criterion_04_commuting_diagram():
    n, r, m, dt, t_final = 8, 3, 20_000, 1.0 / 500.0, 1.0
    gen = make_damped_oscillator(n, 1.0, 0.2, 0.0)
    model = make_lqsd(gen)
    measure = oscillator_initial_measure(n)
    start = time.time()
    samples = sample_initial(measure, m, stream_generator(99, 12))
    state = init_low_rank(samples, r)
    qme_state = LowRankQmeState(state.frame, ensemble_moments(state).reduced_second)
    steps = int(round(t_final / dt))
    for k in range(steps):
        xi = noise_for_step(99, 1, k + 1, m, model.num_channels)
        state = sdlr_step(state, model, dt, xi)
    _, qme_states = integrate_lowrank_qme(gen, qme_state, t_final, 1e-3)
    second_mc = ensemble_moments(state).second_moment
    second_qme = qme_states[-1].density()
    rel = hs_norm(second_mc - second_qme) / hs_norm(second_qme)
    elapsed = time.time() - start
    report(
        "criterion 4 (commuting diagram)",
        rel <= 0.05 and elapsed < 60.0,
        f"relative HS distance {rel:.4f} (tol 0.05), {elapsed:.1f}s (< 60s)",
    )


def test_criterion_05_gbm_desk_scale(gbm_outputs):
    results, _, elapsed = gbm_outputs
    runs = results[1].runs
    start_eig = runs[("sdlr", 5)].records[0].top_eigs[0]
    end_eig = runs[("sdlr", 5)].records[-1].top_eigs[0]
    errs = {r: runs[("sdlr", r)].records[-1].rel_err_second for r in (1, 3, 5)}
    ok = (
        end_eig < start_eig
        and errs[5] < errs[1]
        and errs[5] <= 0.1
        and elapsed[1] < 120.0
    )
    report(
        "criterion 5 (gbm desk scale)",
        ok,
        f"top eig {start_eig:.4f} -> {end_eig:.4f}; rel second-moment errors "
        f"r1={errs[1]:.4f}, r3={errs[3]:.4f}, r5={errs[5]:.4f} "
        f"(need r5 < r1 and r5 <= 0.1); {elapsed[1]:.1f}s (< 120s)",
    )


def test_criterion_06_oscillator_desk_scale():
    n, m, dt, t_final = 21, 20_000, 1.0 / 500.0, 1.0
    gen = make_damped_oscillator(n, 1.0, 0.2, 0.0)
    model = make_lqsd(gen)
    measure = oscillator_initial_measure(n)
    rho0 = measure_moments(measure)[1]
    start = time.time()
    _, rhos = integrate_lindblad(gen, rho0, t_final, dt / 8)
    ref = rhos[-1]
    samples = sample_initial(measure, m, stream_generator(20250809, 12))
    errs = {}
    ses = {}
    steps = int(round(t_final / dt))
    for rank in (3, 5):
        state = init_low_rank(samples, rank)
        for k in range(steps):
            xi = noise_for_step(20250809, 1, k + 1, m, model.num_channels)
            state = sdlr_step(state, model, dt, xi)
        second = ensemble_moments(state).second_moment
        errs[rank] = hs_norm(second - ref) / hs_norm(ref)
        batch = batch_relative_errors(state, ref)
        ses[rank] = batch.std(ddof=1) / np.sqrt(len(batch))
    elapsed = time.time() - start
    slack = 2.0 * np.hypot(ses[3], ses[5])
    ok = errs[5] <= 0.1 and errs[5] <= errs[3] + slack
    report(
        "criterion 6 (oscillator desk scale)",
        ok,
        f"rel HS error r3={errs[3]:.4f}, r5={errs[5]:.4f} (tol 0.1); "
        f"monotone within 2se={slack:.4f}; {elapsed:.1f}s",
    )


def test_criterion_07_gronwall_bound():
    rng = stream_generator(555, 10)
    n, r, m, dt, t_final = 6, 3, 10_000, 1e-3, 1.0
    diag = rng.uniform(-4.5, -0.5, n)
    q = random_stiefel(n, n, rng)
    lam = q @ np.diag(diag).astype(complex) @ q.conj().T
    theta = np.sqrt(0.05) * np.eye(n, dtype=complex)
    model = make_gbm(lam, theta)
    measure = gbm_initial_measure(n, rng)
    mean0, second0 = measure_moments(measure)
    steps = int(round(t_final / dt))
    _, _, ref_seconds = moment_ode_oracle(lam, theta, mean0, second0, t_final, dt / 4)
    samples = sample_initial(measure, m, stream_generator(555, 12))
    state = init_low_rank(samples, r)
    gamma = growth_rate_bound(model)
    record_every = 50
    times, measured, bounds = [], [], []
    e0 = None
    eps_max = 0.0
    for k in range(steps + 1):
        if k % record_every == 0:
            second = ensemble_moments(state).second_moment
            err = hs_norm(second - ref_seconds[4 * k])
            eps_max = max(eps_max, residual_epsilon_sq(state, model))
            if e0 is None:
                e0 = err
            times.append(k * dt)
            measured.append(err)
            bounds.append(float(gronwall_bound(e0, eps_max, gamma, k * dt)))
        if k == steps:
            break
        xi = noise_for_step(555, 1, k + 1, m, model.num_channels)
        state = sdlr_step(state, model, dt, xi)
    measured = np.array(measured)
    bounds = np.array(bounds)
    ok = bool(np.all(measured <= bounds * 1.05))
    worst = float(np.max(measured / bounds))
    report(
        "criterion 7 (gronwall bound)",
        ok,
        f"max measured/bound ratio {worst:.4f} over {len(times)} grid points "
        f"(tol 1.05); E(0)={measured[0]:.3e}, gamma={gamma(0.0):.3f}",
    )


def test_criterion_08_pseudometric_equivalence():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(200):
        dim = int(rng.integers(1, 7))
        measures = []
        for _ in range(2):
            k = int(rng.integers(1, 11))
            atoms = random_complex(rng, k, dim)
            measures.append((atoms, rng.standard_normal(k)))
        d1 = pseudometric(measures[0], measures[1], "second_moment_form")
        d2 = pseudometric(measures[0], measures[1], "observable_form")
        worst = max(worst, abs(d1 - d2))
    report(
        "criterion 8 (pseudometric equivalence)",
        worst <= 1e-12,
        f"max |d1 - d2| = {worst:.3e} over 200 signed measures (tol 1e-12)",
    )


def test_criterion_09_oracle_validation():
    rng = np.random.default_rng(777)
    n = 4
    lam = random_complex(rng, n, n) / np.sqrt(n) - 0.5 * np.eye(n)
    theta = 0.3 * random_complex(rng, n, n) / np.sqrt(n)
    measure = oscillator_initial_measure(n, n_atoms=3)
    start = time.time()
    gap_mean, se_mean, gap_second, se_second = em_oracle_gap(
        lam, theta, measure, 100_000, 5e-4, 1.0, seed=909
    )
    elapsed = time.time() - start
    ok = gap_mean <= 3 * se_mean and gap_second <= 3 * se_second
    report(
        "criterion 9 (oracle validation)",
        ok,
        f"mean gap {gap_mean:.2e} vs 3se {3 * se_mean:.2e}; second gap "
        f"{gap_second:.2e} vs 3se {3 * se_second:.2e}; {elapsed:.1f}s",
    )


def test_criterion_10_determinism(gbm_outputs):
    _, outs, _ = gbm_outputs
    mismatched = []
    names = sorted(p.name for p in outs[1].glob("*.csv"))
    for name in names:
        if (outs[1] / name).read_bytes() != (outs[4] / name).read_bytes():
            mismatched.append(name)
    report(
        "criterion 10 (determinism)",
        not mismatched and len(names) == 3,
        f"{len(names)} CSVs byte-compared across SDLR_THREADS 1 vs 4; "
        f"mismatches: {mismatched or 'none'}",
    )


def test_soft_burgers_error_ratios():
    # report-only: qualitative method comparison on the nonlinear example.
    # At desk scale both methods sit at the Monte Carlo noise floor once the
    # rank covers the decaying spectrum, so ratios are reported per rank
    # without a hard threshold.
    cfg = ExperimentConfig(
        experiment="burgers",
        n=21,
        rank_list=(2, 3),
        samples=10_000,
        dt=1.0 / 200.0,
        T=1.0,
        seed=20250809,
        method_list=("sdlr", "do"),
    )
    result = run_experiment(cfg)
    for rank in cfg.rank_list:
        sdlr_rec = result.runs[("sdlr", rank)].records[-1]
        do_rec = result.runs[("do", rank)].records[-1]
        ratio_mean = sdlr_rec.rel_err_mean / do_rec.rel_err_mean
        ratio_second = sdlr_rec.rel_err_second / do_rec.rel_err_second
        expected = ratio_mean > 1.0 and ratio_second < 1.0
        print(
            f"[{'OK' if expected else 'NOTE'}] soft burgers ratios at t=1 "
            f"(rank {rank}): mean {ratio_mean:.3f} (> 1 expected), second moment "
            f"{ratio_second:.3f} (< 1 expected); errors sdlr=({sdlr_rec.rel_err_mean:.4f}, "
            f"{sdlr_rec.rel_err_second:.4f}) do=({do_rec.rel_err_mean:.4f}, "
            f"{do_rec.rel_err_second:.4f}); qualitative only, no hard threshold"
        )
