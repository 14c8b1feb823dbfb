"""Experiment runner: builds a model and its reference, runs the requested
methods at the requested ranks, and records diagnostics rows.

Everything is reproducible from ``(config, seed)``: model draws, initial
samples and per-step Brownian increments come from counter-based streams
keyed by the seed, a purpose tag and the step index.  BLAS threading is
pinned to one thread for the duration of a run so the emitted CSVs are
byte-identical for any ``SDLR_THREADS`` value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ExperimentConfig
from .diagnostics import DENOM_FLOOR, TrajectoryRecord, moment_ode_oracle
from .do_method import do_init, do_moments, do_step
from .ensemble import em_step, ensemble_gram, map_blocks, noise_for_step, stream_generator
from .errors import ConfigError, DomainError, NumericError, SingularityError
from .lindblad import (
    LindbladGenerator,
    LowRankQmeState,
    integrate_lindblad,
    integrate_lowrank_qme,
    make_damped_oscillator,
)
from .linalg import eigh_desc, hermitize, hs_norm, random_stiefel, top_spectrum
from .lowrank import (
    MomentSummary,
    ensemble_moments,
    gronwall_bound,
    growth_rate_bound,
    init_low_rank,
    residual_epsilon_sq,
    sdlr_step,
)
from .models import (
    DiscreteInitialMeasure,
    burgers_initial_measure,
    gbm_initial_measure,
    make_burgers,
    make_gbm,
    make_lqsd,
    make_qsd,
    measure_moments,
    oscillator_initial_measure,
    sample_initial,
)

# purpose tags for the counter-based random streams
STREAM_SDLR = 1
STREAM_DO = 2
STREAM_FULL_MC = 3
STREAM_REF_MC = 4
STREAM_MODEL = 10
STREAM_INIT = 12
STREAM_REF_INIT = 13

ODE_REF_SUBSTEPS = 4
LINDBLAD_REF_SUBSTEPS = 8
REF_MC_FACTOR = 4
RECORDS_PER_UNIT_TIME = 20

CSV_COLUMNS_FIXED = ("t", "rel_err_mean", "rel_err_second")
CSV_COLUMNS_TAIL = ("residual_eps_sq", "trace", "gronwall_bound")


@dataclass
class MethodRun:
    """Diagnostics rows for one (method, rank), plus an error if it aborted."""

    method: str
    rank: int
    records: list[TrajectoryRecord]
    error: str | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: dict[tuple[str, int], MethodRun]
    reference_note: str


@dataclass
class _Setup:
    model: object
    measure: DiscreteInitialMeasure
    generator: LindbladGenerator | None
    gamma_fn: Callable[[float], float] | None
    ref_means: np.ndarray | None  # one row per record time, or None
    ref_seconds: np.ndarray  # one matrix per record time
    note: str


def _record_steps(n_steps: int, dt: float) -> list[int]:
    every = max(1, int(round(1.0 / (RECORDS_PER_UNIT_TIME * dt))))
    ks = list(range(0, n_steps + 1, every))
    if ks[-1] != n_steps:
        ks.append(n_steps)
    return ks


def _full_moments(x: np.ndarray) -> MomentSummary:
    m = x.shape[0]

    def work(lo: int, hi: int):
        xb = x[lo:hi]
        return xb.sum(axis=0), xb.T @ xb.conj()

    parts = map_blocks(work, m)
    s_x, s_xx = parts[0]
    for px, pxx in parts[1:]:
        s_x = s_x + px
        s_xx = s_xx + pxx
    second = hermitize(s_xx / m)
    return MomentSummary(s_x / m, second, second)


def _build_setup(cfg: ExperimentConfig, n_steps: int, record_ks: list[int]) -> _Setup:
    t_final = n_steps * cfg.dt
    if cfg.experiment in ("gbm", "custom-linear"):
        rng = stream_generator(cfg.seed, STREAM_MODEL)
        diag = rng.uniform(cfg.eig_interval[0], cfg.eig_interval[1], cfg.n)
        q = random_stiefel(cfg.n, cfg.n, rng)
        lam = q @ np.diag(diag).astype(complex) @ q.conj().T
        theta = np.sqrt(cfg.theta_scale) * np.eye(cfg.n, dtype=complex)
        model = make_gbm(lam, theta)
        measure = gbm_initial_measure(cfg.n, rng, n_atoms=min(5, cfg.n))
        mean0, second0 = measure_moments(measure)
        _, means, seconds = moment_ode_oracle(
            lam, theta, mean0, second0, t_final, cfg.dt / ODE_REF_SUBSTEPS
        )
        idx = [k * ODE_REF_SUBSTEPS for k in record_ks]
        return _Setup(
            model,
            measure,
            None,
            growth_rate_bound(model),
            means[idx],
            seconds[idx],
            f"moment-ode-oracle rk4, dt/{ODE_REF_SUBSTEPS}",
        )
    if cfg.experiment == "burgers":
        model = make_burgers(cfg.n, cfg.nu, cfg.gamma)
        measure = burgers_initial_measure(cfg.n)
        m_ref = REF_MC_FACTOR * cfg.samples
        x = sample_initial(measure, m_ref, stream_generator(cfg.seed, STREAM_REF_INIT))
        ref_means = []
        ref_seconds = []
        rec = set(record_ks)
        if 0 in rec:
            mom = _full_moments(x)
            ref_means.append(mom.mean)
            ref_seconds.append(mom.second_moment)
        for k in range(1, n_steps + 1):
            noise = noise_for_step(cfg.seed, STREAM_REF_MC, k, m_ref, model.num_channels)
            x = em_step(x, model, (k - 1) * cfg.dt, cfg.dt, noise)
            if k in rec:
                mom = _full_moments(x)
                ref_means.append(mom.mean)
                ref_seconds.append(mom.second_moment)
        return _Setup(
            model,
            measure,
            None,
            None,
            np.array(ref_means),
            np.array(ref_seconds),
            f"euler-maruyama reference, {REF_MC_FACTOR}x samples",
        )
    # oscillator
    gen = make_damped_oscillator(cfg.n, cfg.omega, cfg.gamma1, cfg.gamma2)
    model = make_lqsd(gen) if cfg.unraveling == "lqsd" else make_qsd(gen)
    measure = oscillator_initial_measure(cfg.n)
    rho0 = measure_moments(measure)[1]
    _, rhos = integrate_lindblad(gen, rho0, t_final, cfg.dt / LINDBLAD_REF_SUBSTEPS)
    idx = [k * LINDBLAD_REF_SUBSTEPS for k in record_ks]
    return _Setup(
        model,
        measure,
        gen,
        growth_rate_bound(model),
        None,
        rhos[idx],
        f"rk4 lindblad reference, dt/{LINDBLAD_REF_SUBSTEPS}",
    )


def _make_record(
    t: float,
    mom: MomentSummary,
    residual: float,
    rec_i: int,
    setup: _Setup,
    spectrum_k: int,
    e0: float | None,
    eps_max: float,
) -> TrajectoryRecord:
    ref_second = setup.ref_seconds[rec_i]
    denom = hs_norm(ref_second)
    rel_second = (
        hs_norm(mom.second_moment - ref_second) / denom
        if denom > DENOM_FLOOR
        else math.inf
    )
    rel_mean = None
    if setup.ref_means is not None:
        ref_mean = setup.ref_means[rec_i]
        denom_m = hs_norm(ref_mean)
        rel_mean = (
            hs_norm(mom.mean - ref_mean) / denom_m if denom_m > DENOM_FLOOR else math.inf
        )
    bound = None
    if setup.gamma_fn is not None and e0 is not None:
        bound = float(gronwall_bound(e0, eps_max, setup.gamma_fn, t))
    eigs = tuple(float(v) for v in top_spectrum(mom.second_moment, spectrum_k))
    return TrajectoryRecord(
        t=t,
        rel_err_mean=rel_mean,
        rel_err_second=rel_second,
        top_eigs=eigs,
        residual_eps_sq=residual,
        trace=float(np.trace(mom.second_moment).real),
        gronwall_bound=bound,
    )


def _run_ensemble_method(
    method: str,
    rank: int,
    samples0: np.ndarray,
    cfg: ExperimentConfig,
    setup: _Setup,
    n_steps: int,
    record_ks: list[int],
) -> MethodRun:
    model = setup.model
    m = samples0.shape[0]
    if method == "sdlr":
        state = init_low_rank(samples0, rank)
        stream = STREAM_SDLR
    elif method == "do":
        # the deterministic mean accounts for one rank of the total budget
        state = do_init(samples0, max(1, rank - 1))
        stream = STREAM_DO
    else:
        state = samples0.copy()
        stream = STREAM_FULL_MC
    rec_pos = {k: i for i, k in enumerate(record_ks)}
    records: list[TrajectoryRecord] = []
    e0: float | None = None
    eps_max = 0.0
    error = None
    try:
        for k in range(n_steps + 1):
            if k in rec_pos:
                t = k * cfg.dt
                if method == "sdlr":
                    mom = ensemble_moments(state)
                    residual = residual_epsilon_sq(state, model)
                elif method == "do":
                    mom = do_moments(state)
                    residual = _do_residual(state, model)
                else:
                    mom = _full_moments(state)
                    residual = 0.0
                eps_max = max(eps_max, residual)
                if e0 is None and setup.gamma_fn is not None:
                    e0 = hs_norm(mom.second_moment - setup.ref_seconds[0])
                records.append(
                    _make_record(
                        t, mom, residual, rec_pos[k], setup, cfg.spectrum_k, e0, eps_max
                    )
                )
            if k == n_steps:
                break
            noise = noise_for_step(cfg.seed, stream, k + 1, m, model.num_channels)
            if method == "sdlr":
                state = sdlr_step(state, model, cfg.dt, noise)
            elif method == "do":
                state = do_step(state, model, cfg.dt, noise)
            else:
                state = em_step(state, model, k * cfg.dt, cfg.dt, noise)
    except (SingularityError, NumericError) as exc:
        error = str(exc)
    return MethodRun(method, rank, records, error)


def _do_residual(state, model) -> float:
    """Diffusion tangent defect of a mean-plus-frame state."""
    u = state.frame
    y = state.ensemble
    u_t = u.T.copy()
    xbar = state.mean
    gram = ensemble_gram(
        model, state.t, lambda lo, hi: xbar + y[lo:hi] @ u_t, y.shape[0]
    )
    q = np.eye(u.shape[0], dtype=complex) - u @ u.conj().T
    return hs_norm(hermitize(q @ gram @ q))


def _run_lowrank_qme(
    rank: int,
    cfg: ExperimentConfig,
    setup: _Setup,
    n_steps: int,
    record_ks: list[int],
) -> MethodRun:
    rho0 = measure_moments(setup.measure)[1]
    _, vecs = eigh_desc(rho0)
    u0 = vecs[:, :rank]
    sigma0 = hermitize(u0.conj().T @ rho0 @ u0)
    rec_pos = {k: i for i, k in enumerate(record_ks)}
    records: list[TrajectoryRecord] = []
    error = None
    try:
        # DomainError covers a rank above the initial density's rank, where
        # the reduced density is singular from the start
        state = LowRankQmeState(u0, sigma0)
        for k in range(n_steps + 1):
            if k in rec_pos:
                rho = state.density()
                mom = MomentSummary(np.zeros(cfg.n, dtype=complex), rho, state.sigma)
                records.append(
                    _make_record(
                        k * cfg.dt, mom, 0.0, rec_pos[k], setup, cfg.spectrum_k, None, 0.0
                    )
                )
            if k == n_steps:
                break
            _, states = integrate_lowrank_qme(setup.generator, state, cfg.dt, cfg.dt)
            state = states[-1]
    except (SingularityError, NumericError, DomainError) as exc:
        error = str(exc)
    return MethodRun("lowrank_qme", rank, records, error)


def _run_lindblad_ref(
    cfg: ExperimentConfig, setup: _Setup, record_ks: list[int]
) -> MethodRun:
    records = []
    for i, k in enumerate(record_ks):
        rho = setup.ref_seconds[i]
        mom = MomentSummary(np.zeros(cfg.n, dtype=complex), rho, rho)
        records.append(
            _make_record(k * cfg.dt, mom, 0.0, i, setup, cfg.spectrum_k, None, 0.0)
        )
    return MethodRun("lindblad_ref", cfg.n, records)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every requested (method, rank) with the shared seed.

    Failed runs (singular covariance, non-finite states) keep their
    partial records and carry the error message.
    """
    cfg.validate()
    n_steps = int(round(cfg.T / cfg.dt))
    if n_steps < 1 or abs(n_steps * cfg.dt - cfg.T) > 1e-9 * max(1.0, cfg.T):
        raise ConfigError(f"T: {cfg.T} is not an integer multiple of dt={cfg.dt}")
    record_ks = _record_steps(n_steps, cfg.dt)
    with threadpool_limits(limits=1, user_api="blas"):
        setup = _build_setup(cfg, n_steps, record_ks)
        samples0 = sample_initial(
            setup.measure, cfg.samples, stream_generator(cfg.seed, STREAM_INIT)
        )
        runs: dict[tuple[str, int], MethodRun] = {}
        for method in cfg.method_list:
            if method == "lindblad_ref":
                runs[(method, cfg.n)] = _run_lindblad_ref(cfg, setup, record_ks)
            elif method == "full_mc":
                runs[(method, cfg.n)] = _run_ensemble_method(
                    method, cfg.n, samples0, cfg, setup, n_steps, record_ks
                )
            elif method == "lowrank_qme":
                for rank in cfg.rank_list:
                    runs[(method, rank)] = _run_lowrank_qme(
                        rank, cfg, setup, n_steps, record_ks
                    )
            else:
                for rank in cfg.rank_list:
                    runs[(method, rank)] = _run_ensemble_method(
                        method, rank, samples0, cfg, setup, n_steps, record_ks
                    )
    return ExperimentResult(cfg, runs, setup.note)


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return f"{value:.17g}"


def csv_header(spectrum_k: int) -> str:
    eig_cols = [f"eig{i + 1}" for i in range(spectrum_k)]
    return ",".join([*CSV_COLUMNS_FIXED, *eig_cols, *CSV_COLUMNS_TAIL])


def write_csv(
    records: list[TrajectoryRecord], path: str | Path, spectrum_k: int | None = None
) -> None:
    """One row per record; floats carry 17 significant digits; ``None``
    fields stay empty."""
    if spectrum_k is None:
        spectrum_k = len(records[0].top_eigs) if records else 5
    lines = [csv_header(spectrum_k)]
    for rec in records:
        vals = [
            rec.t,
            rec.rel_err_mean,
            rec.rel_err_second,
            *rec.top_eigs,
            rec.residual_eps_sq,
            rec.trace,
            rec.gronwall_bound,
        ]
        lines.append(",".join(_fmt(v) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> tuple[list[str], list[list[float | None]]]:
    """Inverse of :func:`write_csv`; empty fields parse back to ``None``."""
    text = Path(path).read_text().strip("\n")
    lines = text.split("\n")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        rows.append([None if tok == "" else float(tok) for tok in line.split(",")])
    return header, rows
