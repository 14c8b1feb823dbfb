"""Dynamically orthogonal baseline: deterministic mean plus a zero-mean
reduced ensemble on an orthonormal frame.

Shares the pseudo-inverse, retraction, noise-injection and ordered
reduction policies of the low-rank integrator so comparisons are fair.
The zero-mean constraint is restored by re-centering after every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import check_finite, em_increment, map_blocks
from .errors import DimensionError, DomainError
from .linalg import (
    DEFAULT_PINV_RTOL,
    eigh_desc,
    frame_defect,
    hermitize,
    pinv_psd,
    retract_to_stiefel,
)
from .lowrank import MomentSummary
from .models import SdeModel


@dataclass(frozen=True)
class DoState:
    """Time, deterministic mean, frame and zero-mean reduced ensemble."""

    t: float
    mean: np.ndarray
    frame: np.ndarray
    ensemble: np.ndarray

    def __post_init__(self):
        xbar = np.asarray(self.mean, dtype=complex)
        u = np.asarray(self.frame, dtype=complex)
        y = np.asarray(self.ensemble, dtype=complex)
        if u.ndim != 2 or xbar.shape != (u.shape[0],) or y.shape[1:] != (u.shape[1],):
            raise DimensionError(
                f"mean {xbar.shape}, frame {u.shape}, ensemble {y.shape} inconsistent"
            )
        if y.shape[0] < 1:
            raise DomainError("ensemble must contain at least one sample")
        if frame_defect(u) > 1e-10:
            raise DomainError("frame columns are not orthonormal")
        object.__setattr__(self, "mean", xbar)
        object.__setattr__(self, "frame", u)
        object.__setattr__(self, "ensemble", y)

    @property
    def n_samples(self) -> int:
        return self.ensemble.shape[0]


def do_init(samples: np.ndarray, r: int) -> DoState:
    """Split off the sample mean and project the centered samples onto the
    top-``r`` eigenspace of their centered second moment."""
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise DimensionError(f"expected (samples, dim) array, got {samples.shape}")
    n = samples.shape[1]
    if r > n:
        raise DomainError(f"rank {r} exceeds dimension {n}")
    if r < 1:
        raise DomainError(f"rank must be positive, got {r}")
    xbar = samples.mean(axis=0)
    centered = samples - xbar
    second = hermitize(centered.T @ centered.conj() / samples.shape[0])
    _, vecs = eigh_desc(second)
    u = vecs[:, :r]
    y = centered @ u.conj()
    return DoState(0.0, xbar, u, y - y.mean(axis=0))


def do_step(
    state: DoState,
    model: SdeModel,
    dt: float,
    noise: np.ndarray,
    pinv_rtol: float = DEFAULT_PINV_RTOL,
) -> DoState:
    """One step of the mean ODE, frame ODE and centered ensemble SDE.

    All coefficients are evaluated at the pre-step reconstruction
    ``xbar + U y``.  A degenerate (identically zero) ensemble is legal:
    the pseudo-inverse freezes the frame and the mean follows the drift.
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    u = state.frame
    y = state.ensemble
    xbar = state.mean
    m = y.shape[0]
    if noise.shape != (m, model.num_channels):
        raise DimensionError(f"noise shape {noise.shape} != ({m}, {model.num_channels})")
    if model.dim != u.shape[0]:
        raise DimensionError(f"model dim {model.dim} != frame dim {u.shape[0]}")
    n, r = u.shape
    u_t = u.T.copy()
    u_c = u.conj()
    incs = np.empty((m, n), dtype=complex)

    def work(lo: int, hi: int):
        with np.errstate(invalid="ignore", over="ignore"):
            yb = y[lo:hi]
            xb = xbar + yb @ u_t
            a = model.drift(xb, state.t)
            bs = model.channels(xb, state.t)
            incs[lo:hi] = em_increment(a, bs, dt, noise[lo:hi], model.complex_pairs)
            return a.sum(axis=0), a.T @ yb.conj(), yb.T @ yb.conj()

    parts = map_blocks(work, m)
    s_a, s_ay, s_yy = parts[0]
    for pa, pay, pyy in parts[1:]:
        s_a = s_a + pa
        s_ay = s_ay + pay
        s_yy = s_yy + pyy
    mean_a = s_a / m
    m_ay = s_ay / m
    s_red = hermitize(s_yy / m)
    y_new = y + (incs - dt * mean_a) @ u_c
    y_new = y_new - y_new.mean(axis=0)
    check_finite(y_new, "ensemble state")
    # a fluctuation power at cancellation-noise level (relative to the state
    # power) means the ensemble is degenerate: the frame stays frozen
    s_scale = float(np.trace(s_red).real)
    state_scale = float(np.vdot(xbar, xbar).real) + s_scale
    if s_scale <= 1e-24 * max(state_scale, 1e-300):
        u_next = u
    else:
        qa = m_ay - u @ (u.conj().T @ m_ay)
        du = qa @ pinv_psd(s_red, pinv_rtol)
        u_next = retract_to_stiefel(u + dt * du)
    return DoState(state.t + dt, xbar + dt * mean_a, u_next, y_new)


def do_moments(state: DoState) -> MomentSummary:
    """Moments of ``xbar + U y``; cross terms vanish by the zero mean."""
    y = state.ensemble
    u = state.frame
    reduced = hermitize(y.T @ y.conj() / y.shape[0])
    second = hermitize(
        np.outer(state.mean, state.mean.conj()) + u @ reduced @ u.conj().T
    )
    return MomentSummary(state.mean.copy(), second, reduced)
