"""The low-rank ensemble integrator: a coupled frame ODE and reduced SDE.

State ``x`` is represented as ``U y`` with an orthonormal frame ``U`` of
rank ``r`` and an ensemble of reduced states ``y``.  Each step advances
the ensemble by Euler-Maruyama in the reduced coordinates and the frame
by an explicit Euler step projected onto the orthogonal complement,
followed by polar retraction.  All ensemble reductions run over fixed
sample blocks combined in block order, so results do not depend on the
worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ensemble import check_finite, em_increment, ensemble_gram, map_blocks
from .errors import DimensionError, DomainError, SingularityError
from .lindblad import superop_hs_norm
from .linalg import (
    DEFAULT_PINV_RTOL,
    eigh_desc,
    frame_defect,
    hermitize,
    hs_norm,
    pinv_psd,
    retract_to_stiefel,
)
from .models import SdeModel


@dataclass(frozen=True)
class LowRankState:
    """Time, frame and reduced ensemble (one row per sample)."""

    t: float
    frame: np.ndarray
    ensemble: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.frame, dtype=complex)
        y = np.asarray(self.ensemble, dtype=complex)
        if u.ndim != 2 or y.ndim != 2 or y.shape[1] != u.shape[1]:
            raise DimensionError(f"frame {u.shape} incompatible with ensemble {y.shape}")
        if y.shape[0] < 1:
            raise DomainError("ensemble must contain at least one sample")
        if frame_defect(u) > 1e-10:
            raise DomainError("frame columns are not orthonormal")
        object.__setattr__(self, "frame", u)
        object.__setattr__(self, "ensemble", y)

    @property
    def n_samples(self) -> int:
        return self.ensemble.shape[0]

    @property
    def rank(self) -> int:
        return self.frame.shape[1]


@dataclass(frozen=True)
class MomentSummary:
    """Empirical mean, full second moment and reduced second moment."""

    mean: np.ndarray
    second_moment: np.ndarray
    reduced_second: np.ndarray


def init_low_rank(samples: np.ndarray, r: int) -> LowRankState:
    """Project full-space samples onto the top-``r`` eigenspace of their
    empirical second moment.

    Lossless whenever the empirical second moment has rank at most ``r``.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise DimensionError(f"expected (samples, dim) array, got {samples.shape}")
    n = samples.shape[1]
    if r > n:
        raise DomainError(f"rank {r} exceeds dimension {n}")
    if r < 1:
        raise DomainError(f"rank must be positive, got {r}")
    second = hermitize(samples.T @ samples.conj() / samples.shape[0])
    _, vecs = eigh_desc(second)
    u = vecs[:, :r]
    return LowRankState(0.0, u, samples @ u.conj())


def sdlr_step(
    state: LowRankState,
    model: SdeModel,
    dt: float,
    noise: np.ndarray,
    pinv_rtol: float = DEFAULT_PINV_RTOL,
) -> LowRankState:
    """One coupled step: Euler-Maruyama on the ensemble, projected Euler
    plus retraction on the frame.

    Frame moments use the pre-step ensemble; the ensemble uses the
    pre-step frame (frozen coefficients within a step).  ``noise`` holds
    one standard-normal row per sample, one column per real channel.
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    u = state.frame
    y = state.ensemble
    m = y.shape[0]
    if noise.shape != (m, model.num_channels):
        raise DimensionError(
            f"noise shape {noise.shape} != ({m}, {model.num_channels})"
        )
    if model.dim != u.shape[0]:
        raise DimensionError(f"model dim {model.dim} != frame dim {u.shape[0]}")
    n, r = u.shape
    u_t = u.T.copy()
    u_c = u.conj()
    gram_weight = 2.0 if model.complex_pairs else 1.0
    y_new = np.empty_like(y)

    def work(lo: int, hi: int):
        # non-finite intermediates are tolerated here and reported after
        # the reduction with the offending sample index
        with np.errstate(invalid="ignore", over="ignore"):
            yb = y[lo:hi]
            xb = yb @ u_t
            a = model.drift(xb, state.t)
            bs = model.channels(xb, state.t)
            inc = em_increment(a, bs, dt, noise[lo:hi], model.complex_pairs)
            y_new[lo:hi] = yb + inc @ u_c
            s_ay = a.T @ yb.conj()
            s_bb = np.zeros((n, n), dtype=complex)
            for b in bs:
                s_bb += gram_weight * (b.T @ b.conj())
            return s_ay, s_bb, yb.T @ yb.conj()

    parts = map_blocks(work, m)
    s_ay, s_bb, s_yy = parts[0]
    for pay, pbb, pyy in parts[1:]:
        s_ay = s_ay + pay
        s_bb = s_bb + pbb
        s_yy = s_yy + pyy
    check_finite(y_new, "ensemble state")
    m_a = s_ay / m
    m_b = hermitize(s_bb / m)
    s_red = hermitize(s_yy / m)
    if float(np.trace(s_red).real) == 0.0:
        raise SingularityError(f"reduced second moment vanished at t={state.t:.6g}")
    a1 = m_a + m_b @ u
    qa1 = a1 - u @ (u.conj().T @ a1)
    du = qa1 @ pinv_psd(s_red, pinv_rtol)
    u_next = retract_to_stiefel(u + dt * du)
    return LowRankState(state.t + dt, u_next, y_new)


def ensemble_moments(state: LowRankState) -> MomentSummary:
    """Empirical moments, accumulated in a fixed deterministic order."""
    u = state.frame
    y = state.ensemble
    m = y.shape[0]

    def work(lo: int, hi: int):
        yb = y[lo:hi]
        return yb.sum(axis=0), yb.T @ yb.conj()

    parts = map_blocks(work, m)
    s_y, s_yy = parts[0]
    for py, pyy in parts[1:]:
        s_y = s_y + py
        s_yy = s_yy + pyy
    reduced = hermitize(s_yy / m)
    second = hermitize(u @ reduced @ u.conj().T)
    return MomentSummary(u @ (s_y / m), second, reduced)


def diffusion_gram(state: LowRankState, model: SdeModel) -> np.ndarray:
    """Ensemble average of ``sum_j b_j b_j^H`` at the current state."""
    y = state.ensemble
    u_t = state.frame.T.copy()
    gram = ensemble_gram(model, state.t, lambda lo, hi: y[lo:hi] @ u_t, y.shape[0])
    return hermitize(gram)


def residual_epsilon_sq(state: LowRankState, model: SdeModel) -> float:
    """Tangent-projection defect ``||Q_U E[sum_j b_j b_j^H] Q_U||_HS``.

    This is the irreducible per-time error of the optimal low-rank
    dynamics; it vanishes at full rank and for subspace-confined models.
    """
    u = state.frame
    m_b = diffusion_gram(state, model)
    proj = u @ u.conj().T
    q = np.eye(u.shape[0], dtype=complex) - proj
    return hs_norm(hermitize(q @ m_b @ q))


def growth_rate_bound(model: SdeModel) -> Callable[[float], float]:
    """A-priori error growth rate ``gamma`` as a function of time.

    Unraveling models use the generator norm over Hermitian matrices;
    plain linear models use ``2 ||Lam||_2 + sum_j ||Theta_j||_2^2``.
    """
    if model.generator is not None:
        rate = superop_hs_norm(model.generator)
    elif model.linear and model.drift_matrix is not None:
        rate = 2.0 * float(np.linalg.norm(model.drift_matrix, 2))
        for theta in model.channel_matrices or ():
            rate += float(np.linalg.norm(theta, 2)) ** 2
    else:
        raise DomainError("growth rate requires a linear model or an unraveling")
    return lambda t: rate


def gronwall_bound(
    e0: float,
    eps_sq: float,
    gamma: Callable[[float], float],
    times: float | np.ndarray,
) -> float | np.ndarray:
    """Evaluate ``(E(0) + eps^2 t) exp(integral of gamma)`` on a time grid.

    The integral uses the trapezoid rule on the supplied grid; a scalar
    ``times`` is treated as the grid ``[0, times]``.  Returns a scalar for
    scalar input.
    """
    if e0 < 0 or eps_sq < 0:
        raise DomainError("error and defect must be nonnegative")
    scalar = np.isscalar(times) or np.ndim(times) == 0
    grid = np.array([0.0, float(times)]) if scalar else np.asarray(times, dtype=float)
    if grid.size < 1 or np.any(np.diff(grid) < 0):
        raise DomainError("time grid must be nondecreasing")
    gvals = np.array([gamma(s) for s in grid])
    segments = 0.5 * (gvals[1:] + gvals[:-1]) * np.diff(grid)
    integral = np.concatenate([[0.0], np.cumsum(segments)])
    bounds = (e0 + eps_sq * (grid - grid[0])) * np.exp(integral)
    return float(bounds[-1]) if scalar else bounds
