"""Error metrics, moment-ODE reference, spectrum series, pseudometric."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .linalg import hermitize, hs_norm, top_spectrum
from .lowrank import MomentSummary
from .util import time_steps

# relative errors with denominators below this are reported as +inf sentinels
DENOM_FLOOR = 1e-14


@dataclass(frozen=True)
class TrajectoryRecord:
    """One diagnostics row of an experiment run.

    ``rel_err_*`` and ``gronwall_bound`` are ``None`` when the experiment
    provides no matching reference quantity.
    """

    t: float
    rel_err_mean: float | None
    rel_err_second: float | None
    top_eigs: tuple[float, ...]
    residual_eps_sq: float
    trace: float
    gronwall_bound: float | None = None


def relative_errors(
    ref_mean: np.ndarray, ref_second: np.ndarray, approx: MomentSummary
) -> tuple[float, float]:
    """Relative mean error and relative HS second-moment error.

    A reference norm below ``DENOM_FLOOR`` yields an ``inf`` sentinel
    instead of raising, so runs near total decay remain loggable.
    """
    ref_mean = np.asarray(ref_mean)
    ref_second = np.asarray(ref_second)
    denom_mean = hs_norm(ref_mean)
    denom_second = hs_norm(ref_second)
    err_mean = (
        hs_norm(approx.mean - ref_mean) / denom_mean
        if denom_mean > DENOM_FLOOR
        else math.inf
    )
    err_second = (
        hs_norm(approx.second_moment - ref_second) / denom_second
        if denom_second > DENOM_FLOOR
        else math.inf
    )
    return err_mean, err_second


def moment_ode_oracle(
    lam: np.ndarray,
    theta: np.ndarray,
    mean0: np.ndarray,
    second0: np.ndarray,
    t_final: float,
    dt: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed moment equations of the linear model, integrated by RK4.

    ``dm/dt = Lam m`` and ``dM/dt = Lam M + M Lam^H + Theta M Theta^H``;
    the second moment is re-Hermitized each step.  Returns
    ``(times, means, seconds)`` with one row per step.
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    lam = np.asarray(lam, dtype=complex)
    theta = np.asarray(theta, dtype=complex)
    mean = np.asarray(mean0, dtype=complex)
    second = hermitize(np.asarray(second0, dtype=complex))

    def rhs(m_vec, m_mat):
        dm = lam @ m_vec
        dmat = lam @ m_mat + m_mat @ lam.conj().T + theta @ m_mat @ theta.conj().T
        return dm, dmat

    times = [0.0]
    means = [mean]
    seconds = [second]
    t = 0.0
    for h in time_steps(t_final, dt):
        k1 = rhs(mean, second)
        k2 = rhs(mean + 0.5 * h * k1[0], second + 0.5 * h * k1[1])
        k3 = rhs(mean + 0.5 * h * k2[0], second + 0.5 * h * k2[1])
        k4 = rhs(mean + h * k3[0], second + h * k3[1])
        mean = mean + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        second = hermitize(second + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))
        t += h
        times.append(t)
        means.append(mean)
        seconds.append(second)
    return np.array(times), np.array(means), np.array(seconds)


def _signed_second_moment(measure) -> np.ndarray:
    atoms, weights = measure
    atoms = np.asarray(atoms, dtype=complex)
    weights = np.asarray(weights, dtype=float)
    if atoms.ndim != 2 or weights.shape != (atoms.shape[0],):
        raise DimensionError(
            f"atoms {atoms.shape} incompatible with weights {weights.shape}"
        )
    return (atoms.T * weights) @ atoms.conj()


def pseudometric(nu1, nu2, choice: str = "second_moment_form") -> float:
    """Distance between finite-support signed measures over the quadratic
    test function.

    Measures are ``(atoms, weights)`` pairs with real (possibly negative)
    weights.  ``second_moment_form`` is the HS norm of the second-moment
    difference; ``observable_form`` evaluates the best Hermitian observable
    of unit HS norm in closed form and sums atom expectations.  The two
    agree up to round-off.
    """
    m1 = _signed_second_moment(nu1)
    m2 = _signed_second_moment(nu2)
    if m1.shape != m2.shape:
        raise DimensionError(f"measure dimensions differ: {m1.shape} vs {m2.shape}")
    diff = hermitize(m1 - m2)
    if choice == "second_moment_form":
        return hs_norm(diff)
    if choice == "observable_form":
        nrm = hs_norm(diff)
        if nrm == 0.0:
            return 0.0
        obs = diff / nrm
        total = 0.0
        for measure, sign in ((nu1, 1.0), (nu2, -1.0)):
            atoms = np.asarray(measure[0], dtype=complex)
            weights = np.asarray(measure[1], dtype=float)
            expectations = np.einsum("ki,ij,kj->k", atoms.conj(), obs, atoms)
            total += sign * float(weights @ expectations.real)
        return abs(total)
    raise DomainError(f"unknown pseudometric choice {choice!r}")


def spectrum_trajectory(seconds: np.ndarray, k: int) -> np.ndarray:
    """Top-``k`` eigenvalues (descending) of each second-moment snapshot."""
    seconds = np.asarray(seconds)
    return np.array([top_spectrum(snap, k) for snap in seconds])
