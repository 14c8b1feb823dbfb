"""Lindblad generators, a dense RK4 reference solver, and the deterministic
low-rank master equation for frames plus reduced densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, SingularityError
from .linalg import (
    DEFAULT_PINV_RTOL,
    anticommutator,
    commutator,
    frame_defect,
    hermitize,
    hs_norm,
    pinv_psd,
    random_hermitian,
    retract_to_stiefel,
)
from .util import time_steps


@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian plus jump operators defining the dissipative generator."""

    hamiltonian: np.ndarray
    lindblad_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise DimensionError(f"hamiltonian must be square, got {h.shape}")
        if hs_norm(h - h.conj().T) > 1e-12 * max(1.0, hs_norm(h)):
            raise DomainError("hamiltonian is not Hermitian")
        ops = tuple(np.asarray(op, dtype=complex) for op in self.lindblad_ops)
        for op in ops:
            if op.shape != h.shape:
                raise DimensionError(f"jump operator shape {op.shape} != {h.shape}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "lindblad_ops", ops)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def apply_generator(gen: LindbladGenerator, rho: np.ndarray) -> np.ndarray:
    """``-i[H, rho] + sum_k (L_k rho L_k^H - {L_k^H L_k, rho}/2)``."""
    rho = np.asarray(rho)
    if rho.shape != gen.hamiltonian.shape:
        raise DimensionError(f"rho shape {rho.shape} != generator dim {gen.dim}")
    out = -1j * commutator(gen.hamiltonian, rho)
    for op in gen.lindblad_ops:
        out = out + op @ rho @ op.conj().T - 0.5 * anticommutator(op.conj().T @ op, rho)
    return out


def adjoint_generator(gen: LindbladGenerator, f: np.ndarray) -> np.ndarray:
    """Heisenberg-picture adjoint: ``i[H, F] + sum_k (L_k^H F L_k - {L_k^H L_k, F}/2)``."""
    out = 1j * commutator(gen.hamiltonian, f)
    for op in gen.lindblad_ops:
        out = out + op.conj().T @ f @ op - 0.5 * anticommutator(op.conj().T @ op, f)
    return out


def make_damped_oscillator(
    n: int, omega: float, gamma1: float, gamma2: float
) -> LindbladGenerator:
    """Truncated harmonic oscillator with lowering/raising dissipation.

    ``H = omega d^H d`` on ``n`` levels; jump operators ``sqrt(gamma1) d``
    and ``sqrt(gamma2) d^H``, omitting channels with zero rate.
    """
    if n < 2:
        raise DomainError(f"need at least 2 levels, got {n}")
    if gamma1 < 0 or gamma2 < 0:
        raise DomainError("damping rates must be nonnegative")
    d = np.zeros((n, n), dtype=complex)
    ks = np.arange(1, n)
    d[ks - 1, ks] = np.sqrt(ks)
    h = omega * (d.conj().T @ d)
    ops = []
    if gamma1 > 0:
        ops.append(np.sqrt(gamma1) * d)
    if gamma2 > 0:
        ops.append(np.sqrt(gamma2) * d.conj().T)
    return LindbladGenerator(h, tuple(ops))


def integrate_lindblad(
    gen: LindbladGenerator, rho0: np.ndarray, t_final: float, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 for the dissipative master equation.

    Returns ``(times, rhos)`` with one snapshot per step; the state is
    re-Hermitized after every step.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if hs_norm(rho0 - rho0.conj().T) > 1e-10 * max(1.0, hs_norm(rho0)):
        raise DomainError("initial state is not Hermitian")
    if abs(np.trace(rho0).real - 1.0) > 1e-10:
        raise DomainError(f"initial trace {np.trace(rho0).real} != 1")
    rho = hermitize(rho0)
    times = [0.0]
    rhos = [rho]
    t = 0.0
    for h in time_steps(t_final, dt):
        k1 = apply_generator(gen, rho)
        k2 = apply_generator(gen, rho + 0.5 * h * k1)
        k3 = apply_generator(gen, rho + 0.5 * h * k2)
        k4 = apply_generator(gen, rho + h * k3)
        rho = hermitize(rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
        t += h
        times.append(t)
        rhos.append(rho)
    return np.array(times), np.array(rhos)


@dataclass(frozen=True)
class LowRankQmeState:
    """Frame plus strictly positive reduced density for the low-rank QME."""

    frame: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.frame, dtype=complex)
        s = np.asarray(self.sigma, dtype=complex)
        if u.ndim != 2 or s.shape != (u.shape[1], u.shape[1]):
            raise DimensionError(f"frame {u.shape} incompatible with sigma {s.shape}")
        if frame_defect(u) > 1e-10:
            raise DomainError("frame columns are not orthonormal")
        w = np.linalg.eigvalsh(hermitize(s))
        if w[0] <= 0:
            raise DomainError(f"reduced density not strictly positive: min eig {w[0]:.3e}")
        object.__setattr__(self, "frame", u)
        object.__setattr__(self, "sigma", hermitize(s))

    def density(self) -> np.ndarray:
        """Assembled ``n x n`` density ``U sigma U^H``."""
        return hermitize(self.frame @ self.sigma @ self.frame.conj().T)


def integrate_lowrank_qme(
    gen: LindbladGenerator,
    state0: LowRankQmeState,
    t_final: float,
    dt: float,
    pinv_rtol: float = DEFAULT_PINV_RTOL,
) -> tuple[np.ndarray, list[LowRankQmeState]]:
    """Forward Euler with polar retraction for the low-rank master equation.

    Evolves ``d sigma/dt = U^H L(U sigma U^H) U`` and
    ``dU/dt = Q_U L(U sigma U^H) U sigma^{-1}``.  Raises
    :class:`SingularityError` (with the time stamp) once ``sigma`` is
    singular at the pseudo-inverse threshold; the trace is reported, never
    renormalized.
    """
    u = state0.frame
    sigma = state0.sigma
    times = [0.0]
    states = [state0]
    t = 0.0
    for h in time_steps(t_final, dt):
        w = np.linalg.eigvalsh(sigma)
        if w[0] <= pinv_rtol * max(w[-1], 0.0):
            raise SingularityError(
                f"reduced density singular at t={t:.6g}: eigs in [{w[0]:.3e}, {w[-1]:.3e}]"
            )
        rho = u @ sigma @ u.conj().T
        lrho = apply_generator(gen, rho)
        lrho_u = lrho @ u
        dsigma = u.conj().T @ lrho_u
        du = (lrho_u - u @ (u.conj().T @ lrho_u)) @ pinv_psd(sigma, pinv_rtol)
        sigma = hermitize(sigma + h * dsigma)
        u = retract_to_stiefel(u + h * du)
        t += h
        times.append(t)
        states.append(LowRankQmeState(u, sigma))
    return np.array(times), states


def superop_hs_norm(
    gen: LindbladGenerator, tol: float = 1e-10, max_iter: int = 2000
) -> float:
    """Operator norm of the generator over Hermitian matrices in HS norm.

    Power iteration on the self-adjoint composition (adjoint after forward
    action); deterministic thanks to a fixed starting matrix.
    """
    n = gen.dim
    rng = np.random.Generator(np.random.Philox(key=np.array([0x5D1B, 0], dtype=np.uint64)))
    f = random_hermitian(n, rng)
    f = f / hs_norm(f)
    prev = 0.0
    for _ in range(max_iter):
        g = adjoint_generator(gen, apply_generator(gen, f))
        lam = float(np.vdot(f, g).real)
        nrm = hs_norm(g)
        if nrm == 0.0:
            return 0.0
        f = hermitize(g / nrm)
        cur = np.sqrt(max(lam, 0.0))
        if abs(cur - prev) <= tol * max(1.0, cur):
            return cur
        prev = cur
    return prev


def superop_matrix(gen: LindbladGenerator) -> np.ndarray:
    """Dense ``n^2 x n^2`` matrix of the generator acting on vectorized states."""
    n = gen.dim
    mat = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            mat[:, i * n + j] = apply_generator(gen, e).reshape(-1)
    return mat
