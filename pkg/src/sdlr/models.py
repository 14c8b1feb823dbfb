"""SDE models: drift plus diffusion channels on a complex state space.

Model callables are batched: states are ``(samples, n)`` arrays, drifts
come back with the same shape, channels as ``(K, samples, n)``.  With
``complex_pairs`` a model stores only one channel per pair ``(b, i b)``
(``K = num_channels / 2``); the public :func:`eval_model` always expands
to the full real-channel list.

Inner products are conjugate-linear in the first slot throughout:
``<u, v> = u^H v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainError, NumericError
from .lindblad import LindbladGenerator, apply_generator
from .linalg import hs_norm, random_stiefel

DriftFn = Callable[[np.ndarray, float], np.ndarray]
ChannelFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class SdeModel:
    """Drift ``a(x, t)`` and diffusion channels ``b_j(x, t)`` on ``C^n``."""

    dim: int
    num_channels: int
    drift: DriftFn
    channels: ChannelFn
    linear: bool = False
    complex_pairs: bool = False
    generator: LindbladGenerator | None = None
    drift_matrix: np.ndarray | None = None
    channel_matrices: tuple[np.ndarray, ...] | None = None

    @property
    def stored_channels(self) -> int:
        """Number of channel arrays the batched callable returns."""
        return self.num_channels // 2 if self.complex_pairs else self.num_channels


def eval_model(
    model: SdeModel, x: np.ndarray, t: float = 0.0
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Drift and all real diffusion channels at a single state ``x``."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (model.dim,):
        raise DimensionError(f"state shape {x.shape} != ({model.dim},)")
    batch = x[None, :]
    with np.errstate(invalid="ignore", over="ignore"):
        a = model.drift(batch, t)[0]
        raw = model.channels(batch, t)
    bs: list[np.ndarray] = []
    for b in raw:
        if model.complex_pairs:
            bs.append(b[0].copy())
            bs.append(1j * b[0])
        else:
            bs.append(b[0].copy())
    if not np.all(np.isfinite(a)) or any(not np.all(np.isfinite(b)) for b in bs):
        raise NumericError("model produced non-finite output")
    return a, bs


def make_gbm(lam: np.ndarray, theta: np.ndarray) -> SdeModel:
    """Linear model ``dX = Lam X dt + Theta X dW`` with one channel."""
    lam = np.asarray(lam, dtype=complex)
    theta = np.asarray(theta, dtype=complex)
    if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
        raise DimensionError(f"drift matrix must be square, got {lam.shape}")
    if theta.shape != lam.shape:
        raise DimensionError(f"shape mismatch {lam.shape} vs {theta.shape}")
    lam_t = lam.T.copy()
    theta_t = theta.T.copy()

    def drift(x, t):
        return x @ lam_t

    def channels(x, t):
        return (x @ theta_t)[None, :, :]

    return SdeModel(
        dim=lam.shape[0],
        num_channels=1,
        drift=drift,
        channels=channels,
        linear=True,
        drift_matrix=lam,
        channel_matrices=(theta,),
    )


def make_burgers(n: int, nu: float, gamma: float) -> SdeModel:
    """Spectral truncation of the periodic stochastic Burgers equation.

    Modes ``k = -(n-1)/2 .. (n-1)/2`` stored at slot ``k + (n-1)/2``.  The
    quadratic transport term is a direct truncated convolution; the single
    additive channel forces modes ``+-1`` with amplitude ``gamma / 2``.
    """
    if n % 2 == 0:
        raise DomainError(f"mode count must be odd, got {n}")
    if nu <= 0:
        raise DomainError(f"viscosity must be positive, got {nu}")
    half = (n - 1) // 2
    modes = np.arange(-half, half + 1)
    visc = -((2 * np.pi * modes) ** 2) * nu
    # per output mode: index pairs and derivative factors of the convolution
    conv_idx: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    for k in modes:
        kp = np.arange(max(-half, k - half), min(half, k + half) + 1)
        conv_idx.append(((k - kp) + half, kp + half, 2j * np.pi * kp))

    def drift(x, t):
        out = x * visc
        for slot, (ia, ib, coef) in enumerate(conv_idx):
            out[:, slot] -= np.sum(x[:, ia] * x[:, ib] * coef, axis=1)
        return out

    g = np.zeros(n, dtype=complex)
    g[half + 1] = gamma / 2.0
    g[half - 1] = gamma / 2.0

    def channels(x, t):
        return np.broadcast_to(g, (1,) + x.shape)

    return SdeModel(dim=n, num_channels=1, drift=drift, channels=channels, linear=False)


def make_lqsd(gen: LindbladGenerator) -> SdeModel:
    """Linear diffusion unraveling of a Lindblad generator.

    Drift ``(-iH - sum_k L_k^H L_k / 2) x``; each jump operator contributes
    the channel pair ``L_k x / sqrt(2)`` and ``i L_k x / sqrt(2)``.
    """
    n = gen.dim
    a0 = -1j * gen.hamiltonian
    for op in gen.lindblad_ops:
        a0 = a0 - 0.5 * (op.conj().T @ op)
    a0_t = a0.T.copy()
    scaled_t = tuple((op / np.sqrt(2.0)).T.copy() for op in gen.lindblad_ops)

    def drift(x, t):
        return x @ a0_t

    def channels(x, t):
        if not scaled_t:
            return np.zeros((0,) + x.shape, dtype=complex)
        return np.stack([x @ s for s in scaled_t])

    mats: list[np.ndarray] = []
    for op in gen.lindblad_ops:
        mats.append(op / np.sqrt(2.0))
        mats.append(1j * op / np.sqrt(2.0))
    return SdeModel(
        dim=n,
        num_channels=2 * len(gen.lindblad_ops),
        drift=drift,
        channels=channels,
        linear=True,
        complex_pairs=True,
        generator=gen,
        drift_matrix=a0,
        channel_matrices=tuple(mats),
    )


def make_qsd(gen: LindbladGenerator) -> SdeModel:
    """Norm-stabilized diffusion unraveling of a Lindblad generator.

    Drift ``(-iH + sum_k [<x, L_k^H x> L_k - L_k^H L_k / 2
    - |<x, L_k^H x>|^2 / 2]) x`` with channel pairs
    ``(L_k - <x, L_k x>) x / sqrt(2)`` and its ``i`` partner.  The drift
    and channel shifts use the adjoint and plain expectations respectively;
    together they satisfy the unraveling identity for every ``x``.
    """
    n = gen.dim
    mih_t = (-1j * gen.hamiltonian).T.copy()
    ops_t = tuple(op.T.copy() for op in gen.lindblad_ops)
    ldl_t = tuple((op.conj().T @ op).T.copy() for op in gen.lindblad_ops)

    def drift(x, t):
        out = x @ mih_t
        for op_t, q_t in zip(ops_t, ldl_t):
            xl = x @ op_t
            ell = np.einsum("si,si->s", x.conj(), xl)
            mk = ell.conj()
            out = out + mk[:, None] * xl - 0.5 * (x @ q_t)
            out = out - 0.5 * (mk.real**2 + mk.imag**2)[:, None] * x
        return out

    def channels(x, t):
        if not ops_t:
            return np.zeros((0,) + x.shape, dtype=complex)
        outs = []
        for op_t in ops_t:
            xl = x @ op_t
            ell = np.einsum("si,si->s", x.conj(), xl)
            outs.append((xl - ell[:, None] * x) / np.sqrt(2.0))
        return np.stack(outs)

    return SdeModel(
        dim=n,
        num_channels=2 * len(gen.lindblad_ops),
        drift=drift,
        channels=channels,
        linear=False,
        complex_pairs=True,
        generator=gen,
    )


def verify_unraveling(
    model: SdeModel, gen: LindbladGenerator, x: np.ndarray, t: float = 0.0
) -> float:
    """HS-norm residual of ``a x^H + x a^H + sum_j b_j b_j^H - L(x x^H)``."""
    if model.dim != gen.dim:
        raise DimensionError(f"model dim {model.dim} != generator dim {gen.dim}")
    x = np.asarray(x, dtype=complex)
    a, bs = eval_model(model, x, t)
    resid = np.outer(a, x.conj()) + np.outer(x, a.conj())
    for b in bs:
        resid += np.outer(b, b.conj())
    resid -= apply_generator(gen, np.outer(x, x.conj()))
    return hs_norm(resid)


@dataclass(frozen=True)
class DiscreteInitialMeasure:
    """Finitely many atoms with probability weights."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=complex)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 2 or weights.shape != (atoms.shape[0],):
            raise DimensionError(
                f"atoms {atoms.shape} incompatible with weights {weights.shape}"
            )
        if np.any(weights < 0):
            raise DomainError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {weights.sum()}, expected 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]


def sample_initial(
    measure: DiscreteInitialMeasure, count: int, rng: np.random.Generator
) -> np.ndarray:
    """``count`` iid atom draws, shape ``(count, n)``."""
    idx = rng.choice(measure.atoms.shape[0], size=count, p=measure.weights)
    return measure.atoms[idx].copy()


def measure_moments(measure: DiscreteInitialMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean and second moment of a discrete measure."""
    mean = measure.weights @ measure.atoms
    second = (measure.atoms.T * measure.weights) @ measure.atoms.conj()
    return mean, second


def poisson_weights(count: int, rate: float = 0.5) -> np.ndarray:
    """Weights proportional to the Poisson pmf at ``0 .. count-1``."""
    w = np.array([rate**k * math.exp(-rate) / math.factorial(k) for k in range(count)])
    return w / w.sum()


def gbm_initial_measure(
    n: int, rng: np.random.Generator, n_atoms: int = 5
) -> DiscreteInitialMeasure:
    """Random orthonormal atoms with Poisson-profile weights."""
    frame = random_stiefel(n, n_atoms, rng)
    return DiscreteInitialMeasure(frame.T, poisson_weights(n_atoms))


def burgers_initial_measure(n: int) -> DiscreteInitialMeasure:
    """Five-atom initial field: constant, plus sine/cosine pairs at wavenumbers 1, 2.

    Atoms are stated in Fourier coordinates: the constant field is the zero
    mode; ``sqrt(2) sin`` maps to ``-i/sqrt(2)`` and ``+i/sqrt(2)`` at the
    positive/negative mode, ``sqrt(2) cos`` to ``1/sqrt(2)`` at both.
    """
    if n % 2 == 0:
        raise DomainError(f"mode count must be odd, got {n}")
    half = (n - 1) // 2
    if half < 2:
        raise DomainError("need at least modes up to |k| = 2")
    atoms = np.zeros((5, n), dtype=complex)
    atoms[0, half] = 1.0
    for j, wavenum in ((1, 1), (3, 2)):  # sine atoms
        atoms[j, half + wavenum] = -1j / np.sqrt(2.0)
        atoms[j, half - wavenum] = 1j / np.sqrt(2.0)
    for j, wavenum in ((2, 1), (4, 2)):  # cosine atoms
        atoms[j, half + wavenum] = 1.0 / np.sqrt(2.0)
        atoms[j, half - wavenum] = 1.0 / np.sqrt(2.0)
    return DiscreteInitialMeasure(atoms, poisson_weights(5))


def oscillator_initial_measure(n: int, n_atoms: int = 5) -> DiscreteInitialMeasure:
    """Basis states ``|0> .. |n_atoms-1>`` with Poisson-profile weights."""
    if n_atoms > n:
        raise DimensionError(f"{n_atoms} atoms exceed dimension {n}")
    atoms = np.eye(n, dtype=complex)[:n_atoms]
    return DiscreteInitialMeasure(atoms, poisson_weights(n_atoms))


def burgers_field(modes: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate Fourier modes on grid points of the unit interval."""
    modes = np.asarray(modes)
    n = modes.shape[-1]
    half = (n - 1) // 2
    ks = np.arange(-half, half + 1)
    basis = np.exp(2j * np.pi * np.outer(ks, np.asarray(z)))
    return modes @ basis
