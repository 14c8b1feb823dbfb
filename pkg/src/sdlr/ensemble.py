"""Shared ensemble machinery: blocked evaluation, threading, noise streams.

Ensembles are processed in fixed-size sample blocks.  Block results are
always combined in block order, so the outcome is bit-identical whether
blocks run serially or on a thread pool.  ``SDLR_THREADS`` therefore only
affects speed, never results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError

BLOCK_SIZE = 2048


def thread_count() -> int:
    """Worker count from ``SDLR_THREADS`` (default 1)."""
    raw = os.environ.get("SDLR_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def block_spans(n_samples: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + BLOCK_SIZE, n_samples)) for lo in range(0, n_samples, BLOCK_SIZE)]


def map_blocks(fn: Callable[[int, int], object], n_samples: int) -> list:
    """Apply ``fn(lo, hi)`` to every sample block, results in block order."""
    spans = block_spans(n_samples)
    workers = thread_count()
    if workers <= 1 or len(spans) <= 1:
        return [fn(lo, hi) for lo, hi in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda span: fn(*span), spans))


def stream_generator(seed: int, stream: int, step: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream, step)``."""
    key = np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64((stream << 40) + step)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def noise_for_step(
    seed: int, stream: int, step: int, n_samples: int, n_channels: int
) -> np.ndarray:
    """Standard-normal increments for one time step, shape ``(n_samples, n_channels)``.

    Row ``i`` belongs to sample ``i``; the draw is identical for any
    worker count.
    """
    return stream_generator(seed, stream, step).standard_normal((n_samples, n_channels))


def em_increment(
    a: np.ndarray, channels: Sequence[np.ndarray], dt: float, noise: np.ndarray,
    complex_pairs: bool,
) -> np.ndarray:
    """Euler-Maruyama increment ``a dt + sum_j b_j sqrt(dt) xi_j`` for one block.

    With ``complex_pairs`` the channel list holds one entry per pair
    ``(b, i b)`` and consecutive noise columns combine into a complex draw.
    """
    sq = np.sqrt(dt)
    inc = a * dt
    if complex_pairs:
        for k, b in enumerate(channels):
            xi = noise[:, 2 * k] + 1j * noise[:, 2 * k + 1]
            inc = inc + b * (sq * xi)[:, None]
    else:
        for j, b in enumerate(channels):
            inc = inc + b * (sq * noise[:, j])[:, None]
    return inc


def ensemble_gram(
    model, t: float, x_block: Callable[[int, int], np.ndarray], n_samples: int
) -> np.ndarray:
    """Ensemble average of ``sum_j b_j b_j^H``, reduced in block order.

    ``x_block(lo, hi)`` supplies the full-space states of one sample block.
    """
    n = model.dim
    weight = 2.0 if model.complex_pairs else 1.0

    def work(lo: int, hi: int):
        bs = model.channels(x_block(lo, hi), t)
        s_bb = np.zeros((n, n), dtype=complex)
        for b in bs:
            s_bb += weight * (b.T @ b.conj())
        return s_bb

    parts = map_blocks(work, n_samples)
    s_bb = parts[0]
    for p in parts[1:]:
        s_bb = s_bb + p
    return s_bb / n_samples


def em_step(x: np.ndarray, model, t: float, dt: float, noise: np.ndarray) -> np.ndarray:
    """One Euler-Maruyama step for a full-space ensemble ``(samples, n)``."""
    out = np.empty_like(x)

    def work(lo: int, hi: int):
        with np.errstate(invalid="ignore", over="ignore"):
            xb = x[lo:hi]
            a = model.drift(xb, t)
            bs = model.channels(xb, t)
            out[lo:hi] = xb + em_increment(a, bs, dt, noise[lo:hi], model.complex_pairs)

    map_blocks(work, x.shape[0])
    check_finite(out, "ensemble state")
    return out


def check_finite(arr: np.ndarray, what: str) -> None:
    """Raise :class:`NumericError` naming the first offending sample row."""
    finite = np.isfinite(arr)
    if arr.ndim > 1:
        finite = finite.reshape(arr.shape[0], -1).all(axis=1)
    if not finite.all():
        raise NumericError(f"non-finite {what} at sample index {int(np.argmin(finite))}")
