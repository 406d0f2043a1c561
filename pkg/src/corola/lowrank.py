"""Sequential low-rank background model.

The basis ``U`` (m x r) is refined one frame at a time from two running
sufficient statistics, ``A = sum v v^T`` and ``B = sum x v^T``.  Pixels take
part in a fit only while they are labelled background (``s_i == 0``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateColumnError,
    DegenerateInputError,
    DimensionError,
    InitializationError,
    NoSupportError,
    NumericalError,
)

DEFAULT_BETA1 = 0.01
DEFAULT_INIT_CAP = 25
JITTER = 1e-12


@dataclass
class Accumulators:
    A: np.ndarray
    B: np.ndarray
    frames_absorbed: int = 0

    @classmethod
    def zeros(cls, m: int, r: int) -> "Accumulators":
        return cls(np.zeros((r, r)), np.zeros((m, r)), 0)

    def copy(self) -> "Accumulators":
        return Accumulators(self.A.copy(), self.B.copy(), self.frames_absorbed)


@dataclass
class Frame:
    """A grayscale image flattened row-major into ``pixels``."""

    pixels: np.ndarray
    height: int
    width: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64).ravel()
        if self.pixels.size != self.height * self.width or self.pixels.size < 1:
            raise DimensionError("pixel count does not match height*width")
        if not np.all(np.isfinite(self.pixels)):
            raise NumericalError("frame has non-finite pixels")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ValueError("frame intensities must lie in [0, 1]")

    @property
    def m(self) -> int:
        return self.pixels.size

    def image(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width)


def _as_vector(x) -> np.ndarray:
    if isinstance(x, Frame):
        return x.pixels
    return np.asarray(x, dtype=np.float64).ravel()


def _fitting(s, m) -> np.ndarray:
    """Boolean selector of rows that take part in the fit (background pixels)."""
    if s is None:
        return np.ones(m, dtype=bool)
    s = np.asarray(s).ravel()
    if s.shape != (m,):
        raise DimensionError(f"mask has {s.size} entries, expected {m}")
    return s == 0


def spd_solve(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``G x = rhs`` for symmetric ``G``, via Cholesky with a tiny jitter retry."""
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), rhs)
    except np.linalg.LinAlgError:
        pass
    try:
        jittered = G + JITTER * max(1.0, np.trace(G)) * np.eye(len(G))
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(jittered), rhs)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(G) @ rhs


def randomized_svd(M: np.ndarray, r: int, n_power: int = 3, oversample: int = 8, seed: int = 0):
    """Top-``r`` singular triplets of ``M`` by randomized subspace iteration."""
    m, n = M.shape
    k = min(r + oversample, m, n)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(M @ rng.standard_normal((n, k)))
    for _ in range(n_power):
        Q, _ = np.linalg.qr(M.T @ Q)
        Q, _ = np.linalg.qr(M @ Q)
    Ub, sv, Vt = np.linalg.svd(Q.T @ M, full_matrices=False)
    return Q @ Ub[:, :r], sv[:r], Vt[:r]


def solve_coefficients(U, x, s=None, beta1: float = DEFAULT_BETA1) -> np.ndarray:
    """Ridge coefficients of ``x`` on the background rows of ``U``.

    Minimizes ``0.5 * ||x_bg - U_bg v||^2 + beta1 * ||v||^2``.  With
    ``beta1 == 0`` a singular Gram matrix falls back to the pseudoinverse.
    """
    U = np.asarray(U, dtype=np.float64)
    x = _as_vector(x)
    m, r = U.shape
    if x.shape != (m,):
        raise DimensionError(f"frame has {x.size} pixels, basis has {m} rows")
    fit = _fitting(s, m)
    if not fit.any():
        raise NoSupportError("no background pixels to fit coefficients on")
    if not (np.all(np.isfinite(x[fit])) and np.all(np.isfinite(U[fit]))):
        raise NumericalError("non-finite values in basis or frame")
    if fit.all():
        Uf, xf = U, x
    else:
        Uf, xf = U[fit], x[fit]
    G = Uf.T @ Uf
    rhs = Uf.T @ xf
    if beta1 > 0:
        v = spd_solve(G + 2.0 * beta1 * np.eye(r), rhs)
    elif np.linalg.matrix_rank(G) < r:
        v = np.linalg.pinv(G) @ rhs
    else:
        v = spd_solve(G, rhs)
    if not np.all(np.isfinite(v)):
        raise NumericalError("coefficient solve produced non-finite values")
    return v


def update_accumulators(acc: Accumulators, v, x, s=None, commit: bool = False) -> Accumulators:
    """Return ``acc`` plus one frame: ``A += v v^T``; ``B += x v^T`` on fitting rows."""
    v = np.asarray(v, dtype=np.float64).ravel()
    x = _as_vector(x)
    m, r = acc.B.shape
    if v.shape != (r,) or x.shape != (m,):
        raise DimensionError("accumulator, coefficient and frame sizes disagree")
    fit = _fitting(s, m)
    out = acc.copy()
    out.A += np.outer(v, v)
    if fit.all():
        out.B += np.outer(x, v)
    else:
        out.B[fit] += np.outer(x[fit], v)
    if commit:
        out.frames_absorbed += 1
    return out


def surrogate(U, acc: Accumulators, beta1: float, s=None) -> float:
    """``0.5 Tr[U (A + beta1 I) U^T] - Tr(U^T B)`` over the fitting rows."""
    fit = _fitting(s, U.shape[0])
    Uf, Bf = U[fit], acc.B[fit]
    H = acc.A + beta1 * np.eye(acc.A.shape[0])
    return float(0.5 * np.sum((Uf @ H) * Uf) - np.sum(Uf * Bf))


def update_basis(U, acc: Accumulators, s=None, beta1: float = DEFAULT_BETA1) -> np.ndarray:
    """One block-coordinate descent pass over the columns of ``U``.

    Column ``j`` moves to the exact minimizer of the surrogate with the other
    columns held fixed; rows labelled foreground are left untouched.
    """
    U = np.array(U, dtype=np.float64, copy=True)
    m, r = U.shape
    if acc.A.shape != (r, r) or acc.B.shape != (m, r):
        raise DimensionError("accumulators do not match basis shape")
    fit = _fitting(s, m)
    H = acc.A + beta1 * np.eye(r)
    all_rows = fit.all()
    for j in range(r):
        d = H[j, j]
        if not d > 0:
            raise DegenerateColumnError(f"column {j} has non-positive curvature {d}")
        if all_rows:
            U[:, j] += (acc.B[:, j] - U @ H[:, j]) / d
        else:
            U[fit, j] += (acc.B[fit, j] - U[fit] @ H[:, j]) / d
    if not np.all(np.isfinite(U)):
        raise NumericalError("basis update produced non-finite values")
    return U


def reconstruct_background(U, v, clamp: bool = True) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64).ravel()
    if U.shape[1] != v.size:
        raise DimensionError("basis and coefficient sizes differ")
    L = U @ v
    return np.clip(L, 0.0, 1.0) if clamp else L


def initialize_basis(frames, r: int, beta1: float = DEFAULT_BETA1,
                     max_frames: int = DEFAULT_INIT_CAP, seed: int = 0):
    """Batch start-up: top-``r`` left singular vectors of the first frames.

    Each frame is then projected (all pixels fitting) and folded into fresh
    accumulators.  Returns ``(U, acc, v_last)``.
    """
    if r < 1:
        raise InitializationError("rank bound must be at least 1")
    if beta1 < 0:
        raise ValueError("beta1 must be non-negative")
    vecs = [_as_vector(f) for f in frames]
    if len(vecs) < r:
        raise InitializationError(f"need at least {r} frames, got {len(vecs)}")
    if len(vecs) > max_frames:
        raise InitializationError(f"at most {max_frames} initialization frames allowed")
    m = vecs[0].size
    if any(v.size != m for v in vecs):
        raise DimensionError("initialization frames differ in size")
    if r > m:
        raise InitializationError("rank bound exceeds pixel count")
    D = np.stack(vecs, axis=1)
    if not np.any(D):
        raise DegenerateInputError("initialization frames are all zero")
    U, _, _ = randomized_svd(D, r, seed=seed)
    acc = Accumulators.zeros(m, r)
    v = np.zeros(r)
    for x in vecs:
        v = solve_coefficients(U, x, None, beta1)
        acc = update_accumulators(acc, v, x, None, commit=True)
    return U, acc, v
