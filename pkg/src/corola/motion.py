"""Moving-camera support: affine registration, model warping and out-of-view fill.

Transforms are 2x3 affine matrices acting on ``(x, y, 1)`` with ``x`` the
column and ``y`` the row; they map previous-frame coordinates to current-frame
coordinates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.ndimage

from .errors import DimensionError, EstimationFailed, FillError

log = logging.getLogger(__name__)

IDENTITY = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
MIN_DET = 1e-6
EDGE_TOL = 1e-9


@dataclass(frozen=True)
class AffineTransform:
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.float64)
        if mat.shape != (2, 3):
            raise DimensionError("affine transform must be 2x3")
        if not np.all(np.isfinite(mat)):
            raise ValueError("affine transform has non-finite entries")
        if abs(np.linalg.det(mat[:, :2])) <= MIN_DET:
            raise ValueError("affine transform is singular")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(IDENTITY)

    @classmethod
    def translation(cls, tx: float, ty: float = 0.0) -> "AffineTransform":
        return cls([[1.0, 0.0, tx], [0.0, 1.0, ty]])

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, IDENTITY))

    def homogeneous(self) -> np.ndarray:
        return np.vstack([self.matrix, [0.0, 0.0, 1.0]])

    def inverse(self) -> "AffineTransform":
        return AffineTransform(np.linalg.inv(self.homogeneous())[:2])

    def then(self, other: "AffineTransform") -> "AffineTransform":
        """Apply ``self`` first, then ``other``."""
        return AffineTransform((other.homogeneous() @ self.homogeneous())[:2])

    def apply(self, x, y):
        a = self.matrix
        return a[0, 0] * x + a[0, 1] * y + a[0, 2], a[1, 0] * x + a[1, 1] * y + a[1, 2]


def as_transform(t) -> AffineTransform:
    return t if isinstance(t, AffineTransform) else AffineTransform(t)


@dataclass
class WarpReport:
    missing: np.ndarray  # bool, length m
    fraction: float
    column_counts: np.ndarray  # missing pixels per image column


def source_coordinates(tau: AffineTransform, height: int, width: int):
    """Previous-frame ``(rows, cols)`` sampled by each current-frame pixel."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    sx, sy = tau.inverse().apply(xx, yy)
    return sy.ravel(), sx.ravel()


def _outside(rows, cols, height, width) -> np.ndarray:
    return ((rows < -EDGE_TOL) | (rows > height - 1 + EDGE_TOL)
            | (cols < -EDGE_TOL) | (cols > width - 1 + EDGE_TOL))


def warp_columns(M, rows, cols, height, width) -> np.ndarray:
    """Bilinear resampling of each column of ``M`` (an image per column)."""
    M = np.asarray(M, dtype=np.float64)
    flat = M.ndim == 1
    M2 = M[:, None] if flat else M
    coords = np.vstack([np.clip(rows, 0, height - 1), np.clip(cols, 0, width - 1)])
    out = np.empty_like(M2)
    for k in range(M2.shape[1]):
        out[:, k] = scipy.ndimage.map_coordinates(
            M2[:, k].reshape(height, width), coords, order=1, mode="nearest")
    return out[:, 0] if flat else out


def nearest_index(rows, cols, height, width) -> np.ndarray:
    r = np.clip(np.rint(rows), 0, height - 1).astype(np.intp)
    c = np.clip(np.rint(cols), 0, width - 1).astype(np.intp)
    return r * width + c


def warp_model(state, tau):
    """Carry a :class:`~corola.pipeline.ModelState` into the current frame's coordinates.

    ``U`` and ``B`` are resampled bilinearly, the per-pixel mixtures by nearest
    neighbour.  ``A`` and ``v`` do not depend on pixel positions and are kept.
    """
    tau = as_transform(tau)
    h, w = state.height, state.width
    if tau.is_identity:
        missing = np.zeros(state.m, dtype=bool)
        return state, WarpReport(missing, 0.0, np.zeros(w, dtype=int))

    rows, cols = source_coordinates(tau, h, w)
    missing = _outside(rows, cols, h, w)
    U = warp_columns(state.U, rows, cols, h, w)
    acc = state.acc.copy()
    acc.B = warp_columns(state.acc.B, rows, cols, h, w)

    idx = nearest_index(rows, cols, h, w)
    g = state.gmm
    gmm = replace(g, weight=g.weight[idx].copy(), mean=g.mean[idx].copy(), var=g.var[idx].copy())

    counts = missing.reshape(h, w).sum(axis=0)
    report = WarpReport(missing, float(missing.mean()), counts)
    return replace(state, U=U, acc=acc, gmm=gmm, snapshot=None), report


def _align_fill(current, candidate, missing):
    """Replace ``current[missing]`` by ``candidate`` mapped onto the surviving range.

    Per column, the affine map sending the candidate's min/max over the
    surviving rows onto the surviving entries' min/max is applied to the
    missing rows, and the result clamped to that range.
    """
    out = current.copy()
    keep = ~missing
    if not keep.any():
        raise FillError("no surviving pixels to calibrate the fill against")
    for k in range(current.shape[1]):
        s = current[keep, k]
        c = candidate[keep, k]
        lo, hi = s.min(), s.max()
        clo, chi = c.min(), c.max()
        if chi - clo > 0:
            vals = lo + (candidate[missing, k] - clo) * (hi - lo) / (chi - clo)
        else:
            vals = candidate[missing, k] - clo + lo
        out[missing, k] = np.clip(vals, lo, hi)
    return out


def fill_missing(state, x, missing):
    """Estimate model rows for pixels that entered the view this frame."""
    missing = np.asarray(missing, dtype=bool).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if missing.shape != (state.m,) or x.shape != (state.m,):
        raise DimensionError("mask or frame size does not match the model")
    if not missing.any():
        return state
    v = state.v
    nv = float(v @ v)
    if np.sqrt(nv) < 1e-9:
        raise FillError("coefficient vector is (numerically) zero")

    # X v^T (v v^T)^+ reduces to X v^T / |v|^2 for a single coefficient vector
    U = _align_fill(state.U, np.outer(x, v) / nv, missing)
    acc = state.acc.copy()
    acc.B = _align_fill(acc.B, U @ np.outer(v, v), missing)
    gmm = state.gmm.reset_pixels(missing)
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(acc.B))):
        raise FillError("fill produced non-finite values")
    return replace(state, U=U, acc=acc, gmm=gmm)


def warp_image(img, tau, height: int, width: int):
    """Bilinear warp of a flat image; returns ``(warped, missing)``."""
    tau = as_transform(tau)
    if tau.is_identity:
        return np.asarray(img, dtype=np.float64).ravel().copy(), np.zeros(height * width, bool)
    rows, cols = source_coordinates(tau, height, width)
    return warp_columns(np.asarray(img, dtype=np.float64).ravel(), rows, cols, height, width), \
        _outside(rows, cols, height, width)


def align_to_last(frames, transforms, height: int, width: int) -> np.ndarray:
    """Warp a list of frames into the last frame's coordinates.

    ``transforms[j]`` maps frame ``j-1`` to frame ``j``; ``transforms[0]`` is
    ignored.  Pixels a frame cannot see are set to the mean of the frames
    that do see them.
    """
    frames = [np.asarray(f, dtype=np.float64).ravel() for f in frames]
    n = len(frames)
    if len(transforms) != n:
        raise DimensionError("need one transform per frame")
    out = np.empty((n, height * width))
    seen = np.zeros((n, height * width), dtype=bool)
    to_last = AffineTransform.identity()
    for j in range(n - 1, -1, -1):
        out[j], miss = warp_image(frames[j], to_last, height, width)
        seen[j] = ~miss
        if j > 0:
            to_last = as_transform(transforms[j]).then(to_last)
    counts = seen.sum(axis=0)
    fill = np.where(seen, out, 0.0).sum(axis=0) / np.maximum(counts, 1)
    return np.where(seen, out, fill)


# --- registration -----------------------------------------------------------

def _pyramid(img, levels):
    out = [img]
    for _ in range(levels - 1):
        sm = scipy.ndimage.gaussian_filter(out[-1], 1.0, mode="nearest")
        out.append(sm[::2, ::2])
    return out


def _warp_grid(img, mat):
    """Sample ``img`` at ``mat @ (x, y, 1)`` for every pixel; returns values and validity."""
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = mat[0, 0] * xx + mat[0, 1] * yy + mat[0, 2]
    sy = mat[1, 0] * xx + mat[1, 1] * yy + mat[1, 2]
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    vals = scipy.ndimage.map_coordinates(img, [sy, sx], order=1, mode="nearest")
    return vals, valid


def _params_to_h(p):
    return np.array([[1 + p[0], p[2], p[4]], [p[1], 1 + p[3], p[5]], [0, 0, 1.0]])


def _ssd(a, b, valid):
    d = (a - b)[valid]
    return float(d @ d) / max(int(valid.sum()), 1)


def estimate_affine(prev, cur, height: int | None = None, width: int | None = None,
                    levels: int = 3, max_iters: int = 50, eps: float = 1e-6) -> AffineTransform:
    """Affine map from ``prev`` to ``cur`` by inverse-compositional Gauss-Newton.

    Minimizes the mean squared difference between ``cur`` sampled at the
    mapped positions and ``prev``, coarse to fine over an image pyramid.
    """
    prev = np.asarray(prev, dtype=np.float64)
    cur = np.asarray(cur, dtype=np.float64)
    if prev.ndim == 1:
        if height is None or width is None:
            raise DimensionError("flat images need height and width")
        prev = prev.reshape(height, width)
        cur = cur.reshape(height, width)
    if prev.shape != cur.shape:
        raise DimensionError("images differ in shape")
    if prev.var() <= 0 or cur.var() <= 0:
        raise ValueError("images must have non-zero variance")

    levels = max(1, min(levels, int(np.floor(np.log2(min(prev.shape) / 8))) + 1))
    pt, pi = _pyramid(prev, levels), _pyramid(cur, levels)
    W = np.eye(3)
    for lvl in range(levels - 1, -1, -1):
        T, I = pt[lvl], pi[lvl]
        h, w = T.shape
        gy, gx = np.gradient(T)
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
        sd = np.stack([gx * xx, gy * xx, gx * yy, gy * yy, gx, gy], axis=-1).reshape(-1, 6)
        tflat = T.ravel()
        rises, last = 0, np.inf
        for _ in range(max_iters):
            vals, valid = _warp_grid(I, W)
            valid = valid.ravel()
            err = vals.ravel() - tflat
            cost = _ssd(vals.ravel(), tflat, valid)
            # Gauss-Newton jitters near the optimum; only count clear increases
            rises = rises + 1 if cost > last * (1 + 1e-6) + 1e-20 else 0
            if rises >= 5:
                raise EstimationFailed("alignment diverged")
            last = cost
            S = sd[valid]
            H = S.T @ S
            if not np.all(np.isfinite(H)) or np.linalg.cond(H) > 1e12:
                raise EstimationFailed("alignment Hessian is singular")
            dp = np.linalg.solve(H, S.T @ err[valid])
            W = W @ np.linalg.inv(_params_to_h(dp))
            if np.linalg.norm(dp) < eps:
                break
        if lvl:
            W[:2, 2] *= 2.0

    # W maps cur-pyramid sampling positions: prev(x) ~ cur(W x), so tau = W
    tau = W[:2].copy()
    vals0, valid0 = _warp_grid(cur, np.eye(3))
    vals1, valid1 = _warp_grid(cur, W)
    both = valid0 & valid1
    if _ssd(vals0.ravel(), prev.ravel(), both.ravel()) - _ssd(vals1.ravel(), prev.ravel(), both.ravel()) < eps:
        return AffineTransform.identity()
    return AffineTransform(tau)


# --- sidecar files ----------------------------------------------------------

def read_transforms(path) -> np.ndarray:
    """One affine per line, ``a11 a12 tx a21 a22 ty``; blank lines and ``#`` comments skipped."""
    mats = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 numbers, got {len(parts)}")
            mats.append(np.array([float(p) for p in parts]).reshape(2, 3))
    return np.array(mats).reshape(-1, 2, 3)


def write_transforms(path, transforms) -> None:
    with open(path, "w") as fh:
        for t in transforms:
            fh.write(" ".join(repr(float(v)) for v in np.asarray(t, dtype=np.float64).ravel()) + "\n")
