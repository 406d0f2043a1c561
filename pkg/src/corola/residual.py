"""Residual handling: per-pixel adaptive mixture gating and the blended residual.

Each pixel keeps a small Gaussian mixture over its (normalized) residual.
Residuals explained by a background component are treated as noise; the rest
become outlier evidence ``F``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError

DEFAULT_ALPHA = 0.1


@dataclass
class GmmState:
    weight: np.ndarray  # (m, K)
    mean: np.ndarray
    var: np.ndarray
    rho: float = 0.01
    match_sigma: float = 2.5
    bg_threshold: float = 0.7
    init_var: float = 0.0225
    var_floor: float = 1e-4
    new_weight: float = 0.05
    # running 99th percentile of |E| used to normalize residuals
    scale: float | None = None
    scale_rate: float = 0.05
    scale_floor: float = 0.1

    @classmethod
    def fresh(cls, m: int, n_components: int = 3, **params) -> "GmmState":
        w = np.zeros((m, n_components))
        w[:, 0] = 1.0
        init_var = params.get("init_var", cls.init_var)
        return cls(w, np.zeros((m, n_components)), np.full((m, n_components), init_var), **params)

    @property
    def m(self) -> int:
        return self.weight.shape[0]

    def copy(self) -> "GmmState":
        return replace(self, weight=self.weight.copy(), mean=self.mean.copy(), var=self.var.copy())

    def reset_pixels(self, which) -> "GmmState":
        """Copy with the selected pixels back to a single zero-mean component."""
        out = self.copy()
        which = np.asarray(which, dtype=bool).ravel()
        out.weight[which] = 0.0
        out.weight[which, 0] = 1.0
        out.mean[which] = 0.0
        out.var[which] = self.init_var
        return out

    def normalizer(self, e) -> float:
        """Scale used to bring ``e`` into [-1, 1]; seeded from ``e`` on first use."""
        if self.scale is None:
            return residual_scale(e, self.scale_floor)
        return self.scale

    def with_scale_update(self, e) -> "GmmState":
        q = residual_scale(e, self.scale_floor)
        s = q if self.scale is None else (1 - self.scale_rate) * self.scale + self.scale_rate * q
        return replace(self, scale=max(s, self.scale_floor))


def residual_scale(e, floor: float = 0.1) -> float:
    return max(float(np.percentile(np.abs(e), 99)), floor)


def compute_residual(x, l) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    l = np.asarray(l, dtype=np.float64).ravel()
    if x.shape != l.shape:
        raise DimensionError("frame and background differ in size")
    return x - l


def gmm_observe(g: GmmState, e):
    """Classify and absorb one normalized residual per pixel.

    Returns ``(new_state, F)`` where ``F[i] = |e[i]|`` unless the observation
    matched one of the pixel's background components, in which case 0.
    """
    e = np.asarray(e, dtype=np.float64).ravel()
    if e.shape != (g.m,):
        raise DimensionError(f"residual has {e.size} entries, state has {g.m} pixels")
    m, K = g.weight.shape
    rows = np.arange(m)
    sd = np.sqrt(g.var)

    order = np.argsort(-(g.weight / sd), axis=1, kind="stable")
    w_sorted = np.take_along_axis(g.weight, order, axis=1)
    n_bg = 1 + np.argmax(np.cumsum(w_sorted, axis=1) > g.bg_threshold, axis=1)

    mu_sorted = np.take_along_axis(g.mean, order, axis=1)
    sd_sorted = np.take_along_axis(sd, order, axis=1)
    hit = (np.abs(e[:, None] - mu_sorted) <= g.match_sigma * sd_sorted) & (w_sorted > 0)
    matched = hit.any(axis=1)
    first_hit = np.argmax(hit, axis=1)
    is_background = matched & (first_hit < n_bg)
    F = np.where(is_background, 0.0, np.abs(e))

    w, mu, var = g.weight.copy(), g.mean.copy(), g.var.copy()
    rho = g.rho

    mi = rows[matched]
    k = order[mi, first_hit[matched]]
    w[mi] *= 1.0 - rho
    w[mi, k] += rho
    d = e[mi] - mu[mi, k]
    mu[mi, k] += rho * d
    var[mi, k] = np.maximum((1.0 - rho) * var[mi, k] + rho * d * d, g.var_floor)

    ui = rows[~matched]
    k = np.argmin(w[ui], axis=1)
    w[ui, k] = g.new_weight
    mu[ui, k] = e[ui]
    var[ui, k] = g.init_var

    w /= w.sum(axis=1, keepdims=True)
    np.maximum(var, g.var_floor, out=var)
    return replace(g, weight=w, mean=mu, var=var), F


def blend(e, f, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Blended residual magnitude ``|alpha * e + (1 - alpha) * f|``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    e = np.asarray(e, dtype=np.float64).ravel()
    f = np.asarray(f, dtype=np.float64).ravel()
    if e.shape != f.shape:
        raise DimensionError("residual and evidence differ in size")
    return np.abs(alpha * e + (1.0 - alpha) * f)
