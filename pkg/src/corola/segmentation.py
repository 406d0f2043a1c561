"""Binary MRF foreground segmentation solved exactly by s-t min-cut.

The energy of a labelling ``s`` (1 = foreground) is::

    sum_i [s_i = 0] * unary_bg[i] + [s_i = 1] * unary_fg[i]
        + gamma * #{(i, k) neighbouring : s_i != s_k}

Costs are quantized to integers at :data:`RESOLUTION` before the cut, so the
solver, the brute-force oracle and :func:`quantized_energy` agree exactly.
Among all minimizers the one with the fewest foreground pixels is returned.
"""
from __future__ import annotations

import functools
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError

RESOLUTION = 1e-6
BRUTE_FORCE_MAX_PIXELS = 20

if os.environ.get("COROLA_PURE_PYTHON"):
    from ._maxflow_py import bk_maxflow
    BACKEND = "python"
else:
    try:
        from ._maxflow import bk_maxflow
        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._maxflow_py import bk_maxflow
        BACKEND = "python"


@dataclass
class MrfProblem:
    """Unary and pairwise costs of a binary labelling on a ``height x width`` grid."""

    unary_bg: np.ndarray
    unary_fg: np.ndarray
    gamma: float
    height: int
    width: int
    connectivity: int = 4

    def __post_init__(self):
        self.unary_bg = np.asarray(self.unary_bg, dtype=np.float64).ravel()
        self.unary_fg = np.asarray(self.unary_fg, dtype=np.float64).ravel()
        m = self.height * self.width
        if self.unary_bg.shape != (m,) or self.unary_fg.shape != (m,):
            raise DimensionError(
                f"unary costs must have {m} entries for a {self.height}x{self.width} grid"
            )
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if not (np.all(np.isfinite(self.unary_bg)) and np.all(np.isfinite(self.unary_fg))
                and np.isfinite(self.gamma)):
            raise NumericalError("MRF costs must be finite")
        if (self.unary_bg < 0).any() or (self.unary_fg < 0).any() or self.gamma < 0:
            raise ValueError("MRF costs must be non-negative")

    @property
    def size(self) -> int:
        return self.height * self.width

    @classmethod
    def from_residual(cls, e_hat, beta2, gamma, height, width, connectivity=4):
        """Problem whose background cost is ``0.5 * e_hat**2`` and foreground cost ``beta2``."""
        e_hat = np.asarray(e_hat, dtype=np.float64).ravel()
        return cls(0.5 * e_hat * e_hat, np.full(e_hat.shape, float(beta2)),
                   float(gamma), height, width, connectivity)


@dataclass
class CutResult:
    mask: np.ndarray
    flow: int  # max-flow value in units of RESOLUTION


def quantize(values) -> np.ndarray:
    return np.rint(np.asarray(values, dtype=np.float64) / RESOLUTION).astype(np.int64)


@functools.lru_cache(maxsize=16)
def grid_edges(height: int, width: int, connectivity: int = 4) -> np.ndarray:
    """Undirected neighbour pairs ``(i, k)`` with ``i < k`` in row-major order."""
    idx = np.arange(height * width).reshape(height, width)
    pairs = [
        np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1),
        np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1),
    ]
    if connectivity == 8:
        pairs.append(np.stack([idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()], axis=1))
        pairs.append(np.stack([idx[:-1, 1:].ravel(), idx[1:, :-1].ravel()], axis=1))
    edges = np.concatenate(pairs, axis=0)
    edges.setflags(write=False)
    return edges


@functools.lru_cache(maxsize=16)
def _csr_topology(height: int, width: int, connectivity: int):
    edges = grid_edges(height, width, connectivity)
    n = height * width
    n_e = len(edges)
    # arc 2e goes i->k, arc 2e+1 goes k->i
    tails = np.empty(2 * n_e, dtype=np.int64)
    heads = np.empty(2 * n_e, dtype=np.int64)
    tails[0::2], heads[0::2] = edges[:, 0], edges[:, 1]
    tails[1::2], heads[1::2] = edges[:, 1], edges[:, 0]
    order = np.argsort(tails, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    sister = rank[np.arange(2 * n_e) ^ 1][order]
    first = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(tails, minlength=n), out=first[1:])
    return first, heads[order], tails[order], sister


def cut_edges(mask, height, width, connectivity=4) -> int:
    s = np.asarray(mask).ravel()
    e = grid_edges(height, width, connectivity)
    return int(np.count_nonzero(s[e[:, 0]] != s[e[:, 1]]))


def energy(mask, p: MrfProblem) -> float:
    """Objective value of ``mask`` under ``p`` (floating point)."""
    s = np.asarray(mask).ravel()
    if s.shape != (p.size,):
        raise DimensionError("mask and problem sizes differ")
    fg = s.astype(bool)
    unary = p.unary_bg[~fg].sum() + p.unary_fg[fg].sum()
    return float(unary + p.gamma * cut_edges(s, p.height, p.width, p.connectivity))


def quantized_energy(mask, p: MrfProblem) -> int:
    """Objective on the integer cost grid used by the solver."""
    s = np.asarray(mask).ravel().astype(bool)
    cut = cut_edges(s, p.height, p.width, p.connectivity)
    return (int(quantize(p.unary_bg)[~s].sum()) + int(quantize(p.unary_fg)[s].sum())
            + int(quantize(p.gamma)) * cut)


def min_cut(p: MrfProblem) -> CutResult:
    first, head, tail, sister = _csr_topology(p.height, p.width, p.connectivity)
    rcap = np.full(len(head), int(quantize(p.gamma)), dtype=np.int64)
    cap_source = quantize(p.unary_fg)  # paid when a pixel ends on the sink side (label 1)
    cap_sink = quantize(p.unary_bg)
    base = int(np.minimum(cap_source, cap_sink).sum())
    flow, labels = bk_maxflow(first, head, tail, sister, rcap, cap_source - cap_sink)
    return CutResult(labels.astype(np.uint8), base + int(flow))


def segment(p: MrfProblem) -> np.ndarray:
    """Globally optimal foreground mask for ``p``."""
    return min_cut(p).mask


def threshold_segment(p: MrfProblem) -> np.ndarray:
    """Minimizer when pairwise terms are dropped: foreground iff strictly cheaper."""
    return (quantize(p.unary_bg) > quantize(p.unary_fg)).astype(np.uint8)


def brute_force_segment(p: MrfProblem) -> np.ndarray:
    """Exhaustive minimizer; the lexicographically smallest one on ties."""
    m = p.size
    if m > BRUTE_FORCE_MAX_PIXELS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_PIXELS} pixels, got {m}")
    # bit (m-1-i) of the code is pixel i, so increasing codes are lexicographic order
    codes = np.arange(1 << m, dtype=np.int64)
    labels = ((codes[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(bool)
    qbg, qfg, qg = quantize(p.unary_bg), quantize(p.unary_fg), int(quantize(p.gamma))
    total = np.where(labels, qfg, qbg).sum(axis=1)
    e = grid_edges(p.height, p.width, p.connectivity)
    if len(e):
        total = total + qg * (labels[:, e[:, 0]] != labels[:, e[:, 1]]).sum(axis=1)
    return labels[int(np.argmin(total))].astype(np.uint8)
