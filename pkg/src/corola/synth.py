"""Synthetic benchmark sequences with exact ground truth.

A random rank-``r`` background ``B = U V`` is overlaid with a small block that
bounces left and right one pixel per frame; i.i.d. Gaussian noise sets the
signal-to-noise ratio ``sqrt(var(B) / var(noise))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage


@dataclass(frozen=True)
class SyntheticSpec:
    width: int = 100
    height: int = 30
    n: int = 200
    rank: int = 5
    object_width: int = 10
    object_height: int = 10
    snr: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if self.n < 1 or self.rank < 1:
            raise ValueError("n and rank must be positive")
        if not (0 < self.object_width <= self.width and 0 < self.object_height <= self.height):
            raise ValueError("object does not fit inside the image")

    @property
    def m(self) -> int:
        return self.width * self.height


@dataclass
class SyntheticSequence:
    """Frames and truth, one row per frame (shape ``(n, m)``)."""

    frames: np.ndarray
    masks: np.ndarray
    background: np.ndarray
    noise: np.ndarray  # added noise, before the [0, 1] mapping
    raw_background: np.ndarray  # B before the [0, 1] mapping
    offset: float
    scale: float  # frames = (D - offset) / scale
    positions: np.ndarray  # left column of the object per frame
    height: int
    width: int


def bounce_positions(n: int, span: int) -> np.ndarray:
    """Left edge per frame for a block stepping one pixel and reversing at the borders."""
    if span <= 0:
        return np.zeros(n, dtype=int)
    t = np.arange(n) % (2 * span)
    return np.where(t <= span, t, 2 * span - t)


def block_mask(height, width, top, left, oh, ow) -> np.ndarray:
    mk = np.zeros((height, width), dtype=np.uint8)
    mk[top:top + oh, left:left + ow] = 1
    return mk.ravel()


def generate(spec: SyntheticSpec) -> SyntheticSequence:
    rng = np.random.default_rng(spec.seed)
    m, n = spec.m, spec.n
    B = rng.standard_normal((m, spec.rank)) @ rng.standard_normal((spec.rank, n))
    B = B.T  # one frame per row
    lo_obj, hi_obj = np.percentile(B, [5, 95])

    positions = bounce_positions(n, spec.width - spec.object_width)
    top = (spec.height - spec.object_height) // 2
    masks = np.stack([
        block_mask(spec.height, spec.width, top, int(x), spec.object_height, spec.object_width)
        for x in positions
    ])
    D = B.copy()
    fg = masks.astype(bool)
    D[fg] = rng.uniform(lo_obj, hi_obj, size=int(fg.sum()))

    if np.isinf(spec.snr):
        noise = np.zeros_like(B)
    else:
        noise = rng.standard_normal(B.shape) * (np.sqrt(B.var()) / spec.snr)
    D += noise

    offset = float(D.min())
    scale = float(D.max() - offset) or 1.0
    return SyntheticSequence(
        frames=(D - offset) / scale,
        masks=masks,
        background=(B - offset) / scale,
        noise=noise,
        raw_background=B,
        offset=offset,
        scale=scale,
        positions=positions,
        height=spec.height,
        width=spec.width,
    )


@dataclass
class PanningSequence:
    frames: np.ndarray
    masks: np.ndarray
    transforms: np.ndarray  # (n, 2, 3); entry j maps frame j-1 coordinates to frame j
    in_view: np.ndarray  # pixels of frame j also visible in frame j-1
    height: int
    width: int


def generate_panning(width: int = 100, height: int = 30, n: int = 120, shift: int = 1,
                     object_width: int = 10, object_height: int = 10,
                     snr: float = 10.0, seed: int = 0) -> PanningSequence:
    """Camera panning right by ``shift`` pixels per frame over a static textured scene."""
    rng = np.random.default_rng(seed)
    pano_w = width + shift * (n - 1)
    scene = scipy.ndimage.gaussian_filter(rng.standard_normal((height, pano_w)), 3.0, mode="wrap")
    scene = 0.2 + 0.6 * (scene - scene.min()) / (scene.max() - scene.min())
    lo_obj, hi_obj = np.percentile(scene, [5, 95])
    sd_noise = 0.0 if np.isinf(snr) else float(scene.std()) / snr

    positions = bounce_positions(n, width - object_width)
    top = (height - object_height) // 2
    frames, masks, views = [], [], []
    for j in range(n):
        img = scene[:, j * shift:j * shift + width].copy()
        mk = block_mask(height, width, top, int(positions[j]), object_height, object_width)
        flat = img.ravel()
        flat[mk == 1] = rng.uniform(lo_obj, hi_obj, size=int(mk.sum()))
        flat += rng.standard_normal(flat.size) * sd_noise
        frames.append(np.clip(flat, 0.0, 1.0))
        masks.append(mk)
        view = np.ones((height, width), dtype=bool)
        if j > 0 and shift > 0:
            view[:, width - shift:] = False
        views.append(view.ravel())
    transforms = np.tile(np.array([[1.0, 0.0, -float(shift)], [0.0, 1.0, 0.0]]), (n, 1, 1))
    transforms[0] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    return PanningSequence(np.stack(frames), np.stack(masks), transforms,
                           np.stack(views), height, width)


def effective_rank(rank: int) -> int:
    """Rank of the frames of a rank-``rank`` sequence.

    Mapping ``D`` to [0, 1] subtracts a constant from every pixel, which adds
    the all-ones image to the column space.
    """
    return int(rank) + 1
