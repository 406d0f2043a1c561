"""Per-frame alternating loop: low-rank fit, residual gating, MRF segmentation.

The model carried from frame to frame is the first-iteration iterate of each
frame; later iterations only refine that frame's mask.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import lowrank, residual, segmentation
from .errors import DimensionError, NoSupportError

log = logging.getLogger(__name__)

MONOTONE_TOL = 1e-9
ZERO_ENERGY = 1e-12
MAD_TO_SIGMA = 1.4826
# auto beta2 = 0.5 * (sigma^2 + MIN_CONTRAST^2): a lone pixel turns foreground
# once |E_hat| exceeds the noise level and a minimum contrast added in quadrature
MIN_CONTRAST = 0.02
GAMMA_RATIO = 2.0  # gamma = GAMMA_RATIO * beta2 when gamma is not given


@dataclass(frozen=True)
class Params:
    rank: int
    beta1: float = lowrank.DEFAULT_BETA1
    beta2: float | None = None  # None: estimated per frame
    gamma: float | None = None  # None: gamma_ratio * beta2
    gamma_ratio: float = GAMMA_RATIO
    min_contrast: float = MIN_CONTRAST
    alpha: float = residual.DEFAULT_ALPHA
    connectivity: int = 4
    max_iters: int | None = None  # None: rank
    tol: float = 1e-4
    init_frames: int | None = None  # None: max(rank, 10)
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.beta1 < 0:
            raise ValueError("beta1 must be non-negative")
        if self.beta2 is not None and self.beta2 < 0:
            raise ValueError("beta2 must be non-negative")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.gamma_ratio < 0 or self.min_contrast < 0:
            raise ValueError("gamma_ratio and min_contrast must be non-negative")

    @property
    def iteration_cap(self) -> int:
        return self.rank if self.max_iters is None else self.max_iters

    @property
    def n_init(self) -> int:
        return max(self.rank, 10) if self.init_frames is None else self.init_frames


@dataclass
class Snapshot:
    U: np.ndarray
    v: np.ndarray
    acc: lowrank.Accumulators


@dataclass
class ModelState:
    U: np.ndarray
    v: np.ndarray
    acc: lowrank.Accumulators
    gmm: residual.GmmState
    params: Params
    height: int
    width: int
    frame_index: int = 0
    snapshot: Snapshot | None = None

    @property
    def m(self) -> int:
        return self.height * self.width

    def copy(self) -> "ModelState":
        snap = None
        if self.snapshot is not None:
            snap = Snapshot(self.snapshot.U.copy(), self.snapshot.v.copy(), self.snapshot.acc.copy())
        return replace(self, U=self.U.copy(), v=self.v.copy(), acc=self.acc.copy(),
                       gmm=self.gmm.copy(), snapshot=snap)


@dataclass
class EnergyTrace:
    energies: list = field(default_factory=list)
    converged: bool = False
    warning: str | None = None
    beta2: float = float("nan")
    gamma: float = float("nan")

    @property
    def iterations(self) -> int:
        return len(self.energies)

    @property
    def monotone_violations(self) -> int:
        e = self.energies
        return sum(1 for a, b in zip(e, e[1:]) if b > a + MONOTONE_TOL)

    @property
    def final_energy(self) -> float:
        return self.energies[-1] if self.energies else float("nan")


@dataclass
class FrameResult:
    mask: np.ndarray
    background: np.ndarray  # clamped to [0, 1]
    residual: np.ndarray
    trace: EnergyTrace


def initialize(frames, params: Params, height: int, width: int, gmm_params=None,
               transforms=None) -> ModelState:
    """Build a model from initialization frames.

    With ``transforms`` (one per frame, entry ``j`` mapping frame ``j-1`` to
    frame ``j``) the frames are first aligned to the last one, so the model
    starts out in that frame's coordinates.
    """
    frames = [np.asarray(f, dtype=np.float64).ravel() for f in frames]
    if transforms is not None:
        from . import motion

        frames = list(motion.align_to_last(frames, transforms, height, width))
    U, acc, v = lowrank.initialize_basis(frames, params.rank, params.beta1,
                                         max_frames=max(len(frames), lowrank.DEFAULT_INIT_CAP),
                                         seed=params.seed)
    if U.shape[0] != height * width:
        raise DimensionError("frame size does not match height*width")
    gmm = residual.GmmState.fresh(height * width, **(gmm_params or {}))
    return ModelState(U, v, acc, gmm, params, height, width, frame_index=len(frames))


def noise_sigma(e) -> float:
    """Robust (MAD) noise level of a residual vector."""
    e = np.asarray(e, dtype=np.float64)
    return float(MAD_TO_SIGMA * np.median(np.abs(e - np.median(e))))


def auto_beta2(e, min_contrast: float = MIN_CONTRAST) -> float:
    """Per-frame foreground cost ``0.5 * (sigma^2 + min_contrast^2)``.

    ``sigma`` is measured on the raw residual ``e``: the blended residual is
    mostly near zero once the mixture explains the noise, so its spread says
    little about the noise itself.
    """
    return 0.5 * (noise_sigma(e) ** 2 + min_contrast ** 2)


def snapshot_commit(state: ModelState) -> ModelState:
    """Carry the stored first-iteration iterate forward as the committed model."""
    snap = state.snapshot
    if snap is None:
        return state
    acc = snap.acc.copy()
    acc.frames_absorbed = state.acc.frames_absorbed + 1
    return replace(state, U=snap.U.copy(), v=snap.v.copy(), acc=acc, snapshot=None)


def snapshot_restore(state: ModelState):
    """Working copies ``(U, acc)`` that an iteration may modify freely."""
    return state.U.copy(), state.acc.copy()


def frame_energy(e, mask, beta2) -> float:
    """Background-pixel fit error plus foreground size cost."""
    bg = np.asarray(mask).ravel() == 0
    eb = e[bg]
    return float(0.5 * eb @ eb + beta2 * np.count_nonzero(~bg))


def process_frame(state: ModelState, x, transform=None):
    """Run the alternating loop on one frame.  Returns ``(FrameResult, new_state)``.

    ``transform`` (a 2x3 affine from the previous frame to this one) switches on
    moving-camera handling: the model is warped and its out-of-view pixels are
    re-estimated from ``x`` before fitting.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape != (state.m,):
        raise DimensionError(f"frame has {x.size} pixels, model expects {state.m}")
    p = state.params

    if transform is not None:
        from . import motion

        state, report = motion.warp_model(state, transform)
        if report.missing.any():
            state = motion.fill_missing(state, x, report.missing)

    trace = EnergyTrace()
    scale = state.gmm.normalizer(x - state.U @ state.v)
    beta2 = p.beta2
    gamma = p.gamma
    fit_mask = np.zeros(state.m, dtype=np.uint8)  # first iteration fits every pixel
    U_w = None
    acc_w = None
    snapshot = None
    last_problem = None
    mask = fit_mask
    e = None
    gmm_next = state.gmm

    for t in range(1, p.iteration_cap + 1):
        if t == 1:
            U_w, acc_base = snapshot_restore(state)
        try:
            v = lowrank.solve_coefficients(U_w, x, fit_mask, p.beta1)
        except NoSupportError:
            trace.warning = "no-support"
            log.warning("frame %d: every pixel labelled foreground; model not updated",
                        state.frame_index)
            fallback = segmentation.threshold_segment(last_problem)
            bg = lowrank.reconstruct_background(state.U, state.v)
            return (FrameResult(fallback, bg, x - state.U @ state.v, trace),
                    replace(state, frame_index=state.frame_index + 1))
        acc_w = lowrank.update_accumulators(acc_base, v, x, fit_mask)
        U_w = lowrank.update_basis(U_w, acc_w, fit_mask, p.beta1)

        e = x - U_w @ v
        e_norm = np.clip(e / scale, -1.0, 1.0)
        gmm_next, f_norm = residual.gmm_observe(state.gmm, e_norm)
        e_hat = residual.blend(e, f_norm * scale, p.alpha)

        if t == 1:
            if beta2 is None:
                beta2 = auto_beta2(e, p.min_contrast)
            if gamma is None:
                gamma = p.gamma_ratio * beta2
            trace.beta2, trace.gamma = beta2, gamma
            snapshot = Snapshot(U_w.copy(), v.copy(), acc_w.copy())

        last_problem = segmentation.MrfProblem.from_residual(
            e_hat, beta2, gamma, state.height, state.width, p.connectivity)
        mask = segmentation.segment(last_problem)
        en = frame_energy(e, mask, beta2)
        trace.energies.append(en)

        if en < ZERO_ENERGY:
            trace.converged = True
            break
        if t > 1:
            prev = trace.energies[-2]
            if (prev - en) / en < p.tol:
                trace.converged = True
                break
        fit_mask = mask

    if trace.monotone_violations:
        log.debug("frame %d: energy rose during iterations: %s", state.frame_index, trace.energies)

    state = replace(state, snapshot=snapshot, gmm=gmm_next.with_scale_update(e),
                    frame_index=state.frame_index + 1)
    state = snapshot_commit(state)
    background = lowrank.reconstruct_background(snapshot.U, snapshot.v)
    return FrameResult(mask, background, e, trace), state


class Corola:
    """Streaming wrapper holding one model state."""

    def __init__(self, state: ModelState):
        self.state = state

    @classmethod
    def from_frames(cls, frames, params: Params, height: int, width: int,
                    transforms=None, **gmm_params):
        return cls(initialize(frames, params, height, width, gmm_params, transforms))

    def process(self, x, transform=None) -> FrameResult:
        result, self.state = process_frame(self.state, x, transform)
        return result
