"""Parameter sweeps over synthetic sequences and a per-pixel threshold baseline."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, replace

import numpy as np

from . import metrics, pipeline, synth

BURN_IN = 25
CSV_COLUMNS = ("axis_value", "mean_f", "mean_precision", "mean_recall", "mean_iters", "ms_per_frame")
AXES = ("snr", "rank", "object_size")


def threshold_baseline(frames, k: float = 3.0, window: int = 25) -> np.ndarray:
    """Foreground masks from ``|x - running median| > k * sigma``.

    The background at frame ``j`` is the per-pixel median of the previous
    ``window`` frames (the first frame is its own background).  ``sigma`` is a
    MAD estimate over all pixels of the frame's difference image.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ValueError("frames must be an (n, m) array")
    if window < 1:
        raise ValueError("window must be positive")
    masks = np.zeros(frames.shape, dtype=np.uint8)
    for j in range(frames.shape[0]):
        past = frames[max(0, j - window):j] if j else frames[:1]
        d = frames[j] - np.median(past, axis=0)
        sigma = pipeline.MAD_TO_SIGMA * np.median(np.abs(d - np.median(d)))
        masks[j] = np.abs(d) > k * sigma
    return masks


@dataclass
class SweepPoint:
    axis_value: float
    mean_f: float
    mean_precision: float
    mean_recall: float
    mean_iters: float
    ms_per_frame: float
    baseline_f: float


def evaluate_sequence(seq, params: pipeline.Params, burn_in: int = BURN_IN):
    """Run the pipeline over ``seq`` and score frames from index ``burn_in`` on."""
    n0 = params.n_init
    model = pipeline.Corola.from_frames(seq.frames[:n0], params, seq.height, seq.width)
    scores, iters, elapsed = [], [], 0.0
    for j in range(n0, seq.frames.shape[0]):
        t0 = time.perf_counter()
        res = model.process(seq.frames[j])
        elapsed += time.perf_counter() - t0
        if j >= burn_in:
            scores.append(metrics.score(res.mask, seq.masks[j]))
            iters.append(res.trace.iterations)
    n_proc = max(seq.frames.shape[0] - n0, 1)
    return scores, iters, 1000.0 * elapsed / n_proc


def baseline_f(seq, burn_in: int = BURN_IN, k: float = 3.0) -> float:
    masks = threshold_baseline(seq.frames, k)
    return metrics.mean_defined(
        metrics.score(masks[j], seq.masks[j]).f for j in range(burn_in, seq.frames.shape[0]))


def sweep(axis: str, values, params: pipeline.Params, seed: int = 0,
          spec: synth.SyntheticSpec | None = None, burn_in: int = BURN_IN):
    """One :class:`SweepPoint` per value; point ``i`` uses seed ``seed + i``.

    ``rank`` varies the true rank of the data, ``object_size`` the side of a
    square object; the pipeline parameters stay fixed.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    values = list(values)
    if not values:
        raise ValueError("values must be nonempty")
    spec = spec or synth.SyntheticSpec()
    out = []
    for i, val in enumerate(values):
        if axis == "snr":
            s = replace(spec, snr=float(val), seed=seed + i)
        elif axis == "rank":
            s = replace(spec, rank=int(val), seed=seed + i)
        else:
            s = replace(spec, object_width=int(val), object_height=int(val), seed=seed + i)
        seq = synth.generate(s)
        scores, iters, ms = evaluate_sequence(seq, params, burn_in)
        out.append(SweepPoint(
            axis_value=float(val),
            mean_f=metrics.mean_defined(sc.f for sc in scores),
            mean_precision=metrics.mean_defined(sc.precision for sc in scores),
            mean_recall=metrics.mean_defined(sc.recall for sc in scores),
            mean_iters=float(np.mean(iters)) if iters else float("nan"),
            ms_per_frame=ms,
            baseline_f=baseline_f(seq, burn_in),
        ))
    return out


def to_csv(points, include_timing: bool = True) -> str:
    buf = io.StringIO()
    cols = CSV_COLUMNS if include_timing else CSV_COLUMNS[:-1]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for p in points:
        row = [p.axis_value, p.mean_f, p.mean_precision, p.mean_recall, p.mean_iters, p.ms_per_frame]
        w.writerow([f"{v:.6g}" for v in row[:len(cols)]])
    return buf.getvalue()
