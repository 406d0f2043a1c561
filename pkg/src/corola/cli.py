"""Command-line interface: ``corola run``, ``corola synth`` and ``corola eval``.

Exit codes: 0 success, 2 unreadable or unusable input, 3 dimension mismatch,
4 bad configuration or arguments.
"""
from __future__ import annotations

import argparse
import csv
import glob
import logging
import os
import sys
import time

import numpy as np

from . import bench, metrics, motion, pgm, pipeline, synth
from .errors import CorolaError, DimensionError, EstimationFailed

log = logging.getLogger("corola")

EXIT_OK, EXIT_INPUT, EXIT_DIMENSION, EXIT_CONFIG = 0, 2, 3, 4
EMIT_CHOICES = ("masks", "backgrounds", "residuals", "trace")

# config-file keys accepted by `run`, with their converters
RUN_KEYS = {
    "rank": int, "beta1": float, "beta2": str, "gamma": float, "alpha": float,
    "init_frames": int, "max_iters": int, "connectivity": int, "camera": str,
    "transforms": str, "seed": int, "out": str, "emit": str,
    "min_contrast": float, "gamma_ratio": float,
}


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Dashes in keys become underscores."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in RUN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = RUN_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def _beta2_value(text):
    if text is None or str(text).lower() == "auto":
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"--beta2 must be a number or 'auto', got {text!r}") from exc


def _add_pipeline_flags(p):
    p.add_argument("--rank", type=int, help="rank bound r of the background model")
    p.add_argument("--beta1", type=float, help="ridge weight (default 0.01)")
    p.add_argument("--beta2", help="foreground cost: a number or 'auto' (default auto)")
    p.add_argument("--gamma", type=float, help="smoothness weight (default: gamma_ratio * beta2)")
    p.add_argument("--alpha", type=float, help="blend weight of the raw residual (default 0.1)")
    p.add_argument("--init-frames", type=int, dest="init_frames")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--connectivity", type=int, choices=(4, 8))
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corola", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="process a directory of PGM frames")
    run.add_argument("input", help="directory of .pgm frames or a glob pattern")
    _add_pipeline_flags(run)
    run.add_argument("--camera", choices=("static", "moving"))
    run.add_argument("--transforms", help="sidecar file with one affine per frame")
    run.add_argument("--out", help="output directory")
    run.add_argument("--emit", help="comma list of masks,backgrounds,residuals,trace")
    run.add_argument("--config", help="key=value file; command-line flags take precedence")

    sy = sub.add_parser("synth", help="generate a synthetic sequence or run a sweep")
    _add_pipeline_flags(sy)
    sy.add_argument("--out", required=True)
    sy.add_argument("--width", type=int, default=100)
    sy.add_argument("--height", type=int, default=30)
    sy.add_argument("--n", type=int, default=200)
    sy.add_argument("--data-rank", type=int, default=5, dest="data_rank")
    sy.add_argument("--object-size", type=int, default=10, dest="object_size")
    sy.add_argument("--snr", type=float, default=10.0)
    sy.add_argument("--sweep", choices=bench.AXES, help="run a sweep instead of exporting frames")
    sy.add_argument("--values", help="comma-separated sweep values")
    sy.add_argument("--burn-in", type=int, default=bench.BURN_IN, dest="burn_in")

    ev = sub.add_parser("eval", help="score predicted masks against ground truth")
    ev.add_argument("pred")
    ev.add_argument("gt")
    ev.add_argument("--burn-in", type=int, default=0, dest="burn_in",
                    help="skip this many leading ground-truth frames")
    return parser


def _setup_logging():
    level = os.environ.get("COROLA_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


# --- run --------------------------------------------------------------------

def _input_files(spec: str):
    if os.path.isdir(spec):
        files = pgm.list_pgms(spec)
    elif any(ch in spec for ch in "*?["):
        files = sorted(glob.glob(spec))
    else:
        raise InputError(f"input {spec!r} is not a directory or glob pattern")
    if not files:
        raise InputError(f"no PGM frames found in {spec!r}")
    return files


def _load(path):
    try:
        return pgm.read_pgm(path)
    except (OSError, pgm.PgmError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _merged_run_config(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    for key in RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def params_from_config(cfg: dict) -> pipeline.Params:
    kw = {"rank": cfg.get("rank", 1), "beta2": _beta2_value(cfg.get("beta2"))}
    for key in ("beta1", "gamma", "alpha", "connectivity", "max_iters", "init_frames", "seed",
                "min_contrast", "gamma_ratio"):
        if cfg.get(key) is not None:
            kw[key] = cfg[key]
    try:
        return pipeline.Params(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_run(args) -> int:
    cfg = _merged_run_config(args)
    params = params_from_config(cfg)
    out = cfg.get("out") or "corola_out"
    emit = set(filter(None, str(cfg.get("emit", "masks,backgrounds,trace")).split(",")))
    if emit - set(EMIT_CHOICES):
        raise ConfigError(f"unknown --emit entries: {sorted(emit - set(EMIT_CHOICES))}")
    moving = cfg.get("camera", "static") == "moving"
    if cfg.get("camera", "static") not in ("static", "moving"):
        raise ConfigError("camera must be static or moving")

    files = _input_files(args.input)
    first = _load(files[0])
    h, w = first.shape
    transforms = None
    if moving and cfg.get("transforms"):
        try:
            transforms = motion.read_transforms(cfg["transforms"])
        except OSError as exc:
            raise InputError(f"cannot read transforms: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if len(transforms) < len(files):
            raise InputError(f"transform file has {len(transforms)} entries for {len(files)} frames")

    n0 = min(params.n_init, len(files))
    init = [first] + [_load(f) for f in files[1:n0]]
    for f, img in zip(files, init):
        if img.shape != (h, w):
            raise DimensionError(f"{f}: {img.shape[1]}x{img.shape[0]} differs from {w}x{h}")

    if moving and transforms is None:
        transforms = _estimate_chain(init, h, w)
    model = pipeline.Corola.from_frames(
        [im.ravel() for im in init], params, h, w,
        transforms=transforms[:n0] if moving else None)

    os.makedirs(out, exist_ok=True)
    dirs = {k: os.path.join(out, k) for k in ("masks", "backgrounds", "residuals")}
    for k in emit & set(dirs):
        os.makedirs(dirs[k], exist_ok=True)

    prev = init[-1]
    rows, trace_rows = [], []
    for idx in range(n0, len(files)):
        img = _load(files[idx])
        if img.shape != (h, w):
            raise DimensionError(f"{files[idx]}: {img.shape[1]}x{img.shape[0]} differs from {w}x{h}")
        tau = None
        if moving:
            tau = transforms[idx] if len(transforms) > idx else _estimate_pair(prev, img)
        t0 = time.perf_counter()
        res = model.process(img.ravel(), tau)
        ms = 1000.0 * (time.perf_counter() - t0)
        name = os.path.basename(files[idx])
        if "masks" in emit:
            pgm.write_mask(os.path.join(dirs["masks"], name), res.mask, h, w)
        if "backgrounds" in emit:
            pgm.write_pgm(os.path.join(dirs["backgrounds"], name), res.background.reshape(h, w))
        if "residuals" in emit:
            pgm.write_pgm(os.path.join(dirs["residuals"], name),
                          (0.5 + 0.5 * res.residual).reshape(h, w))
        tr = res.trace
        rows.append((name, tr.final_energy, tr.iterations, int(tr.converged), ms))
        trace_rows.extend((name, t + 1, en) for t, en in enumerate(tr.energies))
        prev = img

    with open(os.path.join(out, "run.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("frame", "energy_final", "iters", "converged", "ms"))
        for name, en, it, conv, ms in rows:
            wr.writerow((name, repr(en), it, conv, f"{ms:.3f}"))
    if "trace" in emit:
        with open(os.path.join(out, "trace.csv"), "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(("frame", "iteration", "energy"))
            for name, t, en in trace_rows:
                wr.writerow((name, t, repr(en)))
    log.info("processed %d frames into %s", len(rows), out)
    return EXIT_OK


def _estimate_pair(prev, cur):
    try:
        return motion.estimate_affine(prev, cur).matrix
    except EstimationFailed:
        log.warning("registration failed; assuming a static camera for this frame")
        return motion.IDENTITY


def _estimate_chain(frames, h, w):
    out = [motion.IDENTITY]
    for a, b in zip(frames, frames[1:]):
        out.append(_estimate_pair(a, b))
    return np.array(out)


# --- synth ------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = synth.SyntheticSpec(width=args.width, height=args.height, n=args.n, rank=args.data_rank,
                               object_width=args.object_size, object_height=args.object_size,
                               snr=args.snr, seed=args.seed or 0)
    cfg = {k: getattr(args, k) for k in RUN_KEYS if getattr(args, k, None) is not None}
    cfg.setdefault("rank", synth.effective_rank(spec.rank))
    params = params_from_config(cfg)
    os.makedirs(args.out, exist_ok=True)

    if args.sweep:
        if not args.values:
            raise ConfigError("--sweep needs --values")
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --values: {args.values!r}") from exc
        points = bench.sweep(args.sweep, values, params, seed=spec.seed, spec=spec,
                             burn_in=args.burn_in)
        text = bench.to_csv(points)
        with open(os.path.join(args.out, "sweep.csv"), "w") as fh:
            fh.write(text)
        sys.stdout.write(text)
        return EXIT_OK

    seq = synth.generate(spec)
    for sub in ("frames", "masks"):
        os.makedirs(os.path.join(args.out, sub), exist_ok=True)
    for j in range(spec.n):
        name = f"frame_{j:05d}.pgm"
        pgm.write_pgm(os.path.join(args.out, "frames", name), seq.frames[j].reshape(spec.height, spec.width))
        pgm.write_mask(os.path.join(args.out, "masks", name), seq.masks[j], spec.height, spec.width)
    return EXIT_OK


# --- eval -------------------------------------------------------------------

def cmd_eval(args) -> int:
    for d in (args.pred, args.gt):
        if not os.path.isdir(d):
            raise InputError(f"{d!r} is not a directory")
    gt_files = pgm.list_pgms(args.gt)
    order = {os.path.basename(f): i for i, f in enumerate(gt_files)}
    pred_files = pgm.list_pgms(args.pred)
    if not pred_files:
        raise InputError(f"no masks in {args.pred!r}")
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(("frame", "tp", "fp", "tn", "fn", "precision", "recall", "f"))
    scores = []
    for pf in pred_files:
        name = os.path.basename(pf)
        if name not in order:
            raise InputError(f"no ground truth for {name}")
        if order[name] < args.burn_in:
            continue
        try:
            pred = pgm.read_mask(pf)
            gt = pgm.read_mask(os.path.join(args.gt, name))
        except (OSError, pgm.PgmError) as exc:
            raise InputError(str(exc)) from exc
        if pred.shape != gt.shape:
            raise DimensionError(f"{name}: mask sizes differ")
        s = metrics.score(pred, gt)
        scores.append(s)
        c = s.counts
        out.writerow((name, c.tp, c.fp, c.tn, c.fn, _fmt(s.precision), _fmt(s.recall), _fmt(s.f)))
    out.writerow(("mean", "", "", "", "",
                  _fmt(metrics.mean_defined(s.precision for s in scores)),
                  _fmt(metrics.mean_defined(s.recall for s in scores)),
                  _fmt(metrics.mean_defined(s.f for s in scores))))
    return EXIT_OK


def _fmt(v):
    return "nan" if v is None else f"{v:.6f}"


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "synth": cmd_synth, "eval": cmd_eval}
    try:
        return handlers[args.verb](args)
    except ConfigError as exc:
        print(f"corola: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"corola: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DimensionError as exc:
        print(f"corola: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except CorolaError as exc:  # input that reads fine but cannot be modelled
        print(f"corola: cannot process input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
