"""``mindmesh`` command line: one subcommand per pipeline stage.

Exit codes: 0 success, 1 a check did not pass, 2 configuration or usage
error, 3 data error.  ``MINDMESH_THREADS`` caps the BLAS worker count.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import load_checkpoint, save_checkpoint
from .errors import ConfigError, DataError, DimensionError
from .geometry import (
    kabsch_align,
    raster_plan_for,
    read_obj,
    read_pmap,
    sample_vertices,
    write_obj,
    write_pmap,
)
from .model import (
    PositionMapNet,
    evaluate,
    fit,
    make_splits,
    predict_maps,
    prepare,
    restore,
    run_suite,
)
from .runconfig import RunConfig
from .signal import (
    NormStats,
    apply_filter,
    apply_zscore,
    design_bandpass,
    read_csv,
    read_eegb,
    segment_windows,
    stack_windows,
)
from .splat import init_splats, load_splats, look_at, render, write_png
from .synth import build_dataset, load_dataset

log = logging.getLogger("mindmesh")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3
LOG_NAME = "mindmesh.log"
_run_handlers: list[logging.Handler] = []


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _load_config(args) -> RunConfig:
    return RunConfig.load(args.config) if args.config else RunConfig()


def _start_run(args, out) -> RunConfig:
    """Echo the resolved config into ``out``; timestamps only go to the log file there."""
    cfg = _load_config(args)
    out = Path(out)
    cfg.write(out)
    handler = logging.FileHandler(out / LOG_NAME, mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    logging.getLogger().addHandler(handler)
    _run_handlers.append(handler)
    return cfg


def _design(cfg: RunConfig, sample_rate: float):
    f = cfg.filter
    return design_bandpass(sample_rate, f.low_hz, f.high_hz, f.order)


def _prepared(cfg: RunConfig, data_dir):
    ds = load_dataset(data_dir)
    data = prepare(ds, _design(cfg, ds.config.sample_rate), cfg.filter.zero_phase, cfg.train.holdout_trials,
                   cfg.window)
    return ds, data


def _model(cfg: RunConfig, checkpoint=None) -> tuple[PositionMapNet, NormStats | None]:
    net = PositionMapNet(cfg.encoder, cfg.decoder, seed=cfg.seed)
    norm = None
    if checkpoint:
        try:
            norm = restore(net, load_checkpoint(checkpoint))
        except (KeyError, DimensionError, ValueError) as exc:
            raise DataError(f"{checkpoint} does not match the configured network: {exc}") from exc
    return net.eval(), norm


# -- subcommands --------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _start_run(args, args.out)
    path = build_dataset(cfg.synth, args.out)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = _start_run(args, args.out)
    _, data = _prepared(cfg, args.data)
    state = {"norm.mean": data.norm.mean, "norm.std": data.norm.std}
    for t in data.trials:
        state[f"{t.trial_id}.windows"] = t.windows
        state[f"{t.trial_id}.frame_index"] = t.frame_index
        state[f"{t.trial_id}.segment"] = t.segment
    path = Path(args.out) / "windows.mmck"
    save_checkpoint(path, state)
    print(f"wrote {path} ({sum(len(t) for t in data.trials)} windows)")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _start_run(args, args.out)
    _, data = _prepared(cfg, args.data)
    splits = make_splits(data)
    net = PositionMapNet(cfg.encoder, cfg.decoder, seed=cfg.seed)
    result = fit(net, data, splits, cfg.train, cfg.loss, out_dir=args.out)
    last = result.history[-1] if result.history else {}
    print(f"trained {result.steps} steps, final loss {last.get('total', float('nan')):.6g}; "
          f"wrote {Path(args.out) / 'final.mmck'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _start_run(args, args.out)
    _, data = _prepared(cfg, args.data)
    net, _ = _model(cfg, args.checkpoint)
    report = evaluate(net, data, make_splits(data), subject_id=args.subject)
    out = Path(args.out)
    report.write_csv(out / "metrics.csv")
    (out / "metrics.txt").write_text(report.render() + "\n")
    print(report.render())
    return EXIT_OK


def _read_recording(path):
    path = Path(path)
    return read_csv(path) if path.suffix.lower() == ".csv" else read_eegb(path)


def cmd_infer(args) -> int:
    cfg = _start_run(args, args.out)
    net, norm = _model(cfg, args.checkpoint)
    if norm is None:
        raise DataError(f"{args.checkpoint} holds no normalisation statistics")
    template = read_obj(args.template)
    rec = _read_recording(args.eeg)
    rec = apply_zscore(apply_filter(rec, _design(cfg, rec.sample_rate), cfg.filter.zero_phase), norm)
    first = rec.start_time + cfg.window / rec.sample_rate
    last = rec.start_time + rec.n_samples / rec.sample_rate
    times = np.arange(first, last + 1e-9, 1.0 / args.fps)
    wins = segment_windows(rec, times, window=cfg.window)
    if not wins:
        raise DataError(f"{args.eeg} is shorter than one {cfg.window}-sample window")
    mask = raster_plan_for(template, cfg.synth.resolution).mask
    out = Path(args.out)
    for w, pmap in zip(wins, predict_maps(net, stack_windows(wins), mask)):
        write_pmap(out / f"frame_{w.frame_index:05d}.pmap", pmap)
    print(f"wrote {len(wins)} position maps to {out}")
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = _start_run(args, args.out)
    r = cfg.render
    template = read_obj(args.template)
    splats = load_splats(args.splats) if args.splats else init_splats(template, r.color, r.splat_scale,
                                                                       r.splat_opacity)
    if splats.face.max(initial=-1) >= template.n_faces:
        raise DataError("splats are bound to faces the template does not have")
    camera = look_at(r.eye, r.target, r.up, r.fov_deg, tuple(r.size))
    paths = sorted(Path(args.pmaps).glob("*.pmap"))
    if not paths:
        raise DataError(f"no .pmap files in {args.pmaps}")
    out = Path(args.out)
    for p in paths:
        verts = sample_vertices(read_pmap(p), template).vertices.astype(np.float64)
        mesh = template.with_vertices(verts)
        write_png(out / f"{p.stem}.png", render(splats, mesh, camera).image())
    print(f"rendered {len(paths)} frames to {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = run_suite(range(args.seeds), include_model=not args.layers_only, tol=args.tol)
    text = report.render()
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gradcheck.txt").write_text(text + "\n")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_align(args) -> int:
    src = Path(args.objs)
    paths = sorted(src.glob("*.obj")) if src.is_dir() else [Path(p) for p in args.objs.split(",")]
    if len(paths) < 1:
        raise DataError(f"no OBJ files in {args.objs}")
    meshes = [read_obj(p) for p in paths]
    ref = meshes[0].vertices
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    transforms = []
    for p, m in zip(paths, meshes):
        if m.vertices.shape != ref.shape:
            raise DataError(f"{p} has {m.n_vertices} vertices, frame 0 has {len(ref)}")
        tf = kabsch_align(m.vertices, ref)
        aligned = tf.apply(m.vertices)
        write_obj(out / p.name, m.with_vertices(aligned))
        rms = float(np.sqrt(np.mean(np.sum((aligned - ref) ** 2, axis=1))))
        transforms.append({"file": p.name, "rotation": tf.rotation.tolist(), "translation": tf.translation.tolist(),
                           "rms": rms})
    (out / "transforms.json").write_text(json.dumps(transforms, indent=1) + "\n")
    print(f"aligned {len(paths)} meshes to {paths[0].name}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="mindmesh", description="EEG to facial geometry pipeline.", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"mindmesh {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    def config_flag(p):
        p.add_argument("--config", default=None, help="run config JSON; omitted sections use built-in defaults")

    p = add("synth", cmd_synth, "Generate the synthetic paired EEG / geometry dataset.")
    config_flag(p)
    p.add_argument("--out", required=True, help="dataset directory to create")

    p = add("preprocess", cmd_preprocess, "Filter, z-score and window the EEG into windows.mmck.")
    config_flag(p)
    p.add_argument("--data", required=True, help="dataset directory written by synth")
    p.add_argument("--out", required=True, help="output directory")

    p = add("train", cmd_train, "Train the position-map network; writes loss.csv and checkpoints.")
    config_flag(p)
    p.add_argument("--data", required=True, help="dataset directory written by synth")
    p.add_argument("--out", required=True, help="run directory")

    p = add("eval", cmd_eval, "Per-trial nMAE / nRMSE table on test segments and holdout trials.")
    config_flag(p)
    p.add_argument("--data", required=True, help="dataset directory written by synth")
    p.add_argument("--checkpoint", default=None, help="MMCK checkpoint; omitted evaluates the initialised network")
    p.add_argument("--subject", default="S1", help="subject label for the table")
    p.add_argument("--out", required=True, help="directory for metrics.csv and metrics.txt")

    p = add("infer", cmd_infer, "Decode an EEG recording into one position map per video frame.")
    config_flag(p)
    p.add_argument("--checkpoint", required=True, help="trained MMCK checkpoint (holds the z-score statistics)")
    p.add_argument("--eeg", required=True, help="recording as .eegb or .csv")
    p.add_argument("--template", required=True, help="template OBJ supplying the UV layout and mask")
    p.add_argument("--fps", type=float, default=30.0, help="output frame rate")
    p.add_argument("--out", required=True, help="directory for frame_NNNNN.pmap files")

    p = add("render", cmd_render, "Render a .pmap sequence through face-bound splats to PNG frames.")
    config_flag(p)
    p.add_argument("--pmaps", required=True, help="directory of .pmap files, rendered in name order")
    p.add_argument("--template", required=True, help="template OBJ the splats are bound to")
    p.add_argument("--splats", default=None, help="trained splat file; omitted uses one flat splat per face")
    p.add_argument("--out", required=True, help="directory for PNG frames")

    p = add("gradcheck", cmd_gradcheck, "Finite-difference check of every layer and a shrunk network.")
    p.add_argument("--seeds", type=int, default=20, help="random seeds per check")
    p.add_argument("--tol", type=float, default=1e-4, help="maximum relative error")
    p.add_argument("--layers-only", action="store_true", help="skip the end-to-end network check")
    p.add_argument("--out", default=None, help="optional directory for gradcheck.txt")

    p = add("align", cmd_align, "Rigidly align an OBJ sequence to its first frame (Kabsch).")
    p.add_argument("--objs", required=True, help="directory of OBJ files (name order) or comma-separated list")
    p.add_argument("--out", required=True, help="directory for aligned OBJs and transforms.json")
    return parser


def _thread_limit():
    raw = os.environ.get("MINDMESH_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MINDMESH_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"MINDMESH_THREADS must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    root = logging.getLogger()
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.INFO if args.verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    root.addHandler(console)
    _run_handlers.append(console)
    root.setLevel(logging.INFO)
    try:
        limit = _thread_limit()
        if limit is None:
            return args.func(args)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=limit):
            return args.func(args)
    except ConfigError as exc:
        print(f"mindmesh: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"mindmesh: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        while _run_handlers:
            h = _run_handlers.pop()
            root.removeHandler(h)
            h.close()


if __name__ == "__main__":
    sys.exit(main())
