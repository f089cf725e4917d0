"""Command-line interface.

Subcommands: convert, simulate, estimate, reconstruct, render, bench.
Exit codes: 0 success, 1 data/runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench, estimate, io, simulator
from .evrep import ET_MODES, compute_evrep_streaming
from .frame_event import CameraModel, reconstruct_next
from .io import FormatError
from .stream import Frame, StreamError


def _load_events(path: Path, width, height, zero_polarity="negative",
                 parser: argparse.ArgumentParser | None = None):
    blob = Path(path).read_bytes()
    if blob[:4] == io.EVT1_MAGIC:
        return io.parse_binary_events(blob)
    if width is None or height is None:
        msg = "--width/--height are required for text event input"
        if parser is not None:
            parser.error(msg)
        raise FormatError(msg)
    return io.parse_text_events(blob, width, height, zero_polarity)


def _load_model(args, parser, width=None, height=None) -> CameraModel:
    if args.camera_model:
        theta, k = io.parse_camera_model(Path(args.camera_model).read_bytes())
        from .evrep import ChannelField
        return CameraModel(ChannelField(theta, "theta"), k)
    if args.theta is None:
        parser.error("either --camera-model or --theta (with --k) is required")
    if width is None or height is None:
        parser.error("--theta needs known frame dimensions")
    return CameraModel.uniform(width, height, args.theta, args.k)


def cmd_convert(args, parser):
    stream = _load_events(Path(args.input), args.width, args.height,
                          args.zero_polarity, parser)
    if args.to == "evrepsl" and not args.camera_model:
        parser.error("--to evrepsl requires --camera-model")
    out = Path(args.output)
    if args.to == "evt1":
        out.write_bytes(io.write_binary_events(stream))
    else:
        rep = compute_evrep_streaming(stream, args.et_mode)
        if args.to == "evrep":
            out.write_bytes(io.write_channels(rep.channels()))
        else:
            from .evrep import ChannelField
            theta, k = io.parse_camera_model(Path(args.camera_model).read_bytes())
            model = CameraModel(ChannelField(theta, "theta"), k)
            # no frames here, so the refined channel is the raw integral
            refined = ChannelField(rep.e_i.values, "refined_integral")
            sl = estimate.assemble_evrepsl(rep, refined, model.theta)
            out.write_bytes(io.write_channels(sl.channels()))
    print(f"events={len(stream)} window=[{stream.t_start},{stream.t_end}] "
          f"dims={stream.width}x{stream.height}")
    return 0


def cmd_simulate(args, parser):
    frames = io.load_frame_sequence(Path(args.manifest))
    if not frames:
        raise FormatError("manifest lists no frames")
    model = _load_model(args, parser, frames[0].width, frames[0].height)
    timing = simulator.TimingModel(args.timing.replace("-", "_"))
    stream = simulator.simulate_sequence(frames, model, timing)
    Path(args.output).write_bytes(io.write_binary_events(stream))
    print(f"events={len(stream)} window=[{stream.t_start},{stream.t_end}] "
          f"dims={stream.width}x{stream.height}")
    return 0


def cmd_estimate(args, parser):
    frames = io.load_frame_sequence(Path(args.manifest))
    stream = io.parse_binary_events(Path(args.events).read_bytes())
    pairs = estimate.build_pairs(frames, stream)
    cfg = estimate.SearchConfig(args.k_min, args.k_max, args.tolerance)
    result = estimate.fit_camera(pairs, cfg)
    Path(args.output).write_bytes(
        io.write_camera_model(result.model.theta.values, result.model.k))
    report = (f"k_hat={result.model.k:.9g}\n"
              f"mae_heldout={result.mae_heldout:.9g}\n"
              f"pixels_active={result.pixels_active}\n"
              f"clamp_count={result.clamp_count}\n")
    if args.report:
        Path(args.report).write_text(report)
    print(report, end="")
    return 0


def cmd_reconstruct(args, parser):
    f0 = io.parse_pgm(Path(args.frame).read_bytes())
    stream = _load_events(Path(args.events), None, None, parser=parser)
    if (stream.width, stream.height) != (f0.width, f0.height):
        raise StreamError(f"frame is {f0.width}x{f0.height} but events are "
                          f"{stream.width}x{stream.height}")
    model = _load_model(args, parser, f0.width, f0.height)
    from .evrep import compute_e_i
    rec = reconstruct_next(f0, compute_e_i(stream), model)
    Path(args.output).write_bytes(io.write_pgm(rec.frame))
    print(f"clamped_pixels={rec.clamp_count}")
    return 0


def cmd_render(args, parser):
    channels = io.parse_channels(Path(args.tensor).read_bytes())
    if not 0 <= args.channel < len(channels):
        raise FormatError(f"channel {args.channel} out of range "
                          f"(tensor has {len(channels)})")
    v = channels[args.channel].astype(np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        norm = (v - lo) / (hi - lo)
    else:
        norm = np.full_like(v, 128.0 / 255.0)  # constant channel -> mid gray
    Path(args.output).write_bytes(io.write_pgm(Frame(norm)))
    return 0


def cmd_bench(args, parser):
    stream = _load_events(Path(args.events), args.width, args.height,
                          parser=parser)
    report = bench.run_benchmark(stream, args.path, args.repeat,
                                 args.et_mode, args.backend)
    print(report.as_text(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evkit",
                                     description="Event-stream statistics, "
                                     "simulation and camera-parameter fitting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert events between formats")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--to", choices=["evt1", "evrep", "evrepsl"], default="evt1")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--camera-model")
    p.add_argument("--et-mode", choices=ET_MODES, default="literal")
    p.add_argument("--zero-polarity", choices=["negative", "error"],
                   default="negative")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("simulate", help="generate events from a frame sequence")
    p.add_argument("manifest")
    p.add_argument("output")
    p.add_argument("--camera-model")
    p.add_argument("--theta", type=float)
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--timing", choices=["uniform", "leading-edge"],
                   default="uniform")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit threshold field and offset k")
    p.add_argument("manifest")
    p.add_argument("events")
    p.add_argument("output", help="camera model output path")
    p.add_argument("--report", help="fit report output path")
    p.add_argument("--k-min", type=float, default=0.0)
    p.add_argument("--k-max", type=float, default=2.0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("reconstruct", help="predict the next frame from events")
    p.add_argument("frame", help="PGM of the starting frame")
    p.add_argument("events")
    p.add_argument("output")
    p.add_argument("--camera-model")
    p.add_argument("--theta", type=float)
    p.add_argument("--k", type=float, default=0.0)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("render", help="normalize a tensor channel to a PGM")
    p.add_argument("tensor")
    p.add_argument("output")
    p.add_argument("--channel", type=int, default=0)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="time the channel-computation paths")
    p.add_argument("events")
    p.add_argument("--path", choices=["reference", "streaming"],
                   default="streaming")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--backend", choices=["auto", "compiled", "python"],
                   default="auto")
    p.add_argument("--et-mode", choices=ET_MODES, default="literal")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (FormatError, StreamError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
