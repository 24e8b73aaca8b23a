"""Command line entry point: ``daleforge simulate | meter | validate``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error (parse or
consistency), 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from daleforge import __version__
from daleforge.datasets import list_chunks, read_calibration, read_house, write_house, write_mains
from daleforge.errors import ConsistencyError, DaleForgeError, InvalidArgument, ParseError
from daleforge.household import load_house_config
from daleforge.pipeline import DEFAULT_EPOCH, build_scenario, meter_directory, write_waveforms
from daleforge.presets import PRESETS, get_preset
from daleforge.stats import LARGE_GAP_SECONDS, report, write_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

LOG_ENV = "DALE_FORGE_LOG"
log = logging.getLogger("daleforge")

_UNITS = {"s": 1, "m": 60, "h": 3600, "d": 86400}


class UsageError(DaleForgeError):
    pass


def parse_duration(text: str) -> int:
    """Whole seconds from ``"3600"``, ``"90m"``, ``"12h"`` or ``"7d"``."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([smhd]?)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}; use e.g. 3600, 90m, 12h or 7d")
    seconds = float(m.group(1)) * _UNITS[m.group(2) or "s"]
    if seconds < 2 or seconds != int(seconds):
        raise argparse.ArgumentTypeError("duration must be a whole number of seconds, at least 2")
    return int(seconds)


def _configure_logging() -> None:
    level = os.environ.get(LOG_ENV, "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = int(np.random.SeedSequence().generate_state(1)[0])
    print(f"seed: {seed}")
    return seed


def _house_config(args):
    if args.config and args.house_preset:
        raise UsageError("give either --config or --house-preset, not both")
    if args.config:
        return load_house_config(args.config)
    try:
        return get_preset(args.house_preset or "small")
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    cfg = _house_config(args)
    sim_overrides = {}
    if args.bit_flip_probability is not None:
        sim_overrides["bit_flip_probability"] = args.bit_flip_probability
    scenario = build_scenario(
        cfg,
        args.duration,
        seed,
        house_number=args.house_number,
        epoch=args.epoch,
        sim_overrides=sim_overrides,
        with_mains=not args.no_mains,
    )
    out = write_house(scenario.dataset, args.out)
    if args.rf_log:
        with open(args.rf_log, "w") as fh:
            scenario.sim.write_log(fh)
    if args.waveform_seconds:
        wave_dir = Path(args.out) / f"waveforms_{args.house_number}"
        write_waveforms(
            scenario.trajectory,
            wave_dir,
            min(args.waveform_seconds, args.duration),
            scenario.dataset.calibration,
            epoch=args.epoch,
        )
        print(f"waveforms: {wave_dir}")
    sim = scenario.sim
    print(f"house: {out}")
    print(f"channels: {len(scenario.dataset.channels)}")
    print(f"radio dropout: iam={sim.dropout_rate('iam'):.5f} cctx={sim.dropout_rate('cctx'):.5f}")
    return EXIT_OK


def cmd_meter(args) -> int:
    _resolve_seed(args.seed)
    if not args.calibration:
        raise UsageError("meter needs --calibration; raw ADC values cannot be converted without it")
    calib = read_calibration(args.calibration)
    if not list_chunks(args.waveforms):
        raise UsageError(f"no vi-*.wav chunks in {args.waveforms}")
    mains = meter_directory(args.waveforms, calib, args.chunk_period)
    out = Path(args.out)
    if out.is_dir():
        out = out / "mains.dat"
    write_mains(mains, out)
    print(f"mains: {out} ({len(mains)} rows)")
    return EXIT_OK


def _house_dirs(root: Path) -> list[Path]:
    if re.fullmatch(r"house_\d+", root.name) and root.is_dir():
        return [root]
    found = sorted(p for p in root.glob("house_*") if p.is_dir() and re.fullmatch(r"house_\d+", p.name))
    if not found:
        raise FileNotFoundError(f"no house_<x> directories under {root}")
    return found


def cmd_validate(args) -> int:
    _resolve_seed(args.seed)
    for path in _house_dirs(Path(args.root)):
        dataset = read_house(path)
        bundle = report(dataset, large_gap_threshold=args.large_gap_threshold)
        print(f"[{path.name}]")
        sys.stdout.write(bundle.report.to_text())
        if args.out:
            write_report(bundle, Path(args.out) / path.name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daleforge", description="Synthetic household electricity dataset toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed; generated and printed when omitted")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="synthesise a house and write its dataset directory")
    sim.add_argument("--config", help="house configuration file (YAML)")
    sim.add_argument("--house-preset", choices=sorted(PRESETS), help="built-in house (default: small)")
    sim.add_argument("--out", required=True, help="dataset root; house_<x>/ is created inside")
    sim.add_argument("--duration", type=parse_duration, default=86400, help="simulated time, e.g. 3600, 12h, 7d")
    sim.add_argument("--house-number", type=int, default=1)
    sim.add_argument("--epoch", type=float, default=DEFAULT_EPOCH, help="unix time of the first sample")
    sim.add_argument("--no-mains", action="store_true", help="skip mains.dat and calibration.cfg")
    sim.add_argument("--bit-flip-probability", type=float)
    sim.add_argument("--rf-log", help="write every received packet and loss as JSON lines")
    sim.add_argument("--waveform-seconds", type=int, default=0, help="also render this many seconds of mains waveform")
    sim.set_defaults(func=cmd_simulate)

    met = sub.add_parser("meter", parents=[common], help="compute mains.dat from waveform chunks")
    met.add_argument("waveforms", help="directory of vi-*.wav chunks")
    met.add_argument("--calibration", help="calibration.cfg with the ADC step constants")
    met.add_argument("--out", required=True, help="output file, or a directory to receive mains.dat")
    met.add_argument("--chunk-period", type=float, default=1.0, help="seconds per output row")
    met.set_defaults(func=cmd_meter)

    val = sub.add_parser("validate", parents=[common], help="check a dataset and print summary statistics")
    val.add_argument("root", help="a house_<x> directory or a directory containing them")
    val.add_argument("--out", help="directory for report.txt and CSV tables")
    val.add_argument("--large-gap-threshold", type=float, default=LARGE_GAP_SECONDS)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (ParseError, ConsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DaleForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
