"""Command line: ``mimo-otfs {ber,chest,oracle}``.

Exit codes: 0 success, 1 invariant failure, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import sim
from .channel import read_profile_file
from .core import ConfigError, GridDims, SimConfig, get_alphabet, load_config

log = logging.getLogger("mimo_otfs")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mimo-otfs", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file; flags override it")
    common.add_argument("--n", type=int, help="Doppler bins N")
    common.add_argument("--m", type=int, help="delay bins M")
    common.add_argument("--ant", type=int, help="antennas per side")
    common.add_argument("--mod", help="BPSK, QPSK or 16QAM")
    common.add_argument("--seed", type=int)
    common.add_argument("--profile", help="channel profile CSV (delay_us, doppler_hz[, rx, tx, gain_re, gain_im])")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", help="write CSV here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    ber = sub.add_parser("ber", parents=[common], help="BER sweep")
    ber.add_argument("--snr-list", type=_floats, default=[6.0, 8.0, 10.0, 12.0, 14.0])
    ber.add_argument("--frames", type=int, help="minimum frames per SNR point")
    ber.add_argument("--max-frames", type=int, help="frame cap per SNR point")
    ber.add_argument("--min-errors", type=int, help="minimum bit errors per SNR point")
    ber.add_argument("--baseline", choices=["otfs", "ofdm"], default="otfs")
    ber.add_argument("--energy-keep", type=float, help="OFDM graph sparsification energy fraction")
    ber.add_argument("--estimated", action="store_true", help="detect with pilot-estimated channel")
    ber.add_argument("--pilot-offset", type=float, default=0.0, help="pilot SNR minus data SNR, dB")
    ber.add_argument("--fixed-channel", action="store_true", help="reuse one channel draw for every frame")

    chest = sub.add_parser("chest", parents=[common], help="channel-estimation error vs pilot SNR")
    chest.add_argument("--pilot-snr-list", type=_floats, default=[0.0, 4.0, 8.0, 12.0, 16.0, 20.0])
    chest.add_argument("--trials", type=int, default=200)

    sub.add_parser("oracle", help="run cross-module self-checks")
    return ap


def config_from_args(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    dims = GridDims(cfg.dims.N if args.n is None else args.n, cfg.dims.M if args.m is None else args.m, cfg.dims.delta_f)
    changes = {"dims": dims}
    if args.ant is not None:
        changes["n_a"] = args.ant
    if args.mod:
        changes["alphabet"] = get_alphabet(args.mod)
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.profile:
        profile, gains = read_profile_file(args.profile, dims)
        changes["profile"], changes["gain_override"] = profile, gains
    elif dims != cfg.dims:
        changes["profile"] = ()
    for flag, name in (("frames", "frames_per_point"), ("min_errors", "min_bit_errors"),
                       ("max_frames", "max_frames"), ("energy_keep", "energy_keep")):
        v = getattr(args, flag, None)
        if v is not None:
            changes[name] = v
    cfg = dataclasses.replace(cfg, **changes)
    if cfg.max_frames < cfg.frames_per_point:
        cfg = dataclasses.replace(cfg, max_frames=cfg.frames_per_point)
    return cfg


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.cmd == "oracle":
        report = sim.run_oracle_checks()
        print("\n".join(report.lines()))
        return 0 if report.passed else 1
    try:
        cfg = config_from_args(args)
        if args.cmd == "ber":
            spec = sim.SweepSpec(tuple(args.snr_list), cfg, args.baseline, args.estimated,
                                 args.pilot_offset, args.fixed_channel)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.cmd == "ber":
        records = sim.run_sweep(spec, workers=args.workers)
        for r in records:
            log.info("snr=%g ber=%.3e frames=%d", r.snr_db, r.ber, r.frames)
        extra = f"baseline={args.baseline} estimated={int(args.estimated)}"
        if args.estimated:
            extra += f" pilot_offset_db={args.pilot_offset} {sim.PILOT_SNR_CONVENTION}"
        _emit(sim.records_to_csv(records, cfg, extra), args.out)
    else:
        rows = sim.run_estimation_experiment(cfg, args.pilot_snr_list, args.trials, workers=args.workers)
        _emit(sim.chest_to_csv(rows, cfg), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
