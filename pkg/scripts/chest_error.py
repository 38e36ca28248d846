"""Mean Frobenius channel-estimation error vs pilot SNR, plus estimated-CSI BER."""
import argparse
import dataclasses
from pathlib import Path

from mimo_otfs import sim
from mimo_otfs.core import SimConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pilot-snr", type=float, nargs="+", default=[0, 4, 8, 12, 16, 20])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--ber-snr", type=float, nargs="*", default=[2, 4, 6, 8, 10],
                    help="also sweep BER with estimated and perfect CSI (empty to skip)")
    ap.add_argument("--frames", type=int, default=100)
    ap.add_argument("--max-frames", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    cfg = dataclasses.replace(SimConfig(), master_seed=args.seed, frames_per_point=args.frames,
                              max_frames=max(args.max_frames, args.frames))
    rows = sim.run_estimation_experiment(cfg, args.pilot_snr, args.trials, workers=args.workers)
    (args.out / "chest_2x2.csv").write_text(sim.chest_to_csv(rows, cfg))
    for snr, err in sim.mean_errors(rows).items():
        print(f"pilot {snr:g} dB: mean Frobenius error {err:.3f}")

    if args.ber_snr:
        for estimated in (False, True):
            recs = sim.run_sweep(sim.SweepSpec(tuple(args.ber_snr), cfg, estimated=estimated), workers=args.workers)
            tag = "estimated" if estimated else "perfect"
            (args.out / f"otfs_2x2_{tag}.csv").write_text(sim.records_to_csv(recs, cfg, f"csi={tag}"))
            print(tag, f"SNR at 1e-4: {sim.interp_snr_at_ber(recs, 1e-4):.2f} dB")


if __name__ == "__main__":
    main()
