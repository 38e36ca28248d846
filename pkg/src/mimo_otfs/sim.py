"""Monte Carlo BER sweeps, channel-estimation experiments and oracle self-checks.

SNR convention: unit-energy symbols and unit-power links, SNR = Es / sigma^2
per transmitted stream, so ``sigma^2 = 10**(-snr_db / 10)``.

Every frame draws its channel, symbols and noise from RNG streams keyed by
``(master_seed, frame index, purpose)``. Frame ``f`` therefore sees the same
channel and symbols at every SNR point, and results do not depend on how
frames are spread over workers.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import chanest, channel, detector, ofdm, transforms
from .core import DdGrid, GridDims, SimConfig, bpsk, stream_rng, unvectorize, vectorize

SNR_CONVENTION = "SNR=Es/sigma^2 per stream (Es=1; unit-power links); sigma^2=10^(-snr_db/10)"
PILOT_SNR_CONVENTION = "pilot_snr=A^2/(N*M*sigma^2) (pilot-frame energy per grid cell over noise variance)"

# frames per scheduling batch; fixed so the stopping point never depends on worker count
BATCH = 8


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    frames: int
    bit_errors: int
    total_bits: int
    ber: float
    mean_iterations: float
    detector: str = "otfs-mp"
    channel_knowledge: str = "perfect"
    low_confidence: bool = False

    def __post_init__(self):
        if self.total_bits and not math.isclose(self.ber, self.bit_errors / self.total_bits):
            raise ValueError("ber must equal bit_errors / total_bits")
        if not 0 <= self.ber <= 1:
            raise ValueError("ber outside [0, 1]")


@dataclass(frozen=True)
class SweepSpec:
    snr_db: tuple
    config: SimConfig = field(default_factory=SimConfig)
    baseline: str = "otfs"  # or "ofdm"
    estimated: bool = False
    pilot_snr_offset_db: float = 0.0  # pilot SNR relative to data SNR when estimating
    fixed_channel: bool = False  # reuse frame 0's channel for every frame (debugging)

    def __post_init__(self):
        snr = tuple(float(s) for s in self.snr_db)
        if not snr:
            raise ValueError("SNR list is empty")
        if any(b <= a for a, b in zip(snr, snr[1:])):
            raise ValueError("SNR list must be strictly increasing")
        if self.baseline not in ("otfs", "ofdm"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.estimated and self.baseline != "otfs":
            raise ValueError("estimated-channel mode is OTFS only")
        object.__setattr__(self, "snr_db", snr)


@dataclass(frozen=True)
class FrameResult:
    bit_errors: int
    bits: int
    iterations: int
    converged: bool


def noise_var_for(snr_db: float) -> float:
    return 0.0 if math.isinf(snr_db) and snr_db > 0 else 10 ** (-snr_db / 10)


def draw_channel(config: SimConfig, frame: int) -> channel.MimoChannel:
    if config.gain_override:
        return channel.fixed_mimo_channel(config.profile, config.n_a, config.gain_override)
    return channel.gen_random_mimo_channel(stream_rng(config.master_seed, (frame, "channel")),
                                           config.profile, config.n_a)


def run_frame(config: SimConfig, snr_db: float, frame: int, baseline: str = "otfs", estimated: bool = False,
              pilot_snr_db: float | None = None, channel_frame: int | None = None) -> FrameResult:
    """Simulate one frame: channel, symbols, noise, detection and bit-error count."""
    seed = config.master_seed
    dims = config.dims
    A = config.alphabet
    D = config.n_a * dims.size
    ch = draw_channel(config, frame if channel_frame is None else channel_frame)

    bits = stream_rng(seed, (frame, "bits")).integers(0, 2, D * A.bits_per_symbol)
    idx = A.bits_to_indices(bits)
    x = A.points[idx]
    noise_var = noise_var_for(snr_db)
    sigma = math.sqrt(noise_var)
    noise_rng = stream_rng(seed, (frame, "noise"))

    if baseline == "ofdm":
        od = ofdm.OfdmDims.for_taps(dims, ch.links[0][0].taps)
        Hd = ofdm.build_H_mimo_ofdm(ch, od)
        y = Hd @ x
        if sigma > 0:
            y = y + sigma * math.sqrt(0.5) * (noise_rng.standard_normal(D) + 1j * noise_rng.standard_normal(D))
        H_rx = ofdm.sparsify_for_mp(Hd, config.energy_keep)
        det_noise = noise_var
    else:
        H = channel.build_H_mimo(ch, dims)
        y = channel.apply_channel(H, x, sigma, noise_rng)
        H_rx, det_noise = H, noise_var
        if estimated:
            p_snr = snr_db if pilot_snr_db is None else pilot_snr_db
            amp = (math.sqrt(dims.size) if noise_var == 0
                   else chanest.pilot_amplitude(p_snr, noise_var, dims))
            plan = chanest.default_plan(dims, config.n_a, amp)
            rx = chanest.receive_pilots(ch, plan, dims, sigma, stream_rng(seed, (frame, "pilot-noise")))
            est = chanest.estimate_links(rx, plan, dims, config.threshold_sigmas)
            H_rx = chanest.assemble_H_est(est, dims, config.n_a)
            det_noise = float(np.mean(np.square(est.noise_sigma)))

    det = detector.detect_mp(y, H_rx, A, config.detector, det_noise)
    errors = int(np.count_nonzero(A.indices_to_bits(det.indices) != bits))
    return FrameResult(errors, len(bits), det.iterations, det.converged)


def _frame_job(args):
    config, snr_db, frame, baseline, estimated, pilot_snr_db, channel_frame = args
    return run_frame(config, snr_db, frame, baseline, estimated, pilot_snr_db, channel_frame)


class _Runner:
    """Maps frame jobs in order, serially or over a process pool."""

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))
        self.pool = ProcessPoolExecutor(self.workers) if self.workers > 1 else None

    def map(self, fn, jobs):
        if self.pool is None:
            return [fn(j) for j in jobs]
        return list(self.pool.map(fn, jobs))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def run_point(spec: SweepSpec, snr_db: float, runner: _Runner) -> BerRecord:
    cfg = spec.config
    pilot = snr_db + spec.pilot_snr_offset_db if spec.estimated else None
    frames = errors = nbits = iters = 0
    while True:
        jobs = [(cfg, snr_db, f, spec.baseline, spec.estimated, pilot, 0 if spec.fixed_channel else None)
                for f in range(frames, min(frames + BATCH, cfg.max_frames))]
        for r in runner.map(_frame_job, jobs):
            errors += r.bit_errors
            nbits += r.bits
            iters += r.iterations
        frames += len(jobs)
        enough = frames >= cfg.frames_per_point and errors >= cfg.min_bit_errors
        if enough or frames >= cfg.max_frames:
            break
    return BerRecord(
        snr_db=snr_db, frames=frames, bit_errors=errors, total_bits=nbits,
        ber=errors / nbits, mean_iterations=iters / frames,
        detector=f"{spec.baseline}-mp",
        channel_knowledge="estimated" if spec.estimated else "perfect",
        low_confidence=errors < cfg.min_bit_errors,
    )


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[BerRecord]:
    with _Runner(workers) as runner:
        return [run_point(spec, s, runner) for s in spec.snr_db]


# ---------------------------------------------------------------------------
# Channel estimation experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChestRow:
    pilot_snr_db: float
    trial: int
    frobenius_error: float
    false_pos: int
    false_neg: int


def estimation_trial(config: SimConfig, pilot_snr_db: float, trial: int, plan=None) -> tuple:
    """One pilot frame through a fresh channel. Returns ``(ChestRow, estimate, channel)``."""
    dims = config.dims
    ch = channel.gen_random_mimo_channel(stream_rng(config.master_seed, (trial, "chest-channel")),
                                         config.profile, config.n_a)
    # unit-energy pilot frame; the noise level sets the pilot SNR
    plan = plan or chanest.default_plan(dims, config.n_a)
    noise_var = plan.amplitude**2 / dims.size * noise_var_for(pilot_snr_db)
    rx = chanest.receive_pilots(ch, plan, dims, math.sqrt(noise_var),
                                stream_rng(config.master_seed, (trial, "chest-noise")))
    est = chanest.estimate_links(rx, plan, dims, config.threshold_sigmas)
    err = chanest.frobenius_error(channel.build_H_mimo(ch, dims), chanest.assemble_H_est(est, dims, config.n_a))
    fp, fn = chanest.support_errors(est, ch)
    return ChestRow(pilot_snr_db, trial, err, fp, fn), est, ch


def _chest_job(args):
    return estimation_trial(*args)[0]


def run_estimation_experiment(config: SimConfig, pilot_snrs, trials: int = 200, workers: int = 1) -> list[ChestRow]:
    jobs = [(config, float(s), t) for s in pilot_snrs for t in range(trials)]
    with _Runner(workers) as runner:
        return runner.map(_chest_job, jobs)


def mean_errors(rows) -> dict:
    out = {}
    for r in rows:
        out.setdefault(r.pilot_snr_db, []).append(r.frobenius_error)
    return {k: float(np.mean(v)) for k, v in out.items()}


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, config: SimConfig, extra: str = "") -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config.config_hash()} seed={config.master_seed} convention={SNR_CONVENTION}")
    buf.write(f" {extra}\n" if extra else "\n")
    cols = ["snr_db", "frames", "bit_errors", "total_bits", "ber", "mean_iterations", "detector",
            "channel_knowledge", "low_confidence"]
    buf.write(",".join(cols) + "\n")
    for r in records:
        buf.write(",".join(_fmt(getattr(r, c)) for c in cols) + "\n")
    return buf.getvalue()


def chest_to_csv(rows, config: SimConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config.config_hash()} seed={config.master_seed} convention={PILOT_SNR_CONVENTION}\n")
    cols = ["pilot_snr_db", "trial", "frobenius_error", "false_pos", "false_neg"]
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(getattr(r, c)) for c in cols) + "\n")
    return buf.getvalue()


def csv_body(text: str) -> str:
    """CSV text without its leading comment lines."""
    return "".join(ln for ln in text.splitlines(keepends=True) if not ln.startswith("#"))


def interp_snr_at_ber(records, target: float) -> float:
    """SNR where the BER curve crosses ``target`` (linear in dB vs log10 BER).

    Returns nan if the curve never crosses. Zero-error points are skipped.
    """
    pts = [(r.snr_db, r.ber) for r in records if r.bit_errors > 0]
    lt = math.log10(target)
    for (s0, b0), (s1, b1) in zip(pts, pts[1:]):
        l0, l1 = math.log10(b0), math.log10(b1)
        if l0 >= lt >= l1 and l0 != l1:
            return s0 + (l0 - lt) * (s1 - s0) / (l0 - l1)
    # crossing between the last nonzero point and a zero-error point is not resolvable
    return float("nan")


# ---------------------------------------------------------------------------
# Oracle self-checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    module: str
    max_dev: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.max_dev < self.tol)


@dataclass
class OracleReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {c.module}:{c.name} max_dev={c.max_dev:.3e} tol={c.tol:.0e}"
                for c in self.checks]


def _random_taps(rng, dims: GridDims, P: int):
    cells = rng.choice(dims.size, size=min(P, dims.size), replace=False)
    g = (rng.standard_normal(len(cells)) + 1j * rng.standard_normal(len(cells))) / math.sqrt(2 * len(cells))
    return [channel.PathTap(int(c % dims.M), int(c // dims.M), complex(h)) for c, h in zip(cells, g)]


def oracle_equivalence_dev(rng, dims: GridDims, P: int, corrupt: bool = False) -> float:
    taps = _random_taps(rng, dims, P)
    x = rng.standard_normal((dims.N, dims.M)) + 1j * rng.standard_normal((dims.N, dims.M))
    ref = transforms.oracle_apply(DdGrid(dims, x), taps).data
    H = channel.build_H_link(channel.LinkChannel(tuple(taps)), dims)
    if corrupt:
        data = H.data.copy()
        data[0] += 0.5
        H = channel.SparseChannelMatrix(H.dim, H.indptr, H.indices, data)
    got = unvectorize(H @ vectorize(DdGrid(dims, x)), dims).data
    return float(np.max(np.abs(ref - got)))


def run_oracle_checks(seed: int = 2024, trials: int = 25, corrupt: bool = False) -> OracleReport:
    """Cross-module invariants: transforms, H vs TF oracle, MP vs MAP, OFDM factor identity.

    ``corrupt=True`` perturbs one H entry to prove the equivalence check can fail.
    """
    rng = stream_rng(seed, "oracle")
    checks = []

    dev = 0.0
    for size in (4, 8, 32):
        dims = GridDims(size, size)
        for _ in range(3):
            x = DdGrid(dims, rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size)))
            dev = max(dev, np.max(np.abs(transforms.sfft(transforms.isfft(x)).data - x.data)))
            tf = transforms.TfGrid(dims, x.data)
            dev = max(dev, np.max(np.abs(transforms.wigner_rect(transforms.heisenberg_rect(tf)).data - x.data)))
    checks.append(Check("round_trips", "transforms", float(dev), 1e-12))

    dev = 0.0
    for size in (2, 4, 8, 16):
        dims = GridDims(size, size)
        for _ in range(trials):
            dev = max(dev, oracle_equivalence_dev(rng, dims, int(rng.integers(1, 6)), corrupt))
    checks.append(Check("H_vs_tf_oracle", "channel", dev, 1e-9))

    agree = 0
    n_map = 100
    dims = GridDims(2, 2)
    A = bpsk()
    for _ in range(n_map):
        taps = _random_taps(rng, dims, 2)
        H = channel.build_H_link(channel.LinkChannel(tuple(taps)), dims)
        idx = rng.integers(0, 2, dims.size)
        nv = 10 ** (-2.0)
        y = channel.apply_channel(H, A.points[idx], math.sqrt(nv), rng)
        mp = detector.detect_mp(y, H, A, detector.DetectorParams(), nv).indices
        agree += bool(np.array_equal(mp, detector.detect_map_bruteforce(y, H, A)))
    checks.append(Check("mp_vs_map_disagreement", "detector", 1 - agree / n_map, 0.05))

    dims = GridDims(8, 8)
    taps = _random_taps(rng, dims, 3)
    taps = [replace(t, alpha=t.alpha % 3) for t in taps]
    taps = list({(t.alpha, t.beta): t for t in taps}.values())
    od = ofdm.OfdmDims.for_taps(dims, taps)
    Htd = ofdm.build_Htd(taps, od)
    Dm, Bre, Bin = ofdm.factor_matrices(od)
    explicit = Dm @ Bre @ Htd @ Bin @ Dm.conj().T
    checks.append(Check("factor_identity", "ofdm", float(np.max(np.abs(explicit - ofdm.build_H_ofdm(Htd, od)))), 1e-10))
    return OracleReport(checks)
