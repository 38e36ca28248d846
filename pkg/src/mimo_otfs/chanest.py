"""Impulse-pilot channel estimation in the delay-Doppler domain.

Each transmit antenna sends a single impulse of amplitude ``A``; the channel
spreads it over a small region of the receive grid that is read out directly.
Pilots are placed so their response regions (guard regions) never overlap.
Pilot SNR is ``A**2 / (N M sigma**2)``, the pilot-frame energy per grid cell over
the noise variance, i.e. the same per-cell convention used for data frames.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .channel import (MimoChannel, SparseChannelMatrix, apply_channel, build_H_mimo, effective_gain,
                      entries_from_gains)
from .core import DdGrid, GridDims, unvectorize, vectorize

MAD_TO_SIGMA = 1.4826  # Gaussian std / median absolute deviation


class PilotPlanError(ValueError):
    pass


@dataclass(frozen=True)
class PilotPlan:
    """Pilot positions ``(k, l)`` per transmit antenna, amplitude and guard extents."""

    locations: tuple
    amplitude: float = 1.0
    guard: tuple = (15, 15)  # (R_beta, R_alpha), Doppler then delay

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple((int(k), int(l)) for k, l in self.locations))
        if not self.amplitude > 0:
            raise PilotPlanError("pilot amplitude must be positive")

    def region_masks(self, dims: GridDims) -> np.ndarray:
        """Boolean (n_tx, N, M) masks of each pilot's guard region."""
        Rb, Ra = self.guard
        masks = np.zeros((len(self.locations), dims.N, dims.M), dtype=bool)
        db, da = np.arange(Rb + 1), np.arange(Ra + 1)
        for p, (k, l) in enumerate(self.locations):
            masks[p][np.ix_((k + db) % dims.N, (l + da) % dims.M)] = True
        return masks

    def validate(self, dims: GridDims, support=None):
        Rb, Ra = self.guard
        if Rb < 0 or Ra < 0 or Rb >= dims.N or Ra >= dims.M:
            raise PilotPlanError(f"guard extents {self.guard} do not fit a {dims.N}x{dims.M} grid")
        for k, l in self.locations:
            if not (0 <= k < dims.N and 0 <= l < dims.M):
                raise PilotPlanError(f"pilot ({k}, {l}) outside grid")
        if support:
            a_max = max(a for a, _ in support)
            b_max = max(b for _, b in support)
            if Rb < b_max or Ra < a_max:
                raise PilotPlanError(
                    f"guard {self.guard} smaller than channel spread (beta_max={b_max}, alpha_max={a_max})")
        if np.any(self.region_masks(dims).sum(axis=0) > 1):
            raise PilotPlanError("pilot guard regions overlap")
        return self


def default_plan(dims: GridDims, n_a: int, amplitude: float | None = None) -> PilotPlan:
    """Pilots on the grid diagonal with maximal cyclic separation.

    ``amplitude`` defaults to ``sqrt(N M)``, giving the pilot frame the same
    energy as a unit-energy data frame.
    """
    s = max(n_a, 2)
    locs = tuple((i * dims.N // s, i * dims.M // s) for i in range(n_a))
    amp = np.sqrt(dims.size) if amplitude is None else amplitude
    return PilotPlan(locs, float(amp), (dims.N // s - 1, dims.M // s - 1))


def pilot_amplitude(pilot_snr_db: float, noise_var: float, dims: GridDims) -> float:
    return float(np.sqrt(10 ** (pilot_snr_db / 10) * noise_var * dims.size))


def make_pilot_frames(plan: PilotPlan, dims: GridDims, n_a: int, support=None) -> list:
    if len(plan.locations) != n_a:
        raise PilotPlanError(f"plan has {len(plan.locations)} pilots for {n_a} antennas")
    plan.validate(dims, support)
    frames = []
    for k, l in plan.locations:
        x = np.zeros((dims.N, dims.M), dtype=np.complex128)
        x[k, l] = plan.amplitude
        frames.append(DdGrid(dims, x))
    return frames


@dataclass
class ChannelEstimate:
    """``links[(q, p)]`` lists ``(beta_offset, alpha_offset, h_eff)`` for kept cells."""

    n_a: int
    links: dict = field(default_factory=dict)
    noise_sigma: tuple = ()  # per receive antenna

    @property
    def is_empty(self) -> bool:
        return not any(self.links.values())

    def support(self, q: int, p: int) -> set:
        return {(a, b) for b, a, _ in self.links.get((q, p), [])}


def estimate_noise_sigma(grid: np.ndarray, outside: np.ndarray) -> float:
    """Complex noise std from cells outside every guard region, via scaled MAD."""
    z = grid[outside]
    if z.size == 0:
        raise PilotPlanError("no grid cells outside the guard regions; cannot estimate noise")
    parts = np.concatenate([z.real, z.imag])
    comp = MAD_TO_SIGMA * np.median(np.abs(parts - np.median(parts)))
    return float(np.sqrt(2.0) * comp)


def estimate_links(received, plan: PilotPlan, dims: GridDims, threshold_sigmas: float = 3.0) -> ChannelEstimate:
    """Read each link's response out of the guard regions of each receive grid."""
    masks = plan.region_masks(dims)
    outside = ~masks.any(axis=0)
    n_rx = len(received)
    Rb, Ra = plan.guard
    db, da = np.meshgrid(np.arange(Rb + 1), np.arange(Ra + 1), indexing="ij")
    db, da = db.ravel(), da.ravel()
    est = ChannelEstimate(len(plan.locations))
    sigmas = []
    for q in range(n_rx):
        g = received[q].data if isinstance(received[q], DdGrid) else np.asarray(received[q])
        sigma = estimate_noise_sigma(g, outside)
        sigmas.append(sigma)
        thr = threshold_sigmas * sigma
        for p, (k, l) in enumerate(plan.locations):
            vals = g[(k + db) % dims.N, (l + da) % dims.M]
            keep = (np.abs(vals) >= thr) & (np.abs(vals) > 0)
            est.links[(q, p)] = [(int(b), int(a), complex(v / plan.amplitude))
                                 for b, a, v in zip(db[keep], da[keep], vals[keep])]
    est.noise_sigma = tuple(sigmas)
    return est


def assemble_H_est(est: ChannelEstimate, dims: GridDims, n_a: int) -> SparseChannelMatrix:
    """Equivalent MIMO matrix built from estimated effective gains.

    An empty estimate yields an all-zero matrix; check ``est.is_empty``.
    """
    D = dims.size
    R, C, V = [np.zeros(0, np.int64)], [np.zeros(0, np.int64)], [np.zeros(0, np.complex128)]
    for (q, p), cells in est.links.items():
        rows, cols, vals = entries_from_gains([(a, b, h) for b, a, h in cells], dims)
        R.append(rows + q * D)
        C.append(cols + p * D)
        V.append(vals)
    return SparseChannelMatrix.from_entries(n_a * D, np.concatenate(R), np.concatenate(C), np.concatenate(V))


def frobenius_error(H_true: SparseChannelMatrix, H_est: SparseChannelMatrix) -> float:
    if H_true.dim != H_est.dim:
        raise ValueError(f"matrix orders differ: {H_true.dim} vs {H_est.dim}")
    return float(scipy.sparse.linalg.norm(H_true.to_scipy() - H_est.to_scipy(), "fro"))


def support_errors(est: ChannelEstimate, ch: MimoChannel) -> tuple[int, int]:
    """(false positives, false negatives) of the estimated tap support over all links."""
    fp = fn = 0
    for q in range(ch.n_a):
        for p in range(ch.n_a):
            true = set(ch.links[q][p].support)
            got = est.support(q, p)
            fp += len(got - true)
            fn += len(true - got)
    return fp, fn


def true_estimate(ch: MimoChannel, dims: GridDims) -> ChannelEstimate:
    """The estimate a noiseless pilot frame would produce (for comparisons)."""
    est = ChannelEstimate(ch.n_a)
    for q in range(ch.n_a):
        for p in range(ch.n_a):
            est.links[(q, p)] = [(t.beta, t.alpha, effective_gain(t, dims)) for t in ch.links[q][p].taps]
    return est


def receive_pilots(ch: MimoChannel, plan: PilotPlan, dims: GridDims, noise_std: float, rng=None) -> list:
    """Send the pilot frames of ``plan`` through ``ch``; one DdGrid per receive antenna."""
    frames = make_pilot_frames(plan, dims, ch.n_a, ch.links[0][0].support)
    x = np.concatenate([vectorize(f) for f in frames])
    y = apply_channel(build_H_mimo(ch, dims), x, noise_std, rng)
    D = dims.size
    return [unvectorize(y[q * D:(q + 1) * D], dims) for q in range(ch.n_a)]
