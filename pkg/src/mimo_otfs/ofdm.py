"""MIMO-OFDM baseline: time-delay channel, CP insertion/removal and block DFTs.

A frame is N consecutive OFDM blocks of M subcarriers. The equivalent
frequency-domain matrix is ``D Bcpre Htd Bcpin D^H`` with a unitary DFT.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import MimoChannel, SparseChannelMatrix
from .core import ConfigError, GridDims


@dataclass(frozen=True)
class OfdmDims:
    N: int  # OFDM blocks per frame
    M: int  # subcarriers
    cp: int
    delta_f: float = 15e3

    def __post_init__(self):
        if self.cp < 0 or self.cp > self.M:
            raise ConfigError(f"cyclic prefix length {self.cp} must lie in [0, M]")

    @property
    def L(self) -> int:
        return self.M + self.cp

    @classmethod
    def for_taps(cls, dims: GridDims, taps) -> "OfdmDims":
        """CP = P - 1, lengthened to the largest delay tap when that is longer."""
        taps = list(taps)
        alpha_max = max((t.alpha for t in taps), default=0)
        return cls(dims.N, dims.M, max(len(taps) - 1, alpha_max), dims.delta_f)


def build_Htd(taps, dims: OfdmDims) -> np.ndarray:
    """Sampled time-delay channel over the NL-sample frame.

    ``Htd[r, r - alpha] = h * exp(j2pi nu r Ts)`` with ``Ts = 1/(M delta_f)`` and
    ``nu = beta / (N T)``; samples before the frame start are dropped since they
    only reach the first cyclic prefix.
    """
    taps = list(taps)
    alpha_max = max((t.alpha for t in taps), default=0)
    if alpha_max > dims.cp:
        raise ConfigError(f"largest delay tap {alpha_max} exceeds cyclic prefix {dims.cp}")
    NL = dims.N * dims.L
    r = np.arange(NL)
    H = np.zeros((NL, NL), dtype=np.complex128)
    for t in taps:
        # nu * Ts = beta / (N M) when T = 1 / delta_f
        phase = np.exp(2j * np.pi * t.beta * r / (dims.N * dims.M))
        rr = r[t.alpha:]
        H[rr, rr - t.alpha] += t.gain * phase[t.alpha:]
    return H


def dft_matrix(M: int) -> np.ndarray:
    return scipy.linalg.dft(M, scale="sqrtn")


def factor_matrices(dims: OfdmDims):
    """Return ``(D, Bcpre, Bcpin)`` for the whole frame."""
    M, cp, N = dims.M, dims.cp, dims.N
    I = np.eye(M)
    T_cp = np.vstack([I[M - cp:], I]) if cp else I
    R_cp = np.hstack([np.zeros((M, cp)), I])
    D = scipy.linalg.block_diag(*[dft_matrix(M)] * N)
    Bcpre = scipy.linalg.block_diag(*[R_cp] * N)
    Bcpin = scipy.linalg.block_diag(*[T_cp] * N)
    return D, Bcpre, Bcpin


def build_H_ofdm(Htd: np.ndarray, dims: OfdmDims) -> np.ndarray:
    """Equivalent NM x NM frequency-domain matrix, assembled block by block."""
    M, L, cp, N = dims.M, dims.L, dims.cp, dims.N
    W = dft_matrix(M)
    idx = np.arange(M)
    cp_src = np.concatenate([idx[M - cp:], idx])  # T_cp as an index map
    out = np.zeros((N * M, N * M), dtype=np.complex128)
    for n in range(N):
        rows = Htd[n * L + cp:(n + 1) * L]  # R_cp keeps the last M samples of block n
        for n2 in range(max(0, n - 1), n + 1):
            blk = rows[:, n2 * L:(n2 + 1) * L]
            if not blk.any():
                continue
            G = np.zeros((M, M), dtype=np.complex128)
            np.add.at(G.T, cp_src, blk.T)  # blk @ T_cp
            out[n * M:(n + 1) * M, n2 * M:(n2 + 1) * M] = W @ G @ W.conj().T
    return out


def build_H_mimo_ofdm(ch: MimoChannel, dims: OfdmDims) -> np.ndarray:
    D = dims.N * dims.M
    out = np.zeros((ch.n_a * D, ch.n_a * D), dtype=np.complex128)
    for q in range(ch.n_a):
        for p in range(ch.n_a):
            Hqp = build_H_ofdm(build_Htd(ch.links[q][p].taps, dims), dims)
            out[q * D:(q + 1) * D, p * D:(p + 1) * D] = Hqp
    return out


def sparsify_for_mp(H, energy_keep: float = 0.999) -> SparseChannelMatrix:
    """Keep, per row, the largest entries holding ``energy_keep`` of the row energy."""
    if not 0 < energy_keep <= 1:
        raise ValueError("energy_keep must lie in (0, 1]")
    H = np.asarray(H, dtype=np.complex128)
    P = np.abs(H) ** 2
    if energy_keep >= 1:
        mask = P > 0
    else:
        order = np.argsort(-P, axis=1, kind="stable")
        sorted_p = np.take_along_axis(P, order, axis=1)
        cum = np.cumsum(sorted_p, axis=1)
        need = energy_keep * cum[:, -1:]
        # smallest count whose cumulative energy reaches the target
        count = np.sum(cum < need, axis=1) + 1
        keep_sorted = np.arange(H.shape[1])[None, :] < count[:, None]
        mask = np.zeros_like(keep_sorted)
        np.put_along_axis(mask, order, keep_sorted, axis=1)
        mask &= P > 0
    rows, cols = np.nonzero(mask)
    return SparseChannelMatrix.from_entries(H.shape[0], rows, cols, H[rows, cols])
