"""OTFS transform chain with rectangular pulses, plus a TF-domain channel oracle.

Normalization: ISFFT carries 1/(MN), SFFT is unnormalized; Heisenberg is
unnormalized and Wigner carries 1/M so that the TF round trip is exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DdGrid, GridDims


class TfGrid(DdGrid):
    """N x M time-frequency grid indexed ``data[n, m]`` (symbol n, subcarrier m)."""


@dataclass(frozen=True, eq=False)
class TimeFrame:
    dims: GridDims
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.shape != (self.dims.size,):
            raise ValueError(f"time frame needs {self.dims.size} samples, got {s.shape}")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def sample_period(self) -> float:
        return 1.0 / (self.dims.M * self.dims.delta_f)


def _phase_tables(dims: GridDims):
    n = np.arange(dims.N)
    m = np.arange(dims.M)
    doppler = np.exp(2j * np.pi * np.outer(n, n) / dims.N)  # [n, k] -> e^{j2pi nk/N}
    delay = np.exp(-2j * np.pi * np.outer(m, m) / dims.M)  # [m, l] -> e^{-j2pi ml/M}
    return doppler, delay


def isfft(x: DdGrid, method: str = "fft") -> TfGrid:
    N, M = x.dims.N, x.dims.M
    if method == "direct":
        dop, dly = _phase_tables(x.dims)
        # X[n,m] = 1/MN sum_k sum_l x[k,l] e^{j2pi nk/N} e^{-j2pi ml/M}
        X = np.einsum("nk,kl,ml->nm", dop, x.data, dly) / (M * N)
    else:
        X = np.fft.ifft(np.fft.fft(x.data, axis=1), axis=0) / M
    return TfGrid(x.dims, X)


def sfft(X: DdGrid, method: str = "fft") -> DdGrid:
    M = X.dims.M
    if method == "direct":
        dop, dly = _phase_tables(X.dims)
        x = np.einsum("nk,nm,ml->kl", dop.conj(), X.data, dly.conj())
    else:
        x = np.fft.fft(np.fft.ifft(X.data, axis=1), axis=0) * M
    return DdGrid(X.dims, x)


def heisenberg_rect(X: TfGrid) -> TimeFrame:
    """Sampled Heisenberg transform: s[nM + q] = sum_m X[n, m] e^{j2pi mq/M}."""
    M = X.dims.M
    s = np.fft.ifft(X.data, axis=1) * M
    return TimeFrame(X.dims, s.reshape(-1))


def wigner_rect(y: TimeFrame) -> TfGrid:
    """Sampled Wigner transform, the exact inverse of :func:`heisenberg_rect`."""
    N, M = y.dims.N, y.dims.M
    Y = np.fft.fft(y.samples.reshape(N, M), axis=1) / M
    return TfGrid(y.dims, Y)


def tf_channel_gains(taps, dims: GridDims) -> TfGrid:
    """Multiplicative TF channel H[n, m] for integer delay-Doppler taps."""
    n = np.arange(dims.N)[:, None]
    m = np.arange(dims.M)[None, :]
    H = np.zeros((dims.N, dims.M), dtype=np.complex128)
    for t in taps:
        nu = t.beta / (dims.N * dims.T)
        tau = t.alpha / (dims.M * dims.delta_f)
        H += t.gain * np.exp(2j * np.pi * nu * n * dims.T) * np.exp(-2j * np.pi * (nu + m * dims.delta_f) * tau)
    return TfGrid(dims, H)


def oracle_apply(x: DdGrid, taps) -> DdGrid:
    """Noiseless end-to-end OTFS channel computed through the TF domain."""
    H = tf_channel_gains(taps, x.dims)
    X = isfft(x)
    return sfft(TfGrid(x.dims, H.data * X.data))
