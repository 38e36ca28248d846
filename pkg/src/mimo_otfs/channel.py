"""Sparse delay-Doppler channels and their vectorized equivalent matrices."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import ConfigError, GridDims


class FractionalTapError(ConfigError):
    """A delay or Doppler value does not sit on the integer tap grid."""


@dataclass(frozen=True)
class PathTap:
    alpha: int  # delay tap index, tau = alpha / (M delta_f)
    beta: int  # Doppler tap index, nu = beta / (N T)
    gain: complex = 1.0

    def check(self, dims: GridDims):
        if not (0 <= self.alpha < dims.M and 0 <= self.beta < dims.N):
            raise ValueError(f"tap (alpha={self.alpha}, beta={self.beta}) outside {dims.N}x{dims.M} grid")


@dataclass(frozen=True)
class LinkChannel:
    taps: tuple

    def __post_init__(self):
        taps = tuple(self.taps)
        support = [(t.alpha, t.beta) for t in taps]
        if len(set(support)) != len(support):
            raise ValueError(f"duplicate (alpha, beta) taps in link: {support}")
        object.__setattr__(self, "taps", taps)

    @property
    def support(self) -> tuple:
        return tuple((t.alpha, t.beta) for t in self.taps)


@dataclass(frozen=True)
class MimoChannel:
    """``links[q][p]`` is the channel from transmit antenna p to receive antenna q."""

    n_a: int
    links: tuple

    def __post_init__(self):
        links = tuple(tuple(row) for row in self.links)
        if len(links) != self.n_a or any(len(row) != self.n_a for row in links):
            raise ValueError(f"links must be an {self.n_a}x{self.n_a} array")
        supports = {frozenset(l.support) for row in links for l in row}
        if len(supports) != 1:
            raise ValueError("all links must share one delay-Doppler support")
        object.__setattr__(self, "links", links)

    @classmethod
    def siso(cls, taps) -> "MimoChannel":
        return cls(1, ((LinkChannel(tuple(taps)),),))


@dataclass(frozen=True, eq=False)
class SparseChannelMatrix:
    """Square complex matrix in row-compressed form, columns sorted within each row."""

    dim: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @classmethod
    def from_entries(cls, dim, rows, cols, vals) -> "SparseChannelMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.complex128)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows) > 1 and np.any((np.diff(rows) == 0) & (np.diff(cols) == 0)):
            raise ValueError("duplicate matrix entries")
        indptr = np.zeros(dim + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=dim), out=indptr[1:])
        for a in (indptr, cols, vals):
            a.flags.writeable = False
        return cls(int(dim), indptr, cols, vals)

    @classmethod
    def from_dense(cls, A, tol: float = 0.0) -> "SparseChannelMatrix":
        A = np.asarray(A)
        rows, cols = np.nonzero(np.abs(A) > tol)
        return cls.from_entries(A.shape[0], rows, cols, A[rows, cols])

    @property
    def nnz(self) -> int:
        return len(self.data)

    @property
    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.dim), np.diff(self.indptr))

    def row_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.dim)

    def row(self, r: int) -> list:
        s, e = self.indptr[r], self.indptr[r + 1]
        return list(zip(self.indices[s:e].tolist(), self.data[s:e].tolist()))

    def to_scipy(self) -> sp.csr_array:
        return sp.csr_array((self.data, self.indices, self.indptr), shape=(self.dim, self.dim))

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.dim, self.dim), dtype=np.complex128)
        A[self.rows, self.indices] = self.data
        return A

    def __matmul__(self, x):
        return self.to_scipy() @ np.asarray(x, dtype=np.complex128)


def taps_from_profile(delays, dopplers, gains, dims: GridDims, tol: float = 0.1) -> list:
    """Map physical delays (s) and Dopplers (Hz) onto integer taps.

    Raises :class:`FractionalTapError` if a value is more than ``tol`` of a tap
    away from the grid.
    """
    delays = np.asarray(delays, dtype=float)
    dopplers = np.asarray(dopplers, dtype=float)
    if gains is None:
        gains = np.ones(len(delays), dtype=complex)
    if not len(delays) == len(dopplers) == len(gains):
        raise ValueError("delays, dopplers and gains must have equal length")
    taps = []
    for tau, nu, h in zip(delays, dopplers, gains):
        a_real = tau * dims.M * dims.delta_f
        b_real = nu * dims.N * dims.T
        a, b = int(round(a_real)), int(round(b_real))
        if abs(a_real - a) > tol or abs(b_real - b) > tol:
            raise FractionalTapError(
                f"delay {tau:g} s / Doppler {nu:g} Hz is {a_real:.3f}/{b_real:.3f} taps, not an integer tap")
        if not (0 <= a < dims.M and 0 <= b < dims.N):
            raise FractionalTapError(f"tap (alpha={a}, beta={b}) falls outside one grid span")
        taps.append(PathTap(a, b, complex(h)))
    return taps


def read_profile_file(path, dims: GridDims):
    """Parse a channel-profile CSV.

    Required columns ``delay_us, doppler_hz``. Optional ``rx, tx, gain_re, gain_im``
    fix the gain of one link (or of every link when rx/tx are blank).
    Returns ``(profile, gain_override)`` in the form taken by :class:`SimConfig`.
    """
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"delay_us", "doppler_hz"} <= set(reader.fieldnames):
        raise ConfigError(f"{path}: profile needs delay_us and doppler_hz columns")
    profile, overrides = [], []
    for rec in reader:
        (tap,) = taps_from_profile([float(rec["delay_us"]) * 1e-6], [float(rec["doppler_hz"])], None, dims)
        if (tap.alpha, tap.beta) not in profile:
            profile.append((tap.alpha, tap.beta))
        if rec.get("gain_re") not in (None, ""):
            g = complex(float(rec["gain_re"]), float(rec.get("gain_im") or 0.0))
            rx, tx = rec.get("rx"), rec.get("tx")
            overrides.append((-1 if rx in (None, "") else int(rx), -1 if tx in (None, "") else int(tx),
                              tap.alpha, tap.beta, g))
    return tuple(profile), tuple(overrides)


def gen_random_mimo_channel(rng: np.random.Generator, profile, n_a: int) -> MimoChannel:
    """Rayleigh gains, variance 1/P per tap, on a fixed (alpha, beta) support."""
    profile = [tuple(p) for p in profile]
    P = len(profile)
    if P < 1:
        raise ValueError("profile needs at least one tap")
    g = (rng.standard_normal((n_a, n_a, P)) + 1j * rng.standard_normal((n_a, n_a, P))) * np.sqrt(0.5 / P)
    links = tuple(
        tuple(LinkChannel(tuple(PathTap(a, b, complex(g[q, p, i])) for i, (a, b) in enumerate(profile)))
              for p in range(n_a))
        for q in range(n_a))
    return MimoChannel(n_a, links)


def fixed_mimo_channel(profile, n_a: int, overrides) -> MimoChannel:
    """Channel with gains taken from ``overrides``; rx/tx of -1 match every link."""
    gains = {}
    for q, p, a, b, g in overrides:
        for qq in range(n_a) if q < 0 else [q]:
            for pp in range(n_a) if p < 0 else [p]:
                gains[(qq, pp, a, b)] = complex(g)
    links = tuple(
        tuple(LinkChannel(tuple(PathTap(a, b, gains.get((q, p, a, b), 0j)) for a, b in profile))
              for p in range(n_a))
        for q in range(n_a))
    return MimoChannel(n_a, links)


def effective_gain(tap: PathTap, dims: GridDims) -> complex:
    """Path gain with the e^{-j2pi nu tau} rotation folded in."""
    return complex(tap.gain * np.exp(-2j * np.pi * tap.alpha * tap.beta / (dims.N * dims.M)))


def entries_from_gains(triples, dims: GridDims):
    """Matrix entries for ``(alpha, beta, effective_gain)`` triples of one link."""
    N, M = dims.N, dims.M
    k, l = np.meshgrid(np.arange(N), np.arange(M), indexing="ij")
    k, l = k.ravel(), l.ravel()
    rows = k + N * l
    R, C, V = [], [], []
    for alpha, beta, g in triples:
        R.append(rows)
        C.append((k - beta) % N + N * ((l - alpha) % M))
        V.append(np.full(len(rows), g, dtype=np.complex128))
    if not R:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.complex128)
    return np.concatenate(R), np.concatenate(C), np.concatenate(V)


def _link_entries(link: LinkChannel, dims: GridDims):
    for t in link.taps:
        t.check(dims)
    return entries_from_gains([(t.alpha, t.beta, effective_gain(t, dims)) for t in link.taps], dims)


def build_H_link(link: LinkChannel, dims: GridDims) -> SparseChannelMatrix:
    rows, cols, vals = _link_entries(link, dims)
    return SparseChannelMatrix.from_entries(dims.size, rows, cols, vals)


def build_H_mimo(ch: MimoChannel, dims: GridDims) -> SparseChannelMatrix:
    D = dims.size
    R, C, V = [], [], []
    for q in range(ch.n_a):
        for p in range(ch.n_a):
            rows, cols, vals = _link_entries(ch.links[q][p], dims)
            R.append(rows + q * D)
            C.append(cols + p * D)
            V.append(vals)
    return SparseChannelMatrix.from_entries(ch.n_a * D, np.concatenate(R), np.concatenate(C), np.concatenate(V))


def apply_channel(H: SparseChannelMatrix, x, noise_std: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """y = H x + v with v circular complex Gaussian of variance ``noise_std**2``."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (H.dim,):
        raise ValueError(f"input length {x.shape} does not match matrix order {H.dim}")
    y = H @ x
    if noise_std > 0:
        if rng is None:
            raise ValueError("noisy channel needs an rng")
        y = y + noise_std * np.sqrt(0.5) * (rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim))
    return y
