"""Shared types: grid dimensions, vectorization, alphabets, configuration, RNG streams."""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised for an invalid simulation configuration."""


@dataclass(frozen=True)
class GridDims:
    """Delay-Doppler grid: ``N`` Doppler bins by ``M`` delay bins."""

    N: int
    M: int
    delta_f: float = 15e3

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M}")
        if not self.delta_f > 0:
            raise ConfigError(f"delta_f must be positive, got {self.delta_f}")

    @property
    def T(self) -> float:
        return 1.0 / self.delta_f

    @property
    def size(self) -> int:
        return self.N * self.M

    @property
    def delay_resolution(self) -> float:
        return 1.0 / (self.M * self.delta_f)

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.N * self.T)


@dataclass(frozen=True, eq=False)
class DdGrid:
    """N x M complex frame indexed ``data[k, l]`` (Doppler k, delay l)."""

    dims: GridDims
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.shape != (self.dims.N, self.dims.M):
            raise ValueError(f"grid shape {data.shape} != ({self.dims.N}, {self.dims.M})")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, dims: GridDims) -> "DdGrid":
        return cls(dims, np.zeros((dims.N, dims.M), dtype=np.complex128))


def vec_index(k: int, l: int, dims: GridDims) -> int:
    if not (0 <= k < dims.N and 0 <= l < dims.M):
        raise IndexError(f"(k={k}, l={l}) outside {dims.N}x{dims.M} grid")
    return k + dims.N * l


def unvec_index(r: int, dims: GridDims) -> tuple[int, int]:
    if not 0 <= r < dims.size:
        raise IndexError(f"vector index {r} outside [0, {dims.size})")
    return r % dims.N, r // dims.N


def vectorize(frame: DdGrid) -> np.ndarray:
    # column-major flattening puts x[k, l] at k + N*l
    return frame.data.flatten(order="F")


def unvectorize(v, dims: GridDims) -> DdGrid:
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (dims.size,):
        raise ValueError(f"vector of shape {v.shape} cannot fill a {dims.N}x{dims.M} grid")
    return DdGrid(dims, v.reshape((dims.N, dims.M), order="F"))


# ---------------------------------------------------------------------------
# Alphabets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Alphabet:
    """Unit-energy constellation. ``points[j]`` carries the bits of ``j`` (MSB first)."""

    name: str
    points: np.ndarray
    bits_per_symbol: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).copy()
        if len(pts) != 2**self.bits_per_symbol:
            raise ValueError("alphabet size must be 2**bits_per_symbol")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, Alphabet):
            return NotImplemented
        return (self.name, self.bits_per_symbol) == (other.name, other.bits_per_symbol) and np.array_equal(
            self.points, other.points)

    def __hash__(self):
        return hash((self.name, self.bits_per_symbol, self.points.tobytes()))

    @property
    def bit_table(self) -> np.ndarray:
        """(|A|, bits_per_symbol) array of the bits carried by each point."""
        j = np.arange(len(self.points))[:, None]
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)[None, :]
        return ((j >> shifts) & 1).astype(np.uint8)

    def bits_to_indices(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return bits @ weights

    def indices_to_bits(self, idx) -> np.ndarray:
        return self.bit_table[np.asarray(idx)].reshape(-1)


def _gray_pam(bits_per_axis: int) -> np.ndarray:
    """Gray-labelled PAM levels indexed by label."""
    n = 2**bits_per_axis
    levels = np.arange(-(n - 1), n, 2, dtype=float)
    out = np.empty(n)
    for pos in range(n):
        out[pos ^ (pos >> 1)] = levels[pos]
    return out


def bpsk() -> Alphabet:
    return Alphabet("BPSK", np.array([1.0, -1.0]), 1)


def qpsk() -> Alphabet:
    pam = _gray_pam(1)
    pts = np.array([pam[j >> 1] + 1j * pam[j & 1] for j in range(4)]) / np.sqrt(2)
    return Alphabet("QPSK", pts, 2)


def qam16() -> Alphabet:
    pam = _gray_pam(2)
    pts = np.array([pam[j >> 2] + 1j * pam[j & 3] for j in range(16)]) / np.sqrt(10)
    return Alphabet("16QAM", pts, 4)


ALPHABETS = {"BPSK": bpsk, "QPSK": qpsk, "16QAM": qam16}


def get_alphabet(name: str) -> Alphabet:
    try:
        return ALPHABETS[name.upper()]()
    except KeyError:
        raise ConfigError(f"unknown modulation {name!r}; choose from {sorted(ALPHABETS)}") from None


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


def _tag_id(tag) -> int:
    if isinstance(tag, str):
        return zlib.crc32(tag.encode())
    return int(tag)


def stream_rng(master_seed: int, stream_id) -> np.random.Generator:
    """Independent generator keyed by ``(master_seed, stream_id)``.

    ``stream_id`` is a tuple of integers and/or string tags, e.g. ``(frame, "noise")``.
    The same key always gives the same stream, independent of call order.
    """
    if not isinstance(stream_id, tuple):
        stream_id = (stream_id,)
    key = tuple(_tag_id(t) for t in stream_id)
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectorParams:
    delta: float = 0.5
    n_iter_max: int = 30
    epsilon: float = 0.01

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ConfigError(f"damping factor must lie in (0, 1], got {self.delta}")
        if self.n_iter_max < 1:
            raise ConfigError("n_iter_max must be >= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")


# default 5-path delay-Doppler profile (integer taps at N = M = 32, delta_f = 15 kHz)
REFERENCE_DELAYS_US = (2.08, 4.164, 6.246, 8.328, 10.41)
REFERENCE_DOPPLERS_HZ = (0.0, 470.0, 940.0, 1410.0, 1880.0)


@dataclass(frozen=True)
class SimConfig:
    dims: GridDims = field(default_factory=lambda: GridDims(32, 32, 15e3))
    n_a: int = 2
    alphabet: Alphabet = field(default_factory=bpsk)
    profile: tuple = ()  # (alpha, beta) pairs; empty means the reference profile
    detector: DetectorParams = field(default_factory=DetectorParams)
    master_seed: int = 1
    frames_per_point: int = 100
    min_bit_errors: int = 100
    max_frames: int = 2000
    energy_keep: float = 0.999
    threshold_sigmas: float = 3.0
    gain_override: tuple = ()  # ((rx, tx, alpha, beta, gain), ...) fixes link gains

    def __post_init__(self):
        if self.n_a < 1:
            raise ConfigError("n_a must be >= 1")
        if not self.profile:
            from .channel import taps_from_profile

            delays = [d * 1e-6 for d in REFERENCE_DELAYS_US]
            taps = taps_from_profile(delays, REFERENCE_DOPPLERS_HZ, None, self.dims)
            object.__setattr__(self, "profile", tuple((t.alpha, t.beta) for t in taps))
        prof = tuple((int(a), int(b)) for a, b in self.profile)
        if len(set(prof)) != len(prof):
            raise ConfigError("profile contains duplicate (alpha, beta) taps")
        for a, b in prof:
            if not (0 <= a < self.dims.M and 0 <= b < self.dims.N):
                raise ConfigError(f"tap (alpha={a}, beta={b}) outside the grid")
        object.__setattr__(self, "profile", prof)
        if not 0 < self.energy_keep <= 1:
            raise ConfigError("energy_keep must lie in (0, 1]")
        if self.frames_per_point < 1 or self.max_frames < 1:
            raise ConfigError("frame counts must be positive")

    def to_dict(self) -> dict:
        return {
            "n": self.dims.N,
            "m": self.dims.M,
            "delta_f_hz": self.dims.delta_f,
            "n_a": self.n_a,
            "modulation": self.alphabet.name,
            "profile": [list(p) for p in self.profile],
            "delta": self.detector.delta,
            "n_iter_max": self.detector.n_iter_max,
            "epsilon": self.detector.epsilon,
            "seed": self.master_seed,
            "frames_per_point": self.frames_per_point,
            "min_bit_errors": self.min_bit_errors,
            "max_frames": self.max_frames,
            "energy_keep": self.energy_keep,
            "threshold_sigmas": self.threshold_sigmas,
            "gain_override": [[q, p, a, b, [complex(g).real, complex(g).imag]]
                              for q, p, a, b, g in self.gain_override],
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return f"{zlib.crc32(blob):08x}"


def config_from_dict(d: dict) -> SimConfig:
    known = {"n", "m", "delta_f_hz", "n_a", "modulation", "profile", "delta", "n_iter_max",
             "epsilon", "seed", "frames_per_point", "min_bit_errors", "max_frames",
             "energy_keep", "threshold_sigmas", "gain_override"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        dims = GridDims(int(d.get("n", 32)), int(d.get("m", 32)), float(d.get("delta_f_hz", 15e3)))
        det = DetectorParams(float(d.get("delta", 0.5)), int(d.get("n_iter_max", 30)),
                             float(d.get("epsilon", 0.01)))
        gains = tuple((int(q), int(p), int(a), int(b), complex(g[0], g[1]))
                      for q, p, a, b, g in d.get("gain_override", ()))
        return SimConfig(
            dims=dims,
            n_a=int(d.get("n_a", 2)),
            alphabet=get_alphabet(d.get("modulation", "BPSK")),
            profile=tuple(tuple(p) for p in d.get("profile", ())),
            detector=det,
            master_seed=int(d.get("seed", 1)),
            frames_per_point=int(d.get("frames_per_point", 100)),
            min_bit_errors=int(d.get("min_bit_errors", 100)),
            max_frames=int(d.get("max_frames", 2000)),
            energy_keep=float(d.get("energy_keep", 0.999)),
            threshold_sigmas=float(d.get("threshold_sigmas", 3.0)),
            gain_override=gains,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    """Read a flat JSON key-value config file."""
    with open(Path(path)) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(d)


def db2lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
