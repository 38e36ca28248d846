"""MIMO-OTFS link simulation: delay-Doppler channels, message-passing detection,
impulse-pilot channel estimation and a MIMO-OFDM baseline."""

from .core import Alphabet, DdGrid, GridDims, SimConfig, stream_rng, vectorize, unvectorize
from .channel import MimoChannel, PathTap, SparseChannelMatrix, build_H_link, build_H_mimo
from .detector import DetectorParams, detect_mp, detect_map_bruteforce

__version__ = "0.1.0"
