"""Damped message-passing detection on the sparse factor graph of y = Hx + v.

Interference at each observation node is approximated as Gaussian; variable
nodes return damped symbol pmfs. A brute-force MAP detector is included as a
reference for small problems.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import SparseChannelMatrix
from .core import Alphabet, DetectorParams

__all__ = [
    "DetectorParams", "FactorGraph", "MessageState", "Detection", "build_factor_graph",
    "obs_messages", "var_messages", "damp", "detect_mp", "detect_map_bruteforce",
]

# floor on noise variance so noiseless runs do not divide by zero
NOISE_VAR_FLOOR = 1e-12
# per-edge log-likelihoods below this are already zero after exp(); clipping
# keeps the leave-one-out subtraction well conditioned
LOGLIK_CLIP = -1e4
MAP_MAX_CANDIDATES = 2**20


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Bipartite graph with one edge per nonzero H[b, c].

    Edges are stored in row order: ``obs[e]`` is the observation node,
    ``var[e]`` the variable node and ``h[e]`` the coupling coefficient.
    """

    n_obs: int
    n_var: int
    obs: np.ndarray
    var: np.ndarray
    h: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.obs)

    def zeta_b(self, b: int) -> np.ndarray:
        """Variable nodes attached to observation ``b``."""
        return self.var[self.obs == b]

    def zeta_a(self, a: int) -> np.ndarray:
        """Observation nodes attached to variable ``a``."""
        return self.obs[self.var == a]

    def obs_degrees(self) -> np.ndarray:
        return np.bincount(self.obs, minlength=self.n_obs)

    def var_degrees(self) -> np.ndarray:
        return np.bincount(self.var, minlength=self.n_var)


@dataclass
class MessageState:
    p: np.ndarray  # (E, |A|) pmf sent from var[e] to obs[e]
    mu: np.ndarray  # (E,) interference mean sent from obs[e] to var[e]
    var: np.ndarray  # (E,) interference-plus-noise variance
    noise_var: float

    @classmethod
    def initial(cls, graph: FactorGraph, alphabet: Alphabet, noise_var: float) -> "MessageState":
        E, Q = graph.n_edges, len(alphabet)
        return cls(np.full((E, Q), 1.0 / Q), np.zeros(E, complex), np.full(E, noise_var), noise_var)


@dataclass(frozen=True)
class Detection:
    indices: np.ndarray
    iterations: int
    converged: bool


def build_factor_graph(H: SparseChannelMatrix) -> FactorGraph:
    obs = H.rows
    var = np.asarray(H.indices, dtype=np.int64)
    return FactorGraph(H.dim, H.dim, obs, var, np.asarray(H.data, dtype=np.complex128))


def _segment_sum(idx, w, n):
    if np.iscomplexobj(w):
        return np.bincount(idx, w.real, n) + 1j * np.bincount(idx, w.imag, n)
    return np.bincount(idx, w, n)


def obs_messages(state: MessageState, graph: FactorGraph, y, alphabet: Alphabet):
    """Gaussian interference mean and variance for every observation-to-variable edge."""
    pts = alphabet.points
    mean_sym = state.p @ pts
    energy = state.p @ (np.abs(pts) ** 2)
    m = mean_sym * graph.h
    v = np.maximum(energy * np.abs(graph.h) ** 2 - np.abs(m) ** 2, 0.0)
    S = _segment_sum(graph.obs, m, graph.n_obs)
    V = _segment_sum(graph.obs, v, graph.n_obs)
    mu = S[graph.obs] - m
    var = np.maximum(V[graph.obs] - v, 0.0) + state.noise_var
    state.mu, state.var = mu, var
    return mu, var


def edge_loglik(state: MessageState, graph: FactorGraph, y, alphabet: Alphabet) -> np.ndarray:
    """log Pr(y_b | x_a = a_j) up to a per-edge constant, shape (E, |A|)."""
    resid = (np.asarray(y)[graph.obs] - state.mu)[:, None] - graph.h[:, None] * alphabet.points[None, :]
    L = -(np.abs(resid) ** 2) / state.var[:, None]
    L -= L.max(axis=1, keepdims=True)
    return np.maximum(L, LOGLIK_CLIP)


def _column_sums(graph: FactorGraph, L: np.ndarray) -> np.ndarray:
    return np.stack([np.bincount(graph.var, L[:, j], graph.n_var) for j in range(L.shape[1])], axis=1)


def _softmax(L):
    L = L - L.max(axis=1, keepdims=True)
    P = np.exp(L)
    return P / P.sum(axis=1, keepdims=True)


def damp(raw, prev, delta: float):
    return delta * np.asarray(raw) + (1.0 - delta) * np.asarray(prev)


def var_messages(state: MessageState, graph: FactorGraph, y, alphabet: Alphabet, params: DetectorParams):
    """Extrinsic symbol pmfs for every variable-to-observation edge, damped.

    Returns ``(new_p, max_change)``; ``state.p`` is updated in place.
    """
    L = edge_loglik(state, graph, y, alphabet)
    C = _column_sums(graph, L)
    raw = _softmax(C[graph.var] - L)
    new_p = damp(raw, state.p, params.delta)
    change = float(np.max(np.abs(new_p - state.p))) if new_p.size else 0.0
    state.p = new_p
    return new_p, change


def symbol_beliefs(state: MessageState, graph: FactorGraph, y, alphabet: Alphabet) -> np.ndarray:
    """Log of the full-neighbourhood product used for the final decision, (n_var, |A|)."""
    L = edge_loglik(state, graph, y, alphabet)
    return _column_sums(graph, L)


def detect_mp(y, H, alphabet: Alphabet, params: DetectorParams = DetectorParams(),
              noise_var: float = 0.0, graph: FactorGraph | None = None) -> Detection:
    """Detect ``x`` from ``y = H x + v``; ``noise_var`` is the per-element noise variance."""
    graph = graph or build_factor_graph(H)
    y = np.asarray(y, dtype=np.complex128)
    state = MessageState.initial(graph, alphabet, max(float(noise_var), NOISE_VAR_FLOOR))
    converged = False
    it = 0
    for it in range(1, params.n_iter_max + 1):
        obs_messages(state, graph, y, alphabet)
        _, change = var_messages(state, graph, y, alphabet, params)
        if change < params.epsilon:
            converged = True
            break
    # decide with the observation messages of the last iteration
    beliefs = symbol_beliefs(state, graph, y, alphabet)
    # argmax returns the first maximum, i.e. the lowest alphabet index on ties
    return Detection(np.argmax(beliefs, axis=1), it, converged)


def detect_map_bruteforce(y, H, alphabet: Alphabet, chunk: int = 4096) -> np.ndarray:
    """Exhaustive minimizer of ||y - Hx||^2 over all symbol vectors."""
    Hd = H.to_dense() if isinstance(H, SparseChannelMatrix) else np.asarray(H, dtype=np.complex128)
    dim = Hd.shape[1]
    Q = len(alphabet)
    if Q**dim > MAP_MAX_CANDIDATES:
        raise ValueError(f"MAP search over {Q}^{dim} candidates exceeds the {MAP_MAX_CANDIDATES} limit")
    y = np.asarray(y, dtype=np.complex128)
    best, best_idx = np.inf, None
    cands = itertools.product(range(Q), repeat=dim)
    while True:
        block = np.array(list(itertools.islice(cands, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        X = alphabet.points[block]
        cost = np.sum(np.abs(y[None, :] - X @ Hd.T) ** 2, axis=1)
        j = int(np.argmin(cost))
        if cost[j] < best:
            best, best_idx = cost[j], block[j]
    return best_idx
