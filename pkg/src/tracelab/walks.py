"""Continuous-time reversible random walk associated with a weighted multigraph.

The walk holds at vertex v for an exponential time with the total incident
non-loop edge weight over the vertex weight as rate, then moves along an
incident non-loop edge chosen proportionally to its weight. Loops stay in
storage but are never traversed and contribute nothing to the jump rates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    EmptyTarget,
    IsolatedVertex,
    SizeLimitExceeded,
    TraceLabError,
)
from .graphs import CEMETERY, RootedGraph, WeightedMultiGraph

DEFAULT_DENSE_CAP = 400


@dataclass(frozen=True)
class StationaryDist:
    """Invariant law of the walk, proportional to the vertex weights."""

    probs: Mapping[int, float]

    def as_array(self, order: Sequence[int]) -> np.ndarray:
        return np.array([self.probs[v] for v in order])


class Generator:
    """Jump rates and per-vertex edge choice tables for one graph.

    Immutable after construction; shareable across threads. Rows of the rate
    matrix sum to zero and the rates satisfy detailed balance with respect to
    the vertex weights.
    """

    def __init__(self, graph: WeightedMultiGraph):
        if graph.generalized:
            raise TraceLabError("walks are defined on standard graphs only")
        self.graph = graph
        self.order: tuple[int, ...] = graph.vertices
        self.index: dict[int, int] = {v: i for i, v in enumerate(self.order)}
        n = len(self.order)
        rates = np.zeros(n)
        edge_lists = []
        target_lists = []
        weight_lists = []
        for i, v in enumerate(self.order):
            es, ts, ws = [], [], []
            for e in graph.incident[v]:
                if graph.is_loop(e):
                    continue
                other = graph.other_endpoint(e, v)
                es.append(e)
                ts.append(other)
                ws.append(graph.edge_weights[e])
            alpha = graph.vertex_weights[v]
            total = float(sum(ws))
            rates[i] = total / alpha if alpha > 0 else 0.0
            edge_lists.append(np.array(es, dtype=np.int64))
            target_lists.append(np.array([self.index[t] for t in ts], dtype=np.int64))
            weight_lists.append(np.array(ws, dtype=float))
        self.rates = rates
        self._edge_lists = edge_lists
        self._target_lists = target_lists
        self._cum_lists = [
            np.cumsum(w) / w.sum() if w.size else np.empty(0) for w in weight_lists
        ]
        maxdeg = max((len(t) for t in target_lists), default=0)
        self._max_choices = maxdeg
        # padded tables for vectorized stepping
        self._cum_table = np.ones((n, max(maxdeg, 1)))
        self._target_table = np.zeros((n, max(maxdeg, 1)), dtype=np.int64)
        self._edge_table = np.full((n, max(maxdeg, 1)), -1, dtype=np.int64)
        for i in range(n):
            k = len(target_lists[i])
            if k:
                self._cum_table[i, :k] = self._cum_lists[i]
                self._cum_table[i, k:] = 1.0
                self._target_table[i, :k] = target_lists[i]
                self._target_table[i, k:] = target_lists[i][-1]
                self._edge_table[i, :k] = edge_lists[i]
                self._edge_table[i, k:] = edge_lists[i][-1]

    @property
    def n(self) -> int:
        return len(self.order)

    def rate_of(self, v: int) -> float:
        return float(self.rates[self.index[v]])

    def rate_matrix(self, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        """Dense rate matrix in vertex order; guarded by the dense cap."""
        n = self.n
        if n > dense_cap:
            raise SizeLimitExceeded(f"{n} vertices exceeds dense cap {dense_cap}")
        L = np.zeros((n, n))
        g = self.graph
        for e in g.edges:
            a, b = g.endpoints[e]
            if a is CEMETERY or b is CEMETERY or a == b:
                continue
            i, j = self.index[a], self.index[b]
            w = g.edge_weights[e]
            L[i, j] += w / g.vertex_weights[a]
            L[j, i] += w / g.vertex_weights[b]
        np.fill_diagonal(L, -L.sum(axis=1))
        return L

    def edge_weight_between(self) -> np.ndarray:
        """Symmetric matrix of total non-loop edge weight per vertex pair."""
        n = self.n
        W = np.zeros((n, n))
        g = self.graph
        for e in g.edges:
            a, b = g.endpoints[e]
            if a is CEMETERY or b is CEMETERY or a == b:
                continue
            i, j = self.index[a], self.index[b]
            W[i, j] += g.edge_weights[e]
            W[j, i] += g.edge_weights[e]
        return W


def generator(graph: WeightedMultiGraph) -> Generator:
    return Generator(graph)


def stationary(graph: WeightedMultiGraph) -> StationaryDist:
    total = graph.total_weight()
    if total <= 0:
        raise TraceLabError("graph has zero total weight")
    return StationaryDist({v: graph.vertex_weights[v] / total for v in graph.vertices})


@dataclass
class TrajectorySegment:
    """Piecewise-constant killed path: jump times, states after each jump,
    traversed edge ids, and the kill horizon."""

    start: int
    times: np.ndarray
    states: np.ndarray
    edges: np.ndarray
    horizon: float
    killed: bool = True

    @property
    def n_jumps(self) -> int:
        return len(self.times)

    def state_at(self, t: float):
        if t < 0 or (self.killed and t >= self.horizon):
            return CEMETERY
        k = int(np.searchsorted(self.times, t, side="right"))
        return self.start if k == 0 else int(self.states[k - 1])

    def range(self) -> set[int]:
        return {self.start} | {int(s) for s in self.states}

    def shifted(self, t0: float, horizon: float) -> "TrajectorySegment":
        """The path restarted at time ``t0`` and killed ``horizon`` later."""
        s0 = self.state_at(t0)
        if s0 is CEMETERY:
            raise TraceLabError("shift origin beyond the kill time")
        hi = min(t0 + horizon, self.horizon)
        mask = (self.times > t0) & (self.times < hi)
        return TrajectorySegment(
            start=int(s0),
            times=self.times[mask] - t0,
            states=self.states[mask],
            edges=self.edges[mask],
            horizon=horizon,
            killed=True,
        )

    def truncated(self, horizon: float) -> "TrajectorySegment":
        mask = self.times < horizon
        return TrajectorySegment(
            start=self.start,
            times=self.times[mask],
            states=self.states[mask],
            edges=self.edges[mask],
            horizon=min(horizon, self.horizon),
            killed=True,
        )


def _resolve_start(gen: Generator, start, rng: np.random.Generator) -> int:
    if isinstance(start, StationaryDist):
        order = gen.order
        p = start.as_array(order)
        return int(order[rng.choice(len(order), p=p / p.sum())])
    if isinstance(start, Mapping):
        keys = sorted(start)
        p = np.array([start[k] for k in keys], dtype=float)
        return int(keys[rng.choice(len(keys), p=p / p.sum())])
    return int(start)


def walk_jump_stream(gen: Generator, start: int, horizon: float, rng: np.random.Generator):
    """Yield ``(time, new_state_vertex, edge_id)`` jumps up to the horizon."""
    i = gen.index[start]
    if gen.rates[i] == 0 and horizon > 0:
        raise IsolatedVertex(f"vertex {start} has no non-loop edges")
    t = 0.0
    while True:
        rate = gen.rates[i]
        if rate == 0:
            return
        t += rng.exponential(1.0 / rate)
        if t >= horizon:
            return
        cum = gen._cum_lists[i]
        k = int(np.searchsorted(cum, rng.random(), side="right"))
        k = min(k, len(cum) - 1)
        e = int(gen._edge_lists[i][k])
        i = int(gen._target_lists[i][k])
        yield t, int(gen.order[i]), e


def simulate_walk(
    graph_or_gen: WeightedMultiGraph | Generator,
    start,
    horizon: float,
    rng: np.random.Generator,
) -> TrajectorySegment:
    """Simulate one walk killed at the horizon.

    ``start`` is a vertex id, a mapping of vertex probabilities, or a
    :class:`StationaryDist`.
    """
    gen = graph_or_gen if isinstance(graph_or_gen, Generator) else Generator(graph_or_gen)
    v0 = _resolve_start(gen, start, rng)
    if horizon < 0:
        raise TraceLabError("horizon must be nonnegative")
    times, states, edges = [], [], []
    if horizon > 0:
        for t, v, e in walk_jump_stream(gen, v0, horizon, rng):
            times.append(t)
            states.append(v)
            edges.append(e)
    return TrajectorySegment(
        start=v0,
        times=np.array(times),
        states=np.array(states, dtype=np.int64),
        edges=np.array(edges, dtype=np.int64),
        horizon=horizon,
    )


def range_of(traj: TrajectorySegment) -> set[int]:
    """Vertices visited by the trajectory, including the start."""
    return traj.range()


class BatchWalkKernel:
    """Vectorized synchronous stepping for many independent walks on one graph.

    Each call to :meth:`step` advances every listed walk by one jump; the
    caller owns times, states, and any event bookkeeping.
    """

    def __init__(self, graph_or_gen):
        gen = graph_or_gen if isinstance(graph_or_gen, Generator) else Generator(graph_or_gen)
        self.gen = gen
        self.order = gen.order
        self.index = gen.index
        self.rates = gen.rates
        if np.any((gen.rates == 0) & (np.array([len(t) for t in gen._target_lists]) == 0)):
            # zero-rate vertices are legal as long as no walk starts there
            pass

    def start_indices(self, starts: Iterable[int]) -> np.ndarray:
        return np.array([self.index[v] for v in starts], dtype=np.int64)

    def holding_times(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        rates = self.rates[states]
        if np.any(rates == 0):
            raise IsolatedVertex("walk reached a vertex with no non-loop edges")
        return rng.exponential(1.0, size=states.shape) / rates

    def next_states(self, states: np.ndarray, rng: np.random.Generator, with_edges: bool = False):
        u = rng.random(states.shape)
        cum = self.gen._cum_table[states]
        k = (u[:, None] > cum).sum(axis=1)
        nxt = self.gen._target_table[states, k]
        if with_edges:
            return nxt, self.gen._edge_table[states, k]
        return nxt

    def vertices(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(self.order, dtype=np.int64)[states]


def sample_stationary_indices(
    graph: WeightedMultiGraph, n: int, rng: np.random.Generator, gen: Generator | None = None
) -> np.ndarray:
    gen = gen or Generator(graph)
    w = np.array([graph.vertex_weights[v] for v in gen.order])
    return rng.choice(len(gen.order), size=n, p=w / w.sum())


# ---------------------------------------------------------------------------
# Exact semigroup machinery (dense-cap oracles)
# ---------------------------------------------------------------------------


class TransitionSemigroup:
    """Spectral form of the full transition semigroup for a reversible walk.

    Detailed balance makes the rate matrix symmetrizable by the square root of
    the vertex weights, so the semigroup is evaluated at any time from one
    symmetric eigendecomposition.
    """

    def __init__(self, graph: WeightedMultiGraph, dense_cap: int = DEFAULT_DENSE_CAP):
        gen = Generator(graph)
        self.gen = gen
        L = gen.rate_matrix(dense_cap)
        alpha = np.array([graph.vertex_weights[v] for v in gen.order])
        if np.any(alpha <= 0):
            raise TraceLabError("semigroup needs strictly positive vertex weights")
        s = np.sqrt(alpha)
        S = (s[:, None] * L) / s[None, :]
        S = 0.5 * (S + S.T)
        self.eigvals, self.eigvecs = np.linalg.eigh(S)
        self._s = s
        self.order = gen.order
        self.index = gen.index
        self.pi = alpha / alpha.sum()

    def matrix(self, t: float) -> np.ndarray:
        if t < 0:
            raise TraceLabError("time must be nonnegative")
        U = self.eigvecs
        core = U @ (np.exp(self.eigvals * t)[:, None] * U.T)
        P = core / self._s[:, None] * self._s[None, :]
        return P

    def mixing_distance(self, tau: float) -> float:
        P = self.matrix(tau)
        return float(0.5 * np.abs(P - self.pi[None, :]).sum(axis=1).max())


def transition_probs_exact(
    graph: WeightedMultiGraph, t: float, dense_cap: int = DEFAULT_DENSE_CAP
) -> np.ndarray:
    """Transition matrix exp(tL) by scaling-and-squaring Pade approximation.

    Rows are indexed by sorted vertex order.
    """
    if t < 0:
        raise TraceLabError("time must be nonnegative")
    L = Generator(graph).rate_matrix(dense_cap)
    return scipy.linalg.expm(t * L)


def mixing_distance(
    graph: WeightedMultiGraph, tau: float, dense_cap: int = DEFAULT_DENSE_CAP
) -> float:
    """Worst-start total variation distance to stationarity at time tau."""
    return TransitionSemigroup(graph, dense_cap).mixing_distance(tau)


def mixing_distance_mc(
    graph: WeightedMultiGraph,
    tau: float,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of the mixing distance with a 3-sigma half-width.

    Estimates the total variation distance from the worst starting vertex by
    simulating the time-tau law per start; the half-width covers the
    per-cell multinomial noise of the reported supremum.
    """
    gen = Generator(graph)
    kernel = BatchWalkKernel(gen)
    pi = stationary(graph)
    n_vertices = gen.n
    best = -1.0
    best_hw = 0.0
    for i0 in range(n_vertices):
        states = np.full(n_samples, i0, dtype=np.int64)
        t = np.zeros(n_samples)
        active = np.arange(n_samples)
        while active.size:
            t[active] += kernel.holding_times(states[active], rng)
            alive = t[active] < tau
            move = active[alive]
            if move.size:
                states[move] = kernel.next_states(states[move], rng)
            active = move
        counts = np.bincount(states, minlength=n_vertices)
        freq = counts / n_samples
        p = pi.as_array(gen.order)
        est = 0.5 * np.abs(freq - p).sum()
        if est > best:
            best = est
            best_hw = 3.0 * 0.5 * np.sqrt((freq * (1 - freq) / n_samples).sum())
    return float(best), float(best_hw)


class KilledSemigroup:
    """Spectral form of the walk killed on a target set.

    Provides survival probabilities P(T_B > t) for all starting vertices
    outside B, their stationary mixture, and entrance densities into B, all
    exactly evaluable on dense-cap graphs.
    """

    def __init__(
        self, graph: WeightedMultiGraph, target: Iterable[int], dense_cap: int = DEFAULT_DENSE_CAP
    ):
        target = frozenset(target)
        if not target:
            raise EmptyTarget("target set is empty")
        for v in target:
            if v not in graph.vertex_weights:
                raise TraceLabError(f"target vertex {v} not in graph")
        gen = Generator(graph)
        if gen.n > dense_cap:
            raise SizeLimitExceeded(f"{gen.n} vertices exceeds dense cap {dense_cap}")
        self.graph = graph
        self.gen = gen
        self.target = target
        self.complement = tuple(v for v in gen.order if v not in target)
        if not self.complement:
            self._empty_complement = True
            return
        self._empty_complement = False
        L = gen.rate_matrix(dense_cap)
        idx = [gen.index[v] for v in self.complement]
        Lsub = L[np.ix_(idx, idx)]
        alpha = np.array([graph.vertex_weights[v] for v in self.complement])
        s = np.sqrt(alpha)
        S = (s[:, None] * Lsub) / s[None, :]
        S = 0.5 * (S + S.T)
        self.eigvals, self.eigvecs = np.linalg.eigh(S)
        self._s = s
        self._alpha = alpha
        self._a_coeff = self.eigvecs.T @ s  # Phi^T D^{1/2} 1
        self.comp_index = {v: i for i, v in enumerate(self.complement)}
        W = gen.edge_weight_between()
        full_idx = {v: gen.index[v] for v in gen.order}
        self._w_rows = {
            y: np.array([W[full_idx[y], full_idx[z]] for z in self.complement])
            for y in sorted(target)
        }
        self.total_weight = graph.total_weight()

    def _modal_coeffs(self, left_row: np.ndarray) -> np.ndarray:
        """Modal coefficients of t -> left_row @ survival_vector(t)."""
        return ((left_row / self._s) @ self.eigvecs) * self._a_coeff

    def _eval_modal(self, coeffs: np.ndarray, t: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Evaluate sum_i coeffs_i exp(mu_i t_j), chunked over t to bound memory."""
        out = np.empty(t.size)
        for lo in range(0, t.size, chunk):
            hi = min(lo + chunk, t.size)
            E = np.exp(self.eigvals[:, None] * t[None, lo:hi])
            out[lo:hi] = coeffs @ E
        return out

    def survival(self, t) -> np.ndarray:
        """P(T_B > t) for every start in the complement; columns follow ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self._empty_complement:
            return np.zeros((0, t.size))
        E = np.exp(self.eigvals[:, None] * t[None, :])
        out = (self.eigvecs @ (E * self._a_coeff[:, None])) / self._s[:, None]
        return np.clip(out, 0.0, 1.0)

    def survival_from(self, z: int, t) -> np.ndarray | float:
        """P^z(T_B > t); zero when z lies in the target."""
        tarr = np.atleast_1d(np.asarray(t, dtype=float))
        if z in self.target:
            res = np.zeros(tarr.size)
        else:
            if self._empty_complement:
                res = np.zeros(tarr.size)
            else:
                row = np.zeros(len(self.complement))
                row[self.comp_index[z]] = 1.0
                res = np.clip(self._eval_modal(self._modal_coeffs(row), tarr), 0.0, 1.0)
        return float(res[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else res

    def survival_stationary(self, t) -> np.ndarray | float:
        """P^pi(T_B > t); starts inside the target contribute zero."""
        tarr = np.atleast_1d(np.asarray(t, dtype=float))
        if self._empty_complement:
            res = np.zeros(tarr.size)
        else:
            w = self._alpha / self.total_weight
            res = np.clip(self._eval_modal(self._modal_coeffs(w), tarr), 0.0, 1.0)
        return float(res[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else res

    def entrance_weight_row(self, y: int) -> np.ndarray:
        """Total edge weight from target vertex y towards each complement vertex."""
        if y not in self.target:
            raise TraceLabError(f"{y} not in target")
        return self._w_rows[y]

    def entrance_density(self, y: int, t) -> np.ndarray:
        """Density of (T_B, entry vertex = y) under the stationary start on t>0."""
        tarr = np.atleast_1d(np.asarray(t, dtype=float))
        if self._empty_complement:
            return np.zeros(tarr.size)
        coeffs = self._modal_coeffs(self.entrance_weight_row(y) / self.total_weight)
        return np.maximum(self._eval_modal(coeffs, tarr), 0.0)

    def expected_hitting_stationary(self) -> float:
        """Integral of the stationary survival function over all time."""
        if self._empty_complement:
            return 0.0
        if np.any(self.eigvals >= -1e-14):
            raise TraceLabError("killed spectrum not strictly negative; target unreachable?")
        w = self._alpha / self.total_weight
        # integral of w @ survival(t) = sum_i (w D^{-1/2} Phi)_i a_i (-1/mu_i)
        left = (w / self._s) @ self.eigvecs
        return float(np.sum(left * self._a_coeff * (-1.0 / self.eigvals)))


def hitting_tail_exact(
    graph: WeightedMultiGraph,
    target: Iterable[int],
    z: int,
    t,
    dense_cap: int = DEFAULT_DENSE_CAP,
):
    """P^z(T_B > t) via the killed semigroup; zero when z is in the target."""
    ks = KilledSemigroup(graph, target, dense_cap)
    return ks.survival_from(z, t)
