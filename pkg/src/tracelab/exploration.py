"""Exploration rules and processes, the coupled pairing/tree exploration, and
empirical local-convergence estimation.

An exploration grows a disclosed vertex set from the root one chosen edge at a
time; rules see only the disclosed generalized graph plus the edge history, so
their output law is isomorphism-invariant. Proper rules always pick an edge
hanging off the frontier while one exists.
"""
from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AcceptanceTooLow,
    ClassExplosion,
    OddDegreeSum,
    TraceLabError,
)
from .graphs import (
    CEMETERY,
    RootedGraph,
    WeightedMultiGraph,
    build_graph,
    canonical_key,
    disclosed_subgraph,
)
from .generators import DegreeSequence, gw_survival
from .walks import Generator, simulate_walk


@dataclass
class Exploration:
    """Disclosed portion of a rooted graph together with the edge history."""

    source: WeightedMultiGraph
    root: int
    disclosed: set[int]
    history: list[int] = field(default_factory=list)

    def frontier_edges(self) -> list[int]:
        out = []
        seen = set()
        for v in self.disclosed:
            for e in self.source.incident[v]:
                if e in seen:
                    continue
                seen.add(e)
                a, b = self.source.endpoints[e]
                ends = [x for x in (a, b) if x is not CEMETERY]
                if any(x not in self.disclosed for x in ends) or CEMETERY in (a, b):
                    out.append(e)
        return sorted(out)

    def internal_distances(self) -> dict[int, int]:
        """Hop distances from the root using fully disclosed edges only."""
        dist = {self.root: 0}
        queue = deque([self.root])
        while queue:
            v = queue.popleft()
            for e in self.source.incident[v]:
                a, b = self.source.endpoints[e]
                for w in (a, b):
                    if (
                        w is not CEMETERY
                        and w in self.disclosed
                        and w != v
                        and w not in dist
                    ):
                        dist[w] = dist[v] + 1
                        queue.append(w)
        return dist

    def disclosed_graph(self) -> WeightedMultiGraph:
        return disclosed_subgraph(self.source, self.disclosed)

    def key(self) -> tuple:
        return canonical_key(self.disclosed_graph(), roots=(self.root,), history=self.history)


class BreadthFirstRule:
    """Uniform choice among frontier edges at minimal disclosed distance."""

    proper = True

    def choose(self, expl: Exploration, rng: np.random.Generator):
        frontier = expl.frontier_edges()
        if not frontier:
            return None
        dist = expl.internal_distances()

        def edge_dist(e):
            a, b = expl.source.endpoints[e]
            ds = [dist[x] for x in (a, b) if x is not CEMETERY and x in dist]
            return min(ds) if ds else math.inf

        dmin = min(edge_dist(e) for e in frontier)
        cands = [e for e in frontier if edge_dist(e) == dmin]
        return int(cands[int(rng.integers(len(cands)))])


def breadth_first_rule() -> BreadthFirstRule:
    return BreadthFirstRule()


class MarkovRule:
    """Next explored edge is the edge by which a walk first exits the
    disclosed set.

    The walk runs inside the disclosed graph, whose rates agree with the full
    graph on disclosed vertices. With a per-walk horizon, expired walks are
    replaced by fresh walks from the root; without one, a single walk drives
    the whole exploration. The walk position and elapsed time are auxiliary
    state determined by the history plus the rule's random draws.
    """

    proper = True

    def __init__(self, walk_horizon: float | None = None):
        self.walk_horizon = walk_horizon
        self.position: int | None = None
        self.elapsed = 0.0
        self.trajectories: list[list[tuple[float, int]]] = []

    def _fresh_walk(self, expl):
        self.position = expl.root
        self.elapsed = 0.0
        self.trajectories.append([(0.0, expl.root)])

    def choose(self, expl: Exploration, rng: np.random.Generator):
        if not expl.frontier_edges():
            return None
        if self.position is None:
            self._fresh_walk(expl)
        g = expl.source
        while True:
            v = self.position
            cands = [e for e in g.incident[v] if not g.is_loop(e)]
            weights = np.array([g.edge_weights[e] for e in cands])
            total = weights.sum()
            rate = total / g.vertex_weights[v]
            if rate <= 0:
                raise TraceLabError(f"walk stuck at isolated vertex {v}")
            self.elapsed += rng.exponential(1.0 / rate)
            if self.walk_horizon is not None and self.elapsed > self.walk_horizon:
                self._fresh_walk(expl)
                continue
            e = cands[int(rng.choice(len(cands), p=weights / total))]
            w = g.other_endpoint(e, v)
            self.position = w
            self.trajectories[-1].append((self.elapsed, w))
            if w not in expl.disclosed:
                return int(e)


def markov_rule(walk_horizon: float | None = None) -> MarkovRule:
    return MarkovRule(walk_horizon)


def explore(
    rooted: RootedGraph,
    rule,
    ell: int,
    rng: np.random.Generator,
) -> Exploration:
    """Run ``ell`` exploration steps; stops early when the rule halts."""
    if ell < 0:
        raise TraceLabError("step count must be nonnegative")
    expl = Exploration(source=rooted.graph, root=rooted.root, disclosed={rooted.root})
    for _ in range(ell):
        e = rule.choose(expl, rng)
        if e is None:
            break
        a, b = rooted.graph.endpoints[e]
        for w in (a, b):
            if w is not CEMETERY:
                expl.disclosed.add(w)
        expl.history.append(int(e))
    return expl


# ---------------------------------------------------------------------------
# Coupled pairing/tree exploration
# ---------------------------------------------------------------------------


@dataclass
class _Partial:
    """Mutable partial generalized graph built during a coupled exploration."""

    verts: dict[int, float] = field(default_factory=dict)
    edges: dict[int, tuple] = field(default_factory=dict)
    history: list[int] = field(default_factory=list)
    root: int = 0

    def clone(self) -> "_Partial":
        return _Partial(dict(self.verts), dict(self.edges), list(self.history), self.root)

    def frontier(self) -> list[int]:
        return sorted(e for e, (a, b, _) in self.edges.items() if CEMETERY in (a, b))

    def to_exploration(self) -> Exploration:
        g = build_graph(self.verts, self.edges, generalized=True)
        return Exploration(
            source=g, root=self.root, disclosed=set(self.verts), history=list(self.history)
        )

    def max_degree(self) -> float:
        return max(self.verts.values(), default=0.0)


class _PartialRuleAdapter:
    """Expose a _Partial as an Exploration-like object for rule choices."""

    def __init__(self, partial: "_Partial"):
        self._p = partial

    @property
    def root(self):
        return self._p.root

    @property
    def disclosed(self):
        return set(self._p.verts)

    def frontier_edges(self):
        return self._p.frontier()

    def internal_distances(self):
        dist = {self._p.root: 0}
        adj: dict[int, set[int]] = {v: set() for v in self._p.verts}
        for a, b, _ in self._p.edges.values():
            if a is not CEMETERY and b is not CEMETERY and a != b:
                adj[a].add(b)
                adj[b].add(a)
        queue = deque([self._p.root])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        return dist


class _FrontierRuleShim:
    """Drive a public exploration rule over a _Partial structure.

    The breadth-first rule runs on the lightweight adapter; stateful rules get
    a full Exploration view rebuilt per step, which exploration-sized
    structures keep cheap.
    """

    def __init__(self, rule):
        self.rule = rule

    def clone(self) -> "_FrontierRuleShim":
        return _FrontierRuleShim(copy.deepcopy(self.rule))

    def choose(self, partial: "_Partial", rng):
        if isinstance(self.rule, BreadthFirstRule):
            frontier = partial.frontier()
            if not frontier:
                return None
            dist = _PartialRuleAdapter(partial).internal_distances()

            def edge_dist(e):
                a, b = partial.edges[e][:2]
                ds = [dist[x] for x in (a, b) if x is not CEMETERY and x in dist]
                return min(ds) if ds else math.inf

            dmin = min(edge_dist(e) for e in frontier)
            cands = [e for e in frontier if edge_dist(e) == dmin]
            return int(cands[int(rng.integers(len(cands)))])
        expl = Exploration(
            source=build_graph(partial.verts, partial.edges, generalized=True),
            root=partial.root,
            disclosed=set(partial.verts),
            history=list(partial.history),
        )
        return self.rule.choose(expl, rng)


@dataclass
class CoupledExplorationResult:
    pairing_side: Exploration
    tree_side: Exploration
    success: bool
    failure_cause: str | None
    failure_step: int | None
    disclosed_size: int


class _CouplingState:
    """Half-edge bookkeeping for the pairing side of a coupled exploration."""

    def __init__(self, degrees: Sequence[int], rng: np.random.Generator):
        self.degrees = degrees
        self.total = int(sum(degrees))
        self.offsets = np.concatenate([[0], np.cumsum(degrees)])
        self.used = np.zeros(self.total, dtype=bool)
        self.rng = rng
        self.edge_stub: dict[int, int] = {}
        self.stub_edge: dict[int, int] = {}

    def owner(self, stub: int) -> int:
        return int(np.searchsorted(self.offsets, stub, side="right") - 1)

    def stubs_of(self, vertex: int):
        return range(int(self.offsets[vertex]), int(self.offsets[vertex + 1]))

    def draw(self) -> int:
        return int(self.rng.integers(self.total))

    def draw_unused(self) -> int:
        while True:
            idx = self.draw()
            if not self.used[idx]:
                return idx

    def consume_prime(self, edge: int) -> None:
        stub = self.edge_stub.pop(edge, None)
        if stub is not None:
            self.used[stub] = True
            self.stub_edge.pop(stub, None)

    def bind(self, edge: int, stub: int) -> None:
        self.edge_stub[edge] = stub
        self.stub_edge[stub] = edge


def _redirect(side: "_Partial", edge: int, new_vertex: int) -> None:
    a, b, beta = side.edges[edge]
    anchor = a if b is CEMETERY else b
    side.edges[edge] = (anchor, new_vertex, beta)


def _fresh_vertex_label(side: "_Partial") -> int:
    return max(side.verts, default=-1) + 1


def _fresh_edge_label(side: "_Partial") -> int:
    return max(side.edges, default=-1) + 1


def _tree_extend(side: "_Partial", via_edge: int, degree: int) -> None:
    label = _fresh_vertex_label(side)
    side.verts[label] = float(degree)
    _redirect(side, via_edge, label)
    e0 = _fresh_edge_label(side)
    for k in range(degree - 1):
        side.edges[e0 + k] = (label, CEMETERY, 1.0)


def _graph_extend_fresh(side: "_Partial", state: "_CouplingState", via_edge: int, stub: int) -> None:
    """Attach the fresh vertex owning ``stub``; bind its remaining stubs."""
    owner = state.owner(stub)
    label = _fresh_vertex_label(side)
    side.verts[label] = float(state.degrees[owner])
    _redirect(side, via_edge, label)
    e0 = _fresh_edge_label(side)
    k = 0
    for s in state.stubs_of(owner):
        if s == stub:
            continue
        side.edges[e0 + k] = (label, CEMETERY, 1.0)
        state.bind(e0 + k, int(s))
        k += 1


def _graph_merge(side: "_Partial", state: "_CouplingState", via_edge: int, pending_edge: int, stub: int) -> None:
    """Pair two frontier stubs: one internal edge survives under a random id."""
    state.stub_edge.pop(stub, None)
    state.edge_stub.pop(pending_edge, None)
    a1, b1, beta = side.edges[via_edge]
    anchor1 = a1 if b1 is CEMETERY else b1
    a2, b2, _ = side.edges[pending_edge]
    anchor2 = a2 if b2 is CEMETERY else b2
    keep, drop = (via_edge, pending_edge) if state.rng.random() < 0.5 else (pending_edge, via_edge)
    side.edges[keep] = (anchor1, anchor2, beta)
    del side.edges[drop]
    if drop == via_edge and side.history and side.history[-1] == via_edge:
        side.history[-1] = keep


def _graph_step(side: "_Partial", state: "_CouplingState", via_edge: int, stub: int) -> None:
    pending = state.stub_edge.get(stub)
    state.used[stub] = True
    if pending is not None:
        _graph_merge(side, state, via_edge, pending, stub)
    else:
        _graph_extend_fresh(side, state, via_edge, stub)


def coupled_exploration_cm_gwp(
    degseq: DegreeSequence | Sequence[int],
    rule_factory: Callable[[], object],
    ell: int,
    rng: np.random.Generator,
    degmax_threshold: int | None = None,
) -> CoupledExplorationResult:
    """Jointly explore a fixed-degree pairing graph and its branching-tree
    idealization through shared uniform half-edge draws.

    Fresh draws are shared by both sides. A draw landing on a consumed
    half-edge forces an independent redraw on the pairing side (collision); a
    draw landing on a pending frontier stub merges two stubs into one internal
    edge on the pairing side only (cycle). Either event ends the agreement and
    the two sides continue independently, each under its own law. Success
    means no divergence within ``ell`` steps and no disclosed degree reaching
    the threshold, floor(sqrt(n)) by default.
    """
    if not isinstance(degseq, DegreeSequence):
        degseq = DegreeSequence(tuple(int(d) for d in degseq))
    degrees = degseq.degrees
    n = degseq.n
    if degmax_threshold is None:
        degmax_threshold = int(math.isqrt(n))
    state = _CouplingState(degrees, rng)

    root_vertex = int(rng.integers(n))
    graph_side = _Partial(root=0)
    tree_side = _Partial(root=0)
    graph_side.verts[0] = float(degrees[root_vertex])
    tree_side.verts[0] = float(degrees[root_vertex])
    for eid, s in enumerate(state.stubs_of(root_vertex)):
        graph_side.edges[eid] = (0, CEMETERY, 1.0)
        tree_side.edges[eid] = (0, CEMETERY, 1.0)
        state.bind(eid, int(s))

    rule_g = _FrontierRuleShim(rule_factory())
    rule_t: _FrontierRuleShim | None = None
    agreed = True
    failure_cause: str | None = None
    failure_step: int | None = None

    for step in range(1, ell + 1):
        if agreed:
            chosen = rule_g.choose(graph_side, rng)
            if chosen is None:
                break
            graph_side.history.append(chosen)
            tree_side.history.append(chosen)
            state.consume_prime(chosen)
            h2 = state.draw()
            owner = state.owner(h2)
            collided = bool(state.used[h2])
            pending = state.stub_edge.get(h2)
            if not collided and pending is None:
                # shared fresh extension keeps the two sides identical
                state.used[h2] = True
                label = _fresh_vertex_label(graph_side)
                d = int(degrees[owner])
                for side in (graph_side, tree_side):
                    side.verts[label] = float(d)
                    _redirect(side, chosen, label)
                e0 = _fresh_edge_label(graph_side)
                k = 0
                for s in state.stubs_of(owner):
                    if s == h2:
                        continue
                    graph_side.edges[e0 + k] = (label, CEMETERY, 1.0)
                    tree_side.edges[e0 + k] = (label, CEMETERY, 1.0)
                    state.bind(e0 + k, int(s))
                    k += 1
                continue
            # divergence: record the cause, then let the sides part ways
            failure_cause = "collision" if collided else "cycle"
            failure_step = step
            agreed = False
            rule_t = rule_g.clone()
            _tree_extend(tree_side, chosen, int(degrees[owner]))
            stub_bar = state.draw_unused() if collided else h2
            _graph_step(graph_side, state, chosen, stub_bar)
        else:
            chosen_g = rule_g.choose(graph_side, rng)
            if chosen_g is not None:
                graph_side.history.append(chosen_g)
                state.consume_prime(chosen_g)
                _graph_step(graph_side, state, chosen_g, state.draw_unused())
            chosen_t = rule_t.choose(tree_side, rng) if rule_t is not None else None
            if chosen_t is not None:
                tree_side.history.append(chosen_t)
                h2 = state.draw()
                _tree_extend(tree_side, chosen_t, int(degrees[state.owner(h2)]))
            if chosen_g is None and chosen_t is None:
                break

    degmax = max(graph_side.max_degree(), tree_side.max_degree())
    if failure_cause is None and degmax >= degmax_threshold:
        failure_cause, failure_step = "degmax", None
    success = failure_cause is None
    return CoupledExplorationResult(
        pairing_side=graph_side.to_exploration(),
        tree_side=tree_side.to_exploration(),
        success=success,
        failure_cause=failure_cause,
        failure_step=failure_step,
        disclosed_size=len(graph_side.verts),
    )


# ---------------------------------------------------------------------------
# Empirical local-convergence estimation and conditioning
# ---------------------------------------------------------------------------


def exploration_tv_estimate(
    sampler_a: Callable[[np.random.Generator], RootedGraph],
    sampler_b: Callable[[np.random.Generator], RootedGraph],
    rule_factory: Callable[[], object],
    ell: int,
    n_samples: int,
    rng: np.random.Generator,
    class_cap: int = 100_000,
):
    """Estimated total variation between the two models' exploration
    isomorphism-class laws after ``ell`` steps."""
    from .stats import tv_empirical

    keys_a, keys_b = [], []
    for keys, sampler in ((keys_a, sampler_a), (keys_b, sampler_b)):
        for _ in range(n_samples):
            rooted = sampler(rng)
            expl = explore(rooted, rule_factory(), ell, rng)
            keys.append(expl.key())
            if len(set(keys_a) | set(keys_b)) > class_cap:
                raise ClassExplosion("too many exploration classes")
    return tv_empirical(keys_a, keys_b)


@dataclass
class ConditionedExplorations:
    accepted: list[Exploration]
    acceptance_rate: float
    n_samples: int


def condition_on_component_size(
    sampler: Callable[[np.random.Generator], RootedGraph],
    rho: int,
    rule_factory: Callable[[], object],
    ell: int,
    n_samples: int,
    rng: np.random.Generator,
    acceptance_floor: float = 1e-3,
) -> ConditionedExplorations:
    """Rejection sampling of explorations on the event that the root component
    holds at least ``rho`` vertices, read off a proper-rule exploration."""
    rule_probe = rule_factory()
    if not getattr(rule_probe, "proper", False):
        raise TraceLabError("conditioning needs a proper exploration rule")
    accepted = []
    n_acc = 0
    for _ in range(n_samples):
        rooted = sampler(rng)
        rule = rule_factory()
        expl = Exploration(source=rooted.graph, root=rooted.root, disclosed={rooted.root})
        decided = len(expl.disclosed) >= rho
        for _ in range(ell):
            if len(expl.disclosed) >= rho:
                break
            e = rule.choose(expl, rng)
            if e is None:
                break
            a, b = rooted.graph.endpoints[e]
            for w in (a, b):
                if w is not CEMETERY:
                    expl.disclosed.add(w)
            expl.history.append(int(e))
        if len(expl.disclosed) >= rho:
            n_acc += 1
            accepted.append(expl)
    rate = n_acc / n_samples
    if rate < acceptance_floor:
        raise AcceptanceTooLow(f"acceptance rate {rate} below floor")
    return ConditionedExplorations(accepted, rate, n_samples)


def disclosed_by_walks(
    rooted: RootedGraph,
    m: int,
    tau: float,
    rng: np.random.Generator,
):
    """Disclose the union of the ranges of m independent root-started walks on
    [0, 2 tau]; returns the disclosed rooted graph and the trajectories."""
    if m < 1:
        raise TraceLabError("need at least one walk")
    gen = Generator(rooted.graph)
    trajectories = [simulate_walk(gen, rooted.root, 2 * tau, rng) for _ in range(m)]
    seen: set[int] = set()
    for traj in trajectories:
        seen |= traj.range()
    disclosed = disclosed_subgraph(rooted.graph, seen)
    return RootedGraph(disclosed, (rooted.root,)), trajectories


def survival_prediction(root_law, offspring_law) -> float:
    """Convenience hook: predicted acceptance for large component conditioning."""
    return gw_survival(root_law, offspring_law)
