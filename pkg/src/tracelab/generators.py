"""Random graph and tree generators: half-edge pairing, G(n,m), degree
sequences with parity fix, size-biasing, branching trees, components, and
schedule helpers.

Generated graphs follow the degree-weighted convention: vertex weight equals
degree (a loop counts twice), edge weights are one.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BadExponent,
    NonConvergence,
    OddDegreeSum,
    TraceLabError,
    TruncationZero,
    ZeroMean,
)
from .graphs import CEMETERY, RootedGraph, WeightedMultiGraph, build_graph, restricted_subgraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DegreeSequence:
    degrees: tuple[int, ...]

    def __post_init__(self):
        if any(d < 0 for d in self.degrees):
            raise TraceLabError("degrees must be nonnegative")
        if self.total % 2 != 0 or self.total == 0:
            raise OddDegreeSum(f"half-edge count {self.total} must be even and positive")

    @property
    def total(self) -> int:
        return int(sum(self.degrees))

    @property
    def n(self) -> int:
        return len(self.degrees)


@dataclass(frozen=True)
class DegreeDistribution:
    """Probability weights on nonnegative integer degrees."""

    values: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise TraceLabError("values and probs must align and be nonempty")
        if any(p < 0 for p in self.probs):
            raise TraceLabError("negative probability weight")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise TraceLabError("probability weights must sum to 1")

    @classmethod
    def from_weights(cls, weights: dict[int, float]) -> "DegreeDistribution":
        items = sorted(weights.items())
        total = sum(w for _, w in items)
        return cls(tuple(k for k, _ in items), tuple(w / total for _, w in items))

    def mean(self) -> float:
        return float(sum(k * p for k, p in zip(self.values, self.probs)))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(np.array(self.values), size=n, p=np.array(self.probs))

    def pgf(self, x: float) -> float:
        return float(sum(p * x**k for k, p in zip(self.values, self.probs)))


@dataclass(frozen=True)
class GwpTreeSpec:
    """Branching tree law: the root draws its child count from ``root_law``;
    every other vertex draws ``offspring_law`` minus one children."""

    root_law: DegreeDistribution
    offspring_law: DegreeDistribution
    max_depth: int = 40
    max_vertices: int = 100_000

    def __post_init__(self):
        if min(self.offspring_law.values) < 1:
            raise TraceLabError("offspring law must be supported on positive integers")
        if self.max_depth <= 0 or self.max_vertices <= 0:
            raise TruncationZero("tree truncation must be positive")


def pair_half_edges(degseq: DegreeSequence | Sequence[int], rng: np.random.Generator) -> WeightedMultiGraph:
    """Uniform pairing of half-edges into a multigraph; loops and parallels kept.

    Vertex weights are the degrees, edge weights one.
    """
    if not isinstance(degseq, DegreeSequence):
        degseq = DegreeSequence(tuple(int(d) for d in degseq))
    owners = np.repeat(np.arange(degseq.n), degseq.degrees)
    perm = rng.permutation(degseq.total)
    owners = owners[perm]
    verts = {v: float(d) for v, d in enumerate(degseq.degrees)}
    edges = {}
    for eid in range(degseq.total // 2):
        u = int(owners[2 * eid])
        v = int(owners[2 * eid + 1])
        edges[eid] = (u, v, 1.0)
    return build_graph(verts, edges)


def erdos_renyi_gnm(n: int, m: int, rng: np.random.Generator) -> WeightedMultiGraph:
    """Uniform simple graph with n vertices and m edges; degree vertex weights.

    Asking for more edges than exist yields the complete graph. Pair indices
    are drawn without replacement by a sparse partial shuffle, so no rejection
    loop is needed.
    """
    if n < 1:
        raise TraceLabError("need at least one vertex")
    n_pairs = n * (n - 1) // 2
    if m >= n_pairs:
        chosen = np.arange(n_pairs)
    else:
        # Fisher-Yates on a virtual index array backed by a sparse dict
        repl: dict[int, int] = {}
        picks = np.empty(m, dtype=np.int64)
        for k in range(m):
            j = int(rng.integers(k, n_pairs))
            picks[k] = repl.get(j, j)
            repl[j] = repl.get(k, k)
        chosen = picks
    # decode pair index into (i, j), i < j, row-major over the upper triangle
    edges = {}
    degrees = np.zeros(n, dtype=np.int64)
    for eid, idx in enumerate(chosen):
        i = int((2 * n - 1 - math.sqrt((2 * n - 1) ** 2 - 8 * idx)) // 2)
        # guard rounding at row boundaries
        while idx >= (i + 1) * n - (i + 1) * (i + 2) // 2:
            i += 1
        while i > 0 and idx < i * n - i * (i + 1) // 2:
            i -= 1
        offset = idx - (i * n - i * (i + 1) // 2)
        j = i + 1 + int(offset)
        edges[eid] = (i, j, 1.0)
        degrees[i] += 1
        degrees[j] += 1
    verts = {v: float(degrees[v]) for v in range(n)}
    return build_graph(verts, edges)


def sample_degree_sequence(
    p: DegreeDistribution, n: int, rng: np.random.Generator
) -> DegreeSequence:
    """IID degrees from ``p`` with the last entry bumped when the total is odd."""
    draws = p.sample(n, rng).astype(np.int64)
    if int(draws.sum()) % 2 == 1:
        draws[-1] += 1
    return DegreeSequence(tuple(int(d) for d in draws))


def size_bias(d: DegreeDistribution) -> DegreeDistribution:
    """Size-biased law: weight k p_k / E[D], supported on positive integers."""
    mean = d.mean()
    if mean <= 0:
        raise ZeroMean("size-biasing needs a positive mean")
    pairs = [(k, k * p / mean) for k, p in zip(d.values, d.probs) if k > 0]
    return DegreeDistribution(tuple(k for k, _ in pairs), tuple(w for _, w in pairs))


@dataclass
class GwpTree:
    rooted: RootedGraph
    depths: dict[int, int]
    truncated: bool

    @property
    def graph(self) -> WeightedMultiGraph:
        return self.rooted.graph


def sample_gwp_tree(spec: GwpTreeSpec, rng: np.random.Generator) -> GwpTree:
    """Sample the branching tree, truncated at the spec's depth or size cap.

    Vertex weights are tree degrees as sampled; edge weights one. The
    ``truncated`` flag is set when either cap bites, since vertices at the cap
    are missing their undrawn children.
    """
    child_counts = {0: int(spec.root_law.sample(1, rng)[0])}
    parents: dict[int, int] = {}
    depths = {0: 0}
    queue = deque([(0, 0)])
    next_id = 1
    truncated = False
    while queue:
        v, depth = queue.popleft()
        if depth >= spec.max_depth:
            truncated = truncated or child_counts.get(v, 0) > 0
            child_counts[v] = 0
            continue
        k = child_counts[v]
        for _ in range(k):
            if next_id >= spec.max_vertices:
                truncated = True
                break
            c = next_id
            next_id += 1
            parents[c] = v
            depths[c] = depth + 1
            child_counts[c] = int(spec.offspring_law.sample(1, rng)[0]) - 1
            queue.append((c, depth + 1))
        else:
            continue
        break
    if truncated:
        # drain the queue: vertices past the cap keep zero children
        for v, _ in queue:
            child_counts[v] = 0
    actual_children: dict[int, int] = {v: 0 for v in depths}
    for c, par in parents.items():
        actual_children[par] += 1
    verts = {}
    for v in depths:
        deg = actual_children[v] + (0 if v == 0 else 1)
        verts[v] = float(deg)
    edges = {i: (c, parents[c], 1.0) for i, c in enumerate(sorted(parents))}
    g = build_graph(verts, edges)
    return GwpTree(RootedGraph(g, (0,)), depths, truncated)


def connected_components(g: WeightedMultiGraph) -> list[set[int]]:
    parent = {v: v for v in g.vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges:
        a, b = g.endpoints[e]
        if a is CEMETERY or b is CEMETERY or a == b:
            continue
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    comps: dict[int, set[int]] = {}
    for v in g.vertices:
        comps.setdefault(find(v), set()).add(v)
    return list(comps.values())


def largest_component(g: WeightedMultiGraph, rng: np.random.Generator) -> RootedGraph:
    """The graph restricted to its largest component with a uniform root;
    size ties are broken uniformly at random."""
    comps = connected_components(g)
    best_size = max(len(c) for c in comps)
    cands = [c for c in comps if len(c) == best_size]
    comp = cands[int(rng.integers(len(cands)))] if len(cands) > 1 else cands[0]
    sub = restricted_subgraph(g, comp)
    members = sorted(comp)
    root = members[int(rng.integers(len(members)))]
    return RootedGraph(sub, (root,))


def gw_survival(
    root_law: DegreeDistribution,
    offspring_law: DegreeDistribution,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> float:
    """Survival probability of the branching tree.

    The extinction probability is the least fixed point of q = E[q^(D*-1)],
    found by iterating from zero; survival is 1 - E[q^D].
    """
    q = 0.0
    for _ in range(max_iter):
        q_new = float(
            sum(p * q ** (k - 1) for k, p in zip(offspring_law.values, offspring_law.probs))
        )
        if abs(q_new - q) <= tol:
            q = q_new
            break
        q = q_new
    else:
        raise NonConvergence("extinction fixed point iteration did not converge")
    return 1.0 - root_law.pgf(q)


@dataclass(frozen=True)
class Schedule:
    ell: int
    ell_prime: int
    tau: float
    m: int
    a: float
    ratios: dict = field(default_factory=dict)


def ell_schedule(tau_exponent: float, n: int) -> Schedule:
    """Exploration-length schedule for polynomially decaying degree tails.

    ell grows like n to the 0.9-damped exponent min((tau-2)/tau, 1/2); the
    companion schedule uses tau = (log n)^2, ell' = ceil(sqrt(ell)),
    m = ceil(ell/ell'), a = n.
    """
    if tau_exponent <= 2:
        raise BadExponent("tail exponent must exceed 2")
    expo = min((tau_exponent - 2.0) / tau_exponent, 0.5) * 0.9
    ell = int(math.floor(n**expo))
    if ell < 1:
        ell = 1
    tau = math.log(n) ** 2
    ell_prime = int(math.ceil(math.sqrt(ell)))
    m = int(math.ceil(ell / ell_prime))
    ratios = {
        "log_n_over_tau": math.log(n) / tau,
        "tau_over_ell_prime": tau / ell_prime,
        "ell_prime_over_ell": ell_prime / ell,
        "ell_over_sqrt_n": ell / math.sqrt(n),
    }
    logger.info("schedule ratios for n=%d: %s", n, ratios)
    return Schedule(ell=ell, ell_prime=ell_prime, tau=tau, m=m, a=float(n), ratios=ratios)


def degree_constraint_ok(degseq: DegreeSequence) -> bool:
    """Whether min degree >= 3 and max degree <= n^0.02 (expander regime guard)."""
    n = degseq.n
    return min(degseq.degrees) >= 3 and max(degseq.degrees) <= n**0.02
