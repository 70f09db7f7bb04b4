"""Stack-based Cox process construction, escape estimates, the limiting
Poisson process on trees, and the combined coupling bound.

Two stack families are built from root-started walks on [0, 2 tau]: paths
keyed by their first hit of the radius-(R+1) shell estimate escape
probabilities, and paths keyed by the radius-R shell supply the marks of the
Cox process. Stacks of the second kind extend lazily when a sample needs more
paths than were prepared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import BoundaryEmpty, StackExhausted, TraceLabError, TruncationTooShallow
from .graphs import RootedGraph, WeightedMultiGraph, ball, boundary
from .walks import Generator, TrajectorySegment, simulate_walk
from .equilibrium import EquilibriumReport, equilibrium_report


@dataclass
class PathStacks:
    """Escape stacks (first kind) and mark stacks (second kind).

    ``escape_counts[v]`` holds (escapes, total) for the radius-(R+1) shell
    vertex v; ``mark_stacks[v]`` holds tau-length paths entering the shell at
    radius R. The source graph and parameters are kept so mark stacks can be
    extended lazily.
    """

    rooted: RootedGraph
    radius: int
    tau: float
    m: int
    shell_out: frozenset[int]
    shell_in: frozenset[int]
    core: frozenset[int]
    escape_stacks: dict[int, list[TrajectorySegment]]
    escape_counts: dict[int, tuple[int, int]]
    mark_stacks: dict[int, list[TrajectorySegment]]
    _gen: Generator = field(repr=False, default=None)

    def escape_fraction(self, v: int) -> float:
        esc, tot = self.escape_counts.get(v, (0, 0))
        return esc / tot if tot else 0.0

    def extend_marks(self, rng: np.random.Generator, need: Mapping[int, int], max_walks: int = 200_000):
        """Simulate further walks until each shell vertex v has at least
        need[v] mark paths."""
        gen = self._gen or Generator(self.rooted.graph)
        walks = 0
        while any(len(self.mark_stacks.get(v, [])) < k for v, k in need.items()):
            if walks >= max_walks:
                raise StackExhausted("mark stack extension budget exhausted")
            traj = simulate_walk(gen, self.rooted.root, 2 * self.tau, rng)
            _file_mark_path(self, traj)
            walks += 1


def _first_hit(traj: TrajectorySegment, target: frozenset[int]):
    """(time, vertex) of the first visit to target, or None."""
    if traj.start in target:
        return 0.0, traj.start
    for t, s in zip(traj.times, traj.states):
        if int(s) in target:
            return float(t), int(s)
    return None


def _file_mark_path(stacks: PathStacks, traj: TrajectorySegment) -> bool:
    hit = _first_hit(traj, stacks.shell_in)
    if hit is None or hit[0] > stacks.tau:
        return False
    t0, v = hit
    stacks.mark_stacks.setdefault(v, []).append(traj.shifted(t0, stacks.tau))
    return True


def build_stacks(
    rooted: RootedGraph,
    radius: int,
    tau: float,
    m: int,
    extra_walks: int,
    rng: np.random.Generator,
) -> PathStacks:
    """Simulate root walks on [0, 2 tau] and file them into the two stack
    families; the first m walks feed escape stacks, the rest mark stacks."""
    if radius < 1:
        raise TraceLabError("radius must be at least 1")
    shell_out = boundary(rooted, radius + 1)
    if not shell_out:
        raise BoundaryEmpty(f"no vertices at distance {radius + 1}")
    shell_in = boundary(rooted, radius)
    core = ball(rooted, radius)
    gen = Generator(rooted.graph)
    escape_stacks: dict[int, list[TrajectorySegment]] = {v: [] for v in shell_out}
    escape_counts: dict[int, tuple[int, int]] = {v: (0, 0) for v in shell_out}
    stacks = PathStacks(
        rooted=rooted,
        radius=radius,
        tau=tau,
        m=m,
        shell_out=shell_out,
        shell_in=shell_in,
        core=core,
        escape_stacks=escape_stacks,
        escape_counts=escape_counts,
        mark_stacks={v: [] for v in shell_in},
        _gen=gen,
    )
    for _ in range(m):
        traj = simulate_walk(gen, rooted.root, 2 * tau, rng)
        hit = _first_hit(traj, shell_out)
        if hit is None or hit[0] > tau:
            continue
        t0, v = hit
        path = traj.shifted(t0, tau)
        escape_stacks[v].append(path)
        esc, tot = escape_counts[v]
        is_escape = not (path.range() & core)
        escape_counts[v] = (esc + int(is_escape), tot + 1)
    for _ in range(extra_walks):
        traj = simulate_walk(gen, rooted.root, 2 * tau, rng)
        _file_mark_path(stacks, traj)
    return stacks


@dataclass(frozen=True)
class EscapeEstimate:
    """Estimated equilibrium measure from escape fractions.

    ``fractions[w]`` is the relative number of escapes on the w-stack (zero on
    an empty stack); ``measure[v]`` weights the radius-R shell vertex v by its
    edge weight towards each outer-shell vertex times that vertex's fraction.
    """

    fractions: Mapping[int, float]
    measure: Mapping[int, float]

    @property
    def total(self) -> float:
        return float(sum(self.measure.values()))


def escape_estimate(stacks: PathStacks) -> EscapeEstimate:
    g = stacks.rooted.graph
    fractions = {w: stacks.escape_fraction(w) for w in stacks.shell_out}
    measure: dict[int, float] = {}
    for v in stacks.shell_in:
        acc = 0.0
        for e in g.incident[v]:
            if g.is_loop(e):
                continue
            w = g.other_endpoint(e, v)
            if w in stacks.shell_out:
                acc += g.edge_weights[e] * fractions[w]
        measure[v] = acc
    return EscapeEstimate(fractions=fractions, measure=measure)


@dataclass(frozen=True)
class CoxPointProcess:
    """Marked point process: sorted (time, entry vertex, path) atoms."""

    atoms: tuple[tuple[float, int, TrajectorySegment], ...]
    afrak: float
    rate_total: float
    sigma: float
    provenance: str

    def __len__(self) -> int:
        return len(self.atoms)

    def times(self) -> np.ndarray:
        return np.array([t for t, _, _ in self.atoms])

    def killed(self, tau_kill: float) -> "CoxPointProcess":
        atoms = tuple(
            (t, v, path.truncated(tau_kill) if path is not None else None)
            for t, v, path in self.atoms
        )
        return CoxPointProcess(atoms, self.afrak, self.rate_total, self.sigma, "killed")

    def restricted(self, sigma: float) -> "CoxPointProcess":
        atoms = tuple(a for a in self.atoms if a[0] <= sigma)
        return CoxPointProcess(atoms, self.afrak, self.rate_total, min(sigma, self.sigma), self.provenance)


def sample_cox(
    stacks: PathStacks,
    measure: Mapping[int, float],
    afrak: float,
    sigma: float,
    rng: np.random.Generator,
    resample: bool = True,
) -> CoxPointProcess:
    """Poisson atoms on [0, sigma] with the per-vertex rates of ``measure``
    over ``afrak``; the k-th atom at a vertex takes the k-th path of that
    vertex's mark stack."""
    if afrak <= 0 or sigma < 0:
        raise TraceLabError("need positive afrak and nonnegative sigma")
    total = float(sum(measure.values()))
    if total <= 0:
        return CoxPointProcess((), afrak, 0.0, sigma, "construction")
    n_atoms = int(rng.poisson(sigma * total / afrak))
    if n_atoms == 0:
        return CoxPointProcess((), afrak, total / afrak, sigma, "construction")
    times = np.sort(rng.uniform(0.0, sigma, size=n_atoms))
    verts = sorted(v for v, m in measure.items() if m > 0)
    probs = np.array([measure[v] for v in verts])
    marks = rng.choice(len(verts), size=n_atoms, p=probs / probs.sum())
    need: dict[int, int] = {}
    for k in marks:
        v = verts[int(k)]
        need[v] = need.get(v, 0) + 1
    short = {v: k for v, k in need.items() if len(stacks.mark_stacks.get(v, [])) < k}
    if short:
        if not resample:
            raise StackExhausted(f"mark stacks too shallow for {sorted(short)}")
        stacks.extend_marks(rng, need)
    taken: dict[int, int] = {v: 0 for v in need}
    atoms = []
    for t, k in zip(times, marks):
        v = verts[int(k)]
        path = stacks.mark_stacks[v][taken[v]]
        taken[v] += 1
        atoms.append((float(t), v, path))
    return CoxPointProcess(tuple(atoms), afrak, total / afrak, sigma, "construction")


def sample_poisson_visits(
    graph: WeightedMultiGraph,
    report: EquilibriumReport,
    a: float,
    sigma: float,
    rng: np.random.Generator,
    gen: Generator | None = None,
) -> CoxPointProcess:
    """Poisson process with the exact equilibrium intensity: atoms at rate
    a cap / alpha(V), marked by entry-law starts and tau-length walk paths."""
    lam = a * report.capacity / graph.total_weight()
    n_atoms = int(rng.poisson(sigma * lam))
    gen = gen or Generator(graph)
    atoms = []
    if n_atoms:
        times = np.sort(rng.uniform(0.0, sigma, size=n_atoms))
        entry = report.entry_dist
        verts = sorted(entry)
        probs = np.array([entry[v] for v in verts])
        picks = rng.choice(len(verts), size=n_atoms, p=probs)
        for t, k in zip(times, picks):
            v = verts[int(k)]
            path = simulate_walk(gen, v, report.tau, rng)
            atoms.append((float(t), v, path))
    return CoxPointProcess(tuple(atoms), math.nan, lam, sigma, "limit")


def regular_tree_escape(offspring: int) -> float:
    """Chance a walk on the infinite regular tree never steps one level down:
    one backward edge against offspring forward edges gives 1 - 1/offspring."""
    if offspring < 2:
        return 0.0
    return 1.0 - 1.0 / offspring


def escape_probability_mc(
    rooted: RootedGraph,
    core: frozenset[int],
    z: int,
    n_samples: int,
    escape_set: frozenset[int],
    rng: np.random.Generator,
    horizon: float,
) -> float:
    """Estimate the chance a walk from z reaches the escape set before the
    core; walks that survive to the horizon without deciding count as escapes
    (the bias is the return chance from the escape depth)."""
    gen = Generator(rooted.graph)
    n_escape = 0
    for _ in range(n_samples):
        traj = simulate_walk(gen, z, horizon, rng)
        decided = False
        seq = [traj.start] + [int(s) for s in traj.states]
        for s in seq:
            if s in core:
                decided = True
                break
            if s in escape_set:
                n_escape += 1
                decided = True
                break
        if not decided:
            n_escape += 1
    return n_escape / n_samples


class LimitProcessSampler:
    """Repeated draws of the limiting Poisson process on a (truncated) tree.

    The intensity uses the infinite-horizon equilibrium measure of the ball of
    the given radius: entry vertices on the radius shell weighted by outward
    edge weight times the never-return chance of the outer endpoint. Escape
    probabilities come from the exact one-level formula on regular trees when
    ``regular_offspring`` is given, otherwise from a depth-censored Monte
    Carlo estimate; the truncation must leave room below the escape depth.
    """

    def __init__(
        self,
        tree: RootedGraph,
        radius: int,
        afrak: float,
        rng: np.random.Generator,
        escape_margin: int = 8,
        n_escape_samples: int = 2000,
        regular_offspring: int | None = None,
    ):
        from .graphs import hop_distances

        dist = hop_distances(tree.graph, tree.roots)
        depth = max(dist.values())
        if depth < radius + 2:
            raise TruncationTooShallow("tree too shallow for the requested radius")
        core = ball(tree, radius)
        shell_in = boundary(tree, radius)
        g = tree.graph
        self.gen = Generator(g)
        escape_depth = min(depth - 1, radius + 1 + escape_margin)
        escape_set = frozenset(v for v, d in dist.items() if d >= escape_depth)
        esc: dict[int, float] = {}
        for z in sorted(boundary(tree, radius + 1)):
            if regular_offspring is not None:
                esc[z] = regular_tree_escape(regular_offspring)
            else:
                esc[z] = escape_probability_mc(
                    tree, core, z, n_escape_samples, escape_set, rng,
                    horizon=4.0 * escape_depth / max(min(self.gen.rates), 1e-9),
                )
        measure: dict[int, float] = {}
        for v in shell_in:
            acc = 0.0
            for e in g.incident[v]:
                if g.is_loop(e):
                    continue
                w = g.other_endpoint(e, v)
                if w in esc:
                    acc += g.edge_weights[e] * esc[w]
            measure[v] = acc
        self.tree = tree
        self.radius = radius
        self.afrak = afrak
        self.measure = measure
        self.capacity = float(sum(measure.values()))
        self.escape = esc
        self._default_horizon = float(4 * escape_depth)
        self._verts = sorted(v for v, m in measure.items() if m > 0)
        probs = np.array([measure[v] for v in self._verts])
        self._probs = probs / probs.sum() if probs.size else probs

    def sample(
        self,
        sigma: float,
        rng: np.random.Generator,
        tau_kill: float | None = None,
        with_paths: bool = True,
    ) -> CoxPointProcess:
        rate = self.capacity / self.afrak
        n_atoms = int(rng.poisson(sigma * rate))
        atoms = []
        if n_atoms and self._verts:
            times = np.sort(rng.uniform(0.0, sigma, size=n_atoms))
            picks = rng.choice(len(self._verts), size=n_atoms, p=self._probs)
            horizon = tau_kill if tau_kill is not None else self._default_horizon
            for t, k in zip(times, picks):
                v = self._verts[int(k)]
                path = simulate_walk(self.gen, v, horizon, rng) if with_paths else None
                atoms.append((float(t), v, path))
        return CoxPointProcess(tuple(atoms), self.afrak, rate, sigma, "limit")


def sample_limit_process(
    tree: RootedGraph,
    radius: int,
    afrak: float,
    sigma: float,
    rng: np.random.Generator,
    tau_kill: float | None = None,
    escape_margin: int = 8,
    n_escape_samples: int = 2000,
    regular_offspring: int | None = None,
) -> CoxPointProcess:
    """One draw of the limiting Poisson process; see LimitProcessSampler."""
    sampler = LimitProcessSampler(
        tree, radius, afrak, rng,
        escape_margin=escape_margin,
        n_escape_samples=n_escape_samples,
        regular_offspring=regular_offspring,
    )
    return sampler.sample(sigma, rng, tau_kill=tau_kill)


@dataclass(frozen=True)
class MainBoundResult:
    value: float
    rho: int
    mean_l1: float
    constant: float
    exponent_term: float
    replicas: int


def main_bound(
    rooted: RootedGraph,
    radius: int,
    tau: float,
    a: float,
    afrak: float,
    sigma: float,
    rho: int,
    m: int,
    n_replicas: int,
    rng: np.random.Generator,
    dense_cap: int = 400,
) -> MainBoundResult:
    """Expectation bound combining the coupling constant, the Poisson-tail
    term, and the random l1 mismatch between the stack estimate over afrak and
    the exact equilibrium measure over the scale: averaged 1 wedge of the sum
    over stack replicas."""
    g = rooted.graph
    core = ball(rooted, radius)
    rep = equilibrium_report(g, core, tau, dense_cap)
    if rep.degenerate or not (rep.kappa > 0):
        c = math.inf
    else:
        c = 2 * rep.stationary_region + rep.kappa * (3 + math.log(1 / rep.kappa))
    expo = 2.0 ** (-rho) * math.exp(a * rep.capacity * sigma / g.total_weight())
    total = g.total_weight()
    vals = []
    l1s = []
    for _ in range(n_replicas):
        stacks = build_stacks(rooted, radius, tau, m, 0, rng)
        est = escape_estimate(stacks)
        l1 = sum(
            abs(est.measure.get(v, 0.0) / afrak - (a / total) * rep.measure.get(v, 0.0))
            for v in set(est.measure) | set(rep.measure)
        )
        l1s.append(l1)
        vals.append(min(1.0, c * rho + expo + sigma * l1))
    return MainBoundResult(
        value=float(np.mean(vals)),
        rho=rho,
        mean_l1=float(np.mean(l1s)),
        constant=c,
        exponent_term=expo,
        replicas=n_replicas,
    )


def binned_summary(
    process,
    sigma: float,
    n_bins: int = 4,
    skeleton_jumps: int = 6,
    include_paths: bool = True,
) -> tuple:
    """Finite summary of a marked point process on [0, sigma]: the sorted
    multiset of (time bin, entry vertex, truncated path skeleton) per atom.
    Summaries are measurable functions of the process, so empirical TV between
    summaries lower-bounds the processes' TV."""
    rows = []
    for t, v, path in _iter_atoms(process):
        if t > sigma:
            continue
        b = min(int(n_bins * t / sigma), n_bins - 1) if sigma > 0 else 0
        if include_paths and path is not None:
            skel = (int(path.start),) + tuple(int(s) for s in path.states[:skeleton_jumps])
        else:
            skel = ()
        rows.append((b, int(v), skel))
    return tuple(sorted(rows))


def _iter_atoms(process):
    if isinstance(process, CoxPointProcess):
        for t, v, path in process.atoms:
            yield t, v, path
    else:  # a VisitingMeasure
        for r in process.records:
            yield r.scaled_time, r.entry_vertex, r.path
