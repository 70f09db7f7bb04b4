"""Equilibrium measures, capacities, and audited total-variation bounds.

All exact quantities run through the killed-semigroup oracle on dense-cap
graphs; Monte Carlo variants report 3-sigma half-widths. Bound audits never
raise on failed preconditions: they mark the report and leave the decision to
the caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import BadTimeOrder, EmptyTarget, FullTarget, TargetMismatch, TraceLabError
from .graphs import WeightedMultiGraph
from .walks import (
    DEFAULT_DENSE_CAP,
    BatchWalkKernel,
    Generator,
    KilledSemigroup,
    TransitionSemigroup,
    stationary,
)


@dataclass(frozen=True)
class EquilibriumReport:
    """Exit-rate equilibrium measure of a region with its derived quantities.

    ``measure`` is supported on the region; ``capacity`` is its total mass and
    ``capacity0`` the zero-horizon capacity. ``rate`` and ``rate0`` divide by
    the total vertex weight. ``kappa`` is the error functional
    4 (rate0/rate) (mixing + tau rate0); ``preconditions_met`` requires
    -log kappa >= 2 tau rate and 2 rate0 <= stationary mass of the complement.
    """

    region: frozenset[int]
    tau: float
    measure: Mapping[int, float]
    capacity: float
    capacity0: float
    rate: float
    rate0: float
    kappa: float
    mixing: float
    stationary_region: float
    preconditions_met: bool
    degenerate: bool = False
    halfwidths: Mapping[int, float] | None = None

    @property
    def entry_dist(self) -> dict[int, float]:
        if self.capacity <= 0:
            raise TraceLabError("degenerate capacity: no normalized entry law")
        return {v: m / self.capacity for v, m in self.measure.items() if m > 0}


def _check_region(graph: WeightedMultiGraph, region: frozenset[int]):
    if not region:
        raise EmptyTarget("region is empty")
    if region >= set(graph.vertices):
        raise FullTarget("region covers every vertex")
    for v in region:
        if v not in graph.vertex_weights:
            raise TraceLabError(f"region vertex {v} not in graph")


def equilibrium_report(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    tau: float,
    dense_cap: int = DEFAULT_DENSE_CAP,
    killed: KilledSemigroup | None = None,
    mixing: float | None = None,
) -> EquilibriumReport:
    """Exact equilibrium measure, capacities, and the kappa preconditions."""
    region = frozenset(region)
    _check_region(graph, region)
    if tau < 0:
        raise TraceLabError("tau must be nonnegative")
    ks = killed or KilledSemigroup(graph, region, dense_cap)
    tails = ks.survival(tau)[:, 0]
    total = graph.total_weight()
    measure = {}
    measure0 = {}
    for y in sorted(region):
        row = ks.entrance_weight_row(y)
        measure[y] = float(row @ tails)
        measure0[y] = float(row.sum())
    cap = sum(measure.values())
    cap0 = sum(measure0.values())
    rate = cap / total
    rate0 = cap0 / total
    d_tau = mixing if mixing is not None else TransitionSemigroup(graph, dense_cap).mixing_distance(tau)
    pi_region = sum(graph.vertex_weights[v] for v in region) / total
    degenerate = cap <= 0
    if degenerate:
        kappa = math.inf
        pre = False
    else:
        kappa = 4.0 * (rate0 / rate) * (d_tau + tau * rate0)
        pre = (kappa > 0) and (-math.log(kappa) >= 2 * tau * rate) and (
            2 * rate0 <= 1.0 - pi_region
        )
    return EquilibriumReport(
        region=region,
        tau=tau,
        measure=measure,
        capacity=cap,
        capacity0=cap0,
        rate=rate,
        rate0=rate0,
        kappa=kappa,
        mixing=d_tau,
        stationary_region=pi_region,
        preconditions_met=pre,
        degenerate=degenerate,
    )


def equilibrium_report_mc(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    tau: float,
    n_samples: int,
    rng: np.random.Generator,
) -> EquilibriumReport:
    """Monte Carlo equilibrium measure: survival tails estimated per boundary
    vertex with 3-sigma half-widths; exact for tau = 0."""
    region = frozenset(region)
    _check_region(graph, region)
    gen = Generator(graph)
    kernel = BatchWalkKernel(gen)
    # only complement vertices adjacent to the region matter
    W = gen.edge_weight_between()
    idx = gen.index
    boundary_out = sorted(
        {
            z
            for y in region
            for z in graph.neighbors(y)
            if z not in region
        }
    )
    tails: dict[int, float] = {}
    tail_hw: dict[int, float] = {}
    for z in boundary_out:
        if tau == 0:
            tails[z] = 1.0
            tail_hw[z] = 0.0
            continue
        states = np.full(n_samples, idx[z], dtype=np.int64)
        t = np.zeros(n_samples)
        alive = np.ones(n_samples, dtype=bool)
        region_idx = np.zeros(gen.n, dtype=bool)
        for v in region:
            region_idx[idx[v]] = True
        active = np.where(alive)[0]
        while active.size:
            t[active] += kernel.holding_times(states[active], rng)
            still = t[active] < tau
            move = active[still]
            if move.size:
                states[move] = kernel.next_states(states[move], rng)
                hit = region_idx[states[move]]
                alive[move[hit]] = False
            active = move[~region_idx[states[move]]] if move.size else move
        p = float(alive.mean())
        tails[z] = p
        tail_hw[z] = 3.0 * math.sqrt(max(p * (1 - p), 1.0 / n_samples) / n_samples)
    measure = {}
    halfwidths = {}
    for y in sorted(region):
        m = 0.0
        hw = 0.0
        for z in boundary_out:
            w = W[idx[y], idx[z]]
            m += w * tails[z]
            hw += w * tail_hw[z]
        measure[y] = m
        halfwidths[y] = hw
    cap = sum(measure.values())
    cap0 = float(sum(W[idx[y], idx[z]] for y in region for z in boundary_out))
    total = graph.total_weight()
    pi_region = sum(graph.vertex_weights[v] for v in region) / total
    return EquilibriumReport(
        region=region,
        tau=tau,
        measure=measure,
        capacity=cap,
        capacity0=cap0,
        rate=cap / total,
        rate0=cap0 / total,
        kappa=math.nan,
        mixing=math.nan,
        stationary_region=pi_region,
        preconditions_met=False,
        degenerate=cap <= 0,
        halfwidths=halfwidths,
    )


def entrance_density_exact(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    y: int,
    t_grid,
    dense_cap: int = DEFAULT_DENSE_CAP,
    killed: KilledSemigroup | None = None,
) -> np.ndarray:
    """Density of (first entrance time, entry vertex = y) under the stationary
    start, on the strictly positive part of the time axis."""
    region = frozenset(region)
    _check_region(graph, region)
    if y not in region:
        raise TargetMismatch(f"{y} is not in the region")
    ks = killed or KilledSemigroup(graph, region, dense_cap)
    return ks.entrance_density(y, np.asarray(t_grid, dtype=float))


def entrance_cdf_exact(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    t_grid,
    dense_cap: int = DEFAULT_DENSE_CAP,
    killed: KilledSemigroup | None = None,
) -> np.ndarray:
    """CDF of the first entrance time from the stationary start, including the
    atom at zero carrying the stationary mass of the region."""
    region = frozenset(region)
    _check_region(graph, region)
    ks = killed or KilledSemigroup(graph, region, dense_cap)
    t = np.asarray(t_grid, dtype=float)
    return 1.0 - ks.survival_stationary(t)


@dataclass(frozen=True)
class BoundAudit:
    """One audited inequality: measured (or exact) lhs against the bound."""

    name: str
    lhs: float | None
    rhs: float
    slack: float | None
    preconditions_met: bool
    params: dict = field(default_factory=dict)
    lhs_halfwidth: float = 0.0


def tail_factorization_audit(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    y: int,
    t: float,
    tau: float,
    dense_cap: int = DEFAULT_DENSE_CAP,
    killed: KilledSemigroup | None = None,
    mixing: float | None = None,
) -> BoundAudit:
    """Audit |P^y(T>t) - P^y(T>tau) P^pi(T>t)| <= 2 d(tau) + 2 tau cap0 / alpha(V),
    valid for t >= 2 tau > 0."""
    region = frozenset(region)
    _check_region(graph, region)
    if not (tau > 0 and t >= 2 * tau):
        raise BadTimeOrder("need t >= 2 tau > 0")
    ks = killed or KilledSemigroup(graph, region, dense_cap)
    d_tau = mixing if mixing is not None else TransitionSemigroup(graph, dense_cap).mixing_distance(tau)
    tail_t = ks.survival_from(y, t)
    tail_tau = ks.survival_from(y, tau)
    tail_pi = ks.survival_stationary(t)
    lhs = abs(float(tail_t) - float(tail_tau) * float(tail_pi))
    cap0 = sum(ks.entrance_weight_row(u).sum() for u in sorted(region))
    rhs = 2.0 * d_tau + 2.0 * tau * cap0 / graph.total_weight()
    return BoundAudit(
        name="lemma_b",
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        preconditions_met=True,
        params={"y": y, "t": t, "tau": tau},
    )


def entrance_law_audit(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    tau: float,
    dense_cap: int = DEFAULT_DENSE_CAP,
    grid_step: float | None = None,
    t_max: float | None = None,
    report: EquilibriumReport | None = None,
    killed: KilledSemigroup | None = None,
) -> BoundAudit:
    """Audit the product approximation of the joint entrance law.

    The lhs is the exact total variation distance between the stationary-start
    law of (first entrance time, entry vertex) and the product of an
    exponential with the normalized equilibrium measure, computed by fine
    quadrature plus analytic tail control; the rhs is
    pi(B) + 2 tau rate0 + kappa (1 + log 1/kappa).
    """
    region = frozenset(region)
    ks = killed or KilledSemigroup(graph, region, dense_cap)
    rep = report or equilibrium_report(graph, region, tau, dense_cap, killed=ks)
    lam = rep.rate
    rhs = math.nan
    if not rep.degenerate and rep.kappa > 0:
        rhs = rep.stationary_region + 2 * tau * rep.rate0 + rep.kappa * (
            1 + math.log(1 / rep.kappa)
        )
    if rep.degenerate or lam <= 0:
        return BoundAudit(
            name="aldous",
            lhs=None,
            rhs=rhs,
            slack=None,
            preconditions_met=False,
            params={"tau": tau, "kappa": rep.kappa},
        )
    step = grid_step if grid_step is not None else 1e-3 / lam
    tmax = t_max if t_max is not None else 20.0 / lam
    grid = np.arange(0.0, tmax + step, step)
    mids = 0.5 * (grid[:-1] + grid[1:])
    widths = np.diff(grid)
    total = graph.total_weight()
    diff_abs = np.zeros(mids.size)
    by_vertex = []
    for y in sorted(region):
        dens = ks.entrance_density(y, mids)
        prod = lam * np.exp(-lam * mids) * (rep.measure[y] / rep.capacity)
        by_vertex.append(np.abs(dens - prod))
    diff_abs = np.sum(by_vertex, axis=0)
    integral = float(diff_abs @ widths)
    tail_mass = float(ks.survival_stationary(tmax)) + math.exp(-lam * tmax)
    lhs = 0.5 * (rep.stationary_region + integral + tail_mass)
    return BoundAudit(
        name="aldous",
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        preconditions_met=rep.preconditions_met,
        params={
            "tau": tau,
            "kappa": rep.kappa,
            "rate": lam,
            "rate0": rep.rate0,
            "grid_step": step,
            "t_max": tmax,
            "tail_mass": tail_mass,
        },
    )


def _skeleton(traj, max_jumps: int) -> tuple:
    states = [int(traj.start)]
    states.extend(int(s) for s in traj.states[:max_jumps])
    return tuple(states)


def joint_prefix_audit(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    tau: float,
    z: int,
    n_samples: int,
    rng: np.random.Generator,
    dense_cap: int = DEFAULT_DENSE_CAP,
    prefix_jumps: int = 8,
    n_time_bins: int = 12,
    report: EquilibriumReport | None = None,
) -> BoundAudit:
    """Audit the product approximation of (prefix, post-window entrance).

    The lhs is a Monte Carlo total variation estimate between the law of
    (jump skeleton of the first window, binned entrance time after the window,
    entry vertex) started at z and the product of its idealized marginals;
    finite binning only lowers the true distance, so the audit is
    conservative. The rhs is 2 pi(B) + kappa (3 + log 1/kappa).
    """
    from .walks import simulate_walk

    region = frozenset(region)
    rep = report or equilibrium_report(graph, region, tau, dense_cap)
    rhs = math.nan
    if not rep.degenerate and rep.kappa > 0:
        rhs = 2 * rep.stationary_region + rep.kappa * (3 + math.log(1 / rep.kappa))
    if rep.degenerate or rep.rate <= 0:
        return BoundAudit("joint", None, rhs, None, False, {"tau": tau})
    lam = rep.rate
    # bin edges from exponential quantiles so the product law spreads evenly
    qs = np.linspace(0, 1, n_time_bins, endpoint=False)[1:]
    edges = -np.log(1 - qs) / lam

    def bin_of(x: float) -> int:
        return int(np.searchsorted(edges, x, side="right"))

    gen = Generator(graph)
    entry_vs = sorted(rep.entry_dist)
    entry_ps = np.array([rep.entry_dist[v] for v in entry_vs])

    joint_samples = []
    horizon = tau + 40.0 / lam
    for _ in range(n_samples):
        # follow the walk well past the window so the entrance is observed
        traj = simulate_walk(gen, z, horizon, rng)
        prefix = _skeleton(traj.truncated(tau), prefix_jumps)
        t_entry, v_entry = _first_entry_after(traj, region, tau)
        if t_entry is None:
            t_entry, v_entry = horizon, entry_vs[0]  # censored; rare by design
        joint_samples.append((prefix, bin_of(t_entry), v_entry))
    # independent prefixes for the product side keep the two sample sets disjoint
    product_samples = []
    for _ in range(n_samples):
        traj = simulate_walk(gen, z, tau, rng)
        prefix = _skeleton(traj, prefix_jumps)
        t = rng.exponential(1.0 / lam)
        v = entry_vs[int(rng.choice(len(entry_vs), p=entry_ps))]
        product_samples.append((prefix, bin_of(t), v))
    from .stats import tv_empirical

    est = tv_empirical(joint_samples, product_samples)
    return BoundAudit(
        name="joint",
        lhs=est.estimate,
        rhs=rhs,
        slack=rhs - est.estimate if not math.isnan(rhs) else None,
        preconditions_met=rep.preconditions_met,
        params={
            "tau": tau,
            "z": z,
            "kappa": rep.kappa,
            "n_samples": n_samples,
            "classes": est.n_classes,
            "plug_in_bias": est.plug_in_bias,
        },
        lhs_halfwidth=3.0 * math.sqrt(0.25 / n_samples) + est.plug_in_bias,
    )


def _first_entry_after(traj, region, s: float):
    """First (time, vertex) at or after s with the walk in the region."""
    from .visits import occupation_intervals

    for iv in occupation_intervals(traj, region):
        if iv.t_out > s:
            if iv.t_in <= s:
                return s, iv.state_at(s)
            return iv.t_in, iv.steps[0][1]
    return None, None


def visit_coupling_bound(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    tau: float,
    a: float,
    t: float,
    rho: int | None = None,
    rho_max: int = 60,
    dense_cap: int = DEFAULT_DENSE_CAP,
    report: EquilibriumReport | None = None,
) -> BoundAudit:
    """Bound on the distance between the visiting measure and its Poisson
    idealization on [0, t]: c rho + 2^-rho exp(a cap t / alpha(V)) with
    c = 2 pi(B) + kappa (3 + log 1/kappa), minimized over integer rho when
    none is given."""
    region = frozenset(region)
    rep = report or equilibrium_report(graph, region, tau, dense_cap)
    if rep.degenerate or not (rep.kappa > 0):
        return BoundAudit("visit_coupling", None, math.inf, None, False, {"tau": tau})
    c = 2 * rep.stationary_region + rep.kappa * (3 + math.log(1 / rep.kappa))
    expo = math.exp(a * rep.capacity * t / graph.total_weight())

    def value(r: int) -> float:
        return c * r + 2.0 ** (-r) * expo

    if rho is not None:
        best_rho, best = int(rho), value(int(rho))
    else:
        best_rho, best = min(
            ((r, value(r)) for r in range(1, rho_max + 1)), key=lambda kv: kv[1]
        )
    return BoundAudit(
        name="visit_coupling",
        lhs=None,
        rhs=best,
        slack=None,
        preconditions_met=rep.preconditions_met,
        params={
            "tau": tau,
            "a": a,
            "t": t,
            "rho": best_rho,
            "c": c,
            "kappa": rep.kappa,
            "capacity": rep.capacity,
        },
    )


@dataclass(frozen=True)
class TvCompositionResult:
    lhs: float
    rhs: float
    holds: bool


def tv_composition_check(joint_a: np.ndarray, joint_b: np.ndarray) -> TvCompositionResult:
    """Check d_TV of two finite joints against first-marginal distance plus the
    expected conditional distance, by exact enumeration.

    Rows index the first coordinate. Conditionals on rows without mass are
    taken uniform; the inequality holds for any such completion.
    """
    A = np.asarray(joint_a, dtype=float)
    B = np.asarray(joint_b, dtype=float)
    if A.shape != B.shape:
        raise TraceLabError("joint tables must share a shape")
    A = A / A.sum()
    B = B / B.sum()
    lhs = 0.5 * np.abs(A - B).sum()
    pa = A.sum(axis=1)
    pb = B.sum(axis=1)
    d1 = 0.5 * np.abs(pa - pb).sum()
    ncols = A.shape[1]
    exp_cond = 0.0
    for i in range(A.shape[0]):
        ca = A[i] / pa[i] if pa[i] > 0 else np.full(ncols, 1.0 / ncols)
        cb = B[i] / pb[i] if pb[i] > 0 else np.full(ncols, 1.0 / ncols)
        exp_cond += pa[i] * 0.5 * np.abs(ca - cb).sum()
    rhs = float(d1 + exp_cond)
    return TvCompositionResult(float(lhs), rhs, lhs <= rhs + 1e-12)


def expected_entrance_time(
    graph: WeightedMultiGraph,
    region: Iterable[int],
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> float:
    """Expected first entrance time from the stationary start."""
    ks = KilledSemigroup(graph, frozenset(region), dense_cap)
    return ks.expected_hitting_stationary()
