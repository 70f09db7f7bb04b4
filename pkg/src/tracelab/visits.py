"""Entrance times, visits, and visiting measures extracted from walk paths.

An entrance into the region B opens a refractory window of length tau; the
next entrance is the first time strictly after the window during which the
walk sits in B. Right-continuity makes that time equal to the window's end
whenever the walk occupies B at that instant.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyTarget, HorizonTooShort, TraceLabError
from .graphs import WeightedMultiGraph
from .walks import Generator, StationaryDist, TrajectorySegment, simulate_walk


@dataclass(frozen=True)
class Occupation:
    """Maximal time interval [t_in, t_out) the walk spends inside B, with the
    piecewise states occupied during it."""

    t_in: float
    t_out: float
    steps: tuple[tuple[float, int], ...]  # (time, vertex) changes within B

    def state_at(self, t: float) -> int:
        k = bisect_right(self.steps, (t, float("inf"))) - 1
        return self.steps[k][1]


def occupation_intervals(traj: TrajectorySegment, region: frozenset[int] | set[int]):
    """B-occupation intervals of a killed trajectory."""
    region = frozenset(region)
    out: list[Occupation] = []
    cur_steps: list[tuple[float, int]] = []
    t_in = 0.0
    events = list(zip(traj.times, traj.states)) + [(traj.horizon, None)]
    inside = traj.start in region
    if inside:
        cur_steps = [(0.0, traj.start)]
    for tj, sj in events:
        if sj is None:
            if inside:
                out.append(Occupation(t_in, tj, tuple(cur_steps)))
            break
        sj = int(sj)
        now_in = sj in region
        if inside and not now_in:
            out.append(Occupation(t_in, tj, tuple(cur_steps)))
            inside = False
        elif not inside and now_in:
            t_in = tj
            cur_steps = [(tj, sj)]
            inside = True
        elif inside and now_in:
            cur_steps.append((tj, sj))
    return out


def entrances_from_intervals(
    intervals: Sequence[Occupation], tau: float, horizon: float
) -> list[tuple[float, int]]:
    """Entrance times and entry vertices given the B-occupation intervals."""
    if tau <= 0:
        raise TraceLabError("tau must be positive")
    out: list[tuple[float, int]] = []
    if not intervals:
        return out
    first = intervals[0]
    out.append((float(first.t_in), int(first.steps[0][1])))
    idx = 0
    while True:
        s = out[-1][0] + tau
        if s > horizon:
            break
        # interval containing s, else the first interval starting after s
        found = None
        while idx < len(intervals):
            iv = intervals[idx]
            if iv.t_out > s:
                if iv.t_in <= s:
                    found = (float(s), int(iv.state_at(s)))
                else:
                    found = (float(iv.t_in), int(iv.steps[0][1]))
                break
            idx += 1
        if found is None or found[0] >= horizon:
            break
        out.append(found)
    return out


def entrance_times(
    traj: TrajectorySegment, region: Iterable[int], tau: float
) -> list[float]:
    """The refractory entrance times of one trajectory into ``region``."""
    region = frozenset(region)
    if not region:
        raise EmptyTarget("entrance region is empty")
    ivs = occupation_intervals(traj, region)
    return [t for t, _ in entrances_from_intervals(ivs, tau, traj.horizon)]


@dataclass(frozen=True)
class VisitRecord:
    index: int
    time: float
    scaled_time: float
    entry_vertex: int
    path: TrajectorySegment


@dataclass(frozen=True)
class VisitingMeasure:
    """Ordered atoms (scaled entrance time, killed visit path)."""

    records: tuple[VisitRecord, ...]
    region: frozenset[int]
    tau: float
    scale: float
    horizon: float

    def __len__(self) -> int:
        return len(self.records)

    def atom_times(self) -> np.ndarray:
        return np.array([r.scaled_time for r in self.records])


def visiting_measure_from_trajectory(
    traj: TrajectorySegment, region: Iterable[int], tau: float, scale: float
) -> VisitingMeasure:
    region = frozenset(region)
    if not region:
        raise EmptyTarget("entrance region is empty")
    if scale <= 0:
        raise TraceLabError("scale must be positive")
    if traj.horizon < tau:
        raise HorizonTooShort("horizon shorter than one visit window")
    ivs = occupation_intervals(traj, region)
    entries = entrances_from_intervals(ivs, tau, traj.horizon)
    records = []
    for k, (t, v) in enumerate(entries, start=1):
        window = min(tau, traj.horizon - t)
        path = traj.shifted(t, window)
        records.append(
            VisitRecord(index=k, time=t, scaled_time=t / scale, entry_vertex=v, path=path)
        )
    return VisitingMeasure(tuple(records), region, tau, scale, traj.horizon)


def visiting_measure(
    graph: WeightedMultiGraph | Generator,
    region: Iterable[int],
    tau: float,
    scale: float,
    horizon: float,
    start,
    rng: np.random.Generator,
) -> VisitingMeasure:
    """Simulate one walk to the horizon and extract its visiting measure.

    ``start`` follows :func:`tracelab.walks.simulate_walk`; the equilibrium
    start is a :class:`~tracelab.walks.StationaryDist`.
    """
    traj = simulate_walk(graph, start, horizon, rng)
    return visiting_measure_from_trajectory(traj, region, tau, scale)


def restrict(measure: VisitingMeasure, sigma: float) -> VisitingMeasure:
    """Atoms with scaled entrance time in [0, sigma]."""
    kept = tuple(r for r in measure.records if r.scaled_time <= sigma)
    return VisitingMeasure(kept, measure.region, measure.tau, measure.scale, measure.horizon)


def kill_paths(measure: VisitingMeasure, tau_kill: float) -> VisitingMeasure:
    """Truncate every visit path to [0, tau_kill)."""
    if tau_kill < 0:
        raise TraceLabError("kill time must be nonnegative")
    records = tuple(
        VisitRecord(
            index=r.index,
            time=r.time,
            scaled_time=r.scaled_time,
            entry_vertex=r.entry_vertex,
            path=r.path.truncated(tau_kill),
        )
        for r in measure.records
    )
    return VisitingMeasure(records, measure.region, measure.tau, measure.scale, measure.horizon)


def trajectory_to_json_lines(traj: TrajectorySegment) -> str:
    """Serialize a trajectory as JSON lines {t, vertex, edge}; the first line
    carries the start state with a null edge."""
    import json

    rows = [{"t": 0.0, "vertex": int(traj.start), "edge": None}]
    for t, v, e in zip(traj.times, traj.states, traj.edges):
        rows.append({"t": float(t), "vertex": int(v), "edge": int(e)})
    return "\n".join(json.dumps(r) for r in rows) + "\n"
