"""Finite weighted multigraphs, rooted variants, balls, disclosure, isomorphism.

Graphs are immutable after :func:`build_graph`; vertex and edge labels are
nonnegative integers, and a single cemetery sentinel marks redirected edge
endpoints in generalized graphs. Loops and parallel edges are kept in storage;
a loop contributes 2 to a vertex's degree.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    BothEndpointsCemetery,
    CemeteryInStandardGraph,
    ClassExplosion,
    DuplicateLabel,
    EmptyDisclosure,
    NonpositiveWeight,
    SizeLimitExceeded,
    TraceLabError,
)


class _Cemetery:
    __slots__ = ()

    def __repr__(self):
        return "CEMETERY"

    def __deepcopy__(self, memo):
        return self


CEMETERY = _Cemetery()

Endpoint = "int | _Cemetery"

DEFAULT_ISO_CAP = 10_000


def _pair(u, v):
    """Canonical unordered endpoint pair; the cemetery sorts last."""
    if u is CEMETERY:
        return (v, CEMETERY)
    if v is CEMETERY:
        return (u, CEMETERY)
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class WeightedMultiGraph:
    """Multigraph with positive vertex weights and edge weights.

    ``endpoints[e]`` is the unordered endpoint pair of edge ``e``;
    ``incident[v]`` lists incident edge ids (a loop appears once in the list
    but counts twice for the degree). Vertices with no incident edge may carry
    weight zero: the degree-weighted models produce isolated vertices, and the
    walk never lives there.
    """

    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    endpoints: Mapping[int, tuple]
    vertex_weights: Mapping[int, float]
    edge_weights: Mapping[int, float]
    generalized: bool
    incident: Mapping[int, tuple[int, ...]] = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def degree(self, v: int) -> int:
        d = 0
        for e in self.incident[v]:
            a, b = self.endpoints[e]
            d += 2 if (a == b and a is not CEMETERY) else 1
        return d

    def neighbors(self, v: int):
        out = set()
        for e in self.incident[v]:
            a, b = self.endpoints[e]
            for w in (a, b):
                if w is not CEMETERY and w != v:
                    out.add(w)
        return out

    def other_endpoint(self, e: int, v: int):
        a, b = self.endpoints[e]
        if a == v and b == v:
            return v
        return b if a == v else a

    def is_loop(self, e: int) -> bool:
        a, b = self.endpoints[e]
        return a is not CEMETERY and a == b

    def total_weight(self) -> float:
        return float(sum(self.vertex_weights[v] for v in self.vertices))


@dataclass(frozen=True)
class RootedGraph:
    """Graph with one or two designated root vertices (ordered)."""

    graph: WeightedMultiGraph
    roots: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= len(self.roots) <= 2:
            raise TraceLabError("a rooted graph carries one or two roots")
        for r in self.roots:
            if r not in self.graph.vertex_weights:
                raise TraceLabError(f"root {r} not a vertex")

    @property
    def root(self) -> int:
        return self.roots[0]


def build_graph(
    vertices,
    edges,
    *,
    generalized: bool = False,
) -> WeightedMultiGraph:
    """Validate and index a multigraph.

    ``vertices`` maps vertex id to weight (or lists ``(id, weight)`` pairs);
    ``edges`` maps edge id to ``(u, v, beta)`` (or lists ``(id, u, v, beta)``
    tuples), where ``u``/``v`` may be :data:`CEMETERY` in generalized graphs.
    Zero vertex weight is admitted only on isolated vertices.
    """
    vertex_items = vertices.items() if isinstance(vertices, Mapping) else list(vertices)
    edge_items = (
        [(e, u, v, b) for e, (u, v, b) in edges.items()]
        if isinstance(edges, Mapping)
        else list(edges)
    )
    vw: dict[int, float] = {}
    for v, a in vertex_items:
        v = int(v)
        if v < 0:
            raise TraceLabError(f"vertex label must be nonnegative: {v}")
        if v in vw:
            raise DuplicateLabel(f"vertex {v}")
        if a < 0:
            raise NonpositiveWeight(f"vertex {v} has weight {a}")
        vw[v] = float(a)
    ep: dict[int, tuple] = {}
    ew: dict[int, float] = {}
    incident: dict[int, list[int]] = {v: [] for v in vw}
    for e, u, v, beta in edge_items:
        e = int(e)
        if e in ew:
            raise DuplicateLabel(f"edge {e}")
        if beta <= 0:
            raise NonpositiveWeight(f"edge {e} has weight {beta}")
        if u is CEMETERY and v is CEMETERY:
            raise BothEndpointsCemetery(f"edge {e}")
        for w in (u, v):
            if w is CEMETERY:
                if not generalized:
                    raise CemeteryInStandardGraph(f"edge {e}")
            elif w not in vw:
                raise TraceLabError(f"edge {e} references unknown vertex {w}")
        ep[e] = _pair(u, v)
        ew[e] = float(beta)
        seen = set()
        for w in (u, v):
            if w is not CEMETERY and w not in seen:
                incident[w].append(e)
                seen.add(w)
    for v, a in vw.items():
        if a == 0.0 and incident[v]:
            raise NonpositiveWeight(f"vertex {v} has weight 0 but incident edges")
    return WeightedMultiGraph(
        vertices=tuple(sorted(vw)),
        edges=tuple(sorted(ew)),
        endpoints=ep,
        vertex_weights=vw,
        edge_weights=ew,
        generalized=generalized,
        incident={v: tuple(es) for v, es in incident.items()},
    )


def total_vertex_weight(g: WeightedMultiGraph) -> float:
    return g.total_weight()


def hop_distances(g: WeightedMultiGraph, sources: Iterable[int]) -> dict[int, int]:
    """Breadth-first hop distances from any source, ignoring weights."""
    dist = {s: 0 for s in sources}
    queue = deque(dist)
    while queue:
        v = queue.popleft()
        for w in g.neighbors(v):
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def ball(rooted: RootedGraph, radius: int) -> frozenset[int]:
    """Vertices within hop distance ``radius`` of any root."""
    if radius < 0:
        raise TraceLabError("radius must be nonnegative")
    dist = hop_distances(rooted.graph, rooted.roots)
    return frozenset(v for v, d in dist.items() if d <= radius)


def boundary(rooted: RootedGraph, radius: int) -> frozenset[int]:
    """Vertices at hop distance exactly ``radius`` from the root set."""
    if radius < 0:
        raise TraceLabError("radius must be nonnegative")
    dist = hop_distances(rooted.graph, rooted.roots)
    return frozenset(v for v, d in dist.items() if d == radius)


def disclosed_subgraph(g: WeightedMultiGraph, v0: Iterable[int]) -> WeightedMultiGraph:
    """Restrict to ``v0`` with outward edge endpoints redirected to the cemetery."""
    v0 = set(v0)
    if not v0:
        raise EmptyDisclosure("disclosure set is empty")
    for v in v0:
        if v not in g.vertex_weights:
            raise TraceLabError(f"vertex {v} not in graph")
    verts = {v: g.vertex_weights[v] for v in v0}
    edges = {}
    edge_ids = set()
    for v in v0:
        edge_ids.update(g.incident[v])
    for e in edge_ids:
        a, b = g.endpoints[e]
        a2 = a if (a is not CEMETERY and a in v0) else CEMETERY
        b2 = b if (b is not CEMETERY and b in v0) else CEMETERY
        edges[e] = (a2, b2, g.edge_weights[e])
    return build_graph(verts, edges, generalized=True)


def restricted_subgraph(g: WeightedMultiGraph, keep: Iterable[int]) -> WeightedMultiGraph:
    """Plain restriction: keep listed vertices and edges with both endpoints kept."""
    keep = set(keep)
    verts = {v: g.vertex_weights[v] for v in keep}
    edges = {}
    for e in g.edges:
        a, b = g.endpoints[e]
        if a in keep and (b in keep or b is CEMETERY):
            if b is CEMETERY:
                continue
            edges[e] = (a, b, g.edge_weights[e])
    return build_graph(verts, edges, generalized=False)


def disjoint_union(graphs: Sequence[WeightedMultiGraph]) -> tuple[WeightedMultiGraph, list[dict[int, int]]]:
    """Disjoint union with dense relabeling; returns the union and per-graph vertex maps."""
    verts: dict[int, float] = {}
    edges: dict[int, tuple] = {}
    maps: list[dict[int, int]] = []
    vnext = 0
    enext = 0
    for g in graphs:
        vmap = {}
        for v in g.vertices:
            vmap[v] = vnext
            verts[vnext] = g.vertex_weights[v]
            vnext += 1
        for e in g.edges:
            a, b = g.endpoints[e]
            a2 = vmap[a] if a is not CEMETERY else CEMETERY
            b2 = vmap[b] if b is not CEMETERY else CEMETERY
            edges[enext] = (a2, b2, g.edge_weights[e])
            enext += 1
        maps.append(vmap)
    generalized = any(g.generalized for g in graphs)
    return build_graph(verts, edges, generalized=generalized), maps


# ---------------------------------------------------------------------------
# Isomorphism and canonical labeling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Isomorphism:
    vertex_map: dict[int, int]
    edge_map: dict[int, int]


def _edge_tag(g: WeightedMultiGraph, hist: Mapping[int, int], e: int):
    return (g.edge_weights[e], hist.get(e, -1))


def _pair_multisets(g: WeightedMultiGraph, hist: Mapping[int, int]):
    """For each canonical endpoint pair, the sorted multiset of edge tags."""
    out: dict[tuple, list] = {}
    for e in g.edges:
        out.setdefault(g.endpoints[e], []).append(_edge_tag(g, hist, e))
    return {k: tuple(sorted(v)) for k, v in out.items()}


def _refine(graphs, colorings, hists):
    """Shared iterative color refinement over one or two graphs.

    Color values are comparable across the supplied graphs because signatures
    share one table per round; stops when no graph's partition grows finer.
    """
    while True:
        table: dict = {}
        new_colorings = []
        for g, colors, hist in zip(graphs, colorings, hists):
            sigs = {}
            for v in g.vertices:
                items = []
                for e in g.incident[v]:
                    a, b = g.endpoints[e]
                    tag = _edge_tag(g, hist, e)
                    if a == b and a is not CEMETERY:
                        items.append((tag, -2, colors[v]))  # loop marker
                    else:
                        other = b if a == v else a
                        oc = -1 if other is CEMETERY else colors[other]
                        items.append((tag, 0 if other is CEMETERY else 1, oc))
                sigs[v] = (colors[v], tuple(sorted(items)))
            newc = {}
            for v, s in sigs.items():
                if s not in table:
                    table[s] = len(table)
                newc[v] = table[s]
            new_colorings.append(newc)
        grew = any(
            len(set(nc.values())) > len(set(oc.values()))
            for nc, oc in zip(new_colorings, colorings)
        )
        colorings = new_colorings
        if not grew:
            return colorings


def _initial_colors(g, roots, hist, table=None):
    colors = {}
    if table is None:
        table = {}
    for v in g.vertices:
        cem = sorted(
            _edge_tag(g, hist, e)
            for e in g.incident[v]
            if CEMETERY in g.endpoints[e]
        )
        root_pos = roots.index(v) if v in roots else -1
        sig = (g.vertex_weights[v], g.degree(v), root_pos, tuple(cem))
        if sig not in table:
            table[sig] = len(table)
        colors[v] = table[sig]
    return colors


def is_isomorphic(
    a: RootedGraph | WeightedMultiGraph,
    b: RootedGraph | WeightedMultiGraph,
    *,
    history_a: Sequence[int] = (),
    history_b: Sequence[int] = (),
    size_cap: int = DEFAULT_ISO_CAP,
):
    """Search for a root-, weight-, and history-preserving isomorphism.

    Returns an :class:`Isomorphism` or ``None``. The mapping fixes the
    cemetery, matches vertex and edge weights exactly, takes roots to roots in
    order, and takes the k-th history edge of ``a`` to the k-th of ``b``.
    """
    ga, roots_a = (a.graph, a.roots) if isinstance(a, RootedGraph) else (a, ())
    gb, roots_b = (b.graph, b.roots) if isinstance(b, RootedGraph) else (b, ())
    if max(ga.n_vertices, gb.n_vertices) > size_cap:
        raise SizeLimitExceeded(f"isomorphism search capped at {size_cap} vertices")
    if ga.n_vertices != gb.n_vertices or len(ga.edges) != len(gb.edges):
        return None
    if len(roots_a) != len(roots_b) or len(history_a) != len(history_b):
        return None
    hist_a = {e: i for i, e in enumerate(history_a)}
    hist_b = {e: i for i, e in enumerate(history_b)}
    if sorted(ga.vertex_weights.values()) != sorted(gb.vertex_weights.values()):
        return None
    if sorted((_edge_tag(ga, hist_a, e)) for e in ga.edges) != sorted(
        (_edge_tag(gb, hist_b, e)) for e in gb.edges
    ):
        return None

    # joint initial coloring so color values are comparable across graphs
    table: dict = {}
    colors = [
        _initial_colors(ga, roots_a, hist_a, table),
        _initial_colors(gb, roots_b, hist_b, table),
    ]
    colors = _refine((ga, gb), colors, (hist_a, hist_b))
    ca, cb = colors
    count_a = sorted(_class_sizes(ca).items())
    count_b = sorted(_class_sizes(cb).items())
    if count_a != count_b:
        return None

    pairs_a = _pair_multisets(ga, hist_a)
    pairs_b = _pair_multisets(gb, hist_b)
    by_color_b: dict[int, list[int]] = {}
    for v, c in cb.items():
        by_color_b.setdefault(c, []).append(v)
    order = sorted(ga.vertices, key=lambda v: (len(by_color_b.get(ca[v], ())), ca[v], v))

    vmap: dict[int, int] = {}
    used: set[int] = set()

    def extend(i: int) -> bool:
        if i == len(order):
            return True
        v = order[i]
        for w in by_color_b.get(ca[v], ()):
            if w in used:
                continue
            ok = True
            for u, mu in vmap.items():
                pa = pairs_a.get(_pair(v, u))
                pb = pairs_b.get(_pair(w, mu))
                if pa != pb:
                    ok = False
                    break
            if ok:
                pa = pairs_a.get(_pair(v, v))
                pb = pairs_b.get(_pair(w, w))
                if pa != pb:
                    ok = False
            if ok:
                pa = pairs_a.get((v, CEMETERY))
                pb = pairs_b.get((w, CEMETERY))
                if pa != pb:
                    ok = False
            if ok:
                vmap[v] = w
                used.add(w)
                if extend(i + 1):
                    return True
                del vmap[v]
                used.remove(w)
        return False

    if not extend(0):
        return None

    # assemble the edge bijection: group both edge sets by mapped endpoint
    # pair and tag; within a group the order is immaterial
    def group(g, hist, pair_of):
        out: dict[tuple, list[int]] = {}
        for e in g.edges:
            key = (pair_of(g.endpoints[e]), _edge_tag(g, hist, e))
            out.setdefault(key, []).append(e)
        return out

    def map_pair(pair):
        u, v = pair
        mu = CEMETERY if u is CEMETERY else vmap[u]
        mv = CEMETERY if v is CEMETERY else vmap[v]
        return _pair(mu, mv)

    ga_groups = group(ga, hist_a, map_pair)
    gb_groups = group(gb, hist_b, lambda p: p)
    emap: dict[int, int] = {}
    for key, ea in ga_groups.items():
        eb = gb_groups.get(key)
        if eb is None or len(eb) != len(ea):
            return None
        for x, y in zip(sorted(ea), sorted(eb)):
            emap[x] = y
    return Isomorphism(vertex_map=dict(vmap), edge_map=emap)


def _class_sizes(colors: Mapping[int, int]) -> dict[int, int]:
    out: dict[int, int] = {}
    for c in colors.values():
        out[c] = out.get(c, 0) + 1
    return out


def canonical_key(
    g: WeightedMultiGraph,
    roots: Sequence[int] = (),
    history: Sequence[int] = (),
    *,
    node_cap: int = 20_000,
) -> tuple:
    """Canonical form of a small (rooted, history-carrying) graph.

    Two inputs produce equal keys exactly when they are isomorphic with roots
    and histories preserved. Individualization-refinement search; intended for
    exploration-sized graphs.
    """
    hist = {e: i for i, e in enumerate(history)}
    roots = tuple(roots)
    colors = _initial_colors(g, roots, hist)
    (colors,) = _refine((g,), [colors], [hist])
    budget = [node_cap]

    def encode(order: Sequence[int]) -> tuple:
        idx = {v: i for i, v in enumerate(order)}
        nv = len(order)

        def end_idx(x):
            return nv if x is CEMETERY else idx[x]

        edges = sorted(
            (
                min(end_idx(a), end_idx(b)),
                max(end_idx(a), end_idx(b)),
                g.edge_weights[e],
                hist.get(e, -1),
            )
            for e, (a, b) in ((e, g.endpoints[e]) for e in g.edges)
        )
        return (
            nv,
            tuple(idx[r] for r in roots),
            tuple(g.vertex_weights[v] for v in order),
            tuple(edges),
        )

    def search(colors) -> tuple:
        sizes = _class_sizes(colors)
        nonsingleton = sorted(
            (sz, c) for c, sz in sizes.items() if sz > 1
        )
        if not nonsingleton:
            order = sorted(g.vertices, key=lambda v: colors[v])
            return encode(order)
        budget[0] -= 1
        if budget[0] <= 0:
            raise ClassExplosion("canonical labeling search budget exhausted")
        _, target = nonsingleton[0]
        members = sorted(v for v in g.vertices if colors[v] == target)
        best = None
        fresh = max(colors.values()) + 1
        for v in members:
            c2 = dict(colors)
            c2[v] = fresh
            (c2,) = _refine((g,), [c2], [hist])
            cand = search(c2)
            if best is None or cand < best:
                best = cand
        return best

    return search(colors)


# ---------------------------------------------------------------------------
# Fixture file format
# ---------------------------------------------------------------------------


def graph_to_jsonable(g: WeightedMultiGraph, roots: Sequence[int] = ()) -> dict:
    def end_repr(x):
        return "CEMETERY" if x is CEMETERY else int(x)

    return {
        "vertices": [{"id": int(v), "alpha": g.vertex_weights[v]} for v in g.vertices],
        "edges": [
            {
                "id": int(e),
                "u": end_repr(g.endpoints[e][0]),
                "v": end_repr(g.endpoints[e][1]),
                "beta": g.edge_weights[e],
            }
            for e in g.edges
        ],
        "roots": [int(r) for r in roots],
        "generalized": g.generalized,
    }


def save_fixture(path, g: WeightedMultiGraph | RootedGraph) -> None:
    roots: tuple[int, ...] = ()
    if isinstance(g, RootedGraph):
        g, roots = g.graph, g.roots
    Path(path).write_text(json.dumps(graph_to_jsonable(g, roots), indent=1) + "\n")


def graph_from_jsonable(doc: Mapping):
    def end_parse(x):
        return CEMETERY if x == "CEMETERY" else int(x)

    verts = {int(v["id"]): float(v["alpha"]) for v in doc["vertices"]}
    edges = {
        int(e["id"]): (end_parse(e["u"]), end_parse(e["v"]), float(e["beta"]))
        for e in doc["edges"]
    }
    g = build_graph(verts, edges, generalized=bool(doc.get("generalized", False)))
    roots = tuple(int(r) for r in doc.get("roots", ()))
    if roots:
        return RootedGraph(g, roots)
    return g


def load_fixture(path):
    """Load a graph fixture; returns a RootedGraph when roots are present."""
    return graph_from_jsonable(json.loads(Path(path).read_text()))
