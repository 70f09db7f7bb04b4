"""Deterministic graph fixtures used by the tests and handy for the CLI."""
from __future__ import annotations

import numpy as np

from .generators import DegreeDistribution, pair_half_edges, sample_degree_sequence
from .graphs import WeightedMultiGraph, build_graph
from .stats import RngStream


def k2(alpha=(1.0, 1.0), beta=1.0) -> WeightedMultiGraph:
    return build_graph({1: alpha[0], 2: alpha[1]}, {0: (1, 2, beta)})


def k2_double_edge() -> WeightedMultiGraph:
    return build_graph({1: 1.0, 2: 1.0}, {0: (1, 2, 1.0), 1: (1, 2, 1.0)})


def path_graph(n: int, alpha=None) -> WeightedMultiGraph:
    verts = {i: (alpha[i] if alpha else 1.0) for i in range(n)}
    edges = {i: (i, i + 1, 1.0) for i in range(n - 1)}
    return build_graph(verts, edges)


def cycle_graph(n: int) -> WeightedMultiGraph:
    verts = {i: 1.0 for i in range(n)}
    edges = {i: (i, (i + 1) % n, 1.0) for i in range(n)}
    return build_graph(verts, edges)


def star_graph(leaves: int) -> WeightedMultiGraph:
    verts = {0: 1.0, **{i: 1.0 for i in range(1, leaves + 1)}}
    edges = {i - 1: (0, i, 1.0) for i in range(1, leaves + 1)}
    return build_graph(verts, edges)


def complete_graph(n: int) -> WeightedMultiGraph:
    verts = {i: 1.0 for i in range(n)}
    edges = {}
    eid = 0
    for i in range(n):
        for j in range(i + 1, n):
            edges[eid] = (i, j, 1.0)
            eid += 1
    return build_graph(verts, edges)


def loop_plus_edge() -> WeightedMultiGraph:
    """Loop at vertex 1 (weight 2) next to a plain edge."""
    return build_graph({1: 1.0, 2: 1.0}, {0: (1, 1, 2.0), 1: (1, 2, 1.0)})


def parallel_multigraph() -> WeightedMultiGraph:
    return build_graph(
        {1: 1.0, 2: 2.0, 3: 1.0},
        {0: (1, 2, 1.0), 1: (1, 2, 0.5), 2: (2, 3, 2.0), 3: (3, 3, 1.0)},
    )


def binary_tree(depth: int) -> WeightedMultiGraph:
    verts = {}
    edges = {}
    eid = 0
    n = 2 ** (depth + 1) - 1
    for v in range(n):
        verts[v] = 1.0
        if v > 0:
            edges[eid] = (v, (v - 1) // 2, 1.0)
            eid += 1
    return build_graph(verts, edges)


def hypercube(dim: int) -> WeightedMultiGraph:
    n = 1 << dim
    edges = {}
    eid = 0
    for v in range(n):
        for b in range(dim):
            w = v ^ (1 << b)
            if w > v:
                edges[eid] = (v, w, 1.0)
                eid += 1
    return build_graph({v: float(dim) for v in range(n)}, edges)


def weighted_random_graph(n: int, seed: int) -> WeightedMultiGraph:
    """Connected graph with random positive weights: a cycle plus chords."""
    rng = RngStream(seed, (901,)).generator()
    verts = {i: float(rng.uniform(0.5, 3.0)) for i in range(n)}
    edges = {}
    eid = 0
    for i in range(n):
        edges[eid] = (i, (i + 1) % n, float(rng.uniform(0.2, 2.0)))
        eid += 1
    for _ in range(n // 2):
        i, j = rng.integers(n), rng.integers(n)
        if i != j:
            edges[eid] = (int(i), int(j), float(rng.uniform(0.2, 2.0)))
            eid += 1
    return build_graph(verts, edges)


def regular_cm(n: int, degree: int, seed: int) -> WeightedMultiGraph:
    rng = RngStream(seed, (902,)).generator()
    return pair_half_edges([degree] * n, rng)


def mixed_cm(n: int, seed: int) -> WeightedMultiGraph:
    """Half degree-1, half degree-3 pairing graph."""
    rng = RngStream(seed, (903,)).generator()
    law = DegreeDistribution.from_weights({1: 0.5, 3: 0.5})
    return pair_half_edges(sample_degree_sequence(law, n, rng), rng)


def reversibility_corpus() -> list[tuple[str, WeightedMultiGraph]]:
    """Twenty fixtures spanning paths, cycles, weighted variants, multigraphs
    with loops and parallel edges, and pairing-model samples."""
    corpus = [
        ("k2", k2()),
        ("k2_alpha13", k2(alpha=(1.0, 3.0))),
        ("k2_beta2", k2(beta=2.0)),
        ("k2_double", k2_double_edge()),
        ("path3", path_graph(3)),
        ("path5", path_graph(5)),
        ("path10", path_graph(10)),
        ("path3_weighted", path_graph(3, alpha=[1.0, 2.0, 3.0])),
        ("cycle4", cycle_graph(4)),
        ("cycle20", cycle_graph(20)),
        ("cycle50", cycle_graph(50)),
        ("star3", star_graph(3)),
        ("k5", complete_graph(5)),
        ("loop_edge", loop_plus_edge()),
        ("parallel", parallel_multigraph()),
        ("btree3", binary_tree(3)),
        ("weighted17", weighted_random_graph(17, 5)),
        ("weighted23", weighted_random_graph(23, 6)),
        ("cm3_20", regular_cm(20, 3, 1)),
        ("cm4_16", regular_cm(16, 4, 2)),
    ]
    assert len(corpus) == 20
    return corpus
