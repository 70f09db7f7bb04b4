"""Statistical utilities: total variation distances, count tests, splittable RNG streams.

The RNG contract is normative for every experiment in the package: a stream is
identified by ``(seed, path)`` where ``path`` is a tuple of split indices.
Identical ``(seed, path)`` pairs reproduce bit-identical output and distinct
paths yield statistically independent streams, so replica-parallel runs cannot
perturb results.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np
from scipy import stats as sps

from .errors import TraceLabError

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class FiniteDist:
    """Probability distribution on a finite set of hashable labels."""

    probs: Mapping[Hashable, float]

    def __post_init__(self):
        total = 0.0
        for k, p in self.probs.items():
            if p < -_PROB_TOL:
                raise TraceLabError(f"negative probability for {k!r}: {p}")
            total += p
        if abs(total - 1.0) > 1e-9:
            raise TraceLabError(f"probabilities sum to {total}, expected 1")

    @classmethod
    def from_samples(cls, samples: Iterable[Hashable]) -> "FiniteDist":
        counts = Counter(samples)
        n = sum(counts.values())
        if n == 0:
            raise TraceLabError("no samples")
        return cls({k: c / n for k, c in counts.items()})

    @classmethod
    def from_weights(cls, weights: Mapping[Hashable, float]) -> "FiniteDist":
        total = float(sum(weights.values()))
        if total <= 0:
            raise TraceLabError("weights must have positive total")
        return cls({k: w / total for k, w in weights.items()})

    def prob(self, label) -> float:
        return self.probs.get(label, 0.0)

    def support(self):
        return set(self.probs)


def tv_exact(p: FiniteDist, q: FiniteDist) -> float:
    """Total variation distance (1/2) sum |p - q| over the union support."""
    labels = set(p.probs) | set(q.probs)
    return 0.5 * sum(abs(p.prob(k) - q.prob(k)) for k in labels)


@dataclass(frozen=True)
class TvEstimate:
    """Plug-in TV estimate between two empirical distributions.

    ``plug_in_bias`` is the approximate upward bias of the estimator on
    identical laws, of order sqrt(#classes / n); it is reported, never
    subtracted.
    """

    estimate: float
    n_classes: int
    n_a: int
    n_b: int
    plug_in_bias: float


def tv_empirical(samples_a: Iterable[Hashable], samples_b: Iterable[Hashable]) -> TvEstimate:
    ca = Counter(samples_a)
    cb = Counter(samples_b)
    na = sum(ca.values())
    nb = sum(cb.values())
    if na == 0 or nb == 0:
        raise TraceLabError("empty sample set")
    labels = set(ca) | set(cb)
    est = 0.5 * sum(abs(ca.get(k, 0) / na - cb.get(k, 0) / nb) for k in labels)
    # expected |fA - fB| on equal laws is ~ sqrt(2/pi) * sqrt(p (1/na + 1/nb))
    bias = 0.5 * np.sqrt(2.0 / np.pi) * sum(
        np.sqrt(((ca.get(k, 0) + cb.get(k, 0)) / (na + nb)) * (1.0 / na + 1.0 / nb))
        for k in labels
    )
    return TvEstimate(est, len(labels), na, nb, float(bias))


@dataclass(frozen=True)
class PoissonTestResult:
    statistic: float
    dof: int
    pvalue: float
    passed: bool
    level: float


def poisson_count_test(counts, rate: float, level: float = 0.99) -> PoissonTestResult:
    """Chi-square goodness of fit of integer counts against a Poisson law.

    Cells are pooled from the right until every expected count is at least 5.
    ``passed`` means the test does not reject at significance 1 - level.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.size
    if n == 0:
        raise TraceLabError("no counts supplied")
    if rate < 0:
        raise TraceLabError("rate must be nonnegative")
    if rate == 0:
        ok = bool(np.all(counts == 0))
        return PoissonTestResult(0.0 if ok else np.inf, 0, 1.0 if ok else 0.0, ok, level)
    kmax = int(counts.max())
    # candidate cells 0..kmax with a tail cell, pooled so expected >= 5
    pmf = sps.poisson.pmf(np.arange(kmax + 1), rate)
    tail = 1.0 - pmf.sum()
    expected = np.append(pmf * n, max(tail, 0.0) * n)
    observed = np.append(np.bincount(counts, minlength=kmax + 1), 0)
    cells_obs, cells_exp = [], []
    acc_o, acc_e = 0.0, 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            cells_obs.append(acc_o)
            cells_exp.append(acc_e)
            acc_o, acc_e = 0.0, 0.0
    if acc_e > 0 or acc_o > 0:
        if cells_exp:
            cells_obs[-1] += acc_o
            cells_exp[-1] += acc_e
        else:
            cells_obs.append(acc_o)
            cells_exp.append(acc_e)
    obs = np.asarray(cells_obs, dtype=float)
    exp = np.asarray(cells_exp, dtype=float)
    # renormalize expected mass onto the pooled cells
    exp *= obs.sum() / exp.sum()
    dof = max(len(obs) - 1, 0)
    if dof == 0:
        return PoissonTestResult(0.0, 0, 1.0, True, level)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    pvalue = float(sps.chi2.sf(stat, dof))
    return PoissonTestResult(stat, dof, pvalue, pvalue >= 1.0 - level, level)


@dataclass(frozen=True)
class RngStream:
    """Splittable counter-based random stream identified by (seed, path)."""

    seed: int
    path: tuple[int, ...] = field(default=())

    def split(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


def split(stream: RngStream, index: int) -> RngStream:
    """Child stream ``index`` of ``stream``; replica i uses split(master, i)."""
    return stream.split(index)
