"""Finite discrete distributions, level sets and calibration.

A :class:`Distribution` is a dense probability vector over a finite domain.
A candidate ``q`` is calibrated with respect to a target ``p`` when every
level set ``B_t = {x : q_x = t}`` carries the same mass under both.
Equivalently, ``q`` is a coarsening of ``p``: ``p`` averaged over the blocks
of some partition of the domain.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .errors import (
    DomainMismatch,
    DomainTooLarge,
    InvalidPartition,
    NegativeProbability,
    SumOutOfTolerance,
    ZeroMassBucket,
)

SUM_TOL = 1e-9
DEDUP_TOL = 1e-12
# Above this many draws the sampler switches from per-draw inverse CDF to
# numpy's multinomial, which draws the same count vector in O(N).
INVERSE_CDF_MAX = 10_000_000


@dataclass(frozen=True)
class Domain:
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"domain size must be a positive integer, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.size:
                raise ValueError("labels must have one entry per domain element")
            if len(set(labels)) != len(labels):
                raise ValueError("labels must be unique")
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.size


@dataclass(frozen=True, eq=False)
class Distribution:
    """Validated, read-only probability vector. Build with :func:`validate_distribution`."""

    domain: Domain
    probs: np.ndarray

    @property
    def N(self) -> int:
        return self.domain.size

    def __len__(self):
        return self.domain.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def mass(self, block: Iterable[int]) -> float:
        idx = np.fromiter(block, dtype=np.int64)
        return float(self.probs[idx].sum())

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def __repr__(self):
        return f"Distribution(N={self.N}, probs={np.array2string(self.probs, precision=4, threshold=8)})"


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    domain: Domain
    counts: np.ndarray
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("an empirical distribution needs at least one sample")
        if int(self.counts.sum()) != self.m:
            raise ValueError("counts must sum to m")

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.m

    def as_distribution(self) -> Distribution:
        return validate_distribution(self.probs, self.domain)


@dataclass(frozen=True, eq=False)
class LevelSetPartition:
    """Level sets of ``source``: each value ``t`` maps to the indices holding it."""

    levels: dict[float, tuple[int, ...]]
    source: Distribution

    @property
    def values(self) -> list[float]:
        return sorted(self.levels)

    def blocks(self) -> list[tuple[int, ...]]:
        return [self.levels[t] for t in self.values]

    def __len__(self):
        return len(self.levels)


@dataclass(frozen=True)
class LevelRecord:
    t: float
    q_mass: float
    p_mass: float
    size: int


@dataclass(frozen=True)
class CalibrationReport:
    calibrated: bool
    records: tuple[LevelRecord, ...]
    max_discrepancy: float
    tol: float

    def __bool__(self):
        return self.calibrated


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def validate_distribution(probs, domain: Domain | int | None = None) -> Distribution:
    """Check ``probs`` is a probability vector over ``domain``; never renormalizes."""
    arr = np.array(probs, dtype=np.float64).reshape(-1)
    if domain is None:
        domain = Domain(arr.size)
    elif isinstance(domain, (int, np.integer)):
        domain = Domain(int(domain))
    if arr.size != domain.size:
        raise DomainMismatch(f"expected {domain.size} probabilities, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise NegativeProbability("probabilities must be finite")
    if np.any(arr < 0):
        raise NegativeProbability(f"negative probability at index {int(np.argmin(arr))}")
    total = math.fsum(arr.tolist())
    if abs(total - 1.0) > SUM_TOL:
        raise SumOutOfTolerance(total)
    return Distribution(domain, _freeze(arr))


def as_distribution(x) -> Distribution:
    if isinstance(x, Distribution):
        return x
    if isinstance(x, EmpiricalDistribution):
        return x.as_distribution()
    return validate_distribution(x)


def uniform(n: int) -> Distribution:
    return validate_distribution(np.full(n, 1.0 / n))


def point_mass(n: int, x: int) -> Distribution:
    v = np.zeros(n)
    v[x] = 1.0
    return validate_distribution(v)


def _same_domain(p: Distribution, q: Distribution):
    if p.N != q.N:
        raise DomainMismatch(f"domain sizes differ: {p.N} vs {q.N}")


def level_sets(q, rel_tol: float | None = None) -> LevelSetPartition:
    """Group indices of ``q`` by probability value.

    By default values must be bit-identical.  With ``rel_tol`` the sorted
    values are chained into one level while each stays within ``rel_tol`` of
    the level's smallest member; the level key is the mean of its members.
    """
    q = as_distribution(q)
    v = q.probs
    if rel_tol is None:
        groups: dict[float, list[int]] = {}
        for i, t in enumerate(v.tolist()):
            groups.setdefault(t, []).append(i)
        levels = {t: tuple(ix) for t, ix in groups.items()}
        return LevelSetPartition(levels, q)
    order = np.argsort(v, kind="stable")
    levels = {}
    start = 0
    for k in range(1, v.size + 1):
        if k == v.size or v[order[k]] - v[order[start]] > rel_tol * max(abs(v[order[start]]), 1e-300):
            members = tuple(sorted(int(i) for i in order[start:k]))
            levels[float(v[list(members)].mean())] = members
            start = k
    return LevelSetPartition(levels, q)


def is_calibrated(q, p, tol: float = 1e-9, rel_tol: float | None = None) -> CalibrationReport:
    q, p = as_distribution(q), as_distribution(p)
    _same_domain(p, q)
    records = []
    worst = 0.0
    for t, block in sorted(level_sets(q, rel_tol).levels.items()):
        idx = list(block)
        qm = math.fsum(q.probs[idx].tolist())
        pm = math.fsum(p.probs[idx].tolist())
        records.append(LevelRecord(t, qm, pm, len(idx)))
        worst = max(worst, abs(qm - pm))
    return CalibrationReport(worst <= tol, tuple(records), worst, tol)


def _check_partition(partition: Sequence[Iterable[int]], n: int) -> list[list[int]]:
    blocks = [sorted(int(i) for i in b) for b in partition]
    seen = [i for b in blocks for i in b]
    if any(len(b) == 0 for b in blocks):
        raise InvalidPartition("empty block")
    if sorted(seen) != list(range(n)):
        raise InvalidPartition("blocks must cover every index exactly once")
    return blocks


def coarsen(p, partition: Sequence[Iterable[int]]) -> Distribution:
    """Replace ``p`` on each block by the block average."""
    p = as_distribution(p)
    blocks = _check_partition(partition, p.N)
    out = np.empty(p.N)
    for b in blocks:
        out[b] = math.fsum(p.probs[b].tolist()) / len(b)
    return Distribution(p.domain, _freeze(out))


def _dedup_rows(rows: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    """Indices of the first occurrence of each distinct row (componentwise ``tol``)."""
    keys = np.round(rows / tol).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    # Rows straddling a rounding boundary get different keys; merge those too.
    cand = rows[first]
    order = np.lexsort(cand.T[::-1])
    keep = np.ones(first.size, dtype=bool)
    for a, b in zip(order[:-1], order[1:]):
        if np.max(np.abs(cand[a] - cand[b])) <= tol:
            keep[max(a, b)] = False
    return first[keep]


def calibrated_matrix(p, max_n: int = 12) -> np.ndarray:
    """Every member of the calibrated set of ``p`` as rows of a ``(K, N)`` array."""
    p = as_distribution(p)
    if p.N > max_n:
        raise DomainTooLarge(f"N={p.N} exceeds max_n={max_n} (Bell-number growth)")
    rows = _backend.coarsen_all(np.ascontiguousarray(p.probs))
    return rows[_dedup_rows(rows)]


def enumerate_calibrated(p, max_n: int = 12) -> list[Distribution]:
    """Brute-force oracle for the calibrated set: coarsen ``p`` on every set partition."""
    p = as_distribution(p)
    return [Distribution(p.domain, _freeze(row.copy())) for row in calibrated_matrix(p, max_n)]


def l1_distance(p, q) -> float:
    p, q = as_distribution(p), as_distribution(q)
    _same_domain(p, q)
    return float(np.abs(p.probs - q.probs).sum())


def tv_distance(p, q) -> float:
    return 0.5 * l1_distance(p, q)


def kl_divergence(p, q) -> float:
    """``sum p_x ln(p_x / q_x)``; ``0 ln 0 = 0`` and ``+inf`` if ``q`` misses support of ``p``."""
    p, q = as_distribution(p), as_distribution(q)
    _same_domain(p, q)
    s = p.probs > 0
    if np.any(q.probs[s] == 0):
        return math.inf
    return float(np.sum(p.probs[s] * np.log(p.probs[s] / q.probs[s])))


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Counter-based generator for trial ``trial`` of a run seeded by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))


def cumulative(p) -> np.ndarray:
    return np.cumsum(as_distribution(p).probs)


def draw_indices(p, m: int, rng: np.random.Generator, cdf: np.ndarray | None = None) -> np.ndarray:
    """``m`` i.i.d. draws from ``p`` by inverse CDF."""
    p = as_distribution(p)
    if cdf is None:
        cdf = np.cumsum(p.probs)
    u = rng.random(m) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    last = int(np.flatnonzero(p.probs > 0)[-1])
    np.minimum(idx, last, out=idx)
    return idx


def sample(p, m: int, seed: int, trial: int = 0) -> EmpiricalDistribution:
    p = as_distribution(p)
    if m < 1:
        raise ValueError("m must be at least 1")
    idx = draw_indices(p, m, trial_rng(seed, trial))
    counts = np.bincount(idx, minlength=p.N).astype(np.int64)
    return EmpiricalDistribution(p.domain, _freeze(counts), int(m))


@dataclass
class Sampler:
    """Sample access to ``p`` that counts every draw handed out.

    Consumers only see count vectors, never ``p`` itself.
    """

    p: Distribution
    samples_used: int = 0
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.p = as_distribution(self.p)
        self._cdf = np.cumsum(self.p.probs)

    def counts(self, m: int, rng: np.random.Generator) -> np.ndarray:
        m = int(m)
        self.samples_used += m
        if m <= INVERSE_CDF_MAX:
            idx = draw_indices(self.p, m, rng, self._cdf)
            return np.bincount(idx, minlength=self.p.N).astype(np.int64)
        pv = self.p.probs / math.fsum(self.p.probs.tolist())
        return rng.multinomial(m, pv).astype(np.int64)

    def empirical(self, m: int, rng: np.random.Generator) -> EmpiricalDistribution:
        return EmpiricalDistribution(self.p.domain, self.counts(m, rng), int(m))


def conditional_inverse_mean(p, block: Iterable[int]) -> float:
    """``E[1/p_X | X in B]`` for ``X ~ p``, i.e. ``|B| / p(B)``."""
    p = as_distribution(p)
    idx = np.fromiter(block, dtype=np.int64)
    mass = math.fsum(p.probs[idx].tolist())
    if mass <= 0 or np.any(p.probs[idx] <= 0):
        raise ZeroMassBucket("block needs positive probability on every element")
    return math.fsum((p.probs[idx] / mass * (1.0 / p.probs[idx])).tolist())


def min_mass_ratio(q, p) -> float:
    """``min q_x / p_x`` over the support of ``p``."""
    q, p = as_distribution(q), as_distribution(p)
    _same_domain(p, q)
    s = p.probs > 0
    return float(np.min(q.probs[s] / p.probs[s]))


def read_distribution(path) -> Distribution:
    """Read JSON ``{"labels": [...], "probs": [...]}`` or TSV ``label<TAB>prob`` lines."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        obj = json.loads(text)
        labels = obj.get("labels")
        probs = obj["probs"]
    else:
        labels, probs = [], []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            label, _, value = line.rstrip("\n").rpartition("\t")
            if not _:
                raise ValueError(f"TSV line without a tab: {line!r}")
            labels.append(label)
            probs.append(float(value))
    domain = Domain(len(probs), tuple(labels) if labels else None)
    return validate_distribution(probs, domain)


def write_distribution(dist, path, fmt: str | None = None) -> None:
    dist = as_distribution(dist)
    path = Path(path)
    fmt = fmt or ("tsv" if path.suffix in (".tsv", ".txt") else "json")
    if fmt == "json":
        obj = {"probs": [float(x) for x in dist.probs]}
        if dist.domain.labels is not None:
            obj = {"labels": list(dist.domain.labels), **obj}
        path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
    else:
        labels = dist.domain.labels or [str(i) for i in range(dist.N)]
        path.write_text("".join(f"{a}\t{float(b)!r}\n" for a, b in zip(labels, dist.probs)), encoding="utf-8")
