"""Approximate calibration: the bucketing construction and its certifier.

Given any candidate q and sample access to p, the construction groups
outcomes into multiplicative buckets of q-value, estimates each bucket's
p-mass from samples, and spreads that mass uniformly inside the bucket.
Buckets with negligible estimated mass share a fixed alpha2/2 instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (Distribution, EmpiricalDistribution, Sampler, as_distribution, level_sets, trial_rng,
                   validate_distribution)
from .errors import DegenerateInput, DomainMismatch, InsufficientSamples, ParameterOutOfRange


@dataclass(frozen=True)
class ApproxCalibrationParams:
    alpha1: float
    alpha2: float
    delta: float

    def __post_init__(self):
        if not 0 < self.alpha1 <= 1:
            raise ParameterOutOfRange(f"alpha1 must be in (0, 1], got {self.alpha1}")
        if not 0 < self.alpha2 <= 1:
            raise ParameterOutOfRange(f"alpha2 must be in (0, 1], got {self.alpha2}")
        if not 0 < self.delta < 1:
            raise ParameterOutOfRange(f"delta must be in (0, 1), got {self.delta}")

    @property
    def gamma1(self) -> float:
        return self.alpha1 / 3


@dataclass
class ConstructionTrace:
    gamma1: float
    ratio: float  # bucket width factor 1 - gamma1/8
    bucket_count: int  # b; the catch-all bucket is b + 1
    bucket_of: np.ndarray  # bucket index of every outcome
    buckets: dict[int, np.ndarray]  # occupied buckets only
    accuracy: float
    bucket_delta: float
    estimates: dict[int, float]
    threshold: float
    low: list[int]
    high: list[int]
    weights: np.ndarray
    norm: float
    q_prime: Distribution
    samples_used: int
    multiplier: float = 1.0

    def boundary(self, i: int) -> float:
        """Upper edge ``(1 - gamma1/8)**(i - 1)`` of bucket ``i``."""
        return self.ratio ** (i - 1)

    def summary(self) -> dict:
        return {
            "gamma1": self.gamma1, "bucket_count": self.bucket_count, "occupied": len(self.buckets),
            "accuracy": self.accuracy, "bucket_delta": self.bucket_delta, "threshold": self.threshold,
            "low": self.low, "high": self.high, "norm": self.norm, "samples_used": self.samples_used,
            "multiplier": self.multiplier,
            "estimates": {str(k): v for k, v in self.estimates.items()},
        }


def required_samples(eps: float, delta: float) -> int:
    """Samples so every bucket estimate is eps-accurate with probability 1 - delta."""
    if eps <= 0 or not 0 < delta < 1:
        raise ParameterOutOfRange("need eps > 0 and delta in (0, 1)")
    return math.ceil(3 * math.log(2 / delta) / eps ** 2)


def estimate_bucket_masses(samples: EmpiricalDistribution, buckets, eps: float, delta: float,
                           check: bool = True) -> list[float]:
    """Fraction of samples falling in each bucket."""
    if check:
        need = required_samples(eps, delta)
        if samples.m < need:
            raise InsufficientSamples(samples.m, need)
    counts = samples.counts
    return [float(counts[np.asarray(list(B), dtype=np.int64)].sum()) / samples.m for B in buckets]


def bucket_count(N: int, alpha1: float) -> int:
    g = alpha1 / 3
    return math.ceil(math.log(g / (8 * N)) / math.log(1 - g / 8))


def assign_buckets(qv: np.ndarray, ratio: float, b: int) -> np.ndarray:
    """Bucket ``i`` holds ``ratio**i < q <= ratio**(i-1)``; everything at or below ``ratio**b`` goes to ``b + 1``."""
    out = np.full(qv.shape, b + 1, dtype=np.int64)
    pos = qv > 0
    idx = np.floor(np.log(qv[pos]) / math.log(ratio)).astype(np.int64) + 1
    out[pos] = np.minimum(np.maximum(idx, 1), b + 1)
    return out


def construction_sample_count(N: int, params: ApproxCalibrationParams, multiplier: float = 1.0) -> int:
    b = bucket_count(N, params.alpha1)
    acc = params.gamma1 * params.alpha2 / (8 * (b + 1))
    return max(1, math.ceil(required_samples(acc, params.delta / (b + 1)) * multiplier))


def make_approx_calibrated(q, p_sampler: Sampler, params: ApproxCalibrationParams, seed: int = 0,
                           trial: int = 0, multiplier: float = 1.0) -> tuple[Distribution, ConstructionTrace]:
    """Build ``q'`` that is (alpha1, alpha2)-approximately calibrated w.p. ``1 - delta``.

    ``multiplier`` scales the sample count; below 1 the per-bucket accuracy
    guarantee no longer holds, which is the point of exposing it.
    """
    q = as_distribution(q)
    if not isinstance(p_sampler, Sampler):
        p_sampler = Sampler(as_distribution(p_sampler))
    N = q.N
    if p_sampler.p.N != N:
        raise DomainMismatch(f"domain sizes differ: {N} vs {p_sampler.p.N}")
    g1 = params.gamma1
    ratio = 1 - g1 / 8
    b = bucket_count(N, params.alpha1)
    bucket_of = assign_buckets(q.probs, ratio, b)
    occupied = np.unique(bucket_of)
    buckets = {int(i): np.flatnonzero(bucket_of == i) for i in occupied}

    acc = g1 * params.alpha2 / (8 * (b + 1))
    bdelta = params.delta / (b + 1)
    m = construction_sample_count(N, params, multiplier)
    before = p_sampler.samples_used
    counts = p_sampler.counts(m, trial_rng(seed, trial))
    emp = EmpiricalDistribution(q.domain, counts, m)
    keys = list(buckets)
    est = estimate_bucket_masses(emp, [buckets[i] for i in keys], acc, bdelta, check=multiplier >= 1)
    estimates = dict(zip(keys, est))

    thr = params.alpha2 / (4 * (b + 1))
    low = [i for i in keys if estimates[i] <= thr]
    high = [i for i in keys if estimates[i] > thr]
    w = np.zeros(N)
    low_size = sum(buckets[i].size for i in low)
    for i in low:
        w[buckets[i]] = params.alpha2 / (2 * low_size)
    for i in high:
        w[buckets[i]] = estimates[i] / buckets[i].size
    norm = math.fsum(w.tolist())
    if norm <= 0:
        raise DegenerateInput("every weight is zero; no bucket received an estimate")
    qp = validate_distribution(w / norm, q.domain)
    trace = ConstructionTrace(g1, ratio, b, bucket_of, buckets, acc, bdelta, estimates, thr, low, high,
                              w, norm, qp, p_sampler.samples_used - before, multiplier)
    return qp, trace


@dataclass
class ApproxCalibrationReport:
    passed: bool
    exception_levels: list[float]
    exception_mass: float
    under_levels: list[float]
    records: list[tuple[float, float, float]] = field(default_factory=list)  # (t, q(B_t), p(B_t))

    def __bool__(self):
        return self.passed


def is_approx_calibrated(q, p, params: ApproxCalibrationParams | None = None, *, alpha1: float | None = None,
                         alpha2: float | None = None, tol: float = 1e-12) -> ApproxCalibrationReport:
    """Check approximate calibration with the greedy exception set.

    T collects every level whose q-mass exceeds ``(1 + alpha1)`` times its
    p-mass.  Any valid exception set must contain these levels, so the
    greedy T has the least q-mass and the check passes iff some T works.
    """
    if params is not None:
        alpha1, alpha2 = params.alpha1, params.alpha2
    q, p = as_distribution(q), as_distribution(p)
    if q.N != p.N:
        raise DomainMismatch(f"domain sizes differ: {q.N} vs {p.N}")
    records = []
    exc, under = [], []
    exc_mass = []
    for t, idx in level_sets(q).levels.items():
        ix = np.asarray(idx, dtype=np.int64)
        qm = math.fsum(q.probs[ix].tolist())
        pm = math.fsum(p.probs[ix].tolist())
        records.append((t, qm, pm))
        if qm > (1 + alpha1) * pm + tol:
            exc.append(t)
            exc_mass.append(qm)
        if qm < (1 - alpha1) * pm - tol:
            under.append(t)
    mass = math.fsum(exc_mass)
    passed = not under and mass <= alpha2 + tol
    return ApproxCalibrationReport(passed, exc, mass, under, records)
