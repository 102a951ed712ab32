"""Proper losses built from concave generators, and their Bregman divergences.

A concave ``H`` with supergradient ``dH`` gives the proper loss
``l(q, x) = H(q) + dH(q) . (e_x - q)``, whose expected-loss gap is the
divergence ``H(q) + dH(q) . (p - q) - H(p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import as_distribution, kl_divergence
from .errors import DomainMismatch, OddDomain, ParameterOutOfRange, UndefinedGradient


@dataclass(frozen=True)
class ConcaveGenerator:
    name: str
    H: Callable[[np.ndarray], float]
    dH: Callable[[np.ndarray], np.ndarray]
    # True when dH blows up at zero coordinates.
    singular_at_zero: bool = True


def _xlogx_inv(q):
    out = np.zeros_like(q)
    pos = q > 0
    out[pos] = q[pos] * np.log(1.0 / q[pos])
    return out


def _inv_or_inf(fn):
    def g(q):
        out = np.full(q.shape, np.inf)
        pos = q > 0
        out[pos] = fn(q[pos])
        return out
    return g


def shannon() -> ConcaveGenerator:
    return ConcaveGenerator(
        "shannon",
        H=lambda q: math.fsum(_xlogx_inv(q).tolist()),
        dH=_inv_or_inf(lambda v: np.log(1.0 / v) - 1.0),
    )


def quadratic() -> ConcaveGenerator:
    return ConcaveGenerator(
        "quad",
        H=lambda q: 0.5 - 0.5 * math.fsum((q * q).tolist()),
        dH=lambda q: -q,
        singular_at_zero=False,
    )


def power(alpha: float) -> ConcaveGenerator:
    """Separable ``h(z) = z**(1 - alpha) / (alpha (1 - alpha))``, so that ``-h''(z) = z**(-1 - alpha)``.

    With this scaling the l1 strong-concavity rate is at least 1 for
    ``0 < alpha < 1``.  At ``alpha = 1/2`` this is twice ``inverse_root``.
    """
    if alpha <= 0 or alpha == 1:
        raise ParameterOutOfRange(f"power generator needs alpha > 0 and alpha != 1, got {alpha}")
    k = 1.0 / (alpha * (1 - alpha))
    return ConcaveGenerator(
        f"power:{alpha:g}",
        H=lambda q: k * math.fsum(np.power(q, 1 - alpha).tolist()),
        dH=_inv_or_inf(lambda v: np.power(v, -alpha) / alpha),
    )


def inverse_root() -> ConcaveGenerator:
    """``H(q) = 2 sum sqrt(q)``, giving ``l(q, x) = 1/sqrt(q_x) + sum sqrt(q)``."""
    return ConcaveGenerator(
        "invroot",
        H=lambda q: 2.0 * math.fsum(np.sqrt(q).tolist()),
        dH=_inv_or_inf(lambda v: 1.0 / np.sqrt(v)),
    )


def get_generator(name: str) -> ConcaveGenerator:
    if isinstance(name, ConcaveGenerator):
        return name
    key = name.strip().lower()
    if key.startswith("power:"):
        return power(float(key.split(":", 1)[1]))
    table = {"shannon": shannon, "quad": quadratic, "quadratic": quadratic, "invroot": inverse_root}
    try:
        return table[key]()
    except KeyError:
        raise KeyError(f"unknown generator {name!r}; choose shannon, quad, invroot or power:<alpha>") from None


def _dot(g: np.ndarray, v: np.ndarray) -> float:
    # Terms with a zero weight drop out even where the gradient is infinite.
    s = v != 0
    terms = g[s] * v[s]
    return math.fsum(terms.tolist())


def loss_from_generator(g: ConcaveGenerator | str, q, x: int) -> float:
    """``H(q) + dH(q) . (e_x - q)``; ``+inf`` when ``q_x = 0`` and ``dH`` is singular there."""
    g = get_generator(g)
    qv = as_distribution(q).probs
    grad = g.dH(qv)
    if np.isinf(grad[x]):
        return math.inf
    return g.H(qv) + float(grad[x]) - _dot(grad, qv)


def losses_from_generator(g: ConcaveGenerator | str, q) -> np.ndarray:
    """The loss at every outcome at once."""
    g = get_generator(g)
    qv = as_distribution(q).probs
    grad = g.dH(qv)
    return g.H(qv) - _dot(grad, qv) + grad


def divergence(g: ConcaveGenerator | str, p, q) -> float:
    """Bregman divergence ``D_{-H}(p, q) = H(q) + dH(q) . (p - q) - H(p)``."""
    g = get_generator(g)
    pv, qv = as_distribution(p).probs, as_distribution(q).probs
    if pv.size != qv.size:
        raise DomainMismatch(f"domain sizes differ: {pv.size} vs {qv.size}")
    grad = g.dH(qv)
    d = pv - qv
    if np.any(np.isinf(grad) & (d != 0)):
        if np.any(np.isinf(grad) & (pv > 0)):
            return math.inf
        raise UndefinedGradient(f"{g.name}: supergradient undefined where q vanishes")
    return g.H(qv) + _dot(grad, d) - g.H(pv)


def expected_generated_loss(g: ConcaveGenerator | str, q, p) -> float:
    """``E_{X~p} l(q, X)`` for the generated loss."""
    pv = as_distribution(p).probs
    return _dot(losses_from_generator(g, q), pv)


def closed_form_divergence(name: str, p, q) -> float:
    """The divergence written directly (KL, half squared l2, inverse-root form)."""
    pv, qv = as_distribution(p).probs, as_distribution(q).probs
    key = get_generator(name).name
    if key == "shannon":
        return kl_divergence(pv, qv)
    if key == "quad":
        return 0.5 * math.fsum(((pv - qv) ** 2).tolist())
    if key == "invroot":
        if np.any(qv <= 0):
            return math.inf
        return math.fsum(((np.sqrt(pv) - np.sqrt(qv)) ** 2 / np.sqrt(qv)).tolist())
    raise KeyError(f"no closed form registered for {name!r}")


def hellinger_sq(p, q) -> float:
    """Squared Hellinger distance ``sum (sqrt(p) - sqrt(q))**2``, unhalved."""
    pv, qv = as_distribution(p).probs, as_distribution(q).probs
    return math.fsum(((np.sqrt(pv) - np.sqrt(qv)) ** 2).tolist())


def separable_rate(f: Callable[[np.ndarray], np.ndarray], q) -> float:
    """``1 / sum_x f(q_x)``: the l1 strong-concavity rate witnessed at q."""
    qv = as_distribution(q).probs
    return 1.0 / math.fsum(np.asarray(f(qv), dtype=np.float64).tolist())


def min_separable_rate(f: Callable[[np.ndarray], np.ndarray], N: int, trials: int = 1000,
                       seed: int = 0) -> float:
    """Smallest witnessed rate over uniform q and random Dirichlet(1) draws."""
    rng = np.random.default_rng(seed)
    best = separable_rate(f, np.full(N, 1.0 / N))
    for _ in range(trials):
        w = rng.exponential(size=N)
        best = min(best, separable_rate(f, w / w.sum()))
    return best


@dataclass(frozen=True)
class L2Counterexample:
    N: int
    l1_dist: Fraction
    l2_gap: Fraction
    l2_gap_float: float

    @property
    def gap_times_N(self) -> Fraction:
        return self.l2_gap * self.N


def l2_counterexample(N: int) -> L2Counterexample:
    """p uniform on the first half, q uniform on the second; l1 = 2, quadratic gap = 2/N.

    The gap is computed exactly in rationals; the float path runs the
    quadratic divergence itself as a cross-check.
    """
    if N < 2 or N % 2:
        raise OddDomain(f"N must be even and at least 2, got {N}")
    h = N // 2
    w = Fraction(1, h)
    p = [w] * h + [Fraction(0)] * h
    q = [Fraction(0)] * h + [w] * h
    l1 = sum((abs(a - b) for a, b in zip(p, q)), Fraction(0))
    gap = Fraction(1, 2) * sum(((a - b) ** 2 for a, b in zip(p, q)), Fraction(0))
    pf = np.array([float(v) for v in p])
    qf = np.array([float(v) for v in q])
    return L2Counterexample(N, l1, gap, divergence(quadratic(), pf, qf))
