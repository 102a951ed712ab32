"""Local losses ``l(q, x) = f(1/q_x)`` and their curvature metadata.

Every catalog entry carries ``f`` with its first two derivatives, a growth
envelope ``f(z) <= c z**r``, the left-strong-concavity rate ``C`` (``f`` is
``C(z)/z**2``-left-strongly concave) and the derivative envelope ``D``
(``f'(z) <= D(z)/z``).  The bounds module consumes these.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import DomainMismatch, ZeroMassBucket, as_distribution
from .errors import ParameterOutOfRange, ViolationAt

E = math.e
LOGLOG_CLAMP = E * (1 + 1e-12)

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LocalLoss:
    name: str
    f: Fn
    f1: Fn
    f2: Fn
    growth_c: float
    growth_r: float
    rate_C: Fn
    deriv_D: Fn
    strictly_concave: bool = True
    # Left end of the domain on which the metadata holds.
    z_min: float = 1.0
    # f evaluated from ln z; keeps f(beta) finite when beta overflows a double.
    f_from_log: Callable[[float], float] | None = None
    # lim f(z) as z -> inf, i.e. the loss at q_x = 0.
    f_inf: float = math.inf
    nonnegative: bool = True
    templates: dict = field(default_factory=dict)

    def __call__(self, q, x: int) -> float:
        return loss_value(self, q, x)

    def values(self, qv) -> np.ndarray:
        """Loss at every entry of the probability array ``qv``."""
        qv = np.asarray(qv, dtype=np.float64)
        out = np.full(qv.shape, self.f_inf, dtype=np.float64)
        pos = qv > 0
        if not np.any(pos):
            return out
        z = 1.0 / qv[pos]
        if self.z_min > 1.0 and np.any(z < self.z_min):
            warnings.warn(
                f"{self.name}: q_x above 1/{self.z_min:.4g} is outside the loss's natural domain; "
                "using the signed continuation (clamped where undefined)",
                RuntimeWarning,
                stacklevel=3,
            )
        out[pos] = self.f(z)
        return out


def _loglog_f(z):
    z = np.asarray(z, dtype=np.float64)
    zz = np.where(z > 1.0, z, LOGLOG_CLAMP)
    return np.log(np.log(zz))


def _const(v):
    return lambda z: np.full(np.shape(z), float(v)) if np.ndim(z) else float(v)


def log_loss() -> LocalLoss:
    return LocalLoss(
        name="log",
        f=np.log,
        f1=lambda z: 1.0 / z,
        f2=lambda z: -1.0 / np.square(z),
        growth_c=1.0,
        growth_r=0.5,
        rate_C=_const(1.0),
        deriv_D=_const(1.0),
        f_from_log=lambda L: L,
        templates={"strong": "Omega(eps^2)", "concentration": "O~(gamma^-2 ln(N/gamma)^2)",
                   "sample": "O(eps^-4 (ln N)^2)"},
    )


def powlog_loss(p: float) -> LocalLoss:
    """``(ln z)**p`` for ``p`` in (0, 1]; metadata is stated for ``z >= e``."""
    if not 0 < p <= 1:
        raise ParameterOutOfRange(f"power-log exponent must be in (0, 1], got {p}")
    if p == 1:
        base = log_loss()
        return LocalLoss(**{**base.__dict__, "name": "powlog:1", "z_min": 1.0})

    def f(z):
        return np.power(np.log(z), p)

    def f1(z):
        return p * np.power(np.log(z), p - 1) / z

    def f2(z):
        L = np.log(z)
        return (p * (p - 1) * np.power(L, p - 2) - p * np.power(L, p - 1)) / np.square(z)

    def C(z):
        L = np.log(z)
        return p * np.power(L, p - 1) + p * (1 - p) * np.power(L, p - 2)

    return LocalLoss(
        name=f"powlog:{p:g}",
        f=f,
        f1=f1,
        f2=f2,
        growth_c=1.0,
        growth_r=0.5,
        rate_C=C,
        deriv_D=_const(1.0),
        z_min=E,
        f_from_log=lambda L: L ** p,
        templates={"strong": "Omega(eps^2 ln(N/eps)^(p-1))",
                   "concentration": "O(gamma^-2 ln(1/delta) ln(N/(delta gamma))^(2p))",
                   "sample": "O(eps^-4 ln(1/delta) ln(N/(delta eps))^2)"},
    )


def loglog_loss() -> LocalLoss:
    """``ln ln z``, defined for ``z >= e`` (``q_x <= 1/e``)."""

    def f1(z):
        return 1.0 / (z * np.log(z))

    def f2(z):
        L = np.log(z)
        return -(1.0 + L) / (np.square(z) * np.square(L))

    def C(z):
        L = np.log(z)
        return (1.0 + L) / np.square(L)

    return LocalLoss(
        name="loglog",
        f=_loglog_f,
        f1=f1,
        f2=f2,
        growth_c=1.0,
        growth_r=0.5,
        rate_C=C,
        deriv_D=_const(1.0),
        z_min=E,
        f_from_log=lambda L: math.log(L),
        templates={"strong": "Omega(eps^2 / ln N)", "concentration": "O~(gamma^-2 lnln(N/gamma)^2)",
                   "sample": "O(eps^-4 (lnln N)^2 (ln N)^2)"},
    )


def sqlog_loss() -> LocalLoss:
    """``ln(e**2 z)**2 = (2 + ln z)**2`` with the rate capped at ``C = 2``."""
    return LocalLoss(
        name="sqlog",
        f=lambda z: np.square(2.0 + np.log(z)),
        f1=lambda z: 2.0 * (2.0 + np.log(z)) / z,
        f2=lambda z: -(2.0 + 2.0 * np.log(z)) / np.square(z),
        # max of (2 + ln z)^2 / sqrt(z) over z >= 1 is 16/e, at z = e^2
        growth_c=16.0 / E,
        growth_r=0.5,
        rate_C=_const(2.0),
        deriv_D=lambda z: 2.0 * np.log(z) + 4.0,
        f_from_log=lambda L: (2.0 + L) ** 2,
        templates={"strong": "Omega(eps^2)", "concentration": "O~(gamma^-2 ln(N/gamma)^4)",
                   "sample": "O(eps^-4 (ln N)^4)"},
    )


def linear_loss() -> LocalLoss:
    """``-q_x``, i.e. ``f(z) = -1/z``."""
    return LocalLoss(
        name="linear",
        f=lambda z: -1.0 / z,
        f1=lambda z: 1.0 / np.square(z),
        f2=lambda z: -2.0 / np.power(z, 3),
        growth_c=1.0,
        growth_r=0.5,
        rate_C=lambda z: 1.0 / z,
        deriv_D=_const(1.0),
        f_from_log=lambda L: -math.exp(-L),
        f_inf=0.0,
        nonnegative=False,
        templates={"strong": "Omega(eps^3 / N)"},
    )


def negsqrt_loss() -> LocalLoss:
    """``-sqrt(q_x)``, i.e. ``f(z) = -1/sqrt(z)``."""
    return LocalLoss(
        name="negsqrt",
        f=lambda z: -1.0 / np.sqrt(z),
        f1=lambda z: 0.5 * np.power(z, -1.5),
        f2=lambda z: -0.75 * np.power(z, -2.5),
        growth_c=1.0,
        growth_r=0.5,
        rate_C=lambda z: 0.75 / np.sqrt(z),
        deriv_D=_const(0.5),
        f_from_log=lambda L: -math.exp(-L / 2),
        f_inf=0.0,
        nonnegative=False,
        templates={"strong": "Omega(eps^2.5 / sqrt(N))"},
    )


def builtin_catalog(powlog_p: float = 0.5) -> list[LocalLoss]:
    return [log_loss(), powlog_loss(powlog_p), loglog_loss(), sqlog_loss(), linear_loss(), negsqrt_loss()]


def get_loss(name: str) -> LocalLoss:
    """Look up ``log``, ``powlog:<p>``, ``loglog``, ``sqlog``, ``linear`` or ``negsqrt``."""
    if isinstance(name, LocalLoss):
        return name
    key = name.strip().lower()
    if key.startswith("powlog"):
        _, _, arg = key.partition(":")
        return powlog_loss(float(arg) if arg else 0.5)
    table = {"log": log_loss, "loglog": loglog_loss, "sqlog": sqlog_loss,
             "linear": linear_loss, "negsqrt": negsqrt_loss}
    try:
        return table[key]()
    except KeyError:
        raise KeyError(f"unknown loss {name!r}; choose from log, powlog:<p>, {', '.join(list(table)[1:])}") from None


def loss_value(loss: LocalLoss, q, x: int) -> float:
    q = as_distribution(q)
    return float(loss.values(q.probs[x:x + 1])[0])


def _weighted_sum(w: np.ndarray, v: np.ndarray) -> float:
    # 0 * inf = 0: zero-weight entries never contribute.
    s = w > 0
    terms = w[s] * v[s]
    if np.any(np.isposinf(terms)):
        return math.inf
    return math.fsum(terms.tolist())


def expected_loss(loss: LocalLoss, q, p) -> float:
    """``E_{X~p} l(q, X)``."""
    q, p = as_distribution(q), as_distribution(p)
    if q.N != p.N:
        raise DomainMismatch(f"domain sizes differ: {q.N} vs {p.N}")
    return _weighted_sum(p.probs, loss.values(q.probs))


def loss_gap(loss: LocalLoss, q, p) -> float:
    """``l(q; p) - l(p; p)`` summed termwise, which keeps small gaps accurate."""
    q, p = as_distribution(q), as_distribution(p)
    if q.N != p.N:
        raise DomainMismatch(f"domain sizes differ: {q.N} vs {p.N}")
    s = p.probs > 0
    vq = loss.values(q.probs[s])
    if np.any(np.isposinf(vq)):
        return math.inf
    return math.fsum((p.probs[s] * (vq - loss.values(p.probs[s]))).tolist())


def empirical_loss(loss: LocalLoss, q, phat) -> float:
    """Average loss of ``q`` over the samples behind ``phat``."""
    q = as_distribution(q)
    if q.N != phat.domain.size:
        raise DomainMismatch(f"domain sizes differ: {q.N} vs {phat.domain.size}")
    return _weighted_sum(phat.counts.astype(np.float64), loss.values(q.probs)) / phat.m


def expected_loss_matrix(loss: LocalLoss, Q: np.ndarray, p) -> np.ndarray:
    """Termwise gaps ``l(q; p) - l(p; p)`` for every row ``q`` of ``Q``."""
    pv = as_distribution(p).probs
    s = pv > 0
    vq = loss.values(Q[:, s])
    vp = loss.values(pv[s])
    with np.errstate(invalid="ignore"):
        return (vq - vp) @ pv[s]


@dataclass
class ConcavityReport:
    loss: str
    z: np.ndarray
    slack: np.ndarray  # -f''(z) - C(z)/z^2, non-negative when the rate is valid
    min_slack: float
    monotone: bool
    concave: bool
    growth_ok: bool
    rate_monotone: bool
    inverse_premise: bool
    inverse_conclusion: bool

    @property
    def ok(self) -> bool:
        return (self.min_slack >= -1e-9 and self.monotone and self.concave and self.growth_ok
                and self.rate_monotone and (self.inverse_conclusion or not self.inverse_premise))


def default_grid(loss: LocalLoss, points: int = 400, z_max: float = 1e9) -> np.ndarray:
    return np.geomspace(loss.z_min, z_max, points)


def check_left_strong_concavity(loss: LocalLoss, z_grid: Iterable[float] | None = None,
                                tol: float = 1e-9, raise_on_violation: bool = True) -> ConcavityReport:
    """Grid check of ``f'' <= -C/z**2`` plus the shape invariants of the metadata.

    Also checks the inverse-concavity direction: where ``y -> f(1/y)`` is
    non-negative, decreasing and convex on the grid, ``f`` must be concave.
    """
    z = default_grid(loss) if z_grid is None else np.asarray(list(z_grid), dtype=np.float64)
    fz, f1, f2 = loss.f(z), loss.f1(z), loss.f2(z)
    C = np.broadcast_to(loss.rate_C(z), z.shape)
    slack = -f2 - C / np.square(z)
    env = loss.growth_c * np.power(z, loss.growth_r)
    monotone = bool(np.all(f1 >= -tol))
    concave = bool(np.all(f2 <= tol))
    growth_ok = bool(np.all(fz <= env * (1 + 1e-12) + tol))
    rate_monotone = bool(np.all(C >= -tol) and np.all(np.diff(C) <= tol * np.maximum(1.0, np.abs(C[:-1]))))
    # y = 1/z: d/dy f(1/y) = -f'(z) z^2, d2/dy2 = f''(z) z^4 + 2 f'(z) z^3
    dl = -f1 * z ** 2
    d2l = f2 * z ** 4 + 2 * f1 * z ** 3
    premise = bool(np.all(fz >= 0) and np.all(dl < 0) and np.all(d2l > 0))
    conclusion = concave
    rep = ConcavityReport(loss.name, z, slack, float(slack.min()), monotone, concave, growth_ok,
                          rate_monotone, premise, conclusion)
    if raise_on_violation:
        if rep.min_slack < -tol:
            i = int(np.argmin(slack))
            raise ViolationAt(float(z[i]), float(slack[i]))
        checks = [(monotone, "monotonicity", f1), (concave, "concavity", -f2),
                  (growth_ok, "growth envelope", env - fz)]
        for ok, what, margin in checks:
            if not ok:
                i = int(np.argmin(margin))
                raise ViolationAt(float(z[i]), float(margin[i]), what)
        if not rate_monotone:
            raise ViolationAt(float(z[int(np.argmax(np.diff(C)))]), float(np.max(np.diff(C))), "rate C non-increasing")
    return rep


def jensen_gap_lower_bound(p, block: Iterable[int], rate_b: Callable[[float], float]) -> float:
    """Lower bound ``b(mu)/32 * eps**2 / (p(B)**2 t**2)`` on the Jensen gap over ``block``.

    ``t = p(B)/|B|``, ``mu = 1/t`` and ``eps = sum_{x in B} |p_x - t|``.
    """
    p = as_distribution(p)
    idx = np.fromiter(block, dtype=np.int64)
    mass = math.fsum(p.probs[idx].tolist())
    if mass <= 0:
        raise ZeroMassBucket("block has zero mass")
    t = mass / idx.size
    eps = math.fsum(np.abs(p.probs[idx] - t).tolist())
    return float(rate_b(1.0 / t)) / 32.0 * eps ** 2 / (mass ** 2 * t ** 2)


def jensen_gap(loss: LocalLoss, p, block: Iterable[int]) -> float:
    """``f(1/t) - E[f(1/p_X) | X in B]``, the quantity the bound above controls."""
    p = as_distribution(p)
    idx = np.fromiter(block, dtype=np.int64)
    mass = math.fsum(p.probs[idx].tolist())
    if mass <= 0 or np.any(p.probs[idx] <= 0):
        raise ZeroMassBucket("block needs positive probability on every element")
    t = mass / idx.size
    inner = math.fsum((p.probs[idx] / mass * loss.f(1.0 / p.probs[idx])).tolist())
    return float(loss.f(np.array([1.0 / t]))[0]) - inner


def rate_b(loss: LocalLoss) -> Callable[[float], float]:
    """The left-strong-concavity modulus ``b(z) = C(z)/z**2``."""
    return lambda z: float(loss.rate_C(np.array([z]))[0]) / z ** 2
