"""Closed-form strong-properness, concentration and sample-properness bounds.

Everything that depends on ``beta ~ N**8 / delta`` is computed from
``ln(beta)``, so N up to 1e12 and beyond never overflows.  Each loss maps
``ln(beta)`` to ``f(beta)`` analytically through ``LocalLoss.f_from_log``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import GrowthEnvelopeTooFast, MissingRate, ParameterOutOfRange
from .losses import LocalLoss, get_loss

KINDS = (
    "strong-proper",
    "concentration",
    "sample-proper",
    "approx-strong-proper",
    "approx-concentration",
    "approx-sample-proper",
)


@dataclass(frozen=True)
class BoundReport:
    kind: str
    loss: str
    N: float
    eps: float | None = None
    gamma: float | None = None
    delta: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None
    c1: float = 1.0
    ln_beta: float | None = None
    ln_m: float | None = None
    gap: float | None = None
    vacuous: bool = False

    @property
    def m(self) -> float:
        if self.ln_m is None:
            return math.nan
        return math.exp(self.ln_m) if self.ln_m < 709 else math.inf

    @property
    def gap_positive(self) -> bool:
        return self.gap is not None and self.gap > 0

    def as_row(self) -> dict:
        return asdict(self)


def _C(loss: LocalLoss, z: float) -> float:
    if loss.rate_C is None:
        raise MissingRate(f"loss {loss.name!r} has no registered rate C(z)")
    return float(np.asarray(loss.rate_C(np.array([float(z)])), dtype=np.float64).ravel()[0])


def _D(loss: LocalLoss, z: float) -> float:
    return float(np.asarray(loss.deriv_D(np.array([float(z)])), dtype=np.float64).ravel()[0])


def _f(loss: LocalLoss, z: float) -> float:
    return float(loss.f(np.array([float(z)]))[0])


def _ln_f_of_beta(loss: LocalLoss, ln_beta: float) -> float:
    if not loss.nonnegative:
        raise ParameterOutOfRange(
            f"loss {loss.name!r} takes negative values; the concentration bound needs f >= 0")
    fb = loss.f_from_log(ln_beta) if loss.f_from_log else _f(loss, math.exp(ln_beta))
    if fb <= 0:
        raise ParameterOutOfRange(f"f(beta) = {fb} is not positive")
    return math.log(fb)


def _check_growth(loss: LocalLoss) -> None:
    if loss.growth_r > 0.5:
        raise GrowthEnvelopeTooFast(
            f"loss {loss.name!r} grows like z^{loss.growth_r}; the bound needs f(z) <= c sqrt(z)")


def _check_unit(name: str, v: float, hi_closed: bool = False) -> None:
    ok = 0 < v <= 1 if hi_closed else 0 < v < 1
    if not ok:
        raise ParameterOutOfRange(f"{name} must be in (0, 1{']' if hi_closed else ')'}, got {v}")


def _ln_beta(const: float, N: float, delta: float, gamma: float, c: float) -> float:
    return math.log(const) + 8 * math.log(N) - math.log(delta) - min(0.0, 2 * math.log(gamma / c))


def strong_properness_gap_bound(loss: LocalLoss | str, N: float, eps: float) -> float:
    """``C(4N/eps) * eps**2 / 128``, the guaranteed gap for calibrated q with ``|p - q|_1 = eps``."""
    loss = get_loss(loss)
    if not 0 <= eps <= 2:
        raise ParameterOutOfRange(f"eps must be in [0, 2], got {eps}")
    if eps == 0:
        return 0.0
    return _C(loss, 4 * N / eps) * eps ** 2 / 128


def strong_properness_report(loss: LocalLoss | str, N: float, eps: float) -> BoundReport:
    loss = get_loss(loss)
    return BoundReport("strong-proper", loss.name, N, eps=eps,
                       gap=strong_properness_gap_bound(loss, N, eps))


def concentration_bound(loss: LocalLoss | str, gamma: float, delta: float, N: float,
                        c1: float = 1.0, *, beta_const: float = 16.0,
                        kind: str = "concentration") -> BoundReport:
    """Samples needed for the empirical loss of a calibrated q to be gamma-close w.p. 1 - delta."""
    loss = get_loss(loss)
    _check_growth(loss)
    _check_unit("gamma", gamma, hi_closed=True)
    _check_unit("delta", delta)
    ln_beta = _ln_beta(beta_const, N, delta, gamma, loss.growth_c)
    ln_m = math.log(c1) + 2 * _ln_f_of_beta(loss, ln_beta) + math.log(math.log(1 / delta)) - 2 * math.log(gamma)
    return BoundReport(kind, loss.name, N, gamma=gamma, delta=delta, c1=c1,
                       ln_beta=ln_beta, ln_m=ln_m, vacuous=ln_m > math.log(N))


def sample_properness_bound(loss: LocalLoss | str, eps: float, delta: float, N: float,
                            c1: float = 1.0) -> BoundReport:
    """Samples needed so p beats every eps-far calibrated q on the sample w.p. 1 - delta.

    Here beta involves the accuracy gamma = C(4N/eps) eps^2 / 128 fixed
    first from the strong-properness gap, which resolves its self-reference.
    """
    loss = get_loss(loss)
    _check_growth(loss)
    if not 0 < eps <= 2:
        raise ParameterOutOfRange(f"eps must be in (0, 2], got {eps}")
    _check_unit("delta", delta)
    Cv = _C(loss, 4 * N / eps)
    gamma = Cv * eps ** 2 / 128
    ln_beta = _ln_beta(288.0, N, delta, gamma, loss.growth_c)
    ln_m = (math.log(c1) + 2 * _ln_f_of_beta(loss, ln_beta) + math.log(math.log(1 / delta))
            - 2 * math.log(Cv * eps ** 2))
    return BoundReport("sample-proper", loss.name, N, eps=eps, delta=delta, c1=c1,
                       ln_beta=ln_beta, ln_m=ln_m, gap=gamma, vacuous=ln_m > math.log(N))


def approx_strong_gap(loss: LocalLoss | str, N: float, eps: float, alpha1: float, alpha2: float) -> float:
    """Gap guaranteed over (alpha1, alpha2)-approximately calibrated q; may be negative."""
    loss = get_loss(loss)
    if not 0 <= alpha1 <= 0.5:
        raise ParameterOutOfRange(f"alpha1 must be in [0, 1/2], got {alpha1}")
    if alpha2 < 0:
        raise ParameterOutOfRange(f"alpha2 must be non-negative, got {alpha2}")
    if alpha2 == 0:
        if alpha1 == 0:
            return strong_properness_gap_bound(loss, N, eps)
        raise ParameterOutOfRange("alpha2 = 0 with alpha1 > 0 leaves C(N/(2 alpha2)) undefined")
    z = N / (2 * alpha2)
    core = _C(loss, z) / 32 * max(0.0, eps - alpha1 - 5 * alpha2) ** 2
    return core - 2 * alpha1 * _D(loss, z) - 3 * alpha2 * _f(loss, N / (3 * alpha2))


def approx_sample_properness_bound(loss: LocalLoss | str, eps: float, delta: float, N: float,
                                   alpha1: float, alpha2: float, c1: float = 1.0) -> BoundReport:
    loss = get_loss(loss)
    _check_growth(loss)
    _check_unit("delta", delta)
    if alpha2 == 0 and alpha1 == 0:
        r = sample_properness_bound(loss, eps, delta, N, c1)
        return BoundReport(**{**asdict(r), "kind": "approx-sample-proper", "alpha1": 0.0, "alpha2": 0.0})
    if not (0 < alpha1 <= eps ** 2 / 12 and 0 < alpha2 <= eps ** 2 / 12):
        raise ParameterOutOfRange(
            f"approximate sample properness needs 0 < alpha1, alpha2 <= eps^2/12 = {eps ** 2 / 12:.4g}")
    # beta is stated with C(2N/alpha2) and the sample count with C(N/(2 alpha2)).
    gamma = _C(loss, 2 * N / alpha2) * eps ** 2 / 128
    ln_beta = _ln_beta(576.0, N, delta, gamma, loss.growth_c)
    Cm = _C(loss, N / (2 * alpha2))
    ln_m = (math.log(c1) + 2 * _ln_f_of_beta(loss, ln_beta) + math.log(math.log(1 / delta))
            - 2 * math.log(Cm * eps ** 2))
    z = N / (2 * alpha2)
    gap = Cm * eps ** 2 / 384 - 2 * alpha1 * _D(loss, z) - 3 * alpha2 * _f(loss, N / (3 * alpha2))
    return BoundReport("approx-sample-proper", loss.name, N, eps=eps, delta=delta, alpha1=alpha1,
                       alpha2=alpha2, c1=c1, ln_beta=ln_beta, ln_m=ln_m, gap=gap,
                       vacuous=ln_m > math.log(N))


def approx_bounds(loss: LocalLoss | str, N: float, eps: float, alpha1: float, alpha2: float,
                  gamma: float, delta: float, c1: float = 1.0,
                  kinds: tuple[str, ...] = ("approx-strong-proper", "approx-concentration",
                                            "approx-sample-proper")) -> dict[str, BoundReport]:
    """The three approximate-calibration bounds, keyed by kind."""
    loss = get_loss(loss)
    if not 0 <= alpha1 <= 0.5:
        raise ParameterOutOfRange(f"alpha1 must be in [0, 1/2], got {alpha1}")
    out = {}
    if "approx-strong-proper" in kinds:
        out["approx-strong-proper"] = BoundReport(
            "approx-strong-proper", loss.name, N, eps=eps, alpha1=alpha1, alpha2=alpha2,
            gap=approx_strong_gap(loss, N, eps, alpha1, alpha2))
    if "approx-concentration" in kinds:
        r = concentration_bound(loss, gamma, delta, N, c1, beta_const=32.0, kind="approx-concentration")
        out["approx-concentration"] = BoundReport(**{**asdict(r), "alpha1": alpha1, "alpha2": alpha2})
    if "approx-sample-proper" in kinds:
        out["approx-sample-proper"] = approx_sample_properness_bound(loss, eps, delta, N, alpha1, alpha2, c1)
    return out


def compute(kind: str, loss: LocalLoss | str, N: float, eps: float | None = None,
            gamma: float | None = None, delta: float | None = None, alpha1: float = 0.0,
            alpha2: float = 0.0, c1: float = 1.0) -> BoundReport:
    """Dispatch on ``kind``; the CLI and its round-trip check both go through here."""
    if kind == "strong-proper":
        return strong_properness_report(loss, N, eps)
    if kind == "concentration":
        return concentration_bound(loss, gamma, delta, N, c1)
    if kind == "sample-proper":
        return sample_properness_bound(loss, eps, delta, N, c1)
    if kind in KINDS:
        return approx_bounds(loss, N, eps, alpha1, alpha2, gamma, delta, c1, kinds=(kind,))[kind]
    raise KeyError(f"unknown bound kind {kind!r}")
