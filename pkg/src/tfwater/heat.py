"""Gaussian-symbol LTV filter ("heat channel") in closed form.

The symbol ``p(t, w) = exp(-(t^2/gamma^2 + gamma^2 w^2)/2)`` spread by ``r``
gives an operator with dilated Hermite eigenfunctions and geometric
eigenvalues ``c^2 rho^(2k+1)``, where ``delta = 2 arccoth(2 r^2)``,
``rho = exp(-delta)`` and ``c = cosh(delta/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .special import HermiteBasis, lambert_w0, lambert_wm1
from .weyl import WeylSymbol, gaussian_symbol

__all__ = [
    "HeatChannelModel",
    "LambertClosedForm",
    "EllipseOfConcentration",
    "model",
    "eigenvalue",
    "eigenvalues",
    "closed_form_capacity",
    "closed_form_rate",
    "eoc",
    "analytic_kernel",
]


def _arccoth(x: float) -> float:
    return 0.5 * math.log((x + 1.0) / (x - 1.0))


@dataclass(frozen=True)
class HeatChannelModel:
    """Parameters of the heat channel at spreading factor ``r``."""

    gamma: float
    r: float
    delta: float
    rho: float
    c: float

    @property
    def coth_delta(self) -> float:
        # coth(2 arccoth x) = (x^2 + 1) / (2x) with x = 2 r^2
        return self.r ** 2 + 0.25 / self.r ** 2

    @property
    def total_energy(self) -> float:
        """Sum of all eigenvalues, ``r^2 / 2``."""
        return 0.5 * self.r ** 2

    @property
    def symbol(self) -> WeylSymbol:
        return gaussian_symbol(self.gamma)

    def basis(self, max_order: int = 64) -> HermiteBasis:
        return HermiteBasis(self.gamma, max_order)

    def eigenvalue(self, k: int) -> float:
        return eigenvalue(self, k)

    def eigenvalues(self, rel_floor: float = 1e-14, max_count: int | None = None) -> np.ndarray:
        return eigenvalues(self, rel_floor, max_count)

    def order_for_tail(self, rel_tail: float) -> int:
        """Smallest ``K`` with ``sum_{k >= K} lambda_k < rel_tail * sum_k lambda_k``."""
        if not 0 < rel_tail < 1:
            raise DomainError(f"rel_tail must lie in (0, 1), got {rel_tail!r}")
        # the tail fraction is rho^(2K)
        k = math.ceil(math.log(rel_tail) / (2.0 * math.log(self.rho)))
        while k > 0 and self.rho ** (2 * (k - 1)) < rel_tail:
            k -= 1
        while self.rho ** (2 * k) >= rel_tail:
            k += 1
        return k


def model(gamma: float, r: float) -> HeatChannelModel:
    """Heat-channel parameters for dilation ``gamma > 0`` and spreading factor ``r >= 1``."""
    gamma = float(gamma)
    r = float(r)
    if not (math.isfinite(gamma) and gamma > 0):
        raise DomainError(f"gamma must be positive, got {gamma!r}")
    if not (math.isfinite(r) and r >= 1):
        raise DomainError(f"spreading factor must satisfy r >= 1, got {r!r}")
    delta = 2.0 * _arccoth(2.0 * r * r)
    return HeatChannelModel(gamma, r, delta, math.exp(-delta), math.cosh(0.5 * delta))


def eigenvalue(m: HeatChannelModel, k: int) -> float:
    """``lambda_k = c^2 rho^(2k+1)``."""
    if k < 0:
        raise DomainError(f"eigenvalue index must be >= 0, got {k}")
    return m.c ** 2 * m.rho ** (2 * k + 1)


def eigenvalues(m: HeatChannelModel, rel_floor: float = 1e-14, max_count: int | None = None) -> np.ndarray:
    """Descending eigenvalues down to ``rel_floor * lambda_0`` (at most ``max_count``)."""
    n = math.floor(math.log(rel_floor) / (2.0 * math.log(m.rho))) + 1 if rel_floor > 0 else 10 ** 6
    if max_count is not None:
        n = min(n, max_count)
    k = np.arange(max(n, 0))
    return m.c ** 2 * m.rho ** (2 * k + 1)


@dataclass(frozen=True)
class LambertClosedForm:
    """Closed-form value with the Lambert-W argument and branch value behind it."""

    value: float
    argument: float
    w: float
    branch: str


def closed_form_capacity(snr: float, r: float, *, details: bool = False):
    """Capacity in nats, ``(r^2/8) [W0((4 pi SNR - 1)/e) + 1]^2``.

    ``SNR = S / (2 pi r^2 theta^2)``. With ``details=True`` a
    :class:`LambertClosedForm` is returned instead of the float.
    """
    snr = float(snr)
    if not (snr > 0 and math.isfinite(snr)):
        raise DomainError(f"SNR must be positive and finite, got {snr!r}")
    if r <= 0:
        raise DomainError(f"r must be positive, got {r!r}")
    arg = (4.0 * math.pi * snr - 1.0) / math.e
    w = lambert_w0(arg)
    value = r * r / 8.0 * (w + 1.0) ** 2
    return LambertClosedForm(value, arg, w, "W0") if details else value


def closed_form_rate(sdr: float, r: float, *, details: bool = False):
    """Rate in nats, ``(r^2/8) [W_{-1}(-1/(e SDR)) + 1]^2`` for ``SDR >= 1``."""
    sdr = float(sdr)
    if not (sdr >= 1 and math.isfinite(sdr)):
        raise DomainError(f"SDR must satisfy 1 <= SDR < inf, got {sdr!r}")
    if r <= 0:
        raise DomainError(f"r must be positive, got {r!r}")
    arg = -1.0 / (math.e * sdr)
    w = -1.0 if sdr == 1.0 else lambert_wm1(arg)
    value = r * r / 8.0 * (w + 1.0) ** 2
    return LambertClosedForm(value, arg, w, "W-1") if details else value


@dataclass(frozen=True)
class EllipseOfConcentration:
    """Semi-axes of the ellipse of concentration, exact and large-``r`` approximations."""

    gamma: float
    r: float
    a_exact: float
    b_exact: float
    a_approx: float
    b_approx: float

    @property
    def area_exact(self) -> float:
        return math.pi * self.a_exact * self.b_exact

    @property
    def area_approx(self) -> float:
        return math.pi * self.a_approx * self.b_approx


def eoc(gamma: float, r: float) -> EllipseOfConcentration:
    """``a_x = sqrt(2 coth delta) gamma``, ``b_x = sqrt(2 coth delta) / gamma``; ``a = sqrt(2) r gamma``, ``b = sqrt(2) r / gamma``."""
    m = model(gamma, r)
    s = math.sqrt(2.0 * m.coth_delta)
    return EllipseOfConcentration(
        m.gamma, m.r, s * m.gamma, s / m.gamma, math.sqrt(2.0) * m.r * m.gamma, math.sqrt(2.0) * m.r / m.gamma)


def analytic_kernel(m: HeatChannelModel, t, t2=None, *, tol: float = 1e-17) -> np.ndarray:
    """Kernel ``sum_k c rho^(k+1/2) f_k(t) f_k(t')`` of ``P_r``, truncated once terms drop below ``tol``.

    ``t`` and ``t2`` are 1-D arrays; the result has shape ``(len(t), len(t2))``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    t2 = t if t2 is None else np.atleast_1d(np.asarray(t2, dtype=float))
    order = max(0, math.ceil(math.log(tol) / math.log(m.rho)))
    basis = m.basis(order)
    ft = basis.table(t, order)
    ft2 = ft if t2 is t else basis.table(t2, order)
    coef = m.c * m.rho ** (np.arange(order + 1) + 0.5)
    return (ft * coef[:, None]).T @ ft2
