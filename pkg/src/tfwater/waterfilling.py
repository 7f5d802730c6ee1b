"""Waterfilling on parallel Gaussian channels and reverse waterfilling on sources.

Discrete versions act on lists of variances. The time-frequency versions
replace the lists by the level sets of ``u = |p_r(t, w)|^2``:

* capacity: noise density ``N_r = theta^2 / (2 pi u)``, water level ``nu``,
  ``S = \\iint (nu - N_r)_+`` and ``C = (1/2 pi) \\iint 1/2 ln_+(nu / N_r)``;
* rate: signal density ``Phi_r = sigma^2 u / (2 pi)``, water table ``lambda``,
  ``D = \\iint min(lambda, Phi_r)`` and ``R = (1/2 pi) \\iint 1/2 ln_+(Phi_r / lambda)``.

Both reduce to a threshold ``kappa`` on ``u``; the constraint is solved for
``log kappa`` with a bracketing root finder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError
from .phase_space import LevelQuadrature, smooth_integral
from .weyl import WeylSymbol

__all__ = [
    "WaterfillResult",
    "ReverseWaterfillResult",
    "TFIntegralResult",
    "waterfill_discrete",
    "reverse_waterfill_discrete",
    "tf_capacity",
    "tf_rate",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class WaterfillResult:
    """Optimal input energies for parallel channels with noise variances ``noise_vars``.

    Attributes
    ----------
    water_level : float
        Common level ``sigma^2``; active channels get ``sigma^2 - nu_k^2``.
    K : int
        Number of active channels (the first ``K`` entries).
    powers : ndarray
        Energy per channel, zero for inactive ones.
    capacity_nats : float
        ``sum_{k<K} 1/2 ln(sigma^2 / nu_k^2)``.
    """

    water_level: float
    K: int
    powers: np.ndarray = field(repr=False)
    capacity_nats: float
    noise_vars: np.ndarray = field(repr=False)

    @property
    def capacity_bits(self) -> float:
        return self.capacity_nats / _LN2

    @property
    def channel_capacities(self) -> np.ndarray:
        """Per-channel capacity ``1/2 ln(sigma^2 / nu_k^2)`` of the active channels (nats)."""
        return 0.5 * np.log(self.water_level / self.noise_vars[: self.K])


@dataclass(frozen=True)
class ReverseWaterfillResult:
    """Distortion allocation for independent Gaussian components.

    ``trivial`` marks ``D`` equal to the total energy, where nothing needs
    to be transmitted.
    """

    water_table: float
    K: int
    distortions: np.ndarray = field(repr=False)
    rate_nats: float
    trivial: bool = False

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / _LN2


@dataclass(frozen=True)
class TFIntegralResult:
    """Outcome of a time-frequency waterfilling integral.

    ``level`` is the water level ``nu`` (capacity) or water table ``lambda``
    (rate), an energy density per unit time-frequency area. ``threshold`` is
    the matching level ``kappa`` of ``|p_r|^2`` bounding the region.
    """

    level: float
    value_nats: float
    achieved_constraint: float
    region_area: float
    threshold: float
    quad_error: float = math.nan

    @property
    def value_bits(self) -> float:
        return self.value_nats / _LN2


def waterfill_discrete(noise_vars, S: float) -> WaterfillResult:
    """Waterfilling on ascending noise variances (``inf`` marks dead channels)."""
    nu = np.asarray(noise_vars, dtype=float).ravel()
    S = float(S)
    if not (S > 0 and math.isfinite(S)):
        raise DomainError(f"total energy S must be positive and finite, got {S!r}")
    if nu.size == 0 or np.any(np.isnan(nu)) or np.any(nu <= 0):
        raise DomainError("noise variances must be a non-empty list of positive values")
    if np.any(nu[1:] < nu[:-1]):
        raise DomainError("noise variances must be in ascending order")
    finite = nu[np.isfinite(nu)]
    if finite.size == 0:
        raise DomainError("all channels have infinite noise")
    counts = np.arange(1, finite.size + 1)
    levels = (S + np.cumsum(finite)) / counts
    # a channel exactly at the water level stays inactive
    valid = finite < levels
    K = int(np.nonzero(valid)[0][-1]) + 1
    level = float(levels[K - 1])
    powers = np.zeros(nu.size)
    powers[:K] = level - finite[:K]
    cap = float(0.5 * np.sum(np.log(level / finite[:K])))
    return WaterfillResult(level, K, powers, cap, nu)


def reverse_waterfill_discrete(signal_vars, D: float) -> ReverseWaterfillResult:
    """Reverse waterfilling on descending signal variances for total distortion ``D``."""
    sv = np.asarray(signal_vars, dtype=float).ravel()
    D = float(D)
    if sv.size == 0 or np.any(~np.isfinite(sv)) or np.any(sv < 0):
        raise DomainError("signal variances must be a non-empty list of finite values >= 0")
    if np.any(np.diff(sv) > 0):
        raise DomainError("signal variances must be in descending order")
    total = float(np.sum(sv))
    if not (D > 0 and math.isfinite(D)):
        raise DomainError(f"distortion must be positive, got {D!r}")
    if D > total * (1 + 1e-12):
        raise DomainError(f"distortion {D:g} exceeds the total energy {total:g}")
    if D >= total * (1 - 1e-15):
        return ReverseWaterfillResult(float(sv[0]), 0, sv.copy(), 0.0, trivial=True)
    n = sv.size
    tails = np.concatenate([np.cumsum(sv[::-1])[::-1], [0.0]])  # tails[K] = sum_{k>=K}
    K = np.arange(1, n + 1)
    theta2 = (D - tails[1:]) / K
    below = np.concatenate([sv[1:], [0.0]])  # sigma_K^2, zero past the end
    valid = (theta2 > 0) & (below <= theta2) & (theta2 < sv)
    idx = np.nonzero(valid)[0]
    if idx.size == 0:
        # rounding at an exact tie; take the candidate with the smallest violation
        viol = np.maximum(below - theta2, 0) + np.maximum(theta2 - sv, 0)
        viol[theta2 <= 0] = np.inf
        idx = np.array([int(np.argmin(viol))])
    k = int(idx[0]) + 1
    t2 = float(theta2[k - 1])
    dist = np.minimum(sv, t2)
    rate = float(0.5 * np.sum(np.log(sv[:k] / t2)))
    return ReverseWaterfillResult(t2, k, dist, rate)


def _solve_threshold(constraint, target: float, peak: float, increasing: bool, what: str):
    """Find ``x = ln(peak / kappa) >= 0`` with ``constraint(kappa) = target``.

    ``increasing`` tells whether the constraint grows with ``x``.
    """
    f = lambda x: constraint(peak * math.exp(-x)) - target
    hi = 1.0
    while True:
        fh = f(hi)
        if (fh > 0) == increasing:
            break
        hi *= 2.0
        if hi > 700.0:
            raise ConvergenceError(
                f"{what}: no bracket for the water level",
                diagnostics={"target": target, "peak": peak, "last_x": hi, "last_residual": fh})
    lo = 0.0 if hi == 1.0 else hi / 2.0
    try:
        x, info = brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200, full_output=True)
    except (ValueError, RuntimeError) as exc:
        raise ConvergenceError(f"{what}: root finding failed ({exc})",
                               diagnostics={"target": target, "bracket": (lo, hi)}) from exc
    if not info.converged:
        raise ConvergenceError(f"{what}: root finding did not converge",
                               diagnostics={"target": target, "iterations": info.iterations})
    return peak * math.exp(-x)


def tf_capacity(p: WeylSymbol, r: float, S: float, theta2: float) -> TFIntegralResult:
    """Capacity by waterfilling over the time-frequency plane.

    Parameters
    ----------
    p : WeylSymbol
        Channel symbol; ``p_r`` is its spread version.
    r : float
        Spreading factor.
    S : float
        Average input energy per transmission.
    theta2 : float
        Two-sided noise PSD.
    """
    S = float(S)
    theta2 = float(theta2)
    if not (S > 0 and math.isfinite(S)):
        raise DomainError(f"S must be positive and finite, got {S!r}")
    if not (theta2 > 0 and math.isfinite(theta2)):
        raise DomainError(f"theta2 must be positive and finite, got {theta2!r}")
    q = LevelQuadrature.cached(p, r)
    scale = theta2 / (2.0 * math.pi)

    def energy(kappa, refine=False):
        return q.integrate(lambda u: scale * (1.0 / kappa - 1.0 / u), kappa, math.inf, refine=refine)

    kappa = _solve_threshold(lambda k: energy(k)[0], S, q.peak, increasing=True, what="tf_capacity")
    s_val, s_err = energy(kappa, refine=True)
    cap, c_err = q.integrate(lambda u: 0.25 / math.pi * np.log(u / kappa), kappa, math.inf)
    area, _ = q.integrate(lambda u: np.ones_like(u), kappa, math.inf)
    return TFIntegralResult(scale / kappa, cap, s_val, area, kappa, max(c_err, 0.0))


def tf_rate(p: WeylSymbol, r: float, D: float, sigma2: float) -> TFIntegralResult:
    """Rate-distortion value by reverse waterfilling over the time-frequency plane.

    ``D`` must lie in ``(0, E(r)]`` with ``E(r) = (sigma2 / 2 pi) \\iint |p_r|^2``.
    """
    D = float(D)
    sigma2 = float(sigma2)
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise DomainError(f"sigma2 must be positive and finite, got {sigma2!r}")
    scale = sigma2 / (2.0 * math.pi)
    energy = scale * smooth_integral(lambda u: u, p, r)
    if not (D > 0 and math.isfinite(D)):
        raise DomainError(f"distortion must be positive, got {D!r}")
    if D > energy * (1 + 1e-10):
        raise DomainError(f"distortion {D:g} exceeds the source energy {energy:g}")
    q = LevelQuadrature.cached(p, r)
    if D >= energy * (1 - 1e-14):
        return TFIntegralResult(scale * q.peak, 0.0, energy, 0.0, q.peak, 0.0)

    # D = E - \iint_{u > kappa} (Phi_r - lambda), so only the compact region is integrated
    def distortion(kappa, refine=False):
        excess, err = q.integrate(lambda u: scale * (u - kappa), kappa, math.inf, refine=refine)
        return energy - excess, err

    kappa = _solve_threshold(lambda k: distortion(k)[0], D, q.peak, increasing=False, what="tf_rate")
    d_val, _ = distortion(kappa, refine=True)
    rate, r_err = q.integrate(lambda u: 0.25 / math.pi * np.log(u / kappa), kappa, math.inf)
    area, _ = q.integrate(lambda u: np.ones_like(u), kappa, math.inf)
    return TFIntegralResult(scale * kappa, rate, d_val, area, kappa, max(r_err, 0.0))
