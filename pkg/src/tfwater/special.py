"""Real branches of the Lambert W function and dilated Hermite functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["lambert_w0", "lambert_wm1", "HermiteBasis", "hermite_fn"]

_INV_E = math.exp(-1.0)
_BRANCH_TOL = 1e-15
_MAX_HALLEY = 50


def _residual_ok(w: float, x: float) -> bool:
    return abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))


def _halley(w: float, x: float) -> tuple[float, bool]:
    for _ in range(_MAX_HALLEY):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            return w, _residual_ok(w, x)
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 4e-16 * (1.0 + abs(w)):
            break
    return w, _residual_ok(w, x)


def _bisect(x: float, lo: float, hi: float, increasing: bool) -> float:
    # w*exp(w) is increasing on [-1, inf) and decreasing on (-inf, -1]
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        above = mid * math.exp(mid) > x
        if above == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _branch_point_series(x: float, sign: float) -> float:
    p = sign * math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3


def lambert_w0(x: float) -> float:
    """Principal branch W0 of the Lambert W function for real ``x >= -1/e``.

    Halley iteration from a branch-point series or logarithmic seed, with
    bisection as a fallback, so that ``|W exp(W) - x| <= 1e-12 max(1, |x|)``.
    """
    x = float(x)
    if math.isnan(x) or x < -_INV_E - _BRANCH_TOL:
        raise DomainError(f"lambert_w0 requires x >= -1/e, got {x!r}")
    if x <= -_INV_E:
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x < -0.25:
        w0 = _branch_point_series(x, 1.0)
    elif x < 3.0:
        w0 = math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w0 = l1 - l2 + l2 / l1
    w, ok = _halley(w0, x)
    if ok and w >= -1.0:
        return w
    hi = 0.0 if x < 0 else max(1.0, math.log(x) + 1.0)
    lo = -1.0 if x < 0 else 0.0
    return _bisect(x, lo, hi, increasing=True)


def lambert_wm1(x: float) -> float:
    """Lower real branch W_{-1} of the Lambert W function on ``[-1/e, 0)``.

    Returns ``W <= -1`` with ``W exp(W) = x``; ``W -> -inf`` as ``x -> 0-``.
    """
    x = float(x)
    if math.isnan(x) or x < -_INV_E - _BRANCH_TOL or x >= 0.0:
        raise DomainError(f"lambert_wm1 requires -1/e <= x < 0, got {x!r}")
    if x <= -_INV_E:
        return -1.0
    if x < -0.25:
        w0 = _branch_point_series(x, -1.0)
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w0 = l1 - l2 + l2 / l1
    w, ok = _halley(w0, x)
    if ok and w <= -1.0:
        return w
    # with u = -W >= 1: u = -ln(-x) + ln(u) and ln(u) < u/2, so u < -2 ln(-x)
    lo = 2.0 * math.log(-x) - 1.0
    return _bisect(x, lo, -1.0, increasing=False)


@dataclass(frozen=True)
class HermiteBasis:
    """L2-normalized Hermite functions dilated by ``gamma``.

    ``f_k(t) = gamma**-0.5 * H_k(t / gamma)`` where ``H_k`` is the k-th
    Hermite function. Orders ``0..max_order`` are available.
    """

    gamma: float = 1.0
    max_order: int = 64

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma!r}")
        if self.max_order < 0:
            raise DomainError(f"max_order must be >= 0, got {self.max_order!r}")

    def table(self, t, order: int | None = None) -> np.ndarray:
        """All orders ``0..order`` evaluated at ``t``; shape ``(order + 1, *t.shape)``."""
        order = self.max_order if order is None else order
        if not 0 <= order <= self.max_order:
            raise DomainError(f"order {order} outside 0..{self.max_order}")
        x = np.asarray(t, dtype=float) / self.gamma
        return self.gamma ** -0.5 * _hermite_table(x, order)

    def __call__(self, k: int, t):
        return hermite_fn(self, k, t)


def _hermite_table(x: np.ndarray, order: int) -> np.ndarray:
    # Normalized three-term recurrence run without the Gaussian factor; the
    # factor exp(-x^2/2) is carried in log form with periodic rescaling so
    # that neither overflow nor premature underflow occurs.
    out = np.empty((order + 1,) + x.shape)
    log_scale = -0.5 * x * x
    prev = np.zeros_like(x)
    cur = np.full_like(x, math.pi ** -0.25)
    out[0] = cur * np.exp(log_scale)
    rescale = 1e150
    for k in range(order):
        nxt = math.sqrt(2.0 / (k + 1)) * x * cur - math.sqrt(k / (k + 1)) * prev
        big = np.abs(nxt) > rescale
        if np.any(big):
            nxt = np.where(big, nxt / rescale, nxt)
            cur = np.where(big, cur / rescale, cur)
            log_scale = np.where(big, log_scale + math.log(rescale), log_scale)
        prev, cur = cur, nxt
        out[k + 1] = cur * np.exp(log_scale)
    return out


def hermite_fn(basis: HermiteBasis, k: int, t):
    """Value of the k-th dilated Hermite function of ``basis`` at ``t``."""
    if not 0 <= k <= basis.max_order:
        raise DomainError(f"order {k} outside 0..{basis.max_order}")
    x = np.asarray(t, dtype=float) / basis.gamma
    val = basis.gamma ** -0.5 * _hermite_table(x, k)[k]
    return float(val) if val.ndim == 0 else val
