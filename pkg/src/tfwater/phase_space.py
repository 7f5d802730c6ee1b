"""Quadrature of functions of ``|p_r(t, w)|^2`` over the time-frequency plane.

Waterfilling integrands such as ``ln_+(u / k)`` or ``min(k, u)`` are only
piecewise smooth in ``u = |p_r|^2``. Plain tensor rules lose accuracy on the
kink curve ``u = k``, so :class:`LevelQuadrature` integrates band regions
``lo < u <= hi`` with nested Gauss-Legendre rules whose inner limits are the
exact level-set crossings and whose outer segments end at the time extent of
each level set. The outer rule uses the substitution ``t = c - h cos(theta)``,
which absorbs the ``(t - t0)^{3/2}`` behaviour at tangency points.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq

__all__ = ["LevelQuadrature", "box_grid", "smooth_integral", "piecewise_integral", "peak"]

_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


@lru_cache(maxsize=32)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def box_grid(p, r: float = 1.0, coverage: float = 8.0, n: int = 513):
    """Tensor trapezoid nodes ``(t, w, weights)`` over the box of ``p_r``."""
    tl, th, wl, wh = p.spread(r).box(coverage)
    t = np.linspace(tl, th, n)
    w = np.linspace(wl, wh, n)
    wt = np.full(n, t[1] - t[0])
    wt[[0, -1]] *= 0.5
    ww = np.full(n, w[1] - w[0])
    ww[[0, -1]] *= 0.5
    return t, w, wt[:, None] * ww[None, :]


def smooth_integral(F: Callable, p, r: float = 1.0, coverage: float = 8.0, n: int = 513) -> float:
    """``\\iint F(|p_r|^2)`` for smooth ``F`` with ``F(0) = 0`` (trapezoid, spectrally accurate)."""
    t, w, wt = box_grid(p, r, coverage, n)
    u = np.abs(p.spread(r)(t[:, None], w[None, :])) ** 2
    return float(np.sum(F(u) * wt))


def peak(p, r: float = 1.0) -> float:
    """Maximum of ``|p_r|^2`` (refined)."""
    return LevelQuadrature.cached(p, r).peak


def piecewise_integral(F: Callable, p, r: float, levels) -> float:
    """``\\iint F(|p_r|^2)`` for ``F`` smooth between the given ``levels`` of ``u``."""
    levels = [lv for lv in sorted(levels) if lv > 0]
    if not levels:
        return smooth_integral(F, p, r)
    q = LevelQuadrature.cached(p, r)
    edges = [0.0] + levels + [math.inf]
    return sum(q.integrate(F, lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:]))


def _split(a: np.ndarray, b: np.ndarray, width: float):
    """Cut each interval ``[a_i, b_i]`` into equal pieces no longer than ``width``."""
    if a.size == 0:
        return a, b
    n = np.maximum(1, np.ceil((b - a) / width).astype(int))
    if np.all(n == 1):
        return a, b
    idx = np.repeat(np.arange(a.size), n)
    j = np.arange(idx.size) - np.repeat(np.cumsum(n) - n, n)
    step = (b - a) / n
    lo = a[idx] + j * step[idx]
    hi = np.where(j == n[idx] - 1, b[idx], lo + step[idx])
    return lo, hi


class LevelQuadrature:
    """Band integrals ``\\iint_{lo < u <= hi} F(u) dt dw`` with ``u = |p_r(t, w)|^2``."""

    _cache: dict = {}

    def __init__(self, p, r: float = 1.0, *, coverage: float = 8.0, n_samples: int = 512,
                 n_outer: int = 48, n_inner: int = 24):
        self.symbol = p.spread(r)
        self.box = self.symbol.box(coverage)
        self.n_outer = n_outer
        self.n_inner = n_inner
        self._extent_cache: dict = {}
        tl, th, wl, wh = self.box
        # longest single Gauss-Legendre panel: 4 decay scales of p_r
        self.max_panel = (4.0 * self.symbol.decay_scale[0], 4.0 * self.symbol.decay_scale[1])
        self.ts = np.linspace(tl, th, n_samples + 1)
        self.ws = np.linspace(wl, wh, n_samples + 1)
        self.m_samples, _ = self.profile(self.ts)
        self.peak = self._refine_peak()

    @classmethod
    def cached(cls, p, r: float = 1.0) -> "LevelQuadrature":
        key = (id(p.func), p.decay_scale, p.center, float(r))
        q = cls._cache.get(key)
        if q is None or q._func is not p.func:
            q = cls(p, r)
            q._func = p.func
            if len(cls._cache) > 64:
                cls._cache.clear()
            cls._cache[key] = q
        return q

    def u(self, t, w) -> np.ndarray:
        return np.abs(self.symbol(t, w)) ** 2

    def profile(self, t: np.ndarray):
        """``max_w u(t, w)`` and its maximizer for each entry of ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        vals = self.u(t[:, None], self.ws[None, :])
        j = np.argmax(vals, axis=1)
        dw = self.ws[1] - self.ws[0]
        a = self.ws[j] - dw
        b = self.ws[j] + dw
        # golden-section refinement inside the sampled bracket; the value error
        # is quadratic in the location error, so 40 steps reach rounding level
        for _ in range(40):
            c = b - _GOLDEN * (b - a)
            d = a + _GOLDEN * (b - a)
            left = self.u(t, c) > self.u(t, d)
            b = np.where(left, d, b)
            a = np.where(left, a, c)
        wstar = 0.5 * (a + b)
        ustar = self.u(t, wstar)
        sampled = vals[np.arange(t.size), j]
        better = ustar >= sampled
        return np.where(better, ustar, sampled), np.where(better, wstar, self.ws[j])

    def _refine_peak(self) -> float:
        j = int(np.argmax(self.m_samples))
        a = self.ts[max(j - 1, 0)]
        b = self.ts[min(j + 1, self.ts.size - 1)]
        f = lambda t: float(self.profile(np.array([t]))[0][0])
        for _ in range(40):
            c = b - _GOLDEN * (b - a)
            d = a + _GOLDEN * (b - a)
            if f(c) > f(d):
                b = d
            else:
                a = c
        return max(float(self.m_samples[j]), f(0.5 * (a + b)))

    def extents(self, level: float) -> list[float]:
        """Times where the level set ``u = level`` starts or stops."""
        hit = self._extent_cache.get(level)
        if hit is not None:
            return hit
        if len(self._extent_cache) > 256:
            self._extent_cache.clear()
        out = self._extent_cache[level] = self._find_extents(level)
        return out

    def _find_extents(self, level: float) -> list[float]:
        diff = self.m_samples - level
        out = []
        sgn = diff > 0
        for k in np.nonzero(sgn[:-1] != sgn[1:])[0]:
            f = lambda t: float(self.profile(np.array([t]))[0][0]) - level
            a, b = self.ts[k], self.ts[k + 1]
            fa, fb = f(a), f(b)
            if fa == 0:
                out.append(a)
            elif fa * fb < 0:
                out.append(brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=200))
            else:
                out.append(0.5 * (a + b))
        return out

    def _roots(self, t: np.ndarray, level: float, wa: np.ndarray, wb: np.ndarray) -> np.ndarray:
        ua = self.u(t, wa) > level
        for _ in range(60):
            mid = 0.5 * (wa + wb)
            um = self.u(t, mid) > level
            same = um == ua
            wa = np.where(same, mid, wa)
            wb = np.where(same, wb, mid)
        return 0.5 * (wa + wb)

    def _inner(self, t: np.ndarray, F: Callable, lo: float, hi: float, n_inner: int) -> np.ndarray:
        wl, wh = self.box[2], self.box[3]
        _, wstar = self.profile(t)
        cand = np.concatenate([np.broadcast_to(self.ws, (t.size, self.ws.size)), wstar[:, None]], axis=1)
        cand.sort(axis=1)
        uc = self.u(t[:, None], cand)
        roots = [[] for _ in range(t.size)]
        for level in (lo, hi):
            if not 0 < level < math.inf:
                continue
            above = uc > level
            ii, jj = np.nonzero(above[:, :-1] != above[:, 1:])
            if ii.size:
                rts = self._roots(t[ii], level, cand[ii, jj], cand[ii, jj + 1])
                for i, w in zip(ii, rts):
                    roots[i].append(w)
        xg, wg = _gauss_legendre(n_inner)
        node_w, node_wt, owner = [], [], []
        for i in range(t.size):
            ends = np.sort(np.array([wl, wh] + roots[i]))
            a, b = ends[:-1], ends[1:]
            keep = b > a
            a, b = a[keep], b[keep]
            if a.size == 0:
                continue
            um = self.u(t[i], 0.5 * (a + b))
            ok = (um > lo) & (um <= hi)
            a, b = _split(a[ok], b[ok], self.max_panel[1])
            if a.size == 0:
                continue
            half = 0.5 * (b - a)
            nodes = (0.5 * (a + b))[:, None] + half[:, None] * xg[None, :]
            node_w.append(nodes.ravel())
            node_wt.append((half[:, None] * wg[None, :]).ravel())
            owner.append(np.full(nodes.size, i))
        out = np.zeros(t.size)
        if not node_w:
            return out
        w_all = np.concatenate(node_w)
        owner = np.concatenate(owner)
        vals = F(self.u(t[owner], w_all)) * np.concatenate(node_wt)
        np.add.at(out, owner, vals)
        return out

    def _evaluate(self, F: Callable, lo: float, hi: float, n_outer: int, n_inner: int) -> float:
        if hi >= self.peak:
            hi = math.inf
        if lo >= self.peak:
            return 0.0
        tl, th = self.box[0], self.box[1]
        cuts = [tl, th]
        for level in (lo, hi):
            if 0 < level < math.inf:
                cuts += self.extents(level)
        cuts = np.unique(np.clip(cuts, tl, th))
        xg, wg = _gauss_legendre(n_outer)
        theta = 0.5 * math.pi * (xg + 1.0)
        wth = 0.5 * math.pi * wg
        ts, wts = [], []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            if lo > 0 and self.profile(np.array([0.5 * (a + b)]))[0][0] <= lo:
                continue
            # only the ends of a segment can be level-set tangency points
            pa, pb = _split(np.array([a]), np.array([b]), self.max_panel[0])
            for k, (sa, sb) in enumerate(zip(pa, pb)):
                c, h = 0.5 * (sa + sb), 0.5 * (sb - sa)
                if pa.size == 1:
                    ts.append(c - h * np.cos(theta))
                    wts.append(h * np.sin(theta) * wth)
                elif k == 0 or k == pa.size - 1:
                    # one-sided cosine map keeps clustering at the outer end only
                    phi = 0.25 * math.pi * (xg + 1.0)
                    wphi = 0.25 * math.pi * wg
                    if k == 0:
                        ts.append(sb - 2 * h * np.cos(phi))
                    else:
                        ts.append(sa + 2 * h * np.cos(phi))
                    wts.append(2 * h * np.sin(phi) * wphi)
                else:
                    ts.append(c + h * xg)
                    wts.append(h * wg)
        if not ts:
            return 0.0
        t = np.concatenate(ts)
        return float(np.dot(self._inner(t, F, lo, hi, n_inner), np.concatenate(wts)))

    def integrate(self, F: Callable, lo: float = 0.0, hi: float = math.inf, *,
                  rtol: float = 1e-10, max_doublings: int = 3, refine: bool = True):
        """Band integral and an error estimate from one node doubling.

        Returns ``(value, abs_err_estimate)``. Without ``refine`` only the base
        rule is evaluated and the error estimate is ``nan``.
        """
        no, ni = self.n_outer, self.n_inner
        val = self._evaluate(F, lo, hi, no, ni)
        if not refine:
            return val, math.nan
        err = math.inf
        for _ in range(max_doublings):
            no, ni = 2 * no, 2 * ni
            new = self._evaluate(F, lo, hi, no, ni)
            err = abs(new - val)
            val = new
            if err <= rtol * abs(val) or val == 0:
                break
        return val, err
