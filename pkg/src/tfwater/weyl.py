"""Weyl symbols of LTV filters and their discretization on a uniform grid.

A symbol ``p(t, w)`` defines the operator

    (P f)(t) = 1/(2 pi) \\iint p((t + t')/2, w) exp(i (t - t') w) f(t') dt' dw,

whose kernel is sampled on a time grid with the quadrature weight ``dt``
folded into the matrix. The spread symbol is ``p_r(t, w) = p(t/r, w/r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DomainError, GridTooSmallError
from . import phase_space

__all__ = [
    "WeylSymbol",
    "gaussian_symbol",
    "Grid2D",
    "DiscreteOperator",
    "SampledSymbol",
    "SpectralData",
    "MomentSummary",
    "symbol_to_kernel",
    "kernel_to_symbol",
    "spectrum",
    "trace_identity_check",
    "szego_gap",
    "compose_check",
    "symbol_moments",
    "symbol_energy",
    "ln_plus",
]

DEFAULT_COVERAGE = 7.0
DEFAULT_MIN_N = 256
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class WeylSymbol:
    """Time-frequency transfer function ``p(t, w)`` of an LTV filter.

    ``func`` must accept broadcastable arrays ``(t, w)``. ``decay_scale`` holds
    the e-folding scales ``(T0, W0)`` in time and angular frequency, and
    ``center`` the point the symbol is concentrated around.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    decay_scale: tuple[float, float]
    center: tuple[float, float] = (0.0, 0.0)
    name: str = "symbol"

    def __call__(self, t, w):
        t = np.asarray(t, dtype=float)
        w = np.asarray(w, dtype=float)
        return np.broadcast_to(np.asarray(self.func(t, w)), np.broadcast(t, w).shape)

    def spread(self, r: float) -> "WeylSymbol":
        """Spread symbol ``p_r(t, w) = p(t/r, w/r)``."""
        if not r >= 1:
            raise DomainError(f"spreading factor must be >= 1, got {r!r}")
        if r == 1:
            return self
        f = self.func
        t0, w0 = self.decay_scale
        ct, cw = self.center
        return WeylSymbol(lambda t, w: f(t / r, w / r), (r * t0, r * w0),
                          (r * ct, r * cw), f"{self.name}_r{r:g}")

    def scaled(self, alpha: float) -> "WeylSymbol":
        f = self.func
        return WeylSymbol(lambda t, w: alpha * f(t, w), self.decay_scale, self.center,
                          f"{alpha:g}*{self.name}")

    def shifted(self, t0: float = 0.0, w0: float = 0.0) -> "WeylSymbol":
        """Symbol translated in phase space, ``p(t - t0, w - w0)``."""
        f = self.func
        ct, cw = self.center
        return WeylSymbol(lambda t, w: f(t - t0, w - w0), self.decay_scale,
                          (ct + t0, cw + w0), f"{self.name}_shift")

    def conj(self) -> "WeylSymbol":
        f = self.func
        return WeylSymbol(lambda t, w: np.conj(f(t, w)), self.decay_scale, self.center,
                          f"conj({self.name})")

    def box(self, coverage: float = 8.0) -> tuple[float, float, float, float]:
        """Phase-space box ``(t_lo, t_hi, w_lo, w_hi)`` spanning ``coverage`` decay scales."""
        t0, w0 = self.decay_scale
        ct, cw = self.center
        return (ct - coverage * t0, ct + coverage * t0, cw - coverage * w0, cw + coverage * w0)

    def check_decay(self, scales: float = 8.0, tol: float = 1e-12, n: int = 257) -> float:
        """Largest ``|p|`` on the boundary of the ``scales`` box relative to its peak.

        Raises :class:`GridTooSmallError` if it exceeds ``tol``.
        """
        tl, th, wl, wh = self.box(scales)
        t = np.linspace(tl, th, n)
        w = np.linspace(wl, wh, n)
        inner = np.abs(self(t[:, None], w[None, :]))
        peak = inner.max()
        if peak == 0:
            return 0.0
        edge = max(inner[0].max(), inner[-1].max(), inner[:, 0].max(), inner[:, -1].max())
        ratio = edge / peak
        if ratio > tol:
            raise GridTooSmallError(
                f"|p| at {scales:g} decay scales is {ratio:.3g} of its peak (limit {tol:g})")
        return ratio


def gaussian_symbol(gamma: float = 1.0) -> WeylSymbol:
    """Bivariate Gaussian symbol ``exp(-(t^2/gamma^2 + gamma^2 w^2)/2)`` of the heat channel."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma!r}")
    g2 = gamma * gamma

    def func(t, w):
        return np.exp(-0.5 * (t * t / g2 + g2 * w * w))

    return WeylSymbol(func, (gamma, 1.0 / gamma), name=f"gauss(gamma={gamma:g})")


@dataclass(frozen=True)
class Grid2D:
    """Uniform time grid ``t_i = t_min + i dt`` and its FFT-dual frequency grid.

    The frequency grid has ``n_omega = 2 n_t`` points with spacing
    ``pi / (n_t dt)`` and covers ``[-pi/dt, pi/dt)``.
    """

    t_min: float
    n_t: int
    dt: float

    def __post_init__(self):
        if self.n_t < 2 or self.n_t & (self.n_t - 1):
            raise DomainError(f"n_t must be a power of two >= 2, got {self.n_t}")
        if not self.dt > 0:
            raise DomainError("dt must be positive")

    @property
    def t(self) -> np.ndarray:
        return self.t_min + self.dt * np.arange(self.n_t)

    @property
    def n_omega(self) -> int:
        return 2 * self.n_t

    @property
    def d_omega(self) -> float:
        return math.pi / (self.n_t * self.dt)

    @property
    def omega(self) -> np.ndarray:
        return (np.arange(self.n_omega) - self.n_t) * self.d_omega

    @property
    def t_max(self) -> float:
        return self.t_min + (self.n_t - 1) * self.dt

    @classmethod
    def for_symbol(cls, p: WeylSymbol, r: float = 1.0, *, coverage: float = DEFAULT_COVERAGE,
                   n_min: int = DEFAULT_MIN_N, n: int | None = None) -> "Grid2D":
        """Smallest power-of-two grid whose phase-space box holds ``coverage`` scales of ``p_r``."""
        t0, w0 = p.decay_scale
        ct, cw = p.center
        half_t = r * (coverage * t0 + abs(ct))
        half_w = r * (coverage * w0 + abs(cw))
        # n dt >= 2 half_t and pi/dt >= half_w
        need = 2.0 * half_t * half_w / math.pi
        if n is None:
            n = max(n_min, 1 << max(1, math.ceil(math.log2(need))))
        elif n < need:
            raise GridTooSmallError(f"grid of {n} points cannot cover {need:.0f} required")
        dt = 2.0 * half_t / n
        return cls(-half_t, n, dt)


@dataclass
class DiscreteOperator:
    """Kernel of an integral operator sampled on ``grid``, times ``dt``."""

    grid: Grid2D
    matrix: np.ndarray

    @property
    def kernel(self) -> np.ndarray:
        return self.matrix / self.grid.dt

    def adjoint(self) -> "DiscreteOperator":
        return DiscreteOperator(self.grid, self.matrix.conj().T)

    def __matmul__(self, other: "DiscreteOperator") -> "DiscreteOperator":
        return DiscreteOperator(self.grid, self.matrix @ other.matrix)

    def power(self, n: int) -> "DiscreteOperator":
        return DiscreteOperator(self.grid, np.linalg.matrix_power(self.matrix, n))

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f


@dataclass
class SampledSymbol:
    """Symbol values on the grid points ``t`` times the frequency grid ``omega``."""

    t: np.ndarray
    omega: np.ndarray
    values: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def d_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def integral(self) -> complex:
        """``\\iint values dt dw`` by the rectangle rule on the periodic grid."""
        s = self.values.sum() * self.dt * self.d_omega
        return s.real if np.isrealobj(self.values) else s

    def scaled(self, factor: float) -> "SampledSymbol":
        return SampledSymbol(self.t, self.omega, factor * self.values)


@dataclass
class SpectralData:
    """Descending eigenvalues of ``P_r^* P_r`` and grid-orthonormal singular functions."""

    lambdas: np.ndarray
    f_vecs: np.ndarray | None
    g_vecs: np.ndarray | None
    grid: Grid2D
    cutoff: float
    trusted: np.ndarray = field(repr=False, default=None)

    @property
    def n_trusted(self) -> int:
        return int(np.count_nonzero(self.trusted))

    def f(self, k: int) -> np.ndarray:
        return self.f_vecs[:, k]

    def g(self, k: int) -> np.ndarray:
        return self.g_vecs[:, k]


@dataclass(frozen=True)
class MomentSummary:
    """Moments of the normalized principal density ``|p_r|^2 / \\iint |p_r|^2``."""

    m1: float
    m2: float
    s11: float
    s22: float
    s12: float
    r_lower_bound: float

    @property
    def determinant(self) -> float:
        return self.s11 * self.s22 - self.s12 ** 2


def symbol_to_kernel(p: WeylSymbol, r: float = 1.0, grid: Grid2D | None = None,
                     *, chunk: int = 256, check: bool = True) -> DiscreteOperator:
    """Sample the kernel of the operator with spread symbol ``p_r``.

    For each midpoint ``s = (t_i + t_j)/2`` the frequency integral is a
    length ``n_omega`` discrete Fourier sum; entries are multiplied by ``dt``.
    """
    if grid is None:
        grid = Grid2D.for_symbol(p, r)
    pr = p.spread(r)
    n, dt = grid.n_t, grid.dt
    nw = grid.n_omega
    omega = grid.omega
    scale = nw * grid.d_omega / (2.0 * math.pi) * dt
    # lag l = i - j sits at FFT index l mod nw; (-1)^l from the -pi/dt grid origin
    lags = np.arange(-(n - 1), n)
    lag_idx = lags % nw
    lag_sign = np.where(lags % 2 == 0, 1.0, -1.0) * scale
    mat = np.zeros((n, n), dtype=complex)
    peak = 0.0
    edge = 0.0
    n_mid = 2 * n - 1
    for m0 in range(0, n_mid, chunk):
        m = np.arange(m0, min(n_mid, m0 + chunk))
        s = grid.t_min + 0.5 * dt * m
        vals = np.asarray(pr(s[:, None], omega[None, :]), dtype=complex)
        av = np.abs(vals)
        if av.size:
            peak = max(peak, av.max())
            edge = max(edge, av[:, 0].max(), av[:, -1].max())
            if m0 == 0:
                edge = max(edge, av[0].max())
            if m[-1] == n_mid - 1:
                edge = max(edge, av[-1].max())
        h = np.fft.ifft(vals, axis=1)[:, lag_idx] * lag_sign
        for row, mm in zip(h, m):
            i = np.arange(max(0, mm - n + 1), min(mm, n - 1) + 1)
            mat[i, mm - i] = row[2 * i - mm + n - 1]
    if check and peak > 0 and edge > BOUNDARY_TOL * peak:
        raise GridTooSmallError(
            f"|p_r| on the grid boundary is {edge / peak:.3g} of its peak "
            f"(limit {BOUNDARY_TOL:g}); enlarge the grid")
    amax = np.abs(mat).max()
    if amax == 0 or np.abs(mat.imag).max() <= 1e-13 * amax:
        mat = np.ascontiguousarray(mat.real)
    return DiscreteOperator(grid, mat)


def _half_shift(kernel: np.ndarray) -> np.ndarray:
    """Band-limited interpolation of ``k(t_i + dt/2, t_j + dt/2)``."""
    n = kernel.shape[0]
    big = 2 * n
    q = np.fft.fftfreq(big) * big
    ph = np.exp(1j * math.pi * q / big)
    ph[big // 2] = 0.0
    spec = np.fft.fft2(kernel, s=(big, big))
    spec *= ph[:, None]
    spec *= ph[None, :]
    out = np.fft.ifft2(spec)[:n, :n]
    return out.real if np.isrealobj(kernel) else out


def kernel_to_symbol(op: DiscreteOperator) -> SampledSymbol:
    """Weyl symbol of a discretized operator on the grid points times the dual frequency grid.

    ``sigma(x, xi) = \\int exp(-i xi x') h(x + x'/2, x - x'/2) dx'``; odd lags
    need the kernel at half-shifted nodes, obtained by band-limited
    interpolation.
    """
    grid = op.grid
    n, dt = grid.n_t, grid.dt
    nw = grid.n_omega
    kern = op.kernel
    shifted = _half_shift(kern)
    rot = np.zeros((n, nw), dtype=np.result_type(kern, shifted, float))
    i = np.arange(n)
    for k in range(-(n - 1), n):
        col = i - (k + 1) // 2 if k >= 0 else i + (-k) // 2
        row = col + k
        ok = (col >= 0) & (col < n) & (row >= 0) & (row < n)
        src = kern if k % 2 == 0 else shifted
        rot[ok, k % nw] = src[row[ok], col[ok]]
    sign = np.where(np.arange(nw) % 2 == 0, 1.0, -1.0)
    rot *= sign
    # FFT index l lands on xi_l = (l - n) d_omega because of the sign flip above
    vals = np.fft.fft(rot, axis=1) * dt
    scale = np.abs(kern).max()
    if np.allclose(kern, kern.conj().T, rtol=0, atol=1e-13 * scale):
        vals = vals.real
    return SampledSymbol(grid.t, grid.omega, vals)


def spectrum(op: DiscreteOperator, cutoff: float = 1e-10, *, vectors: bool = True) -> SpectralData:
    """Eigenvalues of ``P^* P`` as squared singular values of the operator matrix.

    Singular vectors are rescaled by ``dt**-0.5`` so they are orthonormal as
    grid functions; eigenvalues below ``cutoff * lambda_0`` are flagged untrusted.
    """
    dt = op.grid.dt
    if vectors:
        u, s, vh = scipy.linalg.svd(op.matrix, lapack_driver="gesdd")
        f_vecs = vh.conj().T / math.sqrt(dt)
        g_vecs = u / math.sqrt(dt)
        # fix the sign so the largest entry of each f_k is positive
        idx = np.argmax(np.abs(f_vecs), axis=0)
        ph = f_vecs[idx, np.arange(f_vecs.shape[1])]
        ph = ph / np.abs(np.where(ph == 0, 1, ph))
        ph = np.where(ph == 0, 1, ph)
        f_vecs = f_vecs / ph
        g_vecs = g_vecs / ph
        if np.isrealobj(op.matrix):
            f_vecs, g_vecs = f_vecs.real, g_vecs.real
    else:
        s = scipy.linalg.svd(op.matrix, compute_uv=False, lapack_driver="gesdd")
        f_vecs = g_vecs = None
    lambdas = s * s
    lead = lambdas[0] if lambdas.size else 0.0
    trusted = lambdas >= cutoff * lead if lead > 0 else np.zeros(lambdas.shape, bool)
    return SpectralData(lambdas, f_vecs, g_vecs, op.grid, cutoff, trusted)


def symbol_energy(p: WeylSymbol, r: float = 1.0) -> float:
    """``(1/2 pi) \\iint |p_r|^2``, equal to ``c_p r^2``."""
    return phase_space.smooth_integral(lambda u: u, p, r) / (2.0 * math.pi)


def trace_identity_check(spec: SpectralData, p: WeylSymbol, r: float = 1.0):
    """Compare ``sum lambda_k`` against ``(1/2 pi) \\iint |p_r|^2``.

    Returns ``(sum, integral, rel_gap)``; the gap is 0 when both vanish.
    """
    total = float(np.sum(spec.lambdas))
    integral = symbol_energy(p, r)
    if integral == 0:
        return total, 0.0, 0.0 if total == 0 else math.inf
    return total, integral, abs(total - integral) / integral


def ln_plus(x):
    """``max(0, ln x)`` with ``ln_+(0) = 0``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 1.0, np.log(np.where(x > 0, x, 1.0)), 0.0)


def szego_gap(spec: SpectralData, p: WeylSymbol, r: float, g: Callable, a: float = 1.0,
              b: float = 1.0, *, kinks: tuple[float, ...] = (), domain: float | None = None):
    """Eigenvalue sum versus phase-space integral for ``G(z) = a g(b z)``.

    ``kinks`` lists arguments where ``g`` is not smooth (1 for ``ln_+`` and
    ``min(1, x)``); the integral is split there so quadrature stays spectrally
    accurate. Returns ``(lhs, rhs, |lhs - rhs| / r^2)``.
    """
    lam = np.asarray(spec.lambdas, dtype=float)
    if domain is not None:
        top = b * max(lam.max(initial=0.0), phase_space.peak(p, r))
        if top > domain * (1 + 1e-12) or b < 0:
            raise DomainError(f"b * Lambda_p = {top:g} outside g's domain [0, {domain:g}]")
    lhs = float(a * np.sum(g(b * lam)))
    levels = sorted(k / b for k in kinks if b > 0 and k > 0)
    rhs = a * phase_space.piecewise_integral(lambda u: g(b * u), p, r, levels) / (2.0 * math.pi)
    return lhs, float(rhs), abs(lhs - rhs) / (r * r)


@dataclass(frozen=True)
class ComposeReport:
    r: float
    n: int
    max_residual: float
    scaled_residual: float
    residual_integral: float
    trace_gap: float
    symbol: SampledSymbol = field(repr=False)


def compose_check(p: WeylSymbol, r: float, n: int = 1, grid: Grid2D | None = None) -> ComposeReport:
    """Residual of the Weyl symbol of ``(P_r^* P_r)^n`` against ``|p_r|^{2n}``.

    The composition is carried out on the discretized operator. The report
    holds the max residual ``e(r)``, ``e(r) r^2``, ``(1/2 pi) \\iint`` of the
    residual and ``trace - (1/2 pi) \\iint |p_r|^{2n}`` for comparison.
    """
    if n not in (1, 2):
        raise DomainError("compose_check supports n in {1, 2}")
    op = symbol_to_kernel(p, r, grid)
    a = op.adjoint() @ op
    an = a if n == 1 else a @ a
    sym = kernel_to_symbol(an)
    principal = np.abs(p.spread(r)(sym.t[:, None], sym.omega[None, :])) ** (2 * n)
    resid = sym.values - principal
    e = float(np.abs(resid).max())
    resid_int = SampledSymbol(sym.t, sym.omega, resid).integral() / (2.0 * math.pi)
    trace = float(np.trace(an.matrix).real)
    principal_int = phase_space.smooth_integral(lambda u: u ** n, p, r) / (2.0 * math.pi)
    return ComposeReport(r, n, e, e * r * r, float(np.real(resid_int)), trace - principal_int, sym)


def symbol_moments(p: WeylSymbol, r: float = 1.0) -> MomentSummary:
    """First and second central moments of ``rho_r = |p_r|^2 / \\iint |p_r|^2``.

    The spreading-factor bound ``(2 sqrt(s1^2 s2^2 - s12^2))^{-1/2}`` uses the
    ``r = 1`` moments.
    """
    t, w, wt = phase_space.box_grid(p, r)
    dens = np.abs(p.spread(r)(t[:, None], w[None, :])) ** 2 * wt
    mass = dens.sum()
    if not mass > 0:
        raise DomainError("symbol has zero energy")
    dens = dens / mass
    tt = t[:, None]
    ww = w[None, :]
    m1 = float((dens * tt).sum())
    m2 = float((dens * ww).sum())
    s11 = float((dens * (tt - m1) ** 2).sum())
    s22 = float((dens * (ww - m2) ** 2).sum())
    s12 = float((dens * (tt - m1) * (ww - m2)).sum())
    det = s11 * s22 - s12 * s12
    if not det > 0:
        raise DomainError(f"degenerate covariance (determinant {det:g})")
    det1 = det / r ** 4
    bound = (2.0 * math.sqrt(det1)) ** -0.5
    return MomentSummary(m1, m2, s11, s22, s12, bound)
