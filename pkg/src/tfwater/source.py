"""Nonstationary Gaussian source driven by white noise through an LTV filter.

Realizations follow the Karhunen-Loeve expansion ``x = sum_k X_k g_k`` with
independent ``X_k ~ N(0, sigma^2 lambda_k)``. The Wigner-Ville spectrum is
``Phi = (sigma^2 / 2 pi) sigma_{P P^*}``; its Monte Carlo counterpart averages
the Wigner distributions of realizations.

Random draws use the Philox counter-based generator. Draw ``i`` of seed ``s``
is generated from ``SeedSequence([s, i])``, so any subset of draws can be
reproduced on its own and serial and parallel runs agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .heat import HeatChannelModel
from .weyl import DiscreteOperator, Grid2D, SampledSymbol, SpectralData, kernel_to_symbol

__all__ = [
    "SourceConfig",
    "draw_rng",
    "source_energy",
    "basis_on_grid",
    "sample_realization",
    "sample_realizations",
    "wvs",
    "wvs_principal",
    "wigner_distribution",
    "empirical_wvs",
    "empirical_autocorrelation",
]

TAIL_FRACTION = 1e-4


def draw_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for substream ``stream`` of ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class SourceConfig:
    """Source description.

    Parameters
    ----------
    model : HeatChannelModel or SpectralData
        Filter spectrum; the analytic model uses dilated Hermite functions.
    sigma2 : float
        PSD of the white noise driving the filter.
    k_trunc : int, optional
        Number of KL terms. By default the smallest count whose omitted tail
        carries less than ``1e-4`` of the energy.
    seed : int
    """

    model: HeatChannelModel | SpectralData
    sigma2: float = 1.0
    k_trunc: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma2 >= 0 and math.isfinite(self.sigma2)):
            raise DomainError(f"sigma2 must be finite and >= 0, got {self.sigma2!r}")
        lam = self.lambdas_all
        total = float(lam.sum())
        if self.k_trunc is None:
            if isinstance(self.model, HeatChannelModel):
                k = self.model.order_for_tail(TAIL_FRACTION)
            else:
                tail = total - np.cumsum(lam)
                k = int(np.argmax(tail < TAIL_FRACTION * total)) + 1 if total > 0 else 1
            object.__setattr__(self, "k_trunc", k)
        if self.k_trunc < 1:
            raise DomainError("k_trunc must be >= 1")
        if isinstance(self.model, SpectralData) and self.k_trunc > lam.size:
            raise DomainError(f"k_trunc={self.k_trunc} exceeds the {lam.size} available modes")
        kept = float(self.lambdas.sum())
        if total > 0 and kept < (1 - TAIL_FRACTION) * total:
            raise DomainError(
                f"k_trunc={self.k_trunc} keeps only {kept / total:.6f} of the energy "
                f"(need >= {1 - TAIL_FRACTION})")

    @property
    def lambdas_all(self) -> np.ndarray:
        if isinstance(self.model, HeatChannelModel):
            k = max(self.model.order_for_tail(1e-16), self.k_trunc or 0)
            return self.model.eigenvalues(0.0, max_count=k)
        return np.asarray(self.model.lambdas, dtype=float)

    @property
    def lambdas(self) -> np.ndarray:
        return self.lambdas_all[: self.k_trunc]

    @property
    def variances(self) -> np.ndarray:
        """KL coefficient variances ``sigma^2 lambda_k`` of the kept terms."""
        return self.sigma2 * self.lambdas

    @property
    def energy(self) -> float:
        return source_energy(self)


def source_energy(cfg: SourceConfig) -> float:
    """Mean energy ``E = sigma^2 sum_k lambda_k`` (``c_p r^2 sigma^2`` for the analytic model)."""
    if isinstance(cfg.model, HeatChannelModel):
        return cfg.sigma2 * cfg.model.total_energy
    return cfg.sigma2 * float(np.sum(cfg.model.lambdas))


def basis_on_grid(cfg: SourceConfig, grid: Grid2D | None = None) -> tuple[Grid2D, np.ndarray]:
    """KL basis ``g_k`` sampled on ``grid``, shape ``(k_trunc, n_t)``."""
    if isinstance(cfg.model, HeatChannelModel):
        if grid is None:
            raise DomainError("a grid is required for the analytic model")
        table = cfg.model.basis(cfg.k_trunc).table(grid.t, cfg.k_trunc - 1)
        return grid, table
    spec = cfg.model
    if spec.g_vecs is None:
        raise DomainError("spectral data carries no eigenfunctions")
    if grid is not None and (grid.n_t != spec.grid.n_t or grid.dt != spec.grid.dt
                             or grid.t_min != spec.grid.t_min):
        raise DomainError("grid does not match the grid of the spectral data")
    return spec.grid, np.asarray(spec.g_vecs[:, : cfg.k_trunc]).T


def _coefficients(cfg: SourceConfig, draws) -> np.ndarray:
    std = np.sqrt(cfg.variances)
    return np.stack([draw_rng(cfg.seed, d).standard_normal(cfg.k_trunc) * std for d in draws])


def sample_realization(cfg: SourceConfig, grid: Grid2D | None = None, draw: int = 0) -> np.ndarray:
    """One realization ``x(t_i)`` (draw index ``draw``)."""
    return sample_realizations(cfg, grid, 1, start=draw)[0]


def sample_realizations(cfg: SourceConfig, grid: Grid2D | None = None, n_draws: int = 1,
                        *, start: int = 0) -> np.ndarray:
    """Realizations for draws ``start .. start + n_draws - 1``, shape ``(n_draws, n_t)``."""
    _, basis = basis_on_grid(cfg, grid)
    coef = _coefficients(cfg, range(start, start + n_draws))
    return coef @ basis


def wvs(op: DiscreteOperator, sigma2: float) -> SampledSymbol:
    """Wigner-Ville spectrum ``(sigma^2 / 2 pi) sigma_{P P^*}`` from the composed operator."""
    sym = kernel_to_symbol(op)
    return sym.scaled(sigma2 / (2.0 * math.pi))


def wvs_principal(p, r: float, sigma2: float, grid: Grid2D) -> SampledSymbol:
    """Principal term ``(sigma^2 / 2 pi) |p_r|^2`` on the grid of a WVS."""
    t = grid.t
    w = grid.omega
    vals = sigma2 / (2.0 * math.pi) * np.abs(p.spread(r)(t[:, None], w[None, :])) ** 2
    return SampledSymbol(t, w, vals)


def wigner_distribution(x: np.ndarray, grid: Grid2D) -> SampledSymbol:
    """``(Wx)(t, w) = (1/2 pi) \\int exp(-i w t') x(t + t'/2) conj(x(t - t'/2)) dt'`` on the grid."""
    x = np.asarray(x)
    op = DiscreteOperator(grid, np.outer(x, x.conj()) * grid.dt)
    return kernel_to_symbol(op).scaled(1.0 / (2.0 * math.pi))


def empirical_autocorrelation(cfg: SourceConfig, n_draws: int, grid: Grid2D | None = None,
                              *, chunk: int = 2000) -> np.ndarray:
    """Sample mean of ``x(t_1) conj(x(t_2))`` over ``n_draws`` realizations."""
    g, basis = basis_on_grid(cfg, grid)
    acc = np.zeros((g.n_t, g.n_t))
    for s in range(0, n_draws, chunk):
        coef = _coefficients(cfg, range(s, min(n_draws, s + chunk)))
        xs = coef @ basis
        acc += xs.T @ xs
    return acc / n_draws


def empirical_wvs(cfg: SourceConfig, n_draws: int, grid: Grid2D | None = None) -> SampledSymbol:
    """Monte Carlo WVS: mean Wigner distribution of ``n_draws`` realizations.

    The Wigner distribution is quadratic in ``x``, so the mean over draws is
    the Wigner transform of the sample autocorrelation; this avoids one 2-D
    transform per draw while giving the same estimate.
    """
    if n_draws < 100:
        raise DomainError(f"n_draws must be >= 100, got {n_draws}")
    g, _ = basis_on_grid(cfg, grid)
    acf = empirical_autocorrelation(cfg, n_draws, g)
    return kernel_to_symbol(DiscreteOperator(g, acf * g.dt)).scaled(1.0 / (2.0 * math.pi))
