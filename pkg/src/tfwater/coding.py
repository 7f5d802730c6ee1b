"""Monte Carlo pulse-train coding over the heat channel.

Each subchannel ``k`` carries a random Gaussian codebook of ``M_k`` words of
length ``L``. Word letters modulate the input eigenfunctions ``f_k`` in ``L``
consecutive time slots of width ``d``; the channel applies ``P_r`` through its
singular system and adds white noise; a matched-filter bank against ``g_k``
recovers ``a_kl + z_kl`` with ``z_kl ~ N(0, theta^2 / lambda_k)``, and each
subchannel is decoded by nearest-codeword search.

Random streams (Philox, see :func:`tfwater.source.draw_rng`): subchannel
``k`` of codebook draw ``j`` uses ``(seed, 0, j, k)``, the message of subchannel ``k`` in trial
``i`` uses ``(seed, 1, i, k)`` and the noise of trial ``i`` uses ``(seed, 2, i)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .heat import model as heat_model
from .source import draw_rng
from .waterfilling import WaterfillResult, waterfill_discrete

__all__ = [
    "CodingConfig",
    "DecodingReport",
    "heat_coding_config",
    "build_codebooks",
    "encode",
    "channel",
    "matched_filter",
    "decode",
    "simulate",
]

MAX_CODEBOOK_BITS = 16
SLOT_TAIL = 1e-6
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class CodingConfig:
    """Everything needed to run the coding experiment.

    Attributes
    ----------
    allocation : WaterfillResult
        Energies ``sigma^2 - nu_k^2`` of the ``K`` active subchannels.
    lambdas : ndarray
        Eigenvalues of the modes used to apply the channel (at least ``K``).
    f_vecs, g_vecs : ndarray
        Input and output eigenfunctions on one slot, shape ``(n_modes, n_tau)``.
    tau : ndarray
        Slot grid on ``(-d/2, d/2]``.
    d : float
        Pulse delay (slot width).
    L : int
        Pulses per codeword.
    rates : ndarray
        Rates ``R_k`` in nats per pulse of the active subchannels.
    theta2 : float
        Noise PSD.
    seed : int
    """

    allocation: WaterfillResult
    lambdas: np.ndarray = field(repr=False)
    f_vecs: np.ndarray = field(repr=False)
    g_vecs: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)
    d: float
    L: int
    rates: np.ndarray
    theta2: float
    seed: int = 0

    def __post_init__(self):
        K = self.allocation.K
        if self.L < 1:
            raise DomainError(f"L must be >= 1, got {self.L}")
        if self.theta2 < 0:
            raise DomainError(f"theta2 must be >= 0, got {self.theta2}")
        if self.lambdas.size < K or self.f_vecs.shape[0] < K or self.g_vecs.shape[0] < K:
            raise DomainError("fewer channel modes than active subchannels")
        rates = np.asarray(self.rates, dtype=float)
        if rates.shape != (K,):
            raise DomainError(f"need one rate per active subchannel ({K}), got shape {rates.shape}")
        if np.any(rates < 0) or np.any(rates >= self.capacities):
            raise DomainError("each rate must satisfy 0 <= R_k < C_k")
        bits = self.codebook_bits
        if np.any(bits > MAX_CODEBOOK_BITS):
            k = int(np.argmax(bits))
            raise DomainError(
                f"subchannel {k} needs a codebook of 2^{bits[k]} words (cap 2^{MAX_CODEBOOK_BITS}); "
                "lower the rate or the block length L")

    @property
    def K(self) -> int:
        return self.allocation.K

    @property
    def dt(self) -> float:
        return float(self.tau[1] - self.tau[0])

    @property
    def capacities(self) -> np.ndarray:
        return self.allocation.channel_capacities

    @property
    def codebook_bits(self) -> np.ndarray:
        """``floor(R_k L / ln 2)``; the small offset absorbs rounding at exact integers."""
        return np.floor(np.asarray(self.rates) * self.L / _LN2 + 1e-9).astype(int)

    @property
    def codebook_sizes(self) -> np.ndarray:
        return 2 ** self.codebook_bits

    @property
    def noise_vars(self) -> np.ndarray:
        """Matched-filter noise variances ``nu_k^2 = theta^2 / lambda_k``."""
        return self.theta2 / self.lambdas[: self.K]


@dataclass(frozen=True)
class DecodingReport:
    """Monte Carlo statistics of a coding run (JSON-ready via :meth:`to_dict`)."""

    trials: int
    L: int
    K: int
    codebook_bits: list[int]
    error_rates: list[float]
    message_error_rate: float
    input_energy_per_pulse: float
    target_energy_per_pulse: float
    noise_vars: list[float]
    expected_noise_vars: list[float]
    noise_means: list[float]
    max_noise_correlation: float
    rate_bits_per_pulse: float
    capacity_bits_per_pulse: float

    def to_dict(self) -> dict:
        return asdict(self)


def heat_coding_config(gamma: float, r: float, snr: float, theta2: float, L: int, *,
                       rate_fraction: float = 0.7, n_tau: int = 256, seed: int = 0,
                       d: float | None = None) -> CodingConfig:
    """Coding setup for the heat channel with ``S = 2 pi r^2 theta^2 SNR``.

    ``d`` defaults to ``6 a`` with ``a = sqrt(2) r gamma``. The channel is
    applied with every mode whose energy outside the slot is below ``1e-6``.
    """
    if not 0 <= rate_fraction < 1:
        raise DomainError(f"rate_fraction must lie in [0, 1), got {rate_fraction}")
    if theta2 <= 0:
        raise DomainError("theta2 must be positive to define the waterfilling stage")
    m = heat_model(gamma, r)
    lam = m.eigenvalues(1e-14)
    S = 2.0 * math.pi * r * r * theta2 * snr
    alloc = waterfill_discrete(theta2 / lam, S)
    if d is None:
        d = 6.0 * math.sqrt(2.0) * r * gamma
    dt = d / n_tau
    tau = -0.5 * d + dt * np.arange(1, n_tau + 1)
    order = lam.size - 1
    table = m.basis(order).table(tau, order)
    tail = np.abs(1.0 - np.sum(table * table, axis=1) * dt)
    ok = tail < SLOT_TAIL
    n_modes = int(np.argmin(ok)) if not ok.all() else ok.size
    if n_modes < alloc.K:
        raise DomainError(
            f"eigenfunction {n_modes} leaks {tail[n_modes]:.2e} of its energy outside the slot; "
            f"increase d (currently {d:g})")
    rates = rate_fraction * alloc.channel_capacities
    # the Gaussian symbol is real and even, so f_k = g_k
    return CodingConfig(alloc, lam[:n_modes], table[:n_modes], table[:n_modes].copy(), tau, float(d),
                        int(L), rates, float(theta2), int(seed))


def build_codebooks(cfg: CodingConfig, draw: int = 0) -> list[np.ndarray]:
    """Codebook ``k`` has shape ``(M_k, L)`` with i.i.d. ``N(0, sigma^2 - nu_k^2)`` entries.

    ``draw`` selects an independent member of the random codebook ensemble.
    """
    books = []
    for k, (bits, power) in enumerate(zip(cfg.codebook_bits, cfg.allocation.powers[: cfg.K])):
        rng = draw_rng(cfg.seed, 0, draw, k)
        books.append(rng.standard_normal((2 ** int(bits), cfg.L)) * math.sqrt(power))
    return books


def _letters(books: list[np.ndarray], messages: np.ndarray) -> np.ndarray:
    # (..., K) message indices -> (..., L, K) letters
    return np.stack([b[messages[..., k]] for k, b in enumerate(books)], axis=-1)


def encode(cfg: CodingConfig, books: list[np.ndarray], messages) -> np.ndarray:
    """Pulse train ``u(t) = sum_l sum_k a_kl f_k(t - l d)`` sampled slot after slot.

    ``messages`` has shape ``(..., K)``; the result has shape ``(..., L * n_tau)``.
    """
    messages = np.asarray(messages, dtype=int)
    letters = _letters(books, messages)
    u = letters @ cfg.f_vecs[: cfg.K]
    return u.reshape(*u.shape[:-2], -1)


def train_time(cfg: CodingConfig) -> np.ndarray:
    """Sample times of a pulse train; slot ``l`` is centred at ``l d``."""
    return (np.arange(cfg.L)[:, None] * cfg.d + cfg.tau[None, :]).ravel()


def channel(cfg: CodingConfig, u: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """``y = P_r u + n`` slot by slot through the singular system of ``P_r``.

    ``n`` is white with per-sample variance ``theta^2 / dt``; pass ``rng=None``
    for the noiseless response.
    """
    u = np.asarray(u, dtype=float)
    slots = u.reshape(*u.shape[:-1], cfg.L, cfg.tau.size)
    coef = slots @ cfg.f_vecs.T * cfg.dt
    y = (coef * np.sqrt(cfg.lambdas)) @ cfg.g_vecs
    y = y.reshape(u.shape)
    if rng is not None and cfg.theta2 > 0:
        y = y + rng.standard_normal(u.shape) * math.sqrt(cfg.theta2 / cfg.dt)
    return y


def matched_filter(cfg: CodingConfig, y: np.ndarray) -> np.ndarray:
    """Normalized matched-filter outputs ``<y, g_k(. - l d)> / sqrt(lambda_k)``, shape ``(..., L, K)``."""
    y = np.asarray(y, dtype=float)
    slots = y.reshape(*y.shape[:-1], cfg.L, cfg.tau.size)
    return slots @ cfg.g_vecs[: cfg.K].T * cfg.dt / np.sqrt(cfg.lambdas[: cfg.K])


def _nearest(book: np.ndarray, obs: np.ndarray, chunk_elems: int = 1 << 22) -> np.ndarray:
    # obs (T, L) -> index of the nearest codeword for each row
    norms = np.einsum("ml,ml->m", book, book)
    step = max(1, chunk_elems // max(1, book.shape[0]))
    out = np.empty(obs.shape[0], dtype=int)
    for s in range(0, obs.shape[0], step):
        dist = norms[None, :] - 2.0 * obs[s: s + step] @ book.T
        out[s: s + step] = np.argmin(dist, axis=1)
    return out


def decode(cfg: CodingConfig, books: list[np.ndarray], y: np.ndarray):
    """Maximum-likelihood (nearest codeword) decoding per subchannel.

    Returns ``(messages, a_hat)`` with shapes ``(..., K)`` and ``(..., L, K)``.
    """
    a_hat = matched_filter(cfg, y)
    lead = a_hat.shape[:-2]
    flat = a_hat.reshape(-1, cfg.L, cfg.K)
    msgs = np.stack([_nearest(b, flat[:, :, k]) for k, b in enumerate(books)], axis=-1)
    return msgs.reshape(*lead, cfg.K), a_hat


def _messages(cfg: CodingConfig, trials: int) -> np.ndarray:
    sizes = cfg.codebook_sizes
    out = np.empty((trials, cfg.K), dtype=int)
    for i in range(trials):
        for k in range(cfg.K):
            out[i, k] = draw_rng(cfg.seed, 1, i, k).integers(sizes[k])
    return out


def simulate(cfg: CodingConfig, trials: int, *, codebooks: int = 1,
             books: list[np.ndarray] | None = None, batch: int = 250) -> DecodingReport:
    """Run ``trials`` codeword transmissions and collect error and noise statistics.

    With ``codebooks > 1`` the trials are split evenly over that many
    independent codebook draws, so error rates estimate the random-coding
    ensemble average rather than the error of one particular codebook.
    ``books`` fixes a single explicit codebook instead.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if codebooks < 1 or (books is not None and codebooks != 1):
        raise DomainError("codebooks must be >= 1 and cannot be combined with explicit books")
    K, L = cfg.K, cfg.L
    # trial i uses codebook draw owner[i]
    owner = np.arange(trials) * codebooks // trials
    errors = np.zeros(K)
    any_err = 0
    energy = 0.0
    z_sum = np.zeros(K)
    z_sq = np.zeros((K, K))
    msgs_all = _messages(cfg, trials)
    starts = [int(v) for v in np.nonzero(np.diff(owner, prepend=-1))[0]]
    chunks = []
    for j, a in enumerate(starts):
        b = starts[j + 1] if j + 1 < len(starts) else trials
        chunks += [(int(owner[a]), s, min(b, s + batch)) for s in range(a, b, batch)]
    cache = (None, books)
    for draw, s, e in chunks:
        if cache[0] != draw and books is None:
            cache = (draw, build_codebooks(cfg, draw))
        bk = cache[1]
        idx = range(s, e)
        msgs = msgs_all[s:e]
        u = encode(cfg, bk, msgs)
        clean = channel(cfg, u)
        noise = np.stack([draw_rng(cfg.seed, 2, i).standard_normal(u.shape[-1]) for i in idx])
        y = clean + noise * math.sqrt(cfg.theta2 / cfg.dt)
        est, a_hat = decode(cfg, bk, y)
        wrong = est != msgs
        errors += wrong.sum(axis=0)
        any_err += int(wrong.any(axis=1).sum())
        energy += float(np.sum(u * u) * cfg.dt)
        z = (a_hat - _letters(bk, msgs)).reshape(-1, K)
        z_sum += z.sum(axis=0)
        z_sq += z.T @ z
    n_z = trials * L
    mean = z_sum / n_z
    cov = z_sq / n_z - np.outer(mean, mean)
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd) if np.all(sd > 0) else np.zeros_like(cov)
    off = np.abs(corr - np.diag(np.diag(corr)))
    bits = cfg.codebook_bits
    return DecodingReport(
        trials=trials,
        L=L,
        K=K,
        codebook_bits=[int(b) for b in bits],
        error_rates=(errors / trials).tolist(),
        message_error_rate=any_err / trials,
        input_energy_per_pulse=energy / (trials * L),
        target_energy_per_pulse=float(np.sum(cfg.allocation.powers)),
        noise_vars=np.diag(cov).tolist(),
        expected_noise_vars=cfg.noise_vars.tolist(),
        noise_means=mean.tolist(),
        max_noise_correlation=float(off.max()) if K > 1 else 0.0,
        rate_bits_per_pulse=float(bits.sum() / L),
        capacity_bits_per_pulse=cfg.allocation.capacity_bits,
    )
