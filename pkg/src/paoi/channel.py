"""MIMO Rayleigh block-fading channel with pilot-based ML channel estimation.

Each coherence block carries ``n_p`` pilot columns followed by ``n_c - n_p``
QPSK data columns. The receiver forms the ML estimate

    H_hat = m_t / (rho * n_p) * Y_p @ X_p^H

and decodes with the scaled nearest-neighbour metric computed against
``H_hat`` as if it were the true channel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DimensionError

MAX_TX_ANTENNAS = 4

# Unit-power QPSK alphabet, indexed by a 2-bit digit (bit 0 -> real sign, bit 1 -> imag sign).
QPSK = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / math.sqrt(2.0)


class PilotMode(str, enum.Enum):
    EXPLICIT = "explicit"
    EQUIVALENT = "equivalent"


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class ChannelConfig:
    """Antennas, coherence structure, pilots and SNR of one packet transmission.

    ``rho`` is the linear SNR; use :meth:`from_db` to build from decibels.
    """

    m_t: int
    m_r: int
    ell: int
    n_c: int
    n_p: int
    rho: float
    pilot_mode: PilotMode = PilotMode.EQUIVALENT

    def __post_init__(self):
        object.__setattr__(self, "pilot_mode", PilotMode(self.pilot_mode))
        for name in ("m_t", "m_r", "ell", "n_c", "n_p"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not 1 <= self.m_t <= MAX_TX_ANTENNAS:
            raise ConfigError(f"m_t must satisfy 1 <= m_t <= {MAX_TX_ANTENNAS}, got {self.m_t}")
        if self.m_r < 1:
            raise ConfigError(f"m_r must satisfy m_r >= 1, got {self.m_r}")
        if self.ell < 1:
            raise ConfigError(f"ell must satisfy ell >= 1, got {self.ell}")
        if self.n_c < 2:
            raise ConfigError(f"n_c must satisfy n_c >= 2, got {self.n_c}")
        if not 1 <= self.n_p:
            raise ConfigError(f"n_p must satisfy 1 <= n_p, got {self.n_p}")
        if not self.n_p < self.n_c:
            raise ConfigError(f"n_p must satisfy n_p < n_c, got n_p={self.n_p}, n_c={self.n_c}")
        if self.n_p < self.m_t:
            raise ConfigError(f"n_p must satisfy n_p >= m_t, got n_p={self.n_p}, m_t={self.m_t}")
        rho = float(self.rho)
        if not (math.isfinite(rho) and rho > 0):
            raise ConfigError(f"rho must be a positive finite SNR, got {self.rho!r}")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_db(cls, m_t, m_r, ell, n_c, n_p, rho_db, pilot_mode=PilotMode.EQUIVALENT):
        return cls(m_t, m_r, ell, n_c, n_p, float(db_to_linear(rho_db)), pilot_mode)

    @property
    def n(self) -> int:
        """Packet length in channel uses."""
        return self.ell * self.n_c

    @property
    def n_data(self) -> int:
        return self.n_c - self.n_p

    @property
    def rho_db(self) -> float:
        return float(linear_to_db(self.rho))

    @property
    def symbol_amplitude(self) -> float:
        return math.sqrt(self.rho / self.m_t)

    @property
    def estimate_error_variance(self) -> float:
        """Per-entry variance of H_hat - H."""
        return self.m_t / (self.rho * self.n_p)

    def with_(self, **changes) -> "ChannelConfig":
        return replace(self, **changes)


@dataclass
class BlockSample:
    """One coherence block: true channel, its estimate and the data part of the signal.

    ``X_p``/``Y_p`` are only populated in explicit pilot mode. ``symbols``
    holds the candidate index (see :func:`candidate_columns`) of every data
    column of ``X_d``.
    """

    H: np.ndarray
    H_hat: np.ndarray
    X_d: np.ndarray
    Y_d: np.ndarray
    symbols: np.ndarray
    X_p: np.ndarray | None = None
    Y_p: np.ndarray | None = None


@dataclass
class BlockBatch:
    """Stacked block samples; leading axis indexes blocks."""

    H: np.ndarray
    H_hat: np.ndarray
    X_d: np.ndarray
    Y_d: np.ndarray
    symbols: np.ndarray
    X_p: np.ndarray | None = None
    Y_p: np.ndarray | None = None

    def __len__(self):
        return self.H.shape[0]

    def __getitem__(self, i) -> BlockSample:
        return BlockSample(
            H=self.H[i],
            H_hat=self.H_hat[i],
            X_d=self.X_d[i],
            Y_d=self.Y_d[i],
            symbols=self.symbols[i],
            X_p=self.X_p,
            Y_p=None if self.Y_p is None else self.Y_p[i],
        )


def candidate_columns(m_t: int, amplitude: float = 1.0) -> np.ndarray:
    """All 4**m_t QPSK column vectors, shape (4**m_t, m_t).

    Row ``c`` has antenna ``t`` carrying ``QPSK[(c >> 2t) & 3]``.
    """
    idx = np.arange(4**m_t)
    digits = (idx[:, None] >> (2 * np.arange(m_t))[None, :]) & 3
    return amplitude * QPSK[digits]


def pilot_matrix(m_t: int, n_p: int, rho: float) -> np.ndarray:
    """Orthogonal unit-modulus pilot rows scaled to per-symbol power rho/m_t.

    Rows are taken from the n_p-point DFT matrix rotated by pi/4. When n_p is
    a multiple of 4 (or of 2 for m_t <= 2) the chosen rows use only the
    frequencies 0, n_p/4, n_p/2, 3n_p/4 so every pilot is a QPSK symbol;
    otherwise the first m_t DFT rows are used.
    """
    if n_p < m_t:
        raise ConfigError(f"n_p must satisfy n_p >= m_t, got n_p={n_p}, m_t={m_t}")
    if m_t == 1:
        freqs = [0]
    elif m_t == 2 and n_p % 2 == 0:
        freqs = [0, n_p // 2]
    elif n_p % 4 == 0:
        freqs = [0, n_p // 2, n_p // 4, 3 * n_p // 4][:m_t]
    else:
        freqs = list(range(m_t))
    k = np.asarray(freqs)[:, None]
    l = np.arange(n_p)[None, :]
    rows = np.exp(-2j * np.pi * k * l / n_p) * np.exp(1j * np.pi / 4)
    return math.sqrt(rho / m_t) * rows


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal((2,) + tuple(shape))
    return (z[0] + 1j * z[1]) * math.sqrt(0.5)


def sample_blocks(cfg: ChannelConfig, rng: np.random.Generator, size: int) -> BlockBatch:
    """Draw ``size`` independent coherence blocks.

    Draw order is fixed (fading, estimation noise, data noise, data symbols)
    and all draws are standard variates rescaled afterwards, so for a given
    generator state the same randomness is reused across SNRs. Data noise
    and symbols are drawn for the longest data segment any admissible
    ``n_p`` allows and then truncated, which couples draws across ``n_p``.
    """
    m_t, m_r = cfg.m_t, cfg.m_r
    u_max = cfg.n_c - m_t
    u = cfg.n_data
    amp = cfg.symbol_amplitude

    H = _complex_normal(rng, (size, m_r, m_t))
    X_p = Y_p = None
    if cfg.pilot_mode is PilotMode.EQUIVALENT:
        E = _complex_normal(rng, (size, m_r, m_t))
        H_hat = H + math.sqrt(cfg.estimate_error_variance) * E
    else:
        X_p = pilot_matrix(m_t, cfg.n_p, cfg.rho)
        W_p = _complex_normal(rng, (size, m_r, cfg.n_p))
        Y_p = H @ X_p + W_p
        H_hat = (m_t / (cfg.rho * cfg.n_p)) * (Y_p @ X_p.conj().T)
    W_d = _complex_normal(rng, (size, m_r, u_max))[:, :, :u]
    digits = rng.integers(0, 4, size=(size, m_t, u_max))[:, :, :u]
    X_d = amp * QPSK[digits]
    Y_d = H @ X_d + W_d
    symbols = np.sum(digits << (2 * np.arange(m_t))[None, :, None], axis=1)
    return BlockBatch(H=H, H_hat=H_hat, X_d=X_d, Y_d=Y_d, symbols=symbols, X_p=X_p, Y_p=Y_p)


def sample_block(cfg: ChannelConfig, rng: np.random.Generator) -> BlockSample:
    return sample_blocks(cfg, rng, 1)[0]


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for substream ``index`` of master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def snn_metric_log(H_hat, x, y) -> float:
    """Log of the nearest-neighbour metric for one data channel use: -||y - H_hat x||^2."""
    H_hat = np.asarray(H_hat)
    x = np.asarray(x).reshape(-1)
    y = np.asarray(y).reshape(-1)
    if H_hat.ndim != 2 or H_hat.shape != (y.size, x.size):
        raise DimensionError(
            f"H_hat has shape {H_hat.shape}, expected ({y.size}, {x.size}) for x of length "
            f"{x.size} and y of length {y.size}"
        )
    r = y - H_hat @ x
    return -float(np.real(np.vdot(r, r)))
