"""Monte Carlo evaluation of the RCUs achievability bound under SNN decoding.

For a packet spanning ``ell`` coherence blocks the single-shot error
probability is bounded by

    eps_bar = E[ exp( -[ sum_j i_alpha(X_j, Y_j) - log(2^k - 1) ]^+ ) ]

where ``i_alpha`` is the generalised information density of one block. The
expectation over the auxiliary codeword inside ``i_alpha`` is computed
exactly by enumerating all 4**m_t QPSK columns; only the outer expectation is
estimated by sampling.

Sampling is split into fixed-size chunks. Chunk ``s`` draws from substream
``s`` of the master seed and chunk statistics are merged in chunk order, so
results depend on the seed only, not on the number of workers. All
optimisers reuse the same seed at every candidate point (common random
numbers).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .channel import BlockBatch, BlockSample, ChannelConfig, candidate_columns, db_to_linear, sample_blocks, substream
from .errors import ConfigError, DimensionError, NumericalError

CHUNK_SIZE = 2048
COARSE_ALPHAS = tuple(round(0.1 * i, 10) for i in range(1, 31))
REFINE_STEP = 0.02
REFINE_HALF_WIDTH = 5  # refinement covers incumbent +- 5 * REFINE_STEP


@dataclass(frozen=True)
class CodeConfig:
    k: int
    n: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be an integer >= 1, got {self.k!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be an integer >= 1, got {self.n!r}")

    @property
    def rate(self) -> float:
        return self.k / self.n


@dataclass(frozen=True)
class FblParams:
    alpha: float = 1.0
    n_samples: int = 100_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigError(f"alpha must satisfy alpha >= 0, got {self.alpha!r}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ConfigError(f"n_samples must be an integer >= 1, got {self.n_samples!r}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError(f"workers must be an integer >= 1, got {self.workers!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class FblEstimate:
    eps_mean: float
    std_err: float
    n_samples: int
    alpha: float
    n_p: int
    rho: float

    @property
    def rho_db(self) -> float:
        return 10.0 * math.log10(self.rho)

    @property
    def upper(self) -> float:
        """Mean plus two standard errors, the quantity compared against targets."""
        return self.eps_mean + 2.0 * self.std_err


def log_codebook_size(k: int) -> float:
    """log(2**k - 1), accurate for every k >= 1."""
    return k * math.log(2.0) + math.log1p(-(2.0 ** -k))


def _check_pair(ch: ChannelConfig, code: CodeConfig):
    if code.n != ch.n:
        raise ConfigError(f"packet length mismatch: n = {code.n} but ell * n_c = {ch.n}")


def info_density_block(alpha: float, sample: BlockSample) -> float:
    """Generalised information density of a single coherence block.

    Straightforward numpy evaluation; :func:`info_density_blocks` is the
    compiled batch version used for Monte Carlo.
    """
    if alpha < 0:
        raise ConfigError(f"alpha must satisfy alpha >= 0, got {alpha}")
    H_hat, X_d, Y_d = sample.H_hat, sample.X_d, sample.Y_d
    m_r, m_t = H_hat.shape
    if X_d.shape[0] != m_t or Y_d.shape != (m_r, X_d.shape[1]):
        raise DimensionError(f"inconsistent block shapes H_hat={H_hat.shape} X_d={X_d.shape} Y_d={Y_d.shape}")
    if X_d.shape[1] == 0:
        return 0.0
    amp = float(np.abs(X_d.flat[0]))
    cands = candidate_columns(m_t, amp)                      # (K, m_t)
    centers = H_hat @ cands.T                                 # (m_r, K)
    diff = Y_d[:, :, None] - centers[:, None, :]              # (m_r, u, K)
    d_cand = np.sum(diff.real**2 + diff.imag**2, axis=0)      # (u, K)
    resid = Y_d - H_hat @ X_d
    d_true = np.sum(resid.real**2 + resid.imag**2, axis=0)    # (u,)
    # weights 1/K are exact for K a power of two, so equal exponents give exactly 0
    log_mean = logsumexp(-alpha * d_cand, axis=1, b=1.0 / cands.shape[0])
    value = float(np.sum(-alpha * d_true - log_mean))
    if not math.isfinite(value):
        raise NumericalError("non-finite information density")
    return value


def _is_arithmetic(alphas: np.ndarray) -> bool:
    if alphas.size < 3:
        return True
    steps = np.diff(alphas)
    return bool(steps[0] > 0 and np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12))


def info_density_blocks(alphas, batch: BlockBatch, amplitude: float, offset: int = 0, blocks_per_sample: int = 1) -> np.ndarray:
    """Information density of every block in ``batch`` for every alpha, shape (blocks, alphas).

    On a non-finite result the raised error carries the sample index
    ``offset + block // blocks_per_sample``.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    m_t = batch.H_hat.shape[2]
    cands = candidate_columns(m_t, amplitude)
    out = _kernels.block_info_density(
        np.ascontiguousarray(batch.H_hat),
        np.ascontiguousarray(batch.Y_d),
        np.ascontiguousarray(batch.symbols),
        cands,
        alphas,
        _is_arithmetic(alphas),
    )
    bad = ~np.isfinite(out)
    if bad.any():
        block = int(np.argwhere(bad)[0, 0])
        raise NumericalError("non-finite information density", offset + block // blocks_per_sample)
    return out


def _chunk_stats(ch: ChannelConfig, k: int, alphas: np.ndarray, seed: int, job):
    """Per-chunk (count, mean, M2) of the RCUs summand for every alpha."""
    index, size = job
    rng = substream(seed, index)
    batch = sample_blocks(ch, rng, size * ch.ell)
    dens = info_density_blocks(alphas, batch, ch.symbol_amplitude, offset=index * CHUNK_SIZE, blocks_per_sample=ch.ell)
    total = dens.reshape(size, ch.ell, -1).sum(axis=1)
    summand = np.exp(-np.maximum(total - log_codebook_size(k), 0.0))
    mean = summand.mean(axis=0)
    m2 = np.sum((summand - mean) ** 2, axis=0)
    return size, mean, m2


def _jobs(n_samples: int):
    full, rest = divmod(n_samples, CHUNK_SIZE)
    jobs = [(i, CHUNK_SIZE) for i in range(full)]
    if rest:
        jobs.append((full, rest))
    return jobs


def _merge(parts):
    # Chan et al. pairwise update, applied in chunk order.
    n, mean, m2 = 0, None, None
    for size, c_mean, c_m2 in parts:
        if mean is None:
            n, mean, m2 = size, c_mean.copy(), c_m2.copy()
            continue
        tot = n + size
        delta = c_mean - mean
        mean = mean + delta * (size / tot)
        m2 = m2 + c_m2 + delta**2 * (n * size / tot)
        n = tot
    return n, mean, m2


def grid_estimates(ch: ChannelConfig, code: CodeConfig, par: FblParams, alphas) -> list[FblEstimate]:
    """RCUs estimates for every alpha in ``alphas`` from one shared set of samples."""
    _check_pair(ch, code)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size == 0:
        raise ConfigError("alpha grid must be nonempty")
    if np.any(alphas < 0) or not np.all(np.isfinite(alphas)):
        raise ConfigError("alpha grid values must satisfy alpha >= 0")
    work = partial(_chunk_stats, ch, code.k, alphas, par.seed)
    jobs = _jobs(par.n_samples)
    if par.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=par.workers) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(job) for job in jobs]
    n, mean, m2 = _merge(parts)
    var = m2 / (n - 1) if n > 1 else np.zeros_like(m2)
    se = np.sqrt(np.maximum(var, 0.0) / n)
    return [
        FblEstimate(
            eps_mean=float(min(max(mean[j], 0.0), 1.0)),
            std_err=float(se[j]),
            n_samples=n,
            alpha=float(alphas[j]),
            n_p=ch.n_p,
            rho=ch.rho,
        )
        for j in range(alphas.size)
    ]


def rcus_estimate(ch: ChannelConfig, code: CodeConfig, par: FblParams) -> FblEstimate:
    return grid_estimates(ch, code, par, [par.alpha])[0]


def _best(estimates):
    # strict < keeps the earliest (smallest alpha / n_p) on ties
    best = estimates[0]
    for est in estimates[1:]:
        if est.eps_mean < best.eps_mean:
            best = est
    return best


def optimize_alpha(ch: ChannelConfig, code: CodeConfig, par: FblParams, alpha_grid) -> FblEstimate:
    """Minimise the estimate over ``alpha_grid`` under common random numbers."""
    grid = sorted(float(a) for a in alpha_grid)
    if not grid:
        raise ConfigError("alpha grid must be nonempty")
    return _best(grid_estimates(ch, code, par, grid))


def refine_grid(center: float) -> list[float]:
    lo = center - REFINE_HALF_WIDTH * REFINE_STEP
    pts = [round(lo + i * REFINE_STEP, 10) for i in range(2 * REFINE_HALF_WIDTH + 1)]
    return [p for p in pts if p > 0]


def search_alpha(ch: ChannelConfig, code: CodeConfig, par: FblParams) -> FblEstimate:
    """Coarse grid 0.1..3.0 followed by one refinement pass around the incumbent."""
    coarse = optimize_alpha(ch, code, par, COARSE_ALPHAS)
    fine = optimize_alpha(ch, code, par, refine_grid(coarse.alpha))
    return fine if fine.eps_mean < coarse.eps_mean else coarse


def _alpha_step(ch, code, par, alpha_grid):
    if alpha_grid is None:
        return search_alpha(ch, code, par)
    return optimize_alpha(ch, code, par, alpha_grid)


def pilot_range(ch: ChannelConfig, np_range=None) -> range:
    lo, hi = ch.m_t, ch.n_c - 1
    if np_range is not None:
        lo, hi = max(lo, int(np_range[0])), min(hi, int(np_range[1]))
    if lo > hi:
        raise ConfigError(f"empty pilot range: need m_t <= n_p <= n_c - 1, got [{lo}, {hi}]")
    return range(lo, hi + 1)


def optimize_np(ch: ChannelConfig, code: CodeConfig, par: FblParams, alpha_grid=None, np_range=None) -> FblEstimate:
    """Best estimate over pilot counts m_t..n_c-1, optimising alpha at each.

    ``alpha_grid=None`` uses :func:`search_alpha`. ``np_range`` optionally
    restricts the pilot counts to an inclusive interval.
    """
    results = [_alpha_step(ch.with_(n_p=n_p), code, par, alpha_grid) for n_p in pilot_range(ch, np_range)]
    return _best(results)


def optimized_point(ch, code, par, alpha_grid=None, np_range=None, fixed_np=False) -> FblEstimate:
    if fixed_np:
        return _alpha_step(ch, code, par, alpha_grid)
    return optimize_np(ch, code, par, alpha_grid, np_range)


def min_snr_for_target(
    ch: ChannelConfig,
    code: CodeConfig,
    par: FblParams,
    eps_target: float,
    rho_grid_db,
    alpha_grid=None,
    np_range=None,
    fixed_np=False,
):
    """Smallest grid SNR whose optimised estimate satisfies mean + 2 SE <= target.

    Returns ``(rho, estimate)``; ``rho`` is None when no grid point qualifies,
    in which case ``estimate`` belongs to the largest SNR. The estimate is
    non-increasing in SNR under common random numbers, so the grid is
    bisected instead of scanned.
    """
    if not 0 < eps_target <= 1:
        raise ConfigError(f"eps_target must lie in (0, 1], got {eps_target}")
    grid = [float(x) for x in rho_grid_db]
    if not grid:
        raise ConfigError("SNR grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("SNR grid must be strictly ascending")

    cache: dict[int, FblEstimate] = {}

    def point(i):
        if i not in cache:
            cache[i] = optimized_point(
                ch.with_(rho=float(db_to_linear(grid[i]))), code, par, alpha_grid, np_range, fixed_np
            )
        return cache[i]

    def ok(i):
        return point(i).upper <= eps_target

    if ok(0):
        return point(0).rho, point(0)
    hi = len(grid) - 1
    if not ok(hi):
        return None, point(hi)
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return point(hi).rho, point(hi)


def snr_grid(start_db: float, stop_db: float, step_db: float = 0.25) -> list[float]:
    """Inclusive arithmetic dB grid."""
    count = int(math.floor((stop_db - start_db) / step_db + 1e-9)) + 1
    if count < 1:
        raise ConfigError(f"empty SNR grid [{start_db}, {stop_db}]")
    return [round(start_db + i * step_db, 10) for i in range(count)]
