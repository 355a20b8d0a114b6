"""Frame-level simulation of the LCFS-S queue with simple ARQ.

The service is an abstract erasure channel: every transmission round of a
packet fails independently with probability eps. Per frame:

1. an arrival indicator is drawn; an arriving packet is stamped with the
   current frame index,
2. the packet in service (if any) is decoded; success wins over a
   same-frame arrival, which then waits for the next frame; on failure a
   same-frame arrival preempts the packet in service,
3. a waiting packet starts service at the next frame boundary.

The first delivery only sets the age reference; every later delivery at
frame t records the peak age t - (timestamp of the previously delivered packet).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError
from .pgf import QueueParams, frames_threshold

_BLOCK = 1 << 16


class ArrivalGranularity(str, enum.Enum):
    FRAME = "frame"
    CHANNEL_USE = "channel-use"


@dataclass(frozen=True)
class SimConfig:
    qp: QueueParams
    n_deliveries: int
    seed: int = 0
    arrival_granularity: ArrivalGranularity = ArrivalGranularity.FRAME

    def __post_init__(self):
        object.__setattr__(self, "arrival_granularity", ArrivalGranularity(self.arrival_granularity))
        if int(self.n_deliveries) != self.n_deliveries or self.n_deliveries < 1:
            raise ConfigError(f"n_deliveries must be an integer >= 1, got {self.n_deliveries}")
        if not self.qp.lam > 0:
            raise ConfigError("no arrivals: lambda must be > 0")


@dataclass
class SimResult:
    peak_ages: np.ndarray       # histogram: peak_ages[m] = number of samples equal to m frames
    delivered: int
    preempted: int
    entered_service: int
    in_service: bool            # a packet was still in service when the run stopped
    frames_elapsed: int

    def samples(self) -> np.ndarray:
        return np.repeat(np.arange(self.peak_ages.size), self.peak_ages)

    def preemption_fraction(self) -> float:
        return self.preempted / (self.preempted + self.delivered)


def _arrivals(cfg: SimConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    qp = cfg.qp
    if cfg.arrival_granularity is ArrivalGranularity.FRAME:
        p_arrival = 1.0 - qp.q_frame
        return rng.random(size) < p_arrival
    out = np.empty(size, dtype=bool)
    rows = max(1, (1 << 20) // qp.n)
    for start in range(0, size, rows):
        stop = min(size, start + rows)
        out[start:stop] = (rng.random((stop - start, qp.n)) < qp.lam).any(axis=1)
    return out


def run_sim(cfg: SimConfig) -> SimResult:
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    ages = np.empty(cfg.n_deliveries, dtype=np.int64)
    state = np.array([0, -1, -1], dtype=np.int64)
    counters = np.zeros(3, dtype=np.int64)
    filled = 0
    while filled < cfg.n_deliveries:
        arrivals = _arrivals(cfg, rng, _BLOCK)
        successes = rng.random(_BLOCK) >= cfg.qp.eps
        filled = _kernels.lcfs_frames(arrivals, successes, state, ages, filled, counters)
    return SimResult(
        peak_ages=np.bincount(ages),
        delivered=int(counters[0]),
        preempted=int(counters[1]),
        entered_service=int(counters[2]),
        in_service=bool(state[1] >= 0),
        frames_elapsed=int(state[0]),
    )


def empirical_violation(res: SimResult, a: float, n: int) -> tuple[float, float]:
    """Fraction of peak ages >= a/n frames and its binomial standard error."""
    if res.delivered < 1:
        raise ConfigError("no recorded peak ages")
    m = max(frames_threshold(a, n), 0)
    hits = int(res.peak_ages[m:].sum())
    p = hits / res.delivered
    return p, math.sqrt(p * (1.0 - p) / res.delivered)
