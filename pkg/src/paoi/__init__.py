"""Peak-age violation analysis for short packets over MIMO block-fading channels.

``channel``   pilot-assisted QPSK transmission over Rayleigh block fading
``bound``     Monte Carlo RCUs bound on the single-shot packet error probability
``pgf``       peak-age law of the LCFS-S / ARQ queue from its rational PGF
``queue_sim`` frame-level simulator of the same queue
``cli``       command-line front end
"""

from .bound import CodeConfig, FblEstimate, FblParams, min_snr_for_target, optimize_alpha, optimize_np, rcus_estimate
from .channel import ChannelConfig, PilotMode
from .errors import ConfigError, DimensionError, NumericalError, PgfArithmeticError
from .pgf import QueueParams, assemble_age_pgf, invert_pgf, limiting_violation, violation_probability
from .queue_sim import SimConfig, empirical_violation, run_sim

__version__ = "0.1.0"
