"""Confirmation-time distributions for Bitcoin transactions.

The queue ahead of a transaction is modelled as a Cramer-Lundberg process
with deterministic unit (one-block) jumps.  The package offers an Erlang
lower bound on confirmation within n blocks, inverse-Gaussian diffusion
approximations with and without an expected-undershoot correction, a
seeded Monte Carlo reference, and helpers to derive the model inputs from
mempool data.
"""

from .diffusion import (
    InverseGaussianParams,
    confirm_cdf,
    confirm_quantile,
    hitting_params,
    ig_cdf,
    ig_pdf,
    ig_quantile,
    normal_cdf,
)
from .erlang_bound import BlockBoundTable, bound_quantile, lower_bound, lower_bound_table
from .mempool import (
    ArrivalLog,
    MempoolSnapshot,
    TxRecord,
    arrival_rate,
    initial_position,
    parse_arrivals,
    parse_snapshot,
)
from .model import (
    DEFAULT_SCALE,
    DomainError,
    ModelParams,
    StabilityError,
    UnitScale,
    from_block_units,
    time_to_block_intervals,
    to_block_units,
    validate,
)
from .simulator import (
    SimulationConfig,
    SimulationResult,
    empirical_time_cdf,
    simulate_confirmation,
    simulate_undershoot,
)
from .undershoot import (
    UndershootSolution,
    evaluate,
    expected_undershoot,
    interval_bounds,
    limiting_mean_c1,
    limiting_tail_c1,
    solve,
)

__version__ = "0.1.0"
