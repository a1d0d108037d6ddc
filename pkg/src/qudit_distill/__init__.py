"""Classical simulation and rate analysis of qudit breeding and hashing."""

from .improve import (
    Partition,
    RecurrenceResult,
    best_strategy_rate,
    large_d_asymptotics,
    qubit_level_rate,
    recurrence_step,
    recurrence_then_hash_rate,
    subspace_envelope,
    subspace_projection,
    subspace_rate,
)
from .protocols import (
    MeasurementPlan,
    PrimeDimensionRequired,
    asymptotic_breeding_rounds,
    breeding_outcome,
    hashing_outcome,
    hashing_update,
    prime_power_distribution,
    sample_sequence,
    simulate_identification,
)
from .states import (
    BellDiagonalState,
    IsotropicState,
    LowRankSpectrum,
    RateReport,
    entropy,
    er_bound_low_rank,
    er_isotropic,
    er_normalized_limit,
    hashing_rate,
    isotropic,
    isotropic_to_bell_diagonal,
    low_rank_state,
)
from .zmod import IndexVector, collision_probability, dot_mod, is_prime, sample_uniform_vector

__version__ = "0.1.0"
