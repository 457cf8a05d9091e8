"""Subsampled-unitary measurement matrices: construction, RIP audits,
sampling-net verification, and sparse recovery."""

from ._core import (
    ConfigError,
    NetParams,
    PartialOperator,
    RowSample,
    Unitary,
    check_rip_for_vector,
    config_hash,
    find_good_g,
    full_mean,
    full_sample,
    iht,
    make_row_sample,
    omp,
    phase_decompose,
    rip_constant_exact,
    rip_lower_bound,
    rng_algorithm,
    run_experiment,
    sample_g,
    sample_rows,
    sampled_mean,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "NetParams",
    "PartialOperator",
    "RowSample",
    "Unitary",
    "check_rip_for_vector",
    "config_hash",
    "find_good_g",
    "full_mean",
    "full_sample",
    "iht",
    "make_row_sample",
    "omp",
    "phase_decompose",
    "rip_constant_exact",
    "rip_lower_bound",
    "rng_algorithm",
    "run_experiment",
    "sample_g",
    "sample_rows",
    "sampled_mean",
    "__version__",
]
