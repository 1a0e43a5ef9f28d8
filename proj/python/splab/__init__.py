"""Spectral operator fine-tuning laboratory: python surface of the C++ core.

Everything heavy lives in the compiled ``_splab`` extension; this package
re-exports the operations with their numpy-facing signatures.
"""

from ._splab import (
    ConfigError,
    NumericError,
    adapter_forward,
    band_boundaries,
    burgers_rollout,
    count_params,
    effective_rank,
    energy_spectrum,
    heat_step_exact,
    irfft,
    l2re,
    low_rank_residual,
    relerr_energy,
    rfft,
    rmsle_spectrum,
    sample_grf,
    schedule_widths,
    svd,
    theory_report,
)

__all__ = [
    "ConfigError",
    "NumericError",
    "adapter_forward",
    "band_boundaries",
    "burgers_rollout",
    "count_params",
    "effective_rank",
    "energy_spectrum",
    "heat_step_exact",
    "irfft",
    "l2re",
    "low_rank_residual",
    "relerr_energy",
    "rfft",
    "rmsle_spectrum",
    "sample_grf",
    "schedule_widths",
    "svd",
    "theory_report",
]

__version__ = "0.1.0"
