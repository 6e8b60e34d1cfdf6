"""Simulation of phase estimation in a Mach-Zehnder interferometer fed by
coherent light and squeezed vacuum."""
from .bayes import posterior, sample_outcomes, sensitivity_experiment
from .outcome import moments, outcome_probability, outcome_table
from .scaling import find_p_opt, heisenberg_fit, scan_p
from .sensitivity import (
    crlb,
    error_propagation_sensitivity,
    fisher_analytic,
    fisher_information,
    fisher_one_port,
)
from .specfun import wigner_d, wigner_d_block, wigner_d_columns
from .states import InputSpec, sector_amplitudes
from .structure import beam_splitter_rotate, noon_overlap, noon_scan, phase_distribution

__all__ = [
    "InputSpec",
    "beam_splitter_rotate",
    "crlb",
    "error_propagation_sensitivity",
    "find_p_opt",
    "fisher_analytic",
    "fisher_information",
    "fisher_one_port",
    "heisenberg_fit",
    "moments",
    "noon_overlap",
    "noon_scan",
    "outcome_probability",
    "outcome_table",
    "phase_distribution",
    "posterior",
    "sample_outcomes",
    "scan_p",
    "sector_amplitudes",
    "sensitivity_experiment",
    "wigner_d",
    "wigner_d_block",
    "wigner_d_columns",
]
