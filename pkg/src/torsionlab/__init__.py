"""Torsion invariants of finite-dimensional metric cochain complexes."""
from .complexes import (
    GradedMetricComplex,
    harmonic_basis,
    hodge_cohomology,
    laplacian,
    torsion_from_volumes,
    torsion_log_sum,
    torsion_tc,
    validate_complex,
)
from .detline import det_iso_c_hc, les_from_ses, ses_torsion_check, vol_det_graded_map
from .errors import (
    DocumentError,
    IncompleteLedgerError,
    InconsistentLiftError,
    InvalidFiltrationError,
    InvalidInstantonError,
    InvalidSESError,
    ModelError,
    TorsionLabError,
    ValidationError,
)
from .numeric import DEFAULT_TOLERANCE, LinearMapRep, MetricSpace, Tolerance
from .spectral import FilteredMetricComplex, log_t_comb, maumary_check, spectral_pages

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOLERANCE",
    "DocumentError",
    "FilteredMetricComplex",
    "GradedMetricComplex",
    "IncompleteLedgerError",
    "InconsistentLiftError",
    "InvalidFiltrationError",
    "InvalidInstantonError",
    "InvalidSESError",
    "LinearMapRep",
    "MetricSpace",
    "ModelError",
    "Tolerance",
    "TorsionLabError",
    "ValidationError",
    "det_iso_c_hc",
    "harmonic_basis",
    "hodge_cohomology",
    "laplacian",
    "les_from_ses",
    "log_t_comb",
    "maumary_check",
    "ses_torsion_check",
    "spectral_pages",
    "torsion_from_volumes",
    "torsion_log_sum",
    "torsion_tc",
    "validate_complex",
    "vol_det_graded_map",
]
