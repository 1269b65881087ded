"""Synthetic contingency tables with size-aware count noise.

The package draws synthetic cell counts around observed counts using
Poisson, gamma-mixed Poisson, or discretized power-variance gamma noise,
with reproducible counter-based streams per cell, and scores the results
for disclosure risk and analytic utility.
"""

from .errors import CalibrationError, CountsynthError, ValidationError
from .streams import CellStream, CellStreams, derive_key, stream_seed
from .distributions import (
    FAMILIES,
    GafParams,
    NbiParams,
    Pmf,
    dispersion,
    discretize,
    family_pmf_at,
    family_pmf_obj,
    gaf_cdf,
    gaf_pdf,
    gaf_pmf,
    gaf_pmf_obj,
    gaf_sample,
    nbi_pmf,
    poisson_pmf,
)
from .table import (
    CellHistogram,
    ContingencyTable,
    FixtureTarget,
    TableSchema,
    aggregated_frame,
    benchmark_schema,
    benchmark_target,
    emit_microdata,
    gen_fixture,
    histogram,
    infer_schema,
    ingest_aggregated,
    ingest_microdata,
    marginal,
    write_aggregated,
    write_microdata,
)
from .synthesis import (
    MechanismConfig,
    SyntheticEnsemble,
    ZeroPolicy,
    read_ensemble,
    synthesize,
    table_hash,
    write_ensemble,
)
from .metrics import (
    LossResult,
    RiskUtilityPoint,
    ensemble_report,
    inverse_logit,
    loss_l1_analytic,
    loss_l1_empirical,
    reproduction_probability,
    risk_utility_point,
    tau_analytic,
    tau_empirical,
    total_coverage,
    total_empirical,
    total_report,
    total_variance_analytic,
)
from .glm import (
    FitResult,
    ci_overlap,
    design_matrix,
    ensemble_ci_overlap,
    fit_loglinear,
    overlap_summary,
)
from .calibration import CalibrationResult, CalibrationTarget, calibrate, sweep

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "CalibrationResult",
    "CalibrationTarget",
    "CellHistogram",
    "CellStream",
    "CellStreams",
    "ContingencyTable",
    "CountsynthError",
    "FAMILIES",
    "FitResult",
    "FixtureTarget",
    "GafParams",
    "LossResult",
    "MechanismConfig",
    "NbiParams",
    "Pmf",
    "RiskUtilityPoint",
    "SyntheticEnsemble",
    "TableSchema",
    "ValidationError",
    "ZeroPolicy",
    "aggregated_frame",
    "benchmark_schema",
    "benchmark_target",
    "calibrate",
    "ci_overlap",
    "derive_key",
    "design_matrix",
    "discretize",
    "dispersion",
    "emit_microdata",
    "ensemble_ci_overlap",
    "ensemble_report",
    "family_pmf_at",
    "family_pmf_obj",
    "fit_loglinear",
    "gaf_cdf",
    "gaf_pdf",
    "gaf_pmf",
    "gaf_pmf_obj",
    "gaf_sample",
    "gen_fixture",
    "histogram",
    "infer_schema",
    "ingest_aggregated",
    "ingest_microdata",
    "inverse_logit",
    "loss_l1_analytic",
    "loss_l1_empirical",
    "marginal",
    "nbi_pmf",
    "overlap_summary",
    "poisson_pmf",
    "read_ensemble",
    "reproduction_probability",
    "risk_utility_point",
    "stream_seed",
    "synthesize",
    "sweep",
    "table_hash",
    "tau_analytic",
    "tau_empirical",
    "total_coverage",
    "total_empirical",
    "total_report",
    "total_variance_analytic",
    "write_aggregated",
    "write_ensemble",
    "write_microdata",
]
