"""Geometry of the market space and multivariate-kurtosis crisis detection."""

__version__ = "0.1.0"

from .data_ingest import (
    PricePanel,
    RegimeSpec,
    Segment,
    align_panel,
    generate_synthetic_panel,
    load_price_panel,
    write_panel,
)
from .geometry import correlation_matrix, distance_matrix, eigenvalue_spectrum, embed
from .kurtosis import (
    g_statistic,
    mardia_b2p,
    mardia_t2,
    restrict_to_subspace,
    systematic_covariance,
)
from .pipeline import (
    AnalysisConfig,
    BaselinePeriod,
    calibrate_baseline,
    flag_crises,
    rolling_analysis,
)
from .returns import log_returns, normalize_window
from .surrogates import (
    build_ensemble,
    effective_dimension,
    gaussian_surrogate,
    permute_surrogate,
)
