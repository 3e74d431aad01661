"""Cost-effectiveness estimation for embedded regimes in two-stage SMARTs.

The library estimates regime-specific mean costs and effects by inverse
probability weighting and by longitudinal targeted maximum likelihood,
turns them into incremental cost-effectiveness ratios with influence-curve
and bootstrap inference, and ships a benchmark generative process plus a
repeated-simulation harness for estimator comparison.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .cea import (
    EmptyFrontier,
    Frontier,
    PlanePoint,
    cost_ranking,
    efficient_frontier,
    plane_points,
    render_plane_svg,
)
from .core import (
    Dataset,
    EstimateWithIC,
    RegimeSpec,
    TrajectoryRecord,
    consistency_mask,
    is_consistent,
    regime_grid,
)
from .dgp import (
    DgpConfig,
    TruthTable,
    calibrate_regime_indexing,
    embedded_regimes,
    simulate_smart,
    true_values,
)
from .estimate import (
    CovariateSpec,
    FluctuationDiverged,
    GModel,
    RegimeMeanRequest,
    ZeroSupport,
    estimate_g,
    ipw_mean,
    regime_mean,
    tmle_mean,
)
from .glm import RankDeficient, SeparationDetected
from .inference import (
    BootstrapResult,
    ContrastResult,
    DegenerateDenominator,
    IcerResult,
    TooManyDegenerate,
    bootstrap_ci,
    contrast,
    delta_method_ic,
    icer,
    icer_variance_decomposition,
    risk_difference,
    wald_ci,
)
from .study import StudyConfig, StudyMetrics, StudyResult, relative_variance, run_study

__all__ = [
    "__version__",
    "BootstrapResult",
    "ContrastResult",
    "CovariateSpec",
    "Dataset",
    "DegenerateDenominator",
    "DgpConfig",
    "EmptyFrontier",
    "EstimateWithIC",
    "FluctuationDiverged",
    "Frontier",
    "GModel",
    "IcerResult",
    "PlanePoint",
    "RankDeficient",
    "RegimeMeanRequest",
    "RegimeSpec",
    "SeparationDetected",
    "StudyConfig",
    "StudyMetrics",
    "StudyResult",
    "TooManyDegenerate",
    "TrajectoryRecord",
    "TruthTable",
    "ZeroSupport",
    "bootstrap_ci",
    "calibrate_regime_indexing",
    "consistency_mask",
    "contrast",
    "cost_ranking",
    "delta_method_ic",
    "efficient_frontier",
    "embedded_regimes",
    "estimate_g",
    "icer",
    "icer_variance_decomposition",
    "ipw_mean",
    "is_consistent",
    "plane_points",
    "regime_grid",
    "regime_mean",
    "relative_variance",
    "render_plane_svg",
    "risk_difference",
    "simulate_smart",
    "tmle_mean",
    "true_values",
    "wald_ci",
]
