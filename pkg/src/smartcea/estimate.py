"""Regime-specific mean estimators: inverse-probability weighting and TMLE.

Both estimators target E[Y(d)] or E[C(d)], the mean outcome had everyone
followed regime d.  IPW reweights regime-consistent records by the inverse
of their cumulative treatment probability.  TMLE builds iterated outcome
regressions (stage 2 on the regime-consistent records, stage 1 on records
whose first treatment matches the regime) and fluctuates each along an
intercept-only logistic submodel with inverse-probability weights, which
solves the efficient influence curve's score equation; outcomes are mapped
to [0, 1] for the logistic machinery and mapped back at the end.

Treatment probabilities come from a :class:`GModel`, either the design's
known randomization probabilities or logistic fits (`estimate_g`).  A
:class:`RegimeMeanRequest` bundles one estimation task: the regime, the
outcome column, the estimator, the treatment model, and the outcome-model
covariates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, EstimateWithIC, RegimeSpec, consistency_mask
from .glm import SeparationDetected, expit, fit_logistic, logit, predict

__all__ = [
    "ZeroSupport",
    "FluctuationDiverged",
    "ScalingDegenerate",
    "CovariateSpec",
    "DEFAULT_Q",
    "DEFAULT_G",
    "ORACLE_Q",
    "SATURATED_Q",
    "SATURATED_G",
    "GModel",
    "RegimeMeanRequest",
    "estimate_g",
    "ipw_mean",
    "tmle_mean",
    "regime_mean",
]


class ZeroSupport(Exception):
    """No record in the data follows the regime, so nothing identifies it."""


class FluctuationDiverged(Exception):
    """A TMLE fluctuation step separated instead of converging."""


class ScalingDegenerate(Exception):
    """The outcome cannot be mapped to [0, 1] (non-finite sample range)."""


@dataclass(frozen=True)
class CovariateSpec:
    """Named covariate terms for the two stage-specific regressions.

    Terms: 'x1' (all baseline columns), 'x1_sq', 'log_abs_x1', 'a1', 'l2',
    's2', 's2_sq'.  An intercept is always prepended.  The special spec
    ("saturated",) instead builds one indicator per observed stratum of the
    model's standard adjustment variables (outcome stage 2: x1, l2, s2;
    outcome stage 1: x1; treatment stage 1: x1; treatment stage 2: x1, a1,
    s2), with no intercept; it is exact when those variables have small
    finite support.
    """

    stage1: tuple[str, ...]
    stage2: tuple[str, ...]

    _TERMS = frozenset(
        {"x1", "x1_sq", "log_abs_x1", "a1", "l2", "s2", "s2_sq", "saturated"}
    )

    def __post_init__(self) -> None:
        for stage in (self.stage1, self.stage2):
            for term in stage:
                if term not in self._TERMS:
                    raise ValueError(f"unknown covariate term {term!r}")
            if "saturated" in stage and stage != ("saturated",):
                raise ValueError("'saturated' must be the only term in its stage")


# Main-terms adjustment on all measured covariates, mirroring an analysis
# that regresses on what was collected rather than on oracle transforms.
DEFAULT_Q = CovariateSpec(stage1=("x1",), stage2=("x1", "l2", "s2"))
DEFAULT_G = CovariateSpec(stage1=("x1",), stage2=("x1", "a1", "s2"))
# Oracle covariate set matching the benchmark generator's outcome model,
# available for efficiency comparisons against the default.
ORACLE_Q = CovariateSpec(
    stage1=("x1", "x1_sq", "log_abs_x1"),
    stage2=("l2", "s2", "x1_sq", "log_abs_x1"),
)
SATURATED_Q = CovariateSpec(stage1=("saturated",), stage2=("saturated",))
SATURATED_G = CovariateSpec(stage1=("saturated",), stage2=("saturated",))


def _term_columns(dataset: Dataset, name: str) -> np.ndarray:
    if name == "x1":
        return dataset.x1
    if name == "x1_sq":
        return dataset.x1**2
    if name == "log_abs_x1":
        return np.log(np.abs(dataset.x1) + 0.01)
    if name == "a1":
        return dataset.a1[:, None].astype(np.float64)
    if name == "l2":
        return dataset.l2[:, None].astype(np.float64)
    if name == "s2":
        return dataset.s2[:, None]
    if name == "s2_sq":
        return dataset.s2[:, None] ** 2
    raise ValueError(f"unknown covariate term {name!r}")


def _cell_indicators(strata: np.ndarray) -> np.ndarray:
    _, inverse = np.unique(strata, axis=0, return_inverse=True)
    X = np.zeros((strata.shape[0], int(inverse.max()) + 1))
    X[np.arange(strata.shape[0]), inverse] = 1.0
    return X


def _design(
    dataset: Dataset, terms: tuple[str, ...], strata_terms: tuple[str, ...]
) -> np.ndarray:
    if "saturated" in terms:
        if terms != ("saturated",):
            raise ValueError("'saturated' must be the only term in its stage")
        strata = np.hstack([_term_columns(dataset, t) for t in strata_terms])
        return _cell_indicators(strata)
    cols = [np.ones((dataset.n, 1))]
    cols.extend(_term_columns(dataset, t) for t in terms)
    return np.hstack(cols)


@dataclass(frozen=True)
class GModel:
    """Treatment mechanism, known or fitted, evaluated per record.

    ``known_probs`` maps (stage, conditioning cell) to a probability: stage 1
    cells are the arm codes, stage 2 cells are (branch, option) pairs.
    ``fits`` holds the logistic fits behind a fitted model ('stage1', and
    ('stage2', branch) per branch).  ``stage1_probs`` / ``stage2_probs`` are
    the evaluated per-record probabilities the estimators consume;
    stage-2 entries are meaningful only on records observed in that branch
    (NaN elsewhere).
    """

    kind: str
    known_probs: dict | None
    fits: dict | None
    truncation_bounds: tuple[float, float]
    stage1_probs: dict[int, np.ndarray] = field(repr=False, default_factory=dict)
    stage2_probs: dict[tuple[int, int], np.ndarray] = field(
        repr=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        if self.kind not in ("known", "fitted"):
            raise ValueError(f"unknown g kind {self.kind!r}")
        if self.kind == "known":
            if self.known_probs is None:
                raise ValueError("known g requires known_probs")
            stage1 = {c: p for (s, c), p in self.known_probs.items() if s == 1}
            stage2: dict[int, float] = {}
            for (s, c), p in self.known_probs.items():
                if not 0.0 < p <= 1.0:
                    raise ValueError(f"known probability for {(s, c)} outside (0, 1]")
                if s == 2:
                    stage2[c[0]] = stage2.get(c[0], 0.0) + p
            if abs(sum(stage1.values()) - 1.0) > 1e-9:
                raise ValueError("stage-1 known probabilities must sum to 1")
            for branch, total in stage2.items():
                if abs(total - 1.0) > 1e-9:
                    raise ValueError(
                        f"stage-2 known probabilities on branch {branch} must sum to 1"
                    )

    def stage1(self, d1: int) -> np.ndarray:
        if d1 not in self.stage1_probs:
            raise ValueError(f"stage-1 option {d1} not in support")
        return self.stage1_probs[d1]

    def stage2(self, dataset: Dataset, regime: RegimeSpec) -> np.ndarray:
        """P(A2 = regime's recommendation on the record's own branch)."""
        for branch in (0, 1):
            if (branch, regime.d2(branch)) not in self.stage2_probs:
                raise ValueError(
                    f"stage-2 option {regime.d2(branch)} not in branch-{branch} support"
                )
        return np.where(
            dataset.l2 == 1,
            self.stage2_probs[(1, regime.d2_if_lapse)],
            self.stage2_probs[(0, regime.d2_if_no_lapse)],
        )


@dataclass(frozen=True)
class RegimeMeanRequest:
    """One estimation task: which regime, which outcome, how.

    ``outcome`` is 'y' (effectiveness) or 'c' (cost); ``estimator`` is 'ipw'
    or 'tmle'; ``g`` supplies the treatment mechanism; ``q_covariates`` the
    iterated-regression covariates (TMLE only).
    """

    regime: RegimeSpec
    outcome: str
    estimator: str
    g: GModel
    q_covariates: CovariateSpec = DEFAULT_Q

    def __post_init__(self) -> None:
        if self.outcome not in ("y", "c"):
            raise ValueError(f"unknown outcome {self.outcome!r}, expected 'y' or 'c'")
        if self.estimator not in ("ipw", "tmle"):
            raise ValueError(
                f"unknown estimator {self.estimator!r}, expected 'ipw' or 'tmle'"
            )


def estimate_g(
    dataset: Dataset,
    kind: str = "known",
    covariate_spec: CovariateSpec = DEFAULT_G,
    truncation: float = 0.01,
) -> GModel:
    """Treatment mechanism: design probabilities or logistic fits.

    'known' takes the randomization to be uniform over each support, which is
    the SMART design this package targets.  'fitted' estimates a stage-1
    logistic model of a1 on the baseline covariates and per-branch stage-2
    models of a2 on (baseline, a1, s2); each support must have exactly two
    options, and fitted probabilities are truncated to [truncation, 1 -
    truncation].  Known probabilities are never truncated.
    """
    n = dataset.n
    if kind == "known":
        p1 = 1.0 / len(dataset.stage1_support)
        known: dict = {(1, d): p1 for d in dataset.stage1_support}
        stage1_probs = {d: np.full(n, p1) for d in dataset.stage1_support}
        stage2_probs = {}
        for branch in (0, 1):
            p2 = 1.0 / len(dataset.stage2_support[branch])
            for option in dataset.stage2_support[branch]:
                known[(2, (branch, option))] = p2
                stage2_probs[(branch, option)] = np.full(n, p2)
        return GModel(
            kind="known",
            known_probs=known,
            fits=None,
            truncation_bounds=(0.0, 1.0),
            stage1_probs=stage1_probs,
            stage2_probs=stage2_probs,
        )

    if kind != "fitted":
        raise ValueError(f"unknown g kind {kind!r}, expected 'known' or 'fitted'")
    if not 0.0 < truncation < 0.5:
        raise ValueError("truncation must lie in (0, 0.5)")
    if len(dataset.stage1_support) != 2 or any(
        len(dataset.stage2_support[b]) != 2 for b in (0, 1)
    ):
        raise ValueError(
            "fitted treatment models require two options per stage and branch"
        )

    lo1, hi1 = sorted(dataset.stage1_support)
    X1 = _design(dataset, covariate_spec.stage1, ("x1",))
    try:
        fit1 = fit_logistic(X1, (dataset.a1 == hi1).astype(np.float64))
    except SeparationDetected as err:
        raise SeparationDetected(f"stage 1: {err}") from None
    p_hi1 = np.clip(predict(fit1, X1), truncation, 1.0 - truncation)
    stage1_probs = {hi1: p_hi1, lo1: 1.0 - p_hi1}
    fits: dict = {"stage1": fit1}

    stage2_probs = {}
    for branch in (0, 1):
        lo2, hi2 = sorted(dataset.stage2_support[branch])
        rows = dataset.l2 == branch
        if not rows.any():
            raise ZeroSupport(f"no records observed on branch l2={branch}")
        X2 = _design(dataset, covariate_spec.stage2, ("x1", "a1", "s2"))
        try:
            fit2 = fit_logistic(X2[rows], (dataset.a2[rows] == hi2).astype(np.float64))
        except SeparationDetected as err:
            raise SeparationDetected(f"stage 2, branch l2={branch}: {err}") from None
        p_hi2 = np.full(n, np.nan)
        p_hi2[rows] = np.clip(predict(fit2, X2[rows]), truncation, 1.0 - truncation)
        stage2_probs[(branch, hi2)] = p_hi2
        stage2_probs[(branch, lo2)] = 1.0 - p_hi2
        fits[("stage2", branch)] = fit2
    return GModel(
        kind="fitted",
        known_probs=None,
        fits=fits,
        truncation_bounds=(truncation, 1.0 - truncation),
        stage1_probs=stage1_probs,
        stage2_probs=stage2_probs,
    )


def _cumulative_weights(
    dataset: Dataset, regime: RegimeSpec, g: GModel
) -> tuple[np.ndarray, np.ndarray]:
    """(consistency mask, I[consistent] / (g1 g2)); raises on empty support."""
    mask = consistency_mask(dataset, regime)
    if not mask.any():
        raise ZeroSupport(f"no records consistent with regime {regime.id}")
    g1 = g.stage1(regime.d1)
    g2 = g.stage2(dataset, regime)
    w = np.zeros(dataset.n)
    w[mask] = 1.0 / (g1[mask] * g2[mask])
    return mask, w


def ipw_mean(dataset: Dataset, request: RegimeMeanRequest) -> EstimateWithIC:
    """Weight-normalized inverse-probability mean of the outcome under the regime.

    psi solves the weighted estimating equation sum w (z - psi) = 0, i.e. the
    weighted mean with weights I[consistent]/(g1 g2).  Normalizing by the
    realized weight total (whose expectation is n) is what a weighted
    regression over the consistent records computes, and it removes the pure
    noise the random consistent-record count would otherwise inject.  The
    influence curve is the plug-in one (treatment probabilities taken as
    fixed); under a fitted g this over-states the variance, never the
    reverse, so intervals are conservative.
    """
    _, w = _cumulative_weights(dataset, request.regime, request.g)
    z = dataset.outcome(request.outcome)
    psi = float((w * z).sum() / w.sum())
    return EstimateWithIC(psi=psi, ic=w * (z - psi) / w.mean())


def _fluctuate(z: np.ndarray, q: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Intercept-only logistic update of q toward z along weighted residuals."""
    offset = logit(np.clip(q, 1e-10, 1.0 - 1e-10))
    ones = np.ones((z.shape[0], 1))
    try:
        fit = fit_logistic(ones, z, weights=weights, offset=offset)
    except SeparationDetected as err:
        raise FluctuationDiverged(str(err)) from None
    return expit(offset + fit.coefficients[0])


def tmle_mean(dataset: Dataset, request: RegimeMeanRequest) -> EstimateWithIC:
    """Targeted minimum-loss estimate of the outcome mean under the regime.

    The influence curve is the standard one for the iterated-regression
    representation: weighted stage-2 residual plus weighted stage-1 residual
    plus the centered stage-1 prediction, on the original outcome scale.
    A constant outcome column short-circuits to that constant with a zero
    influence curve.
    """
    regime = request.regime
    mask, h2 = _cumulative_weights(dataset, regime, request.g)
    stage1_mask = dataset.a1 == regime.d1
    g1 = request.g.stage1(regime.d1)
    h1 = np.zeros(dataset.n)
    h1[stage1_mask] = 1.0 / g1[stage1_mask]

    z_raw = dataset.outcome(request.outcome)
    lo = float(z_raw.min())
    hi = float(z_raw.max())
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ScalingDegenerate("outcome range is not finite")
    if hi == lo:
        return EstimateWithIC(psi=lo, ic=np.zeros(dataset.n))
    z = (z_raw - lo) / (hi - lo)

    X2 = _design(dataset, request.q_covariates.stage2, ("x1", "l2", "s2"))
    fit2 = fit_logistic(X2[mask], z[mask])
    q2 = predict(fit2, X2)
    q2_star = _fluctuate(z, q2, h2)

    X1 = _design(dataset, request.q_covariates.stage1, ("x1",))
    fit1 = fit_logistic(X1[stage1_mask], q2_star[stage1_mask])
    q1 = predict(fit1, X1)
    q1_star = _fluctuate(q2_star, q1, h1)

    psi_scaled = float(q1_star.mean())
    ic_scaled = h2 * (z - q2_star) + h1 * (q2_star - q1_star) + (q1_star - psi_scaled)
    return EstimateWithIC(psi=lo + (hi - lo) * psi_scaled, ic=(hi - lo) * ic_scaled)


def regime_mean(dataset: Dataset, request: RegimeMeanRequest) -> EstimateWithIC:
    """Dispatch on the request's estimator tag."""
    if request.estimator == "ipw":
        return ipw_mean(dataset, request)
    return tmle_mean(dataset, request)
