"""Contrasts and uncertainty: risk differences, ICERs, and their intervals.

All point estimators in this package carry influence curves, so contrasts
are formed by differencing influence curves record by record and ratios by
the delta method.  The delta-method ICER standard error is only trustworthy
when neither component is noisy relative to its size, so every ICER carries
a reliability flag driven by the components' coefficients of variation; the
nonparametric bootstrap is the fallback when the flag is down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.stats import norm

from .core import Dataset, EstimateWithIC
from .rng import PURPOSE_BOOTSTRAP, philox_stream

__all__ = [
    "PER_HUNDRED",
    "MIN_DENOMINATOR",
    "DegenerateDenominator",
    "TooManyDegenerate",
    "risk_difference",
    "wald_ci",
    "delta_method_ic",
    "IcerResult",
    "icer",
    "IcerVarianceDecomposition",
    "icer_variance_decomposition",
    "ContrastResult",
    "contrast",
    "BootstrapResult",
    "bootstrap_ci",
]

# Reporting scale for effectiveness differences: successes per 100 persons.
PER_HUNDRED = 100.0

# Effect differences smaller than this are treated as exactly zero.
MIN_DENOMINATOR = 1e-12


class DegenerateDenominator(Exception):
    """The effect difference is numerically zero; the ICER is undefined."""


class TooManyDegenerate(Exception):
    """Too large a share of bootstrap replicates had undefined statistics."""


def risk_difference(
    est_d: EstimateWithIC, est_d0: EstimateWithIC, scale: float
) -> EstimateWithIC:
    """Difference of two estimates computed on the same records.

    Both influence curves must be aligned record for record; the result's
    curve is their scaled difference, which carries the full covariance.
    ``scale`` sets the reporting unit (:data:`PER_HUNDRED` for effectiveness,
    1 for cost).
    """
    if est_d.n != est_d0.n:
        raise ValueError("estimates come from different numbers of records")
    return EstimateWithIC(
        psi=scale * (est_d.psi - est_d0.psi), ic=scale * (est_d.ic - est_d0.ic)
    )


def wald_ci(psi: float, ic: np.ndarray, alpha: float = 0.05) -> tuple[float, float]:
    """Normal-theory interval from the influence-curve standard error."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    se = EstimateWithIC(psi=psi, ic=np.asarray(ic, dtype=np.float64)).se
    z = float(norm.ppf(1.0 - alpha / 2.0))
    return psi - z * se, psi + z * se


def delta_method_ic(
    rd_cost: EstimateWithIC, rd_eff: EstimateWithIC
) -> tuple[float, np.ndarray]:
    """ICER point value and influence curve for the ratio of two differences.

    ic = rd_cost.ic / psi_e - (psi_c / psi_e^2) * rd_eff.ic.  Raises
    :class:`DegenerateDenominator` when the effect difference is numerically
    zero (|psi_e| below :data:`MIN_DENOMINATOR`).  A zero cost difference
    over a nonzero effect difference is a legitimate ICER of zero.
    """
    if rd_cost.n != rd_eff.n:
        raise ValueError("cost and effect differences use different records")
    if abs(rd_eff.psi) < MIN_DENOMINATOR:
        raise DegenerateDenominator(
            f"|effect difference| = {abs(rd_eff.psi):.3g} below {MIN_DENOMINATOR:.0e}"
        )
    value = rd_cost.psi / rd_eff.psi
    ic = rd_cost.ic / rd_eff.psi - (rd_cost.psi / rd_eff.psi**2) * rd_eff.ic
    return value, ic


@dataclass(frozen=True)
class IcerResult:
    """Incremental cost-effectiveness ratio with delta-method uncertainty.

    ``cv_cost`` and ``cv_eff`` are the components' coefficients of variation
    (standard error over absolute point value); ``reliable`` is their joint
    verdict against the threshold the result was built with.
    """

    icer: float
    rd_cost: EstimateWithIC
    rd_eff: EstimateWithIC
    ic_icer: np.ndarray
    se: float
    ci: tuple[float, float]
    cv_cost: float
    cv_eff: float
    reliable: bool


def icer(
    rd_cost: EstimateWithIC,
    rd_eff: EstimateWithIC,
    cv_threshold: float = 2.0,
    alpha: float = 0.05,
) -> IcerResult:
    """Ratio of incremental cost to incremental effect, by the delta method.

    Raises :class:`DegenerateDenominator` when the effect difference is
    numerically zero.  ``reliable`` is True when both components have
    coefficient of variation below ``cv_threshold``; when it is False the
    delta-method interval should not be reported and the bootstrap used
    instead.
    """
    value, ic = delta_method_ic(rd_cost, rd_eff)
    cv_cost = math.inf if rd_cost.psi == 0.0 else rd_cost.se / abs(rd_cost.psi)
    cv_eff = rd_eff.se / abs(rd_eff.psi)
    return IcerResult(
        icer=value,
        rd_cost=rd_cost,
        rd_eff=rd_eff,
        ic_icer=ic,
        se=EstimateWithIC(psi=value, ic=ic).se,
        ci=wald_ci(value, ic, alpha),
        cv_cost=cv_cost,
        cv_eff=cv_eff,
        reliable=bool(cv_cost < cv_threshold and cv_eff < cv_threshold),
    )


@dataclass(frozen=True)
class IcerVarianceDecomposition:
    """Var(ICER) = ICER^2 (cv_c^2 + cv_e^2 - cov_term), split into pieces.

    ``term_a`` is the cost CV squared, ``term_b`` the effect CV squared, and
    ``cov_term`` = 2 Cov(ic_c, ic_e) / (n psi_e psi_c).  ``var_total`` always
    equals the variance of the delta-method influence curve divided by n.
    When the cost difference is exactly zero the ratio form is unavailable
    (``cov_defined`` is False, term_a and cov_term are inf/nan) and
    ``var_total`` falls back to the direct influence-curve variance.
    Iterating yields (term_a, term_b, cov_term, var_total).
    """

    term_a: float
    term_b: float
    cov_term: float
    var_total: float
    cov_defined: bool = True

    def __iter__(self) -> Iterator[float]:
        return iter((self.term_a, self.term_b, self.cov_term, self.var_total))


def icer_variance_decomposition(result: IcerResult) -> IcerVarianceDecomposition:
    """Split the delta-method ICER variance into component and covariance terms.

    Exposing the pieces shows which component drives the uncertainty and how
    much the built-in cost-effect correlation offsets it.
    """
    rd_cost = result.rd_cost
    rd_eff = result.rd_eff
    n = rd_cost.n
    direct = float(np.var(result.ic_icer, ddof=1)) / n
    term_b = (rd_eff.se / abs(rd_eff.psi)) ** 2
    if rd_cost.psi == 0.0:
        return IcerVarianceDecomposition(
            term_a=math.inf,
            term_b=term_b,
            cov_term=math.nan,
            var_total=direct,
            cov_defined=False,
        )
    term_a = (rd_cost.se / abs(rd_cost.psi)) ** 2
    cov = float(np.cov(rd_cost.ic, rd_eff.ic, ddof=1)[0, 1])
    cov_term = 2.0 * cov / (n * rd_eff.psi * rd_cost.psi)
    var_total = result.icer**2 * (term_a + term_b - cov_term)
    return IcerVarianceDecomposition(
        term_a=term_a, term_b=term_b, cov_term=cov_term, var_total=var_total
    )


@dataclass(frozen=True)
class ContrastResult:
    """Difference of two ICERs against the same reference regime."""

    diff: float
    ic: np.ndarray
    se: float
    ci: tuple[float, float]
    component_icers: tuple[float, float]


def contrast(
    icer_i: IcerResult, icer_j: IcerResult, alpha: float = 0.05
) -> ContrastResult:
    """ICER_i - ICER_j with a record-by-record differenced influence curve.

    Both results must come from the same dataset (aligned records) so the
    difference curve carries their covariance.
    """
    if icer_i.ic_icer.shape[0] != icer_j.ic_icer.shape[0]:
        raise ValueError("ICERs use different records")
    diff = icer_i.icer - icer_j.icer
    ic = icer_i.ic_icer - icer_j.ic_icer
    return ContrastResult(
        diff=diff,
        ic=ic,
        se=EstimateWithIC(psi=diff, ic=ic).se,
        ci=wald_ci(diff, ic, alpha),
        component_icers=(icer_i.icer, icer_j.icer),
    )


@dataclass(frozen=True)
class BootstrapResult:
    lower: float
    upper: float
    alpha: float
    n_replicates: int
    n_degenerate: int
    estimates: np.ndarray


def bootstrap_ci(
    dataset: Dataset,
    analysis_spec: Callable[[Dataset], float],
    n_replicates: int = 500,
    seed: int = 0,
    alpha: float = 0.05,
    max_degenerate_share: float = 0.1,
) -> BootstrapResult:
    """Percentile bootstrap over records.

    ``analysis_spec`` maps a resampled dataset to the scalar of interest.
    Replicate b resamples rows with the stream (seed, bootstrap, b), so the
    first replicates are identical whatever ``n_replicates`` is.  Replicates
    where the statistic is undefined (degenerate denominator, a regime with
    no consistent records) are dropped but counted; if their share exceeds
    ``max_degenerate_share`` the interval is refused.
    """
    from .estimate import ZeroSupport  # late import, avoids a module cycle

    if n_replicates < 100:
        raise ValueError("need at least 100 replicates for a percentile interval")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    n = dataset.n
    kept = []
    n_degenerate = 0
    for b in range(n_replicates):
        rng = philox_stream(seed, PURPOSE_BOOTSTRAP, b)
        idx = rng.integers(0, n, size=n)
        try:
            kept.append(float(analysis_spec(dataset.take(idx))))
        except (DegenerateDenominator, ZeroSupport):
            n_degenerate += 1
    if n_degenerate > max_degenerate_share * n_replicates:
        raise TooManyDegenerate(
            f"{n_degenerate} of {n_replicates} replicates were degenerate"
        )
    draws = np.asarray(kept)
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0])
    return BootstrapResult(
        lower=float(lo),
        upper=float(hi),
        alpha=alpha,
        n_replicates=n_replicates,
        n_degenerate=n_degenerate,
        estimates=draws,
    )
