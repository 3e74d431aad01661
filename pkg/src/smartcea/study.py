"""Monte-Carlo harness: repeated simulate / estimate / infer, then aggregate.

Each repetition draws a fresh trial of size n from its own substream of the
master seed, and every estimator analyzes the identical dataset (a paired
design, so variance ratios between estimators are paired comparisons).  Per
regime and estimator the harness records the ICER, its Wald interval, and
the component coefficients of variation; aggregation then reports bias,
variance, MSE, interval width, coverage against the simulation truth, and
the TMLE-to-IPW variance ratio.

Repetitions where the ICER is undefined (an exactly zero effect difference,
or an estimation failure) can never enter the moments; they are counted and
reported.  Repetitions with a defined but unreliable ICER (a component
coefficient of variation at or past the threshold) are excluded by default
and restored by ``retain_degenerate``, which reproduces the behavior behind
published summaries whose enormous interval widths show no trimming at all.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .core import RegimeSpec
from .dgp import TARGET_ICER, DgpConfig, TruthTable, embedded_regimes, simulate_smart, true_values
from .estimate import (
    RegimeMeanRequest,
    SeparationDetected,
    ZeroSupport,
    estimate_g,
    regime_mean,
)
from .inference import (
    PER_HUNDRED,
    DegenerateDenominator,
    IcerResult,
    icer,
    risk_difference,
)

__all__ = [
    "StudyConfig",
    "StudyMetrics",
    "StudyRow",
    "StudyResult",
    "run_study",
    "RelativeVariance",
    "relative_variance",
    "TRUTH_MC_DRAWS",
]

# Monte-Carlo resolution for the truth table behind bias and coverage.
TRUTH_MC_DRAWS = 2_000_000

DEFAULT_G_MODES: Mapping[str, str] = {"ipw": "known", "tmle": "fitted"}


def _default_regimes() -> tuple[RegimeSpec, ...]:
    return embedded_regimes()


@dataclass(frozen=True)
class StudyConfig:
    """Design of one simulation study.

    ``g_modes`` pairs each estimator with its treatment model: the benchmark
    comparison runs IPW with the known randomization probabilities against
    TMLE with fitted ones.  ``regimes`` must contain the reference regime.
    """

    reps: int = 500
    n: int = 1809
    seed: int = 0
    estimators: tuple[str, ...] = ("ipw", "tmle")
    g_modes: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_G_MODES))
    regimes: tuple[RegimeSpec, ...] = field(default_factory=_default_regimes)
    alpha: float = 0.05
    cv_threshold: float = 2.0
    reference_id: int = 1

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not self.estimators:
            raise ValueError("at least one estimator required")
        for est in self.estimators:
            if est not in ("ipw", "tmle"):
                raise ValueError(f"unknown estimator {est!r}")
            if self.g_modes.get(est) not in ("known", "fitted"):
                raise ValueError(f"estimator {est!r} needs a g mode, known or fitted")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.cv_threshold <= 0.0:
            raise ValueError("cv_threshold must be positive")
        if not any(r.id == self.reference_id for r in self.regimes):
            raise ValueError(f"reference regime {self.reference_id} not in regimes")


@dataclass(frozen=True)
class StudyMetrics:
    """Sampling-performance summary for one (estimator, regime) cell."""

    bias: float
    variance: float
    mse: float
    mean_ci_width: float
    coverage_pct: float
    avg_cv_cost: float
    avg_cv_eff: float
    rel_var_vs_ipw: float | None = None


@dataclass(frozen=True)
class StudyRow:
    estimator: str
    regime_id: int
    metrics: StudyMetrics
    n_used: int
    degenerate_count: int


@dataclass(frozen=True)
class RepDraws:
    """Per-repetition records for one (estimator, regime) cell; NaN = excluded."""

    icer: np.ndarray
    se: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    cv_cost: np.ndarray
    cv_eff: np.ndarray
    failed: np.ndarray
    unreliable: np.ndarray


@dataclass(frozen=True)
class StudyResult:
    config: StudyConfig
    truth: TruthTable
    truth_icers: dict[int, float]
    rows: tuple[StudyRow, ...]
    draws: dict[tuple[str, int], RepDraws]

    def row(self, estimator: str, regime_id: int) -> StudyRow:
        for r in self.rows:
            if r.estimator == estimator and r.regime_id == regime_id:
                return r
        raise KeyError((estimator, regime_id))


@dataclass(frozen=True)
class RelativeVariance:
    """Paired variance ratio in both orientations, explicitly labeled."""

    tmle_over_ipw: float
    ipw_over_tmle: float
    n_aligned: int


def relative_variance(
    tmle_estimates: Mapping[int, np.ndarray], ipw_estimates: Mapping[int, np.ndarray]
) -> dict[int, RelativeVariance]:
    """Per-regime ratio of empirical variances across repetitions.

    Inputs map regime id to the per-rep estimate stream, NaN marking an
    excluded rep.  Both estimators must have kept exactly the same reps for
    a regime (the paired design breaks otherwise); mismatched rep sets are
    an error, as is a zero denominator variance.  Both orientations are
    returned because published tables have used both.
    """
    if set(tmle_estimates) != set(ipw_estimates):
        raise ValueError("estimators cover different regimes")
    out: dict[int, RelativeVariance] = {}
    for rid in sorted(tmle_estimates):
        a = np.asarray(tmle_estimates[rid], dtype=np.float64)
        b = np.asarray(ipw_estimates[rid], dtype=np.float64)
        if a.shape != b.shape:
            raise ValueError(f"regime {rid}: estimate streams differ in length")
        mask_a = np.isfinite(a)
        mask_b = np.isfinite(b)
        if not np.array_equal(mask_a, mask_b):
            raise ValueError(
                f"regime {rid}: estimators kept different reps; align exclusions first"
            )
        if mask_a.sum() < 2:
            raise ValueError(f"regime {rid}: fewer than 2 aligned reps")
        va = float(np.var(a[mask_a]))
        vb = float(np.var(b[mask_b]))
        if va == 0.0 or vb == 0.0:
            raise ValueError(f"regime {rid}: zero variance in one estimate stream")
        out[rid] = RelativeVariance(
            tmle_over_ipw=va / vb, ipw_over_tmle=vb / va, n_aligned=int(mask_a.sum())
        )
    return out


def _rep_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence((seed, rep)).generate_state(1, np.uint64)[0])


def _default_analyze(
    dataset, regime: RegimeSpec, reference: RegimeSpec, estimator: str, g, config: StudyConfig
) -> IcerResult:
    def mean(r: RegimeSpec, out: str):
        return regime_mean(
            dataset, RegimeMeanRequest(regime=r, outcome=out, estimator=estimator, g=g)
        )

    rd_eff = risk_difference(mean(regime, "y"), mean(reference, "y"), PER_HUNDRED)
    rd_cost = risk_difference(mean(regime, "c"), mean(reference, "c"), 1.0)
    return icer(rd_cost, rd_eff, cv_threshold=config.cv_threshold, alpha=config.alpha)


def _run_one_rep(
    config: StudyConfig, rep: int, analyze: Callable | None
) -> dict[tuple[str, int], tuple]:
    """One repetition: simulate once, analyze under every estimator.

    Returns (estimator, regime_id) -> (icer, se, lo, hi, cv_c, cv_e) or
    ("failed",) when the cell's statistic is undefined for this rep.
    """
    dataset = simulate_smart(DgpConfig(n=config.n, seed=_rep_seed(config.seed, rep)))
    reference = next(r for r in config.regimes if r.id == config.reference_id)
    targets = [r for r in config.regimes if r.id != config.reference_id]
    out: dict[tuple[str, int], tuple] = {}
    for est in config.estimators:
        if analyze is not None:
            for regime in targets:
                try:
                    res = analyze(dataset, regime, reference, est, config)
                except (DegenerateDenominator, ZeroSupport):
                    out[(est, regime.id)] = ("failed",)
                    continue
                out[(est, regime.id)] = _cell(res)
            continue
        try:
            g = estimate_g(dataset, config.g_modes[est])
        except (SeparationDetected, ZeroSupport):
            for regime in targets:
                out[(est, regime.id)] = ("failed",)
            continue
        for regime in targets:
            try:
                res = _default_analyze(dataset, regime, reference, est, g, config)
            except (DegenerateDenominator, ZeroSupport):
                out[(est, regime.id)] = ("failed",)
                continue
            out[(est, regime.id)] = _cell(res)
    return out


def _cell(res: IcerResult) -> tuple:
    return (res.icer, res.se, res.ci[0], res.ci[1], res.cv_cost, res.cv_eff, res.reliable)


def _truth_icers(config: StudyConfig, truth: TruthTable) -> dict[int, float]:
    """Truth ICER per regime, published-table fallback where undefined.

    A regime whose true effect difference is exactly zero has no true ICER;
    bias and coverage for it are anchored at the published benchmark value
    when one exists so the cell stays comparable instead of vanishing.
    """
    out: dict[int, float] = {}
    for regime in config.regimes:
        if regime.id == config.reference_id:
            continue
        value = truth.icer_for(regime.id)
        if not math.isfinite(value) and 1 <= regime.id <= len(TARGET_ICER):
            value = float(TARGET_ICER[regime.id - 1])
        out[regime.id] = value
    return out


def run_study(
    config: StudyConfig,
    truth: TruthTable | None = None,
    analyze: Callable | None = None,
    retain_degenerate: bool = False,
    threads: int = 1,
    progress: Callable[[int], None] | None = None,
) -> StudyResult:
    """Run the full simulation study described by ``config``.

    ``truth`` defaults to a fresh :func:`~smartcea.dgp.true_values` table at
    :data:`TRUTH_MC_DRAWS` draws under the study's master seed.  ``analyze``
    replaces the built-in estimation pipeline (signature: dataset, regime,
    reference, estimator, config -> IcerResult); custom hooks run serially.
    ``retain_degenerate`` keeps unreliable-but-defined reps in the moments.
    ``threads`` caps process-level parallelism across reps; results are
    identical for any thread count because each rep is self-contained.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    if truth is None:
        truth = true_values(
            DgpConfig(n=config.n, seed=config.seed),
            regimes=config.regimes,
            mc_draws=TRUTH_MC_DRAWS,
            seed=config.seed,
            reference_id=config.reference_id,
        )
    truth_icers = _truth_icers(config, truth)

    targets = [r.id for r in config.regimes if r.id != config.reference_id]
    cells = [(est, rid) for est in config.estimators for rid in targets]
    store = {
        key: {
            name: np.full(config.reps, np.nan)
            for name in ("icer", "se", "lo", "hi", "cv_c", "cv_e")
        }
        for key in cells
    }
    failed = {key: np.zeros(config.reps, dtype=bool) for key in cells}
    unreliable = {key: np.zeros(config.reps, dtype=bool) for key in cells}

    if threads > 1 and analyze is None:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rep_results = list(
                pool.map(_run_one_rep, [config] * config.reps, range(config.reps), [None] * config.reps)
            )
        if progress is not None:
            for rep in range(config.reps):
                progress(rep)
    else:
        rep_results = []
        for rep in range(config.reps):
            rep_results.append(_run_one_rep(config, rep, analyze))
            if progress is not None:
                progress(rep)

    for rep, result in enumerate(rep_results):
        for key in cells:
            cell = result[key]
            if cell[0] == "failed":
                failed[key][rep] = True
                continue
            value, se, lo, hi, cv_c, cv_e, reliable = cell
            for name, v in zip(("icer", "se", "lo", "hi", "cv_c", "cv_e"), (value, se, lo, hi, cv_c, cv_e)):
                store[key][name][rep] = v
            if not reliable:
                unreliable[key][rep] = True

    rows: list[StudyRow] = []
    draws: dict[tuple[str, int], RepDraws] = {}
    kept_masks: dict[tuple[str, int], np.ndarray] = {}
    for key in cells:
        kept = ~failed[key]
        if not retain_degenerate:
            kept = kept & ~unreliable[key]
        kept_masks[key] = kept

    for est, rid in cells:
        key = (est, rid)
        kept = kept_masks[key]
        s = store[key]
        masked = {
            name: np.where(kept, s[name], np.nan) for name in s
        }
        draws[key] = RepDraws(
            icer=masked["icer"],
            se=masked["se"],
            ci_lower=masked["lo"],
            ci_upper=masked["hi"],
            cv_cost=masked["cv_c"],
            cv_eff=masked["cv_e"],
            failed=failed[key].copy(),
            unreliable=unreliable[key].copy(),
        )
        n_used = int(kept.sum())
        degenerate = config.reps - n_used
        t = truth_icers[rid]
        if n_used == 0 or not math.isfinite(t):
            metrics = StudyMetrics(*(math.nan,) * 7)
        else:
            vals = s["icer"][kept]
            bias = float(vals.mean()) - t
            variance = float(np.var(vals))
            mse = float(np.mean((vals - t) ** 2))
            width = float(np.mean(s["hi"][kept] - s["lo"][kept]))
            covered = (s["lo"][kept] <= t) & (t <= s["hi"][kept])
            metrics = StudyMetrics(
                bias=bias,
                variance=variance,
                mse=mse,
                mean_ci_width=width,
                coverage_pct=100.0 * float(covered.mean()),
                avg_cv_cost=float(np.mean(s["cv_c"][kept])),
                avg_cv_eff=float(np.mean(s["cv_e"][kept])),
            )
        if est == "tmle" and "ipw" in config.estimators:
            metrics = _attach_rel_var(
                metrics, store[("tmle", rid)]["icer"], store[("ipw", rid)]["icer"],
                kept_masks[("tmle", rid)], kept_masks[("ipw", rid)],
            )
        rows.append(
            StudyRow(
                estimator=est,
                regime_id=rid,
                metrics=metrics,
                n_used=n_used,
                degenerate_count=degenerate,
            )
        )
    return StudyResult(
        config=config, truth=truth, truth_icers=truth_icers, rows=tuple(rows), draws=draws
    )


def _attach_rel_var(
    metrics: StudyMetrics,
    tmle_vals: np.ndarray,
    ipw_vals: np.ndarray,
    tmle_kept: np.ndarray,
    ipw_kept: np.ndarray,
) -> StudyMetrics:
    """var(TMLE)/var(IPW) over the reps both estimators kept."""
    aligned = tmle_kept & ipw_kept
    if aligned.sum() < 2:
        return metrics
    v_ipw = float(np.var(ipw_vals[aligned]))
    if v_ipw == 0.0:
        return metrics
    ratio = float(np.var(tmle_vals[aligned])) / v_ipw
    return StudyMetrics(
        bias=metrics.bias,
        variance=metrics.variance,
        mse=metrics.mse,
        mean_ci_width=metrics.mean_ci_width,
        coverage_pct=metrics.coverage_pct,
        avg_cv_cost=metrics.avg_cv_cost,
        avg_cv_eff=metrics.avg_cv_eff,
        rel_var_vs_ipw=ratio,
    )
