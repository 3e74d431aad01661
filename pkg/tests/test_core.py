"""Trajectory containers, regime consistency, and grid enumeration."""

from __future__ import annotations

import numpy as np
import pytest

from smartcea.core import (
    Dataset,
    EstimateWithIC,
    RegimeSpec,
    TrajectoryRecord,
    consistency_mask,
    is_consistent,
    regime_grid,
)


def _record(a1=0, l2=1, a2=1):
    return TrajectoryRecord(id=1, x1=(0.0,), a1=a1, l2=l2, s2=0.0, a2=a2, y=1, c=2.0)


def test_d2_selects_branch():
    regime = RegimeSpec(id=1, d1=0, d2_if_lapse=1, d2_if_no_lapse=3)
    assert regime.d2(1) == 1
    assert regime.d2(0) == 3


def test_is_consistent_uses_taken_branch_only():
    regime = RegimeSpec(id=1, d1=0, d2_if_lapse=1, d2_if_no_lapse=3)
    assert is_consistent(_record(a1=0, l2=1, a2=1), regime)
    assert not is_consistent(_record(a1=0, l2=1, a2=2), regime)
    assert is_consistent(_record(a1=0, l2=0, a2=3), regime)
    assert not is_consistent(_record(a1=0, l2=0, a2=4), regime)
    assert not is_consistent(_record(a1=1, l2=1, a2=1), regime)


def test_consistency_mask_matches_per_record(trial, regimes):
    for regime in regimes:
        mask = consistency_mask(trial, regime)
        by_record = np.array(
            [is_consistent(rec, regime) for rec in trial.iter_records()]
        )
        assert np.array_equal(mask, by_record)


def test_each_record_is_consistent_with_exactly_two_regimes(trial, regimes):
    # A realized trajectory pins d1 and the recommendation on the branch
    # taken; the off-branch recommendation stays free, leaving two regimes.
    counts = np.zeros(trial.n, dtype=int)
    for regime in regimes:
        counts += consistency_mask(trial, regime)
    assert np.all(counts == 2)


def test_dataset_validates_columns():
    base = dict(
        x1=[0.0, 1.0], a1=[0, 1], l2=[0, 1], s2=[0.5, -0.5],
        a2=[3, 1], y=[0, 1], c=[1.0, 2.0],
    )
    Dataset(**base)
    with pytest.raises(ValueError):
        Dataset(**{**base, "y": [0, 2]})
    with pytest.raises(ValueError):
        Dataset(**{**base, "c": [1.0, -2.0]})
    with pytest.raises(ValueError):
        Dataset(**{**base, "l2": [0, 3]})
    with pytest.raises(ValueError):
        Dataset(**{**base, "s2": [np.nan, 0.0]})
    with pytest.raises(ValueError):
        Dataset(**{**base, "a1": [0, 1, 1]})


def test_dataset_rejects_out_of_support_codes():
    with pytest.raises(ValueError):
        Dataset(
            x1=[0.0], a1=[2], l2=[1], s2=[0.0], a2=[1], y=[1], c=[1.0],
            stage1_support={0, 1},
        )
    with pytest.raises(ValueError):
        Dataset(
            x1=[0.0], a1=[0], l2=[1], s2=[0.0], a2=[3], y=[1], c=[1.0],
            stage2_support={0: {3, 4}, 1: {1, 2}},
        )


def test_dataset_requires_at_least_one_record():
    with pytest.raises(ValueError):
        Dataset(x1=[], a1=[], l2=[], s2=[], a2=[], y=[], c=[])


def test_columns_are_read_only(trial):
    with pytest.raises(ValueError):
        trial.y[0] = 0


def test_outcome_accessor(trial):
    assert np.array_equal(trial.outcome("y"), trial.y.astype(float))
    assert trial.outcome("y").dtype == np.float64
    assert np.array_equal(trial.outcome("c"), trial.c)
    with pytest.raises(ValueError):
        trial.outcome("z")


def test_record_round_trip(trial):
    rec = trial.record(5)
    assert rec.a1 == trial.a1[5]
    assert rec.x1 == tuple(trial.x1[5])
    assert rec.c == trial.c[5]


def test_take_preserves_supports_and_allows_replacement(trial):
    sub = trial.take([0, 0, 3, 2])
    assert sub.n == 4
    assert sub.stage1_support == trial.stage1_support
    assert sub.stage2_support == trial.stage2_support
    assert np.array_equal(sub.x1[0], trial.x1[0])
    assert np.array_equal(sub.x1[1], trial.x1[0])


def test_regime_grid_benchmark_supports():
    grid = regime_grid({0, 1}, {0: {3, 4}, 1: {1, 2}})
    assert len(grid) == 8
    assert [r.id for r in grid] == list(range(1, 9))
    triples = [(r.d1, r.d2_if_lapse, r.d2_if_no_lapse) for r in grid]
    assert len(set(triples)) == 8
    assert triples == sorted(triples)  # d1 ascending first


def test_regime_grid_supports_filtering_redundant_rows():
    # A three-arm first stage with three lapse options and two no-lapse
    # options enumerates 18 rows; a design where the two no-lapse
    # continuations coincide under one particular first-stage arm trims to
    # 15 by filtering, without special casing in the enumeration itself.
    grid = regime_grid({0, 1, 2}, {0: {4, 5}, 1: {1, 2, 3}})
    assert len(grid) == 18
    kept = [r for r in grid if not (r.d1 == 2 and r.d2_if_no_lapse == 5)]
    assert len(kept) == 15
    assert len({(r.d1, r.d2_if_lapse, r.d2_if_no_lapse) for r in kept}) == 15


def test_estimate_with_ic_se_matches_definition():
    ic = np.array([1.0, -1.0, 2.0, -2.0, 0.0])
    est = EstimateWithIC(psi=0.3, ic=ic)
    assert est.n == 5
    assert np.isclose(est.se, np.sqrt(np.var(ic, ddof=1) / 5))


def test_estimate_with_ic_rejects_length_mismatch():
    with pytest.raises(ValueError):
        EstimateWithIC(psi=0.0, ic=np.zeros(4), n=5)
