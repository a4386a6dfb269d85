from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mobench import EvalReport, aggregate_horizons, evaluate


def test_perfect_prediction():
    y = np.array([1.0, 2.0, 3.0])
    m = evaluate(y, None, y.copy(), None)
    assert m.mae == 0.0 and m.rmse == 0.0 and m.mape_pct == 0.0
    assert m.n_evaluated == 3 and m.n_masked == 0


def test_hand_computed_example():
    y = np.array([1.0, 2.0, 3.0])
    pred = np.array([2.0, 2.0, 2.0])
    m = evaluate(y, None, pred, None)
    assert_allclose(m.mae, 2.0 / 3.0, rtol=1e-15)
    assert_allclose(m.rmse, math.sqrt(2.0 / 3.0), rtol=1e-15)
    assert_allclose(m.mape_pct, 100.0 * (1.0 + 0.0 + 1.0 / 3.0) / 3.0, rtol=1e-15)


def test_mape_floor_excludes_zero_targets():
    y = np.array([0.0, 5.0])
    pred = np.array([1.0, 4.0])
    m = evaluate(y, None, pred, None, mape_floor=0.0)
    assert_allclose(m.mape_pct, 20.0)
    assert m.n_mape == 1
    assert_allclose(m.mae, 1.0)
    assert m.n_evaluated == 2


def test_mape_nan_when_no_cell_clears_floor():
    y = np.zeros(4)
    m = evaluate(y, None, np.ones(4), None)
    assert math.isnan(m.mape_pct)
    assert m.to_dict()["mape_pct"] is None


def test_zero_evaluable_cells_is_an_error():
    y = np.ones((2, 2))
    with pytest.raises(ValueError, match="no evaluable cells"):
        evaluate(y, np.zeros_like(y, dtype=bool), y, None)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape"):
        evaluate(np.ones(3), None, np.ones(4), None)
    with pytest.raises(ValueError, match="mape_floor"):
        evaluate(np.ones(3), None, np.ones(3), None, mape_floor=-1.0)


def test_mask_intersection_and_counts():
    y = np.arange(6, dtype=np.float64).reshape(2, 3) + 1.0
    pred = y + 1.0
    tm = np.array([[True, True, False], [True, True, True]])
    pm = np.array([[True, False, True], [True, True, True]])
    m = evaluate(y, tm, pred, pm)
    assert m.n_evaluated == 4
    assert m.n_evaluated + m.n_masked == y.size


def test_mae_never_exceeds_rmse():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = rng.integers(1, 50)
        y = rng.normal(size=n)
        pred = rng.normal(size=n)
        m = evaluate(y, None, pred, None)
        assert m.mae <= m.rmse + 1e-12


def test_masked_cells_never_influence_metrics():
    rng = np.random.default_rng(1)
    y = rng.normal(size=(20, 4))
    pred = rng.normal(size=(20, 4))
    mask = rng.random((20, 4)) > 0.3
    base = evaluate(y, mask, pred, mask)
    y2 = np.where(mask, y, 1e9)
    pred2 = np.where(mask, pred, -1e9)
    perturbed = evaluate(y2, mask, pred2, mask)
    assert dataclasses.asdict(base) == dataclasses.asdict(perturbed)


def test_permutation_invariance():
    rng = np.random.default_rng(2)
    y = rng.normal(size=64)
    pred = rng.normal(size=64)
    perm = rng.permutation(64)
    a = evaluate(y, None, pred, None)
    b = evaluate(y[perm], None, pred[perm], None)
    assert_allclose((a.mae, a.rmse, a.mape_pct), (b.mae, b.rmse, b.mape_pct), rtol=1e-12)


def test_aggregate_single_horizon_modes_coincide():
    rng = np.random.default_rng(3)
    m = evaluate(rng.normal(size=30), None, rng.normal(size=30), None)
    pooled = aggregate_horizons({1: m}, "pool_cells")
    meaned = aggregate_horizons({1: m}, "mean_of_metrics")
    assert_allclose((pooled.mae, pooled.rmse), (m.mae, m.rmse), rtol=1e-15)
    assert_allclose((meaned.mae, meaned.rmse), (m.mae, m.rmse), rtol=1e-15)


def test_aggregate_equal_counts_pooled_mae_is_mean_of_maes():
    rng = np.random.default_rng(4)
    y1, p1 = rng.normal(size=40), rng.normal(size=40)
    y2, p2 = rng.normal(size=40), rng.normal(size=40) * 3.0
    per = {1: evaluate(y1, None, p1, None), 2: evaluate(y2, None, p2, None)}
    pooled = aggregate_horizons(per, "pool_cells")
    assert_allclose(pooled.mae, np.mean([per[1].mae, per[2].mae]), rtol=1e-12)
    # pooled RMSE is the sqrt of the mean MSE, not the mean of the RMSEs
    assert_allclose(
        pooled.rmse, math.sqrt(np.mean([per[1].rmse ** 2, per[2].rmse ** 2])), rtol=1e-12
    )
    assert pooled.rmse != pytest.approx(np.mean([per[1].rmse, per[2].rmse]), rel=1e-6)


def test_aggregate_mode_validation():
    with pytest.raises(ValueError):
        aggregate_horizons({}, "pool_cells")
    m = evaluate(np.ones(3), None, np.ones(3), None)
    with pytest.raises(ValueError, match="mode"):
        aggregate_horizons({1: m}, "median")


def test_report_serialization_roundtrip():
    rng = np.random.default_rng(5)
    per = {
        k: evaluate(rng.normal(size=25), None, rng.normal(size=25), None) for k in (1, 2, 3)
    }
    report = EvalReport.from_horizons(per, fingerprint="demo/x")
    payload = report.to_dict()
    assert payload["fingerprint"] == "demo/x"
    assert set(payload["per_horizon"]) == {"1", "2", "3"}
    text = report.to_text()
    assert "avg" in text and "MAE" in text
