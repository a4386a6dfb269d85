"""Masked forecast-error metrics (MAE / RMSE / MAPE) and horizon aggregation.

Only cells observed in *both* truth and prediction are scored. MAPE is reported in
percent and restricted to targets with |y| above a configurable floor, since a
zero-valued target makes the percentage undefined.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

AGGREGATE_MODES = ("pool_cells", "mean_of_metrics")


@dataclass
class HorizonMetrics:
    """Metric values for one horizon, plus the raw sums aggregation needs."""

    mae: float
    rmse: float
    mape_pct: float  # NaN when no target clears the MAPE floor
    n_evaluated: int
    n_masked: int
    n_mape: int = 0
    sum_abs_err: float = 0.0
    sum_sq_err: float = 0.0
    sum_ape_pct: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "mape_pct": None if math.isnan(self.mape_pct) else self.mape_pct,
            "n_evaluated": self.n_evaluated,
            "n_masked": self.n_masked,
        }


def evaluate(
    y_true: np.ndarray,
    true_mask: np.ndarray | None,
    y_pred: np.ndarray,
    pred_mask: np.ndarray | None,
    mape_floor: float = 0.0,
) -> HorizonMetrics:
    """Score predictions against truth over the intersection of both masks.

    MAE = mean |y - yhat|, RMSE = sqrt(mean (y - yhat)^2), MAPE = 100 * mean of
    |y - yhat| / |y| over the cells with |y| > mape_floor. Raises when the mask
    intersection is empty.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch: truth {y_true.shape} vs prediction {y_pred.shape}")
    if mape_floor < 0:
        raise ValueError(f"mape_floor must be >= 0, got {mape_floor}")
    both = np.ones(y_true.shape, dtype=bool)
    if true_mask is not None:
        both &= np.asarray(true_mask, dtype=bool)
    if pred_mask is not None:
        both &= np.asarray(pred_mask, dtype=bool)

    n_eval = int(both.sum())
    total = int(y_true.size)
    if n_eval == 0:
        raise ValueError("no evaluable cells: truth and prediction masks never overlap")

    truth = y_true[both]
    err = truth - y_pred[both]
    abs_err = np.abs(err)
    sum_abs = float(abs_err.sum())
    sum_sq = float(err @ err)

    denom_ok = np.abs(truth) > mape_floor
    n_mape = int(denom_ok.sum())
    sum_ape = float((abs_err[denom_ok] / np.abs(truth[denom_ok])).sum() * 100.0) if n_mape else 0.0

    return HorizonMetrics(
        mae=sum_abs / n_eval,
        rmse=math.sqrt(sum_sq / n_eval),
        mape_pct=sum_ape / n_mape if n_mape else float("nan"),
        n_evaluated=n_eval,
        n_masked=total - n_eval,
        n_mape=n_mape,
        sum_abs_err=sum_abs,
        sum_sq_err=sum_sq,
        sum_ape_pct=sum_ape,
    )


def aggregate_horizons(
    per_horizon: Mapping[int, HorizonMetrics], mode: str = "pool_cells"
) -> HorizonMetrics:
    """Collapse per-horizon metrics into one row.

    ``pool_cells`` concatenates every (horizon, cell) error before computing the
    metrics; ``mean_of_metrics`` takes an unweighted mean of the per-horizon metric
    values. The two coincide when all horizons evaluate the same number of cells,
    except for RMSE, which pools as sqrt of the mean MSE.
    """
    if mode not in AGGREGATE_MODES:
        raise ValueError(f"mode must be one of {AGGREGATE_MODES}, got {mode!r}")
    if not per_horizon:
        raise ValueError("nothing to aggregate")
    rows = [per_horizon[k] for k in sorted(per_horizon)]
    n_eval = sum(r.n_evaluated for r in rows)
    n_masked = sum(r.n_masked for r in rows)
    n_mape = sum(r.n_mape for r in rows)
    sum_abs = sum(r.sum_abs_err for r in rows)
    sum_sq = sum(r.sum_sq_err for r in rows)
    sum_ape = sum(r.sum_ape_pct for r in rows)

    if mode == "pool_cells":
        mae = sum_abs / n_eval
        rmse = math.sqrt(sum_sq / n_eval)
        mape = sum_ape / n_mape if n_mape else float("nan")
    else:
        mae = float(np.mean([r.mae for r in rows]))
        rmse = float(np.mean([r.rmse for r in rows]))
        with_mape = [r.mape_pct for r in rows if not math.isnan(r.mape_pct)]
        mape = float(np.mean(with_mape)) if with_mape else float("nan")

    return HorizonMetrics(
        mae=mae,
        rmse=rmse,
        mape_pct=mape,
        n_evaluated=n_eval,
        n_masked=n_masked,
        n_mape=n_mape,
        sum_abs_err=sum_abs,
        sum_sq_err=sum_sq,
        sum_ape_pct=sum_ape,
    )


@dataclass
class EvalReport:
    """Per-horizon and averaged metrics for one (dataset, method) run."""

    per_horizon: dict[int, HorizonMetrics]
    averaged: HorizonMetrics
    fingerprint: str = ""

    @classmethod
    def from_horizons(
        cls,
        per_horizon: Mapping[int, HorizonMetrics],
        mode: str = "pool_cells",
        fingerprint: str = "",
    ) -> "EvalReport":
        return cls(dict(per_horizon), aggregate_horizons(per_horizon, mode), fingerprint)

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "per_horizon": {str(k): m.to_dict() for k, m in sorted(self.per_horizon.items())},
            "averaged": self.averaged.to_dict(),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def to_text(self) -> str:
        """Aligned plain-text table, one row per horizon plus the averaged row."""
        header = f"{'horizon':>8} {'MAE':>12} {'MAPE%':>12} {'RMSE':>12} {'n_eval':>10} {'n_masked':>10}"
        lines = [header]

        def fmt(label: str, m: HorizonMetrics) -> str:
            mape = f"{m.mape_pct:12.4f}" if not math.isnan(m.mape_pct) else f"{'n/a':>12}"
            return (
                f"{label:>8} {m.mae:12.4f} {mape} {m.rmse:12.4f} "
                f"{m.n_evaluated:10d} {m.n_masked:10d}"
            )

        for k in sorted(self.per_horizon):
            lines.append(fmt(str(k), self.per_horizon[k]))
        lines.append(fmt("avg", self.averaged))
        return "\n".join(lines)
