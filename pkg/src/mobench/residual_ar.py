"""Order-h linear autoregression on seasonal residuals, single- and multi-horizon.

Fitting is ordinary least squares with an optional (tiny, default) ridge term for
rank-deficiency protection, solved through an incremental thin-QR so arbitrarily
long panels never materialize the full design matrix. Multi-horizon forecasts come
either from one model per horizon ("direct") or from rolling a one-step model
forward ("recursive"); the regression is shared across all series ("pooled") or
fitted independently per location ("per_location").
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .panel import PanelDataset
from .seasonal import DEFAULT_S_FLOOR, SeasonalProfile, reconstruct, residualize

STRATEGIES = ("direct", "recursive")
SCOPES = ("pooled", "per_location")

# split long fits into row blocks of roughly this many design rows
_CHUNK_TARGET_ROWS = 1_500_000


@dataclass(frozen=True)
class RegressionConfig:
    """Lag order, horizons and estimator knobs for the residual regression."""

    h: int = 12
    horizons: tuple[int, ...] = (1,)
    strategy: str = "direct"
    scope: str = "pooled"
    ridge: float = 1e-8
    include_intercept: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizons", tuple(int(k) for k in self.horizons))
        if self.h < 1:
            raise ValueError(f"lag order h must be >= 1, got {self.h}")
        if not self.horizons:
            raise ValueError("horizons must be non-empty")
        if any(k < 1 for k in self.horizons):
            raise ValueError(f"horizons must be >= 1, got {self.horizons}")
        if list(self.horizons) != sorted(set(self.horizons)):
            raise ValueError(f"horizons must be strictly ascending, got {self.horizons}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}, got {self.scope!r}")
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")

    @property
    def num_params(self) -> int:
        return self.h + (1 if self.include_intercept else 0)

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "horizons": list(self.horizons),
            "strategy": self.strategy,
            "scope": self.scope,
            "ridge": self.ridge,
            "include_intercept": self.include_intercept,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RegressionConfig":
        return cls(
            h=payload["h"],
            horizons=tuple(payload["horizons"]),
            strategy=payload["strategy"],
            scope=payload["scope"],
            ridge=payload["ridge"],
            include_intercept=payload["include_intercept"],
        )


@dataclass
class ResidualRegressionModel:
    """Fitted weights per horizon: array [groups, h(+1)], lag coefficients most-recent
    first, intercept (when present) last. groups == 1 for pooled scope, N otherwise."""

    config: RegressionConfig
    weights: dict[int, np.ndarray]
    fit_stats: dict[int, dict] = field(default_factory=dict)
    num_locations: int = 1
    num_channels: int = 1

    def __post_init__(self) -> None:
        p = self.config.num_params
        for k, w in self.weights.items():
            if w.ndim != 2 or w.shape[1] != p:
                raise ValueError(f"weights for horizon {k} must be [groups, {p}], got {w.shape}")
            if not np.isfinite(w).all():
                raise ValueError(f"weights for horizon {k} contain non-finite entries")
            w.setflags(write=False)  # models are shared read-only once fitted

    def to_json(self, indent: int | None = 2) -> str:
        payload = {
            "config": self.config.to_dict(),
            "num_locations": self.num_locations,
            "num_channels": self.num_channels,
            "weights": {str(k): w.tolist() for k, w in sorted(self.weights.items())},
            "fit_stats": {str(k): v for k, v in sorted(self.fit_stats.items())},
        }
        return json.dumps(payload, indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "ResidualRegressionModel":
        payload = json.loads(text)
        return cls(
            config=RegressionConfig.from_dict(payload["config"]),
            weights={int(k): np.asarray(w, dtype=np.float64) for k, w in payload["weights"].items()},
            fit_stats={int(k): v for k, v in payload.get("fit_stats", {}).items()},
            num_locations=payload.get("num_locations", 1),
            num_channels=payload.get("num_channels", 1),
        )


class _QRAccumulator:
    """Incremental thin-QR over stacked row blocks of a least-squares system."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.rows = 0
        self._r = np.zeros((0, ncols))
        self._z = np.zeros(0)

    def update(self, block: np.ndarray, rhs: np.ndarray) -> None:
        if block.shape[0] == 0:
            return
        self.rows += block.shape[0]
        stacked = np.vstack([self._r, block])
        q, self._r = np.linalg.qr(stacked, mode="reduced")
        self._z = q.T @ np.concatenate([self._z, rhs])

    def solve(self, ridge: float, n_penalized: int) -> np.ndarray:
        r, z = self._r, self._z
        if ridge > 0 and n_penalized > 0:
            aug = np.zeros((n_penalized, self.ncols))
            aug[:, :n_penalized] = np.sqrt(ridge) * np.eye(n_penalized)
            q, r = np.linalg.qr(np.vstack([self._r, aug]), mode="reduced")
            z = q.T @ np.concatenate([self._z, np.zeros(n_penalized)])
        if r.shape[0] < self.ncols:
            raise np.linalg.LinAlgError(
                f"system has effective rank < {self.ncols}; set ridge > 0 to regularize"
            )
        diag = np.abs(np.diag(r))
        tol = np.finfo(np.float64).eps * max(self.rows, self.ncols) * (diag.max() if diag.size else 0.0)
        if (diag <= tol).any():
            raise np.linalg.LinAlgError(
                "design matrix is rank deficient with ridge=0; set ridge > 0 to regularize"
            )
        return np.linalg.solve(r, z)


def _with_intercept(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def fit_ols(
    X: np.ndarray, y: np.ndarray, ridge: float = 0.0, include_intercept: bool = False
) -> np.ndarray:
    """Weights minimizing ||y - Xw||^2 + ridge*||w||^2 (intercept never penalized).

    Solved by Householder QR; matches a pseudo-inverse solve to ~1e-8 relative on
    well-conditioned systems. The intercept column, when requested, is appended
    last, so the result is [lag coefficients..., intercept].
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"incompatible shapes X{X.shape}, y{y.shape}")
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    n_data_cols = X.shape[1]
    p = n_data_cols + (1 if include_intercept else 0)
    if X.shape[0] < p:
        raise ValueError(f"need at least as many rows as columns: {X.shape[0]} rows < {p} columns")
    acc = _QRAccumulator(p)
    acc.update(_with_intercept(X) if include_intercept else X, y)
    return acc.solve(ridge=ridge, n_penalized=n_data_cols)


def _lag_design(
    res: np.ndarray, mask: np.ndarray, h: int, k: int
) -> tuple[np.ndarray, np.ndarray, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Rows for every (t, n, c) with observed target y'_t and observed lags
    y'_{t-k} .. y'_{t-k-h+1}; may be empty."""
    T = res.shape[0]
    n_targets = T - h - k + 1
    if n_targets <= 0:
        raise ValueError(f"need T > h + k - 1 = {h + k - 1} timesteps, got {T}")
    windows = sliding_window_view(res, h, axis=0)  # [T-h+1, N, C, h], window i = res[i:i+h]
    window_ok = sliding_window_view(mask, h, axis=0).all(axis=-1)
    valid = window_ok[:n_targets] & mask[h + k - 1 :]
    i_idx, n_idx, c_idx = np.nonzero(valid)
    X = windows[i_idx, n_idx, c_idx][:, ::-1]  # most-recent lag first
    t_idx = i_idx + h + k - 1
    y = res[t_idx, n_idx, c_idx]
    return X, y, (t_idx, n_idx, c_idx)


def build_lag_matrix(
    residuals: np.ndarray, mask: np.ndarray, h: int, k: int
) -> tuple[np.ndarray, np.ndarray, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Design matrix and targets for horizon ``k``; rows stacked in (t, n, c) order.

    Raises on an empty design (every candidate row lost a lag or target to the mask).
    """
    res = np.asarray(residuals, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    X, y, index = _lag_design(res, mask, h, k)
    if X.shape[0] == 0:
        raise ValueError(
            f"empty design: no (t, n, c) has {h} observed lags and an observed "
            f"target at horizon {k}"
        )
    return X, y, index


def _iter_design_chunks(
    res: np.ndarray, mask: np.ndarray, h: int, k: int
) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (X, y, location_index) blocks covering all valid rows, time-chunked."""
    T, N, C = res.shape
    block = max(1, _CHUNK_TARGET_ROWS // max(1, N * C))
    first_target = h + k - 1
    for start in range(first_target, T, block):
        stop = min(start + block, T)
        lo = start - first_target  # earliest lag needed for the first target in block
        X, y, (t_idx, n_idx, _c) = _lag_design(res[lo:stop], mask[lo:stop], h, k)
        if X.shape[0]:
            yield X, y, n_idx


def fit_halr(
    train_residuals: tuple[np.ndarray, np.ndarray], config: RegressionConfig
) -> ResidualRegressionModel:
    """Fit the residual autoregression on ``(residuals, mask)`` from the fit period.

    Direct strategy fits one regression per horizon; recursive fits only the
    one-step regression. Per-location scope fits each location on its own rows
    (channels pooled within the location).
    """
    res = np.asarray(train_residuals[0], dtype=np.float64)
    mask = np.asarray(train_residuals[1], dtype=bool)
    if res.ndim != 3 or res.shape != mask.shape:
        raise ValueError(f"residuals and mask must share a [T, N, C] shape, got {res.shape}")
    T, N, C = res.shape
    groups = N if config.scope == "per_location" else 1
    p = config.num_params
    fit_horizons = (1,) if config.strategy == "recursive" else config.horizons

    weights: dict[int, np.ndarray] = {}
    stats: dict[int, dict] = {}
    for k in fit_horizons:
        accs = [_QRAccumulator(p) for _ in range(groups)]
        for X, y, n_idx in _iter_design_chunks(res, mask, config.h, k):
            if config.include_intercept:
                X = _with_intercept(X)
            if groups == 1:
                accs[0].update(X, y)
            else:
                for g in np.unique(n_idx):
                    sel = n_idx == g
                    accs[g].update(X[sel], y[sel])
        total_rows = sum(acc.rows for acc in accs)
        if total_rows == 0:
            raise ValueError(
                f"empty design: no (t, n, c) has {config.h} observed lags and an "
                f"observed target at horizon {k}"
            )
        solved = []
        for g, acc in enumerate(accs):
            if acc.rows < p:
                raise ValueError(
                    f"horizon {k}: group {g} has {acc.rows} rows for {p} parameters"
                )
            solved.append(acc.solve(ridge=config.ridge, n_penalized=config.h))
        weights[k] = np.vstack(solved)
        stats[k] = {"rows": int(total_rows)}

    model = ResidualRegressionModel(
        config=config,
        weights=weights,
        fit_stats=stats,
        num_locations=N,
        num_channels=C,
    )
    for k in fit_horizons:
        stats[k]["in_sample_rmse"] = _in_sample_rmse(model, res, mask, k)
    return model


def _coef_views(w: np.ndarray, h: int, include_intercept: bool):
    """Per-lag coefficients broadcastable against [..., N, C] slices."""
    groups = w.shape[0]
    if groups == 1:
        coefs = [float(w[0, j]) for j in range(h)]
        intercept = float(w[0, h]) if include_intercept else 0.0
    else:
        coefs = [w[:, j].reshape(groups, 1) for j in range(h)]
        intercept = w[:, h].reshape(groups, 1) if include_intercept else 0.0
    return coefs, intercept


def _direct_span(
    res: np.ndarray,
    mask: np.ndarray,
    w: np.ndarray,
    config: RegressionConfig,
    k: int,
    lo: int,
    hi: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Predictions for targets [lo, hi) using true lags ending at t - k."""
    coefs, intercept = _coef_views(w, config.h, config.include_intercept)
    span = hi - lo
    _, N, C = res.shape
    acc = np.zeros((span, N, C))
    acc += intercept
    ok = np.ones((span, N, C), dtype=bool)
    for j in range(config.h):
        seg = slice(lo - k - j, hi - k - j)
        acc += coefs[j] * res[seg]
        ok &= mask[seg]
    return acc, ok


def _recursive_span(
    res: np.ndarray,
    mask: np.ndarray,
    w1: np.ndarray,
    config: RegressionConfig,
    k: int,
    lo: int,
    hi: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Roll the one-step model k times from every origin t - k in [lo-k, hi-k)."""
    coefs, intercept = _coef_views(w1, config.h, config.include_intercept)
    a, b = lo - k, hi - k  # origin range
    lags = [res[a - j : b - j] for j in range(config.h)]  # most recent first
    ok = np.ones_like(lags[0], dtype=bool)
    for j in range(config.h):
        ok &= mask[a - j : b - j]
    pred = lags[0]
    for _ in range(k):
        pred = sum(coefs[j] * lags[j] for j in range(config.h)) + intercept
        lags = [pred] + lags[:-1]
    return pred, ok


def predict(
    model: ResidualRegressionModel,
    history_residuals: tuple[np.ndarray, np.ndarray],
    horizons: tuple[int, ...] | None = None,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Residual-domain forecasts from the last h entries of a history block.

    ``history_residuals`` is ``(values, mask)`` of shape [L, N, C] ending at the
    forecast origin. Series whose last h lags are not all observed come back
    masked rather than raising.
    """
    values = np.asarray(history_residuals[0], dtype=np.float64)
    mask = np.asarray(history_residuals[1], dtype=bool)
    cfg = model.config
    horizons = cfg.horizons if horizons is None else tuple(horizons)
    L, N, C = values.shape
    if L < cfg.h:
        lag_stack = [np.zeros((N, C)) for _ in range(cfg.h)]
        ok = np.zeros((N, C), dtype=bool)
    else:
        lag_stack = [values[L - 1 - j] for j in range(cfg.h)]
        ok = mask[L - cfg.h :].all(axis=0)

    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    if cfg.strategy == "direct":
        for k in horizons:
            coefs, intercept = _coef_views(model.weights[k], cfg.h, cfg.include_intercept)
            yhat = sum(coefs[j] * lag_stack[j] for j in range(cfg.h)) + intercept
            out[k] = (np.where(ok, yhat, 0.0), ok.copy())
    else:
        coefs, intercept = _coef_views(model.weights[1], cfg.h, cfg.include_intercept)
        lags = list(lag_stack)
        for step in range(1, max(horizons) + 1):
            pred = sum(coefs[j] * lags[j] for j in range(cfg.h)) + intercept
            lags = [pred] + lags[:-1]
            if step in horizons:
                out[step] = (np.where(ok, pred, 0.0), ok.copy())
    return out


def _in_sample_rmse(
    model: ResidualRegressionModel, res: np.ndarray, mask: np.ndarray, k: int
) -> float:
    cfg = model.config
    lo = cfg.h + k - 1
    hi = res.shape[0]
    if lo >= hi:
        return float("nan")
    pred, ok = _direct_span(res, mask, model.weights[k], cfg, k, lo, hi)
    ok = ok & mask[lo:hi]
    if not ok.any():
        return float("nan")
    err = pred[ok] - res[lo:hi][ok]
    return float(np.sqrt(np.mean(err * err)))


@dataclass
class HorizonForecast:
    """Original-domain forecasts for one horizon, aligned to absolute timesteps."""

    horizon: int
    t_start: int  # absolute index of values[0]
    values: np.ndarray  # [n_targets, N, C]
    mask: np.ndarray  # predictable AND profile-defined

    @property
    def t_stop(self) -> int:
        return self.t_start + self.values.shape[0]


def forecast_halr(
    panel: PanelDataset,
    profile: SeasonalProfile,
    model: ResidualRegressionModel,
    eval_range: tuple[int, int],
    normalized: bool = False,
    s_floor: float = DEFAULT_S_FLOOR,
    seq2seq_window: int | None = None,
) -> dict[int, HorizonForecast]:
    """Rolling HA+LR forecasts over every admissible origin in ``eval_range``.

    Lags are true observed residuals (never model outputs, except inside a
    recursive rollout) and lag windows stay entirely inside the evaluation range,
    mirroring the usual split-then-window protocol. In seq2seq mode every origin
    must also fit ``seq2seq_window`` future steps inside the range, so all horizons
    share one window set.
    """
    t0, t1 = eval_range
    if not 0 <= t0 <= t1 <= len(panel):
        raise ValueError(f"eval_range {eval_range} invalid for T={len(panel)}")
    cfg = model.config
    res, rmask = residualize(panel, profile, normalized=normalized, s_floor=s_floor)

    out: dict[int, HorizonForecast] = {}
    for k in cfg.horizons:
        if seq2seq_window is not None:
            lo = t0 + cfg.h - 1 + k
            hi = t1 - seq2seq_window + k
        else:
            lo = t0 + cfg.h + k - 1
            hi = t1
        if lo >= hi:
            empty = np.zeros((0, panel.meta.num_locations, panel.meta.num_channels))
            out[k] = HorizonForecast(k, lo, empty, empty.astype(bool))
            continue
        if cfg.strategy == "direct":
            rpred, ok = _direct_span(res, rmask, model.weights[k], cfg, k, lo, hi)
        else:
            rpred, ok = _recursive_span(res, rmask, model.weights[1], cfg, k, lo, hi)
        yhat, defined = reconstruct(
            rpred, profile, panel.meta, np.arange(lo, hi), normalized=normalized, s_floor=s_floor
        )
        out[k] = HorizonForecast(k, lo, yhat, ok & defined)
    return out
