"""Seasonal-baseline forecasting for panel time series.

Weekly historical-average profiles, a linear autoregression on their residuals,
masked evaluation metrics, and a registry of reproducible benchmark setups.
"""

from .bench import (
    HA,
    HALR,
    BenchmarkSpec,
    RunOptions,
    RunResult,
    benchmark_ids,
    emit_results,
    get_spec,
    registry,
    run_benchmark,
    run_many,
)
from .metrics import EvalReport, HorizonMetrics, aggregate_horizons, evaluate
from .panel import (
    DatasetMeta,
    PanelDataset,
    SplitSpec,
    export_csv,
    load_dataset,
    save_dataset,
    select_channels,
    split,
    time_slice,
)
from .residual_ar import (
    HorizonForecast,
    RegressionConfig,
    ResidualRegressionModel,
    build_lag_matrix,
    fit_halr,
    fit_ols,
    forecast_halr,
    predict,
)
from .seasonal import (
    SeasonalProfile,
    fit_profile,
    ha_forecast,
    load_profile,
    reconstruct,
    residualize,
    save_profile,
)
from .weekly import WeeklyIndex, weekly_slot, weekly_slots

__version__ = "0.1.0"

__all__ = [
    "HA",
    "HALR",
    "BenchmarkSpec",
    "DatasetMeta",
    "EvalReport",
    "HorizonForecast",
    "HorizonMetrics",
    "PanelDataset",
    "RegressionConfig",
    "ResidualRegressionModel",
    "RunOptions",
    "RunResult",
    "SeasonalProfile",
    "SplitSpec",
    "WeeklyIndex",
    "aggregate_horizons",
    "benchmark_ids",
    "build_lag_matrix",
    "emit_results",
    "evaluate",
    "export_csv",
    "fit_halr",
    "fit_ols",
    "fit_profile",
    "forecast_halr",
    "get_spec",
    "ha_forecast",
    "load_dataset",
    "load_profile",
    "predict",
    "reconstruct",
    "registry",
    "residualize",
    "run_benchmark",
    "run_many",
    "save_dataset",
    "save_profile",
    "select_channels",
    "split",
    "time_slice",
    "weekly_slot",
    "weekly_slots",
]
