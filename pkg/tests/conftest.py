from __future__ import annotations

from datetime import datetime, timezone

import numpy as np

from mobench import DatasetMeta, PanelDataset

MONDAY = "1970-01-05"  # epoch day 4


def iso_epoch(iso_day: str) -> int:
    return int(datetime.fromisoformat(iso_day).replace(tzinfo=timezone.utc).timestamp())


def make_meta(
    T: int,
    N: int = 2,
    C: int = 1,
    granularity_s: int = 3600,
    start: str = MONDAY,
    holidays: tuple[str, ...] = (),
    sentinel: float | None = None,
    tz_offset: int = 0,
    name: str = "synthetic",
) -> DatasetMeta:
    return DatasetMeta(
        name=name,
        start_time=iso_epoch(start),
        granularity_s=granularity_s,
        num_timesteps=T,
        num_locations=N,
        num_channels=C,
        channel_names=tuple(f"ch{i}" for i in range(C)),
        missing_sentinel=sentinel,
        holidays=holidays,
        timezone_offset_s=tz_offset,
    )


def slots_per_week(granularity_s: int) -> int:
    return 7 * (86400 // granularity_s)


def periodic_panel(
    weeks: int,
    N: int = 3,
    C: int = 1,
    granularity_s: int = 3600,
    seed: int = 0,
    start: str = MONDAY,
) -> tuple[PanelDataset, np.ndarray]:
    """Strictly weekly-periodic panel: a random template tiled `weeks` times."""
    spw = slots_per_week(granularity_s)
    rng = np.random.default_rng(seed)
    template = rng.uniform(10.0, 50.0, size=(spw, N, C))
    values = np.tile(template, (weeks, 1, 1))
    meta = make_meta(weeks * spw, N, C, granularity_s, start=start)
    return PanelDataset(meta, values), template


def random_panel(
    T: int,
    N: int = 3,
    C: int = 1,
    granularity_s: int = 3600,
    seed: int = 0,
    missing_frac: float = 0.0,
    start: str = MONDAY,
) -> PanelDataset:
    rng = np.random.default_rng(seed)
    values = rng.uniform(5.0, 80.0, size=(T, N, C))
    mask = None
    if missing_frac > 0:
        mask = rng.random((T, N, C)) >= missing_frac
    meta = make_meta(T, N, C, granularity_s, start=start)
    return PanelDataset(meta, values, mask)


def ar1_residual_panel(
    weeks: int,
    phi: float,
    sigma: float,
    N: int = 32,
    granularity_s: int = 3600,
    seed: int = 7,
    start: str = MONDAY,
) -> tuple[PanelDataset, np.ndarray, np.ndarray]:
    """Weekly template plus a per-series AR(1) residual process."""
    spw = slots_per_week(granularity_s)
    T = weeks * spw
    rng = np.random.default_rng(seed)
    template = rng.uniform(20.0, 60.0, size=(spw, N, 1))
    eps = rng.normal(0.0, sigma, size=(T, N, 1))
    resid = np.zeros((T, N, 1))
    resid[0] = eps[0] / np.sqrt(1.0 - phi * phi)  # start at stationarity
    for t in range(1, T):
        resid[t] = phi * resid[t - 1] + eps[t]
    values = np.tile(template, (weeks, 1, 1)) + resid
    meta = make_meta(T, N, 1, granularity_s, start=start)
    return PanelDataset(meta, values), template, resid
