"""Weekly recurrent-pattern estimation and transforms between original and residual domains.

The profile stores, per (weekly slot, location, channel): the mean of all observed
training values falling on that slot, the population standard deviation, and the
sample count. Slots never observed in the fit data stay undefined (count 0, NaN
mean/std) and are masked out of any downstream forecast rather than imputed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .panel import DatasetMeta, PanelDataset
from .weekly import WeeklyIndex, weekly_slots

DEFAULT_S_FLOOR = 1e-3

PROFILE_VALUES_FILENAME = "profile.f32"
PROFILE_META_FILENAME = "profile.json"


@dataclass
class SeasonalProfile:
    """Per-(weekly slot, location, channel) mean / std / sample count."""

    mean: np.ndarray  # [slots_per_week, N, C], NaN where count == 0
    std: np.ndarray  # population std, NaN where count == 0
    count: np.ndarray  # int64
    granularity_s: int

    def __post_init__(self) -> None:
        if not (self.mean.shape == self.std.shape == self.count.shape):
            raise ValueError("mean, std and count must share one shape")
        expected = 7 * (86400 // self.granularity_s)
        if self.mean.shape[0] != expected:
            raise ValueError(
                f"profile has {self.mean.shape[0]} slots, expected {expected} "
                f"for granularity {self.granularity_s}s"
            )
        for arr in (self.mean, self.std, self.count):
            arr.setflags(write=False)  # profiles are shared read-only once built

    @property
    def slots_per_week(self) -> int:
        return self.mean.shape[0]

    @property
    def num_locations(self) -> int:
        return self.mean.shape[1]

    @property
    def num_channels(self) -> int:
        return self.mean.shape[2]

    @property
    def defined(self) -> np.ndarray:
        """Boolean [slots_per_week, N, C]: cells with at least one observation."""
        return self.count > 0


def _check_compatible(profile: SeasonalProfile, meta: DatasetMeta) -> None:
    if profile.granularity_s != meta.granularity_s:
        raise ValueError(
            f"profile granularity {profile.granularity_s}s does not match "
            f"dataset granularity {meta.granularity_s}s"
        )
    if (profile.num_locations, profile.num_channels) != (meta.num_locations, meta.num_channels):
        raise ValueError(
            f"profile shape (N={profile.num_locations}, C={profile.num_channels}) does not "
            f"match dataset (N={meta.num_locations}, C={meta.num_channels})"
        )


def fit_profile(fit_data: PanelDataset) -> SeasonalProfile:
    """Estimate the weekly pattern from all observed entries of ``fit_data``.

    The caller decides what goes in; the benchmark harness always concatenates the
    validation part onto the train part before fitting. Masked entries never
    contribute. Std is the population standard deviation, so single-sample cells
    get std 0 rather than NaN.
    """
    meta = fit_data.meta
    if len(fit_data) == 0:
        raise ValueError("cannot fit a profile on an empty dataset")
    widx = WeeklyIndex.from_granularity(meta.granularity_s)
    shape = (widx.slots_per_week, meta.num_locations, meta.num_channels)
    slots = weekly_slots(meta, np.arange(len(fit_data)))

    vals = np.where(fit_data.mask, fit_data.values, 0.0)
    total = np.zeros(shape)
    count = np.zeros(shape, dtype=np.int64)
    np.add.at(total, slots, vals)
    np.add.at(count, slots, fit_data.mask.astype(np.int64))
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = total / count

    # second pass over deviations: keeps the std of a constant slot at exactly 0,
    # which the one-pass sum-of-squares formula cannot guarantee
    with np.errstate(invalid="ignore"):
        dev = np.where(fit_data.mask, fit_data.values - mean[slots], 0.0)
    sq = np.zeros(shape)
    np.add.at(sq, slots, dev * dev)
    with np.errstate(invalid="ignore", divide="ignore"):
        std = np.sqrt(sq / count)
    return SeasonalProfile(mean=mean, std=std, count=count, granularity_s=meta.granularity_s)


def _scale(profile: SeasonalProfile, slots: np.ndarray, s_floor: float) -> np.ndarray:
    return np.maximum(profile.std[slots], s_floor)


def residualize(
    panel: PanelDataset,
    profile: SeasonalProfile,
    normalized: bool = False,
    s_floor: float = DEFAULT_S_FLOOR,
) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the profile: residual = y - a, or (y - a) / max(s, s_floor).

    Returns ``(residuals, mask)`` of the panel's shape. The mask is the panel's
    observed-mask restricted to slots the profile actually covers; masked cells are
    zeroed so downstream code never touches NaNs.
    """
    _check_compatible(profile, panel.meta)
    if s_floor <= 0:
        raise ValueError(f"s_floor must be > 0, got {s_floor}")
    slots = weekly_slots(panel.meta, np.arange(len(panel)))
    mask = panel.mask & profile.defined[slots]
    with np.errstate(invalid="ignore"):
        res = panel.values - profile.mean[slots]
        if normalized:
            res = res / _scale(profile, slots, s_floor)
    return np.where(mask, res, 0.0), mask


def reconstruct(
    residual_forecasts: np.ndarray,
    profile: SeasonalProfile,
    meta: DatasetMeta,
    timesteps: np.ndarray,
    normalized: bool = False,
    s_floor: float = DEFAULT_S_FLOOR,
) -> tuple[np.ndarray, np.ndarray]:
    """Map residual-domain forecasts back: y_hat = r + a, or r * max(s, s_floor) + a.

    Exact inverse of :func:`residualize` on unmasked cells because the same clamped
    scale is used both ways. ``timesteps`` are absolute indices aligned with axis 0
    of ``residual_forecasts``.
    """
    _check_compatible(profile, meta)
    if s_floor <= 0:
        raise ValueError(f"s_floor must be > 0, got {s_floor}")
    timesteps = np.asarray(timesteps, dtype=np.int64)
    res = np.asarray(residual_forecasts, dtype=np.float64)
    if res.shape != (timesteps.size, profile.num_locations, profile.num_channels):
        raise ValueError(
            f"residual forecasts shape {res.shape} does not match "
            f"({timesteps.size}, {profile.num_locations}, {profile.num_channels})"
        )
    slots = weekly_slots(meta, timesteps)
    mask = profile.defined[slots]
    with np.errstate(invalid="ignore"):
        if normalized:
            out = res * _scale(profile, slots, s_floor) + profile.mean[slots]
        else:
            out = res + profile.mean[slots]
    return np.where(mask, out, 0.0), mask


def ha_forecast(
    profile: SeasonalProfile, meta: DatasetMeta, timesteps: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Historical-average forecast: the profile mean at each timestep's weekly slot.

    Identical for every horizon by construction. Cells whose slot was never observed
    in the fit data come back masked.
    """
    _check_compatible(profile, meta)
    slots = weekly_slots(meta, np.asarray(timesteps, dtype=np.int64))
    mask = profile.defined[slots]
    return np.where(mask, profile.mean[slots], 0.0), mask


def save_profile(profile: SeasonalProfile, path: str | Path) -> None:
    """Write ``profile.f32`` (mean, std, count stacked, float32) + ``profile.json``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    stacked = np.concatenate(
        [
            profile.mean.astype("<f4").ravel(),
            profile.std.astype("<f4").ravel(),
            profile.count.astype("<f4").ravel(),
        ]
    )
    stacked.tofile(root / PROFILE_VALUES_FILENAME)
    sidecar = {
        "slots_per_week": profile.slots_per_week,
        "num_locations": profile.num_locations,
        "num_channels": profile.num_channels,
        "granularity_s": profile.granularity_s,
    }
    (root / PROFILE_META_FILENAME).write_text(json.dumps(sidecar, indent=2) + "\n", "utf-8")


def load_profile(path: str | Path) -> SeasonalProfile:
    root = Path(path)
    sidecar = json.loads((root / PROFILE_META_FILENAME).read_text("utf-8"))
    shape = (sidecar["slots_per_week"], sidecar["num_locations"], sidecar["num_channels"])
    per_block = shape[0] * shape[1] * shape[2]
    raw = np.fromfile(root / PROFILE_VALUES_FILENAME, dtype="<f4")
    if raw.size != 3 * per_block:
        raise ValueError(
            f"profile.f32 holds {raw.size} floats, expected {3 * per_block} "
            "(mean, std, count blocks)"
        )
    mean, std, count = (
        raw[:per_block].reshape(shape).astype(np.float64),
        raw[per_block : 2 * per_block].reshape(shape).astype(np.float64),
        np.rint(raw[2 * per_block :].reshape(shape)).astype(np.int64),
    )
    return SeasonalProfile(mean, std, count, granularity_s=sidecar["granularity_s"])
