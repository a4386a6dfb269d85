"""Weekly slot arithmetic: absolute timesteps -> (day-of-week, time-of-day) cells.

Days of week are encoded 0 (Monday) .. 6 (Sunday). Dates listed as holidays keep
their time-of-day but are remapped to Sunday's day-of-week. Timezones are fixed
offsets; no DST transitions are modeled.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .panel import DatasetMeta

_EPOCH_ORDINAL = date(1970, 1, 1).toordinal()
_EPOCH_WEEKDAY = 3  # 1970-01-01 was a Thursday


@dataclass(frozen=True)
class WeeklyIndex:
    slots_per_day: int
    slots_per_week: int

    @classmethod
    def from_granularity(cls, granularity_s: int) -> "WeeklyIndex":
        if granularity_s < 1 or 86400 % granularity_s != 0:
            raise ValueError(f"granularity_s must divide 86400, got {granularity_s}")
        spd = 86400 // granularity_s
        return cls(slots_per_day=spd, slots_per_week=7 * spd)


def holiday_daynums(meta: DatasetMeta) -> np.ndarray:
    """Holiday dates as whole days since the epoch, on the dataset's local calendar."""
    nums = sorted(date.fromisoformat(d).toordinal() - _EPOCH_ORDINAL for d in meta.holidays)
    return np.asarray(nums, dtype=np.int64)


def weekly_slots(meta: DatasetMeta, timesteps: np.ndarray) -> np.ndarray:
    """Vectorized weekly slot in [0, 7*slots_per_day) for absolute timestep indices."""
    t = np.asarray(timesteps, dtype=np.int64)
    if t.size and (t.min() < 0 or t.max() >= meta.num_timesteps):
        raise ValueError(
            f"timesteps must lie in [0, {meta.num_timesteps}), got range "
            f"[{t.min()}, {t.max()}]"
        )
    local = meta.start_time + meta.timezone_offset_s + t * meta.granularity_s
    days = local // 86400
    dow = (days + _EPOCH_WEEKDAY) % 7
    holidays = holiday_daynums(meta)
    if holidays.size:
        dow = np.where(np.isin(days, holidays), 6, dow)
    slot_of_day = (local % 86400) // meta.granularity_s
    return dow * meta.slots_per_day + slot_of_day


def weekly_slot(timestep: int, meta: DatasetMeta) -> int:
    """Weekly slot of a single timestep (holiday dates count as Sundays)."""
    return int(weekly_slots(meta, np.asarray([timestep]))[0])
