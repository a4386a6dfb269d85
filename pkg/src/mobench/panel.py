"""Panel (time x location x channel) dataset model, canonical on-disk format, splits.

A dataset lives in a directory holding ``meta.json`` (the metadata fields below,
snake_case keys) and ``values.f32`` (raw little-endian IEEE-754 float32, row-major
[T, N, C], no header). Values are kept as stored -- including any missing-value
sentinel -- and observability is tracked in a separate boolean mask.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

META_FILENAME = "meta.json"
VALUES_FILENAME = "values.f32"


@dataclass(frozen=True)
class DatasetMeta:
    """Immutable description of a panel dataset.

    ``start_time`` is UTC seconds since the epoch for timestep 0;
    ``timezone_offset_s`` shifts it to the dataset's local wall clock.
    ``holidays`` are ISO-8601 dates on the local calendar.
    """

    name: str
    start_time: int
    granularity_s: int
    num_timesteps: int
    num_locations: int
    num_channels: int
    channel_names: tuple[str, ...]
    missing_sentinel: float | None = None
    holidays: tuple[str, ...] = ()
    timezone_offset_s: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "holidays", tuple(self.holidays))
        if self.granularity_s < 1 or 86400 % self.granularity_s != 0:
            raise ValueError(
                f"granularity_s must be a positive divisor of 86400, got {self.granularity_s}"
            )
        # num_timesteps == 0 is legal so that splits with an empty part stay representable
        if self.num_timesteps < 0:
            raise ValueError(f"num_timesteps must be >= 0, got {self.num_timesteps}")
        if self.num_locations < 1 or self.num_channels < 1:
            raise ValueError("num_locations and num_channels must be >= 1")
        if len(self.channel_names) != self.num_channels:
            raise ValueError(
                f"channel_names has {len(self.channel_names)} entries, expected {self.num_channels}"
            )
        if len(set(self.holidays)) != len(self.holidays):
            raise ValueError("holidays must be unique dates")
        for day in self.holidays:
            date.fromisoformat(day)
        if self.missing_sentinel is not None and not math.isfinite(self.missing_sentinel):
            raise ValueError("missing_sentinel must be finite")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.num_timesteps, self.num_locations, self.num_channels)

    @property
    def slots_per_day(self) -> int:
        return 86400 // self.granularity_s

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "start_time": int(self.start_time),
            "granularity_s": int(self.granularity_s),
            "num_timesteps": int(self.num_timesteps),
            "num_locations": int(self.num_locations),
            "num_channels": int(self.num_channels),
            "channel_names": list(self.channel_names),
            "missing_sentinel": self.missing_sentinel,
            "holidays": list(self.holidays),
            "timezone_offset_s": int(self.timezone_offset_s),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DatasetMeta":
        try:
            sentinel = payload["missing_sentinel"]
            return cls(
                name=payload["name"],
                start_time=int(payload["start_time"]),
                granularity_s=int(payload["granularity_s"]),
                num_timesteps=int(payload["num_timesteps"]),
                num_locations=int(payload["num_locations"]),
                num_channels=int(payload["num_channels"]),
                channel_names=tuple(payload["channel_names"]),
                missing_sentinel=None if sentinel is None else float(sentinel),
                holidays=tuple(payload["holidays"]),
                timezone_offset_s=int(payload["timezone_offset_s"]),
            )
        except KeyError as exc:
            raise ValueError(f"meta is missing required field {exc.args[0]!r}") from exc
        except TypeError as exc:
            raise ValueError(f"meta field has the wrong type: {exc}") from exc


class PanelDataset:
    """[T, N, C] float64 value tensor plus a boolean observed-mask.

    The mask is false wherever a value equals the declared missing sentinel or is
    non-finite; an explicit mask passed by the caller can only remove entries, never
    mark a sentinel/non-finite cell as observed. Instances are immutable and safe to
    share across threads.
    """

    def __init__(self, meta: DatasetMeta, values: np.ndarray, mask: np.ndarray | None = None):
        values = np.array(values, dtype=np.float64)
        if values.shape != meta.shape:
            raise ValueError(f"values shape {values.shape} does not match meta shape {meta.shape}")
        observed = np.isfinite(values)
        if meta.missing_sentinel is not None:
            observed &= values != meta.missing_sentinel
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != meta.shape:
                raise ValueError(f"mask shape {mask.shape} does not match meta shape {meta.shape}")
            observed &= mask
        values.setflags(write=False)
        observed.setflags(write=False)
        self.meta = meta
        self.values = values
        self.mask = observed

    def __len__(self) -> int:
        return self.meta.num_timesteps

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.meta.shape

    def observed_fraction(self) -> float:
        total = self.values.size
        return float(self.mask.sum()) / total if total else 1.0


def load_dataset(path: str | Path) -> PanelDataset:
    """Read a canonical dataset directory (``meta.json`` + ``values.f32``)."""
    root = Path(path)
    meta_path = root / META_FILENAME
    values_path = root / VALUES_FILENAME
    if not meta_path.is_file():
        raise FileNotFoundError(f"missing {meta_path}")
    if not values_path.is_file():
        raise FileNotFoundError(f"missing {values_path}")
    try:
        payload = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON in {meta_path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError(f"{meta_path} must hold a JSON object")
    meta = DatasetMeta.from_dict(payload)

    raw = np.fromfile(values_path, dtype="<f4")
    expected = meta.num_timesteps * meta.num_locations * meta.num_channels
    if raw.size != expected:
        raise ValueError(
            f"{values_path}: expected {expected} float32 values "
            f"(T*N*C = {meta.num_timesteps}*{meta.num_locations}*{meta.num_channels}), found {raw.size}"
        )
    raw = raw.reshape(meta.shape)
    if meta.missing_sentinel is None:
        bad = ~np.isfinite(raw)
        if bad.any():
            t, n, c = (int(i) for i in np.argwhere(bad)[0])
            raise ValueError(
                f"{values_path}: non-finite value at [t={t}, n={n}, c={c}] "
                "and no missing_sentinel declared"
            )
    return PanelDataset(meta, raw)


def save_dataset(ds: PanelDataset, path: str | Path) -> None:
    """Write the canonical directory format; round-trips bit-identically as float32."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / META_FILENAME).write_text(
        json.dumps(ds.meta.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    ds.values.astype("<f4").tofile(root / VALUES_FILENAME)


def time_slice(ds: PanelDataset, start: int, stop: int) -> PanelDataset:
    """Contiguous sub-panel [start, stop) with start_time shifted accordingly."""
    if not 0 <= start <= stop <= len(ds):
        raise ValueError(f"invalid slice [{start}, {stop}) for T={len(ds)}")
    meta = replace(
        ds.meta,
        start_time=ds.meta.start_time + start * ds.meta.granularity_s,
        num_timesteps=stop - start,
    )
    return PanelDataset(meta, ds.values[start:stop], ds.mask[start:stop])


def select_channels(ds: PanelDataset, channels: tuple[int, ...]) -> PanelDataset:
    """Restrict a dataset to the given channel indices (order preserved)."""
    names = tuple(ds.meta.channel_names[c] for c in channels)
    meta = replace(ds.meta, num_channels=len(channels), channel_names=names)
    idx = list(channels)
    return PanelDataset(meta, ds.values[:, :, idx], ds.mask[:, :, idx])


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test split rule: either fractions of T or whole day counts."""

    kind: str  # "fractions" | "days"
    train: float | int
    val: float | int
    test: float | int

    def __post_init__(self) -> None:
        if self.kind not in ("fractions", "days"):
            raise ValueError(f"kind must be 'fractions' or 'days', got {self.kind!r}")
        if self.train <= 0 or self.test <= 0 or self.val < 0:
            raise ValueError("train and test must be positive; val may be 0")
        if self.kind == "fractions":
            if self.train + self.val + self.test > 1.0 + 1e-9:
                raise ValueError("fractions must sum to at most 1")
        else:
            for part in (self.train, self.val, self.test):
                if float(part) != int(part):
                    raise ValueError(f"day counts must be whole numbers, got {part}")

    def boundaries(self, num_timesteps: int, slots_per_day: int) -> tuple[int, int, int]:
        """Cumulative end indices (train, val, test) within a T-step dataset."""
        if self.kind == "fractions":
            cum = (self.train, self.train + self.val, self.train + self.val + self.test)
            # slack scales with T so float fuzz in sums like 0.7+0.1+0.2 never
            # floors a boundary one step short
            slack = 1e-9 + num_timesteps * 1e-12
            b = tuple(int(math.floor(num_timesteps * f + slack)) for f in cum)
            return (b[0], b[1], min(b[2], num_timesteps))
        b1 = int(self.train) * slots_per_day
        b2 = b1 + int(self.val) * slots_per_day
        b3 = b2 + int(self.test) * slots_per_day
        if b3 > num_timesteps:
            raise ValueError(
                f"split needs {b3} timesteps ({self.train}+{self.val}+{self.test} days "
                f"at {slots_per_day} slots/day) but dataset has {num_timesteps}"
            )
        return (b1, b2, b3)


def split(ds: PanelDataset, spec: SplitSpec) -> tuple[PanelDataset, PanelDataset, PanelDataset]:
    """Split into contiguous, ordered (train, val, test) covering a prefix of the data."""
    b1, b2, b3 = spec.boundaries(len(ds), ds.meta.slots_per_day)
    return time_slice(ds, 0, b1), time_slice(ds, b1, b2), time_slice(ds, b2, b3)


def export_csv(ds: PanelDataset, path: str | Path) -> None:
    """Optional ``values.csv`` export: timestamp,location,channel,value rows.

    Timestamps are RFC-3339 in the dataset's fixed local offset. Values are written
    as stored (sentinels included), so the export is as lossless as text allows.
    """
    tz = timezone(timedelta(seconds=ds.meta.timezone_offset_s))
    T, N, C = ds.shape
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "location", "channel", "value"])
        for t in range(T):
            stamp = datetime.fromtimestamp(
                ds.meta.start_time + t * ds.meta.granularity_s, tz=tz
            ).isoformat()
            for n in range(N):
                for c in range(C):
                    writer.writerow([stamp, n, c, repr(float(ds.values[t, n, c]))])
