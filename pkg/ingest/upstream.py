"""Readers for the upstream dataset artifacts and the per-benchmark converter specs.

Each spec records where the artifact comes from (converters never download), how to
read it, and the calendar facts the canonical format needs. Values are cast to
float32 and must survive the trip losslessly; anything surprising aborts with an
expected-vs-found message rather than guessing.
"""

from __future__ import annotations

import json
import pickle
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np

HOLIDAY_DIR = Path(__file__).resolve().parent / "holidays"

READERS = ("csv_matrix", "npz", "hdf5_pandas", "pickle_frame")


class ConversionError(RuntimeError):
    """Upstream artifact did not match the converter's expectations."""


@dataclass(frozen=True)
class ConverterSpec:
    benchmark_id: str
    source_hint: str  # repo + filename to fetch by hand
    reader: str
    granularity_s: int
    start_date: str  # local midnight, used when the artifact carries no timestamps
    channel_names: tuple[str, ...]
    expected_locations: int | None = None
    expected_timesteps: int | None = None  # warn-only; trimmed sources vary
    missing_sentinel: float | None = None
    npz_key: str | None = None
    # for artifacts covering more than the benchmark window: (series start, keep start, keep days)
    window: tuple[str, str, int] | None = None


def converter_specs() -> list[ConverterSpec]:
    return [
        ConverterSpec(
            benchmark_id="pemsd7m",
            source_hint="https://github.com/VeritasYin/STGCN_IJCAI-18 - V_228.csv (PeMSD7_V_228.csv)",
            reader="csv_matrix",
            granularity_s=300,
            start_date="2012-05-01",
            channel_names=("speed_mph",),
            expected_locations=228,
            expected_timesteps=12672,  # 44 weekday-days x 288
        ),
        ConverterSpec(
            benchmark_id="urban1",
            source_hint="https://github.com/snu-adsl/DDP-GCN - urban1 speed matrix",
            reader="csv_matrix",
            granularity_s=300,
            start_date="2018-04-01",
            channel_names=("speed",),
            expected_locations=304,
            expected_timesteps=8640,  # 30 days x 288
        ),
        ConverterSpec(
            benchmark_id="nyc-citibike-pickdrop",
            source_hint="https://github.com/Essaim/CGCDemandPrediction - NYC bike pickup/dropoff tensor",
            reader="npz",
            granularity_s=1800,
            start_date="2016-04-01",
            channel_names=("pickups", "dropoffs"),
            expected_timesteps=4368,  # 91 days x 48
        ),
        ConverterSpec(
            benchmark_id="pemsd4",
            source_hint="https://github.com/jeongwhanchoi/STG-NCDE - PEMS04.npz",
            reader="npz",
            granularity_s=300,
            start_date="2018-01-01",
            channel_names=("flow", "occupancy", "speed"),
            expected_locations=307,
            expected_timesteps=16992,  # 59 days x 288
            npz_key="data",
        ),
        ConverterSpec(
            benchmark_id="sz-taxi",
            source_hint="https://github.com/lehaifeng/T-GCN - data/sz_speed.csv",
            reader="csv_matrix",
            granularity_s=900,
            start_date="2015-01-01",
            channel_names=("speed",),
            expected_locations=156,
            expected_timesteps=2976,  # 31 days x 96
        ),
        ConverterSpec(
            benchmark_id="metr-la",
            source_hint="https://github.com/liyaguang/DCRNN - metr-la.h5",
            reader="hdf5_pandas",
            granularity_s=300,
            start_date="2012-03-01",
            channel_names=("speed_mph",),
            expected_locations=207,
            expected_timesteps=34272,
            missing_sentinel=0.0,
        ),
        ConverterSpec(
            benchmark_id="pems-bay",
            source_hint="https://github.com/liyaguang/DCRNN - pems-bay.h5",
            reader="hdf5_pandas",
            granularity_s=300,
            start_date="2017-01-01",
            channel_names=("speed_mph",),
            expected_locations=325,
            expected_timesteps=52116,
            missing_sentinel=0.0,
        ),
        ConverterSpec(
            benchmark_id="nyc-bike-inout",
            source_hint="https://github.com/FIBLAB/3D-DGCN - NYC bike in/out flow tensor",
            reader="npz",
            granularity_s=3600,
            start_date="2017-07-01",
            channel_names=("inflow", "outflow"),
            expected_timesteps=2208,  # 92 days x 24
        ),
        ConverterSpec(
            benchmark_id="seattle-loop",
            source_hint="https://github.com/zhiyongc/Seattle-Loop-Data - speed_matrix_2015 pickle",
            reader="pickle_frame",
            granularity_s=300,
            start_date="2015-11-01",
            channel_names=("speed_mph",),
            expected_locations=323,
            expected_timesteps=17568,  # 61 days x 288
            window=("2015-01-01", "2015-11-01", 61),
        ),
    ]


def get_converter_spec(benchmark_id: str) -> ConverterSpec:
    for spec in converter_specs():
        if spec.benchmark_id == benchmark_id:
            return spec
    known = ", ".join(s.benchmark_id for s in converter_specs())
    raise ConversionError(f"unknown benchmark id {benchmark_id!r}; known: {known}")


def load_holidays(benchmark_id: str) -> list[str]:
    path = HOLIDAY_DIR / f"{benchmark_id}.json"
    if not path.is_file():
        return []
    days = json.loads(path.read_text("utf-8"))
    if not isinstance(days, list):
        raise ConversionError(f"{path}: holiday file must hold a JSON list of ISO dates")
    for day in days:
        date.fromisoformat(day)
    return days


# --------------------------------------------------------------------- readers


def _read_csv_matrix(path: Path, spec: ConverterSpec):
    import pandas as pd

    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    tokens = [tok for tok in first.strip().split(",") if tok != ""]
    try:
        [float(tok) for tok in tokens]
        skiprows = 0
    except ValueError:
        skiprows = 1
    frame = pd.read_csv(path, header=None, skiprows=skiprows, low_memory=False)
    return frame.to_numpy(), None


def _read_npz(path: Path, spec: ConverterSpec):
    bundle = np.load(path, allow_pickle=False)
    if isinstance(bundle, np.ndarray):
        return bundle, None
    keys = list(bundle.keys())
    key = spec.npz_key
    if key is None:
        if "data" in keys:
            key = "data"
        elif len(keys) == 1:
            key = keys[0]
        else:
            raise ConversionError(f"{path}: pick one of the archive keys {keys} in the spec")
    if key not in keys:
        raise ConversionError(f"{path}: expected key {key!r}, found {keys}")
    return bundle[key], None


def _read_hdf5_pandas(path: Path, spec: ConverterSpec):
    import h5py

    with h5py.File(path, "r") as fh:
        group = None
        for name in fh:
            if isinstance(fh[name], h5py.Group) and "block0_values" in fh[name]:
                group = fh[name]
                break
        if group is None:
            raise ConversionError(
                f"{path}: no pandas fixed-format group with block0_values; "
                f"top-level keys: {list(fh)}"
            )
        values = group["block0_values"][...]
        timestamps = None
        if "axis1" in group:
            axis1 = group["axis1"][...]
            if np.issubdtype(axis1.dtype, np.integer):
                timestamps = axis1.astype(np.int64)
    return values, timestamps


def _read_pickle_frame(path: Path, spec: ConverterSpec):
    import pandas as pd

    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if isinstance(payload, pd.DataFrame):
        timestamps = None
        if isinstance(payload.index, pd.DatetimeIndex):
            timestamps = payload.index.asi8
        return payload.to_numpy(), timestamps
    if isinstance(payload, np.ndarray):
        return payload, None
    if isinstance(payload, dict):
        for key in ("data", "values", "speed"):
            if key in payload:
                return np.asarray(payload[key]), None
        arrays = {k: v for k, v in payload.items() if isinstance(v, np.ndarray)}
        if len(arrays) == 1:
            return next(iter(arrays.values())), None
        raise ConversionError(f"{path}: ambiguous pickle dict with keys {sorted(payload)}")
    raise ConversionError(f"{path}: unsupported pickle payload of type {type(payload).__name__}")


_READER_FNS = {
    "csv_matrix": _read_csv_matrix,
    "npz": _read_npz,
    "hdf5_pandas": _read_hdf5_pandas,
    "pickle_frame": _read_pickle_frame,
}


def read_upstream(spec: ConverterSpec, src_path: str | Path):
    """Returns (raw array, optional int64 ns timestamps) without reshaping."""
    path = Path(src_path)
    if not path.is_file():
        raise ConversionError(
            f"upstream artifact not found: {path}\nfetch it manually from {spec.source_hint}"
        )
    raw, timestamps = _READER_FNS[spec.reader](path, spec)
    return np.asarray(raw), timestamps


# ------------------------------------------------------- shaping and calendar


def to_time_major(arr: np.ndarray, spec: ConverterSpec, notes: list[str]) -> np.ndarray:
    """Normalize an upstream array to [T, N, C] per the spec's channel layout."""
    C = len(spec.channel_names)
    if arr.ndim == 2:
        if C != 1:
            raise ConversionError(
                f"expected {C} channels but the artifact is 2-D with shape {arr.shape}"
            )
        if (
            spec.expected_locations is not None
            and arr.shape[1] != spec.expected_locations
            and arr.shape[0] == spec.expected_locations
        ):
            notes.append(f"transposed [N, T] input {arr.shape} to time-major")
            arr = arr.T
        arr = arr[:, :, None]
    elif arr.ndim == 3:
        if arr.shape[2] == C:
            pass
        elif arr.shape[0] == C:
            notes.append(f"moved leading channel axis of {arr.shape} to the end")
            arr = np.moveaxis(arr, 0, 2)
        elif arr.shape[1] == C:
            notes.append(f"moved middle channel axis of {arr.shape} to the end")
            arr = np.moveaxis(arr, 1, 2)
        else:
            raise ConversionError(
                f"cannot locate a {C}-channel axis in shape {arr.shape} "
                f"(channels: {spec.channel_names})"
            )
    else:
        raise ConversionError(f"expected a 2-D or 3-D artifact, got shape {arr.shape}")

    if spec.expected_locations is not None and arr.shape[1] != spec.expected_locations:
        raise ConversionError(
            f"expected {spec.expected_locations} locations, found {arr.shape[1]} "
            f"(shape {arr.shape})"
        )
    return arr


def apply_window(arr: np.ndarray, spec: ConverterSpec, notes: list[str]) -> np.ndarray:
    """Trim full-series artifacts down to the benchmark window, when configured."""
    if spec.window is None:
        return arr
    series_start, keep_start, keep_days = spec.window
    slots_per_day = 86400 // spec.granularity_s
    keep = keep_days * slots_per_day
    if arr.shape[0] == keep:
        return arr
    offset_days = (date.fromisoformat(keep_start) - date.fromisoformat(series_start)).days
    lo = offset_days * slots_per_day
    if arr.shape[0] < lo + keep:
        raise ConversionError(
            f"artifact has {arr.shape[0]} timesteps; expected either {keep} "
            f"(pre-trimmed) or at least {lo + keep} (series from {series_start})"
        )
    notes.append(
        f"kept rows [{lo}, {lo + keep}) = {keep_days} days from {keep_start} "
        f"out of a {arr.shape[0]}-step series"
    )
    return arr[lo : lo + keep]


def local_midnight_epoch(iso_day: str) -> int:
    """Local wall-clock midnight encoded as an epoch (datasets ship local time)."""
    return int(datetime.fromisoformat(iso_day).replace(tzinfo=timezone.utc).timestamp())


def start_time_from(
    spec: ConverterSpec, timestamps: np.ndarray | None, sliced: bool, notes: list[str]
) -> int:
    configured = local_midnight_epoch(spec.start_date)
    if timestamps is None or sliced:
        return configured
    upstream = int(timestamps[0] // 1_000_000_000)
    if upstream != configured:
        notes.append(
            f"upstream timestamps start at epoch {upstream}, configured date gives "
            f"{configured}; upstream wins"
        )
    if len(timestamps) > 1:
        step = int((timestamps[1] - timestamps[0]) // 1_000_000_000)
        if step != spec.granularity_s:
            notes.append(
                f"upstream step {step}s differs from configured granularity "
                f"{spec.granularity_s}s"
            )
    return upstream
