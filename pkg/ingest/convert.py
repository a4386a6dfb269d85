#!/usr/bin/env python3
"""One-shot converters: upstream dataset artifacts -> canonical dataset directories.

usage:
    convert.py <benchmark-id> <src-file> <dst-dir>   convert, verify, print provenance
    convert.py --verify <benchmark-id> <dst-dir>     re-verify against the recorded source
    convert.py --list                                 show benchmark ids and where to fetch

The canonical directory is ``meta.json`` + ``values.f32`` (little-endian float32,
row-major [T, N, C]); values must equal the upstream tensor cast to float32,
elementwise. A ``provenance.json`` records the source checksum and every
normalization step taken.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from upstream import (
    ConversionError,
    ConverterSpec,
    apply_window,
    converter_specs,
    get_converter_spec,
    load_holidays,
    read_upstream,
    start_time_from,
    to_time_major,
)

META_KEYS = {
    "name": str,
    "start_time": int,
    "granularity_s": int,
    "num_timesteps": int,
    "num_locations": int,
    "num_channels": int,
    "channel_names": list,
    "missing_sentinel": (float, int, type(None)),
    "holidays": list,
    "timezone_offset_s": int,
}


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _canonical_array(spec: ConverterSpec, src_path: Path, notes: list[str]):
    """The full read pipeline: read, reshape to [T, N, C], trim to the window."""
    raw, timestamps = read_upstream(spec, src_path)
    upstream_dtype, upstream_shape = str(raw.dtype), tuple(raw.shape)
    arr = to_time_major(raw, spec, notes)
    trimmed = apply_window(arr, spec, notes)
    sliced = trimmed.shape[0] != arr.shape[0]
    return trimmed.astype(np.float32), timestamps, sliced, upstream_dtype, upstream_shape


def convert(benchmark_id: str, src_path: str | Path, dst_dir: str | Path) -> dict:
    """Write the canonical directory and return the provenance record."""
    spec = get_converter_spec(benchmark_id)
    src_path, dst_dir = Path(src_path), Path(dst_dir)
    notes: list[str] = []
    values, timestamps, sliced, upstream_dtype, upstream_shape = _canonical_array(
        spec, src_path, notes
    )
    T, N, C = values.shape
    if spec.expected_timesteps is not None and T != spec.expected_timesteps:
        notes.append(
            f"timesteps {T} differ from the documented {spec.expected_timesteps}; "
            "the converted artifact governs"
        )
    start_time = start_time_from(spec, timestamps, sliced, notes)

    meta = {
        "name": benchmark_id,
        "start_time": start_time,
        "granularity_s": spec.granularity_s,
        "num_timesteps": T,
        "num_locations": N,
        "num_channels": C,
        "channel_names": list(spec.channel_names),
        "missing_sentinel": spec.missing_sentinel,
        "holidays": load_holidays(benchmark_id),
        "timezone_offset_s": 0,
    }
    dst_dir.mkdir(parents=True, exist_ok=True)
    (dst_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", "utf-8")
    values.astype("<f4").tofile(dst_dir / "values.f32")

    provenance = {
        "benchmark_id": benchmark_id,
        "source_path": str(src_path.resolve()),
        "source_sha256": _sha256(src_path),
        "source_bytes": src_path.stat().st_size,
        "reader": spec.reader,
        "upstream_dtype": upstream_dtype,
        "upstream_shape": list(upstream_shape),
        "converted_shape": [T, N, C],
        "start_time": start_time,
        "start_time_source": "upstream-timestamps" if timestamps is not None and not sliced else "configured-date",
        "granularity_s": spec.granularity_s,
        "notes": notes,
    }
    (dst_dir / "provenance.json").write_text(json.dumps(provenance, indent=2) + "\n", "utf-8")
    return provenance


def verify(benchmark_id: str, dst_dir: str | Path, src_path: str | Path | None = None) -> dict:
    """Re-read upstream and canonical data; assert elementwise float32 equality.

    The upstream path defaults to the one recorded in provenance.json. Raises
    ConversionError on any mismatch; returns a small report when everything holds.
    """
    spec = get_converter_spec(benchmark_id)
    dst_dir = Path(dst_dir)
    meta_path = dst_dir / "meta.json"
    values_path = dst_dir / "values.f32"
    for path in (meta_path, values_path):
        if not path.is_file():
            raise ConversionError(f"canonical file missing: {path}")
    if src_path is None:
        prov_path = dst_dir / "provenance.json"
        if not prov_path.is_file():
            raise ConversionError(f"no provenance.json in {dst_dir}; pass the source path")
        src_path = json.loads(prov_path.read_text("utf-8"))["source_path"]

    meta = json.loads(meta_path.read_text("utf-8"))
    for key, types in META_KEYS.items():
        if key not in meta:
            raise ConversionError(f"meta.json is missing {key!r}")
        if not isinstance(meta[key], types):
            raise ConversionError(f"meta.json field {key!r} has type {type(meta[key]).__name__}")
    if set(meta) != set(META_KEYS):
        raise ConversionError(f"meta.json has unexpected keys: {sorted(set(meta) - set(META_KEYS))}")
    if meta["granularity_s"] != spec.granularity_s:
        raise ConversionError(
            f"meta granularity {meta['granularity_s']}s != converter spec {spec.granularity_s}s"
        )
    if meta["channel_names"] != list(spec.channel_names):
        raise ConversionError(
            f"meta channels {meta['channel_names']} != spec {list(spec.channel_names)}"
        )

    expected, _, _, _, _ = _canonical_array(spec, Path(src_path), [])
    stored = np.fromfile(values_path, dtype="<f4")
    shape = (meta["num_timesteps"], meta["num_locations"], meta["num_channels"])
    if stored.size != expected.size or shape != expected.shape:
        raise ConversionError(
            f"shape mismatch: canonical holds {stored.size} values as {shape}, "
            f"upstream gives {expected.shape}"
        )
    stored = stored.reshape(shape)
    same = (stored == expected) | (np.isnan(stored) & np.isnan(expected))
    if not same.all():
        t, n, c = (int(i) for i in np.argwhere(~same)[0])
        raise ConversionError(
            f"value mismatch at [t={t}, n={n}, c={c}]: "
            f"canonical {stored[t, n, c]!r} vs upstream {expected[t, n, c]!r}"
        )
    return {
        "benchmark_id": benchmark_id,
        "shape": list(shape),
        "elements": int(stored.size),
        "equal": True,
    }


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="convert.py", description="Convert upstream dataset artifacts to canonical form."
    )
    parser.add_argument("--list", action="store_true", help="list benchmark ids and sources")
    parser.add_argument("--verify", action="store_true", help="verify instead of convert")
    parser.add_argument("args", nargs="*", metavar="ARG")
    ns = parser.parse_args(argv)

    try:
        if ns.list:
            for spec in converter_specs():
                print(f"{spec.benchmark_id:<24} {spec.reader:<13} {spec.source_hint}")
            return 0
        if ns.verify:
            if len(ns.args) != 2:
                parser.error("--verify needs: <benchmark-id> <dst-dir>")
            report = verify(ns.args[0], ns.args[1])
            print(json.dumps(report, indent=2))
            return 0
        if len(ns.args) != 3:
            parser.error("convert needs: <benchmark-id> <src-file> <dst-dir>")
        benchmark_id, src, dst = ns.args
        provenance = convert(benchmark_id, src, dst)
        verify(benchmark_id, dst, src)
        print(json.dumps(provenance, indent=2))
        return 0
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
