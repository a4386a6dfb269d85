"""Converter losslessness acceptance: for each upstream artifact that is actually
present (under $MOBENCH_UPSTREAM_DIR), convert it and verify elementwise float32
equality plus meta consistency. Artifacts are never downloaded here."""

from __future__ import annotations

import os
from pathlib import Path

import pytest

from convert import convert, verify
from upstream import converter_specs

UPSTREAM_ROOT = Path(os.environ.get("MOBENCH_UPSTREAM_DIR", "upstream"))

# filenames the source repos ship under, per benchmark
CANDIDATES = {
    "pemsd7m": ("V_228.csv", "PeMSD7_V_228.csv"),
    "urban1": ("urban1.csv", "urban1_speed.csv"),
    "nyc-citibike-pickdrop": ("nyc-bike.npz", "bike_data.npz", "nyc-citibike.npz"),
    "pemsd4": ("PEMS04.npz", "pems04.npz"),
    "sz-taxi": ("sz_speed.csv",),
    "metr-la": ("metr-la.h5",),
    "pems-bay": ("pems-bay.h5",),
    "nyc-bike-inout": ("nyc-bike-inout.npz", "bikenyc.npz"),
    "seattle-loop": ("speed_matrix_2015", "speed_matrix_2015.pkl"),
}


def find_artifact(benchmark_id: str) -> Path | None:
    for name in CANDIDATES[benchmark_id]:
        for candidate in (UPSTREAM_ROOT / name, UPSTREAM_ROOT / benchmark_id / name):
            if candidate.is_file():
                return candidate
    return None


@pytest.mark.parametrize("benchmark_id", [s.benchmark_id for s in converter_specs()])
def test_converter_losslessness(benchmark_id, tmp_path):
    artifact = find_artifact(benchmark_id)
    if artifact is None:
        pytest.skip(f"upstream artifact for {benchmark_id!r} not present under {UPSTREAM_ROOT}")
    dst = tmp_path / benchmark_id
    convert(benchmark_id, artifact, dst)
    report = verify(benchmark_id, dst, artifact)
    print(f"PASS converter losslessness: {benchmark_id} ({report['elements']} values)")
    assert report["equal"]
