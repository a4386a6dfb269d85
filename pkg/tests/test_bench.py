from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mobench import (
    HA,
    HALR,
    BenchmarkSpec,
    SplitSpec,
    benchmark_ids,
    emit_results,
    get_spec,
    registry,
    run_benchmark,
    run_many,
    save_dataset,
)
from mobench.bench import apply_overrides, load_config, overrides_for
from conftest import make_meta, periodic_panel, random_panel


def synthetic_spec(tmp_path, *, noisy=False, seq2seq=False, seed=0, bench_id="synthetic") -> BenchmarkSpec:
    """A registry-shaped benchmark over a small synthetic dataset on disk."""
    gran = 21600  # 4 slots/day, 28 per week
    ds, _ = periodic_panel(weeks=6, N=3, C=1, granularity_s=gran, seed=seed)
    if noisy:
        rng = np.random.default_rng(seed + 1)
        ds = type(ds)(ds.meta, ds.values + rng.normal(0, 0.5, ds.values.shape))
    root = tmp_path / "data" / bench_id
    save_dataset(ds, root)
    horizons = (1, 2, 3, 4) if seq2seq else (1, 2)
    return BenchmarkSpec(
        id=bench_id,
        dataset_dir=str(root),
        split=SplitSpec("days", 28, 7, 7),
        granularity_s=gran,
        horizons=horizons,
        seq2seq=seq2seq,
        seq2seq_window=4,
        lag_h=4,
    )


def test_registry_has_nine_unique_entries():
    specs = registry()
    assert len(specs) == 9
    assert len({s.id for s in specs}) == 9
    for spec in specs:
        assert spec.reference, f"{spec.id} is missing reference targets"
        assert HA in spec.tolerances and HALR in spec.tolerances


def test_registry_metr_la_entry():
    spec = get_spec("metr-la")
    assert spec.granularity_s == 300
    assert spec.split == SplitSpec("fractions", 0.7, 0.1, 0.2)
    assert spec.horizons == (3, 6, 12)
    assert not spec.seq2seq
    assert spec.reference[HA]["mae"] == 4.19


def test_registry_seattle_entry():
    spec = get_spec("seattle-loop")
    assert spec.split == SplitSpec("days", 56, 0, 5)
    assert spec.horizons == (1,)
    assert spec.reference[HALR] == {"mape_pct": 5.5, "rmse": 3.95}


def test_registry_table_one_rows():
    assert get_spec("pemsd7m").split == SplitSpec("days", 34, 5, 5)
    assert get_spec("sz-taxi").split == SplitSpec("fractions", 0.8, 0.0, 0.2)
    assert get_spec("sz-taxi").horizons == (1, 2, 3, 4)
    for bench_id in ("nyc-citibike-pickdrop", "pemsd4"):
        spec = get_spec(bench_id)
        assert spec.seq2seq and spec.seq2seq_window == 12
        assert spec.horizons == tuple(range(1, 13))
    assert get_spec("pemsd4").channels == (0,)
    assert get_spec("nyc-bike-inout").split == SplitSpec("fractions", 0.8, 0.1, 0.1)
    assert get_spec("urban1").granularity_s == 300


def test_get_spec_unknown_id():
    with pytest.raises(KeyError, match="unknown benchmark"):
        get_spec("nope")


def test_periodic_fixture_zero_error_both_methods(tmp_path):
    spec = synthetic_spec(tmp_path)
    results = run_benchmark(spec)
    for method in (HA, HALR):
        avg = results[method].report.averaged
        assert avg.mae <= 1e-9 and avg.rmse <= 1e-9


def test_seq2seq_fixture_zero_error(tmp_path):
    spec = synthetic_spec(tmp_path, seq2seq=True)
    results = run_benchmark(spec, methods=(HALR,))
    report = results[HALR].report
    assert set(report.per_horizon) == {1, 2, 3, 4}
    counts = {m.n_evaluated for m in report.per_horizon.values()}
    assert len(counts) == 1  # common window set across horizons
    assert report.averaged.rmse <= 1e-9


def test_determinism(tmp_path):
    spec = synthetic_spec(tmp_path, noisy=True)
    a = run_benchmark(spec)
    b = run_benchmark(spec)
    for method in (HA, HALR):
        assert a[method].to_dict() == b[method].to_dict()


def test_missing_dataset_message(tmp_path):
    spec = BenchmarkSpec(
        id="ghost",
        dataset_dir=str(tmp_path / "nowhere"),
        split=SplitSpec("fractions", 0.8, 0.0, 0.2),
        granularity_s=3600,
        horizons=(1,),
    )
    with pytest.raises(FileNotFoundError, match="dataset missing.*converter"):
        run_benchmark(spec)


def test_granularity_mismatch_rejected(tmp_path):
    spec = synthetic_spec(tmp_path)
    bad = BenchmarkSpec(
        id="synthetic",
        dataset_dir=spec.dataset_dir,
        split=spec.split,
        granularity_s=300,
        horizons=(1,),
    )
    with pytest.raises(ValueError, match="granularity"):
        run_benchmark(bad)


def test_overrides_split_between_spec_and_options(tmp_path):
    spec = synthetic_spec(tmp_path, noisy=True)
    new_spec, options = apply_overrides(
        spec, {"lag_h": 2, "strategy": "recursive", "mape_floor": 0.5}
    )
    assert new_spec.lag_h == 2 and new_spec.mape_floor == 0.5
    assert options.strategy == "recursive"
    with pytest.raises(ValueError, match="unknown override"):
        apply_overrides(spec, {"bogus": 1})
    with pytest.raises(ValueError, match="id"):
        apply_overrides(spec, {"id": "other"})


def test_overrides_change_the_run(tmp_path):
    spec = synthetic_spec(tmp_path, noisy=True)
    base = run_benchmark(spec, methods=(HALR,))
    rec = run_benchmark(spec, methods=(HALR,), overrides={"strategy": "recursive"})
    assert base[HALR].report.fingerprint != rec[HALR].report.fingerprint
    # horizon 1 is the same model either way
    assert_allclose(
        base[HALR].report.per_horizon[1].mae,
        rec[HALR].report.per_horizon[1].mae,
        rtol=1e-12,
    )


def test_fit_on_train_only_option(tmp_path):
    spec = synthetic_spec(tmp_path, noisy=True)
    both = run_benchmark(spec, methods=(HALR,), overrides={"fit_on": "train+val"})
    train_only = run_benchmark(spec, methods=(HALR,), overrides={"fit_on": "train"})
    assert both[HALR].report.fingerprint != train_only[HALR].report.fingerprint
    with pytest.raises(ValueError, match="fit_on"):
        run_benchmark(spec, methods=(HALR,), overrides={"fit_on": "test"})


def test_normalized_variant_runs(tmp_path):
    spec = synthetic_spec(tmp_path, noisy=True)
    fancy = run_benchmark(spec, methods=(HALR,), overrides={"normalized": True})
    plain = run_benchmark(spec, methods=(HALR,))
    assert fancy[HALR].report.averaged.rmse > 0
    assert fancy[HALR].report.fingerprint != plain[HALR].report.fingerprint


def test_target_checks_status(tmp_path):
    spec = synthetic_spec(tmp_path, noisy=True)
    actual = run_benchmark(spec, methods=(HA,))[HA].report.averaged.mae
    import dataclasses

    checked = dataclasses.replace(
        spec,
        reference={HA: {"mae": actual, "rmse": actual * 1.03, "mape_pct": actual * 5}},
        tolerances={HA: 0.02, HALR: 0.05},
    )
    result = run_benchmark(checked, methods=(HA,))[HA]
    status = {t.metric: t.status for t in result.targets}
    assert status["mae"] == "PASS"
    assert status["mape_pct"] == "FAIL"
    per_horizon_ref = dataclasses.replace(
        spec, reference={HA: {"mae": (actual, actual)}}
    )
    result = run_benchmark(per_horizon_ref, methods=(HA,))[HA]
    assert [t.horizon for t in result.targets] == [1, 2]
    assert all(t.status == "PASS" for t in result.targets)


def test_run_many_parallel_matches_sequential(tmp_path):
    spec_a = synthetic_spec(tmp_path, noisy=True, seed=1, bench_id="alpha")
    spec_b = synthetic_spec(tmp_path, noisy=True, seed=2, bench_id="beta")
    seq = run_many([spec_a, spec_b], jobs=1)
    par = run_many([spec_a, spec_b], jobs=2)
    assert seq.keys() == par.keys() == {"alpha", "beta"}
    for key in seq:
        for method in seq[key]:
            assert seq[key][method].to_dict() == par[key][method].to_dict()


def test_config_file_merging(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"*": {"lag_h": 3}, "metr-la": {"strategy": "recursive"}}))
    config = load_config(cfg_path)
    assert overrides_for(config, "metr-la") == {"lag_h": 3, "strategy": "recursive"}
    assert overrides_for(config, "pems-bay") == {"lag_h": 3}
    assert overrides_for(None, "pems-bay") == {}


def test_emit_results_three_formats_consistent(tmp_path):
    spec = synthetic_spec(tmp_path, noisy=True)
    results = {"synthetic": run_benchmark(spec)}
    out = tmp_path / "results"
    for fmt in ("text", "csv", "json"):
        emit_results(results, fmt, out)
    for method in (HA, HALR):
        base = out / "synthetic"
        assert (base / f"{method}.txt").is_file()
        payload = json.loads((base / f"{method}.json").read_text())
        assert payload["fingerprint"].startswith("synthetic/")
        with open(base / f"{method}.csv", newline="") as fh:
            rows = {r["horizon"]: r for r in csv.DictReader(fh)}
        report = results["synthetic"][method].report
        for k, metrics in report.per_horizon.items():
            assert float(rows[str(k)]["mae"]) == metrics.mae
            assert float(rows[str(k)]["rmse"]) == metrics.rmse
        assert float(rows["avg"]["mae"]) == report.averaged.mae
        assert payload["averaged"]["mae"] == report.averaged.mae
        text = (base / f"{method}.txt").read_text()
        assert "MAE" in text and method in text

    with pytest.raises(ValueError, match="format"):
        emit_results(results, "yaml", out)


def test_benchmark_ids_order():
    assert benchmark_ids() == [
        "pemsd7m",
        "urban1",
        "nyc-citibike-pickdrop",
        "pemsd4",
        "sz-taxi",
        "metr-la",
        "pems-bay",
        "nyc-bike-inout",
        "seattle-loop",
    ]


def test_data_dir_env_resolution(tmp_path, monkeypatch):
    gran = 21600
    ds, _ = periodic_panel(weeks=6, N=2, C=1, granularity_s=gran)
    save_dataset(ds, tmp_path / "byenv" / "rel-bench")
    monkeypatch.setenv("MOBENCH_DATA_DIR", str(tmp_path / "byenv"))
    spec = BenchmarkSpec(
        id="rel-bench",
        dataset_dir="rel-bench",
        split=SplitSpec("days", 28, 7, 7),
        granularity_s=gran,
        horizons=(1,),
        lag_h=4,
    )
    results = run_benchmark(spec, methods=(HA,))
    assert results[HA].report.averaged.mae <= 1e-9


def test_seq2seq_spec_validation():
    with pytest.raises(ValueError, match="seq2seq"):
        BenchmarkSpec(
            id="bad",
            dataset_dir="bad",
            split=SplitSpec("fractions", 0.8, 0.0, 0.2),
            granularity_s=300,
            horizons=(1, 2),
            seq2seq=True,
        )
