import json

import numpy as np
import pytest

from fmreservoir import tasks
from fmreservoir.errors import UsageError
from fmreservoir.presets import preset
from fmreservoir.scan import (
    ScanRecord,
    ScanResult,
    ScanSpec,
    best_point,
    dataset_seed,
    load_spec,
    run_scan,
)

SMALL = {
    "task": "narma10",
    "replicates": 2,
    "base_seed": 3,
    "splits": [100, 300, 200],
    "reservoir": {"phi1": 1.0, "input_encoding": "sine", "input_bias": 0.75, "beta": 0.02},
    "grid": {"phi0": [0.5, 1.5]},
}


def test_dataset_seed_is_stable_and_distinct():
    assert dataset_seed(0, "narma10", 0) == dataset_seed(0, "narma10", 0)
    seeds = {dataset_seed(b, t, r) for b in (0, 1) for t in tasks.TASKS for r in range(5)}
    assert len(seeds) == 2 * len(tasks.TASKS) * 5
    assert 0 <= dataset_seed(7, "memory", 3) < 2**32


def test_single_point_scan_matches_direct_evaluation():
    spec = ScanSpec.from_dict({**SMALL, "grid": {"phi0": [0.5]}, "replicates": 1})
    result = run_scan(spec)
    assert len(result.records) == 1
    config = spec.config_for({"phi0": 0.5})
    direct = tasks.evaluate("narma10", config, dataset_seed(3, "narma10", 0),
                            splits=(100, 300, 200))
    assert result.records[0].mean == direct
    assert result.records[0].std == {k: 0.0 for k in direct}


def test_identical_points_see_identical_data():
    spec = ScanSpec.from_dict({**SMALL, "grid": {"phi0": [0.7, 0.7]}})
    a, b = run_scan(spec).records
    assert a.values == b.values
    assert a.std["nmse"] > 0


def test_grid_order_last_key_fastest():
    spec = ScanSpec.from_dict({**SMALL, "grid": {"beta": [0.01, 0.02], "phi0": [0, 1, 2]}})
    points = spec.points()
    assert spec.size == 6
    assert points[0] == {"beta": 0.01, "phi0": 0} and points[1] == {"beta": 0.01, "phi0": 1}
    assert points[3] == {"beta": 0.02, "phi0": 0}


def test_range_values_expand():
    spec = ScanSpec.from_dict({**SMALL, "grid": {"phi0": {"start": 0, "stop": 1, "num": 5}}})
    assert spec.grid["phi0"] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_auto_depth():
    spec = ScanSpec.from_dict({**SMALL, "reservoir": {"m": "auto", "n_neurons": 51}})
    assert spec.config_for({}).m == pytest.approx(17.51)


def _record(i, value):
    return ScanRecord(i, {"phi0": float(i)}, {"nmse": [value]}, {"nmse": value}, {"nmse": 0.0})


def test_best_point_examples_and_ties():
    spec = ScanSpec.from_dict(SMALL)
    result = ScanResult(spec, [_record(0, 0.3), _record(1, 0.2), _record(2, 0.2), _record(3, 0.4)])
    assert best_point(result).index == 1
    assert best_point(result, direction="max").index == 3
    assert best_point(result, records=result.records[2:]).index == 2
    with pytest.raises(UsageError):
        best_point(result, metric="ser")
    with pytest.raises(UsageError):
        best_point(result, direction="up")


def test_scan_is_deterministic_and_parallel_matches_serial(tmp_path):
    spec = ScanSpec.from_dict(SMALL)
    serial = run_scan(spec)
    again = run_scan(spec)
    parallel = run_scan(spec, threads=2)
    assert serial.to_csv() == again.to_csv() == parallel.to_csv()
    assert serial.to_json() == parallel.to_json()
    paths = serial.write(tmp_path)
    assert [p.name for p in paths] == ["scan.csv", "scan.json"]
    rows = paths[0].read_text().splitlines()
    assert rows[0] == "index,phi0,nmse_mean,nmse_std,train_nmse_mean,train_nmse_std,n_ok,error"
    assert len(rows) == 3
    assert json.loads(paths[1].read_text())["spec"]["task"] == "narma10"


def test_failures_are_recorded_not_raised():
    # gain 4 overflows within the run; the stable point must still be scored
    spec = ScanSpec.from_dict({**SMALL, "grid": {"alpha": [0.8, 4.0]}})
    result = run_scan(spec)
    good, bad = result.records
    assert good.ok and not bad.ok and not result.ok
    assert "NumericalInstabilityError" in bad.errors[0]
    assert bad.mean == {}
    assert result.to_csv().splitlines()[2].split(",")[-2] == "0"


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"task": "xor"}, "task"),
        ({"grid": {"gamma": [1]}}, "grid.gamma"),
        ({"grid": {}}, "grid"),
        ({"replicates": 0}, "replicates"),
        ({"splits": [1, 2]}, "splits"),
        ({"reservoir": {"alpha": -0.5}}, "alpha"),
        ({"reservoir": {"colour": 1}}, "reservoir.colour"),
        ({"options": {"depth": 3}}, "options.depth"),
        ({"ridge_lambda": "big"}, "ridge_lambda"),
        ({"extra": 1}, "extra"),
        ({"grid": {"phi0": {"start": 0}}}, "grid.phi0"),
    ],
)
def test_invalid_spec_names_the_field(patch, field):
    with pytest.raises(UsageError, match=field.replace(".", r"\.")):
        ScanSpec.from_dict({**SMALL, **patch})


def test_load_spec_yaml(tmp_path):
    path = tmp_path / "spec.yaml"
    path.write_text("task: memory\nreplicates: 1\ngrid:\n  phi0: [0.0, 0.5]\n")
    spec = load_spec(path)
    assert spec.task == "memory" and spec.grid == {"phi0": [0.0, 0.5]}
    path.write_text("task: [memory\n")
    with pytest.raises(UsageError, match="line"):
        load_spec(path)


def test_spec_dict_round_trip():
    spec = ScanSpec.from_dict(SMALL)
    assert ScanSpec.from_dict(spec.to_dict()).to_dict() == spec.to_dict()


def test_presets():
    spec = preset("narma10")
    assert spec.size == 37 and spec.replicates == 10
    assert preset("narma10", n_neurons=51).config_for({}).n_neurons == 51
    assert preset("narma10", n_neurons=51).reservoir["m"] == "auto"
    assert preset("narma10", {"reservoir": {"m": 3.0}}, n_neurons=51).reservoir["m"] == 3.0
    assert preset("channel").size == 54
    assert preset("memory").size == 75
    with pytest.raises(UsageError):
        preset("xor")
    with pytest.raises(UsageError):
        preset("narma10", {"task": "channel"})
    assert np.isclose(preset("channel").grid["phi0"][-1], np.pi)
