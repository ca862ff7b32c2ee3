import json

import numpy as np
import pytest

from survelicit.data_io import (
    default_config,
    format_float,
    load_config,
    load_dataset,
    parse_config_dict,
    save_config,
    synthetic_dataset,
    write_csv,
    write_dataset,
)
from survelicit.errors import ValidationError
from survelicit.families import Family


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")


def test_load_dataset_converts_days(tmp_path):
    p = tmp_path / "d.csv"
    write_lines(p, ["id,time,event,arm", "1,1825,1,1", "2,730.5,0,2"])
    data = load_dataset(p, unit="days")
    assert data.time[0] == pytest.approx(1825 / 365.25)
    assert data.time[0] == pytest.approx(4.996577686516085)
    assert data.time[1] == pytest.approx(2.0)
    assert data.arm_counts() == {1: (1, 1), 2: (1, 0)}


def test_load_dataset_converts_months(tmp_path):
    p = tmp_path / "d.csv"
    write_lines(p, ["id,time,event,arm", "1,18,1,1"])
    data = load_dataset(p, unit="months")
    assert data.time[0] == pytest.approx(1.5)


def test_load_dataset_row_addressed_errors(tmp_path):
    p = tmp_path / "d.csv"
    write_lines(p, ["id,time,event,arm", "1,5,1,1", "2,-1,1,1"])
    with pytest.raises(ValidationError, match="row 3"):
        load_dataset(p)
    write_lines(p, ["id,time,event,arm", "1,5,2,1"])
    with pytest.raises(ValidationError, match="row 2"):
        load_dataset(p)
    write_lines(p, ["id,time,event,arm", "1,5,1,7"])
    with pytest.raises(ValidationError, match="arm"):
        load_dataset(p)
    write_lines(p, ["id,time,arm", "1,5,1"])
    with pytest.raises(ValidationError, match="header"):
        load_dataset(p)


def test_load_dataset_unknown_unit(tmp_path):
    p = tmp_path / "d.csv"
    write_lines(p, ["id,time,event,arm", "1,5,1,1"])
    with pytest.raises(ValidationError, match="unit"):
        load_dataset(p, unit="weeks")


def test_dataset_round_trip(tmp_path):
    data = synthetic_dataset(seed=3, n_arm1=40, n_arm2=30)
    p = tmp_path / "synth.csv"
    write_dataset(p, data, unit="days")
    again = load_dataset(p, unit="days")
    np.testing.assert_allclose(again.time, data.time, rtol=1e-12)
    np.testing.assert_array_equal(again.event, data.event)
    np.testing.assert_array_equal(again.arm, data.arm)


def test_synthetic_dataset_shape():
    data = synthetic_dataset(seed=1)
    counts = data.arm_counts()
    assert counts[1][0] == 440
    assert counts[2][0] == 246
    # event fractions roughly in the case-study ballpark
    assert 0.25 < counts[1][1] / 440 < 0.7
    assert 0.2 < counts[2][1] / 246 < 0.65
    assert synthetic_dataset(seed=1).time[0] == data.time[0]


def test_default_config_loads_and_round_trips(tmp_path):
    cfg = default_config()
    assert cfg.prior.t0 == 5.0 and cfg.prior.t1 == 10.0
    assert cfg.prior.quantity("S1_t0").dist.alpha == pytest.approx(27.09, abs=0.05)
    p = tmp_path / "cfg.json"
    save_config(p, cfg)
    again = load_config(p)
    assert again.to_dict() == cfg.to_dict()


def test_config_round_trip_with_randomized_fields(tmp_path):
    cfg = default_config(
        n_prior_draws=12345,
        seed=99,
        hellinger_variant="marginal",
        families=[Family.WEIBULL, Family.GOMPERTZ],
        dataset_path="data/x.csv",
        dataset_unit="days",
        weight_scheme="uniform",
    )
    p = tmp_path / "cfg.json"
    save_config(p, cfg)
    again = load_config(p)
    assert again.to_dict() == cfg.to_dict()
    assert again.families == [Family.WEIBULL, Family.GOMPERTZ]
    assert again.dataset_unit == "days"


def test_unknown_family_in_config_lists_names():
    raw = default_config().to_dict()
    raw["families"] = ["gamma"]
    with pytest.raises(ValidationError, match="exponential, weibull"):
        parse_config_dict(raw)


def test_config_path_addressed_errors():
    raw = default_config().to_dict()
    del raw["prior"]["quantities"]["delta11"]
    with pytest.raises(ValidationError, match="delta11"):
        parse_config_dict(raw)
    raw = default_config().to_dict()
    raw["prior"]["quantities"]["S1_t0"]["q50"] = "often"
    with pytest.raises(ValidationError, match="q50"):
        parse_config_dict(raw)
    raw = default_config().to_dict()
    raw["hellinger"]["variant"] = "exact"
    with pytest.raises(ValidationError, match="variant"):
        parse_config_dict(raw)


def test_config_missing_file_and_bad_json(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        load_config(tmp_path / "nope.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ValidationError, match="JSON"):
        load_config(p)


def test_format_float_round_trips():
    for x in (0.1, 1 / 3, 1e-300, 123456.789, 2.0):
        assert float(format_float(x)) == x
    assert format_float(3) == "3"


def test_write_csv_deterministic_bytes(tmp_path):
    rows = [[1, 0.1, "a"], [2, 2 / 3, "b"]]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(p1, ["i", "x", "s"], rows)
    write_csv(p2, ["i", "x", "s"], rows)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().splitlines()[1] == "1,0.1,a"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    p = tmp_path / "out" / "x.csv"
    write_csv(p, ["a"], [[1]])
    assert [f.name for f in p.parent.iterdir()] == ["x.csv"]
