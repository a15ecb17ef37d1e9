import json

import numpy as np
import pytest

from modellife import scenario
from modellife.scenario import (ScenarioError, SimulationRecord, load_scenario,
                                standard_scenario, run_closed_loop, scenario_from_dict,
                                scenario_to_dict)


@pytest.fixture(scope="module")
def gain_runs():
    s = standard_scenario("gain")
    return s, [run_closed_loop(s, 0), run_closed_loop(s, 1)]


def test_grids():
    g = scenario.log_grid()
    assert len(g) == 62 and g[0] == 0.0
    assert g[1] == pytest.approx(1e-6) and g[-1] == pytest.approx(1e-2)
    a = scenario.arithmetic_grid()
    assert len(a) == 10001 and a[1] == 1e-6 and a[-1] == pytest.approx(1e-2)


def test_standard_scenarios():
    assert standard_scenario("gain").truth.channel(1, 1).gain == pytest.approx(6.4)
    assert standard_scenario("delay").truth.channel(2, 2).dead_time == pytest.approx(7.0)
    assert standard_scenario("null").truth == standard_scenario("null").nominal
    with pytest.raises(ValueError):
        standard_scenario("wear")


def test_first_run_shape(gain_runs):
    s, (rec, _) = gain_runs
    assert len(rec) == 5001
    assert rec.t[-1] == pytest.approx(1000.0)
    # u changes only at control instants
    changes = np.flatnonzero(np.any(np.diff(rec.u, axis=0) != 0, axis=1)) + 1
    assert np.all(changes % 5 == 0)


def test_schedules_are_followed_exactly(gain_runs):
    _, (rec1, rec2) = gain_runs
    t = rec1.t
    np.testing.assert_array_equal(rec1.r[:, 0], np.where(t >= 500, 1.0, 0.0))
    assert np.all(rec1.r[:, 1] == 0)
    assert np.all(rec2.r[:, 0] == 1.0)
    np.testing.assert_array_equal(rec2.r[:, 1], np.where(t >= 500, 1.0, 0.0))


def test_noise_contract(gain_runs):
    s, (rec, _) = gain_runs
    v = rec.y - rec.y_clean
    assert np.all(np.abs(v.var(axis=0) / s.noise_variance - 1) < 0.1)
    from modellife import _rng
    expected = _rng.stream(s.seed, "noise", 0).normal(0, np.sqrt(s.noise_variance), (5001, 2))
    np.testing.assert_allclose(v, expected, atol=1e-12)


def test_loop_tracks_the_step_despite_mismatch(gain_runs):
    _, (rec, _) = gain_runs
    late = rec.t >= 700
    assert abs(rec.y_clean[late, 0].mean() - 1.0) < 0.02
    assert abs(rec.y_clean[late, 1].mean()) < 0.02


def test_rest_without_noise_or_reference():
    s = standard_scenario("gain").replace(noise_variance=0.0, horizon=200.0,
                                       schedules=(((), ()), ((), ())))
    rec = run_closed_loop(s)
    assert np.all(rec.y_clean == 0) and np.all(rec.u == 0)


def test_runs_are_bit_identical():
    s = standard_scenario("delay").replace(horizon=300.0)
    a, b = run_closed_loop(s, 1), run_closed_loop(s, 1)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.u, b.u)
    c = run_closed_loop(s.replace(seed=7), 1)
    assert not np.array_equal(a.y, c.y)


def test_csv_round_trip(tmp_path, gain_runs):
    _, (rec, _) = gain_runs
    path = tmp_path / "rec.csv"
    rec.write_csv(path)
    assert path.read_text().splitlines()[0] == "t_min,u1,u2,y1,y2,y1_clean,y2_clean,r1,r2"
    back = SimulationRecord.read_csv(path)
    for name in ("t", "u", "y", "y_clean", "r"):
        assert np.array_equal(getattr(back, name), getattr(rec, name))


def test_csv_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t_min,u1,u2,y1,y2,y1_clean,y2_clean,r1,r2\n0,0,0,0,0,0,0,0,0\n0.2,0,x,0,0,0,0,0,0\n")
    with pytest.raises(ValueError, match=r"bad.csv:3"):
        SimulationRecord.read_csv(path)
    path.write_text("time,u\n")
    with pytest.raises(ValueError, match=r":1: expected header"):
        SimulationRecord.read_csv(path)


def test_json_round_trip(tmp_path):
    s = standard_scenario("delay", seed=9)
    doc = scenario_to_dict(s)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    back = load_scenario(path)
    assert scenario_to_dict(back) == doc
    assert back.truth == s.truth


def test_defaults_from_an_empty_document():
    s = scenario_from_dict({})
    assert s.n_samples == 5001
    assert s.mpc.prediction_horizon == 30
    assert s.mle.lambda_grid().shape == (62,)


@pytest.mark.parametrize("doc, where", [
    ({"colour": 1}, "$.colour"),
    ({"noise": {"variance": -1}}, "$.noise.variance"),
    ({"mpc": {"control_horizon": 30}}, "$.mpc"),
    ({"mpc": {"prediction_horizon": "long"}}, "$.mpc.prediction_horizon"),
    ({"plant": {"mismatch": {"gain_deltas": [1, 2]}}}, "$.plant.mismatch.gain_deltas"),
    ({"plant": {"mismatch": {"delay_deltas": [[-5, 0], [0, 0]]}}},
     "$.plant.mismatch.delay_deltas"),
    ({"horizon": 600}, "$.horizon"),
    ({"mle": {"grid": "cubic"}}, "$.mle.grid"),
    ({"reference_schedules": [[[], []]]}, "$.reference_schedules"),
    ({"reference_schedules": [[[["a", 1]], []], [[], []]]}, "$.reference_schedules[0][0]"),
])
def test_errors_name_the_field(doc, where):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(doc)
    assert info.value.path == where


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{"horizon": 1000,\n  "noise": }')
    with pytest.raises(ScenarioError, match=r"s.json:2:"):
        load_scenario(path)
