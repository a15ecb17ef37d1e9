import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modellife import arx, bench, plant
from modellife.bench import ResponseCurve, final_gain, peak_delay, step_benchmark
from modellife.plant import FopdtChannel, TransferMatrixModel, wood_berry_nominal

from oracles import fopdt_step_samples


def test_model_against_itself_is_zero():
    g0 = wood_berry_nominal()
    res = step_benchmark(g0, g0)
    assert res.E == 0.0
    assert res.per_channel.shape == (2, 2)
    assert res.horizon == 100.0


def test_gain_scenario_closed_form():
    g0 = wood_berry_nominal()
    aged = plant.apply_mismatch(g0, plant.gain_mismatch())
    expected = 0.0
    for (i, j), dk in (((1, 1), -6.4), ((2, 1), -3.3)):
        ch = g0.channel(i, j)
        expected += np.sum((dk / ch.gain * fopdt_step_samples(ch.gain, ch.time_constant,
                                                              ch.dead_time, 500, 0.2)) ** 2)
    res = step_benchmark(aged, g0)
    assert res.E == pytest.approx(expected, rel=1e-12)
    assert res.E == pytest.approx(res.per_channel.sum())
    assert res.per_channel[0, 1] == 0 and res.per_channel[1, 1] == 0


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3))
def test_gain_error_contributes_quadratically(delta):
    g0 = wood_berry_nominal()
    spec = plant.MismatchSpec(np.array([[0.0, delta], [0.0, 0.0]]), np.zeros((2, 2)))
    ch = g0.channel(1, 2)
    shape = fopdt_step_samples(1.0, ch.time_constant, ch.dead_time, 500, 0.2)
    res = step_benchmark(g0, plant.apply_mismatch(g0, spec))
    assert res.per_channel[0, 1] == pytest.approx(delta**2 * np.sum(shape**2), rel=1e-10)


def test_exact_arx_scores_zero_and_shapes_must_match():
    g0 = wood_berry_nominal()
    assert step_benchmark(g0, arx.exact_from_fopdt(g0)).E < 1e-15
    siso = TransferMatrixModel(((FopdtChannel(1.0, 1.0, 0.0),),))
    with pytest.raises(ValueError):
        step_benchmark(g0, siso)
    with pytest.raises(ValueError):
        step_benchmark(g0, g0, horizon_minutes=100.1)


def test_final_gain_of_nominal_channel():
    g0 = wood_berry_nominal()
    curve = bench.response_curve(g0, 1, 1)
    assert len(curve.values) == 501
    assert final_gain(curve) == pytest.approx(12.8, abs=0.04)
    assert final_gain(np.zeros(50)) == 0.0


def test_final_gain_within_a_fraction_of_a_percent_when_settled():
    ch = FopdtChannel(-3.0, 5.0, 2.0)
    model = TransferMatrixModel(((ch,),))
    curve = bench.response_curve(model, 1, 1, horizon_minutes=2.0 + 6 * 5.0)
    assert final_gain(curve) == pytest.approx(-3.0, rel=3e-3)


@pytest.mark.parametrize("i,j", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_peak_delay_of_analytic_channels(i, j):
    g0 = wood_berry_nominal()
    curve = bench.response_curve(g0, i, j, kind="impulse")
    assert abs(peak_delay(curve) - g0.channel(i, j).dead_time) <= 0.2 + 1e-12


def test_peak_delay_examples():
    g0 = wood_berry_nominal()
    assert peak_delay(bench.response_curve(g0, 2, 1, kind="impulse")) == pytest.approx(7.0)
    spike = np.zeros(30)
    spike[10] = -4.0
    assert peak_delay(spike, 0.2) == pytest.approx(2.0)
    assert peak_delay(np.array([1.0, -1.0, 1.0]), 0.2) == 0.0
    with pytest.raises(ValueError):
        peak_delay(np.array([]), 0.2)
    with pytest.raises(ValueError):
        peak_delay(np.ones(3))


def test_arx_response_grid_matches_helpers():
    g0 = wood_berry_nominal()
    model = arx.exact_from_fopdt(g0, 0.2, 40)
    grid = bench.response_grid(model, 20.0, 0.2, "impulse")
    np.testing.assert_array_equal(grid[:, 1, 0], arx.impulse_response(model, 1, 2, 100))
    with pytest.raises(ValueError):
        bench.response_grid(model, 20.0, 0.5)
    with pytest.raises(TypeError):
        bench.response_grid("not a model")


def test_response_curve_times():
    curve = ResponseCurve(np.zeros(6), 0.2, 1, 1)
    np.testing.assert_allclose(curve.times, [0, 0.2, 0.4, 0.6, 0.8, 1.0])


def test_sweep_endpoints():
    from modellife.mle import RegressionDataset
    g0 = wood_berry_nominal()
    base = arx.exact_from_fopdt(g0, 0.2, 40)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(160, 300))
    Y = base.coefficients @ X + 0.01 * rng.normal(size=(2, 300))
    d = RegressionDataset(X, Y, np.arange(300))
    out = bench.lambda_sweep(g0, d, d, base, [1e3, 1e-3])
    assert out[0] == (1e3, pytest.approx(step_benchmark(g0, base).E, abs=1e-15))
    assert all(E >= 0 for _, E in out)
