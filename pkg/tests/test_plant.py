import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modellife import plant
from modellife.plant import (FopdtChannel, MismatchSpec, PlantSimulator, TransferMatrixModel,
                             analytic_step_response, apply_mismatch, make_simulator,
                             wood_berry_nominal)

from oracles import fopdt_step_samples


def test_nominal_parameters():
    g0 = wood_berry_nominal()
    assert g0.channel(1, 1) == FopdtChannel(12.8, 16.7, 1.0)
    assert g0.channel(2, 2) == FopdtChannel(-19.4, 14.4, 3.0)
    assert g0.channel(1, 2) == FopdtChannel(-18.9, 21.0, 3.0)
    assert g0.channel(2, 1) == FopdtChannel(6.6, 10.9, 7.0)
    assert np.all(g0.time_constants() > 0)
    assert (g0.p, g0.m) == (2, 2)


def test_channel_invariants():
    with pytest.raises(ValueError):
        FopdtChannel(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        FopdtChannel(1.0, 1.0, -0.5)


def test_apply_mismatch():
    g0 = wood_berry_nominal()
    aged = apply_mismatch(g0, plant.gain_mismatch())
    assert aged.channel(1, 1).gain == pytest.approx(6.4)
    assert aged.channel(2, 1).gain == pytest.approx(3.3)
    assert aged.channel(1, 1).time_constant == 16.7
    assert apply_mismatch(g0, MismatchSpec.zeros()) == g0
    delayed = apply_mismatch(g0, plant.delay_mismatch())
    assert delayed.channel(2, 2).dead_time == pytest.approx(7.0)
    assert delayed.channel(1, 2).dead_time == pytest.approx(7.0)
    assert delayed.channel(2, 1).dead_time == 7.0


def test_apply_mismatch_rejects_negative_dead_time():
    spec = MismatchSpec(np.zeros((2, 2)), np.array([[-2.0, 0], [0, 0]]))
    with pytest.raises(ValueError, match=r"\(1,1\)"):
        apply_mismatch(wood_berry_nominal(), spec)


def test_delay_lines():
    sim = make_simulator(wood_berry_nominal(), 0.2)
    assert sim.delays[1, 0] == 35
    assert np.all(sim.output() == 0)
    sim_d = make_simulator(apply_mismatch(wood_berry_nominal(), plant.delay_mismatch()), 0.2)
    assert sim_d.delays[0, 1] == 35


def test_non_commensurate_dead_time_rejected():
    m = TransferMatrixModel(((FopdtChannel(1.0, 2.0, 0.3),),))
    with pytest.raises(ValueError, match=r"channel \(1,1\)"):
        make_simulator(m, 0.2)
    with pytest.raises(ValueError):
        make_simulator(m, 0.0)


def test_step_response_one_sample_past_delay():
    sim = make_simulator(wood_berry_nominal(), 0.2)
    y = sim.simulate(np.tile([1.0, 0.0], (10, 1)))
    assert np.all(y[:6, 0] == 0)  # t <= 1.0 min
    assert y[6, 0] == pytest.approx(12.8 * (1 - np.exp(-0.2 / 16.7)), rel=1e-12)
    assert y[6, 0] == pytest.approx(0.15238, abs=1e-5)


def test_zero_input_stays_at_rest():
    sim = make_simulator(wood_berry_nominal(), 0.2)
    assert np.all(sim.simulate(np.zeros((300, 2))) == 0)


def test_analytic_step_response():
    ch = wood_berry_nominal().channel(1, 1)
    assert analytic_step_response(ch, 1e6) == pytest.approx(12.8)
    assert analytic_step_response(ch, ch.dead_time) == 0.0
    assert analytic_step_response(ch, 1.0 + 16.7) == pytest.approx(12.8 * (1 - np.exp(-1)))
    assert analytic_step_response(ch, 1.0 + 16.7) == pytest.approx(8.0911, abs=1e-4)


@pytest.mark.parametrize("i,j", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_simulation_is_exact_for_steps(i, j):
    g0 = wood_berry_nominal()
    ch = g0.channel(i, j)
    u = np.zeros((500, 2))
    u[:, j - 1] = 1.0
    y = make_simulator(g0, 0.2).simulate(u)
    expected = fopdt_step_samples(ch.gain, ch.time_constant, ch.dead_time, 500, 0.2)
    np.testing.assert_allclose(y[:, i - 1], expected, rtol=0, atol=1e-10)


@pytest.mark.parametrize("j", [0, 1])
def test_static_gain_reached(j):
    g0 = wood_berry_nominal()
    # 10*T_max + L_max leaves 7e-4 on channel (1,2); wait longer
    settle = 15 * g0.time_constants().max() + g0.dead_times().max()
    n = int(np.ceil(settle / 0.2))
    u = np.zeros((n, 2))
    u[:, j] = 1.0
    y = make_simulator(g0, 0.2).simulate(u)
    np.testing.assert_allclose(y[-1], g0.gains()[:, j], atol=1e-4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_superposition(seed):
    rng = np.random.default_rng(seed)
    g = wood_berry_nominal()
    a = rng.normal(size=(200, 2))
    b = rng.normal(size=(200, 2))
    ya = make_simulator(g, 0.2).simulate(a)
    yb = make_simulator(g, 0.2).simulate(b)
    yab = make_simulator(g, 0.2).simulate(a + b)
    np.testing.assert_allclose(yab, ya + yb, atol=1e-10)


def test_determinism():
    u = np.random.default_rng(0).normal(size=(400, 2))
    y1 = make_simulator(wood_berry_nominal(), 0.2).simulate(u)
    y2 = make_simulator(wood_berry_nominal(), 0.2).simulate(u)
    assert np.array_equal(y1, y2)


def test_output_is_row_sum_of_channel_states():
    sim = make_simulator(wood_berry_nominal(), 0.2)
    for u in np.random.default_rng(1).normal(size=(60, 2)):
        y = sim.advance(u)
        np.testing.assert_array_equal(y, sim.state.sum(axis=1))


def test_advance_checks_input_size():
    with pytest.raises(ValueError):
        make_simulator(wood_berry_nominal(), 0.2).advance([1.0])


def test_model_dict_round_trip():
    g0 = wood_berry_nominal()
    assert TransferMatrixModel.from_dict(g0.to_dict()) == g0
