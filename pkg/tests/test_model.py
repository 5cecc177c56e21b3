import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eivsm.model import (
    Constant,
    Dataset,
    DatasetParseError,
    InputSpec,
    ModelOrder,
    NoiseSpec,
    Sinusoid,
    UnstableSimulationError,
    delta_for_snr,
    read_dataset,
    simulate,
    simulate_for_snr,
    simulate_output,
    snr_input,
    snr_output,
    variation_bound_of,
    write_dataset,
)
from oracles import arx_residual

EX1_ORDER = ModelOrder(1, 1, nk=1)
EX1_SPECS = (Sinusoid(0.2, 0.4, 500), Sinusoid(-2.0, 0.5, 750))


def test_order_invariants():
    assert ModelOrder(2, 1).n_p == 4
    assert ModelOrder(3, 0).n_p == 4
    assert ModelOrder(1, 1, nk=1).n_p == 2
    assert ModelOrder(2, 2, nk=2).labels == ["a1", "a2", "b2"]
    assert ModelOrder(1, 1).labels == ["a1", "b0", "b1"]
    for bad in [(0, 0), (1, -1), (1, 2), (2, 1, 2)]:
        with pytest.raises(ValueError):
            ModelOrder(*bad)


@settings(max_examples=50, deadline=None)
@given(na=st.integers(1, 6), nb=st.integers(0, 6))
def test_np_formula_without_delay(na, nb):
    if na < nb:
        return
    assert ModelOrder(na, nb).n_p == na + nb + 1


def test_variation_bounds_of_example_trajectories():
    assert variation_bound_of(Sinusoid(-2.0, 0.5, 750)) == pytest.approx(math.pi / 750, rel=1e-15)
    assert variation_bound_of(Sinusoid(0.2, 0.4, 500)) == pytest.approx(0.8 * math.pi / 500, rel=1e-15)
    assert variation_bound_of(Constant(0.25)) == 0.0


def test_sinusoid_value():
    s = Sinusoid(1.0, 0.5, 8)
    assert s.at(2) == pytest.approx(1.5)
    assert s.at(0) == 1.0
    with pytest.raises(ValueError):
        Sinusoid(0.0, 1.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(
    offset=st.floats(-5, 5),
    amplitude=st.floats(-3, 3),
    period=st.floats(2.0, 5000.0),
)
def test_variation_bound_holds(offset, amplitude, period):
    s = Sinusoid(offset, amplitude, period)
    values = s.at(np.arange(0, 3000))
    assert np.max(np.abs(np.diff(values))) <= variation_bound_of(s) + 1e-12


def test_zero_noise_identity():
    ds = simulate(EX1_SPECS, EX1_ORDER, NoiseSpec(0.0, 0.0, 3), InputSpec(seed=4), 200)
    np.testing.assert_array_equal(ds.u, ds.x)
    np.testing.assert_array_equal(ds.y, ds.w)


def test_pass_through_system():
    order = ModelOrder(1, 0)
    x = np.zeros(10)
    x[0] = 1.0
    theta = np.tile([0.0, 1.0], (10, 1))
    np.testing.assert_array_equal(simulate_output(theta, x, order), x)


def test_example1_dataset_shape():
    ds = simulate(EX1_SPECS, EX1_ORDER, NoiseSpec(0.01, 0.01, 1), InputSpec(seed=2), 1500)
    assert ds.N == 1500 and ds.theta.shape == (1500, 2)
    np.testing.assert_allclose(ds.theta[:, 0], 0.2 + 0.4 * np.sin(2 * np.pi * ds.t / 500))
    np.testing.assert_allclose(ds.theta0, [0.2, -2.0])
    assert np.all(np.abs(ds.x) <= 1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), de=st.floats(0, 0.5), dz=st.floats(0, 0.5))
def test_dataset_invariants(seed, de, dz):
    rng = np.random.default_rng(seed)
    order = [ModelOrder(1, 0), ModelOrder(1, 1), ModelOrder(2, 2, nk=2), ModelOrder(2, 1)][seed % 4]
    # small coefficients keep the system stable
    specs = [Sinusoid(rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1), rng.uniform(50, 500)) for _ in range(order.n_p)]
    ds = simulate(specs, order, NoiseSpec(de, dz, seed), InputSpec(seed=seed + 1), 300)
    np.testing.assert_array_equal(ds.u, ds.x + ds.zeta)
    np.testing.assert_array_equal(ds.y, ds.w + ds.eta)
    assert np.max(np.abs(ds.eta)) <= de
    assert np.max(np.abs(ds.zeta)) <= dz
    scale = np.max(np.abs(ds.w)) + np.max(np.abs(ds.x)) + 1e-300
    assert np.max(np.abs(arx_residual(ds))) <= 1e-12 * scale


def test_reconstruction_example1():
    ds = simulate(EX1_SPECS, EX1_ORDER, NoiseSpec(0.02, 0.02, 1), InputSpec(seed=2), 1500)
    assert np.max(np.abs(arx_residual(ds))) <= 1e-12 * np.max(np.abs(ds.w))


def test_determinism():
    a = simulate(EX1_SPECS, EX1_ORDER, NoiseSpec(0.1, 0.1, 9), InputSpec(seed=8), 300)
    b = simulate(EX1_SPECS, EX1_ORDER, NoiseSpec(0.1, 0.1, 9), InputSpec(seed=8), 300)
    for name in ("u", "y", "x", "w", "eta", "zeta", "theta"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_dataset_is_read_only():
    ds = simulate(EX1_SPECS, EX1_ORDER, NoiseSpec(), InputSpec(), 10)
    with pytest.raises(ValueError):
        ds.u[0] = 1.0


def test_divergence_cap():
    with pytest.raises(UnstableSimulationError) as err:
        simulate((Constant(-1.5), Constant(1.0)), EX1_ORDER, NoiseSpec(), InputSpec(seed=1), 200)
    assert err.value.t > 1


def _dataset_from(x, zeta, w=None, eta=None):
    n = len(x)
    w = np.ones(n) if w is None else w
    eta = np.zeros(n) if eta is None else eta
    return Dataset(ModelOrder(1, 0), x + zeta, w + eta, x, w, eta, zeta, np.zeros((n, 2)))


def test_snr_constructed_ratio():
    x = np.random.default_rng(0).uniform(-1, 1, 100)
    ds = _dataset_from(x, x / math.sqrt(10))
    assert snr_input(ds) == pytest.approx(10.0, abs=1e-12)


def test_snr_infinite_sentinel():
    ds = _dataset_from(np.ones(5), np.zeros(5))
    assert snr_output(ds) == math.inf
    assert snr_input(ds) == math.inf


def test_delta_for_snr_closed_form():
    assert delta_for_snr(np.ones(50), 10.0) == pytest.approx(math.sqrt(0.3), rel=1e-15)
    assert delta_for_snr(np.ones(50), 0.0) == pytest.approx(math.sqrt(3.0), rel=1e-15)
    assert delta_for_snr(np.ones(50), math.inf) == 0.0
    assert delta_for_snr(np.ones(50), -10.0) == pytest.approx(math.sqrt(30.0))
    with pytest.raises(ValueError):
        delta_for_snr(np.zeros(4), 10.0)


def test_delta_for_snr_monte_carlo():
    rng = np.random.default_rng(5)
    signal = rng.normal(size=200_000)
    for target in (0.0, 20.0, 47.0):
        d = delta_for_snr(signal, target)
        noise = rng.uniform(-d, d, signal.size)
        measured = 10 * math.log10(np.sum(signal**2) / np.sum(noise**2))
        assert measured == pytest.approx(target, abs=0.05)


@pytest.mark.parametrize("snr_x, snr_w", [(47.0, 46.0), (27.0, 26.0)])
def test_example1_measured_snr(snr_x, snr_w):
    ds = simulate_for_snr(EX1_SPECS, EX1_ORDER, snr_x, snr_w, 3, InputSpec(seed=4), 1500)
    assert abs(snr_input(ds) - snr_x) <= 1.0
    assert abs(snr_output(ds) - snr_w) <= 1.0


def test_csv_round_trip(tmp_path):
    ds = simulate(EX1_SPECS, EX1_ORDER, NoiseSpec(0.01, 0.02, 1), InputSpec(seed=2), 50)
    path = tmp_path / "d.csv"
    write_dataset(ds, path)
    assert path.read_text().splitlines()[0] == "t,u,y,x,w,eta,zeta,theta_1,theta_2"
    back = read_dataset(path, EX1_ORDER)
    for name in ("u", "y", "x", "w", "eta", "zeta", "theta"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ds, name))


@pytest.mark.parametrize(
    "mutate, line",
    [
        (lambda rows: rows.__setitem__(3, rows[3] + ",1"), 4),
        (lambda rows: rows.__setitem__(5, rows[5].replace(",", ",x", 1)), 6),
        (lambda rows: rows.__setitem__(2, "7" + rows[2][1:]), 3),
        (lambda rows: rows.__setitem__(0, "t,u,y"), 1),
    ],
)
def test_csv_parse_errors_name_the_line(tmp_path, mutate, line):
    ds = simulate(EX1_SPECS, EX1_ORDER, NoiseSpec(), InputSpec(), 8)
    path = tmp_path / "d.csv"
    write_dataset(ds, path)
    rows = path.read_text().splitlines()
    mutate(rows)
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(DatasetParseError) as err:
        read_dataset(path, EX1_ORDER)
    assert err.value.line == line
    assert f":{line}:" in str(err.value)
