import numpy as np
import pytest

import hankel_mpc as hm


def numpy_hankel(x, depth):
    q, n = x.shape
    cols = n - depth + 1
    return np.vstack([x[:, i : i + cols] for i in range(depth)])


@pytest.fixture(scope="module")
def plant():
    return hm.builtin_plant("four-tank-style")


@pytest.fixture(scope="module")
def data(plant):
    return hm.generate_data(plant, length=200, input_bound=2.0, seed=3)


def test_simulate_matches_recursion(plant):
    rng = np.random.default_rng(0)
    u = rng.uniform(-1, 1, (plant.inputs, 12))
    x0 = rng.uniform(-1, 1, plant.states)
    states, outputs = hm.simulate(plant, x0, u)
    x = x0.copy()
    for t in range(u.shape[1]):
        assert np.allclose(outputs[:, t], plant.c @ x + plant.d @ u[:, t], atol=1e-14)
        x = plant.a @ x + plant.b @ u[:, t]
    assert np.allclose(states[:, -1], x, atol=1e-14)


def test_hankel_and_excitation(data):
    u, _ = data
    for depth in (1, 4, 9):
        assert np.array_equal(hm.hankel(u, depth), numpy_hankel(u, depth))
    h = numpy_hankel(u, 20)
    assert hm.is_persistently_exciting(u, 20) == (np.linalg.matrix_rank(h) == h.shape[0])
    assert not hm.is_persistently_exciting(u[:, :30], 20)


def test_data_bank_rank(plant, data):
    u, y = data
    bank = hm.DataBank(u, y, horizon=15, window=hm.lag(plant), order_bound=4)
    assert bank.z_full_row_rank
    assert bank.xi_dim == 8
    assert bank.warning is None


def test_synthesis_and_closed_loop(plant, data):
    u, y = data
    bank = hm.DataBank(u, y, horizon=15, window=2)
    q, r = np.eye(2), 5e-3 * np.eye(2)
    ti = hm.synthesize(bank, q, r)
    assert ti.gamma > 0
    assert np.allclose(ti.p, ti.p.T)
    assert np.linalg.eigvalsh(ti.p).min() > 0

    u_s, y_s = np.array([1.0, 1.0]), np.array([0.65, 0.77])
    lo, hi = -2 * np.ones(2), 2 * np.ones(2)
    beta = hm.terminal_set_radius(ti.p, u_s, y_s, 2, lo, hi, -np.inf * np.ones(2),
                                  np.inf * np.ones(2))
    assert beta > 0
    trace = hm.run_closed_loop(plant, np.zeros(4), bank, q, r, u_s, y_s, lo, hi,
                               terminal_p=ti.p, mode="cost-only", steps=80)
    assert trace["failed_at"] is None
    assert np.all(np.abs(trace["u"]) <= 2 + 1e-9)
    assert np.all(np.abs(trace["y"][:, -1] - y_s) <= 5e-3 * np.abs(y_s))


def test_synthesis_failure_raises(data):
    u, y = data
    bank = hm.DataBank(u, y, horizon=15, window=2)
    with pytest.raises(RuntimeError):
        hm.synthesize(bank, np.eye(2), 5e-3 * np.eye(2), gamma=1e-6)
