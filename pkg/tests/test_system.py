import numpy as np
import pytest

from stlrepair.system import SystemModel, euler, linearize


def double_integrator(dt=0.2):
    return SystemModel(
        states=["p", "v"], inputs=["a"],
        A=[[1, dt], [0, 1]], B=[[dt * dt / 2], [dt]],
        delta_t=dt, x0=[0, 0])


def test_step_matches_hand_computation():
    m = double_integrator()
    x1 = m.step([0.0, 1.0], [2.0])
    assert x1 == pytest.approx([0.2 * 1.0 + 0.02 * 2.0, 1.0 + 0.2 * 2.0])


def test_simulate_constant_acceleration():
    m = double_integrator()
    u = np.full((10, 1), 2.0)
    tr = m.simulate([-1.0, 0.0], u)
    # p_k = -1 + 0.04 k^2 under exact zero-order-hold integration
    for k in range(10):
        assert tr.data["p"][k] == pytest.approx(-1 + 0.04 * k * k)
    assert tr.data["a"][3] == 2.0


def test_simulate_csv_roundtrip(tmp_path):
    from stlrepair.stl import Trace
    m = double_integrator()
    tr = m.simulate([0, 0], np.ones((5, 1)))
    path = tmp_path / "run.csv"
    tr.to_csv(path)
    back = Trace.from_csv(path)
    assert back.delta_t == pytest.approx(tr.delta_t)
    for v in tr.data:
        assert back.data[v] == pytest.approx(tr.data[v])


def test_linearize_recovers_affine_map():
    m = double_integrator()

    def f(x, u, w):
        return m.step(x, u, w)

    lin = linearize(f, [1.0, 2.0], [0.5], [], m.delta_t, ["p", "v"], ["a"])
    assert lin.A == pytest.approx(m.A, abs=1e-7)
    assert lin.B == pytest.approx(m.B, abs=1e-7)
    assert lin.c == pytest.approx(np.zeros(2), abs=1e-7)


def test_linearize_unicycle_jacobian():
    # kinematic car: (x, y, theta, v), inputs (accel, steer)
    dt = 0.1

    def field(x, u, w):
        px, py, th, v = x
        acc, om = u
        return np.array([v * np.cos(th), v * np.sin(th), om, acc])

    f = euler(field, dt)
    x0 = np.array([0.0, 0.0, np.pi / 2, 1.0])
    u0 = np.array([0.0, 0.0])
    lin = linearize(f, x0, u0, [], dt,
                    ["px", "py", "th", "v"], ["acc", "om"])
    # hand-derived Jacobian of the Euler map at theta=pi/2, v=1
    A = np.eye(4)
    A[0, 2] += dt * (-1.0)   # d(v cos th)/dth = -v sin th = -1
    A[0, 3] += dt * 0.0      # cos th = 0
    A[1, 2] += dt * 0.0      # v cos th = 0
    A[1, 3] += dt * 1.0      # sin th = 1
    assert lin.A == pytest.approx(A, abs=1e-6)
    B = np.zeros((4, 2))
    B[2, 1] = dt
    B[3, 0] = dt
    assert lin.B == pytest.approx(B, abs=1e-6)
    # exact at the linearization point
    assert lin.step(x0, u0) == pytest.approx(f(x0, u0, []))


def test_output_map():
    m = SystemModel(states=["z"], inputs=["u"], outputs=["y"],
                    A=[[1]], B=[[1]], C=[[2]], D=[[0]], d=[1],
                    delta_t=1.0)
    assert m.output([3.0], [0.0]) == pytest.approx([7.0])
    tr = m.simulate([1.0], np.zeros((3, 1)))
    assert tr.data["y"] == pytest.approx([3.0, 3.0, 3.0])


def test_bounds_and_kinds_defaults():
    m = double_integrator()
    assert m.bounds["p"] == (-1e3, 1e3)
    assert m.kinds["a"] == "continuous"
    m2 = SystemModel(states=["s"], inputs=["b"], A=[[1]], B=[[1]],
                     kinds={"b": "binary"}, delta_t=1.0)
    assert m2.kinds["b"] == "binary"
