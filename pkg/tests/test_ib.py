import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcmswim import fluid, ib
from hcmswim.errors import ConfigurationError, GeometryError

CFG = fluid.SolverConfig()


@pytest.mark.parametrize("name", sorted(ib.KERNELS))
@given(r=st.floats(-0.5, 0.5))
def test_kernel_moments(name, r):
    k = ib.KERNELS[name]
    j = np.arange(-3, 4)
    w = k(j - r)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-12)
    assert np.all(w >= 0)
    # the cosine kernel matches the first moment only approximately
    assert abs(np.sum((j - r) * w)) <= (1e-12 if name == "roma3" else 0.022)


def box(n=64, size=5.0, periodic=False):
    return fluid.make_grid(n, n, size, size, periodic=periodic)


def test_build_link_geometry():
    g = box()
    link = ib.build_link(1.0, (2.5, 2.5), g)
    assert link.n_markers == round(1 / g.h) + 1
    assert 0.5 * g.h <= link.ds <= 1.5 * g.h
    with pytest.raises(ConfigurationError):
        ib.build_link(1.0, (1.5, 2.5), g)
    with pytest.raises(ConfigurationError):
        ib.CouplingConfig(kernel="gauss")


def test_link_kinematics_rigid():
    g = box()
    link = ib.build_link(1.0, (2.5, 2.5), g)
    X, U = ib.link_kinematics(link, math.pi / 2, 2.0)
    assert np.allclose(X[-1], [2.5, 3.5])
    # tip moves at omega * L, perpendicular to the link (counter-clockwise)
    assert np.allclose(U[-1], [-2.0, 0.0])
    assert np.allclose(np.sum((X - link.pivot) * U, axis=1), 0.0)


@settings(deadline=None, max_examples=20)
@given(theta=st.floats(-1.2, 1.2), seed=st.integers(0, 2**20))
def test_spread_interp_adjoint(theta, seed):
    g = box()
    link = ib.build_link(1.0, (2.5, 2.5), g)
    X, _ = ib.link_kinematics(link, theta, 0.0)
    tr = ib.Transfer(X, g)
    r = np.random.default_rng(seed)
    u, v = r.normal(size=g.u_shape), r.normal(size=g.v_shape)
    F = r.normal(size=X.shape)
    fu, fv = tr.spread(F)
    lhs = g.h**2 * (np.sum(fu * u) + np.sum(fv * v))
    assert lhs == pytest.approx(np.sum(F * tr.interp(u, v)), rel=1e-10)


def test_spread_preserves_total_force():
    g = box()
    link = ib.build_link(1.0, (2.5, 2.5), g)
    X, _ = ib.link_kinematics(link, 0.3, 0.0)
    F = np.tile([0.7, -0.2], (X.shape[0], 1))
    fu, fv = ib.Transfer(X, g).spread(F)
    assert g.h**2 * fu.sum() == pytest.approx(F[:, 0].sum(), rel=1e-12)
    assert g.h**2 * fv.sum() == pytest.approx(F[:, 1].sum(), rel=1e-12)


def test_interp_reproduces_linear_field():
    g = box()
    xu, yu = g.u_coords()
    xv, yv = g.v_coords()
    X = np.array([[2.31, 2.77], [3.05, 1.93]])
    exact = np.column_stack([0.5 + 2 * X[:, 0] - X[:, 1], -1 + X[:, 0] + 3 * X[:, 1]])
    u, v = 0.5 + 2 * xu - yu, -1 + xv + 3 * yv
    assert np.allclose(ib.Transfer(X, g, "roma3").interp(u, v), exact, atol=1e-12)
    # first-moment defect of the cosine kernel: at most 0.022 h per unit gradient and axis
    err = np.abs(ib.Transfer(X, g, "peskin4").interp(u, v) - exact)
    assert np.all(err <= 0.022 * g.h * np.array([3.0, 4.0]))


def test_marker_outside_domain():
    g = box()
    with pytest.raises(GeometryError):
        ib.Transfer(np.array([[0.05, 2.5]]), g)


def test_stationary_link_feels_nothing():
    g = box()
    link = ib.build_link(1.0, (2.5, 2.5), g)
    X, U = ib.link_kinematics(link, 0.4, 0.0)
    s = fluid.zero_state(g, 100.0)
    for _ in range(5):
        s, mf = ib.ib_solve(s, g, CFG, link, X, U, 0.01)
    assert np.max(np.abs(mf.forces)) <= 1e-8


def swing(n=64, steps=20, omega=1.0):
    g = box(n)
    link = ib.build_link(1.0, (2.5, 2.5), g)
    s = fluid.zero_state(g, 200.0)
    dt = 0.2 * g.h / omega
    guess = None
    out = []
    for k in range(steps):
        theta = omega * k * dt
        X, U = ib.link_kinematics(link, theta, omega)
        s, mf = ib.ib_solve(s, g, CFG, link, X, U, dt, guess=guess)
        guess = mf.forces
        out.append((s, mf, X, U))
    return g, link, out


def test_no_slip_and_divergence_after_solve():
    g, link, out = swing()
    tr_tol = 1e-3
    for s, mf, X, U in out:
        tr = ib.Transfer(X, g)
        slip = np.max(np.abs(tr.interp(s.u, s.v) - U))
        assert slip <= tr_tol and slip == pytest.approx(mf.slip_residual, abs=1e-12)
        assert np.max(np.abs(fluid.divergence(s, g))) <= 1e-8


def test_rotating_link_needs_positive_torque():
    # an actuator driving counter-clockwise rotation must push with a counter-clockwise torque
    g, link, out = swing()
    _, mf, _, _ = out[-1]
    assert ib.net_torque(mf, link.pivot) > 0


def test_force_reductions():
    f = np.array([[-1.0, 0.5], [-2.0, -0.5]])
    assert ib.net_thrust(f, (1.0, 0.0)) == 3.0
    assert ib.net_lateral(f, (1.0, 0.0)) == 0.0
    X = np.array([[1.0, 0.0], [2.0, 0.0]])
    # r x (-f): (1)(-0.5) + (2)(0.5) = 0.5
    assert ib.net_torque(f, (0.0, 0.0), X) == pytest.approx(0.5)
