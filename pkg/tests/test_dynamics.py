import numpy as np
import pytest

from kslogistic import dynamics as dy
from kslogistic.equilibria import solve_quasi, solve_symmetric
from kslogistic.model import ModelParams
from kslogistic.smalleig import build_matrix_M


@pytest.fixture
def drift_one():
    return ModelParams(d1=1.0, d2=0.02, chi=1.0, mu=0.25, ubar=2.0, N=1)


@pytest.fixture
def drift_two():
    return ModelParams(d1=1.0, d2=0.005, chi=1.0, mu=1.0, ubar=2.0, N=2)


def test_equally_spaced_velocities_vanish(base):
    for N in (1, 2, 3, 4):
        p = base.replace(N=N, d1=1.0 if N < 3 else 0.4)
        x0 = solve_symmetric(p).locations
        for mode in dy.BETA_MODES:
            vel, q, beta = dy.dae_rhs(x0, p, beta_mode=mode)
            assert np.max(np.abs(vel)) < 1e-10
            assert max(q.residual_norms) < 1e-10


def test_single_spike_drifts_to_centre(drift_one):
    vel = dy.dae_rhs([-0.1], drift_one)[0]
    assert vel[0] > 0
    assert dy.dae_rhs([0.1], drift_one)[0][0] == pytest.approx(-vel[0], rel=1e-10)


def test_asymptotic_beta_route(base):
    p = base.replace(N=2)
    x = np.array([-0.55, 0.48])
    vel, q, beta = dy.dae_rhs(x, p, beta_mode="asymptotic")
    F = dy.balance_F(x, q.v_max, p)
    assert np.allclose(vel, (2 * p.chibar / 3) * p.eps**3 * (2 / q.v_max) * F, rtol=1e-12, atol=0)


def test_unknown_beta_mode(base):
    with pytest.raises(ValueError):
        dy.dae_rhs([0.0], base, beta_mode="other")


def test_balance_single_spike_is_regular_part(base):
    x = 0.3
    F = dy.balance_F([x], [2.0], base)
    from kslogistic import greens
    assert F[0] == pytest.approx(8.0 * float(greens.regular_part_x(x, x, base)), rel=1e-14)


def test_convergence_single_spike(drift_one):
    tr = dy.integrate([-0.1], drift_one, 3000, t_eval=np.linspace(0, 3000, 31), beta_mode="asymptotic")
    assert np.all(np.diff(tr.x[:, 0]) > 0)
    assert abs(tr.x[-1, 0]) < 1e-3


def test_convergence_single_spike_solvability(drift_one):
    tr = dy.integrate([-0.1], drift_one, 500, t_eval=[0, 250, 500])
    assert abs(tr.x[-1, 0]) < 1e-3


def test_convergence_two_spikes_and_mirror(drift_two):
    tr = dy.integrate([-0.6, 0.6], drift_two, 2000, t_eval=np.linspace(0, 2000, 41), beta_mode="asymptotic")
    assert np.max(np.abs(tr.x[:, 0] + tr.x[:, 1])) < 1e-10
    assert np.max(np.abs(tr.x[-1] - np.array([-0.5, 0.5]))) < 1e-3
    assert np.max(np.abs(tr.v_max[:, 0] - tr.v_max[:, 1])) < 1e-10


def test_trajectory_csv(drift_two):
    tr = dy.integrate([-0.6, 0.6], drift_two, 10, t_eval=[0, 5, 10], beta_mode="asymptotic")
    lines = tr.to_csv().strip().splitlines()
    assert lines[0] == "t,x_1,x_2,v_max_1,v_max_2" and len(lines) == 4


def test_collision_guard(base):
    p = base.replace(N=2, d2=0.01)
    with pytest.raises(dy.DAEError, match="5 eps"):
        dy.integrate([-0.2, 0.2], p, 1e4, beta_mode="asymptotic")


def test_M_tilde_equals_M(base):
    for N in (2, 3):
        p = base.replace(N=N, d1=0.9 if N == 2 else 0.6)
        m = build_matrix_M(p)
        Mt = dy.linearize_at_equilibrium(p)
        assert np.max(np.abs(Mt - m.M)) < 1e-8 * np.max(np.abs(m.M))


def _fd_jacobian(p, h=1e-6):
    eq = solve_symmetric(p)
    x0 = eq.locations
    N = x0.size
    J = np.empty((N, N))
    for i in range(N):
        e = np.zeros(N)
        e[i] = h
        Fp = dy.balance_F(x0 + e, solve_quasi(p, x0 + e).v_max, p)
        Fm = dy.balance_F(x0 - e, solve_quasi(p, x0 - e).v_max, p)
        J[:, i] = (Fp - Fm) / (2 * h)
    return J, eq


def test_exact_linearization_matches_fd(base):
    for N in (1, 2, 3):
        p = base.replace(N=N, d1=1.0 if N < 3 else 0.6)
        J, eq = _fd_jacobian(p)
        Mt = dy.linearize_at_equilibrium(p, eq, dvds="exact")
        assert np.max(np.abs(-(3 / (2 * p.chibar)) * Mt - J)) < 1e-6 * np.max(np.abs(J))


@pytest.mark.xfail(strict=True, reason="asymptotic dv/ds in the linearization is 15-40% off the exact slope")
def test_asymptotic_linearization_matches_fd(base):
    for N in (2, 3):
        p = base.replace(N=N, d1=1.0 if N < 3 else 0.6)
        J, eq = _fd_jacobian(p)
        Mt = dy.linearize_at_equilibrium(p, eq)
        assert np.max(np.abs(-(3 / (2 * p.chibar)) * Mt - J)) < 1e-4 * np.max(np.abs(J))


def test_single_spike_linearization_negative(base):
    for d1 in (0.85, 1.0, 2.0, 5.0, 20.0):
        p = base.with_d1(d1).replace(N=1)
        for mode in ("asymptotic", "exact"):
            # velocity Jacobian is (2 chibar/3) eps^3 beta dF/dx = -eps^3 beta M_tilde
            assert dy.linearize_at_equilibrium(p, dvds=mode)[0, 0] > 0
