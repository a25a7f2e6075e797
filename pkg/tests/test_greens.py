import math

import numpy as np
import pytest
from scipy.integrate import quad

from kslogistic import greens
from kslogistic.greens import ResonantError


@pytest.fixture
def p1(base):
    return base.replace(N=1)


def test_integral_is_one_over_ubar(p1):
    for xk in (-0.7, 0.0, 0.35):
        val = quad(lambda x: float(greens.helmholtz_green(x, xk, p1)), -1, 1, points=[xk],
                   epsabs=1e-13, epsrel=1e-13)[0]
        assert abs(val - 1 / p1.ubar) < 1e-8


def test_reciprocity(p1):
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-1, 1, (2, 20))
    assert np.max(np.abs(greens.helmholtz_green(x, y, p1) - greens.helmholtz_green(y, x, p1))) < 1e-12


def test_centre_value_and_a_g(p1):
    ag = greens.a_g(p1, 1)
    assert float(greens.helmholtz_green(0.0, 0.0, p1)) == pytest.approx(ag, rel=1e-13)
    assert ag == pytest.approx(0.0558173, abs=1e-7)
    sc = greens.greens_scalars(p1)
    assert ag * (sc.e + 2 * sc.f).real == pytest.approx(math.sqrt(p1.mu / (p1.d1 * p1.ubar)), rel=1e-12)


def test_jumps(base):
    p = base.replace(N=1, d1=0.7)
    xk = 0.3
    jump = greens.green_x(xk, xk, p, side=1) - greens.green_x(xk, xk, p, side=-1)
    assert jump == pytest.approx(p.mu / p.d1, rel=1e-12)
    gjump = greens.dipole_green(xk, xk, p, side=1) - greens.dipole_green(xk, xk, p, side=-1)
    assert (p.d1 / p.mu) * gjump == pytest.approx(1.0, abs=1e-10)
    # continuity of G and of g_x across the source
    h = 1e-9
    assert abs(greens.helmholtz_green(xk + h, xk, p) - greens.helmholtz_green(xk - h, xk, p)) < 1e-8
    assert abs(greens.dipole_green_x(xk + h, xk, p) - greens.dipole_green_x(xk - h, xk, p)) < 1e-7


def test_dipole_is_minus_source_derivative(base):
    p = base.replace(N=1, d1=0.6)
    rng = np.random.default_rng(3)
    h = 1e-6
    for x, xk in rng.uniform(-0.95, 0.95, (10, 2)):
        if abs(x - xk) < 1e-2:
            continue
        fd = (greens.helmholtz_green(x, xk + h, p) - greens.helmholtz_green(x, xk - h, p)) / (2 * h)
        assert abs(greens.dipole_green(x, xk, p) + fd) < 1e-6


def test_dipole_average_is_regular_part_derivative(base):
    p = base.replace(N=1, d1=0.6)
    h = 1e-6
    for xk in (-0.4, 0.1, 0.55):
        fd = (greens.regular_part(xk, xk + h, p) - greens.regular_part(xk, xk - h, p)) / (2 * h)
        assert abs(greens.dipole_green(xk, xk, p, side=0) + fd) < 1e-7


def test_regular_part_smooth(base):
    p = base.replace(d1=0.8)
    xk, h = 0.2, 1e-7
    left = greens.regular_part_x(xk - h, xk, p)
    right = greens.regular_part_x(xk + h, xk, p)
    assert abs(left - right) < 1e-5
    assert float(greens.regular_part_x(0.0, 0.0, p)) == pytest.approx(0.0, abs=1e-15)


def test_resonant_rejected(base):
    p = base.replace(d1=base.mu * base.ubar / (math.pi / 2) ** 2)  # theta = pi/2, sin 2 theta = 0
    with pytest.raises(ResonantError):
        greens.helmholtz_green(0.0, 0.0, p)
    with pytest.raises(ResonantError):
        greens.assemble_matrices(base.replace(N=2, d1=8 / math.pi**2))


def test_scalar_identities(base):
    for d1 in (0.3, 0.7, 1.4, 3.0):
        sc = greens.greens_scalars(base.replace(N=3, d1=d1))
        assert abs(sc.d - (sc.e + sc.f)) < 1e-12 * abs(sc.d)
        assert abs(sc.d_g - (sc.e_g - sc.f_g)) < 1e-12 * abs(sc.d_g)
        assert sc.theta_lambda == pytest.approx(sc.theta, rel=1e-15)


def test_sigma_matches_dense(base):
    for N in (2, 3, 5):
        m = greens.assemble_matrices(base.replace(N=N, d1=0.9 if N != 2 else 1.1))
        dense = np.sort(np.linalg.eigvalsh(m.Gmat))
        assert np.max(np.abs(np.sort(m.sigma.real) - dense)) < 1e-10
        assert np.allclose(m.Gmat.sum(axis=1), m.a_g, rtol=1e-12, atol=0)
        assert np.max(np.abs(np.sort(m.kappa.real) - greens.dense_spectrum(m.D.real))) < 1e-10


def test_xi_one_and_identity():
    for th in (0.3, 1.1, 2.5):
        for N in (2, 4):
            assert greens.xi_spectrum(th, N)[0] == pytest.approx(2 / math.tan(th / N), rel=1e-14)
            ph = 2 * th / N
            assert 2 / math.tan(ph) + 2 / math.sin(ph) == pytest.approx(2 / math.tan(th / N), rel=1e-12)


def test_xi_ordering():
    for N in (2, 3, 4, 6):
        for th in np.linspace(0.05, N * math.pi / 2 * 0.999, 60):
            xi = greens.xi_spectrum(th, N)
            assert np.all(np.diff(xi[1:]) > 0)
            assert xi[-1] < xi[0]


def test_eigenvectors_orthonormal_and_reconstruct(base):
    for N in (2, 3, 6):
        m = greens.assemble_matrices(base.replace(N=N, d1=0.7 if N != 2 else 1.0))
        for Q, A, lam in ((m.Q, m.D.real, m.kappa.real), (m.Qg, m.Dg, m.xi)):
            assert np.max(np.abs(Q.T @ Q - np.eye(N))) < 1e-12
            assert np.max(np.abs(Q @ np.diag(lam) @ Q.T - A)) < 1e-10 * np.max(np.abs(A))


def test_xi_hat_forms_agree():
    for th in np.linspace(0.1, 5.0, 25):
        for N in (2, 3, 5, 8):
            if th >= N * math.pi / 2:
                continue
            assert np.max(np.abs(greens.xi_hat(th, N, 1) - greens.xi_hat(th, N, 2))) < 1e-12 * max(
                1.0, np.max(np.abs(greens.xi_hat(th, N, 1))))


def test_a_g_positivity_limit(base):
    for N in (1, 2, 3):
        d1p = 4 * base.mu * base.ubar / (N * N * math.pi**2)
        vals = [greens.a_g(base.replace(d1=d1p * (1 + t)), N) for t in (1e-1, 1e-3, 1e-6)]
        assert all(v > 0 for v in vals) and vals[0] > vals[1] > vals[2]
        assert vals[-1] < 1e-5
        assert greens.a_g(base.replace(d1=d1p * 0.99), N) < 0


def test_single_spike_matrices(base):
    m = greens.assemble_matrices(base.replace(N=1))
    assert m.Gmat.shape == (1, 1) and m.Gmat[0, 0] == pytest.approx(m.a_g, rel=1e-13)
    assert m.P[0, 0] == 0.0 and m.Pg[0, 0] == 0.0


def test_closed_form_matches_direct(base):
    for N in (2, 3, 5):
        p = base.replace(N=N, d1=0.8)
        m = greens.assemble_matrices(p)
        d = greens.direct_matrices(p, m.locations)
        for a, b in ((m.Gmat, d["G"]), (m.P, d["P"]), (m.Pg, d["Pg"]), (m.Gg, d["Gg"])):
            assert np.max(np.abs(a - b)) < 1e-12 * max(1.0, np.max(np.abs(b)))


def test_unequal_locations_rejected(base):
    with pytest.raises(ValueError):
        greens.assemble_matrices(base.replace(N=2), locations=[-0.6, 0.6])
