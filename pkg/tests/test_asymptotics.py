"""Rate matrices, tail weights, information matrices, limit-ratio checks."""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from gstable import asymptotics as asy
from gstable import simulate as sim
from gstable.convolution import Theta
from gstable.errors import CoefficientBoundViolated, RateDegenerate


# ---------------------------------------------------------------------------
# psi
# ---------------------------------------------------------------------------

def test_psi_plateau_and_tail():
    assert asy.psi(1.5, 0, 0.5) == 1.0
    assert abs(asy.psi(1.5, 2, 3.0) - math.log(3.0) ** 2 / 3.0 ** 2.5) < 1e-12
    assert abs(asy.psi(1.5, 2, -3.0) - asy.psi(1.5, 2, 3.0)) == 0.0


def test_psi_c2_at_joints():
    # one-sided second differences at the bridge endpoints, Richardson
    # extrapolated to kill the O(h) one-sided truncation term
    h = 5e-5
    for p in (0, 1, 2, 3):
        for y0 in (1.0, 3.0):
            f = lambda y: asy.psi(1.2, p, y)

            def left(hh):
                return (f(y0 - 3 * hh) - 2 * f(y0 - 2 * hh) + f(y0 - hh)) / hh ** 2

            def right(hh):
                return (f(y0 + hh) - 2 * f(y0 + 2 * hh) + f(y0 + 3 * hh)) / hh ** 2

            L = 2.0 * left(h) - left(2 * h)
            R = 2.0 * right(h) - right(2 * h)
            assert abs(L - R) < 1e-4, (p, y0, L, R)


def test_psi_nonnegative_even():
    y = np.linspace(-6, 6, 401)
    for p in (0, 1, 2, 3):
        v = asy.psi(0.7, p, y)
        assert np.all(v >= 0.0)
        assert np.allclose(v, v[::-1], atol=0)


# ---------------------------------------------------------------------------
# I_cal
# ---------------------------------------------------------------------------

def test_I_cal_large_y_ratio():
    # I^(0,0)/psi0 -> 1 and I^(1,0)/psi0 -> 0, both within 0.15 at y=100
    assert abs(asy.I_cal(1.0, 0, 0, 100.0) / asy.psi(1.0, 0, 100.0) - 1.0) <= 0.15
    assert abs(asy.I_cal(1.0, 1, 0, 100.0) / asy.psi(1.0, 0, 100.0)) <= 0.15


def test_I_cal_even():
    assert abs(asy.I_cal(1.3, 0, 1, 7.0) - asy.I_cal(1.3, 0, 1, -7.0)) < 1e-10


def test_I_cal_envelope():
    # |I^(k,l)| <= C psi^(l) on a small lattice
    for y in (0.0, 2.0, 10.0, 40.0):
        for k in (0, 1, 2):
            val = asy.I_cal(1.2, k, 0, y)
            assert abs(val) <= 10.0 * asy.psi(1.2, 0, y)


# ---------------------------------------------------------------------------
# Psi_closed
# ---------------------------------------------------------------------------

def test_Psi_closed_values():
    assert abs(asy.Psi_closed(1.0, 0, 10.0) - 0.2) < 1e-15
    want = (2 * math.log(10.0) + 2.0) / 10.0
    assert abs(asy.Psi_closed(1.0, 1, 10.0) - want) < 1e-15


def test_Psi_closed_vs_quadrature():
    got = asy.Psi_closed(1.5, 2, 5.0)
    ref = 2.0 * quad(lambda y: asy.psi(1.5, 2, y), 5.0, np.inf,
                     limit=500, epsabs=1e-14, epsrel=1e-13)[0]
    assert abs(got / ref - 1.0) < 1e-8


def test_Psi_closed_domain():
    with pytest.raises(ValueError):
        asy.Psi_closed(1.0, 0, 2.0)
    with pytest.raises(ValueError):
        asy.Psi_closed(1.0, 3, 5.0)


# ---------------------------------------------------------------------------
# rate matrix
# ---------------------------------------------------------------------------

def test_rate_matrix_rejects_small_n():
    with pytest.raises(RateDegenerate):
        asy.rate_matrix(Theta(1, 1, 1), 15)   # n = ceil(e^e) - 1


def test_rate_matrix_entries_and_inverse():
    th = Theta(1, 1, 1)
    rm = asy.rate_matrix(th, 10 ** 4)
    assert abs(rm.M[1, 1] - (math.log(10 ** 4) / 10 ** 4) ** 0.25) < 1e-15
    assert np.max(np.abs(rm.M @ rm.inverse - np.eye(3))) < 1e-12
    assert np.max(np.abs(rm.transpose - rm.M.T)) == 0.0
    # shear term
    want = -(th.delta / (2 * th.alpha)) * (math.log(10 ** 4) - math.log(math.log(10 ** 4)))
    assert abs(rm.M[1, 2] / rm.M[1, 1] - want) < 1e-12


def test_rate_matrix_determinant_identity():
    for th in (Theta(1, 1, 0.6), Theta(2, 0.5, 1.7)):
        for n in (16, 10 ** 5):
            rm = asy.rate_matrix(th, n)
            want = n ** -0.5 * (math.log(n) / n) ** (th.alpha / 2.0)
            assert abs(np.linalg.det(rm.M) / want - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# information matrices
# ---------------------------------------------------------------------------

def test_info_levy_jump_block_determinant():
    th = Theta(1, 1, 1.5)
    I = asy.info_levy(th)
    want = (asy.kappa0(th) / th.delta) ** 2
    assert abs(np.linalg.det(I.jump_block) - want) < 1e-10


def test_info_levy_positive_definite_lattice():
    for s in (0.25, 0.5, 1.0, 2.0, 4.0):
        for d in (0.25, 0.5, 1.0, 2.0, 4.0):
            for a in (0.3, 0.7, 1.1, 1.5, 1.9):
                I = asy.info_levy(Theta(s, d, a))
                assert np.all(np.linalg.eigvalsh(I.M) > 0.0), (s, d, a)


def test_kappa1_log_term_vanishes():
    th = Theta(2.0, 2.0, 1.3)
    from gstable.stable_core import c_alpha, d_alpha_c_alpha
    want = (d_alpha_c_alpha(1.3) / c_alpha(1.3) - math.log(2.0 - 1.3) / 2.0 - 1.0 / 1.3)
    assert abs(asy.kappa1(th) - want) < 1e-14


def test_info_diagonal_singular():
    D = asy.info_diagonal_singular(1.0, 1.0, 1.5)
    assert abs(np.linalg.det(D.jump_block)) < 1e-12
    assert np.trace(D.jump_block) > 0.0
    # scalar prefactor is kappa0
    assert abs(4.0 * D.M[2, 2] - asy.kappa0(Theta(1.0, 1.0, 1.5))) < 1e-14


def test_info_sde_constant_coefficients_reduce_to_levy():
    th = Theta(1.0, 1.0, 1.2)
    model = sim.constant_sde_model()
    path = sim.sample_levy_path(th, 4000, sim.replication_rng(3, 0))
    I_sde = asy.info_sde(th, path, model)
    I_levy = asy.info_levy(th)
    assert np.max(np.abs(I_sde.M - I_levy.M)) < 1e-3 * np.max(np.abs(I_levy.M))


def test_info_sde_riemann_self_convergence():
    # doubling the Riemann grid moves entries by at most C/n (C ~ 1 here)
    th = Theta(1.0, 0.5, 1.2)
    model = sim.default_sde_model()
    tau = sim.TemperingSpec("truncation", eta=1.0)
    path = sim.sample_sde_path(model, th, tau, 4000, 8, sim.replication_rng(4, 0))
    full = asy.info_sde(th, path, model).M
    half = asy.info_sde(th, sim.PathSample(n=2000, values=path.values[::2]), model).M
    quarter = asy.info_sde(th, sim.PathSample(n=1000, values=path.values[::4]), model).M
    C = 10.0
    assert np.max(np.abs(full - half)) <= C / 2000.0
    assert np.max(np.abs(half - quarter)) <= C / 1000.0


def test_info_sde_positive_definite_on_paths():
    th = Theta(1.0, 0.5, 1.2)
    model = sim.default_sde_model()
    tau = sim.TemperingSpec("truncation", eta=1.0)
    for rep in range(3):
        path = sim.sample_sde_path(model, th, tau, 500, 4, sim.replication_rng(5, rep))
        I = asy.info_sde(th, path, model)
        assert np.all(np.linalg.eigvalsh(I.M) > 0.0)


def test_info_sde_bound_violation():
    th = Theta(1.0, 0.5, 1.2)
    model = sim.default_sde_model()
    tau = sim.TemperingSpec("truncation", eta=1.0)
    path = sim.sample_sde_path(model, th, tau, 200, 4, sim.replication_rng(6, 0))
    import dataclasses
    bad = dataclasses.replace(model, c_lower=5.0)   # c(x) <= 3 on any path
    with pytest.raises(CoefficientBoundViolated):
        asy.info_sde(th, path, bad)


# ---------------------------------------------------------------------------
# limit-ratio diagnostics
# ---------------------------------------------------------------------------

def test_tout_ratio_example_alpha15():
    # ratio_1 at n=1e8 is closer to 1 than at n=1e4 (module-level example)
    th = Theta(1, 1, 1.5)
    r4 = asy.prop_tout_check(th, 10 ** 4)
    r8 = asy.prop_tout_check(th, 10 ** 8)
    assert abs(r8[0] - 1.0) < abs(r4[0] - 1.0)


def test_tout_hl_sign():
    # int h l / f has the sign of -kappa1 for large n
    th = Theta(1, 1, 1.5)
    I = asy.tout_integrals(th, 10 ** 6)
    assert math.copysign(1.0, I["hl"]) == math.copysign(1.0, -asy.kappa1(th))


def test_tout_rejects_small_n():
    with pytest.raises(RateDegenerate):
        asy.prop_tout_check(Theta(1, 1, 1.5), 500)
