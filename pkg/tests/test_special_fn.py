import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elliptic_dyson.errors import PoleProximityError
from elliptic_dyson.special_fn import (
    ModularParam,
    ProcessClock,
    a_func,
    dedekind_eta,
    eisenstein_e2,
    eta1,
    log_dedekind_eta,
    theta,
    theta1_dv,
    theta1_dv2,
    weierstrass_p,
    weierstrass_zeta,
)

mp.mp.dps = 30

# package kind -> mpmath jtheta index; mpmath uses argument pi*v and nome q
MP_KIND = {0: 4, 1: 1, 2: 2, 3: 3}


def mp_theta(kind, v, tau, deriv=0):
    q = mp.exp(1j * mp.pi * mp.mpc(tau))
    return complex(mp.pi**deriv * mp.jtheta(MP_KIND[kind], mp.pi * mp.mpc(v), q, deriv))


def rel(a, b):
    return abs(a - b) / abs(b)


# --------------------------------------------------------------------------
# theta values


@pytest.mark.parametrize("kind", range(4))
@pytest.mark.parametrize(
    "tau",
    [1j, 0.2 + 0.7j, -0.45 + 0.55j, 0.3 + 2.5j, 0.05j, 0.1 + 0.02j],
)
def test_theta_matches_mpmath(kind, tau):
    # keep |Re tau| < 1 so that mpmath's principal q^(1/4) agrees with exp(i pi tau / 4)
    for v in (0.0, 0.31 + 0.1j, -0.77, 0.5 - 0.17j):
        if kind == 1 and v == 0.0:
            continue
        expect = mp_theta(kind, v, tau)
        got = theta(kind, v, tau)
        assert rel(got, expect) < 1e-11


def test_theta1_at_zero_vanishes():
    assert abs(theta(1, 0.0, 1j)) < 1e-15


def test_theta3_matches_brute_force_sum():
    mp.mp.dps = 50
    q = mp.exp(-mp.pi)
    brute = mp.fsum(q ** (n * n) for n in range(-200, 201))
    mp.mp.dps = 30
    assert rel(theta(3, 0.0, 1j), complex(brute)) < 1e-12


def test_theta1_asymptotics_at_large_im_tau():
    expect = 2 * math.exp(-10 * math.pi / 4) * math.sin(0.3 * math.pi)
    assert rel(theta(1, 0.3, 10j), expect) < 1e-6


def test_vectorised_evaluation_matches_scalar():
    v = np.linspace(-0.4, 0.9, 7) + 0.05j
    vec = theta(2, v, 0.3 + 0.4j)
    for vi, val in zip(v, vec):
        assert rel(val, theta(2, complex(vi), 0.3 + 0.4j)) < 1e-14


@settings(max_examples=100, deadline=None)
@given(
    vr=st.floats(-1, 1),
    vi=st.floats(-0.3, 0.3),
    tr=st.floats(-0.5, 0.5),
    ti=st.floats(0.05, 5.0),
)
def test_quasi_periodicity_theta1(vr, vi, tr, ti):
    v, tau = complex(vr, vi), complex(tr, ti)
    base = theta(1, v, tau)
    if abs(base) < 1e-8:
        return
    assert rel(theta(1, v + 1, tau), -base) < 1e-10
    expect = -cmath.exp(-1j * math.pi * (2 * v + tau)) * base
    assert rel(theta(1, v + tau, tau), expect) < 1e-10


@settings(max_examples=40, deadline=None)
@given(v=st.floats(-0.9, 0.9), y=st.floats(0.05, 5.0))
def test_imaginary_transformation_theta3(v, y):
    tau = 1j * y
    lhs = theta(3, v, tau)
    rhs = cmath.exp(0.25j * math.pi) / cmath.sqrt(tau) * cmath.exp(-1j * math.pi * v * v / tau) * theta(3, v / tau, -1 / tau)
    assert rel(lhs, rhs) < 1e-10


def test_cross_kind_shift_relations():
    tau = 0.15 + 0.6j
    for v in (0.1, 0.37 + 0.2j, -0.6):
        assert rel(theta(2, v, tau), theta(1, v + 0.5, tau)) < 1e-12
        assert rel(theta(3, v, tau), theta(0, v + 0.5, tau)) < 1e-12


def test_positivity_on_imaginary_axis():
    x = np.linspace(0.01, 0.99, 99)
    for y in (0.05, 0.4, 3.0):
        assert np.all(np.real(theta(1, x, 1j * y)) > 0)
        assert np.all(np.real(theta(0, np.linspace(-2, 2, 81), 1j * y)) > 0)


def test_errors():
    with pytest.raises(ValueError):
        theta(1, 0.2, -1j)
    with pytest.raises(ValueError):
        theta(1, 0.2, 0.5)
    with pytest.raises(ValueError):
        ModularParam(complex(math.nan, 1.0))


# --------------------------------------------------------------------------
# derivatives


def test_theta1_dv_vanishes_at_half():
    assert abs(theta1_dv(0.5, 1j)) < 1e-14


def test_theta1_dv_finite_difference():
    h = 1e-5
    fd = (theta(1, 0.2 + h, 0.8j) - theta(1, 0.2 - h, 0.8j)) / (2 * h)
    assert abs(theta1_dv(0.2, 0.8j) - fd) < 1e-8


def test_theta1_dv2_heat_equation():
    h = 1e-5
    dtau = (theta(1, 0.2, 0.8j + h) - theta(1, 0.2, 0.8j - h)) / (2 * h)
    assert rel(theta1_dv2(0.2, 0.8j), 4j * math.pi * dtau) < 1e-7


def test_derivatives_match_mpmath():
    for tau in (0.8j, 0.3 + 0.1j):
        assert rel(theta1_dv(0.27, tau), mp_theta(1, 0.27, tau, 1)) < 1e-10
        assert rel(theta1_dv2(0.27, tau), mp_theta(1, 0.27, tau, 2)) < 1e-10


# --------------------------------------------------------------------------
# A-function


def mp_a_func(cal_n, t_rem, x, r):
    tau = 1j * cal_n * t_rem / (2 * math.pi * r * r)
    v = x / (2 * math.pi * r)
    return (mp_theta(1, v, tau, 1) / mp_theta(1, v, tau)).real / (2 * math.pi * r)


@pytest.mark.parametrize("cal_n,t_rem,x,r", [(3, 0.4, 0.9, 1.2), (2, 0.05, 2.0, 1.0), (7, 2.0, -4.1, 0.7), (1, 50.0, 1.3, 1.0)])
def test_a_func_matches_mpmath(cal_n, t_rem, x, r):
    assert rel(a_func(cal_n, t_rem, x, r), mp_a_func(cal_n, t_rem, x, r)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(
    cal_n=st.integers(1, 8),
    t_rem=st.floats(1e-3, 10.0),
    x=st.floats(0.01, 6.2),
    r=st.floats(0.5, 2.0),
)
def test_a_func_odd_and_periodic(cal_n, t_rem, x, r):
    x = x * r
    a = a_func(cal_n, t_rem, x, r)
    assert abs(a_func(cal_n, t_rem, -x, r) + a) <= 1e-10 * max(1.0, abs(a))
    assert abs(a_func(cal_n, t_rem, x + 2 * math.pi * r, r) - a) <= 1e-10 * max(1.0, abs(a))


def test_a_func_simple_pole():
    r = 1.3
    x = 1e-6 * r
    assert abs(a_func(4, 0.5, x, r) * x - 1) < 1e-4


def test_a_func_trigonometric_limit():
    r = 0.9
    x = 0.7 * r
    assert abs(a_func(3, 1e6, x, r) - 1 / (2 * r) / math.tan(x / (2 * r))) < 1e-8


def test_a_func_pinning_asymptotics():
    r, cal_n = 1.0, 3
    t_rem = 1e-4 * r * r / cal_n
    for x in (0.5, 2.0, 3.5, 5.5):
        approx = -(x - math.pi * r) / (cal_n * t_rem)
        assert rel(a_func(cal_n, t_rem, x, r), approx) < 1e-3


def test_a_func_pole_guard():
    with pytest.raises(PoleProximityError):
        a_func(2, 0.3, 0.0)
    with pytest.raises(PoleProximityError):
        a_func(2, 0.3, 2 * math.pi)
    with pytest.raises(ValueError):
        a_func(2, 0.0, 1.0)


# --------------------------------------------------------------------------
# eta, E2, eta^1


def test_dedekind_eta_product_oracle():
    mp.mp.dps = 50
    q2 = mp.exp(-2 * mp.pi)
    prod = mp.exp(-mp.pi / 12) * mp.nprod(lambda n: 1 - q2**n, [1, mp.inf])
    mp.mp.dps = 30
    assert rel(dedekind_eta(1j), complex(prod)) < 1e-12


@pytest.mark.parametrize("tau", [0.1 + 0.9j, 0.02j, -0.3 + 0.05j, 3j])
def test_dedekind_eta_matches_qp(tau):
    expect = mp.exp(1j * mp.pi * tau / 12) * mp.qp(mp.exp(2j * mp.pi * tau))
    assert rel(dedekind_eta(tau), complex(expect)) < 1e-11


def test_eta_modular_transformation():
    tau = 0.2 + 0.3j
    lhs = log_dedekind_eta(-1 / tau)
    rhs = log_dedekind_eta(tau) + 0.5 * cmath.log(-1j * tau)
    assert abs(cmath.exp(lhs - rhs) - 1) < 1e-12


def test_eta1_large_time_limit():
    r = 1.7
    assert abs(eta1(4, 1e4, r) - math.pi / (12 * r)) < 1e-12


def test_eta1_brute_force_at_q_half():
    # q = exp(-cal_n t_rem / 2 r^2) = 1/2
    r, cal_n = 1.0, 2
    t_rem = 2 * r * r * math.log(2) / cal_n
    q2 = 0.25
    s = math.fsum(n * q2**n / (1 - q2**n) for n in range(1, 10001))
    expect = math.pi / r * (1 / 12 - 2 * s)
    assert abs(eta1(cal_n, t_rem, r) - expect) < 1e-13


def test_log_eta_derivative_equals_eta1():
    # d/dt log eta(tau_B(t)) = (2N-1) eta^1_{2N-1}(t* - t) / (2 pi r)
    n, r, t_star = 3, 1.1, 1.0
    cal_n = 2 * n - 1
    clock = ProcessClock(t_star, r)

    def log_eta(t):
        return log_dedekind_eta(clock.tau(cal_n, t)).real

    t, h = 0.4, 1e-5
    fd = (log_eta(t + h) - log_eta(t - h)) / (2 * h)
    expect = cal_n * eta1(cal_n, t_star - t, r) / (2 * math.pi * r)
    assert abs(fd - expect) < 1e-6


def test_e2_quasi_modular():
    tau = 0.1 + 0.8j
    lhs = eisenstein_e2(-1 / tau)
    rhs = tau * tau * eisenstein_e2(tau) - 6j * tau / math.pi
    assert rel(lhs, rhs) < 1e-12


# --------------------------------------------------------------------------
# Weierstrass functions


def mp_wp(z, w1, w3):
    q = mp.exp(1j * mp.pi * mp.mpc(w3 / w1))
    x = mp.pi * mp.mpc(z) / (2 * w1)
    t3, t4 = mp.jtheta(3, 0, q), mp.jtheta(4, 0, q)
    e1 = (mp.pi / (2 * w1)) ** 2 * (t3**4 + t4**4) / 3
    return complex(e1 + (mp.pi * t3 * t4 * mp.jtheta(2, x, q) / (2 * w1 * mp.jtheta(1, x, q))) ** 2)


@pytest.mark.parametrize("z", [0.4 + 0.3j, 1.1 - 0.2j, 0.05 + 0.01j, -2.0 + 0.7j])
def test_weierstrass_p_theta_oracle(z):
    assert abs(weierstrass_p(z, 1.3, 0.8j) - mp_wp(z, 1.3, 0.8j)) < 1e-10 * max(1.0, abs(mp_wp(z, 1.3, 0.8j)))


def test_weierstrass_parity():
    rng = np.random.default_rng(7)
    for _ in range(20):
        z = complex(rng.uniform(-1, 1), rng.uniform(-0.6, 0.6))
        assert abs(weierstrass_p(-z, 1.0, 0.7j) - weierstrass_p(z, 1.0, 0.7j)) < 1e-10 * abs(weierstrass_p(z, 1.0, 0.7j))
        assert abs(weierstrass_zeta(-z, 1.0, 0.7j) + weierstrass_zeta(z, 1.0, 0.7j)) < 1e-10 * abs(weierstrass_zeta(z, 1.0, 0.7j))


def test_zeta_addition_formula():
    rng = np.random.default_rng(11)
    w1, w3 = 1.0, 0.9j
    for _ in range(20):
        z = complex(rng.uniform(-0.8, 0.8), rng.uniform(-0.7, 0.7))
        u = complex(rng.uniform(-0.8, 0.8), rng.uniform(-0.7, 0.7))
        lhs = (weierstrass_zeta(z + u, w1, w3) - weierstrass_zeta(z, w1, w3) - weierstrass_zeta(u, w1, w3)) ** 2
        rhs = weierstrass_p(z + u, w1, w3) + weierstrass_p(z, w1, w3) + weierstrass_p(u, w1, w3)
        assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(rhs))


def test_zeta_derivative_is_minus_p():
    z, h = 0.3 + 0.2j, 1e-5
    fd = (weierstrass_zeta(z + h, 1.0, 0.7j) - weierstrass_zeta(z - h, 1.0, 0.7j)) / (2 * h)
    assert abs(fd + weierstrass_p(z, 1.0, 0.7j)) < 1e-6


def test_zeta_and_a_function():
    # zeta(x) - eta^1 x / (pi r) = A(x) for half periods (pi r, i cal_n t_rem / 2r)
    cal_n, t_rem, r = 3, 0.6, 1.2
    w1, w3 = math.pi * r, 1j * cal_n * t_rem / (2 * r)
    e1 = eta1(cal_n, t_rem, r)
    for x in (0.3, 1.7, 3.9, 6.0):
        lhs = weierstrass_zeta(x, w1, w3).real - e1 * x / (math.pi * r)
        assert abs(lhs - a_func(cal_n, t_rem, x, r)) < 1e-8


def test_weierstrass_lattice_point_rejected():
    with pytest.raises(PoleProximityError):
        weierstrass_p(2.0, 1.0, 0.5j)
