import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elliptic_dyson.kernels import (
    BoundaryCond,
    KernelContext,
    corr_function,
    corr_kernel,
    density,
    fredholm_det_discretized,
    fredholm_gap,
    gauss_legendre,
    kernel_bes,
    kernel_eq_trig,
    kernel_rational,
    kernel_trig,
    p_half_line,
    p_interval,
    phi_half_line,
    rho_eq_trig,
    trig_coeffs,
    trig_det,
    trig_det_factorized,
)

PI = math.pi
NODES, WEIGHTS = gauss_legendre(0.0, PI, 96)


# --------------------------------------------------------------------------
# single-particle interval densities


@pytest.mark.parametrize("code", ["aa", "ar", "ra", "rr"])
def test_images_agree_with_spectral(code):
    y = np.linspace(0.05, PI - 0.05, 7)
    for t in (0.3, 1.0, 2.5):
        a = p_interval(code, t, y[:, None], y[None, :], method="images")
        b = p_interval(code, t, y[:, None], y[None, :], method="spectral")
        np.testing.assert_allclose(a, b, atol=1e-13)


def test_reflecting_density_normalized():
    for t in (0.01, 0.4, 5.0):
        mass = np.dot(WEIGHTS, p_interval("rr", t, NODES, 1.1))
        assert mass == pytest.approx(1.0, abs=1e-12)


def test_absorbing_survival_large_time():
    # survival from u in [0, pi] with two absorbing walls: (4/pi) e^{-t/2} sin u
    t, u = 10.0, 1.3
    surv = np.dot(WEIGHTS, p_interval("aa", t, NODES, u))
    assert surv == pytest.approx(4 / PI * math.exp(-t / 2) * math.sin(u), rel=1e-6)


def test_absorbing_vanishes_at_walls_and_reflecting_flat():
    assert abs(p_interval("aa", 0.5, 0.0, 1.0)) < 1e-15
    assert abs(p_interval("ar", 0.5, 0.0, 1.0)) < 1e-15
    eps = 1e-6
    slope = (p_interval("rr", 0.5, PI - eps, 1.0) - p_interval("rr", 0.5, PI, 1.0)) / eps
    assert abs(slope) < 1e-5


def test_chapman_kolmogorov():
    for code in ("aa", "ar", "rr"):
        left = np.dot(WEIGHTS, p_interval(code, 0.4, 2.2, NODES) * p_interval(code, 0.3, NODES, 0.9))
        assert left == pytest.approx(p_interval(code, 0.7, 2.2, 0.9), rel=1e-10)


def test_symmetry_and_scaling_with_r():
    r = 2.5
    a = p_interval("ar", 0.8 * r * r, 1.0 * r, 2.0 * r, r=r)
    b = p_interval("ar", 0.8, 1.0, 2.0)
    assert a == pytest.approx(b / r, rel=1e-12)
    assert p_interval("rr", 0.6, 0.4, 2.0) == pytest.approx(p_interval("rr", 0.6, 2.0, 0.4), rel=1e-13)


def test_half_line_density():
    x, w = gauss_legendre(0.0, 12.0, 200)
    assert np.dot(w, p_half_line("r", 0.5, x, 0.7)) == pytest.approx(1.0, abs=1e-8)
    assert np.dot(w, p_half_line("a", 0.5, x, 0.7)) == pytest.approx(math.erf(0.7), abs=1e-8)


def test_interval_errors():
    with pytest.raises(ValueError):
        p_interval("ra", 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        p_interval("xx", 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        p_interval("aa", 0.5, 1.0, 1.0, method="fourier")
    with pytest.raises(ValueError):
        BoundaryCond.for_family("A")
    assert BoundaryCond.for_family("B").code == "ar"


# --------------------------------------------------------------------------
# elliptic kernels


@pytest.mark.parametrize("tag", ["B", "C", "D"])
@pytest.mark.parametrize("n", [2, 3])
def test_density_mass_and_positivity(tag, n):
    u = tuple((j + 0.5) * PI / n for j in range(n))
    ctx = KernelContext.elliptic(tag, u, 1.0)
    rho = density(ctx, 0.3, NODES)
    assert rho.min() > -1e-10
    assert np.dot(WEIGHTS, rho) == pytest.approx(n, abs=1e-8)


def test_density_concentrates_near_start():
    u = (0.8, 2.2)
    ctx = KernelContext.elliptic("C", u, 1.0)
    rho = density(ctx, 1e-3, np.array([0.8, 1.5, 2.2]))
    assert rho[0] > 10 and rho[2] > 10 and rho[1] < 1e-6


def test_corr_function_single_point_and_coincident():
    ctx = KernelContext.elliptic("D", (0.6, 2.1), 1.0)
    assert corr_function(ctx, [(0.4, 1.2)]) == pytest.approx(float(density(ctx, 0.4, 1.2)), rel=1e-14)
    assert abs(corr_function(ctx, [(0.4, 1.2), (0.4, 1.2)])) < 1e-12


def test_two_point_function_bounded_by_product():
    # determinantal repulsion: rho_2(x, y) <= rho(x) rho(y)
    ctx = KernelContext.elliptic("B", (0.6, 2.1), 1.0)
    x, y = 0.9, 1.4
    two = corr_function(ctx, [(0.3, x), (0.3, y)])
    assert 0 <= two <= float(density(ctx, 0.3, x) * density(ctx, 0.3, y))


def test_kernel_backward_part_is_free_density():
    # for s > t the kernel differs from the forward one by the free density only
    ctx = KernelContext.elliptic("C", (0.6, 2.1), 1.0)
    x, y = 1.0, 1.9
    forward = corr_kernel(ctx, 0.3, x, 0.2, y)
    summed = sum(p_interval("aa", 0.3, x, uj) * ctx.mart.m_mart(0.2, y, j).real for j, uj in enumerate(ctx.u))
    assert forward == pytest.approx(summed - p_interval("aa", 0.1, x, y), rel=1e-12)


def test_kernel_requires_positive_s():
    ctx = KernelContext.elliptic("D", (0.6, 2.1), 1.0)
    with pytest.raises(ValueError):
        corr_kernel(ctx, 0.0, 1.0, 0.2, 1.0)


# --------------------------------------------------------------------------
# gap probabilities


def test_gap_empty_interval_and_monotone():
    ctx = KernelContext.elliptic("D", (0.7, 2.3), 1.0)
    assert fredholm_gap(ctx, 0.3, (1.0, 1.0)) == 1.0
    values = [fredholm_gap(ctx, 0.3, (0.5, b)) for b in (0.8, 1.2, 1.8, 2.6, 3.0)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert all(-1e-9 <= v <= 1 + 1e-9 for v in values)


def test_gap_rank_reduction_matches_nystrom():
    ctx = KernelContext.elliptic("C", (0.5, 1.6, 2.6), 1.0)
    a, b = 1.0, 2.2
    direct = fredholm_det_discretized(lambda x, y: corr_kernel(ctx, 0.3, x, 0.3, y), a, b, 64)
    assert fredholm_gap(ctx, 0.3, (a, b)) == pytest.approx(direct, abs=1e-10)


def test_gap_whole_interval_is_zero():
    ctx = KernelContext.elliptic("D", (0.7, 2.3), 1.0)
    assert abs(fredholm_gap(ctx, 0.3, (0.0, PI))) < 1e-8


def test_gauge_transform_leaves_determinant():
    ctx = KernelContext.elliptic("B", (0.7, 2.3), 1.0)
    plain = fredholm_det_discretized(lambda x, y: corr_kernel(ctx, 0.3, x, 0.3, y), 0.4, 2.0, 64)
    gauged = fredholm_det_discretized(lambda x, y: np.exp(x - y) * corr_kernel(ctx, 0.3, x, 0.3, y), 0.4, 2.0, 64)
    assert abs(plain - gauged) < 1e-10


def test_nystrom_rank_one_kernel():
    # K = f(x) g(y) has det(I - K) = 1 - int f g
    f = lambda x: np.sin(x)
    det = fredholm_det_discretized(lambda x, y: 0.3 * f(x) * f(y), 0.0, PI, 32)
    assert det == pytest.approx(1 - 0.3 * PI / 2, rel=1e-13)


# --------------------------------------------------------------------------
# trigonometric limit


@pytest.mark.parametrize("tag", ["C", "D"])
@pytest.mark.parametrize("n", [2, 3, 5])
def test_equilibrium_mass(tag, n):
    assert np.dot(WEIGHTS, rho_eq_trig(tag, NODES, n)) == pytest.approx(n, abs=1e-12)


def test_equilibrium_single_c_is_sine_squared():
    np.testing.assert_allclose(rho_eq_trig("C", NODES, 1), 2 / PI * np.sin(NODES) ** 2, rtol=1e-14)


@pytest.mark.parametrize("tag", ["C", "D"])
def test_equal_time_kernel_closed_form(tag):
    # Dirichlet-kernel closed form vs the mode sum
    n = 3
    x = np.linspace(0.1, 3.0, 8)
    gx, gy = np.meshgrid(x, x, indexing="ij")
    k = kernel_eq_trig(tag, 0.0, gx, gy, n)
    if tag == "C":
        modes = sum(np.sin(m * gx) * np.sin(m * gy) for m in range(1, n + 1)) * 2 / PI
    else:
        modes = (1 + 2 * sum(np.cos(m * gx) * np.cos(m * gy) for m in range(1, n))) / PI
    np.testing.assert_allclose(k, modes, atol=1e-13)
    np.testing.assert_allclose(np.diag(k), rho_eq_trig(tag, x, n), atol=1e-13)


@pytest.mark.parametrize("tag", ["C", "D"])
def test_equilibrium_kernel_continuity_in_time(tag):
    x, y = 0.9, 2.0
    at0 = kernel_eq_trig(tag, 0.0, x, y, 3)
    assert kernel_eq_trig(tag, 1e-9, x, y, 3) == pytest.approx(at0, abs=1e-7)
    # backward side differs from forward by the free density in the limit
    back = kernel_eq_trig(tag, -1e-4, x, y, 3)
    assert back == pytest.approx(at0, abs=1e-3)


def test_equilibrium_kernel_backward_uses_images_for_tiny_lag():
    v = kernel_eq_trig("D", -1e-13, 1.0, 1.0 + 1e-3, 2)
    assert math.isfinite(v)


def test_equilibrium_kernel_symmetric_at_equal_time():
    a = kernel_eq_trig("C", 0.0, 0.7, 2.4, 4)
    b = kernel_eq_trig("C", 0.0, 2.4, 0.7, 4)
    assert a == pytest.approx(b, rel=1e-14)


@pytest.mark.parametrize("tag", ["C", "D"])
def test_trig_interpolation_delta(tag):
    u = np.array([0.4, 1.5, 2.7])
    coeffs = trig_coeffs(tag, u)
    for j in range(3):
        np.testing.assert_allclose(coeffs.interp(j, u), np.eye(3)[j], atol=1e-12)
        np.testing.assert_allclose(coeffs.m_mart(0.0, u)[j], np.eye(3)[j], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(tag=st.sampled_from(["C", "D"]), n=st.integers(2, 5), seed=st.integers(0, 2**31))
def test_trig_det_factorized(tag, n, seed):
    u = np.sort(np.random.default_rng(seed).uniform(0.05, PI - 0.05, n))
    if n > 1 and np.diff(u).min() < 1e-3:
        return
    d = trig_det(tag, u)
    assert trig_det_factorized(tag, u) == pytest.approx(d, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("tag", ["C", "D"])
def test_trig_kernel_spectral_matches_direct(tag):
    u = (0.5, 1.7, 2.6)
    x = np.linspace(0.2, 2.9, 6)
    gx, gy = np.meshgrid(x, x, indexing="ij")
    for s, t in ((0.2, 0.3), (0.4, 0.1), (1.0, 1.0)):
        a = kernel_trig(tag, u, s, gx, t, gy, method="spectral")
        b = kernel_trig(tag, u, s, gx, t, gy, method="direct")
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_trig_kernel_relaxes_to_equilibrium():
    u = (0.5, 1.7, 2.6)
    x = np.linspace(0.2, 2.9, 6)
    gap = [np.abs(kernel_trig("C", u, big, x, big, x) - rho_eq_trig("C", x, 3)).max() for big in (2.0, 6.0, 20.0)]
    assert gap[0] > gap[1] > gap[2]
    assert gap[2] < 1e-8


@pytest.mark.parametrize("tag", ["C", "D"])
def test_elliptic_kernel_tends_to_trig(tag):
    # as t_star grows the elliptic nome vanishes and the trigonometric kernel is recovered
    u = (0.6, 2.0)
    x = np.array([0.4, 1.3, 2.5])
    ell = density(KernelContext.elliptic(tag, u, 1e4), 0.3, x)
    trig = density(KernelContext.trigonometric(tag, u), 0.3, x)
    np.testing.assert_allclose(ell, trig, rtol=1e-4)


def test_trig_mass_and_cli_contexts():
    ctx = KernelContext.trigonometric("D", (0.5, 2.0, 2.9))
    assert np.dot(WEIGHTS, density(ctx, 0.7, NODES)) == pytest.approx(3, abs=1e-10)
    eq = KernelContext.equilibrium("C", 2)
    assert np.dot(WEIGHTS, density(eq, 0.0, NODES)) == pytest.approx(2, abs=1e-12)
    with pytest.raises(ValueError):
        KernelContext.trigonometric("B", (0.5, 2.0))


def test_trig_gap_rank_reduction():
    ctx = KernelContext.trigonometric("C", (0.5, 2.0))
    direct = fredholm_det_discretized(lambda x, y: corr_kernel(ctx, 0.4, x, 0.4, y), 0.3, 1.9, 64)
    assert fredholm_gap(ctx, 0.4, (0.3, 1.9)) == pytest.approx(direct, abs=1e-10)


# --------------------------------------------------------------------------
# rational limit and Bessel processes


def test_phi_half_line_delta():
    u = np.array([0.5, 1.3, 2.2])
    for j in range(3):
        np.testing.assert_allclose(phi_half_line(u, j, u), np.eye(3)[j], atol=1e-14)


def test_bes1_density_mass():
    u = (0.5, 1.4)
    x, w = gauss_legendre(0.0, 14.0, 200)
    rho = kernel_bes("BES1", u, 0.6, x, 0.6, x)
    assert np.dot(w, rho) == pytest.approx(2.0, abs=1e-7)


def test_bes3_gauge_of_rational_c():
    # BES3 kernel is (x / y) times the rational C kernel
    u = (0.5, 1.4)
    x, y = 0.8, 1.9
    for s, t in ((0.3, 0.5), (0.5, 0.3)):
        b3 = kernel_bes("BES3", u, s, x, t, y)
        c = kernel_rational("C", u, s, x, t, y)
        assert b3 == pytest.approx(x / y * c, rel=1e-11)


def test_rational_is_large_interval_limit():
    # the interval kernel with large r matches the half-line kernel near 0
    r = 20.0
    u = (0.5, 1.4)
    ctx = KernelContext.trigonometric("D", u, r)
    x = np.array([0.3, 1.0, 2.0])
    np.testing.assert_allclose(density(ctx, 0.4, x), kernel_rational("D", u, 0.4, x, 0.4, x), rtol=1e-3)


def test_bessel_errors():
    with pytest.raises(ValueError):
        kernel_bes("BES2", (1.0,), 0.1, 1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        kernel_bes("BES3", (1.0,), 0.1, 0.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        kernel_rational("B", (1.0,), 0.1, 1.0, 0.1, 1.0)
