import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import ellipe

from billiard_lab import circle, curvature_jet, ellipse, integrate_boundary, support_fourier
from billiard_lab.errors import BadSpec, ConvexityViolation, OrderTooHigh
from billiard_lab.geometry import (
    boundary_point,
    build_domain,
    domain_to_spec,
    lazutkin_coordinate,
    theta_of_lazutkin,
)

from conftest import support_domains

TWO_PI = 2 * math.pi


def test_circle_basics():
    d = circle(1.0, 256)
    assert d.perimeter == pytest.approx(TWO_PI, rel=1e-15)
    assert np.allclose(d.node_rho, 1.0)


def test_ellipse_perimeter_against_quad():
    a, b = 2.0, 1.0
    # independent oracles: adaptive quadrature and the complete elliptic integral
    ref, _ = quad(lambda t: math.hypot(a * math.sin(t), b * math.cos(t)), 0, math.pi / 2,
                  epsabs=1e-15, epsrel=1e-14, limit=200)
    ref *= 4
    assert ref == pytest.approx(4 * a * ellipe(1 - (b / a) ** 2), rel=1e-13)
    assert ellipse(a, b).perimeter == pytest.approx(ref, rel=1e-12)
    assert ref == pytest.approx(9.688448, abs=1e-6)


def test_convexity_violation():
    with pytest.raises(ConvexityViolation):
        support_fourier(1.0, [(2, 0.6, 0.0)])


@pytest.mark.parametrize("coeffs, a0, nodes", [
    ([(1, 0.1, 0.0)], 1.0, 256),
    ([(2, 0.1, 0.0), (2, 0.0, 0.1)], 1.0, 256),
    ([], -1.0, 256),
    ([(200, 1e-6, 0.0)], 1.0, 256),
    ([], 1.0, 4),
])
def test_bad_spec(coeffs, a0, nodes):
    with pytest.raises(BadSpec):
        support_fourier(a0, coeffs, nodes)


def test_boundary_points():
    d = circle(1.0)
    pos, _, s = boundary_point(d, 0.0)
    assert np.allclose(pos, [1, 0], atol=1e-15) and s == 0
    pos, _, s = boundary_point(d, math.pi / 2)
    assert np.allclose(pos, [0, 1], atol=1e-15) and s == pytest.approx(math.pi / 2)
    pos, _, _ = boundary_point(ellipse(2, 1), 0.0)
    assert np.allclose(pos, [2, 0], atol=1e-12)


def test_ellipse_points_satisfy_implicit_equation():
    d = ellipse(2, 1)
    th = np.linspace(0, TWO_PI, 37)
    x, y = d.point(th).T
    assert np.max(np.abs((x / 2) ** 2 + y ** 2 - 1)) < 1e-12


def test_circle_jet():
    jet = curvature_jet(circle(3.0), np.linspace(0, 6, 7), order=3)
    assert np.allclose(jet[0], 1 / 3)
    assert np.allclose(np.stack([jet[1], jet[2], jet[3]]), 0, atol=1e-14)


def test_ellipse_vertex_curvature():
    assert curvature_jet(ellipse(2, 1), 0.0, order=0)[0] == pytest.approx(2.0, rel=1e-12)
    assert curvature_jet(ellipse(2, 1), math.pi / 2, order=0)[0] == pytest.approx(0.25, rel=1e-12)


def test_jet_against_finite_differences():
    d = support_fourier(1.0, [(2, 0.05, 0.02), (3, 0.0, 0.03), (5, 0.01, 0.0)])
    h = 1e-3
    for th0 in (0.3, 1.7, 4.0):
        s0 = float(d.arclength(th0))
        s = s0 + h * np.arange(-3, 4)
        k = curvature_jet(d, d.theta_of_s(s), order=0)[0]
        jet = curvature_jet(d, th0, order=2)
        fd1 = (-k[5] + 8 * k[4] - 8 * k[2] + k[1]) / (12 * h)
        fd2 = (-k[5] + 16 * k[4] - 30 * k[3] + 16 * k[2] - k[1]) / (12 * h * h)
        assert fd1 == pytest.approx(float(jet[1]), rel=1e-6, abs=1e-9)
        assert fd2 == pytest.approx(float(jet[2]), rel=1e-6, abs=1e-7)


def test_jet_against_spectral_derivative():
    # oracle: kappa sampled uniformly in s, differentiated by FFT
    d = support_fourier(1.0, [(2, 0.04, -0.03), (4, 0.01, 0.005)], nodes=1024)
    m = 2048
    s = np.arange(m) * d.perimeter / m
    k = curvature_jet(d, d.theta_of_s(s), order=0)[0]
    freq = np.fft.fftfreq(m, d=1.0 / m) * TWO_PI / d.perimeter
    kh = np.fft.fft(k)
    jet = curvature_jet(d, d.theta_of_s(s), order=3)
    for j in (1, 2, 3):
        ref = np.real(np.fft.ifft(kh * (1j * freq) ** j))
        assert np.max(np.abs(ref - jet[j])) < 1e-6 * np.max(np.abs(ref))


def test_jet_order_limit():
    with pytest.raises(OrderTooHigh):
        curvature_jet(circle(), 0.0, order=9)


def test_integrate_closed_forms():
    assert integrate_boundary(circle(1), lambda j: j[0]) == pytest.approx(TWO_PI, rel=1e-15)
    assert integrate_boundary(circle(2), lambda j: j[0] ** (2 / 3)) == pytest.approx(
        TWO_PI * 2 ** (1 / 3), rel=1e-14)


@given(support_domains())
def test_gauss_bonnet_random(d):
    assert integrate_boundary(d, lambda j: j[0]) == pytest.approx(TWO_PI, abs=1e-10)


@given(support_domains(), st.floats(0, TWO_PI))
def test_rotation_and_reflection_invariance(d, angle):
    f = lambda j: j[0] ** 2 + j[1] ** 2 / j[0]  # noqa: E731
    base = integrate_boundary(d, f, order=1)
    assert integrate_boundary(d.rotated(angle), f, order=1) == pytest.approx(base, rel=1e-12)
    assert integrate_boundary(d.reflected(), f, order=1) == pytest.approx(base, rel=1e-12)
    assert d.rotated(angle).perimeter == pytest.approx(d.perimeter, rel=1e-15)


def test_node_doubling_stable():
    d = ellipse(1.2, 1.0, 1024)
    f = lambda j: j[2] ** 2 / j[0] ** 4  # noqa: E731
    assert integrate_boundary(d.with_nodes(2048), f, order=2) == pytest.approx(
        integrate_boundary(d, f, order=2), rel=1e-12)


def test_theta_of_s_inverts_arclength():
    d = ellipse(2, 1)
    th = np.linspace(-3, 10, 101)
    assert np.max(np.abs(d.theta_of_s(d.arclength(th)) - th)) < 1e-12


def test_lazutkin_roundtrip():
    d = ellipse(1.5, 1)
    assert lazutkin_coordinate(d, TWO_PI) == pytest.approx(1.0, abs=1e-14)
    lam = np.linspace(0, 1.9, 20)
    assert np.max(np.abs(lazutkin_coordinate(d, theta_of_lazutkin(d, lam)) - lam)) < 1e-12


def test_spec_roundtrip(tmp_path):
    d = support_fourier(1.0, [(2, 0.05, 0.0), (3, 0.0, 0.02)], nodes=512)
    path = tmp_path / "d.json"
    path.write_text(json.dumps(domain_to_spec(d)))
    back = build_domain(path)
    assert back.digest == d.digest
    assert build_domain({"type": "circle", "params": {"R": 2}}).perimeter == pytest.approx(4 * math.pi)
    with pytest.raises(BadSpec):
        build_domain({"type": "square", "params": {}})


def test_digest_depends_on_geometry():
    assert circle(1).digest != circle(2).digest
    assert circle(1).digest == circle(1).digest
