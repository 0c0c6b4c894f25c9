"""Acceptance criteria; run with ``pytest tests/test_acceptance.py``.

The terminal summary prints one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest

from billiard_lab import (
    BilliardState,
    billiard_map,
    beta_table,
    caustic_estimates,
    circle,
    compute_invariants,
    convexity_report,
    ellipse,
    fit_expansion,
    ratio_consistency,
    support_fourier,
    twist_check,
)
from billiard_lab.dynamics import map_jacobian
from billiard_lab.fitting import relative_spread
from billiard_lab.invariants import (
    gauss_bonnet,
    verify_completed_square,
    verify_ibp_identity,
    verify_log_curvature_bound,
)
from billiard_lab.orbits import OrbitCache, mls
from billiard_lab.spectrum import extrapolate_slope_at_zero, marking_symmetry_gap

from conftest import random_support_domain

PI = math.pi
TWO_PI = 2 * PI


def perturbed_circle(seed=2024, amplitude=0.02):
    rng = np.random.default_rng(seed)
    coeffs = [(n, float(rng.uniform(-amplitude, amplitude)), float(rng.uniform(-amplitude, amplitude)))
              for n in (2, 3)]
    return support_fourier(1.0, coeffs, 1024)


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.limit, f"runtime {self.elapsed:.1f}s over {self.limit}s"


@pytest.mark.criterion(1, "circle closed-form suite")
def test_criterion_1_circle_closed_forms():
    with Timer(30):
        d = circle(1.0, 1024)
        rng = np.random.default_rng(1)
        for s, phi in zip(rng.uniform(0, TWO_PI, 200), rng.uniform(0.05, PI - 0.05, 200)):
            nxt = billiard_map(d, BilliardState.at(d, s, phi))
            assert abs(nxt.lift_s - (s + 2 * phi)) < 1e-10
            assert abs(nxt.phi - phi) < 1e-10
        cache = OrbitCache()
        for q in range(3, 65):
            ref = 2 * q * math.sin(PI / q)
            assert abs(mls(d, 1, q, cache=cache) - ref) < 1e-8 * ref
        est = caustic_estimates(d, range(16, 65), cache=cache)
        slope = extrapolate_slope_at_zero(est)
        assert abs(slope + TWO_PI) < 1e-3 * TWO_PI


@pytest.mark.criterion(2, "invariant quadrature and dilation scaling")
def test_criterion_2_invariants():
    vals = compute_invariants(circle(1.0, 1024)).values
    ref = (TWO_PI, TWO_PI, 18 * PI, 18 * PI, 281 * PI / 22400)
    for v, r in zip(vals, ref):
        assert abs(v - r) <= 1e-10 * abs(r)
    for R in (0.25, 0.5, 2.0, 3.0, 10.0):
        scaled = compute_invariants(circle(R, 1024)).values
        for k in range(5):
            target = R ** (1 - 2 * k / 3) * vals[k]
            assert abs(scaled[k] - target) <= 1e-9 * abs(target)


@pytest.mark.criterion(3, "identity suite on 100 random domains")
def test_criterion_3_identity_suite():
    rng = np.random.default_rng(3)
    violations = []
    with Timer(120):
        for i in range(100):
            d = random_support_domain(rng, max_freq=8, budget=0.8)
            if abs(gauss_bonnet(d) - TWO_PI) > 1e-9 * TWO_PI:
                violations.append((i, "gauss_bonnet"))
            if verify_ibp_identity(d)[2] >= 1e-8:
                violations.append((i, "ibp"))
            for c in verify_completed_square(d):
                if not (c.gap < 1e-7 and c.nonnegative):
                    violations.append((i, f"csq B={c.b}"))
            chain = verify_log_curvature_bound(d)
            if not chain.ok or min(chain.slack().values()) < -1e-12:
                violations.append((i, "log-curvature chain"))
    assert violations == []


def circle_fit_data():
    d = circle(1.0, 1024)
    est = caustic_estimates(d, range(16, 129), cache=OrbitCache())
    return d, est


@pytest.mark.criterion(4, "dynamical vs closed-form caustics on the circle")
def test_criterion_4_circle_caustics():
    with Timer(180):
        d, est = circle_fit_data()
        assert [e.q for e in est] == list(range(16, 129))
        for e in est:
            w = PI / e.q
            g_ref = TWO_PI * math.cos(w)
            q_ref = 2 * (math.sin(w) - w * math.cos(w))
            assert abs(e.gamma_length - g_ref) < 1e-4 * g_ref
            assert abs(e.lazutkin_Q - q_ref) < 1e-3 * q_ref
        fit = fit_expansion(est, d.perimeter, 2)
        c1_ref = -(1.5 ** (2 / 3)) * PI
        assert abs(fit.coefficients[0] - c1_ref) < 1e-2 * abs(c1_ref)


@pytest.mark.criterion(5, "universality of c1/I1")
def test_criterion_5_universality():
    domains = {
        "circle(1)": circle(1.0, 1024),
        "circle(2)": circle(2.0, 1024),
        "ellipse(1.2,1)": ellipse(1.2, 1.0, 1024),
        "perturbed circle": perturbed_circle(),
    }
    with Timer(600):
        fits, invs = {}, {}
        for name, d in domains.items():
            est = caustic_estimates(d, range(16, 129), cache=OrbitCache())
            fits[name] = fit_expansion(est, d.perimeter, 2)
            invs[name] = compute_invariants(d).values
            assert fits[name].coefficients[0] < 0
        entries = ratio_consistency(fits, invs, 1)
        assert all(e.status == "ok" for e in entries)
        assert relative_spread(entries) < 0.05


@pytest.mark.criterion(6, "structural properties of beta and the map")
def test_criterion_6_structure():
    rng = np.random.default_rng(6)
    ell = ellipse(2.0, 1.0, 1024)
    pert = perturbed_circle()
    pairs = []
    while len(pairs) < 20:
        q = int(rng.integers(3, 40))
        p = int(rng.integers(1, q))
        if math.gcd(p, q) == 1 and (p, q) not in pairs:
            pairs.append((p, q))
    for i, (p, q) in enumerate(pairs):
        d = ell if i % 2 else pert
        assert marking_symmetry_gap(d, p, q, cache=OrbitCache()) < 1e-8, (p, q)

    rationals = [(1, q) for q in range(3, 40)] + [(2, 5), (2, 7), (3, 7), (3, 8), (4, 9)]
    for d in (circle(1.0, 1024), ell):
        report = convexity_report(beta_table(d, rationals))
        assert report and all(e.ok for e in report)

    for d in (circle(1.0, 1024), ell, pert):
        tmin, used = twist_check(d, 10_000)
        assert used == 10_000 and tmin > 0
        for s, phi in zip(rng.uniform(0, d.perimeter, 10), rng.uniform(0.2, PI - 0.2, 10)):
            det = np.linalg.det(map_jacobian(d, BilliardState.at(d, s, phi)))
            assert abs(det - 1.0) < 1e-6


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
