"""Boundary-integral invariants I0..I4 and the identities behind the C^2 bounds.

All integrals are closed boundary integrals in arclength, evaluated by the
periodic trapezoid rule of :func:`geometry.integrate_boundary`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction as F

import numpy as np

from .geometry import TWO_PI, SupportDomain, integrate_boundary, node_jet

# (coefficient, kappa exponent, (k1, k2, k3) powers)
I2_TERMS = {
    "k^(4/3)": (F(9), F(4, 3), (0, 0, 0)),
    "k1^2/k^(8/3)": (F(8), F(-8, 3), (2, 0, 0)),
}

I3_TERMS = {
    "k^2": (F(9), F(2), (0, 0, 0)),
    "k1^2/k^2": (F(24), F(-2), (2, 0, 0)),
    "k2^2/k^4": (F(24), F(-4), (0, 2, 0)),
    "k1^2 k2/k^5": (F(-144), F(-5), (2, 1, 0)),
    "k1^4/k^6": (F(176), F(-6), (4, 0, 0)),
}

I4_TERMS = {
    "k^(8/3)": (F(281, 44800), F(8, 3), (0, 0, 0)),
    "k1^2/k^(4/3)": (F(281, 8400), F(-4, 3), (2, 0, 0)),
    "k2^2/k^(10/3)": (F(167, 4200), F(-10, 3), (0, 2, 0)),
    "k1^2 k2/k^(13/3)": (F(-167, 700), F(-13, 3), (2, 1, 0)),
    "k3^2/k^(16/3)": (F(1, 42), F(-16, 3), (0, 0, 2)),
    "k1^4/k^(16/3)": (F(559, 2100), F(-16, 3), (4, 0, 0)),
    "k2^3/k^(19/3)": (F(-473, 4725), F(-19, 3), (0, 3, 0)),
    "k3 k1 k2/k^(19/3)": (F(-10, 21), F(-19, 3), (1, 1, 1)),
    "k3 k1^3/k^(22/3)": (F(5, 7), F(-22, 3), (3, 0, 1)),
    "k1^4 k2/k^(25/3)": (F(10777, 1575), F(-25, 3), (4, 1, 0)),
    "k1^6/k^(28/3)": (F(521897, 127575), F(-28, 3), (6, 0, 0)),
}

A_SQUARED = 257 * 9 / 100
B_PLUS = math.sqrt(257) / 2 + 0.5
B_MINUS = math.sqrt(257) / 2 - 0.5


def _monomial(jet, power, pows):
    k = jet[0]
    out = k ** float(power)
    for j, e in enumerate(pows, start=1):
        if e:
            out = out * jet[j] ** e
    return out


def _term_integrals(domain, terms):
    """Unit-coefficient integral of each monomial in ``terms``."""
    return {name: integrate_boundary(domain, lambda jet, e=e, p=p: _monomial(jet, e, p), order=3)
            for name, (_, e, p) in terms.items()}


@dataclass(frozen=True)
class InvariantVector:
    values: tuple
    term_breakdown: dict = field(default_factory=dict)

    def __getitem__(self, k):
        return self.values[k]

    def to_json(self) -> dict:
        out = {f"I{k}": v for k, v in enumerate(self.values)}
        out["breakdown"] = self.term_breakdown
        return out


def compute_invariants(domain: SupportDomain) -> InvariantVector:
    i0 = integrate_boundary(domain, lambda jet: np.ones_like(jet[0]))
    i1 = integrate_boundary(domain, lambda jet: jet[0] ** (2.0 / 3.0))
    values = [i0, i1]
    breakdown = {}
    for label, terms in (("I2", I2_TERMS), ("I3", I3_TERMS), ("I4", I4_TERMS)):
        raw = _term_integrals(domain, terms)
        weighted = {name: float(terms[name][0]) * val for name, val in raw.items()}
        breakdown[label] = weighted
        values.append(math.fsum(weighted.values()))
    return InvariantVector(tuple(values), breakdown)


def _relative_gap(a, b, floor=1e-300):
    scale = max(abs(a), abs(b))
    return 0.0 if scale <= floor else abs(a - b) / scale


def verify_ibp_identity(domain: SupportDomain):
    """``(lhs, rhs, gap)`` for the integral of k1^4/k^6 = 3/5 of k1^2 k2/k^5."""
    lhs = integrate_boundary(domain, lambda j: j[1] ** 4 / j[0] ** 6, order=2)
    rhs = 0.6 * integrate_boundary(domain, lambda j: j[1] ** 2 * j[2] / j[0] ** 5, order=2)
    # both sides vanish together on the circle; measure the gap against the
    # size of the quartic terms so a flat table does not divide 0 by 0
    scale = max(abs(lhs), abs(rhs))
    if scale == 0.0:
        return lhs, rhs, 0.0
    return lhs, rhs, abs(lhs - rhs) / scale


@dataclass(frozen=True)
class CompletedSquare:
    b: float
    i3_direct: float
    i3_square: float
    terms: dict

    @property
    def gap(self) -> float:
        return _relative_gap(self.i3_direct, self.i3_square)

    @property
    def nonnegative(self) -> bool:
        return all(v >= 0.0 for v in self.terms.values())


def verify_completed_square(domain: SupportDomain, a_squared=A_SQUARED, branches=(B_MINUS, B_PLUS)):
    """Re-evaluate I3 through the completed-square integrand, once per root B."""
    a = math.sqrt(a_squared)
    direct = compute_invariants(domain)[3]
    out = []
    for b in branches:
        parts = {
            "9k^2": integrate_boundary(domain, lambda j: 9 * j[0] ** 2),
            "24k1^2/k^2": integrate_boundary(domain, lambda j: 24 * j[1] ** 2 / j[0] ** 2, order=1),
            "square": integrate_boundary(
                domain, lambda j, b=b: (a * j[2] * j[0] - b * j[1] ** 2) ** 2 / j[0] ** 6, order=2),
            "remainder": integrate_boundary(
                domain, lambda j: (24 - a_squared) * j[2] ** 2 / j[0] ** 4, order=2),
        }
        out.append(CompletedSquare(b, direct, math.fsum(parts.values()), parts))
    return out


@dataclass(frozen=True)
class LogCurvatureChain:
    gradient_energy: float     # 8 * integral of k1^2 / k^(8/3)
    i2: float
    total_variation: float     # integral of |(log k)'|
    i1: float
    hoelder_bound: float       # (2 pi)^(2/3) * perimeter^(1/3)
    oscillation: float         # max log k - min log k on the node grid
    log_sup: float             # max |log k|
    pointwise_bound: float     # |log(2 pi / perimeter)| + total_variation

    def checks(self) -> dict:
        tol = 1e-12 * max(1.0, self.i2)
        return {
            "energy_below_I2": self.gradient_energy <= self.i2 + tol,
            "cauchy_schwarz": self.total_variation ** 2 <= self.i1 * self.i2 / 8 + tol,
            "hoelder": self.i1 <= self.hoelder_bound * (1 + 1e-12),
            "oscillation": self.oscillation <= self.total_variation + 1e-12,
            "pointwise": self.log_sup <= self.pointwise_bound + 1e-12,
        }

    def slack(self) -> dict:
        return {
            "energy_below_I2": self.i2 - self.gradient_energy,
            "cauchy_schwarz": self.i1 * self.i2 / 8 - self.total_variation ** 2,
            "hoelder": self.hoelder_bound - self.i1,
            "oscillation": self.total_variation - self.oscillation,
            "pointwise": self.pointwise_bound - self.log_sup,
        }

    @property
    def ok(self) -> bool:
        return all(self.checks().values())


def verify_log_curvature_bound(domain: SupportDomain) -> LogCurvatureChain:
    inv = compute_invariants(domain)
    energy = integrate_boundary(domain, lambda j: 8 * j[1] ** 2 / j[0] ** (8.0 / 3.0), order=1)
    tv = integrate_boundary(domain, lambda j: np.abs(j[1] / j[0]), order=1)
    log_k = np.log(node_jet(domain, 0)[0])
    ell = domain.perimeter
    return LogCurvatureChain(
        gradient_energy=energy,
        i2=inv[2],
        total_variation=tv,
        i1=inv[1],
        hoelder_bound=TWO_PI ** (2.0 / 3.0) * ell ** (1.0 / 3.0),
        oscillation=float(log_k.max() - log_k.min()),
        log_sup=float(np.max(np.abs(log_k))),
        pointwise_bound=abs(math.log(TWO_PI / ell)) + tv,
    )


def gauss_bonnet(domain: SupportDomain) -> float:
    return integrate_boundary(domain, lambda j: j[0])
