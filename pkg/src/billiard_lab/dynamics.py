"""Billiard map, chord generating function and twist diagnostics.

Angles are measured from the positively oriented (counterclockwise) tangent,
so phi -> 0 grazes forward and phi -> pi grazes backward.  The action
attached to a chord is minus its length, A(s, s') = -|x(s) - x(s')|; with
this sign the relations dA/ds = cos phi, dA/ds' = -cos phi' and the twist
inequality d2A/ds ds' < 0 hold as stated in the literature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CoincidentPoints, NoConvergence, TangencyGuard
from .geometry import TWO_PI, SupportDomain
from .roots import safe_newton

PHI_MIN = 1e-4


@dataclass(frozen=True)
class BilliardState:
    s: float
    phi: float
    lift_s: float

    @classmethod
    def at(cls, domain: SupportDomain, s: float, phi: float) -> "BilliardState":
        return cls(float(s) % domain.perimeter, float(phi), float(s))

    def reversed(self) -> "BilliardState":
        return replace(self, phi=math.pi - self.phi)


@dataclass(frozen=True)
class Chord:
    """Chord length plus derivatives of the action A = -length."""

    length: float
    d_s: float
    d_sp: float
    d_ssp: float


def _frame(theta):
    """Unit tangent and inward normal at normal angle theta."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([-s, c], axis=-1), np.stack([-c, -s], axis=-1)


def chord_data(domain: SupportDomain, theta, theta_p):
    """Vectorized chord quantities between normal angles ``theta`` and ``theta_p``.

    Returns ``(length, cos_phi, cos_phi_p, sin_phi, sin_phi_p)`` where phi
    is the angle of the chord leaving x(theta) and phi' the angle of the
    reflected ray at x(theta_p).
    """
    x0 = domain.point(theta)
    x1 = domain.point(theta_p)
    d = x1 - x0
    length = np.hypot(d[..., 0], d[..., 1])
    u = d / length[..., None]
    t0, n0 = _frame(theta)
    t1, n1 = _frame(theta_p)
    cos_phi = np.sum(u * t0, axis=-1)
    sin_phi = np.sum(u * n0, axis=-1)
    cos_phi_p = np.sum(u * t1, axis=-1)
    sin_phi_p = -np.sum(u * n1, axis=-1)
    return length, cos_phi, cos_phi_p, sin_phi, sin_phi_p


def generating_function(domain: SupportDomain, s: float, s_p: float) -> Chord:
    theta, theta_p = domain.theta_of_s(np.array([s, s_p]))
    x0, x1 = domain.point(np.array([theta, theta_p]))
    if np.hypot(*(x1 - x0)) < 1e-12 * domain.perimeter:
        raise CoincidentPoints(f"chord endpoints s={s}, s'={s_p} coincide")
    length, c0, c1, _, _ = chord_data(domain, theta, theta_p)
    t0, _ = _frame(theta)
    t1, _ = _frame(theta_p)
    mixed = -(float(t0 @ t1) - c0 * c1) / length
    return Chord(float(length), float(c0), float(-c1), float(-mixed))


def _ray_target(domain, theta0, direction):
    """Second intersection of the ray from x(theta0); returns lifted theta."""
    x0 = domain.point(theta0)
    pts = domain.node_points
    offsets = (domain.nodes - theta0) % TWO_PI
    order = np.argsort(offsets)
    offsets = offsets[order]
    rel = pts[order] - x0
    cross = rel[:, 0] * direction[1] - rel[:, 1] * direction[0]
    # F > 0 just after theta0 and F < 0 just before theta0 + 2 pi; nodes
    # within round-off of theta0 carry no reliable sign
    interior = (offsets > 1e-8) & (offsets < TWO_PI - 1e-8)
    neg = np.nonzero(interior & (cross < 0))[0]
    if neg.size:
        hi = theta0 + offsets[neg[0]]
        pos = np.nonzero(interior[: neg[0]] & (cross[: neg[0]] > 0))[0]
        lo = theta0 + offsets[pos[-1]] if pos.size else theta0
    else:
        hi = theta0 + TWO_PI
        pos = np.nonzero(interior & (cross > 0))[0]
        lo = theta0 + offsets[pos[-1]] if pos.size else theta0

    def fun(t):
        p = domain.point(t)
        r = domain.rho(t)[0]
        f = (p[..., 0] - x0[0]) * direction[1] - (p[..., 1] - x0[1]) * direction[0]
        tang = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        df = r * (tang[..., 0] * direction[1] - tang[..., 1] * direction[0])
        return f, df

    theta1 = float(safe_newton(fun, np.array([lo]), np.array([hi]), sign_lo=1.0,
                               xtol=1e-16, maxiter=200)[0])
    residual = abs(float(fun(np.array([theta1]))[0][0]))
    if residual > 1e-12 * domain.perimeter:
        raise NoConvergence(f"ray intersection residual {residual:.3g}")
    return theta1


def billiard_map(domain: SupportDomain, state: BilliardState, phi_min=PHI_MIN) -> BilliardState:
    if not (phi_min <= state.phi <= math.pi - phi_min):
        raise TangencyGuard(f"phi={state.phi} is within {phi_min} of tangency")
    theta0 = float(domain.theta_of_s(state.lift_s))
    t0, n0 = _frame(theta0)
    v = math.cos(state.phi) * t0 + math.sin(state.phi) * n0
    theta1 = _ray_target(domain, theta0, v)
    t1, n1 = _frame(theta1)
    phi1 = math.atan2(-float(v @ n1), float(v @ t1))
    lift = float(domain.arclength(theta1))
    return BilliardState(lift % domain.perimeter, phi1, lift)


def inverse_map(domain: SupportDomain, state: BilliardState, phi_min=PHI_MIN) -> BilliardState:
    nxt = billiard_map(domain, state.reversed(), phi_min).reversed()
    # the reversed ray winds forward by ell minus the true backward advance
    return replace(nxt, lift_s=nxt.lift_s - domain.perimeter)


def iterate(domain: SupportDomain, state: BilliardState, n: int, phi_min=PHI_MIN):
    """``[state, f(state), ..., f^n(state)]``; negative ``n`` runs backward."""
    step = billiard_map if n >= 0 else inverse_map
    out = [state]
    for _ in range(abs(n)):
        out.append(step(domain, out[-1], phi_min))
    return out


def map_jacobian(domain: SupportDomain, state: BilliardState, step=1e-6):
    """Central-difference Jacobian of (s, cos phi) -> (s', cos phi')."""

    def image(s, c):
        nxt = billiard_map(domain, BilliardState(s % domain.perimeter, math.acos(c), s))
        return np.array([nxt.lift_s, math.cos(nxt.phi)])

    s0, c0 = state.lift_s, math.cos(state.phi)
    jac = np.empty((2, 2))
    jac[:, 0] = (image(s0 + step, c0) - image(s0 - step, c0)) / (2 * step)
    jac[:, 1] = (image(s0, c0 + step) - image(s0, c0 - step)) / (2 * step)
    return jac


def twist_check(domain: SupportDomain, sample_count=10_000, phi_min=PHI_MIN, seed=0):
    """Minimum of -d2A/ds ds' over random chords inside the guard band.

    Returns ``(minimum, samples_used)``.  Nonpositive minima signal a twist
    violation; callers decide how to report it.
    """
    rng = np.random.default_rng(seed)
    values = []
    used = 0
    while used < sample_count:
        m = 2 * (sample_count - used)
        theta = rng.uniform(0.0, TWO_PI, m)
        theta_p = theta + rng.uniform(0.0, TWO_PI, m)
        length, c0, c1, s0, s1 = chord_data(domain, theta, theta_p)
        phi0, phi1 = np.arctan2(s0, c0), np.arctan2(s1, c1)
        ok = (phi0 >= phi_min) & (phi0 <= math.pi - phi_min)
        ok &= (phi1 >= phi_min) & (phi1 <= math.pi - phi_min)
        ok &= length > 1e-12 * domain.perimeter
        idx = np.nonzero(ok)[0][: sample_count - used]
        t0, _ = _frame(theta[idx])
        t1, _ = _frame(theta_p[idx])
        dot = np.sum(t0 * t1, axis=-1)
        values.append((c0[idx] * c1[idx] - dot) / length[idx])
        used += idx.size
    return float(np.min(np.concatenate(values))), used
