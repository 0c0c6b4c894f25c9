"""Mather's beta function from marked length spectrum data.

Sign convention: beta(p/q) = -MLS(p/q)/q, the mean minimal action for the
action -|x(s) - x(s')|.  With it beta is convex, beta'(0) = -perimeter, the
caustic length is -beta'(omega) and the Lazutkin parameter is the Legendre
value omega*beta'(omega) - beta(omega).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

from .errors import BadSpec, InsufficientSamples, NonMonotone
from .geometry import SupportDomain
from .orbits import OrbitCache, SolverOptions, mls

THREADS_ENV = "BILLIARD_THREADS"


@dataclass(frozen=True)
class BetaSample:
    p: int
    q: int
    beta: float
    mls: float

    @property
    def omega(self) -> Fraction:
        return Fraction(self.p, self.q)


@dataclass(frozen=True)
class DerivativeEstimate:
    omega: float
    value: float
    secant: float

    @property
    def error_bar(self) -> float:
        return abs(self.value - self.secant)


@dataclass(frozen=True)
class CausticEstimate:
    q: int
    omega_mid: float
    gamma_length: float
    lazutkin_Q: float
    err_bar: float
    fd_order: int


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _pmap(fn, items, threads):
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map preserves input order, so the merge is deterministic
        return list(pool.map(fn, items))


def beta_table(domain: SupportDomain, rationals, opts: SolverOptions | None = None,
               cache: OrbitCache | None = None, threads: int | None = None):
    """BetaSample for each ``(p, q)`` (or Fraction) in ``rationals``."""
    pairs = []
    for r in rationals:
        p, q = (r.numerator, r.denominator) if isinstance(r, Fraction) else map(int, r)
        if gcd(p, q) != 1 or not 0 < p < q:
            raise BadSpec(f"{p}/{q} is not a reduced rotation number in (0, 1)")
        pairs.append((p, q))
    threads = default_threads() if threads is None else threads

    def one(pq):
        p, q = pq
        length = mls(domain, p, q, opts, cache)
        return BetaSample(p, q, -length / q, length)

    return _pmap(one, pairs, threads)


def fd_weights(x, x0, deriv=1):
    """Weights w with sum w_j f(x_j) ~ f^(deriv)(x0) on an arbitrary stencil."""
    x = np.asarray(x, dtype=float)
    scale = np.max(np.abs(x - x0))
    t = (x - x0) / scale
    n = len(x)
    vander = np.vander(t, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(vander, rhs) / scale ** deriv


def beta_derivative(samples) -> DerivativeEstimate:
    """Three-point nonuniform derivative at the middle sample.

    Also returns the outer two-point secant; their gap is the error bar.
    """
    if len(samples) < 3:
        raise InsufficientSamples("need three consecutive samples")
    left, mid, right = sorted(samples[:3], key=lambda b: b.omega)
    x = np.array([float(b.omega) for b in (left, mid, right)])
    y = np.array([b.beta for b in (left, mid, right)])
    value = float(fd_weights(x, x[1]) @ y)
    secant = float((y[2] - y[0]) / (x[2] - x[0]))
    return DerivativeEstimate(float(x[1]), value, secant)


def _family(p, q_lo, q_hi, pad):
    """Denominators coprime with p around [q_lo, q_hi], padded on both sides."""
    qs = [q for q in range(max(2 * p, 2), q_hi + 4 * pad + 2) if gcd(p, q) == 1]
    inner = [i for i, q in enumerate(qs) if q_lo <= q <= q_hi]
    if not inner:
        raise InsufficientSamples(f"no denominators in [{q_lo}, {q_hi}] coprime with {p}")
    lo, hi = inner[0] - pad, inner[-1] + pad
    if lo < 0 or hi >= len(qs):
        raise InsufficientSamples(f"stencil needs denominators below {q_lo}")
    return qs[lo:hi + 1], pad


def caustic_estimates(domain: SupportDomain, q_range, p=1, stencil=5,
                      opts: SolverOptions | None = None, cache: OrbitCache | None = None,
                      threads: int | None = None, check_monotone=True):
    """(omega, |Gamma|, Q) estimates along omega = p/q for q in ``q_range``.

    The derivative uses a ``stencil``-point nonuniform difference over
    neighbouring rationals; the error bar is its distance from the
    three-point value.
    """
    q_lo, q_hi = min(q_range), max(q_range)
    if stencil < 3 or stencil % 2 == 0:
        raise BadSpec("stencil must be an odd integer >= 3")
    pad = stencil // 2
    qs, pad = _family(p, q_lo, q_hi, pad)
    samples = beta_table(domain, [(p, q) for q in qs], opts, cache, threads)
    omega = np.array([p / q for q in qs])
    beta = np.array([b.beta for b in samples])
    wanted = set(q_range)
    out = []
    for i in range(pad, len(qs) - pad):
        if qs[i] not in wanted:
            continue
        idx = slice(i - pad, i + pad + 1)
        d_hi = float(fd_weights(omega[idx], omega[i]) @ beta[idx])
        d_lo = float(fd_weights(omega[i - 1:i + 2], omega[i]) @ beta[i - 1:i + 2])
        q_val = omega[i] * d_hi - beta[i]
        out.append(CausticEstimate(qs[i], float(omega[i]), -d_hi, float(q_val),
                                   abs(d_hi - d_lo), stencil - 1))
    out.sort(key=lambda c: c.q)
    if check_monotone:
        gam = np.array([c.gamma_length for c in out])
        if np.any(np.diff(gam) <= 0):
            raise NonMonotone("caustic length does not increase with q")
    return out


def extrapolate_slope_at_zero(estimates, degree=2) -> float:
    """beta'(0) from a polynomial fit of -|Gamma| in omega^2."""
    w = np.array([c.omega_mid for c in estimates]) ** 2
    g = np.array([c.gamma_length for c in estimates])
    if len(g) < degree + 1:
        raise InsufficientSamples("too few caustic estimates to extrapolate")
    design = np.vander(w / w.max(), degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(design, g, rcond=None)
    return -float(coef[0])


@dataclass(frozen=True)
class ConvexityEntry:
    omega: float
    second_difference: float

    @property
    def ok(self) -> bool:
        return self.second_difference > 0


def convexity_report(samples):
    """Second divided differences of beta over consecutive samples."""
    pts = sorted(samples, key=lambda b: b.omega)
    out = []
    for a, b, c in zip(pts, pts[1:], pts[2:]):
        x0, x1, x2 = float(a.omega), float(b.omega), float(c.omega)
        d1 = (b.beta - a.beta) / (x1 - x0)
        d2 = (c.beta - b.beta) / (x2 - x1)
        out.append(ConvexityEntry(x1, 2 * (d2 - d1) / (x2 - x0)))
    return out


def marking_symmetry_gap(domain: SupportDomain, p: int, q: int,
                         opts: SolverOptions | None = None, cache=None) -> float:
    """|beta(p/q) - beta((q-p)/q)|, with both sides solved independently."""
    a, b = beta_table(domain, [(p, q), (q - p, q)], opts, cache, threads=1)
    return abs(a.beta - b.beta)
