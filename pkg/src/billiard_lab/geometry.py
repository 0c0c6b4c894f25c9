"""Strictly convex tables described by a trigonometric support function.

A table is stored as

    h(theta) = a0 + sum_{n >= 2} (a_n cos n theta + b_n sin n theta),

the distance from the origin to the tangent line with outward normal angle
``theta``.  The radius of curvature is rho = h + h'' and every boundary
quantity follows from the coefficient arrays without finite differences.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import BadSpec, ConvexityViolation, NonFiniteIntegrand, OrderTooHigh
from .roots import safe_newton

TWO_PI = 2.0 * math.pi
DEFAULT_NODES = 1024
CONVEXITY_MARGIN = 1e-6
MAX_JET_ORDER = 8


@dataclass(frozen=True, eq=False)
class SupportDomain:
    """Immutable table; cached node tables are computed lazily."""

    a0: float
    freqs: np.ndarray
    cos_coef: np.ndarray
    sin_coef: np.ndarray
    node_count: int = DEFAULT_NODES
    label: str = field(default="support_fourier", compare=False)

    @property
    def mode_count(self) -> int:
        return int(self.freqs.max()) if self.freqs.size else 0

    @property
    def coefficients(self):
        """``[(n, a_n, b_n), ...]`` for the nonconstant modes."""
        return [(int(n), float(a), float(b))
                for n, a, b in zip(self.freqs, self.cos_coef, self.sin_coef)]

    @property
    def perimeter(self) -> float:
        # integral of rho over a period; only the constant mode survives
        return TWO_PI * self.a0

    @cached_property
    def nodes(self) -> np.ndarray:
        return TWO_PI * np.arange(self.node_count) / self.node_count

    @cached_property
    def _complex_coef(self) -> np.ndarray:
        return self.cos_coef - 1j * self.sin_coef

    def _fourier(self, theta, weights):
        """Re sum_n weights_n c_n e^{i n theta} for a batch of weight rows."""
        theta = np.asarray(theta, dtype=float)
        if not self.freqs.size:
            return np.zeros((len(weights),) + theta.shape)
        phase = np.exp(1j * np.multiply.outer(theta, self.freqs))
        return np.stack([(phase @ (w * self._complex_coef)).real for w in weights])

    def support(self, theta, order=0):
        """h and its first ``order`` theta-derivatives, shape (order+1, ...)."""
        n = self.freqs.astype(float)
        weights = [(1j * n) ** j for j in range(order + 1)]
        out = self._fourier(theta, weights)
        out[0] += self.a0
        return out

    def rho(self, theta, order=0):
        """Radius of curvature h + h'' and its theta-derivatives."""
        n = self.freqs.astype(float)
        weights = [(1.0 - n * n) * (1j * n) ** j for j in range(order + 1)]
        out = self._fourier(theta, weights)
        out[0] += self.a0
        return out

    def arclength(self, theta):
        """Lifted arclength s(theta) with s(0) = 0; exact for the trig model."""
        theta = np.asarray(theta, dtype=float)
        n = self.freqs.astype(float)
        periodic = self._fourier(theta, [(1.0 - n * n) / (1j * n)])[0]
        offset = float(np.sum((1.0 - n * n) * self.sin_coef / n)) if n.size else 0.0
        return self.a0 * theta + periodic + offset

    @cached_property
    def _arclength_table(self):
        return self.arclength(np.append(self.nodes, TWO_PI))

    def theta_of_s(self, s):
        """Invert the lifted arclength map (vectorized)."""
        s = np.asarray(s, dtype=float)
        ell = self.perimeter
        turns = np.floor(s / ell)
        red = s - turns * ell
        table = self._arclength_table
        k = np.clip(np.searchsorted(table, red, side="right"), 1, self.node_count)
        grid = np.append(self.nodes, TWO_PI)
        lo, hi = grid[k - 1], grid[k]
        # widen by a hair so exact node hits stay strictly inside
        lo = lo - 1e-12
        hi = hi + 1e-12

        def fun(t):
            return self.arclength(t) - red, self.rho(t)[0]

        theta = safe_newton(fun, lo, hi, sign_lo=-1.0, xtol=1e-16)
        return theta + TWO_PI * turns

    def point(self, theta):
        """Boundary position, shape (..., 2)."""
        h, dh = self.support(theta, order=1)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([h * c - dh * s, h * s + dh * c], axis=-1)

    @cached_property
    def node_points(self) -> np.ndarray:
        return self.point(self.nodes)

    @cached_property
    def _jet_cache(self) -> dict:
        return {}

    @cached_property
    def node_rho(self) -> np.ndarray:
        return self.rho(self.nodes)[0]

    def canonical(self) -> dict:
        return {
            "a0": repr(float(self.a0)),
            "modes": [[n, repr(a), repr(b)] for n, a, b in self.coefficients],
            "nodes": int(self.node_count),
        }

    @cached_property
    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_nodes(self, node_count: int) -> "SupportDomain":
        return _validated(self.a0, self.freqs, self.cos_coef, self.sin_coef,
                          node_count, self.label)

    def rotated(self, angle: float) -> "SupportDomain":
        """The table rotated by ``angle`` about the origin."""
        n = self.freqs.astype(float)
        c = self._complex_coef * np.exp(-1j * n * angle)
        return _validated(self.a0, self.freqs, c.real, -c.imag, self.node_count, self.label)

    def reflected(self) -> "SupportDomain":
        """Mirror image in the x-axis: h(theta) -> h(-theta)."""
        return _validated(self.a0, self.freqs, self.cos_coef, -self.sin_coef,
                          self.node_count, self.label)

    def scaled(self, factor: float) -> "SupportDomain":
        return _validated(self.a0 * factor, self.freqs, self.cos_coef * factor,
                          self.sin_coef * factor, self.node_count, self.label)


@dataclass(frozen=True)
class CurvatureJet:
    """kappa and its arclength derivatives; ``values[j]`` is kappa_j."""

    values: np.ndarray

    @property
    def order(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, j):
        return self.values[j]


def _validated(a0, freqs, cos_coef, sin_coef, node_count, label) -> SupportDomain:
    freqs = np.asarray(freqs, dtype=int)
    cos_coef = np.asarray(cos_coef, dtype=float)
    sin_coef = np.asarray(sin_coef, dtype=float)
    if np.any(freqs == 1):
        raise BadSpec("frequency-1 modes only translate the table and are not allowed")
    if np.any(freqs < 1):
        raise BadSpec("mode frequencies must be integers >= 2")
    if len(set(freqs.tolist())) != freqs.size:
        raise BadSpec("duplicate mode frequency")
    if node_count < 8:
        raise BadSpec("node_count must be at least 8")
    if not np.isfinite(a0) or a0 <= 0:
        raise BadSpec("a0 must be positive")
    if freqs.size and 2 * freqs.max() >= node_count:
        raise BadSpec(f"node_count={node_count} under-resolves mode {freqs.max()}")
    order = np.argsort(freqs)
    dom = SupportDomain(float(a0), freqs[order], cos_coef[order], sin_coef[order],
                        int(node_count), label)
    fine = TWO_PI * np.arange(4 * node_count) / (4 * node_count)
    rho_fine = dom.rho(fine)[0]
    if rho_fine.min() < CONVEXITY_MARGIN * rho_fine.max():
        raise ConvexityViolation(
            f"radius of curvature min {rho_fine.min():.3g} is not safely positive")
    return dom


def circle(R=1.0, nodes=DEFAULT_NODES) -> SupportDomain:
    if R <= 0:
        raise BadSpec("radius must be positive")
    return _validated(R, [], [], [], nodes, "circle")


def support_fourier(a0, coefficients=(), nodes=DEFAULT_NODES) -> SupportDomain:
    """``coefficients`` is an iterable of ``(n, a_n, b_n)``."""
    coefficients = [tuple(c) for c in coefficients]
    for c in coefficients:
        if len(c) != 3:
            raise BadSpec(f"coefficient entry {c!r} is not (n, a_n, b_n)")
    freqs = [int(c[0]) for c in coefficients]
    return _validated(a0, freqs, [c[1] for c in coefficients],
                      [c[2] for c in coefficients], nodes, "support_fourier")


def ellipse(a, b, nodes=DEFAULT_NODES) -> SupportDomain:
    """Centered ellipse with semi-axes ``a`` (along x) and ``b``.

    The support function sqrt(a^2 cos^2 + b^2 sin^2) is analytic; it is
    projected onto Fourier modes by FFT and truncated at round-off.
    """
    if a <= 0 or b <= 0:
        raise BadSpec("semi-axes must be positive")
    samples = 4096
    t = TWO_PI * np.arange(samples) / samples
    h = np.sqrt((a * np.cos(t)) ** 2 + (b * np.sin(t)) ** 2)
    c = np.fft.rfft(h) / samples
    a0 = c[0].real
    n = np.arange(len(c))
    an, bn = 2 * c.real, -2 * c.imag
    mag = np.hypot(an, bn)
    # symmetry kills odd modes; drop their round-off residue
    keep = (n >= 2) & (n % 2 == 0) & (mag > 1e-16 * a0)
    if keep.any() and n[keep].max() >= nodes // 2:
        raise BadSpec(f"ellipse({a}, {b}) needs more than {nodes} nodes")
    dom = _validated(a0, n[keep], an[keep], bn[keep], nodes, "ellipse")
    return dom


def build_domain(spec) -> SupportDomain:
    """Build from a JSON-like mapping ``{"type", "params", "nodes"}``."""
    if isinstance(spec, (str, Path)):
        spec = json.loads(Path(spec).read_text())
    try:
        kind = spec["type"]
        params = dict(spec.get("params", {}))
        nodes = int(spec.get("nodes", DEFAULT_NODES))
    except (KeyError, TypeError, ValueError) as exc:
        raise BadSpec(f"malformed domain spec: {exc}") from exc
    try:
        if kind == "circle":
            return circle(float(params.get("R", 1.0)), nodes)
        if kind == "ellipse":
            return ellipse(float(params["a"]), float(params["b"]), nodes)
        if kind == "support_fourier":
            return support_fourier(float(params.get("a0", 1.0)),
                                   params.get("coefficients", []), nodes)
    except KeyError as exc:
        raise BadSpec(f"missing parameter {exc} for {kind}") from exc
    raise BadSpec(f"unknown domain type {kind!r}")


def domain_to_spec(domain: SupportDomain) -> dict:
    """Serialize as a ``support_fourier`` spec (lossless for every table)."""
    return {
        "type": "support_fourier",
        "params": {"a0": domain.a0, "coefficients": [list(c) for c in domain.coefficients]},
        "nodes": domain.node_count,
    }


def boundary_point(domain: SupportDomain, theta):
    """Return ``(position, tangent_angle, s)`` at normal angle ``theta``."""
    return domain.point(theta), np.asarray(theta) + 0.5 * math.pi, domain.arclength(theta)


def _series_reciprocal(r):
    w = np.empty_like(r)
    w[0] = 1.0 / r[0]
    for k in range(1, len(r)):
        w[k] = -sum(r[j] * w[k - j] for j in range(1, k + 1)) * w[0]
    return w


def _series_mul(a, b, length):
    out = np.zeros((length,) + a.shape[1:])
    for k in range(length):
        out[k] = sum(a[j] * b[k - j] for j in range(k + 1))
    return out


def curvature_jet(domain: SupportDomain, theta, order=3) -> CurvatureJet:
    """kappa_0..kappa_order at normal angle(s) ``theta``.

    Works on truncated Taylor series in theta: with w = 1/rho, the arclength
    derivative is D_s = w D_theta, applied ``order`` times to kappa = w.
    """
    if order > MAX_JET_ORDER:
        raise OrderTooHigh(f"jet order {order} exceeds {MAX_JET_ORDER}")
    if order < 0:
        raise OrderTooHigh("jet order must be nonnegative")
    theta = np.asarray(theta, dtype=float)
    derivs = domain.rho(theta, order=order)
    fact = np.array([math.factorial(j) for j in range(order + 1)], dtype=float)
    taylor = derivs / fact.reshape((-1,) + (1,) * theta.ndim)
    w = _series_reciprocal(taylor)
    f = w
    values = [w[0]]
    for j in range(1, order + 1):
        length = order + 1 - j
        df = np.stack([(k + 1) * f[k + 1] for k in range(length)])
        f = _series_mul(w, df, length)
        values.append(f[0])
    return CurvatureJet(np.stack(values))


def node_jet(domain: SupportDomain, order=3) -> CurvatureJet:
    cache = domain._jet_cache
    for have, jet in cache.items():
        if have >= order:
            return CurvatureJet(jet.values[: order + 1])
    jet = cache[order] = curvature_jet(domain, domain.nodes, order)
    return jet


def integrate_boundary(domain: SupportDomain, integrand, order=0) -> float:
    """Periodic trapezoid rule for the closed integral of ``integrand(jet)`` ds."""
    jet = node_jet(domain, order)
    vals = np.asarray(integrand(jet), dtype=float)
    if vals.shape != domain.nodes.shape:
        vals = np.broadcast_to(vals, domain.nodes.shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrand("integrand is not finite on the node grid")
    return float(np.sum(vals * domain.node_rho) * TWO_PI / domain.node_count)


def lazutkin_coordinate(domain: SupportDomain, theta):
    """Normalized lifted integral of kappa^(2/3) ds from theta = 0.

    Advances by exactly one per turn; vertices of near-boundary maximal
    orbits are close to equally spaced in this coordinate.
    """
    g = domain.node_rho ** (1.0 / 3.0)
    c = np.fft.rfft(g) / domain.node_count
    mean = c[0].real
    k = np.arange(1, len(c))
    ck = 2 * c[1:]
    if domain.node_count % 2 == 0:
        ck[-1] = c[-1]
    sig = np.abs(ck) > 1e-17 * mean
    k, ck = k[sig], ck[sig]
    theta = np.asarray(theta, dtype=float)
    phase = np.exp(1j * np.multiply.outer(theta, k))
    periodic = ((phase - 1.0) @ (ck / (1j * k))).real
    return (mean * theta + periodic) / (TWO_PI * mean)


def theta_of_lazutkin(domain: SupportDomain, lam):
    """Invert ``lazutkin_coordinate`` (vectorized)."""
    lam = np.asarray(lam, dtype=float)
    turns = np.floor(lam)
    red = lam - turns
    grid = np.append(domain.nodes, TWO_PI)
    table = lazutkin_coordinate(domain, grid)
    k = np.clip(np.searchsorted(table, red, side="right"), 1, domain.node_count)
    lo, hi = grid[k - 1] - 1e-12, grid[k] + 1e-12
    scale = TWO_PI * float(np.mean(domain.node_rho ** (1.0 / 3.0)))

    def fun(t):
        return lazutkin_coordinate(domain, t) - red, domain.rho(t)[0] ** (1.0 / 3.0) / scale

    return safe_newton(fun, lo, hi, sign_lo=-1.0, xtol=1e-15) + TWO_PI * turns


def load_domain(path) -> SupportDomain:
    return build_domain(Path(path))
