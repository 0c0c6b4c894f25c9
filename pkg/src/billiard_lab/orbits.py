"""Maximal-length Birkhoff periodic orbits by variational ascent.

A (p, q) configuration is a lifted, strictly increasing sequence of normal
angles theta_1 < ... < theta_q < theta_1 + 2 pi p.  Its length

    L = sum_i |x(theta_{i+1}) - x(theta_i)|,   theta_{i+q} = theta_i + 2 pi p,

is maximized by cyclic coordinate ascent (exact 1-D maximization per vertex,
vectorized over an independent colouring of the cycle) followed by a full
Newton polish on the reflection equations.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np

from .dynamics import BilliardState, billiard_map
from .errors import BadSpec, NoConvergence, OrderCollapse
from .geometry import TWO_PI, SupportDomain, theta_of_lazutkin
from .roots import safe_newton

log = logging.getLogger(__name__)

Q_MAX = 512


@dataclass(frozen=True)
class SolverOptions:
    tol: float | None = None  # residual target; defaults to 1e-10 * perimeter
    restarts: int = 4
    max_sweeps: int = 10
    sweep_tol: float = 1e-4
    max_newton: int = 200
    q_max: int = Q_MAX
    seed: int = 0


@dataclass
class PeriodicOrbit:
    p: int
    q: int
    thetas: np.ndarray
    length: float
    residual: float
    converged: bool
    degenerate: bool = False
    history: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "length": self.length,
            "residual": self.residual,
            "converged": self.converged,
            "degenerate": self.degenerate,
            "thetas": [float(t) for t in self.thetas],
        }


def _lifted_next(thetas, p):
    return np.append(thetas[1:], thetas[0] + TWO_PI * p)


def _check_order(thetas, p):
    gaps = _lifted_next(thetas, p) - thetas
    return bool(np.all(gaps > 0) and np.all(gaps < TWO_PI))


def orbit_length(domain: SupportDomain, thetas, p) -> float:
    pts = domain.point(np.asarray(thetas))
    d = np.roll(pts, -1, axis=0) - pts
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def _derivatives(domain, thetas, p, hessian=True):
    """Length, gradient and (optionally) Hessian with respect to the thetas."""
    q = len(thetas)
    pts = domain.point(thetas)
    rho, drho = domain.rho(thetas, order=1)
    c, s = np.cos(thetas), np.sin(thetas)
    tang = np.stack([-s, c], axis=-1)
    inward = np.stack([-c, -s], axis=-1)
    xp = rho[:, None] * tang
    xpp = drho[:, None] * tang + rho[:, None] * inward

    b = (np.arange(q) + 1) % q
    d = pts[b] - pts
    lengths = np.hypot(d[:, 0], d[:, 1])
    u = d / lengths[:, None]
    ua = np.sum(u * xp, axis=1)
    ub = np.sum(u * xp[b], axis=1)
    grad = np.zeros(q)
    np.add.at(grad, np.arange(q), -ua)
    np.add.at(grad, b, ub)
    if not hessian:
        return float(lengths.sum()), grad, rho, None

    def proj(x, y, ux, uy):
        return (np.sum(x * y, axis=1) - ux * uy) / lengths

    haa = proj(xp, xp, ua, ua) - np.sum(u * xpp, axis=1)
    hbb = proj(xp[b], xp[b], ub, ub) + np.sum(u * xpp[b], axis=1)
    hab = -proj(xp, xp[b], ua, ub)
    hess = np.zeros((q, q))
    idx = np.arange(q)
    np.add.at(hess, (idx, idx), haa)
    np.add.at(hess, (b, b), hbb)
    np.add.at(hess, (idx, b), hab)
    np.add.at(hess, (b, idx), hab)
    return float(lengths.sum()), grad, rho, hess


def _residual(grad, rho):
    # dL/ds_i = cos(phi_in) - cos(phi_out) at vertex i
    return float(np.max(np.abs(grad / rho)))


def _colours(q):
    if q == 2:
        return [np.array([0]), np.array([1])]
    idx = np.arange(q)
    if q % 2 == 0:
        return [idx[::2], idx[1::2]]
    return [idx[:-1:2], idx[1::2], idx[-1:]]


def _vertex_max(domain, left, right, x0, xtol=1e-13):
    """Maximize |x(t) - x(left)| + |x(right) - x(t)| for t in (left, right)."""
    xl = domain.point(left)
    xr = domain.point(right)

    def fun(t):
        x = domain.point(t)
        rho, drho = domain.rho(t, order=1)
        c, s = np.cos(t), np.sin(t)
        tang = np.stack([-s, c], axis=-1)
        inward = np.stack([-c, -s], axis=-1)
        xp = rho[:, None] * tang
        xpp = drho[:, None] * tang + rho[:, None] * inward
        d_in = x - xl
        d_out = xr - x
        l_in = np.hypot(d_in[:, 0], d_in[:, 1])
        l_out = np.hypot(d_out[:, 0], d_out[:, 1])
        w_in = d_in / l_in[:, None]
        w_out = -d_out / l_out[:, None]
        g_in = np.sum(w_in * xp, axis=1)
        g_out = np.sum(w_out * xp, axis=1)
        sq = np.sum(xp * xp, axis=1)
        h = ((sq - g_in ** 2) / l_in + np.sum(w_in * xpp, axis=1)
             + (sq - g_out ** 2) / l_out + np.sum(w_out * xpp, axis=1))
        return g_in + g_out, h

    return safe_newton(fun, left, right, sign_lo=1.0, x0=x0, xtol=xtol, maxiter=200)


def _sweep(domain, thetas, p):
    q = len(thetas)
    for group in _colours(q):
        prev = np.where(group == 0, thetas[q - 1] - TWO_PI * p, thetas[group - 1])
        nxt = np.where(group == q - 1, thetas[0] + TWO_PI * p, thetas[(group + 1) % q])
        # for windings above q/2 the neighbours are more than a turn apart;
        # the vertex lives on the arc between them that excludes both
        lo = np.maximum(prev, nxt - TWO_PI)
        hi = np.minimum(nxt, prev + TWO_PI)
        thetas[group] = _vertex_max(domain, lo, hi, thetas[group])
    return thetas


def _ascend(domain, thetas, p, tol, opts):
    """Coordinate sweeps, then damped Newton (Levenberg-Marquardt on |H|) keeping order and length monotone."""
    if not _check_order(thetas, p):
        raise OrderCollapse("initial configuration is not monotone")
    length, grad, rho, _ = _derivatives(domain, thetas, p, hessian=False)
    history = [length]
    slack = 8 * np.finfo(float).eps * length
    res = _residual(grad, rho)
    sweeps = 0
    while res > max(tol, opts.sweep_tol) and sweeps < opts.max_sweeps:
        thetas = _sweep(domain, thetas.copy(), p)
        if not _check_order(thetas, p):
            raise OrderCollapse("coordinate sweep broke the cyclic order")
        length, grad, rho, _ = _derivatives(domain, thetas, p, hessian=False)
        if length < history[-1] - slack:
            raise NoConvergence("coordinate sweep decreased the length")
        history.append(length)
        res = _residual(grad, rho)
        sweeps += 1

    # Levenberg-Marquardt on |H|: near-resonant orbits carry soft modes whose
    # curvature is far below the rest, and plain Newton overshoots along them
    length, grad, rho, hess = _derivatives(domain, thetas, p)
    mu = None
    its = 0
    while res > tol:
        if its >= opts.max_newton:
            raise NoConvergence(f"Newton polish stalled at residual {res:.3g}")
        lam, vec = np.linalg.eigh(hess)
        scale = max(np.max(np.abs(lam)), 1e-300)
        if mu is None:
            mu = 1e-6 * scale
        gv = vec.T @ grad
        for _ in range(80):
            step = vec @ (gv / (np.abs(lam) + mu))
            trial = thetas + step
            if _check_order(trial, p):
                t_len, t_grad, t_rho, t_hess = _derivatives(domain, trial, p)
                pred = grad @ step + 0.5 * step @ hess @ step
                gain = t_len - length
                if gain >= 0.25 * pred if pred > slack else gain >= -slack:
                    break
            mu *= 4.0
        else:
            raise OrderCollapse("no admissible damped Newton step")
        thetas, length, grad, rho, hess = trial, t_len, t_grad, t_rho, t_hess
        history.append(length)
        res = _residual(grad, rho)
        mu = max(mu / 3.0, 1e-14 * scale)
        its += 1
    length = orbit_length(domain, thetas, p)
    return thetas, length, res, history


def _initial(domain, p, q, phase=0.0, jitter=None):
    lam = phase + p * np.arange(q) / q
    if jitter is not None:
        lam = lam + jitter
    return theta_of_lazutkin(domain, lam)


def _same_orbit(a, b, tol=1e-6):
    # circular nearest-neighbour match; sorting alone mispairs points near 0 and 2 pi
    diff = np.abs(np.subtract.outer(np.mod(a, TWO_PI), np.mod(b, TWO_PI)))
    dist = np.minimum(diff, TWO_PI - diff)
    return bool(np.all(dist.min(axis=1) < tol) and np.all(dist.min(axis=0) < tol))


def validate_pq(p, q, q_max=Q_MAX):
    if q < 2 or q > q_max:
        raise BadSpec(f"q={q} outside [2, {q_max}]")
    if not 1 <= p < q:
        raise BadSpec(f"winding p={p} outside [1, q-1]")
    if gcd(p, q) != 1:
        raise BadSpec(f"p/q={p}/{q} is not in lowest terms")


def solve_orbit(domain: SupportDomain, p: int, q: int, opts: SolverOptions | None = None) -> PeriodicOrbit:
    """Maximal-length periodic orbit with rotation number p/q.

    Windings above q/2 are accepted; they produce the time-reversed
    traversal of the (q - p, q) orbit.
    """
    opts = opts or SolverOptions()
    validate_pq(p, q, opts.q_max)
    tol = opts.tol if opts.tol is not None else 1e-10 * domain.perimeter
    rng = np.random.default_rng([opts.seed, p, q])
    found = []
    failures = []
    for r in range(opts.restarts + 1):
        if r == 0:
            init = _initial(domain, p, q)
        else:
            init = _initial(domain, p, q, phase=rng.uniform(0.0, 1.0),
                            jitter=rng.uniform(-0.15, 0.15, q) / q)
        try:
            thetas, length, res, hist = _ascend(domain, init, p, tol, opts)
        except (OrderCollapse, NoConvergence) as exc:
            log.debug("restart %d for %d/%d failed: %s", r, p, q, exc)
            failures.append(exc)
            continue
        found.append((length, thetas, res, hist))
    if not found:
        raise failures[-1]
    found.sort(key=lambda item: -item[0])
    best_len, best_thetas, best_res, best_hist = found[0]
    degenerate = any(
        abs(other[0] - best_len) <= 1e-10 * domain.perimeter
        and not _same_orbit(other[1], best_thetas)
        for other in found[1:]
    )
    shift = math.floor(best_thetas[0] / TWO_PI) * TWO_PI
    return PeriodicOrbit(p, q, best_thetas - shift, best_len, best_res, True,
                         degenerate, best_hist)


def orbit_start_state(domain: SupportDomain, orbit: PeriodicOrbit) -> BilliardState:
    t0, t1 = orbit.thetas[0], orbit.thetas[1 % orbit.q]
    if orbit.q == 1:
        raise BadSpec("orbit needs at least two vertices")
    x0, x1 = domain.point(np.array([t0, t1]))
    u = (x1 - x0) / np.hypot(*(x1 - x0))
    tang = np.array([-math.sin(t0), math.cos(t0)])
    inward = np.array([-math.cos(t0), -math.sin(t0)])
    phi = math.atan2(float(u @ inward), float(u @ tang))
    return BilliardState.at(domain, float(domain.arclength(t0)), phi)


def validate_rotation_number(domain: SupportDomain, orbit: PeriodicOrbit, tol=1e-6) -> bool:
    """Re-fly the orbit with the billiard map and check closure and winding."""
    ell = domain.perimeter
    try:
        start = orbit_start_state(domain, orbit)
        state = start
        for _ in range(orbit.q):
            state = billiard_map(domain, state)
    except Exception as exc:  # noqa: BLE001 - any failure means "not this orbit"
        log.debug("rotation check failed: %s", exc)
        return False
    advance = state.lift_s - start.lift_s
    back = abs((state.s - start.s + 0.5 * ell) % ell - 0.5 * ell)
    return abs(advance - orbit.p * ell) < tol * ell and back < tol * ell


class OrbitCache:
    """Maps ``(domain digest, p, q)`` to orbit lengths, optionally on disk."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._data: dict = {}
        if self.path and self.path.exists():
            raw = json.loads(self.path.read_text())
            self._data = {tuple(k.split(":")): v for k, v in raw.items()}

    @staticmethod
    def _key(domain, p, q):
        return (domain.digest, str(p), str(q))

    def get(self, domain, p, q):
        return self._data.get(self._key(domain, p, q))

    def put(self, domain, p, q, length):
        with self._lock:
            self._data[self._key(domain, p, q)] = float(length)

    def save(self):
        if self.path is None:
            return
        with self._lock:
            blob = {":".join(k): v for k, v in sorted(self._data.items())}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(blob, indent=1, sort_keys=True))

    def __len__(self):
        return len(self._data)


_default_cache = OrbitCache()


def mls(domain: SupportDomain, p: int, q: int, opts: SolverOptions | None = None,
        cache: OrbitCache | None = None) -> float:
    """Marked length spectrum value: the maximal (p, q) orbit length."""
    cache = _default_cache if cache is None else cache
    hit = cache.get(domain, p, q)
    if hit is not None:
        return hit
    length = solve_orbit(domain, p, q, opts).length
    cache.put(domain, p, q, length)
    return length
