"""Vectorized safeguarded Newton iteration on bracketed roots."""

import numpy as np

from .errors import NoConvergence


def safe_newton(fun, lo, hi, sign_lo=-1.0, x0=None, xtol=1e-15, maxiter=100):
    """Find roots of ``fun`` inside the brackets ``[lo, hi]``, elementwise.

    ``fun(x)`` returns ``(f, df)`` arrays. The caller guarantees that ``f``
    has sign ``sign_lo`` just inside ``lo`` and the opposite sign just
    inside ``hi``; the endpoints themselves are never evaluated, so a bracket
    may sit on a trivial zero. Newton steps that leave the bracket, or that
    fail to halve the previous step, are replaced by bisection.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    sign_lo = np.broadcast_to(np.asarray(sign_lo, dtype=float), lo.shape).copy()
    x = 0.5 * (lo + hi) if x0 is None else np.array(x0, dtype=float, copy=True)
    x = np.where((x > lo) & (x < hi), x, 0.5 * (lo + hi))
    dx_old = np.abs(hi - lo)
    done = np.zeros(lo.shape, dtype=bool)
    scale = np.maximum(1.0, np.abs(x))

    for _ in range(maxiter):
        f, df = fun(x)
        f = np.asarray(f, dtype=float)
        df = np.asarray(df, dtype=float)
        hit = f == 0.0
        same = np.sign(f) == sign_lo
        lo = np.where(same & ~done, x, lo)
        hi = np.where(~same & ~hit & ~done, x, hi)

        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / df
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        ok &= np.abs(newton - x) < 0.5 * dx_old
        x_new = np.where(ok, newton, 0.5 * (lo + hi))
        step = np.abs(x_new - x)
        dx_old = np.where(done, dx_old, step)
        x = np.where(done | hit, x, x_new)
        done |= hit | (step <= xtol * scale) | (hi - lo <= xtol * scale)
        if done.all():
            return x
    raise NoConvergence(f"safeguarded Newton stalled after {maxiter} iterations")
