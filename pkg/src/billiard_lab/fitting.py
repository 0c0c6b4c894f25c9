"""Least-squares fit of |Gamma| - perimeter = sum_k c_k Q^(2k/3)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadSpec, IllConditioned, InsufficientSamples

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ExpansionFit:
    order: int
    coefficients: tuple
    stderr: tuple
    residual_rms: float
    condition_number: float
    q_window: tuple
    perimeter: float

    def predict(self, lazutkin_q):
        u = np.asarray(lazutkin_q, dtype=float) ** (2.0 / 3.0)
        return sum(c * u ** (k + 1) for k, c in enumerate(self.coefficients))

    def to_json(self) -> dict:
        return {
            "K": self.order,
            "c": list(self.coefficients),
            "stderr": list(self.stderr),
            "residual_rms": self.residual_rms,
            "cond": self.condition_number,
            "q_window": list(self.q_window),
            "perimeter": self.perimeter,
        }

    @classmethod
    def from_json(cls, blob) -> "ExpansionFit":
        return cls(int(blob["K"]), tuple(blob["c"]), tuple(blob.get("stderr", [0.0] * blob["K"])),
                   float(blob["residual_rms"]), float(blob["cond"]),
                   tuple(blob.get("q_window", ())), float(blob.get("perimeter", float("nan"))))


def fit_expansion(estimates, perimeter: float, order: int = 2, weighted: bool = True) -> ExpansionFit:
    """Weighted least squares in u = Q^(2/3), no intercept.

    Weights are 1/err_bar^2 when every estimate carries a positive error
    bar; closed-form data with zero error bars is fitted unweighted.
    """
    if order < 1:
        raise BadSpec("expansion order must be >= 1")
    if len(estimates) < order + 2:
        raise InsufficientSamples(f"need at least {order + 2} estimates for K={order}")
    lq = np.array([e.lazutkin_Q for e in estimates], dtype=float)
    if np.any(lq <= 0):
        raise BadSpec("Lazutkin parameters must be positive")
    if len(np.unique(lq)) != len(lq):
        raise BadSpec("Lazutkin parameters must be distinct")
    y = np.array([e.gamma_length for e in estimates], dtype=float) - perimeter
    err = np.array([e.err_bar for e in estimates], dtype=float)

    u = lq ** (2.0 / 3.0)
    umax = u.max()
    # scale only: centring would add an intercept the model excludes
    design = np.stack([(u / umax) ** k for k in range(1, order + 1)], axis=1)
    if weighted and np.all(err > 0):
        sw = 1.0 / err
    else:
        sw = np.ones_like(y)
    a = design * sw[:, None]
    b = y * sw
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(f"design condition number {cond:.3g}; narrow the q window or lower K")
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = y - design @ coef
    dof = len(y) - order
    chi2 = float(np.sum((resid * sw) ** 2)) / dof if dof > 0 else 0.0
    cov = chi2 * np.linalg.inv(a.T @ a)
    powers = umax ** np.arange(1, order + 1)
    qs = [getattr(e, "q", None) for e in estimates]
    window = (min(qs), max(qs)) if all(q is not None for q in qs) else ()
    return ExpansionFit(
        order=order,
        coefficients=tuple(float(c) for c in coef / powers),
        stderr=tuple(float(s) for s in np.sqrt(np.diag(cov)) / powers),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        condition_number=cond,
        q_window=window,
        perimeter=float(perimeter),
    )


def plot_rows(fit: ExpansionFit, estimates):
    """``(u, y, y_fit)`` rows for external plotting."""
    rows = []
    for e in estimates:
        u = e.lazutkin_Q ** (2.0 / 3.0)
        rows.append((u, e.gamma_length - fit.perimeter, float(fit.predict(e.lazutkin_Q))))
    return rows


@dataclass(frozen=True)
class RatioEntry:
    domain: str
    k: int
    c_k: float
    I_k: float
    ratio: float | None

    @property
    def status(self) -> str:
        return "ok" if self.ratio is not None else "indeterminate"


def ratio_consistency(fits: dict, invariants: dict, k: int, noise_sigmas: float = 2.0):
    """c_k / I_k per domain; entries whose c_k is inside the noise are withheld."""
    out = []
    for name, fit in fits.items():
        if not 1 <= k <= fit.order:
            raise BadSpec(f"fit for {name} has no coefficient c_{k}")
        c = fit.coefficients[k - 1]
        err = fit.stderr[k - 1] if fit.stderr else 0.0
        ik = invariants[name][k]
        if abs(c) <= noise_sigmas * err or ik == 0:
            out.append(RatioEntry(name, k, c, ik, None))
        else:
            out.append(RatioEntry(name, k, c, ik, c / ik))
    return out


def relative_spread(entries) -> float:
    r = np.array([e.ratio for e in entries if e.ratio is not None])
    if r.size == 0:
        return float("nan")
    return float((r.max() - r.min()) / abs(r.mean()))
