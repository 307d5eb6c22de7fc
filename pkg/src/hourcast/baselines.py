"""Persistence and ARIMA-family forecasters, plus the persistence network shifter."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .events import TemporalGraph


class ArimaFallbackWarning(UserWarning):
    """Emitted when the lag regression is singular and persistence is used instead."""


@dataclass(frozen=True)
class ArimaOrder:
    p: int = 3
    d: int = 1
    q: int = 2

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError("ARIMA orders must be non-negative")


BASELINE_ORDERS = {
    "AR": ArimaOrder(3, 0, 0),
    "MA": ArimaOrder(0, 0, 2),
    "ARMA": ArimaOrder(3, 0, 2),
    "ARIMA": ArimaOrder(3, 1, 2),
}


def persistence_forecast(history, horizon: int) -> np.ndarray:
    """Repeat the last ``horizon`` observations."""
    history = np.asarray(history)
    if len(history) < horizon:
        raise ValueError(f"need at least {horizon} observations, got {len(history)}")
    return history[len(history) - horizon:].copy()


def persistence_network(graphs: Sequence[TemporalGraph], start: int | None = None) -> list[TemporalGraph]:
    """Shift the last ``len(graphs)`` hourly graphs forward by the same span."""
    if not graphs:
        return []
    span = len(graphs)
    first = graphs[0].bin_start + span if start is None else start
    return [g.relabel(first + i) for i, g in enumerate(graphs)]


def _lag_design(w, resid, p, q, start):
    n = len(w)
    cols = [np.ones(n - start)]
    cols += [w[start - i:n - i] for i in range(1, p + 1)]
    cols += [resid[start - j:n - j] for j in range(1, q + 1)]
    return np.column_stack(cols)


def _fit_cls(w: np.ndarray, p: int, q: int, max_iter: int = 50, tol: float = 1e-8):
    """Conditional least squares for ``w_t = c + sum phi_i w_{t-i} + sum theta_j e_{t-j} + e_t``.

    MA regressors are the residuals of the previous pass, seeded from a long
    autoregression. Passes repeat until the coefficients move less than
    ``tol``; the pass with the smallest residual sum of squares is kept.
    Returns (coefficients, residuals), or None when the design is rank
    deficient.
    """
    n = len(w)
    start = max(p, q)
    resid = np.zeros(n)
    if q:
        m = min(max(2 * (p + q), 10), (n - 1) // 3)
        A = _lag_design(w, resid, m, 0, m)
        if m < 1 or np.linalg.matrix_rank(A) < A.shape[1]:
            resid = w - w.mean()
        else:
            ar, *_ = np.linalg.lstsq(A, w[m:], rcond=None)
            resid[m:] = w[m:] - A @ ar
    best = None
    coef = None
    for _ in range(max_iter if q else 1):
        A = _lag_design(w, resid, p, q, start)
        if np.linalg.matrix_rank(A) < A.shape[1]:
            return best
        new, *_ = np.linalg.lstsq(A, w[start:], rcond=None)
        if not np.all(np.isfinite(new)):
            return best
        if q:
            new[1 + p:] = _invertible(new[1 + p:])
        resid = _residuals(w, new, p, q)
        if not np.all(np.isfinite(resid)):
            return best
        sse = float(resid @ resid)
        if best is None or sse < best[2]:
            best = (new, resid, sse)
        if coef is not None and np.max(np.abs(new - coef)) < tol:
            break
        coef = new
    return best


def _invertible(theta: np.ndarray) -> np.ndarray:
    """Reflect roots of 1 + theta_1 z + ... + theta_q z^q lying inside the unit circle."""
    poly = np.r_[theta[::-1], 1.0]  # highest power first
    if np.all(theta == 0):
        return theta
    roots = np.roots(np.trim_zeros(poly, "f"))
    if roots.size == 0 or np.all(np.abs(roots) > 1.0):
        return theta
    roots = np.where(np.abs(roots) < 1.0, 1.0 / np.conj(roots), roots)
    # rebuild with unit constant term
    coeffs = np.real(np.poly(roots))
    coeffs = coeffs / coeffs[-1]
    out = np.zeros_like(theta)
    tail = coeffs[::-1][1:]
    out[:len(tail)] = tail
    return out


def _residuals(w, coef, p, q):
    """One-step-ahead errors, zero before the first fully lagged observation."""
    n = len(w)
    start = max(p, q)
    c, phi, theta = coef[0], coef[1:1 + p], coef[1 + p:]
    x = w[start:] - c
    for i in range(p):
        x = x - phi[i] * w[start - 1 - i:n - 1 - i]
    e = np.zeros(n)
    with np.errstate(over="ignore", invalid="ignore"):
        e[start:] = lfilter([1.0], np.r_[1.0, theta], x)
    if not np.all(np.isfinite(e)) or np.max(np.abs(e)) > 1e12:
        return np.full(n, np.nan)
    return e


def arima_forecast(history, order: ArimaOrder, horizon: int) -> np.ndarray:
    """Forecast ``horizon`` steps with an ARIMA(p, d, q) fitted by conditional least squares.

    The output is clamped at zero and rounded to integer counts. A constant
    (possibly differenced) series is its own forecast. A singular lag
    regression falls back to :func:`persistence_forecast` and emits
    :class:`ArimaFallbackWarning`.
    """
    y = np.asarray(history, dtype=float)
    p, d, q = order.p, order.d, order.q
    if len(y) < max(p, q) + d + 1:
        raise ValueError(f"history of {len(y)} too short for order {order}")
    if not np.all(np.isfinite(y)):
        raise ValueError("history contains non-finite values")

    w = np.diff(y, n=d) if d else y.copy()
    if np.all(w == w[0]):
        future_w = np.full(horizon, w[0])
    else:
        fitted = _fit_cls(w, p, q) if len(w) - max(p, q) >= 1 + p + q else None
        if fitted is None:
            warnings.warn(f"singular lag matrix for order {order}; using persistence",
                          ArimaFallbackWarning, stacklevel=2)
            return _to_counts(persistence_forecast(y, horizon) if len(y) >= horizon
                              else np.full(horizon, y[-1]))
        coef, resid, _ = fitted
        c, phi, theta = coef[0], coef[1:1 + p], coef[1 + p:]
        ext = list(w)
        err = list(resid)
        future_w = np.empty(horizon)
        for h in range(horizon):
            val = c + sum(phi[i] * ext[-1 - i] for i in range(p)) + sum(theta[j] * err[-1 - j] for j in range(q))
            future_w[h] = val
            ext.append(val)
            err.append(0.0)

    # undo differencing, innermost level first
    levels = [y]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    out = future_w
    for k in range(d - 1, -1, -1):
        out = levels[k][-1] + np.cumsum(out)
    return _to_counts(out)


def _to_counts(x) -> np.ndarray:
    return np.rint(np.maximum(0.0, np.asarray(x, dtype=float))).astype(np.int64)
