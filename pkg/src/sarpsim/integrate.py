"""Batched Dormand-Prince 5(4) integrator with shared adaptive steps.

A whole batch of independent systems advances with one step size chosen from
the worst member (max-norm), so a parameter sweep costs one integration of
vectorised numpy work instead of one Python-level solve per point.
"""

from __future__ import annotations

import numpy as np


class IntegrationError(RuntimeError):
    """The integrator could not reach the requested tolerance."""


# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


# 4th-order continuous extension (Shampine); row i weights stage i by powers x..x^4
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


def _dense(t0, h, y0, k, t):
    x = (t - t0) / h
    w = _P @ np.cumprod(np.full(4, x))
    return y0 + h * sum(wi * ki for wi, ki in zip(w, k) if wi)


def dopri5(rhs, t0, t1, y0, rtol=1e-8, atol=1e-10, h0=None, max_steps=2_000_000,
           t_eval=None, h_max=None):
    """Integrate ``dy/dt = rhs(t, y)`` from ``t0`` to ``t1``.

    ``y0`` has shape (batch, m). Returns ``(y1, ys)`` where ``ys`` holds the
    4th-order dense output at ``t_eval`` (shape (len(t_eval), batch, m))
    or ``None``.
    """
    y = np.array(y0, dtype=complex)
    t = float(t0)
    span = float(t1) - t
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        out = np.empty((len(t_eval),) + y.shape, dtype=complex)
        next_eval = 0
        while next_eval < len(t_eval) and t_eval[next_eval] <= t:
            out[next_eval] = y
            next_eval += 1
    else:
        out = None
    if span <= 0:
        return y, out
    h_max = span if h_max is None else h_max
    f = rhs(t, y)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(f) / scale)
        h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h0 = min(h0, 0.1)
    h = min(h0, span, h_max)
    h_min = 1e-12 * max(1.0, abs(span))
    steps = 0
    k = [None] * 7
    while t < t1:
        if steps > max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps at t={t:.6g}")
        if h < h_min:
            raise IntegrationError(f"step size underflow (h={h:.3g}) at t={t:.6g}")
        h = min(h, t1 - t)
        k[0] = f
        for i in range(1, 7):
            yi = y.copy()
            for j, a in enumerate(_A[i]):
                if a:
                    yi += (h * a) * k[j]
            k[i] = rhs(t + _C[i] * h, yi)
        y_new = yi  # stage 7 argument equals the 5th-order solution (FSAL)
        err = h * sum(e * kk for e, kk in zip(_E, k) if e)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.max(np.abs(err) / scale))
        steps += 1
        if err_norm <= 1.0:
            t_new = t + h
            if out is not None:
                while next_eval < len(t_eval) and t_eval[next_eval] <= t_new:
                    out[next_eval] = _dense(t, h, y, k, t_eval[next_eval])
                    next_eval += 1
            t, y, f = t_new, y_new, k[6]
            factor = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
        else:
            factor = max(0.2, 0.9 * err_norm ** -0.2)
        h = min(h * factor, h_max)
    return y, out
