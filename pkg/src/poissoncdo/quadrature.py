"""Adaptive Gauss-Kronrod quadrature with batched integrand evaluation.

The integrand receives a 1-D array of abscissae and must return an array of
the same shape, so every refinement pass costs one vectorised call.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np


class QuadratureError(RuntimeError):
    """Adaptive bisection exhausted its interval budget."""


# 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KW = np.concatenate([_WK[:-1], _WK[::-1]])
_GW = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 from each end).
_GW[[1, 3, 5]] = _WG[:3]
_GW[7] = _WG[3]
_GW[[13, 11, 9]] = _WG[:3]


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    kron = half * (y @ _KW)
    gauss = half * (y @ _GW)
    return kron, np.abs(kron - gauss)


def integrate(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
              rel_tol: float = 1e-9, abs_tol: float = 1e-15,
              max_intervals: int = 2000, initial_pieces: int = 8) -> float:
    """Integrate ``f`` over the finite interval ``[lo, hi]``.

    Intervals whose Kronrod/Gauss disagreement is above their share of the
    tolerance are bisected until the summed error estimate meets
    ``max(abs_tol, rel_tol * |integral|)``.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("integration limits must be finite")
    if hi == lo:
        return 0.0
    sign = 1.0
    if hi < lo:
        lo, hi, sign = hi, lo, -1.0

    edges = np.linspace(lo, hi, initial_pieces + 1)
    a, b = edges[:-1], edges[1:]
    val, err = _gk15(f, a, b)
    done_val = 0.0
    done_err = 0.0
    n_intervals = len(a)
    while True:
        total = done_val + val.sum()
        total_err = done_err + err.sum()
        target = max(abs_tol, rel_tol * abs(total))
        if total_err <= target:
            return sign * float(total)
        # Accept intervals already below their proportional share.
        share = target * (b - a) / (hi - lo)
        keep = err > share
        done_val += val[~keep].sum()
        done_err += err[~keep].sum()
        a, b = a[keep], b[keep]
        if n_intervals + len(a) > max_intervals:
            raise QuadratureError(
                f"no convergence on [{lo}, {hi}]: error estimate {total_err:.3g} > {target:.3g}")
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        n_intervals += len(a) // 2
        val, err = _gk15(f, a, b)
