"""numba-compiled twins of the reference kernels."""
import math

import numpy as np
from numba import njit

from . import _ref

expm_ss = njit(cache=True)(_ref.expm_ss)
sqrtm_db = njit(cache=True)(_ref.sqrtm_db)
log1p_pade = njit(cache=True)(_ref.log1p_pade)
betacf = njit(cache=True)(_ref.betacf)


@njit(cache=True)
def betainc_reg(a, b, x):
    if x <= 0.0:
        return 0.0, True
    if x >= 1.0:
        return 1.0, True
    lbt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
           + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(lbt)
    if x < (a + 1.0) / (a + b + 2.0):
        cf, ok = betacf(a, b, x)
        return bt * cf / a, ok
    cf, ok = betacf(b, a, 1.0 - x)
    return 1.0 - bt * cf / b, ok


@njit(cache=True)
def confusion_sweep(scores, truth, grid):
    G = grid.shape[0]
    K = scores.shape[0]
    out = np.zeros((G, 4), dtype=np.int64)
    for g in range(G):
        t = grid[g]
        for k in range(K):
            pred = scores[k] > t
            if pred and truth[k]:
                out[g, 0] += 1
            elif pred:
                out[g, 1] += 1
            elif truth[k]:
                out[g, 3] += 1
            else:
                out[g, 2] += 1
    return out


@njit(cache=True)
def _chol_solve(L, LT, b):
    n = L.shape[0]
    w = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * w[k]
        w[i] = s / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = w[i]
        for k in range(i + 1, n):
            s -= LT[i, k] * x[k]
        x[i] = s / LT[i, i]
    return x


@njit(cache=True)
def _amax(v):
    m = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        if a > m:
            m = a
    return m


@njit(cache=True)
def admm_block(L, P, q, C, l, u, rho, sigma, alpha, x, z, y,
               Dinv, Einv, cinv, eps_abs, eps_rel, n_iter, check_every):
    LT = np.ascontiguousarray(L.T)
    CT = np.ascontiguousarray(C.T)
    m = z.shape[0]
    prim = np.inf
    dual = np.inf
    for it in range(1, n_iter + 1):
        rhs = sigma * x - q + CT @ (rho * z - y)
        xt = _chol_solve(L, LT, rhs)
        zt = C @ xt
        x = alpha * xt + (1.0 - alpha) * x
        zr = alpha * zt + (1.0 - alpha) * z
        z_new = np.empty(m)
        for i in range(m):
            v = zr[i] + y[i] / rho[i]
            if v < l[i]:
                v = l[i]
            elif v > u[i]:
                v = u[i]
            z_new[i] = v
        y = y + rho * (zr - z_new)
        z = z_new
        if it % check_every == 0 or it == n_iter:
            Cx = C @ x
            Px = P @ x
            Cty = CT @ y
            prim = _amax(Einv * (Cx - z))
            ps = max(_amax(Einv * Cx), _amax(Einv * z))
            dual = cinv * _amax(Dinv * (Px + q + Cty))
            ds = cinv * max(_amax(Dinv * Px), _amax(Dinv * Cty), _amax(Dinv * q))
            if prim <= eps_abs + eps_rel * ps and dual <= eps_abs + eps_rel * ds:
                return x, z, y, it, True, prim, dual
    return x, z, y, n_iter, False, prim, dual
