"""Reference kernels in plain numpy.

The functions that only use numpy features numba understands are reused
verbatim by ``_jit``; the rest have a loop-based twin there.
"""
import math

import numpy as np
from scipy.linalg import cho_solve

# Pade [13/13] numerator coefficients for exp.
PADE13 = np.array([
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
])
THETA13 = 5.371920351148152


def expm_ss(X):
    """exp(X) by scaling and squaring around a [13/13] Pade approximant."""
    n = X.shape[0]
    norm1 = np.max(np.sum(np.abs(X), axis=0))
    if norm1 == 0.0:
        return np.eye(n, dtype=X.dtype)
    s = 0
    if norm1 > THETA13:
        s = int(math.ceil(math.log2(norm1 / THETA13)))
    Xs = X / (2.0 ** s)
    ident = np.eye(n)
    b = PADE13
    X2 = Xs @ Xs
    X4 = X2 @ X2
    X6 = X2 @ X4
    U = Xs @ (X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
              + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * ident)
    V = (X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
         + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * ident)
    F = np.ascontiguousarray(np.linalg.solve(V - U, V + U))
    for _ in range(s):
        F = F @ F
    return F


def sqrtm_db(X, tol, maxiter):
    """Principal square root via the scaled product form of Denman-Beavers.

    Returns ``(root, iterations, converged)``.
    """
    n = X.shape[0]
    ident = np.eye(n)
    M = X.copy()
    Y = X.copy()
    for k in range(maxiter):
        Minv = np.linalg.inv(M)
        dist = np.max(np.sum(np.abs(M - ident), axis=0))
        mu = 1.0
        if dist > 1e-2:
            logdet = np.linalg.slogdet(M)[1]
            mu = math.exp(-logdet / (2.0 * n))
        mu2 = mu * mu
        Y = 0.5 * mu * (Y @ (ident + Minv / mu2))
        M = 0.5 * (ident + 0.5 * (mu2 * M + Minv / mu2))
        if np.max(np.sum(np.abs(M - ident), axis=0)) <= tol:
            return Y, k + 1, True
    return Y, maxiter, False


def log1p_pade(Xm, nodes, weights):
    """log(I + Xm) as the Gauss-Legendre partial-fraction form of the Pade approximant."""
    n = Xm.shape[0]
    ident = np.eye(n)
    L = np.zeros_like(Xm)
    for j in range(nodes.shape[0]):
        L = L + weights[j] * np.linalg.solve(ident + nodes[j] * Xm, Xm)
    return L


def betacf(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            return h, True
    return h, False


def betainc_reg(a, b, x):
    """Regularized incomplete beta I_x(a, b); returns ``(value, converged)``."""
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


def confusion_sweep(scores, truth, grid):
    """TP/FP/TN/FN counts of ``scores > t`` against boolean ``truth`` for each t in grid."""
    pred = scores[None, :] > grid[:, None]
    pos = truth[None, :]
    out = np.empty((grid.shape[0], 4), dtype=np.int64)
    out[:, 0] = np.sum(pred & pos, axis=1)
    out[:, 1] = np.sum(pred & ~pos, axis=1)
    out[:, 2] = np.sum(~pred & ~pos, axis=1)
    out[:, 3] = np.sum(~pred & pos, axis=1)
    return out


def _residuals(P, q, C, x, z, y, Dinv, Einv, cinv):
    Cx = C @ x
    Px = P @ x
    Cty = C.T @ y
    prim = np.max(np.abs(Einv * (Cx - z))) if z.shape[0] else 0.0
    prim_scale = max(np.max(np.abs(Einv * Cx)), np.max(np.abs(Einv * z))) if z.shape[0] else 0.0
    dual = cinv * np.max(np.abs(Dinv * (Px + q + Cty)))
    dual_scale = cinv * max(np.max(np.abs(Dinv * Px)), np.max(np.abs(Dinv * Cty)),
                            np.max(np.abs(Dinv * q)))
    return prim, prim_scale, dual, dual_scale


def admm_block(L, P, q, C, l, u, rho, sigma, alpha, x, z, y,
               Dinv, Einv, cinv, eps_abs, eps_rel, n_iter, check_every):
    """Run up to ``n_iter`` OSQP-style ADMM iterations on a scaled QP.

    ``L`` is the lower Cholesky factor of ``P + sigma I + C^T diag(rho) C``.
    Returns ``(x, z, y, iterations, converged, prim, dual)`` with residuals
    measured in the unscaled problem.
    """
    prim = np.inf
    dual = np.inf
    for it in range(1, n_iter + 1):
        rhs = sigma * x - q + C.T @ (rho * z - y)
        xt = cho_solve((L, True), rhs)
        zt = C @ xt
        x = alpha * xt + (1.0 - alpha) * x
        zr = alpha * zt + (1.0 - alpha) * z
        z_new = np.minimum(np.maximum(zr + y / rho, l), u)
        y = y + rho * (zr - z_new)
        z = z_new
        if it % check_every == 0 or it == n_iter:
            prim, ps, dual, ds = _residuals(P, q, C, x, z, y, Dinv, Einv, cinv)
            if prim <= eps_abs + eps_rel * ps and dual <= eps_abs + eps_rel * ds:
                return x, z, y, it, True, prim, dual
    return x, z, y, n_iter, False, prim, dual
