"""Operator-splitting QP solver for  min 1/2 x'Px + q'x  s.t.  l <= Cx <= u.

ADMM iterations follow the OSQP scheme: Ruiz equilibration, relaxed
updates, an adaptive per-constraint penalty, and a final active-set
polish that turns a moderately accurate iterate into a high-accuracy one.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, cho_factor, cho_solve, lu_factor, lu_solve

from .. import kernels
from ..errors import InvalidInputError, SolverFailure

RHO_MIN, RHO_MAX = 1e-6, 1e6
RHO_EQ_SCALE = 1e3


@dataclass
class QPSettings:
    eps_abs: float = 1e-8
    eps_rel: float = 1e-6
    max_iter: int = 50_000
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    scaling_iters: int = 10
    check_every: int = 25
    adapt_every: int = 100
    polish: bool = True
    polish_every: int = 100
    polish_delta: float = 1e-9
    polish_refine: int = 5
    polish_rounds: int = 30
    # ADMM iterations before handing a stalled problem to the interior-point
    # fallback; None keeps ADMM alone up to max_iter.
    fallback_after: int | None = 100
    ipm_max_iter: int = 100


@dataclass
class QPResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    iterations: int
    status: str
    prim_res: float
    dual_res: float
    polished: bool


def _ruiz(P, C, q, iters):
    nv, nc = P.shape[0], C.shape[0]
    D = np.ones(nv)
    E = np.ones(nc)
    Ps, Cs = P.copy(), C.copy()
    for _ in range(iters):
        col = np.max(np.abs(Ps), axis=0)
        if nc:
            col = np.maximum(col, np.max(np.abs(Cs), axis=0))
        d = 1.0 / np.sqrt(np.clip(col, 1e-4, 1e4))
        e = 1.0 / np.sqrt(np.clip(np.max(np.abs(Cs), axis=1), 1e-4, 1e4)) if nc else E
        Ps = d[:, None] * Ps * d[None, :]
        Cs = e[:, None] * Cs * d[None, :]
        D *= d
        E *= e
    qs = D * q
    c = 1.0 / np.clip(max(float(np.mean(np.max(np.abs(Ps), axis=0))), float(np.max(np.abs(qs), initial=0.0))),
                      1e-4, 1e4)
    return Ps * c, Cs, qs * c, D, E, c


def _residuals(P, q, C, l, u, x, y):
    """Unscaled primal/dual residuals and their normalising scales."""
    Cx = C @ x
    z = np.clip(Cx, l, u)
    Px = P @ x
    Cty = C.T @ y
    prim = float(np.max(np.abs(Cx - z), initial=0.0))
    ps = max(float(np.max(np.abs(Cx), initial=0.0)), float(np.max(np.abs(z), initial=0.0)))
    dual = float(np.max(np.abs(Px + q + Cty)))
    ds = max(float(np.max(np.abs(Px))), float(np.max(np.abs(Cty), initial=0.0)), float(np.max(np.abs(q))))
    return prim, ps, dual, ds


def _bound_rows(C):
    """For rows with a single nonzero, the variable index; -1 elsewhere."""
    nnz = np.count_nonzero(C, axis=1)
    var = np.argmax(C != 0, axis=1)
    return np.where(nnz == 1, var, -1)


def _kkt_solve(P, q, C, side, bounds, bvar, s: QPSettings):
    """KKT solve on an active set; active bound rows fix their variable.

    Returns ``(x, y)`` with multipliers for every row, or ``None``.
    """
    nv, nc = P.shape[0], C.shape[0]
    act = np.flatnonzero(side)
    fixed_rows = act[bvar[act] >= 0]
    # A variable pinned twice keeps only its first row as a bound.
    _, first = np.unique(bvar[fixed_rows], return_index=True)
    pin_rows = fixed_rows[np.sort(first)]
    pin_vars = bvar[pin_rows]
    gen_rows = np.setdiff1d(act, pin_rows)
    coef = C[pin_rows, pin_vars]
    x = np.zeros(nv)
    x[pin_vars] = bounds[pin_rows] / coef
    free = np.ones(nv, dtype=bool)
    free[pin_vars] = False
    F = np.flatnonzero(free)
    nf, k = F.size, gen_rows.size
    Cg = C[gen_rows]
    if nf:
        K = np.zeros((nf + k, nf + k))
        K[:nf, :nf] = P[np.ix_(F, F)]
        K[:nf, nf:] = Cg[:, F].T
        K[nf:, :nf] = Cg[:, F]
        rhs = np.concatenate([-q[F] - P[F] @ x, bounds[gen_rows] - Cg @ x])
        Kreg = K.copy()
        Kreg[:nf, :nf] += s.polish_delta * np.eye(nf)
        Kreg[nf:, nf:] -= s.polish_delta * np.eye(k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            try:
                lu = lu_factor(Kreg, check_finite=False)
            except (ValueError, np.linalg.LinAlgError):
                return None
        if not np.all(np.isfinite(lu[0].diagonal())) or np.any(lu[0].diagonal() == 0):
            return None
        sol = lu_solve(lu, rhs, check_finite=False)
        for _ in range(s.polish_refine):
            if not np.all(np.isfinite(sol)):
                return None
            sol = sol + lu_solve(lu, rhs - K @ sol, check_finite=False)
        if not np.all(np.isfinite(sol)):
            return None
        x[F] = sol[:nf]
        yg = sol[nf:]
    elif k:
        return None
    else:
        yg = np.zeros(0)
    y = np.zeros(nc)
    y[gen_rows] = yg
    stat = P @ x + q + Cg.T @ yg
    y[pin_rows] = -stat[pin_vars] / coef
    return x, y


def _pair_rows(C, l, pairs):
    """Lower-bound rows ``(rows_a, rows_b)`` for complementary variable pairs."""
    if pairs is None:
        return None
    bvar = _bound_rows(C)
    row_of = np.full(C.shape[1], -1)
    ok = (bvar >= 0) & np.isfinite(l)
    row_of[bvar[ok]] = np.flatnonzero(ok)
    ra, rb = row_of[np.asarray(pairs[0])], row_of[np.asarray(pairs[1])]
    if np.any(ra < 0) or np.any(rb < 0):
        raise InvalidInputError("every paired variable needs a lower-bound row")
    return ra, rb


def _close_pairs(side, prow, val):
    """Pin the smaller member of each pair that has both bounds released."""
    if prow is None:
        return
    ra, rb = prow
    both = (side[ra] == 0) & (side[rb] == 0)
    pick_a = val[ra] <= val[rb]
    side[ra[both & pick_a]] = -1
    side[rb[both & ~pick_a]] = -1


def _polish(P, q, C, l, u, z, y, s: QPSettings, bvar=None, rounds: int = 200, prow=None):
    """Active-set polish seeded from an ADMM iterate.

    Block principal pivoting: all violated constraints and wrong-signed
    multipliers are swapped at once while their count keeps falling; after
    three rounds without progress a single swap of the last infeasible row
    is made instead, which rules out cycling.  ``prow`` holds the bound rows
    of complementary pairs (``x_a x_b = 0`` at a solution); one member of
    each pair is kept active so the KKT system stays regular.
    """
    nc = C.shape[0]
    if bvar is None:
        bvar = _bound_rows(C)
    side = np.zeros(nc, dtype=np.int8)  # -1 lower, +1 upper, 0 inactive
    side[(z - l) < -y] = -1
    side[((u - z) < y) & (side == 0)] = 1
    _close_pairs(side, prow, z - l)
    best = nc + 1
    credit = 3
    for _ in range(rounds):
        bounds = np.where(side < 0, l, u)
        res = _kkt_solve(P, q, C, side, bounds, bvar, s)
        if res is None:
            return None
        x, y_full = res
        act = np.flatnonzero(side)
        ya = y_full[act]
        ytol = 1e-10 * max(1.0, float(np.max(np.abs(ya), initial=0.0)))
        wrong = act[((side[act] < 0) & (ya > ytol)) | ((side[act] > 0) & (ya < -ytol))]
        Cx = C @ x
        ptol = 1e-12 * max(1.0, float(np.max(np.abs(Cx), initial=0.0)))
        low_v = np.flatnonzero((side == 0) & (Cx < l - ptol))
        upp_v = np.flatnonzero((side == 0) & (Cx > u + ptol))
        count = wrong.size + low_v.size + upp_v.size
        if count == 0:
            y_full[side < 0] = np.minimum(y_full[side < 0], 0.0)
            y_full[side > 0] = np.maximum(y_full[side > 0], 0.0)
            y_full[side == 0] = 0.0
            return x, y_full
        if count < best:
            best, credit = count, 3
        else:
            credit -= 1
        if credit > 0:
            side[wrong] = 0
            side[low_v] = -1
            side[upp_v] = 1
        else:
            k = max(int(wrong.max(initial=-1)), int(low_v.max(initial=-1)), int(upp_v.max(initial=-1)))
            side[k] = 0 if side[k] else (-1 if Cx[k] < l[k] else 1)
        _close_pairs(side, prow, Cx - l)
    return None


def _interior(P, q, C, l, u, bvar, max_iter: int, tol: float = 1e-10):
    """Mehrotra predictor-corrector on ``l <= Cx <= u`` (no equality rows).

    Returns ``(x, y)`` in the same sign convention as ADMM (``y < 0`` on an
    active lower bound), or ``None`` when it does not converge.
    """
    nv = P.shape[0]
    lo = np.flatnonzero(np.isfinite(l))
    up = np.flatnonzero(np.isfinite(u))
    # Stack G x <= h as [-C_lo; C_up].
    rows = np.concatenate([lo, up])
    sign = np.concatenate([-np.ones(lo.size), np.ones(up.size)])
    h = np.concatenate([-l[lo], u[up]])
    nb = rows.size
    is_b = bvar[rows] >= 0
    brow, bv = np.flatnonzero(is_b), bvar[rows[is_b]]
    bcoef = sign[brow] * C[rows[brow], bv]
    grow = np.flatnonzero(~is_b)
    Gg = sign[grow, None] * C[rows[grow]]

    def G(x):
        out = np.empty(nb)
        out[brow] = bcoef * x[bv]
        out[grow] = Gg @ x
        return out

    def GT(v):
        out = np.zeros(nv)
        np.add.at(out, bv, bcoef * v[brow])
        return out + Gg.T @ v[grow]

    reg = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(P)))))
    x = np.zeros(nv)
    sl = np.maximum(h - G(x), 1.0)
    zl = np.ones(nb)
    scale_q = 1.0 + float(np.max(np.abs(q)))
    scale_h = 1.0 + float(np.max(np.abs(h), initial=0.0))
    for _ in range(max_iter):
        rd = P @ x + q + GT(zl)
        rp = G(x) + sl - h
        mu = float(sl @ zl) / max(nb, 1)
        if (np.max(np.abs(rd)) <= tol * scale_q and np.max(np.abs(rp), initial=0.0) <= tol * scale_h
                and mu <= tol * max(1.0, abs(float(x @ (P @ x)) * 0.5 + float(q @ x)))):
            y = np.zeros(C.shape[0])
            np.add.at(y, rows, sign * zl)
            return x, y
        w = zl / sl
        M = P + reg * np.eye(nv)
        M[bv, bv] += w[brow] * bcoef ** 2
        M += Gg.T @ (w[grow, None] * Gg)
        try:
            fac = cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            return None

        def newton(rc):
            rhs = -rd - GT((-rc + zl * rp) / sl)
            dx = cho_solve(fac, rhs, check_finite=False)
            ds = -rp - G(dx)
            dz = (-rc - zl * ds) / sl
            return dx, ds, dz

        def step(v, dv):
            neg = dv < 0
            return min(1.0, float(np.min(-v[neg] / dv[neg]))) if np.any(neg) else 1.0

        dx, ds, dz = newton(sl * zl)
        a_aff = min(step(sl, ds), step(zl, dz))
        mu_aff = float((sl + a_aff * ds) @ (zl + a_aff * dz)) / max(nb, 1)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        dx, ds, dz = newton(sl * zl + ds * dz - sigma * mu)
        a = 0.99 * min(step(sl, ds), step(zl, dz))
        x = x + a * dx
        sl = sl + a * ds
        zl = zl + a * dz
        if not (np.all(np.isfinite(x)) and np.all(sl > 0) and np.all(zl > 0)):
            return None
    return None


def solve_qp(P, q, C, l, u, settings: QPSettings | None = None, pairs=None) -> QPResult:
    """Solve the QP; ``pairs = (idx_a, idx_b)`` optionally names complementary
    nonnegative variables (split positive/negative parts) to help the polish."""
    s = settings or QPSettings()
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float)
    C = np.asarray(C, dtype=float)
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    nv, nc = P.shape[0], C.shape[0]
    if P.shape != (nv, nv) or q.shape != (nv,) or C.shape[1:] != (nv,) or l.shape != (nc,) or u.shape != (nc,):
        raise InvalidInputError("inconsistent QP dimensions")
    if np.any(l > u):
        raise InvalidInputError("QP bounds have l > u")

    Ps, Cs, qs, D, E, c = _ruiz(P, C, q, s.scaling_iters)
    ls, us = E * l, E * u
    Dinv, Einv, cinv = 1.0 / D, 1.0 / E, 1.0 / c
    eq = np.abs(us - ls) < 1e-12
    free = np.isinf(ls) & np.isinf(us)

    def rho_vector(r):
        v = np.full(nc, r)
        v[eq] *= RHO_EQ_SCALE
        v[free] = RHO_MIN
        return v

    def factor(rv):
        M = Ps + s.sigma * np.eye(nv) + Cs.T @ (rv[:, None] * Cs)
        return np.ascontiguousarray(np.tril(cho_factor(M, lower=True)[0]))

    bvar = _bound_rows(C)
    prow = _pair_rows(C, l, pairs)
    rho = s.rho
    rv = rho_vector(rho)
    L = factor(rv)
    x = np.zeros(nv)
    z = np.zeros(nc)
    y = np.zeros(nc)
    total = 0
    prim = dual = math.inf
    next_polish = s.polish_every

    def unscaled(xs, ys):
        return D * xs, E * ys * cinv

    def try_polish(xs, zs, ys, rounds=s.polish_rounds):
        xu, yu = unscaled(xs, ys)
        zu = Einv * zs
        res = _polish(P, q, C, l, u, zu, yu, s, bvar, rounds, prow)
        if res is None:
            return None
        xp, yp = res
        pr, ps_, du, ds_ = _residuals(P, q, C, l, u, xp, yp)
        if pr <= s.eps_abs + s.eps_rel * ps_ and du <= s.eps_abs + s.eps_rel * ds_:
            return QPResult(xp, yp, np.clip(C @ xp, l, u), total, "solved", pr, du, True)
        return None

    def fallback():
        ipm = _interior(Ps, qs, Cs, ls, us, bvar, s.ipm_max_iter)
        if ipm is None:
            return None
        xi, yi = ipm
        zi = np.clip(Cs @ xi, ls, us)
        res = try_polish(xi, zi, yi, 200) if s.polish else None
        if res is not None:
            return res
        xu, yu = unscaled(xi, yi)
        pr, ps_, du, ds_ = _residuals(P, q, C, l, u, xu, yu)
        if pr <= s.eps_abs + s.eps_rel * ps_ and du <= s.eps_abs + s.eps_rel * ds_:
            return QPResult(xu, yu, np.clip(C @ xu, l, u), total, "solved", pr, du, False)
        return None

    tried_ipm = False
    while total < s.max_iter:
        block = min(s.adapt_every, s.max_iter - total)
        x, z, y, it, conv, prim, dual = kernels.admm_block(
            L, Ps, qs, Cs, ls, us, rv, s.sigma, s.alpha, x, z, y,
            Dinv, Einv, cinv, s.eps_abs, s.eps_rel, block, s.check_every)
        total += it
        if conv:
            break
        if s.polish and total >= next_polish:
            next_polish += s.polish_every
            res = try_polish(x, z, y)
            if res is not None:
                return res
        if s.fallback_after is not None and total >= s.fallback_after and not tried_ipm and not np.any(eq):
            tried_ipm = True
            res = fallback()
            if res is not None:
                return res
        # Balance scaled primal and dual residuals through rho.
        Cx = Cs @ x
        Px = Ps @ x
        Cty = Cs.T @ y
        pr_n = np.max(np.abs(Cx - z)) / max(np.max(np.abs(Cx)), np.max(np.abs(z)), 1e-30)
        du_n = np.max(np.abs(Px + qs + Cty)) / max(np.max(np.abs(Px)), np.max(np.abs(Cty)),
                                                  np.max(np.abs(qs)), 1e-30)
        if du_n > 0 and pr_n > 0:
            new_rho = float(np.clip(rho * math.sqrt(pr_n / du_n), RHO_MIN, RHO_MAX))
            if new_rho > 5.0 * rho or new_rho < 0.2 * rho:
                rho = new_rho
                rv = rho_vector(rho)
                L = factor(rv)
    else:
        conv = False

    if s.polish:
        res = try_polish(x, z, y)
        if res is not None:
            return res
    xu, yu = unscaled(x, y)
    if not conv:
        raise SolverFailure(
            f"QP did not converge in {total} iterations (primal {prim:.2e}, dual {dual:.2e})")
    return QPResult(xu, yu, Einv * z, total, "solved", prim, dual, False)
