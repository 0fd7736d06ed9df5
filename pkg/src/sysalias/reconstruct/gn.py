"""l1-regularised prediction-error fit of (A, B) by a modified Gauss-Newton method."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import (BranchUndefinedError, InvalidDirectionError, InvalidInputError,
                      NumericFailure, SysAliasError)
from ..matfun import expm, kronecker_K, logm_principal, phi_integral, raw_eigenvalues, sK_integral, vec
from ..sysmodel import BooleanNetwork, CTSystem, TimeSeries, boolean_network
from .qp import QPSettings, solve_qp

log = logging.getLogger(__name__)

MODES = ("A", "AB")
S_MIN = 1e-12
SNAP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ResidualContext:
    Xplus: np.ndarray
    Xminus: np.ndarray
    Uminus: np.ndarray
    h: float

    @classmethod
    def from_series(cls, series: TimeSeries) -> "ResidualContext":
        return cls(series.Y[:, 1:], series.Y[:, :-1], series.U[:, :-1], series.h)

    @property
    def n(self) -> int:
        return self.Xplus.shape[0]

    @property
    def m(self) -> int:
        return self.Uminus.shape[0]

    @property
    def N(self) -> int:
        return self.Xplus.shape[1]


@dataclass
class SolverOptions:
    lam: float = 0.01
    alpha: float = 0.25
    beta: float = 0.5
    delta: float = 1e-6
    max_iter: int = 100
    mode: str = "A"
    diagonal_B: bool = False
    init: str = "ls-logm"
    eps: float = 0.0  # accepted for completeness; the programs use "<= 0" as written
    zero_threshold: float = 1e-6
    qp: QPSettings = field(default_factory=QPSettings)
    B_fixed: np.ndarray | None = None

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidInputError("lambda must be non-negative")
        if not 0 < self.alpha < 0.5:
            raise InvalidInputError("alpha must lie in (0, 0.5)")
        if not 0 < self.beta < 1:
            raise InvalidInputError("beta must lie in (0, 1)")
        if not self.delta > 0:
            raise InvalidInputError("delta must be positive")
        if self.max_iter < 0:
            raise InvalidInputError("max_iter must be non-negative")
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}")
        if self.init not in ("ls-logm", "zero"):
            raise InvalidInputError("init must be 'ls-logm' or 'zero'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["B_fixed"] = None if self.B_fixed is None else np.asarray(self.B_fixed).tolist()
        return d


@dataclass
class GNState:
    A: np.ndarray
    B: np.ndarray
    iteration: int
    objective: float
    step_norm: float


# -------------------------------------------------------------- residuals

def _check_dims(A, B, ctx: ResidualContext):
    if A.shape != (ctx.n, ctx.n):
        raise InvalidInputError(f"A has shape {A.shape}, expected {(ctx.n, ctx.n)}")
    if B.shape != (ctx.n, ctx.m):
        raise InvalidInputError(f"B has shape {B.shape}, expected {(ctx.n, ctx.m)}")


def residual(A, B, ctx: ResidualContext) -> np.ndarray:
    """vec(X+ - exp(hA) X- - Phi(h, A) B U-)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(ctx.n, ctx.m)
    _check_dims(A, B, ctx)
    R = ctx.Xplus - expm(ctx.h * A) @ ctx.Xminus
    if ctx.m:
        R = R - phi_integral(ctx.h, A) @ (B @ ctx.Uminus)
    return vec(R)


def objective(A, B, ctx: ResidualContext, lam: float) -> float:
    r = residual(A, B, ctx)
    return float(r @ r + lam * np.sum(np.abs(A)))


def _left_kron(Xm: np.ndarray, K: np.ndarray) -> np.ndarray:
    """(Xm^T kron I_n) K without forming the Kronecker product."""
    n = Xm.shape[0]
    return np.einsum("jk,jac->kac", Xm, K.reshape(n, n, -1)).reshape(Xm.shape[1] * n, -1)


def jacobian_A(A, B, ctx: ResidualContext) -> np.ndarray:
    """-h (X-^T kron I) K(hA) - (U-^T B^T kron I) int_0^h s K(sA) ds."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(ctx.n, ctx.m)
    _check_dims(A, B, ctx)
    J = -ctx.h * _left_kron(ctx.Xminus, kronecker_K(ctx.h * A))
    if ctx.m and np.any(B) and np.any(ctx.Uminus):
        J -= _left_kron(B @ ctx.Uminus, sK_integral(ctx.h, A))
    return J


def jacobian_B(A, ctx: ResidualContext, diagonal: bool = False) -> np.ndarray:
    """-(U-^T kron Phi(h, A)); diagonal mode keeps the columns of B_ii only."""
    A = np.asarray(A, dtype=float)
    n, m = ctx.n, ctx.m
    if m == 0:
        return np.zeros((n * ctx.N, 0))
    J = -np.kron(ctx.Uminus.T, phi_integral(ctx.h, A))
    if diagonal:
        if m != n:
            raise InvalidInputError("diagonal B requires as many inputs as outputs")
        J = J[:, np.arange(n) * (n + 1)]
    return J


def _b_params(B, diagonal: bool) -> np.ndarray:
    return np.diag(B).copy() if diagonal else vec(B).copy()


def _b_from_params(b, n, m, diagonal: bool) -> np.ndarray:
    return np.diag(b) if diagonal else b.reshape((n, m), order="F")


# -------------------------------------------------------------- subproblem

def directional_derivative(A_k, grad_phi, p, lam: float) -> float:
    """g_bar^T p + lam ||W p_A||_1 with g_bar = grad + lam sgn(a) on the A block."""
    a = vec(np.asarray(A_k, dtype=float))
    grad_phi = np.asarray(grad_phi, dtype=float)
    p = np.asarray(p, dtype=float)
    na = a.size
    if grad_phi.shape != p.shape or p.size < na:
        raise InvalidInputError("gradient and direction lengths disagree")
    sgn = np.sign(a)
    pa = p[:na]
    return float(grad_phi @ p + lam * (sgn @ pa) + lam * np.sum(np.abs(pa[sgn == 0])))


@dataclass
class Subproblem:
    p: np.ndarray
    f_prime: float
    qp_iterations: int


def solve_subproblem(r, J, A_k, lam: float, settings: QPSettings | None = None) -> Subproblem:
    """min ||r + J p||^2 + lam ||a + p_A||_1  s.t.  g_bar^T p + lam ||W p_A||_1 <= 0.

    Columns of ``J`` beyond the first n^2 belong to unpenalised parameters.
    The l1 terms are lifted by splitting ``a + p_A = s+ - s-`` with
    ``s+, s- >= 0``; on the zero entries of ``a`` the same split bounds
    ``|p_A|`` in the descent constraint.
    """
    a = vec(np.asarray(A_k, dtype=float))
    r = np.asarray(r, dtype=float)
    J = np.asarray(J, dtype=float)
    na, nparam = a.size, J.shape[1]
    nb = nparam - na
    if J.shape[0] != r.size or nb < 0:
        raise InvalidInputError("Jacobian and residual dimensions disagree")
    grad = 2.0 * J.T @ r
    gbar = grad.copy()
    gbar[:na] += lam * np.sign(a)
    zero = (a == 0.0).astype(float)

    # p = M x - [a; 0] with x = [s+, s-, p_B].
    JA, JB = J[:, :na], J[:, na:]
    JM = np.hstack([JA, -JA, JB])
    r0 = r - JA @ a
    P = 2.0 * JM.T @ JM
    q = 2.0 * JM.T @ r0
    q[:2 * na] += lam
    nv = 2 * na + nb
    C = np.zeros((2 * na + 1, nv))
    C[np.arange(2 * na), np.arange(2 * na)] = 1.0
    lo = np.concatenate([np.zeros(2 * na), [-np.inf]])
    hi = np.full(2 * na + 1, np.inf)
    C[-1, :na] = gbar[:na] + lam * zero
    C[-1, na:2 * na] = -gbar[:na] + lam * zero
    C[-1, 2 * na:] = gbar[na:]
    hi[-1] = gbar[:na] @ a

    pairs = (np.arange(na), np.arange(na, 2 * na))
    iters = 0
    for _ in range(3):
        res = solve_qp(P, q, C, lo, hi, settings, pairs=pairs)
        iters += res.iterations
        sp = np.maximum(res.x[:na], 0.0)
        sm = np.maximum(res.x[na:2 * na], 0.0)
        net = sp - sm
        # Land exactly on zero where the step cancels an entry.
        net[np.abs(net) <= SNAP_TOL * (1.0 + np.abs(a))] = 0.0
        p = np.concatenate([net - a, res.x[2 * na:]])
        f_prime = directional_derivative(ivec_like(a), grad, p, lam)
        if f_prime <= 0.0:
            break
        # QP tolerance left the descent constraint slightly violated: tighten it.
        hi[-1] -= 2.0 * f_prime
    return Subproblem(p, f_prime, iters)


def ivec_like(a: np.ndarray) -> np.ndarray:
    n = int(round(math.sqrt(a.size)))
    return a.reshape((n, n), order="F")


# -------------------------------------------------------------- line search

def line_search(f, f0: float, f_prime: float, alpha: float, beta: float, s_min: float = S_MIN):
    """Backtracking Armijo search over s in {1, beta, beta^2, ...}.

    ``f(s)`` evaluates the objective at the trial point.  Returns ``(s, f(s))``
    or ``(0.0, f0)`` when ``s`` falls below ``s_min``.
    """
    if f_prime > 0:
        raise InvalidDirectionError(f"directional derivative {f_prime:.3e} is positive")
    s = 1.0
    while s >= s_min:
        try:
            val = f(s)
        except (NumericFailure, InvalidInputError):
            val = math.inf
        if math.isfinite(val) and val <= f0 + alpha * s * f_prime:
            return s, val
        s *= beta
    return 0.0, f0


# -------------------------------------------------------------- driver

@dataclass
class ReconstructResult:
    A: np.ndarray
    B: np.ndarray
    state: GNState
    objective_trace: list
    step_norms: list
    step_sizes: list
    f_primes: list
    termination: str
    init_fallback: bool
    options: SolverOptions

    @property
    def system(self) -> CTSystem:
        return CTSystem(self.A, self.B, np.eye(self.A.shape[0]))

    def network(self, threshold: float | None = None) -> BooleanNetwork:
        t = threshold if threshold is not None else self.options.zero_threshold * max(
            float(np.max(np.abs(self.A), initial=0.0)), 1e-300)
        return boolean_network(self.A, self.B, t)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(), "B": self.B.tolist(),
            "objective_trace": self.objective_trace, "step_norms": self.step_norms,
            "step_sizes": self.step_sizes, "iterations": self.state.iteration,
            "termination": self.termination, "init_fallback": self.init_fallback,
            "options": self.options.to_dict(),
        }


def least_squares_discrete(ctx: ResidualContext):
    """Ordinary least squares [Ad, Bd] = X+ [X-; U-]^+."""
    Z = np.vstack([ctx.Xminus, ctx.Uminus])
    G = ctx.Xplus @ np.linalg.pinv(Z)
    return G[:, :ctx.n], G[:, ctx.n:]


def initial_guess(ctx: ResidualContext, opts: SolverOptions):
    """(A0, B0, fell_back): principal log of the least-squares Ad, or zero."""
    n, m, h = ctx.n, ctx.m, ctx.h
    Ad, Bd = least_squares_discrete(ctx)
    fallback = False
    if opts.init == "zero":
        A0 = np.zeros((n, n))
    else:
        try:
            A0 = logm_principal(Ad) / h
            if not np.all(np.isfinite(A0)) or np.max(raw_eigenvalues(A0).real) >= 0:
                raise NumericFailure("unstable initial drift")
        except (BranchUndefinedError, InvalidInputError, NumericFailure):
            A0 = np.zeros((n, n))
            fallback = True
    if m == 0:
        B0 = np.zeros((n, 0))
    else:
        Phi = phi_integral(h, A0)
        if np.linalg.cond(Phi) < 1e12:
            B0 = np.linalg.solve(Phi, Bd)
        else:
            B0 = Bd / h
        if opts.diagonal_B:
            B0 = np.diag(np.diag(B0))
    return A0, B0, fallback


def gradient_phi(A, B, ctx: ResidualContext, opts: SolverOptions):
    """(residual, stacked Jacobian, 2 J^T r) for the free parameters of ``opts.mode``."""
    r = residual(A, B, ctx)
    J = jacobian_A(A, B, ctx)
    if opts.mode == "AB" and ctx.m:
        J = np.hstack([J, jacobian_B(A, ctx, opts.diagonal_B)])
    return r, J, 2.0 * J.T @ r


def reconstruct(series: TimeSeries | ResidualContext, opts: SolverOptions | None = None,
                A0=None, B0=None, callback=None) -> ReconstructResult:
    """Run the modified Gauss-Newton iteration from the least-squares/log start."""
    opts = opts or SolverOptions()
    ctx = series if isinstance(series, ResidualContext) else ResidualContext.from_series(series)
    n, m = ctx.n, ctx.m
    if ctx.N < n:
        warnings.warn(f"only {ctx.N} transitions for {n} states; the fit is underdetermined",
                      stacklevel=2)
    if opts.diagonal_B and m != n:
        raise InvalidInputError("diagonal B requires as many inputs as outputs")
    Ai, Bi, fell_back = initial_guess(ctx, opts)
    A = Ai if A0 is None else np.array(A0, dtype=float)
    B = Bi if B0 is None else np.array(B0, dtype=float).reshape(n, m)
    if opts.mode == "A" and m and opts.B_fixed is not None:
        B = np.array(opts.B_fixed, dtype=float).reshape(n, m)
    joint = opts.mode == "AB" and m > 0
    diag = opts.diagonal_B

    def f_at(Am, Bm):
        val = objective(Am, Bm, ctx, opts.lam)
        if not math.isfinite(val):
            raise NumericFailure("objective is not finite")
        return val

    f = f_at(A, B)
    trace, norms, sizes, fps = [f], [], [], []
    termination = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        r, J, _ = gradient_phi(A, B, ctx, opts)
        sub = solve_subproblem(r, J, A, opts.lam, opts.qp)
        p = sub.p
        fp = sub.f_prime
        scale = max(1.0, abs(f))
        if fp > 1e-8 * scale:
            raise InvalidDirectionError(f"subproblem returned an ascent direction ({fp:.3e})")
        fp = min(fp, 0.0)
        pA = p[:n * n].reshape((n, n), order="F")
        pB = _b_from_params(p[n * n:], n, m, diag) if joint else np.zeros((n, m))
        if not np.any(p):
            termination = "stationary"
            it -= 1
            break

        def trial(s):
            return f_at(A + s * pA, B + s * pB)

        s, f_new = line_search(trial, f, fp, opts.alpha, opts.beta)
        fps.append(fp)
        if s == 0.0:
            termination = "line_search"
            it -= 1
            break
        A_new = A + s * pA
        B_new = B + s * pB
        step = float(np.linalg.norm(A_new - A, 2))
        A, B, f = A_new, B_new, f_new
        trace.append(f)
        norms.append(step)
        sizes.append(s)
        log.debug("iter %d f=%.6e step=%.3e s=%.3g", it, f, step, s)
        if callback is not None:
            callback(GNState(A, B, it, f, step), sub)
        if step < opts.delta:
            termination = "step_small"
            break
    state = GNState(A, B, it, f, norms[-1] if norms else 0.0)
    return ReconstructResult(A, B, state, trace, norms, sizes, fps, termination, fell_back, opts)


# -------------------------------------------------------------- utilities

@dataclass(frozen=True)
class KKTReport:
    ok: bool
    max_zero_violation: float
    max_nonzero_violation: float
    max_free_gradient: float


def kkt_check(A, B, ctx: ResidualContext, opts: SolverOptions, tol: float = 1e-6) -> KKTReport:
    """0 in the subdifferential: |g_i| <= lam on zeros, g_i + lam sgn(a_i) = 0 elsewhere."""
    _, _, grad = gradient_phi(A, B, ctx, opts)
    na = ctx.n * ctx.n
    a = vec(np.asarray(A, dtype=float))
    g = grad[:na]
    zero = a == 0.0
    zv = float(np.max(np.abs(g[zero]) - opts.lam, initial=0.0))
    nzv = float(np.max(np.abs(g[~zero] + opts.lam * np.sign(a[~zero])), initial=0.0))
    free = float(np.max(np.abs(grad[na:]), initial=0.0))
    return KKTReport(zv <= tol and nzv <= tol and free <= tol, max(zv, 0.0), nzv, free)


def estimate_noise_covariance(A, B, ctx: ResidualContext) -> np.ndarray:
    """(1/N) sum of outer products of one-step prediction errors."""
    E = residual(A, B, ctx).reshape((ctx.n, ctx.N), order="F")
    return E @ E.T / ctx.N


def lambda_grid(lo: float = 1e-4, hi: float = 100.0, num: int = 13) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), num)


def lambda_sweep(series: TimeSeries, lambdas, opts: SolverOptions | None = None) -> list:
    """One reconstruction per lambda; failures are recorded as exceptions in place."""
    base = opts or SolverOptions()
    out = []
    for lam in lambdas:
        o = SolverOptions(**{**base.__dict__, "lam": float(lam)})
        try:
            out.append(reconstruct(series, o))
        except SysAliasError as exc:
            out.append(exc)
    return out
