"""Dense matrix functions: exp, principal log, spectra, Frechet derivatives.

All vectorisation uses column-major ``vec`` (stacking columns), so that
``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import BranchUndefinedError, InvalidInputError, NumericFailure

# An eigenvalue counts as lying on the negative real axis inside this band.
BRANCH_TOL = 1e-10
QUAD_NODES = 16
_SQRT_TOL = 1e-14
_LOG_PADE_DEGREE = 7
_KRON_GL_NODES = 10
_KRON_AUGMENTED_MAX_N = 8


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def ivec(v: np.ndarray, n: int, m: int | None = None) -> np.ndarray:
    return np.asarray(v).reshape((n, n if m is None else m), order="F")


@lru_cache(maxsize=8)
def gauss_legendre(k: int, a: float = 0.0, b: float = 1.0):
    """Nodes and weights of the k-point Gauss-Legendre rule on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(k)
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _square(X, name="X") -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1] or X.shape[0] == 0:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if X.dtype.kind not in "fc":
        X = X.astype(float)
    return X


def expm(X) -> np.ndarray:
    """Matrix exponential by [13/13] Pade scaling and squaring."""
    X = _square(X)
    if kernels.is_real64(X):
        F = kernels.expm_ss(np.ascontiguousarray(X))
    else:
        F = kernels._ref.expm_ss(X)
    if not np.all(np.isfinite(F)):
        raise NumericFailure("matrix exponential overflowed")
    return F


@dataclass(frozen=True)
class Spectrum:
    """Distinct eigenvalues with algebraic multiplicities."""

    eigenvalues: np.ndarray
    multiplicities: np.ndarray

    @property
    def n(self) -> int:
        return int(self.multiplicities.sum())

    def expanded(self) -> np.ndarray:
        return np.repeat(self.eigenvalues, self.multiplicities)

    @property
    def max_abs_imag(self) -> float:
        return float(np.max(np.abs(self.eigenvalues.imag))) if self.eigenvalues.size else 0.0


def _pair_conjugates(lam: np.ndarray, tol: float) -> np.ndarray:
    """Force exact conjugate symmetry on the spectrum of a real matrix."""
    lam = lam.astype(complex).copy()
    real_mask = np.abs(lam.imag) <= tol * np.maximum(1.0, np.abs(lam))
    lam[real_mask] = lam[real_mask].real
    upper = np.flatnonzero(lam.imag > 0)
    lower = list(np.flatnonzero(lam.imag < 0))
    for i in upper:
        if not lower:
            raise NumericFailure("unpaired complex eigenvalue of a real matrix")
        j = min(lower, key=lambda k: abs(lam[k] - np.conj(lam[i])))
        lower.remove(j)
        mid = 0.5 * (lam[i] + np.conj(lam[j]))
        lam[i] = mid
        lam[j] = np.conj(mid)
    if lower:
        raise NumericFailure("unpaired complex eigenvalue of a real matrix")
    return lam


def raw_eigenvalues(X) -> np.ndarray:
    X = _square(X)
    try:
        lam = np.linalg.eigvals(X)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigenvalue iteration failed: {exc}") from exc
    if np.isrealobj(X):
        lam = _pair_conjugates(lam, 1e-12)
    order = np.lexsort((lam.imag, lam.real))
    return lam[order]


def eigenvalues(X, cluster_tol: float = 1e-8) -> Spectrum:
    """Spectrum of ``X``; eigenvalues closer than ``cluster_tol`` (relative) are merged."""
    lam = raw_eigenvalues(X)
    distinct: list[complex] = []
    mult: list[int] = []
    for z in lam:
        for k, w in enumerate(distinct):
            if abs(z - w) <= cluster_tol * max(1.0, abs(w)):
                mult[k] += 1
                break
        else:
            distinct.append(complex(z))
            mult.append(1)
    return Spectrum(np.array(distinct, dtype=complex), np.array(mult, dtype=int))


def _check_log_domain(P: np.ndarray) -> None:
    lam = np.linalg.eigvals(P)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.min(np.abs(lam)) <= P.shape[0] * np.finfo(float).eps * scale:
        raise InvalidInputError("matrix is singular; its logarithm does not exist")
    on_axis = (np.abs(lam.imag) < BRANCH_TOL) & (lam.real < 0)
    if np.any(on_axis):
        raise BranchUndefinedError(
            f"eigenvalue {lam[on_axis][0]} lies on the negative real axis; "
            "the principal logarithm is undefined")


def logm_principal(P) -> np.ndarray:
    """Principal matrix logarithm by inverse scaling and squaring.

    Takes repeated principal square roots until ``||X - I||_1 < 0.25``, applies a
    degree-7 Pade approximant of ``log(I + .)`` and rescales.  Real input gives
    real output.
    """
    P = _square(P, "P")
    _check_log_domain(P)
    real = kernels.is_real64(P)
    sqrt = kernels.sqrtm_db if real else kernels._ref.sqrtm_db
    X = np.ascontiguousarray(P)
    n = X.shape[0]
    ident = np.eye(n)
    s = 0
    while np.max(np.sum(np.abs(X - ident), axis=0)) >= 0.25:
        X, _, ok = sqrt(X, _SQRT_TOL * n, 100)
        if not ok or not np.all(np.isfinite(X)):
            raise NumericFailure("square-root iteration did not converge")
        s += 1
        if s > 64:
            raise NumericFailure("too many square roots in inverse scaling and squaring")
    nodes, weights = gauss_legendre(_LOG_PADE_DEGREE)
    pade = kernels.log1p_pade if real else kernels._ref.log1p_pade
    L = pade(np.ascontiguousarray(X - ident), np.asarray(nodes), np.asarray(weights))
    return (2.0 ** s) * L


def frechet_exp(X, E) -> np.ndarray:
    """L_exp(X, E), read off the top-right block of exp([[X, E], [0, X]])."""
    X = _square(X)
    E = _square(E, "E")
    if E.shape != X.shape:
        raise InvalidInputError(f"dimension mismatch: X {X.shape} vs E {E.shape}")
    n = X.shape[0]
    dtype = np.result_type(X, E, float)
    aug = np.zeros((2 * n, 2 * n), dtype=dtype)
    aug[:n, :n] = X
    aug[:n, n:] = E
    aug[n:, n:] = X
    return expm(aug)[:n, n:]


def frechet_log(X, E, nodes: int = QUAD_NODES) -> np.ndarray:
    """L_log(X, E) = int_0^1 (t(X-I)+I)^-1 E (t(X-I)+I)^-1 dt by Gauss-Legendre."""
    X = _square(X)
    E = _square(E, "E")
    if E.shape != X.shape:
        raise InvalidInputError(f"dimension mismatch: X {X.shape} vs E {E.shape}")
    _check_log_domain(X)
    n = X.shape[0]
    ident = np.eye(n)
    D = X - ident
    ts, ws = gauss_legendre(nodes)
    out = np.zeros(X.shape, dtype=np.result_type(X, E, float))
    for t, w in zip(ts, ws):
        Rt = t * D + ident
        if np.linalg.cond(Rt) > 1e14:
            raise NumericFailure(f"resolvent is singular at quadrature node t={t:.4f}")
        G = np.linalg.solve(Rt, E)
        out += w * np.linalg.solve(Rt.T, G.T).T
    return out


def kron_sum(X, Y) -> np.ndarray:
    """Kronecker sum X (+) Y = X kron I + I kron Y."""
    m, n = X.shape[0], Y.shape[0]
    return np.kron(X, np.eye(n)) + np.kron(np.eye(m), Y)


def kronecker_K(X) -> np.ndarray:
    """K(X) with vec(L_exp(X, E)) = K(X) vec(E).

    Uses K(X) = (I kron e^X) psi(M), M = X^T (+) (-X), psi(x) = (e^x - 1)/x.
    Small X go through one augmented exponential of size 2n^2.  For larger X,
    since exp(tM) = exp(tX^T) kron exp(-tX), psi(M) = int_0^1 exp(tM) dt is
    built from small exponentials: a Gauss-Legendre rule on [0, 2^-s] where
    ||2^-s M|| <= 1, then s doublings Phi(2t) = Phi(t) (I + exp(tM)).
    """
    X = _square(X)
    n = X.shape[0]
    if n <= _KRON_AUGMENTED_MAX_N:
        return kronecker_K_augmented(X)
    nu = 2.0 * float(np.max(np.sum(np.abs(X), axis=0)))
    s = max(0, int(np.ceil(np.log2(nu)))) if nu > 0 else 0
    t = 2.0 ** -s
    ts, ws = gauss_legendre(_KRON_GL_NODES, 0.0, t)
    Phi = np.zeros((n * n, n * n), dtype=X.dtype)
    for tk, wk in zip(ts, ws):
        Phi += wk * np.kron(expm(tk * X.T), expm(-tk * X))
    ident = np.eye(n * n)
    for _ in range(s):
        Phi = Phi @ (ident + np.kron(expm(t * X.T), expm(-t * X)))
        t *= 2.0
    eX = expm(X)
    # I kron e^X is block diagonal: each n-row block of psi is hit by e^X.
    return (eX @ Phi.reshape(n, n, n * n)).reshape(n * n, n * n)


def kronecker_K_augmented(X) -> np.ndarray:
    """K(X) with psi evaluated through one 2n^2 augmented exponential."""
    X = _square(X)
    n = X.shape[0]
    psi = phi_integral(1.0, kron_sum(X.T, -X))
    return (expm(X) @ psi.reshape(n, n, n * n)).reshape(n * n, n * n)


def phi_integral(h: float, X) -> np.ndarray:
    """int_0^h exp(sX) ds from exp(h [[X, I], [0, 0]])."""
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    X = _square(X)
    n = X.shape[0]
    aug = np.zeros((2 * n, 2 * n), dtype=np.result_type(X, float))
    aug[:n, :n] = h * X
    aug[:n, n:] = h * np.eye(n)
    return expm(aug)[:n, n:]


def lyapunov_integral(h: float, X, R) -> np.ndarray:
    """R_d = int_0^h e^{sX} R R^T e^{sX^T} ds by Van Loan's block exponential.

    ``R`` is the diffusion gain of ``dx = ... + R dw``; the increment covariance
    is ``R R^T``.
    """
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    X = _square(X)
    R = _square(R, "R")
    if R.shape != X.shape:
        raise InvalidInputError(f"dimension mismatch: X {X.shape} vs R {R.shape}")
    if not np.allclose(R, R.T, rtol=0.0, atol=1e-12 * max(1.0, np.max(np.abs(R)))):
        raise InvalidInputError("R must be symmetric")
    n = X.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = -X
    aug[:n, n:] = R @ R.T
    aug[n:, n:] = X.T
    F = expm(h * aug)
    Rd = F[n:, n:].T @ F[:n, n:]
    return 0.5 * (Rd + Rd.T)


def sK_integral(h: float, X, nodes: int = QUAD_NODES) -> np.ndarray:
    """int_0^h s K(sX) ds by Gauss-Legendre quadrature."""
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    X = _square(X)
    n = X.shape[0]
    ss, ws = gauss_legendre(nodes, 0.0, float(h))
    out = np.zeros((n * n, n * n))
    for s, w in zip(ss, ws):
        out += (w * s) * kronecker_K(s * X)
    return out
