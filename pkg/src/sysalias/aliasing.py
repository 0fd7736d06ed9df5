"""Sampling bound, strip test, two-rate alias test and bounded alias enumeration."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError, InvalidProbeError, NumericFailure, UnsupportedDegenerateError
from .matfun import _check_log_domain, _square, expm, phi_integral, raw_eigenvalues
from .sysmodel import CTSystem, TimeSeries

EIG_GAP_TOL = 1e-6
REAL_TOL = 1e-8
PROBE_RATIO_TOL = 1e-9


@dataclass(frozen=True)
class SamplingBound:
    omega_min: float
    h_max: float
    max_abs_im: float

    def to_dict(self) -> dict:
        def enc(v):
            return v if math.isfinite(v) else "inf"
        return {"omega_min": self.omega_min, "h_max": enc(self.h_max), "max_abs_im": self.max_abs_im}


def sampling_bound(A) -> SamplingBound:
    """Largest period for which the principal log recovers ``A`` from ``exp(hA)``."""
    lam = raw_eigenvalues(A)
    m = float(np.max(np.abs(lam.imag))) if lam.size else 0.0
    h_max = math.pi / m if m > 0 else math.inf
    return SamplingBound(2.0 * m, h_max, m)


def in_strip(A, h: float) -> bool:
    """True iff every eigenvalue of ``A`` has ``|Im| < pi / h``."""
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    lam = raw_eigenvalues(A)
    return bool(np.all(np.abs(lam.imag) < math.pi / h))


# ---------------------------------------------------------------- alias test

def t_test_pvalue(x: np.ndarray) -> float:
    """Two-sided one-sample t-test of zero mean."""
    x = np.asarray(x, dtype=float)
    k = x.size
    if k < 2:
        raise InvalidInputError("t-test needs at least two observations")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / math.sqrt(k))
    nu = k - 1.0
    p, ok = kernels.betainc_reg(0.5 * nu, 0.5, nu / (nu + t * t))
    if not ok:
        raise NumericFailure("incomplete beta continued fraction did not converge")
    return float(min(1.0, max(0.0, p)))


@dataclass(frozen=True, eq=False)
class AliasTestReport:
    p_value: float
    reject: bool
    per_channel_p: np.ndarray
    errors_used: np.ndarray
    h1: float
    h2: float
    alpha: float

    def to_dict(self) -> dict:
        return {
            "p_value": self.p_value, "reject": self.reject, "alpha": self.alpha,
            "per_channel_p": self.per_channel_p.tolist(), "h1": self.h1, "h2": self.h2,
            "errors_used": self.errors_used.tolist(),
        }


def prediction_errors(model: CTSystem, probe: TimeSeries) -> np.ndarray:
    """One-step errors of ``model`` on ``probe`` at the probe's own period."""
    if probe.n != model.n or probe.m != model.m:
        raise InvalidInputError(
            f"probe has (n, m) = ({probe.n}, {probe.m}), model has ({model.n}, {model.m})")
    h2 = probe.h
    Y = probe.Y
    E = Y[:, 1:] - expm(h2 * model.A) @ Y[:, :-1]
    if model.m:
        E -= phi_integral(h2, model.A) @ model.B @ probe.U[:, :-1]
    # Round-off of an exact model should read as zero, not as a signal.
    floor = 1e-12 * max(1.0, float(np.max(np.abs(Y))))
    E[np.abs(E) <= floor] = 0.0
    return E


def alias_test(model: CTSystem, h1: float, probe: TimeSeries, alpha: float = 0.05) -> AliasTestReport:
    """Test whether ``model`` (fitted at period ``h1``) is an alias, using a probe at period h2.

    Zero-mean one-step prediction errors are expected when the model is the
    true system.  Channels are combined with a Bonferroni correction.  With
    inputs present, the inputs are assumed not to cancel the alias bias.
    """
    if not h1 > 0:
        raise InvalidInputError("h1 must be positive")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError("alpha must lie in (0, 1)")
    h2 = probe.h
    ratio = h2 / h1
    if round(ratio) >= 1 and abs(ratio - round(ratio)) <= PROBE_RATIO_TOL * max(1.0, ratio):
        raise InvalidProbeError(
            f"h2/h1 = {ratio:g} is an integer; exp(h2 A) cannot distinguish aliases")
    if probe.N < 5:
        raise InvalidInputError(f"probe needs at least 5 transitions, got {probe.N}")
    E = prediction_errors(model, probe)
    per = np.array([t_test_pvalue(row) for row in E])
    p = min(1.0, model.n * float(per.min()))
    return AliasTestReport(p, bool(p < alpha), per, E, float(h1), float(h2), float(alpha))


# ---------------------------------------------------------- alias enumeration

@dataclass(frozen=True, eq=False)
class BranchIndex:
    """Branch offsets ``j`` per distinct eigenvalue, with log(lambda) = a + i pi beta."""

    j: np.ndarray
    beta: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.j, dtype=np.int64)
        beta = np.asarray(self.beta, dtype=float)
        M = np.asarray(self.M, dtype=float)
        if M.ndim == 1:
            M = np.diag(M)
        if not (j.shape == beta.shape == (M.shape[0],) and M.shape[0] == M.shape[1]):
            raise InvalidInputError("branch index dimensions disagree")
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "M", M)


def branch_gap(j: BranchIndex, delta) -> float:
    """``d^T M d + (2 j + beta)^T M d``: growth of the squared weighted norm in units of 4 pi^2."""
    d = np.asarray(delta, dtype=float)
    if d.shape != j.j.shape:
        raise InvalidInputError(f"delta has shape {d.shape}, expected {j.j.shape}")
    Md = j.M @ d
    return float(d @ Md + (2.0 * j.j + j.beta) @ Md)


@dataclass(frozen=True, eq=False)
class AliasMember:
    A: np.ndarray
    j: np.ndarray
    weighted_norm: float

    def nnz(self, zero_tol: float) -> int:
        return int(np.count_nonzero(np.abs(self.A) > zero_tol))


@dataclass(frozen=True, eq=False)
class AliasSet:
    members: list
    Z: np.ndarray
    eigenvalues: np.ndarray
    beta: np.ndarray
    kappa: float
    h: float

    def __len__(self) -> int:
        return len(self.members)

    def branch_index(self, member: AliasMember) -> BranchIndex:
        return BranchIndex(member.j, self.beta, np.ones(self.beta.size))

    def to_dict(self, zero_tol: float = 1e-8) -> dict:
        return {
            "kappa": self.kappa, "h": self.h, "count": len(self.members),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "beta": self.beta.tolist(),
            "members": [{"j": m.j.tolist(), "weighted_norm": m.weighted_norm,
                         "nnz": m.nnz(zero_tol), "A": m.A.tolist()} for m in self.members],
        }


def _conjugate_basis(Ad: np.ndarray):
    """Eigen-decomposition of real ``Ad`` with exactly conjugate pairs.

    Order: real eigenvalues, then (upper, lower) pairs.  Returns
    ``(lam, Z, pair_slots)`` where ``pair_slots`` lists index pairs.
    """
    w, V = np.linalg.eig(Ad)
    scale = max(1.0, float(np.max(np.abs(w))))
    gaps = np.abs(w[:, None] - w[None, :])
    np.fill_diagonal(gaps, np.inf)
    if w.size > 1 and np.min(gaps) < EIG_GAP_TOL * scale:
        raise UnsupportedDegenerateError(
            "eigenvalues closer than the distinctness tolerance; enumeration needs distinct eigenvalues")
    real = np.abs(w.imag) <= 1e-12 * scale
    upper = np.flatnonzero(~real & (w.imag > 0))
    if 2 * upper.size != np.count_nonzero(~real):
        raise NumericFailure("unpaired complex eigenvalue of a real matrix")
    r_idx = np.flatnonzero(real)
    r_idx = r_idx[np.argsort(w[r_idx].real)]
    upper = upper[np.lexsort((w[upper].imag, w[upper].real))]
    lam = [complex(w[i].real) for i in r_idx]
    cols = [V[:, i].real / np.linalg.norm(V[:, i].real) for i in r_idx]
    slots = []
    for i in upper:
        slots.append((len(lam), len(lam) + 1))
        lam += [complex(w[i]), complex(np.conj(w[i]))]
        cols += [V[:, i], np.conj(V[:, i])]
    return np.array(lam), np.column_stack(cols).astype(complex), slots


def enumerate_aliases(Ad, h: float, kappa: float) -> AliasSet:
    """All real logarithms ``A`` of ``Ad`` (``exp(hA) = Ad``) with ``||Z^-1 A Z||_F <= kappa``."""
    Ad = _square(Ad, "Ad")
    if not np.isrealobj(Ad):
        raise InvalidInputError("Ad must be real")
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    if not kappa >= 0:
        raise InvalidInputError("kappa must be non-negative")
    _check_log_domain(Ad)
    lam, Z, slots = _conjugate_basis(Ad)
    Zinv = np.linalg.inv(Z)
    L0 = np.log(lam)
    beta = L0.imag / math.pi
    base_sq = float(np.sum(np.abs(L0) ** 2)) / h ** 2
    budget = h ** 2 * (kappa ** 2 - base_sq)
    members = []
    if budget >= -1e-12 * max(1.0, h ** 2 * kappa ** 2):
        # Each pair (upper d, lower -d) adds 8 pi^2 d (d + beta) >= 0 to h^2 ||.||^2.
        ranges = []
        for u, _ in slots:
            b = beta[u]
            rad = math.sqrt(max(0.0, b * b / 4.0 + budget / (8.0 * math.pi ** 2)))
            lo, hi = math.ceil(-b / 2.0 - rad - 1e-12), math.floor(-b / 2.0 + rad + 1e-12)
            ranges.append(range(lo, hi + 1))
        for ds in itertools.product(*ranges):
            j = np.zeros(lam.size, dtype=np.int64)
            for (u, lo_), d in zip(slots, ds):
                j[u], j[lo_] = d, -d
            L = L0 + 2j * math.pi * j
            norm = math.sqrt(float(np.sum(np.abs(L) ** 2))) / h
            if norm > kappa * (1.0 + 1e-12):
                continue
            A = (Z * L) @ Zinv / h
            if np.max(np.abs(A.imag)) > REAL_TOL * max(1.0, float(np.max(np.abs(A.real)))):
                continue
            members.append(AliasMember(np.ascontiguousarray(A.real), j, norm))
    members.sort(key=lambda m: (m.weighted_norm, tuple(m.j)))
    return AliasSet(members, Z, lam, beta, float(kappa), float(h))


def sparsest_alias(aliases: AliasSet, zero_tol: float = 1e-8) -> AliasMember:
    """Fewest entries above ``zero_tol``; ties go to smaller norm, then smaller ``j``."""
    if not aliases.members:
        raise InvalidInputError("alias set is empty")
    return min(aliases.members, key=lambda m: (m.nnz(zero_tol), m.weighted_norm, tuple(m.j)))
