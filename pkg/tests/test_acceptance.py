"""Acceptance criteria 1-9; conftest prints one PASS/FAIL line per criterion."""
import math
import time

import numpy as np
import pytest

from oracles import central_diff, expm_taylor
from test_aliasing import enumeration_vs_bruteforce, norm_gap_identity_error, random_pair_system, rotation
from test_simulate import sampler_vs_euler
from sysalias.aliasing import alias_test, enumerate_aliases, in_strip, sampling_bound
from sysalias.errors import BranchUndefinedError
from sysalias.evalharness import run_batch
from sysalias.matfun import expm, frechet_exp, kronecker_K, logm_principal, vec
from sysalias.reconstruct.gn import (ResidualContext, SolverOptions, jacobian_A, jacobian_B,
                                     kkt_check, reconstruct, residual)
from sysalias.simulate import ExperimentConfig, generate_dataset, noise_scale, simulate_series
from sysalias.sysmodel import CTSystem

# committed from the 10-system pilot (seeds 4000-4009) before the full study ran
STUDY_AUC_FLOOR = 0.55


def timed(budget):
    def check(t0):
        elapsed = time.perf_counter() - t0
        assert elapsed < budget, f"took {elapsed:.1f} s, budget {budget} s"
    return check


@pytest.mark.criterion("1 matrix-function oracles")
def test_c1_matrix_functions():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        X = rng.standard_normal((5, 5))
        X /= max(1.0, np.linalg.norm(X, 2)) * rng.uniform(1.0, 2.0)
        ref = expm_taylor(X)
        worst = max(worst, np.linalg.norm(expm(X) - ref) / np.linalg.norm(ref))
    assert worst <= 1e-10, worst

    rng = np.random.default_rng(2024)
    inside = outside = 0
    for _ in range(100):
        A = random_pair_system(rng)
        h = rng.uniform(0.2, 1.8) * sampling_bound(A).h_max
        try:
            err = np.max(np.abs(logm_principal(expm(h * A)) / h - A))
        except BranchUndefinedError:
            err = np.inf
        if in_strip(A, h):
            inside += 1
            assert err <= 1e-8 * max(1.0, np.max(np.abs(A))), err
        else:
            outside += 1
            assert err > 1e-3
    assert inside and outside
    timed(10)(t0)


@pytest.mark.criterion("2 Frechet/Kronecker identity")
def test_c2_frechet_kronecker():
    rng = np.random.default_rng(2)
    for _ in range(20):
        A = rng.standard_normal((4, 4))
        E = rng.standard_normal((4, 4))
        L = frechet_exp(A, E)
        KvE = kronecker_K(A) @ vec(E)
        assert np.linalg.norm(KvE - vec(L)) <= 1e-8
        fd = vec(central_diff(expm, A, E))
        assert np.linalg.norm(vec(L) - fd) <= 1e-4 * np.linalg.norm(fd)
        assert np.linalg.norm(KvE - fd) <= 1e-4 * np.linalg.norm(fd)


@pytest.mark.criterion("3 sampling-bound boundary")
def test_c3_rotation_boundary():
    t0 = time.perf_counter()
    w = math.pi / 2
    A = rotation(w)
    assert sampling_bound(A).h_max == pytest.approx(2.0, rel=1e-14)
    h = 1.9
    assert np.max(np.abs(logm_principal(expm(h * A)) / h - A)) <= 1e-8
    h = 2.5
    recovered = logm_principal(expm(h * A)) / h
    assert np.max(np.abs(recovered - rotation(w - 2 * math.pi / h))) <= 1e-8
    assert np.max(np.abs(recovered - A)) > 1.0
    timed(1)(t0)


def alias_rejection_rates(seeds):
    """Reject counts of the alias and of the truth; sampled at h1, probed at h2 = 1.5 h1."""
    sigma, w, h1 = 0.1, math.pi / 2, 0.1
    A = rotation(w, sigma)
    alias = rotation(w - 2 * math.pi / h1, sigma)
    assert np.allclose(expm(h1 * A), expm(h1 * alias), atol=1e-12)
    none = np.zeros((2, 0))
    cfg = ExperimentConfig(n=2, N=10, h=1.5 * h1, snr_db=0.0, x0_mean=5.0)
    truth = CTSystem(A, none, noise_scale(A, 1.5 * h1, cfg) * np.eye(2))
    hit_alias = hit_truth = 0
    for s in seeds:
        probe = simulate_series(truth, cfg, seed=s).series
        hit_alias += alias_test(CTSystem(alias, none, np.eye(2)), h1, probe, 0.05).reject
        hit_truth += alias_test(CTSystem(A, none, np.eye(2)), h1, probe, 0.05).reject
    return hit_alias / len(seeds), hit_truth / len(seeds)


@pytest.mark.criterion("4 alias test power/size")
def test_c4_alias_test():
    t0 = time.perf_counter()
    power, size = alias_rejection_rates(range(1000, 1100))
    assert power >= 0.90, power
    assert size <= 0.10, size
    timed(30)(t0)


@pytest.mark.criterion("5 alias enumeration")
def test_c5_enumeration():
    t0 = time.perf_counter()
    counts = enumeration_vs_bruteforce(cases=20)
    assert all(a == b for a, b in counts), counts
    assert len(enumerate_aliases(np.array([[0.0, -1.0], [1.0, 0.0]]), 1.0, 10.0)) == 2
    assert norm_gap_identity_error(4 * math.pi ** 2) <= 1e-8
    timed(10)(t0)


@pytest.mark.criterion("5b norm-gap identity with literal factor 4*pi")
@pytest.mark.xfail(strict=True, reason="(2*pi*j)^2 arithmetic gives 4*pi^2, not 4*pi")
def test_c5_literal_four_pi():
    assert norm_gap_identity_error(4 * math.pi) <= 1e-8


def _gn_runs():
    nf = ExperimentConfig(n=4, N=30, density=0.2, noise_free=True, input_kind="square_wave",
                          input_amplitude=5.0, seed=1)
    noisy = ExperimentConfig(n=5, N=20, density=0.2, snr_db=10.0, seed=3)
    return [
        (generate_dataset(nf), SolverOptions(lam=1e-3, mode="AB", diagonal_B=True, delta=1e-10,
                                             max_iter=200), True),
        (generate_dataset(noisy), SolverOptions(lam=0.5, max_iter=30), False),
        (generate_dataset(noisy), SolverOptions(lam=0.5, init="zero", max_iter=30), False),
    ]


@pytest.mark.criterion("6 optimizer contracts")
def test_c6_optimizer_contracts():
    for ds, opts, exact in _gn_runs():
        f_primes = []
        res = reconstruct(ds.series, opts, callback=lambda st, sub: f_primes.append(sub.f_prime))
        trace = np.asarray(res.objective_trace)
        assert np.all(np.diff(trace) <= 0)
        assert max(f_primes) <= 1e-8

        ctx = ResidualContext.from_series(ds.series)
        rng = np.random.default_rng(6)
        E = rng.standard_normal(res.A.shape)
        fd = central_diff(lambda X: residual(X, res.B, ctx), res.A, E)
        assert np.linalg.norm(jacobian_A(res.A, res.B, ctx) @ vec(E) - fd) <= 1e-4 * np.linalg.norm(fd)
        if ctx.m:
            EB = rng.standard_normal(res.B.shape)
            fd = central_diff(lambda X: residual(res.A, X, ctx), res.B, EB)
            assert np.linalg.norm(jacobian_B(res.A, ctx) @ vec(EB) - fd) <= 1e-4 * np.linalg.norm(fd)
        if exact:
            assert res.termination == "step_small"
            kkt = kkt_check(res.A, res.B, ctx, opts)
            assert kkt.ok, kkt


@pytest.mark.criterion("7 exact noise-free recovery")
def test_c7_exact_recovery():
    t0 = time.perf_counter()
    opts = SolverOptions(lam=1e-4, mode="AB", diagonal_B=True, delta=1e-10, max_iter=200)
    for seed in range(5):
        cfg = ExperimentConfig(n=5, N=50, noise_free=True, h_factor=0.9, input_kind="square_wave",
                               input_amplitude=10.0, seed=seed)
        ds = generate_dataset(cfg)
        A = ds.truth.A
        res = reconstruct(ds.series, opts)
        assert np.array_equal(np.abs(res.A) > 1e-2, A != 0), seed
        assert np.linalg.norm(res.A - A) <= 1e-3, (seed, np.linalg.norm(res.A - A))
    timed(60)(t0)


@pytest.mark.slow
@pytest.mark.criterion("8 reference study (n = N = 24)")
def test_c8_reference_study():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(n=24, density=0.1, N=24, h_factor=0.9, snr_db=0.0, seed=0)
    opts = SolverOptions(lam=10 ** 1.5, max_iter=25, delta=1e-3, init="zero")
    rep = run_batch(50, cfg, opts)
    proposed = rep.methods["proposed"].mean_auc
    baseline = rep.methods["logm"].mean_auc
    print(f"\nmean AUC proposed {proposed:.4f}, logm {baseline:.4f}, failures {len(rep.failures)}")
    assert proposed > baseline
    assert proposed > STUDY_AUC_FLOOR
    timed(30 * 60)(t0)


@pytest.mark.criterion("9 simulator fidelity")
def test_c9_sampler_vs_euler():
    t0 = time.perf_counter()
    z_mean, z_var = sampler_vs_euler()
    assert np.all(z_mean <= 3), z_mean
    assert np.all(z_var <= 3), z_var
    timed(60)(t0)
