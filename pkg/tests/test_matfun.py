import numpy as np
import pytest

from conftest import random_stable
from oracles import (central_diff, companion_eigs, expm_taylor, match_sets,
                     trapezoid_integral)
from sysalias import matfun
from sysalias.errors import BranchUndefinedError, InvalidInputError
from sysalias.matfun import (eigenvalues, expm, frechet_exp, frechet_log, ivec,
                             kronecker_K, kronecker_K_augmented, logm_principal,
                             lyapunov_integral, phi_integral, sK_integral, vec)

ROT = np.array([[0.0, -np.pi / 2], [np.pi / 2, 0.0]])


def test_vec_is_column_major():
    X = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(vec(X), [0, 3, 1, 4, 2, 5])
    assert np.array_equal(ivec(vec(X), 2, 3), X)


def test_expm_examples():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    assert np.allclose(expm(np.diag([np.log(2), np.log(3)])), np.diag([2.0, 3.0]), rtol=1e-14)
    assert np.allclose(expm(ROT), [[0, -1], [1, 0]], atol=1e-14)
    assert np.allclose(expm(ROT), expm_taylor(ROT), atol=1e-14)


def test_expm_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        expm(np.array([[np.nan]]))
    with pytest.raises(InvalidInputError):
        expm(np.ones((2, 3)))


@pytest.mark.parametrize("scale", [0.5, 3.0, 10.0])
def test_expm_relative_error_desk_scale(rng, scale):
    for _ in range(10):
        X = rng.standard_normal((5, 5))
        X *= scale / np.linalg.norm(X, 2)
        F = expm(X)
        # oracle: square the Taylor series of X / 2^8
        G = expm_taylor(X / 256.0)
        for _ in range(8):
            G = G @ G
        assert np.linalg.norm(F - G) <= 1e-10 * np.linalg.norm(G)


def test_expm_complex_input():
    X = 1j * np.diag([0.3, -0.7])
    assert np.allclose(expm(X), np.diag(np.exp([0.3j, -0.7j])), atol=1e-14)


def test_logm_examples():
    assert np.allclose(logm_principal(np.eye(3)), 0, atol=1e-15)
    L = logm_principal(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert np.allclose(L, ROT, atol=1e-12)
    assert np.isrealobj(L)
    with pytest.raises(BranchUndefinedError):
        logm_principal(-np.eye(2))
    with pytest.raises(InvalidInputError):
        logm_principal(np.zeros((2, 2)))


def test_logm_nonnormal_round_trip(rng):
    X = np.triu(rng.standard_normal((6, 6))) * 2
    np.fill_diagonal(X, rng.uniform(-1, 1, 6))
    L = logm_principal(expm(X))
    assert np.allclose(L, X, atol=1e-8)


def test_eigenvalue_examples():
    s = eigenvalues(np.diag([-1.0, -2.0]))
    assert sorted(s.eigenvalues.real) == [-2.0, -1.0]
    s = eigenvalues(ROT)
    assert match_sets(s.expanded(), [0.5j * np.pi, -0.5j * np.pi]) <= 1e-12
    assert s.max_abs_imag == pytest.approx(np.pi / 2)


def test_eigenvalues_vs_companion_oracle(rng):
    for _ in range(5):
        X = rng.standard_normal((5, 5))
        assert match_sets(eigenvalues(X).expanded(), companion_eigs(X)) <= 1e-6


def test_eigenvalues_conjugate_pairs_and_multiplicity(rng):
    X = rng.standard_normal((7, 7))
    lam = eigenvalues(X).expanded()
    for z in lam[lam.imag != 0]:
        assert np.any(lam == np.conj(z))
    s = eigenvalues(np.eye(3))
    assert list(s.multiplicities) == [3]


def test_frechet_exp_examples(rng):
    E = rng.standard_normal((3, 3))
    X = rng.standard_normal((3, 3))
    assert np.allclose(frechet_exp(np.zeros((3, 3)), E), E, atol=1e-14)
    assert np.allclose(frechet_exp(X, np.zeros((3, 3))), 0, atol=0)
    X = rng.standard_normal((4, 4))
    E = rng.standard_normal((4, 4))
    fd = central_diff(expm, X, E)
    assert np.linalg.norm(frechet_exp(X, E) - fd) <= 1e-4 * np.linalg.norm(fd)
    with pytest.raises(InvalidInputError):
        frechet_exp(X, np.eye(3))


def test_frechet_log_examples(rng):
    E = rng.standard_normal((3, 3))
    assert np.allclose(frechet_log(np.eye(3), E), E, atol=1e-14)
    assert np.allclose(frechet_log(expm(rng.standard_normal((3, 3)) * 0.3), 0 * E), 0)
    for _ in range(5):
        A = rng.standard_normal((4, 4))
        A /= np.linalg.norm(A, 2)
        E = rng.standard_normal((4, 4))
        back = frechet_log(expm(A), frechet_exp(A, E))
        assert np.allclose(back, E, atol=1e-6)


def test_kronecker_K_examples(rng):
    assert np.allclose(kronecker_K(np.zeros((3, 3))), np.eye(9), atol=1e-15)
    for n in (3, 4, 10):
        for _ in range(4 if n < 10 else 2):
            X = rng.standard_normal((n, n))
            E = rng.standard_normal((n, n))
            assert np.linalg.norm(kronecker_K(X) @ vec(E) - vec(frechet_exp(X, E))) <= 1e-8


def test_kronecker_K_diagonal_closed_form():
    a, b = -0.4, 1.3
    x = np.array([a, b])
    K = kronecker_K(np.diag(x))
    assert np.allclose(K, np.diag(np.diag(K)), atol=1e-14)
    # vec index k = i + 2j holds E[i, j]; L_exp(diag(x), E)[i, j] = E[i, j] psi(x_j - x_i) e^{x_i}
    for j in range(2):
        for i in range(2):
            d = x[j] - x[i]
            psi = 1.0 if d == 0 else np.expm1(d) / d
            assert K[i + 2 * j, i + 2 * j] == pytest.approx(psi * np.exp(x[i]), rel=1e-12)


def test_kronecker_doubling_matches_augmented(rng):
    X = rng.standard_normal((9, 9)) * 0.5
    K1 = kronecker_K(X)
    K2 = kronecker_K_augmented(X)
    assert np.linalg.norm(K1 - K2) <= 1e-11 * np.linalg.norm(K2)


def test_phi_integral_examples(rng):
    assert np.allclose(phi_integral(0.7, np.zeros((2, 2))), 0.7 * np.eye(2), atol=1e-15)
    assert phi_integral(1.0, np.array([[-1.0]]))[0, 0] == pytest.approx(1 - np.exp(-1), abs=1e-5)
    assert phi_integral(1.0, np.array([[-1.0]]))[0, 0] == pytest.approx(0.6321205588285577, rel=1e-13)
    X = random_stable(rng, 4)
    h = 0.8
    closed = np.linalg.solve(X, expm(h * X) - np.eye(4))
    assert np.allclose(phi_integral(h, X), closed, atol=1e-9)
    with pytest.raises(InvalidInputError):
        phi_integral(0.0, X)


def test_phi_integral_derivative(rng):
    X = rng.standard_normal((3, 3))
    h, t = 0.6, 1e-6
    d = (phi_integral(h + t, X) - phi_integral(h, X)) / t
    assert np.allclose(d, expm(h * X), atol=1e-4)


def test_lyapunov_examples(rng):
    R = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.allclose(lyapunov_integral(0.3, np.zeros((2, 2)), R), 0.3 * R @ R, atol=1e-14)
    X = random_stable(rng, 4)
    G = rng.standard_normal((4, 4))
    R = G @ G.T + np.eye(4)
    Rd = lyapunov_integral(0.9, X, R)
    assert np.array_equal(Rd, Rd.T)
    assert np.min(np.linalg.eigvalsh(Rd)) > 0
    Q = R @ R.T
    ref = trapezoid_integral(lambda s: expm(s * X) @ Q @ expm(s * X).T, 0.0, 0.9)
    assert np.linalg.norm(Rd - ref) <= 1e-6 * np.linalg.norm(ref)
    with pytest.raises(InvalidInputError):
        lyapunov_integral(0.9, X, np.triu(R))


def test_sK_integral_examples(rng):
    h = 0.8
    assert np.allclose(sK_integral(h, np.zeros((2, 2))), h * h / 2 * np.eye(4), atol=1e-15)
    X = rng.standard_normal((3, 3))
    a = sK_integral(h, X)
    b = sK_integral(h, X, nodes=2 * matfun.QUAD_NODES)
    assert np.max(np.abs(a - b)) <= 1e-9


def test_sK_integral_is_B_derivative_of_phi(rng):
    # d/dt Phi(h, X + tE) = int_0^h L_exp(sX, sE) ds; vec form is sK_integral @ vec(E)
    X = rng.standard_normal((3, 3)) * 0.5
    E = rng.standard_normal((3, 3))
    h = 0.7
    fd = central_diff(lambda Y: phi_integral(h, Y), X, E)
    assert np.allclose(sK_integral(h, X) @ vec(E), vec(fd), atol=1e-6)
