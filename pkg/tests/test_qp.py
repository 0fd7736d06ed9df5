import numpy as np
import pytest

from oracles import qp_cvxpy
from sysalias.errors import InvalidInputError, SolverFailure
from sysalias.reconstruct.qp import QPSettings, solve_qp


def random_qp(rng, nv=8, nc=6, psd_rank=None):
    G = rng.standard_normal((nv, psd_rank or nv))
    P = G @ G.T + (1e-3 * np.eye(nv) if psd_rank is None else 0)
    q = rng.standard_normal(nv)
    C = np.vstack([np.eye(nv), rng.standard_normal((nc, nv))])
    x0 = rng.standard_normal(nv)
    Cx = C @ x0
    l = Cx - rng.uniform(0.1, 1.0, Cx.size)
    u = Cx + rng.uniform(0.1, 1.0, Cx.size)
    l[rng.random(l.size) < 0.3] = -np.inf
    return P, q, C, l, u


def kkt_residuals(P, q, C, l, u, x, y):
    stat = np.max(np.abs(P @ x + q + C.T @ y))
    Cx = C @ x
    feas = max(np.max(np.maximum(l - Cx, 0)), np.max(np.maximum(Cx - u, 0)))
    return stat, feas


@pytest.mark.parametrize("seed", range(6))
def test_matches_cvxpy(seed):
    rng = np.random.default_rng(seed)
    P, q, C, l, u = random_qp(rng)
    res = solve_qp(P, q, C, l, u)
    x_ref, f_ref = qp_cvxpy(P, q, C, l, u)
    f = 0.5 * res.x @ P @ res.x + q @ res.x
    assert res.status == "solved"
    assert f == pytest.approx(f_ref, abs=1e-6 * max(1.0, abs(f_ref)))
    assert np.allclose(res.x, x_ref, atol=1e-4)
    stat, feas = kkt_residuals(P, q, C, l, u, res.x, res.y)
    assert stat <= 1e-6 * max(1.0, np.max(np.abs(q))) and feas <= 1e-7


def test_degenerate_psd_objective():
    rng = np.random.default_rng(11)
    P, q, C, l, u = random_qp(rng, nv=6, nc=3, psd_rank=2)
    l[:6] = -2.0
    u[:6] = 2.0
    res = solve_qp(P, q, C, l, u)
    _, f_ref = qp_cvxpy(P, q, C, l, u)
    assert 0.5 * res.x @ P @ res.x + q @ res.x == pytest.approx(f_ref, abs=1e-6)


def test_equality_rows():
    P = np.diag([2.0, 1.0, 4.0])
    q = np.array([-1.0, 0.5, 0.0])
    C = np.array([[1.0, 1.0, 1.0], [1.0, 0.0, 0.0]])
    l = np.array([1.0, 0.0])
    u = np.array([1.0, np.inf])
    res = solve_qp(P, q, C, l, u)
    x_ref, _ = qp_cvxpy(P, q, C, l, u)
    assert np.allclose(res.x, x_ref, atol=1e-5)
    assert abs(res.x.sum() - 1.0) <= 1e-7


def test_pure_admm_path_without_polish_or_fallback():
    rng = np.random.default_rng(3)
    P, q, C, l, u = random_qp(rng, nv=5, nc=2)
    s = QPSettings(polish=False, fallback_after=None)
    res = solve_qp(P, q, C, l, u, s)
    x_ref, _ = qp_cvxpy(P, q, C, l, u)
    assert not res.polished
    assert np.allclose(res.x, x_ref, atol=1e-4)


def test_split_pairs_hint():
    # min (s+ - s- - 3)^2 + |.|-style weight on s+, s- >= 0: optimum s+ = 3 - w/2, s- = 0
    w = 1.0
    P = 2.0 * np.array([[1.0, -1.0], [-1.0, 1.0]])
    q = np.array([-6.0 + w, 6.0 + w])
    C = np.eye(2)
    l = np.zeros(2)
    u = np.full(2, np.inf)
    res = solve_qp(P, q, C, l, u, pairs=(np.array([0]), np.array([1])))
    assert np.allclose(res.x, [2.5, 0.0], atol=1e-7)
    with pytest.raises(InvalidInputError):
        solve_qp(P, q, np.ones((2, 2)), l, u, pairs=(np.array([0]), np.array([1])))


def test_infeasible_raises_solver_failure():
    P = np.eye(1)
    q = np.zeros(1)
    C = np.array([[1.0], [1.0]])
    l = np.array([1.0, -np.inf])
    u = np.array([np.inf, 0.0])
    with pytest.raises(SolverFailure):
        solve_qp(P, q, C, l, u, QPSettings(max_iter=2000))


def test_input_validation():
    with pytest.raises(InvalidInputError):
        solve_qp(np.eye(2), np.zeros(3), np.eye(2), np.zeros(2), np.ones(2))
    with pytest.raises(InvalidInputError):
        solve_qp(np.eye(2), np.zeros(2), np.eye(2), np.ones(2), np.zeros(2))
