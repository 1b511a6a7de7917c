import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diaglearn.errors import Infeasible, RankDeficient, SizeExceeded
from diaglearn.l1 import (BosonicProblem, L1Problem, bosonic_columns, closed_form_bosonic,
                          closed_form_independent, oracle_l1, simplex, solution_from_json,
                          solution_to_json, solve_l1)
from diaglearn.pauli import GeneratorSet, build_eigenvalue_matrix, hadamard


def random_problem(rng, n_max=3):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, (1 << n)))
    masks = sorted(rng.choice(np.arange(1, 1 << n), size=m, replace=False))
    gens = GeneratorSet.from_masks(masks, n)
    alpha = rng.uniform(-1, 1, size=m)
    return L1Problem.from_generators(gens, alpha)


def check_feasible(prob, sol, tol=1e-9):
    a = sol.dense(prob.columns)
    assert abs(a.sum()) < tol
    assert np.allclose(prob.h @ a, prob.alpha, atol=tol)


def test_small_worked_examples():
    sol = solve_l1(L1Problem.from_generators(GeneratorSet.local(2), [1.0, 0.3]))
    assert sol.l1 == pytest.approx(1.0, abs=1e-12)
    assert sol.bound == pytest.approx(0.25, abs=1e-12)

    prob = L1Problem.from_generators(GeneratorSet.all_nonidentity(2), [1.0, 1.0, 1.0])
    sol = solve_l1(prob)
    assert sol.l1 == pytest.approx(1.5, abs=1e-12)
    assert np.allclose(sol.dense(prob.columns), [0.75, -0.25, -0.25, -0.25])
    assert oracle_l1(prob).l1 == pytest.approx(1.5, abs=1e-12)


def test_ghz_solution_for_all_ones():
    for n in range(1, 6):
        sol = solve_l1(L1Problem.from_generators(GeneratorSet.local(n), np.ones(n)))
        assert sol.l1 == pytest.approx(1.0, abs=1e-12)
        assert sol.as_dict() == pytest.approx({0: 0.5, (1 << n) - 1: -0.5})


def test_simplex_textbook_lp():
    # min -x1 - x2  s.t. x1 + 2 x2 + s1 = 4, 3 x1 + x2 + s2 = 6
    A = np.array([[1.0, 2, 1, 0], [3, 1, 0, 1]])
    x, basis, y = simplex(A, np.array([4.0, 6.0]), np.array([-1.0, -1, 0, 0]))
    assert np.allclose(x[:2], [1.6, 1.2])
    assert np.allclose(y, [-0.4, -0.2])


def test_solver_matches_oracle_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(60):
        prob = random_problem(rng)
        sol, ref = solve_l1(prob), oracle_l1(prob)
        assert sol.l1 == pytest.approx(ref.l1, abs=1e-9)
        assert sol.l0 <= prob.m + 1
        check_feasible(prob, sol)


def test_solver_matches_scipy_linprog():
    linprog = pytest.importorskip("scipy.optimize").linprog
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(3, 6))
        m = int(rng.integers(1, 8))
        masks = sorted(rng.choice(np.arange(1, 1 << n), size=m, replace=False))
        prob = L1Problem.from_generators(GeneratorSet.from_masks(masks, n), rng.uniform(-1, 1, m))
        M = prob.constraint_matrix()
        res = linprog(np.ones(2 * prob.N), A_eq=np.hstack([M, -M]), b_eq=prob.rhs(), bounds=(0, None),
                      method="highs")
        assert solve_l1(prob).l1 == pytest.approx(res.fun, abs=1e-8)


def test_dual_certificate_is_feasible_and_tight():
    rng = np.random.default_rng(3)
    for _ in range(40):
        prob = random_problem(rng, n_max=4)
        sol = solve_l1(prob)
        cert = sol.dual
        assert cert.max_violation(prob.h) <= 1e-9
        assert cert.objective == pytest.approx(sol.l1, abs=1e-9)
        assert cert.xi == pytest.approx(2 / sol.l1)
        assert prob.alpha @ cert.beta == pytest.approx(1.0)
        assert cert.seminorm(prob.h) == pytest.approx(2 / sol.l1, abs=1e-8)


def test_independent_closed_form():
    rng = np.random.default_rng(8)
    for n in range(1, 5):
        for _ in range(10):
            alpha = rng.uniform(-1, 1, n)
            sol = solve_l1(L1Problem.from_generators(GeneratorSet.local(n), alpha))
            assert sol.l1 == pytest.approx(np.max(np.abs(alpha)), abs=1e-9)
            assert sol.bound == pytest.approx(closed_form_independent(alpha), abs=1e-12)


def test_independent_closed_form_for_nonlocal_generators():
    # ZZI, IZZ, ZZZ are independent over GF(2): a change of basis maps them to single Zs
    gens = GeneratorSet.parse(["ZZI", "IZZ", "ZZZ"])
    alpha = np.array([0.4, -0.9, 0.2])
    sol = solve_l1(L1Problem.from_generators(gens, alpha))
    assert sol.l1 == pytest.approx(0.9, abs=1e-9)


def test_bosonic_closed_form():
    rng = np.random.default_rng(21)
    for m in range(1, 4):
        for P in range(1, 5):
            for _ in range(3):
                alpha = rng.uniform(-1, 1, m)
                sol = solve_l1(BosonicProblem(m, P, tuple(alpha)).to_l1())
                assert sol.bound == pytest.approx(closed_form_bosonic(alpha, P), abs=1e-9)
    sol = solve_l1(BosonicProblem(2, 2, (1.0, -1.0)).to_l1())
    assert sol.bound == pytest.approx(0.25)


def test_bosonic_columns():
    assert bosonic_columns(2, 2) == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)]
    with pytest.raises(SizeExceeded):
        bosonic_columns(20, 20)


def test_full_generator_set_has_unique_solution():
    # with every non-identity Z-string the system is square: a = H alpha_ext / 2^n
    rng = np.random.default_rng(4)
    for n in (2, 3):
        alpha = rng.uniform(-1, 1, (1 << n) - 1)
        prob = L1Problem.from_generators(GeneratorSet.all_nonidentity(n), alpha)
        expected = hadamard(n) @ np.concatenate([[0.0], alpha]) / (1 << n)
        assert np.allclose(solve_l1(prob).dense(prob.columns), expected, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.data())
def test_properties(n, data):
    m = data.draw(st.integers(1, (1 << n) - 1))
    masks = data.draw(st.lists(st.integers(1, (1 << n) - 1), min_size=m, max_size=m, unique=True))
    alpha = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=m, max_size=m)))
    scale = data.draw(st.floats(0.1, 10))
    prob = L1Problem.from_generators(GeneratorSet.from_masks(masks, n), alpha)
    sol = solve_l1(prob)
    assert sol.l0 <= prob.m + 1
    check_feasible(prob, sol)
    # homogeneity in alpha
    scaled = solve_l1(L1Problem(prob.h, scale * alpha, columns=prob.columns))
    assert scaled.l1 == pytest.approx(scale * sol.l1, rel=1e-9, abs=1e-12)
    # the uniform-weight witness gives l1 <= ||alpha||_2
    assert sol.l1 <= np.linalg.norm(alpha) + 1e-9
    # at least the largest single coefficient is needed
    assert sol.l1 >= np.max(np.abs(alpha)) - 1e-9


def test_trivial_alpha():
    sol = solve_l1(L1Problem.from_generators(GeneratorSet.local(2), [0.0, 0.0]))
    assert sol.l1 == 0 and sol.l0 == 0


def test_infeasible_and_rank_deficient():
    gens = GeneratorSet.local(2)
    # columns 0 and 3 give identical rows for Z1 and Z2
    with pytest.raises(Infeasible):
        solve_l1(L1Problem.from_generators(gens, [1.0, 0.5], columns=[0, 3]))
    with pytest.raises(RankDeficient):
        solve_l1(L1Problem.from_generators(gens, [1.0, 1.0], columns=[0, 3]))


def test_json_round_trip():
    prob = L1Problem.from_generators(GeneratorSet.all_nonidentity(2), [1.0, 1.0, 1.0])
    sol = solve_l1(prob)
    doc = json.loads(json.dumps(solution_to_json(sol)))
    back = solution_from_json(doc, sol.t)
    assert back == sol
    assert np.allclose(back.dual.y, sol.dual.y)


def test_build_matrix_consistency():
    gens = GeneratorSet.parse(["ZZ", "ZI"])
    prob = L1Problem.from_generators(gens, [0.5, 0.5])
    assert np.array_equal(prob.h, build_eigenvalue_matrix(gens))
