"""The in-house simplex solver."""

import math
import random

import pytest

from factsflow.linprog import LinearProgram, LpError, lp_format, solve_lp

INF = math.inf


def test_single_bounded_variable():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0)
    lp.add_constraint({x: 1.0}, "<=", 3.0)
    lp.set_objective({x: 1.0})
    res = solve_lp(lp)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(3.0, abs=1e-9)
    assert res.value(x) == pytest.approx(3.0, abs=1e-9)


def test_infeasible():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0)
    lp.add_constraint({x: 1.0}, "<=", -1.0)
    lp.set_objective({x: 1.0})
    assert solve_lp(lp).status == "infeasible"


def test_unbounded():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0)
    lp.set_objective({x: 1.0})
    assert solve_lp(lp).status == "unbounded"


def test_unbounded_with_constraints_present():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0)
    y = lp.add_var("y", 0.0, 5.0)
    lp.add_constraint({y: 1.0, x: -1.0}, "<=", 2.0)
    lp.set_objective({x: 1.0, y: 1.0})
    assert solve_lp(lp).status == "unbounded"


def test_textbook_optimum():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0)
    y = lp.add_var("y", 0.0)
    lp.add_constraint({x: 1.0}, "<=", 4.0)
    lp.add_constraint({y: 2.0}, "<=", 12.0)
    lp.add_constraint({x: 3.0, y: 2.0}, "<=", 18.0)
    lp.set_objective({x: 3.0, y: 5.0})
    res = solve_lp(lp)
    assert res.objective == pytest.approx(36.0, abs=1e-9)
    assert (res.value(x), res.value(y)) == (pytest.approx(2.0), pytest.approx(6.0))


def test_free_variables_and_equalities():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0)
    y = lp.add_var("y", -INF, INF)
    lp.add_constraint({x: 1.0, y: 1.0}, "=", 4.0)
    lp.add_constraint({x: 1.0, y: -1.0}, ">=", -2.0)
    lp.set_objective({x: 1.0, y: 2.0})
    res = solve_lp(lp)
    assert res.objective == pytest.approx(7.0, abs=1e-9)


def test_fixed_variables():
    lp = LinearProgram()
    x = lp.add_var("x", 2.0, 2.0)
    y = lp.add_var("y", 0.0, 10.0)
    lp.add_constraint({x: 1.0, y: 1.0}, "<=", 5.0)
    lp.set_objective({y: 1.0})
    res = solve_lp(lp)
    assert res.objective == pytest.approx(3.0, abs=1e-9)
    assert res.value(x) == pytest.approx(2.0)


def test_bound_overrides_do_not_mutate():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0, 10.0)
    lp.add_constraint({x: 1.0}, "<=", 8.0)
    lp.set_objective({x: 1.0})
    res = solve_lp(lp, bound_overrides={x: (0.0, 3.0)})
    assert res.objective == pytest.approx(3.0)
    res2 = solve_lp(lp)
    assert res2.objective == pytest.approx(8.0)
    assert lp.ub[x] == 10.0


def test_negative_bounds():
    lp = LinearProgram()
    x = lp.add_var("x", -5.0, 5.0)
    lp.add_constraint({x: 1.0}, ">=", -3.0)
    lp.set_objective({x: -1.0})
    res = solve_lp(lp)
    assert res.objective == pytest.approx(3.0)
    assert res.value(x) == pytest.approx(-3.0)


def test_degenerate_rows():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0, 1.0)
    y = lp.add_var("y", 0.0, 1.0)
    for _ in range(4):  # duplicated rows force degenerate pivots
        lp.add_constraint({x: 1.0, y: 1.0}, "<=", 1.0)
    lp.set_objective({x: 1.0, y: 2.0})
    res = solve_lp(lp)
    assert res.objective == pytest.approx(2.0)


def test_feasible_assignment_is_returned():
    rng = random.Random(5)
    for _ in range(100):
        lp = LinearProgram()
        n = rng.randint(2, 6)
        xs = [lp.add_var(f"v{i}", rng.uniform(-3, 0), rng.uniform(0, 3)) for i in range(n)]
        rows = []
        for _ in range(rng.randint(1, 5)):
            coeffs = {i: rng.uniform(-2, 2) for i in rng.sample(range(n), 2)}
            rhs = rng.uniform(-1, 4)
            sense = rng.choice(["<=", ">=", "="])
            lp.add_constraint(coeffs, sense, rhs)
            rows.append((coeffs, sense, rhs))
        lp.set_objective({i: rng.uniform(-1, 1) for i in range(n)})
        res = solve_lp(lp)
        if res.status != "optimal":
            continue
        for coeffs, sense, rhs in rows:
            lhs = sum(c * res.value(i) for i, c in coeffs.items())
            if sense == "<=":
                assert lhs <= rhs + 1e-7
            elif sense == ">=":
                assert lhs >= rhs - 1e-7
            else:
                assert lhs == pytest.approx(rhs, abs=1e-7)
        for i in range(n):
            assert lp.lb[i] - 1e-7 <= res.value(i) <= lp.ub[i] + 1e-7


def test_lp_format_lists_everything():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0, 2.0)
    lp.add_constraint({x: 1.0}, "<=", 1.5)
    lp.set_objective({x: 1.0})
    text = lp_format(lp)
    assert "maximize" in text
    assert "x" in text
    assert "<= 1.5" in text
    assert "bounds" in text


def test_declared_variable_enforcement():
    lp = LinearProgram()
    lp.add_var("x")
    with pytest.raises(ValueError):
        lp.add_constraint({3: 1.0}, "<=", 1.0)
    with pytest.raises(ValueError):
        lp.set_objective({7: 1.0})
    with pytest.raises(ValueError):
        lp.add_var("bad", 2.0, 1.0)
