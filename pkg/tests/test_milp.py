import itertools
import math

import numpy as np
import pytest

from stlrepair.milp import (
    BINARY, CONTINUOUS, INFEASIBLE, OPTIMAL, UNBOUNDED,
    MilpProblem, Tag, encode_max, encode_min, find_iis, solve_lp, solve_milp,
)


def simple_problem():
    p = MilpProblem("simple")
    p.add_variable("x", lb=0, ub=10)
    p.add_variable("y", lb=0, ub=10)
    p.add_constraint({"x": 1, "y": 1}, "<=", 4, Tag("plumbing", extra="c1"))
    p.add_constraint({"x": 1, "y": -1}, ">=", -2, Tag("plumbing", extra="c2"))
    p.set_objective({"x": -1, "y": -1})
    return p


# --------------------------------------------------------------------------
# LP oracle: enumerate vertices of the feasible polytope
# --------------------------------------------------------------------------

def lp_oracle(p):
    """Optimal LP value by brute-force vertex enumeration (2-3 variables)."""
    names = list(p.variables)
    n = len(names)
    rows = []
    rhs = []
    for v, (kind, lo, hi) in p.variables.items():
        e = [1.0 if u == v else 0.0 for u in names]
        if math.isfinite(lo):
            rows.append(([-x for x in e], "<="))
            rhs.append(-lo)
        if math.isfinite(hi):
            rows.append((e, "<="))
            rhs.append(hi)
    for c in p.constraints:
        e = [c.coeffs.get(u, 0.0) for u in names]
        if c.relation in ("<=", "="):
            rows.append((e, "<="))
            rhs.append(c.rhs)
        if c.relation in (">=", "="):
            rows.append(([-x for x in e], "<="))
            rhs.append(-c.rhs)
    A = np.array([r for r, _ in rows])
    b = np.array(rhs)
    best = None
    for idx in itertools.combinations(range(len(rows)), n):
        sub = A[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-9:
            continue
        x = np.linalg.solve(sub, b[list(idx)])
        if np.all(A @ x <= b + 1e-7):
            val = sum(p.objective.get(v, 0.0) * x[i] for i, v in enumerate(names))
            if best is None or val < best:
                best = val
    return best


def test_lp_simple():
    sol = solve_lp(simple_problem())
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(-4.0)


def test_lp_matches_vertex_enumeration():
    rng = np.random.default_rng(3)
    for trial in range(40):
        p = MilpProblem()
        n = int(rng.integers(2, 4))
        names = ["v%d" % i for i in range(n)]
        for v in names:
            p.add_variable(v, lb=-5, ub=5)
        for j in range(int(rng.integers(1, 5))):
            coeffs = {v: float(rng.uniform(-1, 1)) for v in names}
            p.add_constraint(coeffs, str(rng.choice(["<=", ">="])),
                             float(rng.uniform(-2, 2)),
                             Tag("plumbing", extra="r%d" % j))
        p.set_objective({v: float(rng.uniform(-1, 1)) for v in names})
        sol = solve_lp(p)
        want = lp_oracle(p)
        if want is None:
            assert sol.status == INFEASIBLE
        else:
            assert sol.status == OPTIMAL
            assert sol.objective == pytest.approx(want, abs=1e-6)


def test_lp_infeasible_and_unbounded():
    p = MilpProblem()
    p.add_variable("x", lb=0, ub=1)
    p.add_constraint({"x": 1}, ">=", 2, Tag("plumbing", extra="hi"))
    assert solve_lp(p).status == INFEASIBLE

    q = MilpProblem()
    q.add_variable("x")
    q.set_objective({"x": 1})
    assert solve_lp(q).status == UNBOUNDED


# --------------------------------------------------------------------------
# MILP vs brute force over binaries
# --------------------------------------------------------------------------

def test_knapsack_against_brute_force():
    rng = np.random.default_rng(9)
    for trial in range(20):
        n = 8
        weights = rng.integers(1, 10, size=n)
        values = rng.integers(1, 10, size=n)
        cap = int(rng.integers(10, 30))
        p = MilpProblem()
        for i in range(n):
            p.add_variable("b%d" % i, BINARY)
        p.add_constraint({"b%d" % i: float(weights[i]) for i in range(n)},
                         "<=", cap, Tag("plumbing", extra="cap"))
        p.set_objective({"b%d" % i: -float(values[i]) for i in range(n)})
        sol = solve_milp(p)
        best = 0
        for picks in itertools.product([0, 1], repeat=n):
            if np.dot(picks, weights) <= cap:
                best = max(best, int(np.dot(picks, values)))
        assert sol.status == OPTIMAL
        assert -sol.objective == pytest.approx(best)


def test_solver_is_deterministic():
    p = simple_problem()
    a = solve_milp(p)
    b = solve_milp(p)
    assert a.values == b.values and a.objective == b.objective


# --------------------------------------------------------------------------
# irreducibly infeasible subsets
# --------------------------------------------------------------------------

def chain_problem():
    """x>=5 and x<=1 conflict; x<=8 is redundant."""
    p = MilpProblem()
    p.add_variable("x")
    p.add_constraint({"x": 1}, ">=", 5, Tag("stl-predicate", extra="ge5"))
    p.add_constraint({"x": 1}, "<=", 1, Tag("stl-predicate", extra="le1"))
    p.add_constraint({"x": 1}, "<=", 8, Tag("stl-predicate", extra="le8"))
    return p


def test_iis_simple_core():
    p = chain_problem()
    core = find_iis(p, set(p.tags()))
    assert {t.extra for t in core} == {"ge5", "le1"}


def test_iis_requires_infeasible():
    with pytest.raises(ValueError):
        find_iis(simple_problem(), set())


def test_iis_respects_nonremovable():
    p = chain_problem()
    removable = {t for t in p.tags() if t.extra != "ge5"}
    core = find_iis(p, removable)
    # ge5 stays implicitly; the core among removable rows is just le1
    assert {t.extra for t in core} == {"le1"}


def _is_feasible(p, keep_tags):
    q = MilpProblem()
    q.variables = dict(p.variables)
    q.constraints = [c for c in p.constraints if c.tag in keep_tags]
    return solve_milp(q).status != INFEASIBLE


def test_iis_is_irreducible_on_random_systems():
    rng = np.random.default_rng(17)
    checked = 0
    while checked < 30:
        p = MilpProblem()
        n = int(rng.integers(1, 3))
        names = ["v%d" % i for i in range(n)]
        for v in names:
            p.add_variable(v)
        m = int(rng.integers(3, 9))
        for j in range(m):
            coeffs = {v: float(rng.choice([-1, 1]) * rng.uniform(0.2, 1)) for v in names}
            p.add_constraint(coeffs, str(rng.choice(["<=", ">="])),
                             float(rng.uniform(-3, 3)),
                             Tag("stl-predicate", extra="r%d" % j))
        if solve_milp(p).status != INFEASIBLE:
            continue
        checked += 1
        core = find_iis(p, set(p.tags()))
        # the core itself is infeasible
        assert not _is_feasible(p, core)
        # removing any single member restores feasibility
        for t in core:
            assert _is_feasible(p, core - {t})


# --------------------------------------------------------------------------
# min/max encodings
# --------------------------------------------------------------------------

def _extremum_problem(vals, is_min, big_m=100.0):
    p = MilpProblem()
    operands = []
    for i, val in enumerate(vals):
        v = "a%d" % i
        p.add_variable(v, lb=-10, ub=10)
        p.add_constraint({v: 1}, "=", val, Tag("plumbing", extra="fix%d" % i))
        operands.append(({v: 1.0}, 0.0))
    p.add_variable("out", lb=-20, ub=20)
    enc = encode_min if is_min else encode_max
    enc(p, "out", operands, big_m, lambda i, role: Tag(
        "stl-operator", extra="%d:%s" % (i, role)))
    return p


@pytest.mark.parametrize("is_min", [True, False])
@pytest.mark.parametrize("direction", [1.0, -1.0])
def test_extremum_pinned_regardless_of_objective(is_min, direction):
    rng = np.random.default_rng(31)
    for _ in range(25):
        vals = rng.uniform(-8, 8, size=int(rng.integers(1, 5)))
        p = _extremum_problem(vals, is_min)
        p.set_objective({"out": direction})
        sol = solve_milp(p)
        assert sol.status == OPTIMAL
        want = min(vals) if is_min else max(vals)
        assert sol["out"] == pytest.approx(want, abs=1e-6)


def test_big_m_certification():
    p = MilpProblem()
    p.add_variable("a", lb=-1000, ub=1000)
    p.add_variable("out")
    with pytest.raises(ValueError):
        encode_min(p, "out", [({"a": 1.0}, 0.0)], 100.0,
                   lambda i, role: Tag("stl-operator", extra=role))


def test_big_m_unbounded_operand_rejected():
    p = MilpProblem()
    p.add_variable("a")
    p.add_variable("out")
    with pytest.raises(ValueError):
        encode_min(p, "out", [({"a": 1.0}, 0.0)], 1e4,
                   lambda i, role: Tag("stl-operator", extra=role))


# --------------------------------------------------------------------------
# dump / restore
# --------------------------------------------------------------------------

def test_dump_restore_roundtrip(tmp_path):
    p = _extremum_problem([1.0, -2.0, 3.0], True)
    p.set_objective({"out": -1.0})
    path = tmp_path / "prob.milp"
    p.dump(path)
    q = MilpProblem.restore(path)
    assert list(q.variables) == list(p.variables)
    assert q.variables == p.variables
    assert q.objective == p.objective
    assert len(q.constraints) == len(p.constraints)
    for a, b in zip(p.constraints, q.constraints):
        assert a.coeffs == b.coeffs and a.relation == b.relation
        assert a.rhs == b.rhs and a.tag == b.tag
    sa, sb = solve_milp(p), solve_milp(q)
    assert sa.objective == pytest.approx(sb.objective)
