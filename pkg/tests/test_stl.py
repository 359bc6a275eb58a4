import math

import numpy as np
import pytest

from stlrepair import stl
from stlrepair.stl import (
    Interval, Node, ParseError, Trace,
    apply_interval_repair, apply_predicate_repair, bound, normalize, parse,
    robustness, satisfies, support, transform_temporal,
)

import oracles
from genformulas import random_formula, random_trace


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def test_parse_simple_predicate():
    f = parse("x > 0.2")
    assert f.kind == "pred"
    assert f.pred.coeffs == {"x": 1.0}
    assert f.pred.op == ">"
    assert f.pred.rhs == 0.2


def test_parse_linear_combination():
    f = parse("2*x - y + 1 <= 3")
    assert f.kind == "pred"
    assert f.pred.coeffs == {"x": 2.0, "y": -1.0}
    assert f.pred.rhs == 2.0  # constant moved to the right-hand side


def test_parse_chained_comparison_expands_to_conjunction():
    f = parse("-0.5 <= y <= 0.5")
    assert f.kind == "and" and len(f.children) == 2
    a, b = f.children
    assert a.pred.value({"y": 0.0}) == 0.5
    assert b.pred.value({"y": 0.0}) == 0.5
    assert a.pred.value({"y": 0.6}) > 0 and b.pred.value({"y": 0.6}) < 0


def test_parse_temporal_and_precedence():
    f = parse("G[0,20] F[1,6] x > 0.2 & F[2,25] y < 0")
    assert f.kind == "and"
    g = f.children[0]
    assert g.kind == "G" and g.interval == Interval(0, 20)
    assert g.children[0].kind == "F"


def test_parse_until_and_unbounded():
    f = parse("(x > 0) U[1,3] (y > 0)")
    assert f.kind == "U" and f.interval == Interval(1, 3)
    g = parse("G[0,inf)(x > 0)")
    assert g.kind == "G" and g.interval.unbounded


def test_parse_implication():
    f = parse("x > 0 -> y > 0 | z > 0")
    assert f.kind == "implies"
    assert f.children[1].kind == "or"


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as ei:
        parse("G[0,5] (x > )")
    assert ei.value.line == 1 and ei.value.col > 0
    with pytest.raises(ParseError):
        parse("x >")
    with pytest.raises(ParseError):
        parse("G[5,1] x > 0")
    with pytest.raises(ParseError):
        parse("0.5 < 1")  # no variables


def test_roundtrip_through_pretty():
    texts = [
        "x > 0.2",
        "G[0,20] F[1,6] x > 0.2 & F[2,25] y < 0",
        "!(x > 0 & y < 1) -> F[0,2](x + y >= 3)",
        "(x > 0) U[1,3] (y > 0 | z <= 0.5)",
        "G[0,inf)((v_adv > 0.5) -> (v_ego > 0.5))",
    ]
    for text in texts:
        f = parse(text)
        g = parse(f.pretty())
        assert _same_shape(f, g), text


def _same_shape(a, b):
    if a.kind != b.kind or a.negated != b.negated:
        return False
    if a.kind == "pred":
        return a.pred == b.pred
    if a.interval != b.interval:
        return False
    return len(a.children) == len(b.children) and \
        all(_same_shape(x, y) for x, y in zip(a.children, b.children))


def test_node_ids_unique():
    f = parse("G[0,2](x > 0 & y < 1) -> F[0,1] x > 0")
    ids = [n.node_id for n in f.walk()]
    assert len(ids) == len(set(ids))


# --------------------------------------------------------------------------
# bound
# --------------------------------------------------------------------------

def test_bound_nested_example():
    f = parse("G[0,20] F[1,6] x > 0.2 & F[2,25] y < 0")
    assert bound(f) == 26.0


def test_bound_until():
    f = parse("(x>0) U[1,3] F[0,5] y > 0")
    assert bound(f) == 8.0


def test_bound_unbounded_raises():
    with pytest.raises(ValueError):
        bound(parse("G[0,inf) x > 0"))


# --------------------------------------------------------------------------
# robustness / satisfaction vs independent oracle
# --------------------------------------------------------------------------

def test_robustness_predicate_and_always():
    tr = Trace({"x": [0.0, 0.5, 1.0, 0.2]}, 1.0)
    f = parse("G[0,3] x <= 1.5")
    assert robustness(f, tr) == pytest.approx(0.5)
    assert satisfies(f, tr)


def test_robustness_matches_oracle_random():
    rng = np.random.default_rng(7)
    agree_sign = 0
    for _ in range(300):
        H = int(rng.integers(3, 9))
        dt = float(rng.choice([0.5, 1.0]))
        f = random_formula(rng, ["x", "y"], depth=3, budget=(H - 1) * dt, dt=dt)
        tr = random_trace(rng, ["x", "y"], H, dt)
        got = robustness(f, tr)
        want = oracles.rho(f, tr)
        assert got == pytest.approx(want, abs=1e-9)
        if abs(got) > 1e-9:
            assert satisfies(f, tr) == (got > 0)
            agree_sign += 1
    assert agree_sign > 200  # the cross-check actually exercised both interpreters


def test_window_outside_trace_raises():
    tr = Trace({"x": [0.0, 1.0]}, 1.0)
    with pytest.raises(ValueError):
        robustness(parse("F[0,5] x > 0"), tr)
    # truncation clips instead
    assert robustness(parse("F[0,5] x > 0"), tr, truncate=True) == 1.0


def test_empty_window_raises():
    tr = Trace({"x": [0.0, 1.0, 2.0]}, 0.2)
    with pytest.raises(ValueError):
        robustness(parse("F[0.05,0.15] x > 0"), tr)


# --------------------------------------------------------------------------
# normalization
# --------------------------------------------------------------------------

def test_normalize_pushes_negation():
    f = parse("!(G[0,2](x > 0) & y < 1)")
    g = normalize(f)
    assert g.kind == "or"
    assert g.children[0].kind == "F"
    assert g.children[0].children[0].negated
    assert g.children[1].kind == "pred" and g.children[1].negated


def test_normalize_implication():
    f = parse("x > 0 -> y > 0")
    g = normalize(f)
    assert g.kind == "or"
    assert g.children[0].negated and not g.children[1].negated
    assert g.node_id == f.node_id  # dual keeps the identity


def test_normalize_preserves_robustness():
    rng = np.random.default_rng(11)
    for _ in range(200):
        H = int(rng.integers(3, 8))
        f = random_formula(rng, ["x", "y"], depth=3, budget=float(H - 1), dt=1.0)
        tr = random_trace(rng, ["x", "y"], H, 1.0)
        g = normalize(f)
        assert robustness(g, tr) == pytest.approx(robustness(f, tr), abs=1e-9)
        for n in g.walk():
            assert n.kind not in ("not", "implies")


def test_normalize_rejects_negated_until():
    with pytest.raises(ValueError):
        normalize(parse("!((x>0) U[0,2] (y>0))"))


# --------------------------------------------------------------------------
# support
# --------------------------------------------------------------------------

def test_support_of_nested_always():
    f = parse("G[0,inf) F[0,1] x > 0")
    pred_id = f.children[0].children[0].node_id
    # dt=0.2, 10 steps: G anchors 0..9, F window adds up to 5 more steps,
    # truncated at the last step
    s = support(f, pred_id, length=10, delta_t=0.2)
    assert s == set(range(0, 10))


def test_support_untimed_until():
    f = parse("(x>0) U (y>0)")
    left, right = f.children
    assert support(f, right.node_id, 5, 1.0) == {0, 1, 2, 3, 4}
    assert support(f, left.node_id, 5, 1.0) == {0, 1, 2, 3, 4}


def test_support_top_level_predicate():
    f = parse("x > 0 & G[1,3] y > 0")
    p = f.children[0]
    assert support(f, p.node_id, 10, 1.0) == {0}
    q = f.children[1].children[0]
    assert support(f, q.node_id, 10, 1.0) == {1, 2, 3}


# --------------------------------------------------------------------------
# transform_temporal
# --------------------------------------------------------------------------

def test_transform_unfolds_timed_until():
    f = parse("(x>0) U[1,3] (y>0)")
    res = transform_temporal(f)
    g = res.formula
    assert g.kind == "and"
    gn, fn = g.children
    assert gn.kind == "G" and gn.interval == Interval(0, 1)
    assert gn.children[0].kind == "U" and gn.children[0].interval is None
    assert fn.kind == "F" and fn.interval == Interval(1, 3)
    assert res.interval_origin == {gn.node_id: f.node_id, fn.node_id: f.node_id}
    orig_right = f.children[1].node_id
    assert list(res.pred_origin.values()) == [orig_right]


def test_transform_preserves_satisfaction():
    # build timed untils whose right operand is a bare predicate so the
    # unfolded untimed until is well-defined to the end of the trace
    from genformulas import random_pred
    from stlrepair.stl import Node, Interval
    rng = np.random.default_rng(23)
    for _ in range(200):
        H = int(rng.integers(4, 9))
        lo = int(rng.integers(0, H - 1))
        hi = int(rng.integers(lo, H))
        left = random_formula(rng, ["x", "y"], depth=2,
                              budget=float(H - 1 - hi), dt=1.0)
        f = Node("U", (left, random_pred(rng, ["x", "y"])),
                 interval=Interval(float(lo), float(hi)))
        tr = random_trace(rng, ["x", "y"], H, 1.0)
        g = transform_temporal(f).formula
        got = robustness(g, tr, truncate=True)
        want = robustness(normalize(f), tr, truncate=True)
        assert satisfies(g, tr, truncate=True) == (got > 0) or abs(got) < 1e-9
        if abs(want) > 1e-9:
            assert (got > 0) == (want > 0)


def test_transform_is_fixpoint_without_timed_until():
    f = normalize(parse("G[0,2](x>0) & F[1,3](y>0) & ((x>0) U (y>0))"))
    res = transform_temporal(f)
    assert _same_shape(res.formula, f)
    assert not res.interval_origin


# --------------------------------------------------------------------------
# repair actions
# --------------------------------------------------------------------------

def test_predicate_repair_positive_literal():
    f = parse("G[0,3] v >= 0.5")
    pid = f.children[0].node_id
    g = apply_predicate_repair(f, pid, 0.51)
    assert g.find(pid).pred.rhs == pytest.approx(-0.01)
    # margin is relaxed by the shift
    assert g.find(pid).pred.value({"v": 0.0}) == pytest.approx(0.01)
    # identities preserved
    assert {n.node_id for n in g.walk()} == {n.node_id for n in f.walk()}


def test_predicate_repair_on_antecedent_literal():
    # the assumption appears negated after normalization, so a positive shift
    # tightens the surface inequality
    f = parse("v >= 0.5 -> G[0,2] u <= 1")
    pid = f.children[0].node_id
    g = apply_predicate_repair(f, pid, 0.06)
    assert g.find(pid).pred.rhs == pytest.approx(0.56)


def test_predicate_repair_negated_less_than():
    f = parse("!(x <= 2)")
    pid = f.children[0].node_id
    g = apply_predicate_repair(f, pid, 0.5)
    # literal is x > 2; relaxing by 0.5 gives effectively x > 1.5
    assert g.find(pid).pred.rhs == pytest.approx(1.5)


def test_interval_repair():
    f = parse("v >= 0.5 -> G[0,inf) u <= 1")
    gid = f.children[1].node_id
    g = apply_interval_repair(f, gid, Interval(0.6, None))
    assert g.find(gid).interval == Interval(0.6, None)
    assert {n.node_id for n in g.walk()} == {n.node_id for n in f.walk()}


def test_repair_shift_relaxes_robustness():
    rng = np.random.default_rng(5)
    for _ in range(100):
        f = random_formula(rng, ["x", "y"], depth=2, budget=3.0, dt=1.0)
        tr = random_trace(rng, ["x", "y"], 4, 1.0)
        preds = f.predicates()
        target = preds[int(rng.integers(0, len(preds)))]
        shift = float(rng.uniform(0, 1))
        g = apply_predicate_repair(f, target.node_id, shift)
        assert robustness(g, tr) >= robustness(f, tr) - 1e-9
