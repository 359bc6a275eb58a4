"""Formula rewrites: negation normal form and the until/eventually unfolding
used by time-interval repair."""

from .ast import (
    ALWAYS, AND, EVENTUALLY, IMPLIES, NOT, OR, PRED, UNTIL,
    Interval, Node,
)

_DUAL = {AND: OR, OR: AND, ALWAYS: EVENTUALLY, EVENTUALLY: ALWAYS}


def normalize(f):
    """Negation normal form: no IMPLIES, negations only on predicate leaves.

    a -> b becomes !a | b; negations are pushed through connectives and
    G/F (which dualize) down to predicates, where they toggle the literal's
    negated flag.  Surviving nodes keep their identities; a dualized node
    keeps the identity of the node it replaces.  Negating an until raises,
    since the release dual is outside the supported fragment.
    """
    return _norm(f, False)


def _norm(f, neg):
    k = f.kind
    if k == PRED:
        if neg:
            return f.clone(negated=not f.negated)
        return f
    if k == NOT:
        return _norm(f.children[0], not neg)
    if k == IMPLIES:
        a, b = f.children
        kind = AND if neg else OR
        return Node(kind, (_norm(a, not neg), _norm(b, neg)), node_id=f.node_id)
    if k in (AND, OR):
        kind = _DUAL[k] if neg else k
        return Node(kind, tuple(_norm(c, neg) for c in f.children),
                    node_id=f.node_id)
    if k in (ALWAYS, EVENTUALLY):
        kind = _DUAL[k] if neg else k
        return Node(kind, (_norm(f.children[0], neg),), interval=f.interval,
                    node_id=f.node_id)
    assert k == UNTIL
    if neg:
        raise ValueError("cannot negate an until formula in this fragment")
    return Node(UNTIL, tuple(_norm(c, False) for c in f.children),
                interval=f.interval, node_id=f.node_id)


def _copy_fresh(f, pred_origin):
    """Deep copy with fresh node ids, recording copy -> original for leaves."""
    kids = tuple(_copy_fresh(c, pred_origin) for c in f.children)
    new = Node(f.kind, kids, pred=f.pred, negated=f.negated,
               interval=f.interval, node_id=None)
    if f.kind == PRED:
        pred_origin[new.node_id] = f.node_id
    return new


class TemporalTransform:
    """Result of transform_temporal.

    @param formula: the rewritten formula (in negation normal form)
    @param interval_origin: maps ids of introduced temporal nodes to the id of
        the original until node their repaired interval belongs to
    @param pred_origin: maps ids of duplicated predicate leaves to the id of
        the original predicate they copy
    """

    def __init__(self, formula, interval_origin, pred_origin):
        self.formula = formula
        self.interval_origin = interval_origin
        self.pred_origin = pred_origin


def transform_temporal(f):
    """Unfold timed untils so only G, F and untimed U carry intervals.

    a U[l,u] b  becomes  G[0,l](a U b) & F[l,u] b, where the copied right
    operand gets fresh node ids (recorded in pred_origin) and the two new
    temporal nodes are linked back to the until node via interval_origin.
    The input is normalized first; G and F nodes pass through unchanged.
    """
    interval_origin = {}
    pred_origin = {}

    def walk(n):
        kids = tuple(walk(c) for c in n.children)
        if n.kind == UNTIL and n.interval is not None:
            a, b = kids
            b_copy = _copy_fresh(b, pred_origin)
            inner = Node(UNTIL, (a, b), interval=None)
            g = Node(ALWAYS, (inner,), interval=Interval(0.0, n.interval.lower))
            fv = Node(EVENTUALLY, (b_copy,),
                      interval=Interval(n.interval.lower, n.interval.upper))
            interval_origin[g.node_id] = n.node_id
            interval_origin[fv.node_id] = n.node_id
            return Node(AND, (g, fv), node_id=n.node_id)
        if all(a is c for a, c in zip(kids, n.children)):
            return n
        return n.clone(children=kids)

    return TemporalTransform(walk(normalize(f)), interval_origin, pred_origin)
