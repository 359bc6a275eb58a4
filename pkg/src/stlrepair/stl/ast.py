"""Formula tree for signal temporal logic over linear predicates.

A formula is a tree of Node objects.  Leaves are (possibly negated) linear
predicates over named run variables; internal nodes are Boolean connectives
and the temporal operators G (always), F (eventually) and U (until) with
optional time intervals in seconds.
"""

import itertools

_node_counter = itertools.count(1)


def fresh_node_id():
    return next(_node_counter)


class Interval:
    """Closed time interval [lower, upper] in seconds; upper=None means unbounded."""

    def __init__(self, lower, upper):
        assert lower >= 0.0
        if upper is not None:
            assert upper >= lower
        self.lower = float(lower)
        self.upper = None if upper is None else float(upper)

    @property
    def unbounded(self):
        return self.upper is None

    def __eq__(self, other):
        return (
            isinstance(other, Interval)
            and self.lower == other.lower
            and self.upper == other.upper
        )

    def __repr__(self):
        return "Interval(%r, %r)" % (self.lower, self.upper)

    def pretty(self):
        lo = _fmt(self.lower)
        hi = "inf" if self.upper is None else _fmt(self.upper)
        return "[%s,%s]" % (lo, hi)


def _fmt(x):
    """Format a float without trailing noise, keeping round-trip precision."""
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


class LinearPredicate:
    """A linear inequality over run variables: sum_i c_i * v_i  <op>  rhs.

    The satisfaction margin mu is oriented so that the predicate holds iff
    mu > 0:

        for op '>' / '>=' :  mu = sum c_i v_i - rhs
        for op '<' / '<=' :  mu = rhs - sum c_i v_i

    Strict and non-strict comparisons share the same margin; encodings and
    monitoring treat all predicates as strict (mu > 0).
    """

    OPS = ("<", "<=", ">", ">=")

    def __init__(self, coeffs, op, rhs):
        assert op in self.OPS, op
        assert coeffs, "predicate needs at least one variable"
        self.coeffs = {v: float(c) for v, c in coeffs.items() if c != 0.0}
        assert self.coeffs, "predicate is constant"
        self.op = op
        self.rhs = float(rhs)

    @property
    def greater(self):
        return self.op in (">", ">=")

    @property
    def coefficients(self):
        """Coefficients of mu as a function of the run variables."""
        sign = 1.0 if self.greater else -1.0
        return {v: sign * c for v, c in self.coeffs.items()}

    @property
    def offset(self):
        """Constant term of mu."""
        return -self.rhs if self.greater else self.rhs

    def value(self, assignment):
        """Margin mu at a variable assignment (dict var -> float)."""
        acc = self.offset
        for v, c in self.coefficients.items():
            acc += c * assignment[v]
        return acc

    def variables(self):
        return set(self.coeffs)

    def shift_bound(self, shift):
        """Return a copy whose margin is mu + shift (rhs moves accordingly).

        The moved bound is rounded at the 12th decimal to keep repaired
        formulas readable; the error is far below solver tolerances.
        """
        if self.greater:
            return LinearPredicate(self.coeffs, self.op,
                                   round(self.rhs - shift, 12))
        return LinearPredicate(self.coeffs, self.op,
                               round(self.rhs + shift, 12))

    def pretty(self):
        terms = []
        for i, (v, c) in enumerate(sorted(self.coeffs.items())):
            if c == 1.0:
                t = v
            elif c == -1.0:
                t = "-" + v
            else:
                t = "%s*%s" % (_fmt(c), v)
            if i > 0 and not t.startswith("-"):
                t = "+ " + t
            elif i > 0:
                t = "- " + t.lstrip("-")
            terms.append(t)
        return "%s %s %s" % (" ".join(terms), self.op, _fmt(self.rhs))

    def __eq__(self, other):
        return (
            isinstance(other, LinearPredicate)
            and self.coeffs == other.coeffs
            and self.op == other.op
            and self.rhs == other.rhs
        )

    def __repr__(self):
        return "LinearPredicate(%r)" % self.pretty()


# Node kinds.
PRED = "pred"
NOT = "not"
AND = "and"
OR = "or"
IMPLIES = "implies"
ALWAYS = "G"
EVENTUALLY = "F"
UNTIL = "U"

TEMPORAL = (ALWAYS, EVENTUALLY, UNTIL)
BOOLEAN = (NOT, AND, OR, IMPLIES)


class Node:
    """One node of a formula tree.

    @param kind: one of the kind constants above
    @param children: tuple of child Nodes (empty for predicates)
    @param pred: LinearPredicate for kind PRED
    @param negated: for kind PRED, whether the literal is the negation of pred
    @param interval: Interval for G/F, and for timed U; None for untimed U
    @param node_id: stable integer identity, preserved across normalization
        and repair so diagnoses can refer to nodes of the original formula
    """

    def __init__(self, kind, children=(), pred=None, negated=False,
                 interval=None, node_id=None):
        self.kind = kind
        self.children = tuple(children)
        self.pred = pred
        self.negated = negated
        self.interval = interval
        self.node_id = fresh_node_id() if node_id is None else node_id
        if kind == PRED:
            assert pred is not None and not children
        elif kind in (NOT, ALWAYS, EVENTUALLY):
            assert len(children) == 1
        elif kind in (AND, OR):
            assert len(children) >= 1
        elif kind in (IMPLIES, UNTIL):
            assert len(children) == 2
        else:
            raise ValueError("unknown node kind %r" % kind)
        if kind in (ALWAYS, EVENTUALLY):
            assert interval is not None

    # -- construction helpers -------------------------------------------------

    def clone(self, **over):
        fields = dict(kind=self.kind, children=self.children, pred=self.pred,
                      negated=self.negated, interval=self.interval,
                      node_id=self.node_id)
        fields.update(over)
        return Node(**fields)

    # -- traversal ------------------------------------------------------------

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def find(self, node_id):
        for n in self.walk():
            if n.node_id == node_id:
                return n
        raise KeyError("no node with id %r" % node_id)

    def predicates(self):
        """All predicate leaves, in-order."""
        return [n for n in self.walk() if n.kind == PRED]

    def variables(self):
        out = set()
        for n in self.walk():
            if n.kind == PRED:
                out |= n.pred.variables()
        return out

    def replace(self, node_id, new_node):
        """Return a copy with the node of the given id swapped for new_node.

        All other nodes keep their identities.
        """
        if self.node_id == node_id:
            return new_node
        kids = tuple(c.replace(node_id, new_node) for c in self.children)
        if all(a is b for a, b in zip(kids, self.children)):
            return self
        return self.clone(children=kids)

    # -- printing -------------------------------------------------------------

    def pretty(self):
        return self._pp(parent_prec=0)

    PREC = {IMPLIES: 1, OR: 2, AND: 3, UNTIL: 4}

    def _pp(self, parent_prec):
        k = self.kind
        if k == PRED:
            body = self.pred.pretty()
            if self.negated:
                return "!(%s)" % body
            return "(%s)" % body if parent_prec >= 4 else body
        if k == NOT:
            return "!" + self.children[0]._pp(5)
        if k in (ALWAYS, EVENTUALLY):
            return "%s%s %s" % (k, self.interval.pretty(), self.children[0]._pp(5))
        if k == UNTIL:
            iv = self.interval.pretty() if self.interval is not None else ""
            s = "%s U%s %s" % (self.children[0]._pp(4), iv, self.children[1]._pp(4))
            return "(%s)" % s if parent_prec >= 4 else s
        op = {AND: " & ", OR: " | ", IMPLIES: " -> "}[k]
        prec = self.PREC[k]
        s = op.join(c._pp(prec if k != IMPLIES else prec + 0) for c in self.children)
        return "(%s)" % s if parent_prec >= prec else s

    def __repr__(self):
        return "Node<%d>(%s)" % (self.node_id, self.pretty())


# -- convenience constructors -------------------------------------------------

def pred(coeffs, op, rhs, negated=False, node_id=None):
    return Node(PRED, pred=LinearPredicate(coeffs, op, rhs), negated=negated,
                node_id=node_id)


def neg(f):
    return Node(NOT, (f,))


def conj(*fs):
    return Node(AND, fs)


def disj(*fs):
    return Node(OR, fs)


def implies(a, b):
    return Node(IMPLIES, (a, b))


def always(lo, hi, f):
    return Node(ALWAYS, (f,), interval=Interval(lo, hi))


def eventually(lo, hi, f):
    return Node(EVENTUALLY, (f,), interval=Interval(lo, hi))


def until(a, b, interval=None):
    return Node(UNTIL, (a, b), interval=interval)


# -- formula horizon ----------------------------------------------------------

def bound(f):
    """Worst-case look-ahead of the formula in seconds.

    This is the largest sum of interval upper endpoints along any root-to-leaf
    path.  Raises ValueError if any interval on the tree is unbounded.
    """
    if f.kind == PRED:
        return 0.0
    if f.kind in (ALWAYS, EVENTUALLY):
        iv = f.interval
        if iv.unbounded:
            raise ValueError("formula bound undefined: unbounded interval on %s" % f.kind)
        return iv.upper + bound(f.children[0])
    if f.kind == UNTIL:
        if f.interval is None or f.interval.unbounded:
            raise ValueError("formula bound undefined: unbounded until")
        return f.interval.upper + max(bound(c) for c in f.children)
    return max(bound(c) for c in f.children)


# -- repair actions -----------------------------------------------------------

def literal_orientation(f, node_id):
    """+1 if the predicate appears positively after normalization, else -1.

    Counts the NOT/negation parity on the path from the root to the predicate
    node (IMPLIES negates its left argument).
    """
    def search(n, parity):
        if n.node_id == node_id and n.kind == PRED:
            return -parity if n.negated else parity
        for i, c in enumerate(n.children):
            p = parity
            if n.kind == NOT:
                p = -p
            elif n.kind == IMPLIES and i == 0:
                p = -p
            r = search(c, p)
            if r is not None:
                return r
        return None

    r = search(f, 1)
    if r is None:
        raise KeyError("no predicate node with id %r" % node_id)
    return r


def apply_predicate_repair(f, node_id, shift):
    """Shift the bound of one predicate leaf.

    The shift is applied in the orientation of the post-normalization literal:
    the literal's margin becomes (margin + shift), so a positive shift always
    relaxes the literal.  Node identities are preserved.
    """
    target = f.find(node_id)
    assert target.kind == PRED, "repair target must be a predicate leaf"
    sign = literal_orientation(f, node_id)
    new_pred = target.pred.shift_bound(shift if sign > 0 else -shift)
    return f.replace(node_id, target.clone(pred=new_pred))


def apply_interval_repair(f, node_id, new_interval):
    """Replace the time interval of a temporal node, keeping node identities."""
    target = f.find(node_id)
    assert target.kind in TEMPORAL, "interval repair target must be temporal"
    return f.replace(node_id, target.clone(interval=new_interval))
