"""A small mixed-integer linear programming layer.

Problems carry a provenance tag on every constraint so that downstream
diagnosis can tell dynamics rows, predicate rows and operator-encoding rows
apart, and can map constraints back to formula nodes and time steps.
Solving is delegated to HiGHS through scipy; runs are deterministic for a
fixed problem.
"""

import math

import numpy as np
from scipy import sparse
from scipy.optimize import LinearConstraint, Bounds, milp

CONTINUOUS = "continuous"
BINARY = "binary"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "iteration-limit"

_STATUS = {0: OPTIMAL, 1: LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}


class Tag:
    """Provenance of one constraint.

    @param kind: 'dynamics', 'stl-predicate', 'stl-operator' or 'plumbing'
    @param node_id: formula node the row belongs to, for stl rows
    @param step: time step the row is anchored at, where applicable
    @param extra: free-form discriminator making tags unique within a problem
    """

    __slots__ = ("kind", "node_id", "step", "extra")

    def __init__(self, kind, node_id=None, step=None, extra=""):
        self.kind = kind
        self.node_id = node_id
        self.step = step
        self.extra = extra

    def _key(self):
        return (self.kind, self.node_id, self.step, self.extra)

    def __eq__(self, other):
        return isinstance(other, Tag) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        parts = [self.kind]
        if self.node_id is not None:
            parts.append("node=%s" % self.node_id)
        if self.step is not None:
            parts.append("t=%s" % self.step)
        if self.extra:
            parts.append(self.extra)
        return "Tag(%s)" % ",".join(str(p) for p in parts)


class Constraint:
    """A linear row: sum(coeffs[v] * v)  <relation>  rhs."""

    __slots__ = ("coeffs", "relation", "rhs", "tag")

    def __init__(self, coeffs, relation, rhs, tag):
        assert relation in ("<=", ">=", "=")
        self.coeffs = dict(coeffs)
        self.relation = relation
        self.rhs = float(rhs)
        self.tag = tag


class MilpProblem:
    """Variables, tagged constraints and a linear objective (minimized)."""

    def __init__(self, name=""):
        self.name = name
        self.variables = {}  # name -> (kind, lb, ub); insertion-ordered
        self.constraints = []
        self.objective = {}

    def add_variable(self, name, kind=CONTINUOUS, lb=-math.inf, ub=math.inf):
        assert name not in self.variables, "duplicate variable %r" % name
        assert kind in (CONTINUOUS, BINARY)
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        self.variables[name] = (kind, float(lb), float(ub))
        return name

    def add_constraint(self, coeffs, relation, rhs, tag):
        for v in coeffs:
            assert v in self.variables, "unknown variable %r" % v
        self.constraints.append(Constraint(coeffs, relation, rhs, tag))

    def set_objective(self, coeffs):
        for v in coeffs:
            assert v in self.variables, "unknown variable %r" % v
        self.objective = dict(coeffs)

    def copy(self, name=None):
        p = MilpProblem(self.name if name is None else name)
        p.variables = dict(self.variables)
        p.constraints = [Constraint(c.coeffs, c.relation, c.rhs, c.tag)
                         for c in self.constraints]
        p.objective = dict(self.objective)
        return p

    def tags(self):
        return [c.tag for c in self.constraints]

    # -- plain-text dump / restore -------------------------------------------

    def dump(self, path):
        """Write the problem to a plain-text file (see docs/milp_format.md)."""
        with open(path, "w") as fh:
            fh.write("problem %s\n" % (self.name or "-"))
            fh.write("vars\n")
            for v, (kind, lb, ub) in self.variables.items():
                fh.write("  %s %s %r %r\n" % (v, kind, lb, ub))
            fh.write("objective\n")
            for v, c in self.objective.items():
                fh.write("  %s %r\n" % (v, c))
            fh.write("constraints\n")
            for c in self.constraints:
                terms = " ".join("%r %s" % (coef, v) for v, coef in c.coeffs.items())
                t = c.tag
                fh.write("  [%s|%s|%s|%s] %s %s %r\n" % (
                    t.kind, "" if t.node_id is None else t.node_id,
                    "" if t.step is None else t.step, t.extra,
                    terms, c.relation, c.rhs))

    @classmethod
    def restore(cls, path):
        p = cls()
        section = None
        with open(path) as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("problem "):
                    name = line.split(" ", 1)[1]
                    p.name = "" if name == "-" else name
                    continue
                if line in ("vars", "objective", "constraints"):
                    section = line
                    continue
                if section == "vars":
                    v, kind, lb, ub = line.split()
                    p.add_variable(v, kind, float(lb), float(ub))
                elif section == "objective":
                    v, c = line.split()
                    p.objective[v] = float(c)
                elif section == "constraints":
                    tag_part, rest = line[1:].split("]", 1)
                    kind, node_id, step, extra = tag_part.split("|")
                    tag = Tag(kind,
                              None if node_id == "" else int(node_id),
                              None if step == "" else int(step),
                              extra)
                    toks = rest.split()
                    rhs = float(toks[-1])
                    relation = toks[-2]
                    coeffs = {}
                    for coef, v in zip(toks[:-2:2], toks[1:-2:2]):
                        coeffs[v] = float(coef)
                    p.add_constraint(coeffs, relation, rhs, tag)
                else:
                    raise ValueError("malformed dump line: %r" % line)
        return p


class MilpSolution:
    def __init__(self, status, values=None, objective=None):
        self.status = status
        self.values = values or {}
        self.objective = objective

    def __getitem__(self, var):
        return self.values[var]

    def __repr__(self):
        return "MilpSolution(%s, obj=%s)" % (self.status, self.objective)


def _build_arrays(p, relax_integrality):
    names = list(p.variables)
    index = {v: i for i, v in enumerate(names)}
    n = len(names)
    c = np.zeros(n)
    for v, coef in p.objective.items():
        c[index[v]] = coef
    integrality = np.zeros(n)
    lb = np.empty(n)
    ub = np.empty(n)
    for i, v in enumerate(names):
        kind, lo, hi = p.variables[v]
        lb[i], ub[i] = lo, hi
        if kind == BINARY and not relax_integrality:
            integrality[i] = 1
    rows, cols, vals = [], [], []
    clb, cub = [], []
    for r, con in enumerate(p.constraints):
        for v, coef in con.coeffs.items():
            rows.append(r)
            cols.append(index[v])
            vals.append(coef)
        if con.relation == "<=":
            clb.append(-math.inf)
            cub.append(con.rhs)
        elif con.relation == ">=":
            clb.append(con.rhs)
            cub.append(math.inf)
        else:
            clb.append(con.rhs)
            cub.append(con.rhs)
    A = sparse.csr_matrix((vals, (rows, cols)),
                          shape=(len(p.constraints), n))
    return names, c, integrality, Bounds(lb, ub), LinearConstraint(A, clb, cub)


def solve_milp(p, relax_integrality=False, time_limit=None):
    """Solve the problem, minimizing the objective.

    Returns a MilpSolution whose status is one of 'optimal', 'infeasible',
    'unbounded' or 'iteration-limit'.
    """
    names, c, integrality, bounds, lincon = _build_arrays(p, relax_integrality)
    options = {"mip_rel_gap": 0.0}
    if time_limit is not None:
        options["time_limit"] = time_limit
    constraints = [lincon] if p.constraints else []
    res = milp(c=c, integrality=integrality, bounds=bounds,
               constraints=constraints, options=options)
    status = _STATUS.get(res.status, LIMIT)
    if res.x is None:
        return MilpSolution(status)
    values = {v: float(res.x[i]) for i, v in enumerate(names)}
    return MilpSolution(status, values, float(res.fun))


def solve_lp(p, time_limit=None):
    """Solve the continuous relaxation (all integrality dropped)."""
    return solve_milp(p, relax_integrality=True, time_limit=time_limit)


def find_iis(p, removable):
    """An irreducibly infeasible subset of the removable constraints.

    Deletion filtering: each removable constraint is tentatively deleted (in
    descending constraint order); if the rest is still infeasible the deletion
    is made permanent.  The returned tag set, together with the non-removable
    constraints, is infeasible, and dropping any single returned constraint
    makes the remainder feasible.

    @param removable: set of tags that diagnosis may delete
    @return set of tags forming the irreducible core
    """
    if solve_milp(p).status != INFEASIBLE:
        raise ValueError("find_iis requires an infeasible problem")
    candidates = {i for i, con in enumerate(p.constraints) if con.tag in removable}
    kept = set(candidates)

    def subproblem(drop):
        q = MilpProblem(p.name)
        q.variables = dict(p.variables)
        for i, con in enumerate(p.constraints):
            if i in candidates and (i not in kept or i == drop):
                continue
            q.constraints.append(con)
        return q

    for i in sorted(candidates, reverse=True):
        if solve_milp(subproblem(i)).status == INFEASIBLE:
            kept.discard(i)
    return {p.constraints[i].tag for i in kept}


def affine_bound(coeffs, const, variables):
    """An upper bound on |sum coeffs*v + const| given variable boxes.

    Used to certify big-M values; raises if any referenced variable has an
    unbounded box.
    """
    acc = abs(const)
    for v, c in coeffs.items():
        kind, lo, hi = variables[v]
        m = max(abs(lo), abs(hi))
        if not math.isfinite(m):
            raise ValueError("cannot bound %r: variable box is unbounded" % v)
        acc += abs(c) * m
    return acc


def encode_min(p, out_var, operands, big_m, tag_fn):
    """Constrain out_var to equal the minimum of a list of affine operands.

    Each operand is a (coeffs, const) pair.  The encoding introduces one
    selector binary per operand and big-M sandwich rows so that the binaries
    pin out_var to the exact extremum regardless of objective direction.

    @param tag_fn: callable(index, role) -> Tag for the emitted rows; roles are
        'ub' (out <= operand), 'pick' (selector sum), 'lo'/'hi' (sandwich)
    """
    _encode_extremum(p, out_var, operands, big_m, tag_fn, is_min=True)


def encode_max(p, out_var, operands, big_m, tag_fn):
    """Constrain out_var to equal the maximum of a list of affine operands."""
    _encode_extremum(p, out_var, operands, big_m, tag_fn, is_min=False)


def _encode_extremum(p, out_var, operands, big_m, tag_fn, is_min):
    assert operands
    for coeffs, const in operands:
        # the sandwich rows must absorb the largest possible gap between two
        # operand values, so M has to dominate twice the magnitude bound
        if 2.0 * affine_bound(coeffs, const, p.variables) >= big_m:
            raise ValueError(
                "big-M value %g does not dominate operand bound; "
                "increase big_m or tighten variable boxes" % big_m)
    selectors = []
    for i, (coeffs, const) in enumerate(operands):
        z = "%s_z%d" % (out_var, i)
        p.add_variable(z, BINARY)
        selectors.append(z)
        # out <= operand (min) / out >= operand (max)
        row = {out_var: 1.0}
        for v, c in coeffs.items():
            row[v] = row.get(v, 0.0) - c
        p.add_constraint(row, "<=" if is_min else ">=", const, tag_fn(i, "ub"))
        # operand - (1-z)M <= out <= operand + (1-z)M
        lo = dict(row)
        lo[z] = lo.get(z, 0.0) - big_m
        p.add_constraint(lo, ">=", const - big_m, tag_fn(i, "lo"))
        hi = dict(row)
        hi[z] = hi.get(z, 0.0) + big_m
        p.add_constraint(hi, "<=", const + big_m, tag_fn(i, "hi"))
    p.add_constraint({z: 1.0 for z in selectors}, ">=", 1.0, tag_fn(-1, "pick"))
