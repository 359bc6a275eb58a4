"""Encoding finite-horizon control problems with formula constraints as
mixed-integer linear programs, and solving them.

The robustness of every formula node at every relevant step becomes a
continuous variable; predicate leaves are defined by tagged equality rows
(the rows diagnosis may later relax), and min/max operators are linked by
big-M selector blocks so the variables carry exact robustness values.
"""

import math

import numpy as np

from . import milp as mp
from .milp import MilpProblem, Tag, encode_max, encode_min, solve_milp
from .stl import normalize, robustness
from .stl.ast import (
    ALWAYS, AND, EVENTUALLY, OR, PRED, UNTIL,
)
from .stl.semantics import Trace, window_steps
from .system import BINARY


class SynthesisProblem:
    """A finite-horizon synthesis instance.

    @param model: SystemModel
    @param spec: formula over the model's variables (parsed Node)
    @param horizon: number of steps H; the run covers steps 0..H-1
    @param x0: initial state (defaults to the model's)
    @param w_seq: (H, nw) array fixing the disturbance, or None to leave the
        disturbance free within its box bounds
    @param eps_strict: satisfaction margin required of the specification root
    @param big_m: big-M constant for operator encodings (certified at encode
        time against variable boxes)
    @param cost: 'input_l1' (default) or 'zero'
    """

    def __init__(self, model, spec, horizon, x0=None, w_seq=None,
                 eps_strict=0.01, big_m=1e4, cost="input_l1"):
        assert horizon >= 1
        self.model = model
        self.spec = spec
        self.horizon = int(horizon)
        self.x0 = model.x0 if x0 is None else np.asarray(x0, dtype=float)
        self.w_seq = None if w_seq is None else \
            np.asarray(w_seq, dtype=float).reshape(horizon, len(model.disturbances))
        self.eps_strict = float(eps_strict)
        self.big_m = float(big_m)
        assert cost in ("input_l1", "zero")
        self.cost = cost

    def with_spec(self, spec):
        return SynthesisProblem(self.model, spec, self.horizon, self.x0,
                                self.w_seq, self.eps_strict, self.big_m,
                                self.cost)


def rho_magnitude_bound(formulas, model):
    """Bound on |robustness| of any node, from predicate coefficients and
    variable boxes."""
    best = 1.0
    for f in formulas:
        for leaf in normalize(f).predicates():
            acc = abs(leaf.pred.offset)
            for v, c in leaf.pred.coefficients.items():
                if v not in model.bounds:
                    raise ValueError("predicate references unknown variable %r" % v)
                lo, hi = model.bounds[v]
                m = max(abs(lo), abs(hi))
                if not math.isfinite(m):
                    raise ValueError("variable %r needs a finite box bound" % v)
                acc += abs(c) * m
            best = max(best, acc)
    return best


class Encoded:
    """An encoded instance: the MILP plus maps back to the formula and run."""

    def __init__(self, problem, milp_problem, prefix, spec_norm, rho_vars,
                 pred_rows, root_var, input_var):
        self.problem = problem
        self.milp = milp_problem
        self.prefix = prefix
        self.spec = spec_norm          # normalized formula that was encoded
        self.rho_vars = rho_vars       # (node_id, step) -> variable name
        self.pred_rows = pred_rows     # (node_id, step) -> Tag of defining row
        self.root_var = root_var
        self.input_var = input_var     # (input name, step) -> variable name

    def var(self, v, k):
        if v in self.problem.model.inputs:
            return self.input_var[(v, k)]
        return "%s%s@%d" % (self.prefix, v, k)

    def trace(self, sol):
        m = self.problem.model
        H = self.problem.horizon
        data = {v: [sol[self.var(v, k)] for k in range(H)]
                for v in m.variables()}
        return Trace(data, m.delta_t)

    def u_seq(self, sol):
        m = self.problem.model
        H = self.problem.horizon
        return np.array([[sol[self.input_var[(v, k)]] for v in m.inputs]
                         for k in range(H)])

    def w_seq(self, sol):
        m = self.problem.model
        H = self.problem.horizon
        return np.array([[sol[self.var(v, k)] for v in m.disturbances]
                         for k in range(H)])


class _Builder:
    """Adds the run variables, dynamics and formula blocks of one instance to
    a MilpProblem (possibly shared with other instances)."""

    def __init__(self, sp, milp_problem, prefix="", input_var=None):
        self.sp = sp
        self.m = milp_problem
        self.prefix = prefix
        self.model = sp.model
        self.H = sp.horizon
        self.counter = 0
        self.input_var = {} if input_var is None else input_var
        self.rho_vars = {}
        self.pred_rows = {}
        self.cache = {}

    def var(self, v, k):
        if v in self.model.inputs:
            return self.input_var[(v, k)]
        return "%s%s@%d" % (self.prefix, v, k)

    def add_run_variables(self):
        for k in range(self.H):
            for v in self.model.inputs:
                if (v, k) not in self.input_var:
                    lo, hi = self.model.bounds[v]
                    name = "%s%s@%d" % (self.prefix, v, k)
                    self.m.add_variable(name, self.model.kinds[v], lo, hi)
                    self.input_var[(v, k)] = name
            for group in (self.model.states, self.model.disturbances,
                          self.model.outputs):
                for v in group:
                    lo, hi = self.model.bounds[v]
                    self.m.add_variable(self.var(v, k), self.model.kinds[v],
                                        lo, hi)

    def add_dynamics(self):
        model, H = self.model, self.H
        x0 = self.sp.x0
        for i, v in enumerate(model.states):
            self.m.add_constraint({self.var(v, 0): 1.0}, "=", x0[i],
                                  Tag("dynamics", step=0,
                                      extra=self.prefix + "init:" + v))
        for k in range(H - 1):
            for i, v in enumerate(model.states):
                row = {self.var(v, k + 1): 1.0}
                for j, s in enumerate(model.states):
                    if model.A[i, j]:
                        row[self.var(s, k)] = row.get(self.var(s, k), 0.0) - model.A[i, j]
                for j, s in enumerate(model.inputs):
                    if model.B[i, j]:
                        row[self.var(s, k)] = row.get(self.var(s, k), 0.0) - model.B[i, j]
                for j, s in enumerate(model.disturbances):
                    if model.E[i, j]:
                        row[self.var(s, k)] = row.get(self.var(s, k), 0.0) - model.E[i, j]
                self.m.add_constraint(row, "=", model.c[i],
                                      Tag("dynamics", step=k,
                                          extra=self.prefix + "update:" + v))
        for k in range(H):
            for i, v in enumerate(model.outputs):
                row = {self.var(v, k): 1.0}
                for j, s in enumerate(model.states):
                    if model.C[i, j]:
                        row[self.var(s, k)] = row.get(self.var(s, k), 0.0) - model.C[i, j]
                for j, s in enumerate(model.inputs):
                    if model.D[i, j]:
                        row[self.var(s, k)] = row.get(self.var(s, k), 0.0) - model.D[i, j]
                for j, s in enumerate(model.disturbances):
                    if model.F[i, j]:
                        row[self.var(s, k)] = row.get(self.var(s, k), 0.0) - model.F[i, j]
                self.m.add_constraint(row, "=", model.d[i],
                                      Tag("dynamics", step=k,
                                          extra=self.prefix + "output:" + v))
        if self.sp.w_seq is not None:
            for k in range(H):
                for i, v in enumerate(model.disturbances):
                    self.m.add_constraint({self.var(v, k): 1.0}, "=",
                                          self.sp.w_seq[k, i],
                                          Tag("dynamics", step=k,
                                              extra=self.prefix + "dist:" + v))

    def add_cost(self):
        if self.sp.cost == "zero":
            return
        obj = dict(self.m.objective)
        for k in range(self.H):
            for v in self.model.inputs:
                uvar = self.input_var[(v, k)]
                e = "%sabs:%s" % (self.prefix, uvar)
                if e in self.m.variables:
                    continue
                lo, hi = self.model.bounds[v]
                self.m.add_variable(e, lb=0.0, ub=max(abs(lo), abs(hi)))
                self.m.add_constraint({e: 1.0, uvar: -1.0}, ">=", 0.0,
                                      Tag("plumbing", step=k, extra="abs+:" + uvar))
                self.m.add_constraint({e: 1.0, uvar: 1.0}, ">=", 0.0,
                                      Tag("plumbing", step=k, extra="abs-:" + uvar))
                obj[e] = 1.0
        self.m.set_objective(obj)

    # -- formula encoding ----------------------------------------------------

    def encode_formula(self, spec, rho_bound, group="spec", margin=None,
                       satisfaction=True):
        """Encode one formula anchored at step 0; returns the root variable.

        @param group: label baked into predicate-row tags; diagnosis treats
            only group 'spec' rows as relaxable
        @param margin: right-hand side of the root satisfaction row
        """
        f = normalize(spec)
        if 2.0 * (rho_bound + 1.0) >= self.sp.big_m:
            raise ValueError(
                "big-M value %g too small for robustness range %g; increase "
                "big_m or tighten variable boxes" % (self.sp.big_m, rho_bound))
        root = self._encode(f, 0, rho_bound, group)
        if satisfaction:
            m = self.sp.eps_strict if margin is None else margin
            self.m.add_constraint({root: 1.0}, ">=", m,
                                  Tag("stl-operator", f.node_id, 0,
                                      extra=self.prefix + group + ":root"))
        return f, root

    def _rho_var(self, node, t, rho_bound):
        name = "%srho%d@%d#%d" % (self.prefix, node.node_id, t, self.counter)
        self.counter += 1
        self.m.add_variable(name, lb=-(rho_bound + 1.0), ub=rho_bound + 1.0)
        return name

    def _tagger(self, node, t, group):
        def tag(i, role):
            return Tag("stl-operator", node.node_id, t,
                       extra="%s%s:%d:%s" % (self.prefix, group, i, role))
        return tag

    def _encode(self, node, t, rho_bound, group):
        key = (node.node_id, t, group)
        if key in self.cache:
            return self.cache[key]
        rho = self._rho_var(node, t, rho_bound)
        self.cache[key] = rho
        k = node.kind
        if k == PRED:
            sign = -1.0 if node.negated else 1.0
            row = {rho: 1.0}
            for v, c in node.pred.coefficients.items():
                vk = self.var(v, t)
                row[vk] = row.get(vk, 0.0) - sign * c
            tag = Tag("stl-predicate", node.node_id, t, extra=self.prefix + group)
            self.m.add_constraint(row, "=", sign * node.pred.offset, tag)
            self.pred_rows[(node.node_id, t)] = tag
        elif k in (AND, OR):
            ops = [({self._encode(c, t, rho_bound, group): 1.0}, 0.0)
                   for c in node.children]
            enc = encode_min if k == AND else encode_max
            enc(self.m, rho, ops, self.sp.big_m, self._tagger(node, t, group))
        elif k in (ALWAYS, EVENTUALLY):
            steps = self._window(node, t)
            ops = [({self._encode(node.children[0], s, rho_bound, group): 1.0}, 0.0)
                   for s in steps]
            enc = encode_min if k == ALWAYS else encode_max
            enc(self.m, rho, ops, self.sp.big_m, self._tagger(node, t, group))
        elif k == UNTIL:
            a, b = node.children
            steps = self._window(node, t)
            outer = []
            for tp in steps:
                ops = [({self._encode(b, tp, rho_bound, group): 1.0}, 0.0)]
                ops += [({self._encode(a, s, rho_bound, group): 1.0}, 0.0)
                        for s in range(t, tp + 1)]
                mvar = self._rho_var(node, t, rho_bound)
                encode_min(self.m, mvar, ops, self.sp.big_m,
                           self._tagger(node, tp, group))
                outer.append(({mvar: 1.0}, 0.0))
            encode_max(self.m, rho, outer, self.sp.big_m,
                       self._tagger(node, t, group))
        else:
            raise ValueError("cannot encode node kind %r" % k)
        self.rho_vars[(node.node_id, t)] = rho
        return rho

    def _window(self, node, t):
        if node.kind == UNTIL and node.interval is None:
            return list(range(t, self.H))
        steps = window_steps(node.interval, t, self.model.delta_t, self.H,
                             truncate=True)
        if not steps:
            raise ValueError(
                "window of %s at step %d is empty at horizon %d"
                % (node.kind, t, self.H))
        return steps


def encode(sp, prefix="", milp_problem=None, input_var=None,
           satisfaction=True, with_cost=True, extra_specs=()):
    """Encode a synthesis instance into a (possibly shared) MILP.

    @param extra_specs: list of (formula, group, margin) encoded as additional
        hard constraint blocks (used for environment commitments)
    @return Encoded
    """
    m = milp_problem if milp_problem is not None else MilpProblem("synthesis")
    b = _Builder(sp, m, prefix, input_var)
    b.add_run_variables()
    b.add_dynamics()
    if with_cost:
        b.add_cost()
    formulas = [sp.spec] + [f for f, _, _ in extra_specs]
    rb = rho_magnitude_bound(formulas, sp.model)
    spec_norm, root = b.encode_formula(sp.spec, rb, group="spec",
                                       satisfaction=satisfaction)
    for f, group, margin in extra_specs:
        b.encode_formula(f, rb, group=group, margin=margin)
    return Encoded(sp, m, prefix, spec_norm, b.rho_vars, b.pred_rows, root,
                   b.input_var)


class SynthesisResult:
    def __init__(self, status, encoded, solution, u_seq=None, trace=None,
                 rho=None):
        self.status = status
        self.encoded = encoded
        self.solution = solution
        self.u_seq = u_seq
        self.trace = trace
        self.rho = rho

    @property
    def feasible(self):
        return self.status == mp.OPTIMAL


def solve_synthesis(sp, validate=True):
    """Encode and solve; on success the returned run is re-checked with the
    trace monitor so encoder and monitor cannot drift apart silently."""
    enc = encode(sp)
    sol = solve_milp(enc.milp)
    if sol.status != mp.OPTIMAL:
        return SynthesisResult(sol.status, enc, sol)
    tr = enc.trace(sol)
    rho = robustness(enc.spec, tr, truncate=True)
    if validate:
        assert rho >= sp.eps_strict - 1e-6, \
            "encoder produced a run the monitor rejects (rho=%g)" % rho
    return SynthesisResult(sol.status, enc, sol, enc.u_seq(sol), tr, rho)


class MpcResult:
    def __init__(self, status, trace, infeasible_step=None, encoded=None,
                 solution=None):
        self.status = status           # 'completed' or 'infeasible'
        self.trace = trace             # executed prefix (may be None)
        self.infeasible_step = infeasible_step
        self.encoded = encoded         # encoding of the failing solve
        self.solution = solution

    @property
    def completed(self):
        return self.status == "completed"


def mpc_run(sp, steps, w_source=None):
    """Receding-horizon execution: re-solve at every step, apply the first
    input, advance the plant one step.

    @param w_source: callable step -> disturbance vector applied to the plant
        and assumed over the prediction horizon; defaults to the problem's
        fixed w_seq continued at its last value, or zeros
    @return MpcResult; on an infeasible solve the result carries the encoding
        so the failure can be diagnosed
    """
    model = sp.model
    nw = len(model.disturbances)

    if w_source is None:
        if sp.w_seq is not None:
            base = sp.w_seq

            def w_source(k):
                return base[min(k, len(base) - 1)]
        else:
            def w_source(k):
                return np.zeros(nw)

    x = np.asarray(sp.x0, dtype=float)
    applied_u = []
    applied_w = []
    xs = []
    for k in range(steps):
        horizon_w = np.array([w_source(k + j) for j in range(sp.horizon)]) \
            if nw else None
        local = SynthesisProblem(model, sp.spec, sp.horizon, x0=x,
                                 w_seq=horizon_w, eps_strict=sp.eps_strict,
                                 big_m=sp.big_m, cost=sp.cost)
        res = solve_synthesis(local)
        if not res.feasible:
            prefix = _partial_trace(model, xs, applied_u, applied_w)
            return MpcResult("infeasible", prefix, infeasible_step=k,
                             encoded=res.encoded, solution=res.solution)
        u = res.u_seq[0]
        w = w_source(k) if nw else np.zeros(0)
        xs.append(x)
        applied_u.append(u)
        applied_w.append(w)
        x = model.step(x, u, w)
    return MpcResult("completed", _partial_trace(model, xs, applied_u, applied_w))


def _partial_trace(model, xs, us, ws):
    if not xs:
        return None
    data = {}
    for i, v in enumerate(model.states):
        data[v] = [x[i] for x in xs]
    for i, v in enumerate(model.inputs):
        data[v] = [u[i] for u in us]
    for i, v in enumerate(model.disturbances):
        data[v] = [w[i] for w in ws]
    for i, v in enumerate(model.outputs):
        data[v] = [model.output(x, u, w)[i] for x, u, w in zip(xs, us, ws)]
    return Trace(data, model.delta_t)
