"""Diagnosis of infeasible synthesis instances and automatic repair.

When an encoded instance has no solution, diagnosis extracts an irreducibly
infeasible subset of the predicate-defining rows, maps it back to formula
nodes and their supports, and repair relaxes exactly the diagnosed rows with
weighted nonnegative slacks.  The slack optimum then yields either shifted
predicate bounds or shrunk operator time windows, and the repaired
specification is re-solved to confirm feasibility.

The machinery accepts several encodings of the same specification sharing one
problem (used when repairing a contract against a set of recorded disturbance
runs at once); slack variables are shared across the copies so the extracted
repair is a single consistent change to the specification.
"""

import json
import math

from . import milp as mp
from .milp import find_iis, solve_milp
from .stl import (
    Interval, apply_interval_repair, apply_predicate_repair,
    normalize, parse, support, transform_temporal,
)
from .stl.ast import ALWAYS, AND, EVENTUALLY, OR, PRED, UNTIL
from .synthesis import encode, solve_synthesis

ZERO_SLACK = 1e-6


class RepairError(RuntimeError):
    pass


class Diagnosis:
    """One round of infeasibility localization.

    @param nodes: ids of the diagnosed predicate leaves (in the original spec)
    @param supports: node id -> set of steps where the leaf is evaluated
    @param constraints: every predicate-defining row of a diagnosed node
    @param iis: the irreducible core itself (a subset of constraints)
    """

    def __init__(self, nodes, supports, constraints, iis):
        self.nodes = nodes
        self.supports = supports
        self.constraints = constraints
        self.iis = iis


def _row_groups(encs):
    """Merge predicate rows of several copies: (node, step) -> [tags]."""
    groups = {}
    for enc in encs:
        spec_group = enc.prefix + "spec"
        for key, tag in enc.pred_rows.items():
            if tag.extra == spec_group:
                groups.setdefault(key, []).append(tag)
    return groups


def diagnose(enc, current_milp=None, slacked=()):
    """Localize infeasibility to predicate rows of the encoded spec."""
    m = current_milp if current_milp is not None else enc.milp
    return _diagnose(m, [enc], slacked)


def _diagnose(m, encs, slacked=()):
    if solve_milp(m).status != mp.INFEASIBLE:
        raise RepairError("diagnose requires an infeasible instance")
    groups = _row_groups(encs)
    removable = {tag for tags in groups.values() for tag in tags
                 if tag not in slacked}
    iis = find_iis(m, removable)
    nodes = sorted({t.node_id for t in iis})
    constraints = {tag for (nid, _t), tags in groups.items()
                   for tag in tags if nid in nodes}
    sp = encs[0].problem
    H, dt = sp.horizon, sp.model.delta_t
    supports = {nid: support(encs[0].spec, nid, H, dt) for nid in nodes}
    return Diagnosis(set(nodes), supports, constraints, iis)


def resolve_weights(spec, nodes, weights):
    """Per-node repair weights for the diagnosed predicate leaves.

    @param weights: None (all 1), a dict keyed by node id or by predicate
        text (with optional 'default'), or a callable nodes -> dict
    """
    if callable(weights):
        out = weights(nodes)
        return {n: float(out.get(n, 1.0)) for n in nodes}
    table = dict(weights or {})
    default = float(table.pop("default", 1.0))
    preds = list(normalize(spec).predicates())
    by_text = {}
    by_canon = {}
    for n in preds:
        by_text.setdefault(n.pred.pretty(), []).append(n.node_id)
        by_canon.setdefault(_canon(n.pred), []).append(n.node_id)
    resolved = {}
    for key, lam in table.items():
        if isinstance(key, int):
            resolved[key] = float(lam)
            continue
        hits = by_text.get(key)
        if hits is None:
            # match semantically: "1.5 <= a" and "a >= 1.5" are the same row
            try:
                target = parse(key)
            except Exception:
                target = None
            if target is not None and target.kind == PRED:
                hits = by_canon.get(_canon(target.pred))
        for nid in hits or []:
            resolved[nid] = float(lam)
    return {n: resolved.get(n, default) for n in nodes}


def _canon(pred):
    """Direction-normalized identity of a linear predicate."""
    return (tuple(sorted(pred.coefficients.items())), round(pred.offset, 12))


def contract_weights(assumption, guarantee, lambda_e, lambda_s):
    """Weight table giving every assumption leaf lambda_e and every guarantee
    leaf lambda_s."""
    table = {}
    for n in normalize(assumption).predicates():
        table[n.node_id] = float(lambda_e)
    for n in normalize(guarantee).predicates():
        table[n.node_id] = float(lambda_s)
    return table


def relax(m, encs, nodes_weights, slacked, slack_mode="per_time"):
    """Add nonnegative slacks to the predicate rows of the given nodes.

    Each targeted row rho = literal(xi(t)) becomes rho = literal + s, so a
    positive slack always relaxes the literal.  With slack_mode 'shared' one
    slack per node covers all steps (a uniform bound change); 'per_time'
    gives each step its own slack.  When several encoded copies share the
    problem, the same slack variable relaxes the corresponding row in every
    copy.

    @param nodes_weights: dict node id -> positive weight
    @param slacked: mutable dict tag -> (slack var, node id, step, weight)
    @return list of (slack var, weight) added
    """
    if not isinstance(encs, (list, tuple)):
        encs = [encs]
    by_tag = {c.tag: c for c in m.constraints}
    groups = _row_groups(encs)
    added = []
    made = set()
    for (nid, t), tags in sorted(groups.items()):
        lam = nodes_weights.get(nid)
        if lam is None or lam <= 0.0:
            continue
        s = "s:%s" % nid if slack_mode == "shared" else "s:%s@%d" % (nid, t)
        for tag in tags:
            if tag in slacked:
                continue
            if s not in made and s not in m.variables:
                m.add_variable(s, lb=0.0, ub=math.inf)
                made.add(s)
                added.append((s, lam))
            row = by_tag[tag]
            row.coeffs[s] = row.coeffs.get(s, 0.0) - 1.0
            slacked[tag] = (s, nid, t, lam)
    return added


class RepairOutcome:
    def __init__(self, status, report, repaired_spec=None, controller=None):
        self.status = status          # 'feasible', 'repaired',
                                      # 'no-interval-repair' or 'unrepaired'
        self.report = report
        self.repaired_spec = repaired_spec
        self.controller = controller  # SynthesisResult for the repaired spec


def repair_encoded(sp, encs, work, weights=None, mode="predicate",
                   slack_mode="per_time", max_rounds=10, report=None):
    """Diagnose/relax loop on an already-encoded (infeasible) problem.

    @param encs: encoded copies of sp's specification sharing `work`
    @param work: the MilpProblem to relax in place (objective is replaced by
        the weighted slack norm)
    @return (status, repaired_spec, report); status is 'repaired',
        'no-interval-repair' or 'unrepaired'
    """
    assert mode in ("predicate", "interval")
    if report is None:
        report = RepairReport(sp, mode)
    work.set_objective({})
    slacked = {}
    slack_objective = {}
    sol = None
    for _ in range(max_rounds):
        diag = _diagnose(work, encs, slacked)
        lam = resolve_weights(sp.spec, sorted(diag.nodes), weights)
        report.add_round(diag, lam)
        positive = {n: w for n, w in lam.items() if w > 0.0}
        if not positive:
            report.status = "unrepaired"
            return "unrepaired", None, report
        for s, w in relax(work, encs, positive, slacked, slack_mode):
            slack_objective[s] = w
        work.set_objective(slack_objective)
        sol = solve_milp(work)
        if sol.status == mp.OPTIMAL:
            break
    if sol is None or sol.status != mp.OPTIMAL:
        report.status = "unrepaired"
        return "unrepaired", None, report

    slack_table = {}
    for tag, (s, nid, t, w) in slacked.items():
        prev = slack_table.setdefault(nid, {}).get(t, 0.0)
        slack_table[nid][t] = max(prev, max(0.0, sol[s]))
    report.set_slacks(slack_table, sol.objective)

    if mode == "predicate":
        repaired = extract_predicate_repairs(sp.spec, slack_table, report)
    else:
        repaired = extract_interval_repairs(sp, slack_table, report)
        if repaired is None:
            report.status = "no-interval-repair"
            return "no-interval-repair", None, report
    return "repaired", repaired, report


def diagnose_repair(sp, weights=None, mode="predicate", slack_mode="per_time",
                    max_rounds=10):
    """Alternate diagnosis and slack relaxation until the instance becomes
    feasible, then extract a minimal repair and re-solve to confirm it.

    @param sp: SynthesisProblem
    @param weights: see resolve_weights; weight 0 marks a leaf non-repairable
    @param mode: 'predicate' shifts bounds, 'interval' re-times operators
    @return RepairOutcome with a RepairReport
    """
    enc = encode(sp)
    report = RepairReport(sp, mode)
    if solve_milp(enc.milp).status == mp.OPTIMAL:
        report.status = "feasible"
        return RepairOutcome("feasible", report, repaired_spec=sp.spec,
                             controller=solve_synthesis(sp))
    work = enc.milp.copy("repair")
    status, repaired, report = repair_encoded(
        sp, [enc], work, weights, mode, slack_mode, max_rounds, report)
    if status != "repaired":
        return RepairOutcome(status, report)
    check = solve_synthesis(sp.with_spec(repaired))
    report.set_repaired(repaired, check)
    if not check.feasible:
        status = "no-interval-repair" if mode == "interval" else "unrepaired"
        report.status = status
        return RepairOutcome(status, report, repaired_spec=repaired)
    report.status = "repaired"
    return RepairOutcome("repaired", report, repaired_spec=repaired,
                         controller=check)


def extract_predicate_repairs(spec, slack_table, report=None):
    """Shift each relaxed predicate by its largest per-step slack."""
    repaired = spec
    for nid in sorted(slack_table):
        shift = max(slack_table[nid].values())
        if shift <= ZERO_SLACK:
            continue
        repaired = apply_predicate_repair(repaired, nid, shift)
        if report is not None:
            report.add_shift(spec, repaired, nid, shift)
    return repaired


def extract_interval_repairs(sp, slack_table, report=None):
    """Shrink operator windows to the largest contiguous zero-slack stretch.

    Timed untils are first unfolded into always/eventually parts; each
    predicate leaf contributes its zero-slack steps, Boolean nodes intersect
    their children, and temporal nodes adopt their child's window.  Returns
    the repaired formula, or None when some window collapses to nothing.
    Only operators anchored solely at step 0 are re-timed.
    """
    spec = sp.spec
    H, dt = sp.horizon, sp.model.delta_t
    tt = transform_temporal(spec)
    f = tt.formula

    def leaf_window(n):
        orig = tt.pred_origin.get(n.node_id, n.node_id)
        sigma = support(f, n.node_id, H, dt)
        slacks = slack_table.get(orig, {})
        zeros = {t for t in sigma if slacks.get(t, 0.0) <= ZERO_SLACK}
        return _largest_run(zeros)

    new_intervals = {}
    failed = []

    def sigma_star(n):
        if n.kind == PRED:
            return leaf_window(n)
        if n.kind in (AND, OR) or (n.kind == UNTIL and n.interval is None):
            acc = None
            for c in n.children:
                s = sigma_star(c)
                acc = s if acc is None else acc & s
            return _largest_run(acc)
        assert n.kind in (ALWAYS, EVENTUALLY)
        s = sigma_star(n.children[0])
        if support(f, n.node_id, H, dt) == {0}:
            if not s:
                failed.append(n.node_id)
            else:
                new_intervals[n.node_id] = s
        return s

    sigma_star(f)
    if failed:
        return None

    repaired = spec
    for nid, steps in sorted(new_intervals.items()):
        orig_id = tt.interval_origin.get(nid, nid)
        target = spec.find(orig_id)
        node = f.find(nid)
        if target.kind == UNTIL and node.kind != EVENTUALLY:
            # the [a,b] part of an unfolded until comes from its F node
            continue
        if target.interval is None:
            continue  # untimed until: nothing to re-time
        lo = round(min(steps) * dt, 9)
        hi = round(max(steps) * dt, 9)
        keep_unbounded = (target.interval.unbounded and max(steps) == H - 1)
        new_iv = Interval(lo, None if keep_unbounded else hi)
        if new_iv == target.interval:
            continue
        repaired = apply_interval_repair(repaired, orig_id, new_iv)
        if report is not None:
            report.add_interval(target, new_iv)
    return repaired


def _largest_run(steps):
    """Largest contiguous run in a step set; earliest on ties."""
    if not steps:
        return set()
    best, cur = [], []
    for t in sorted(steps):
        if cur and t == cur[-1] + 1:
            cur.append(t)
        else:
            cur = [t]
        if len(cur) > len(best):
            best = list(cur)
    return set(best)


# --------------------------------------------------------------------------
# reporting
# --------------------------------------------------------------------------

def _literal_text(spec, nid):
    leaf = normalize(spec).find(nid)
    body = leaf.pred.pretty()
    return "!(%s)" % body if leaf.negated else body


class RepairReport:
    """Human- and machine-readable account of a diagnose/repair run."""

    def __init__(self, sp, mode):
        self.sp = sp
        self.mode = mode
        # stable node labels: preorder position in the normalized formula,
        # so identical runs produce identical reports regardless of how many
        # formulas were built before this one
        self._labels = {n.node_id: i
                        for i, n in enumerate(normalize(sp.spec).walk())}
        self.status = "in-progress"
        self.rounds = []
        self.slacks = []       # entries: node, literal, times -> slack
        self.norm = None
        self.shifts = []       # entries: node, before, after, shift
        self.intervals = []    # entries: node, before, after
        self.original_text = sp.spec.pretty()
        self.repaired_text = None
        self.verified_rho = None

    def _label(self, nid):
        return self._labels.get(nid, nid)

    def add_round(self, diag, lam):
        self.rounds.append({
            "diagnosed_nodes": sorted(self._label(n) for n in diag.nodes),
            "literals": {str(self._label(n)): _literal_text(self.sp.spec, n)
                         for n in sorted(diag.nodes)},
            "supports": {str(self._label(n)): sorted(diag.supports[n])
                         for n in sorted(diag.nodes)},
            "iis_rows": sorted("%s@t=%s" % (self._label(t.node_id), t.step)
                               for t in diag.iis),
            "weights": {str(self._label(n)): lam[n] for n in sorted(lam)},
        })

    def set_slacks(self, slack_table, objective):
        self.slacks = []
        for nid in sorted(slack_table):
            times = slack_table[nid]
            self.slacks.append({
                "node": self._label(nid),
                "literal": _literal_text(self.sp.spec, nid),
                "slack": {str(t): round(times[t], 9) for t in sorted(times)},
                "max": round(max(times.values()), 9),
            })
        self.norm = round(objective, 9) if objective is not None else None

    def add_shift(self, spec, repaired, nid, shift):
        before = spec.find(nid).pred.pretty()
        after = repaired.find(nid).pred.pretty()
        self.shifts.append({"node": self._label(nid), "before": before,
                            "after": after, "shift": round(shift, 9)})

    def add_interval(self, target, new_iv):
        self.intervals.append({
            "node": self._label(target.node_id),
            "operator": target.kind,
            "before": target.interval.pretty() if target.interval else None,
            "after": new_iv.pretty(),
        })

    def set_repaired(self, repaired, check):
        self.repaired_text = repaired.pretty()
        self.verified_rho = None if check.rho is None else round(check.rho, 9)

    def to_json(self):
        doc = {
            "mode": self.mode,
            "status": self.status,
            "original": self.original_text,
            "repaired": self.repaired_text,
            "rounds": self.rounds,
            "slacks": self.slacks,
            "weighted_slack_norm": self.norm,
            "predicate_shifts": self.shifts,
            "interval_changes": self.intervals,
            "verified_robustness": self.verified_rho,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_text(self):
        lines = []
        lines.append("mode: %s" % self.mode)
        lines.append("status: %s" % self.status)
        lines.append("original: %s" % self.original_text)
        for i, r in enumerate(self.rounds):
            lines.append("diagnosis round %d:" % (i + 1))
            for n in r["diagnosed_nodes"]:
                lines.append("  node %s: %s  support=%s  weight=%s" % (
                    n, r["literals"][str(n)], r["supports"][str(n)],
                    r["weights"].get(str(n))))
        if self.slacks:
            times = sorted({int(t) for e in self.slacks for t in e["slack"]})
            header = "  %-28s" % "literal" + "".join(
                "%10s" % ("t=%d" % t) for t in times)
            lines.append("slacks (weighted 1-norm %s):" % self.norm)
            lines.append(header)
            for e in self.slacks:
                row = "  %-28s" % e["literal"]
                for t in times:
                    v = e["slack"].get(str(t))
                    row += "%10s" % ("-" if v is None else "%.3f" % v)
                lines.append(row)
        for e in self.shifts:
            lines.append("shift node %s: %s  ->  %s  (by %.4f)" % (
                e["node"], e["before"], e["after"], e["shift"]))
        for e in self.intervals:
            lines.append("re-time node %s: %s%s -> %s%s" % (
                e["node"], e["operator"], e["before"], e["operator"], e["after"]))
        if self.repaired_text:
            lines.append("repaired: %s" % self.repaired_text)
        if self.verified_rho is not None:
            lines.append("re-solve robustness: %.6f" % self.verified_rho)
        return "\n".join(lines) + "\n"
