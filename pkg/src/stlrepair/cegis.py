"""Synthesis against an uncontrolled disturbance, by counterexample-guided
induction, plus repair of unrealizable contracts.

The disturbance ranges over a box (its own specification) and optionally has
to satisfy further assumptions.  Realizability is checked by alternating a
worst-case falsification solve with a re-synthesis against all counterexamples
found so far.  When no controller exists, either the disturbance box is pruned
(shrinking the assumption just enough to exclude the counterexamples) or the
contract itself is repaired with the non-adversarial machinery.
"""

import json
import math

import numpy as np

from . import milp as mp
from .milp import MilpProblem, Tag, solve_milp
from .stl import conj, implies, parse, robustness
from .synthesis import SynthesisProblem, Encoded, encode, solve_synthesis
from .repair import RepairReport, repair_encoded

DUPLICATE_TOL = 1e-6


class ContractProblem:
    """An adversarial synthesis instance.

    @param model: SystemModel with at least one disturbance variable
    @param guarantee: formula the controller must enforce
    @param assumption: formula the disturbance may be assumed to satisfy
        (beyond its box), or None
    @param w_box: dict disturbance name -> (lo, hi); defaults to model bounds
    @param rho_min: robustness level at which the worst case counts as won
    @param eps: pruning step when shrinking the disturbance box
    @param max_iter: counterexample budget before giving up as unknown
    """

    def __init__(self, model, guarantee, assumption=None, horizon=10,
                 x0=None, w_box=None, eps_strict=0.01, big_m=1e4,
                 cost="input_l1", rho_min=1e-4, eps=0.01, max_iter=20):
        assert model.disturbances, "adversarial synthesis needs a disturbance"
        self.model = model
        self.guarantee = guarantee
        self.assumption = assumption
        self.horizon = int(horizon)
        self.x0 = model.x0 if x0 is None else np.asarray(x0, dtype=float)
        self.w_box = dict(w_box) if w_box else \
            {v: model.bounds[v] for v in model.disturbances}
        self.eps_strict = float(eps_strict)
        self.big_m = float(big_m)
        self.cost = cost
        self.rho_min = float(rho_min)
        self.eps = float(eps)
        self.max_iter = int(max_iter)

    def with_box(self, w_box):
        return ContractProblem(self.model, self.guarantee, self.assumption,
                               self.horizon, self.x0, w_box, self.eps_strict,
                               self.big_m, self.cost, self.rho_min, self.eps,
                               self.max_iter)

    def with_guarantee(self, guarantee):
        return ContractProblem(self.model, guarantee, self.assumption,
                               self.horizon, self.x0, self.w_box,
                               self.eps_strict, self.big_m, self.cost,
                               self.rho_min, self.eps, self.max_iter)

    def with_assumption(self, assumption):
        return ContractProblem(self.model, self.guarantee, assumption,
                               self.horizon, self.x0, self.w_box,
                               self.eps_strict, self.big_m, self.cost,
                               self.rho_min, self.eps, self.max_iter)

    def psi(self):
        """The contract body: assumption -> guarantee."""
        if self.assumption is None:
            return self.guarantee
        return implies(self.assumption, self.guarantee)

    def box_formula(self):
        parts = []
        for v in self.model.disturbances:
            lo, hi = self.w_box[v]
            parts.append(parse("G[0,inf)(%s >= %r & %s <= %r)" % (v, lo, v, hi)))
        return parts[0] if len(parts) == 1 else conj(*parts)

    def env_formula(self):
        """Everything the disturbance is assumed to satisfy."""
        box = self.box_formula()
        if self.assumption is None:
            return box
        return conj(box, self.assumption)

    def _sp(self, w_seq=None, cost=None):
        return SynthesisProblem(self.model, self.psi(), self.horizon,
                                x0=self.x0, w_seq=w_seq,
                                eps_strict=self.eps_strict, big_m=self.big_m,
                                cost=self.cost if cost is None else cost)


def check_sat(cp):
    """Is the contract satisfiable with a cooperative disturbance?

    Solves for inputs and disturbance jointly; the disturbance must satisfy
    its box and assumptions (with closed, non-strict margins), the guarantee
    must hold with the strict margin.  Returns a SynthesisResult.
    """
    sp = cp._sp()
    enc = encode(sp, extra_specs=[(cp.env_formula(), "env", 0.0)])
    sol = solve_milp(enc.milp)
    from .synthesis import SynthesisResult
    if sol.status != mp.OPTIMAL:
        return SynthesisResult(sol.status, enc, sol)
    tr = enc.trace(sol)
    return SynthesisResult(sol.status, enc, sol, enc.u_seq(sol), tr,
                           robustness(enc.spec, tr, truncate=True))


def worst_disturbance(cp, u_seq):
    """The disturbance minimizing contract robustness against fixed inputs.

    Among minimizers, a second solve maximizes the summed disturbance so the
    returned counterexample is canonical.  Returns (w_seq, rho) or
    (None, None) when no admissible disturbance exists.
    """
    sp = cp._sp(cost="zero")
    enc = encode(sp, satisfaction=False,
                 extra_specs=[(cp.env_formula(), "env", 0.0)])
    u_seq = np.asarray(u_seq, dtype=float).reshape(cp.horizon,
                                                   len(cp.model.inputs))
    for k in range(cp.horizon):
        for i, v in enumerate(cp.model.inputs):
            enc.milp.add_constraint({enc.input_var[(v, k)]: 1.0}, "=",
                                    u_seq[k, i],
                                    Tag("plumbing", step=k, extra="fix-u:" + v))
    enc.milp.set_objective({enc.root_var: 1.0})
    sol = solve_milp(enc.milp)
    if sol.status != mp.OPTIMAL:
        return None, None
    rho = sol[enc.root_var]
    # tie-break: push the disturbance toward its largest admissible values
    enc.milp.add_constraint({enc.root_var: 1.0}, "<=", rho + 1e-7,
                            Tag("plumbing", extra="pin-rho"))
    obj = {}
    for k in range(cp.horizon):
        for v in cp.model.disturbances:
            obj[enc.var(v, k)] = -1.0
    enc.milp.set_objective(obj)
    sol2 = solve_milp(enc.milp)
    if sol2.status == mp.OPTIMAL:
        sol = sol2
    return enc.w_seq(sol), float(sol[enc.root_var])


def _resynthesize(cp, counterexamples):
    """One controller enforcing the contract against every recorded
    disturbance at once (inputs shared across the copies)."""
    m = MilpProblem("cegis-resynthesis")
    input_var = {}
    encs = []
    for i, w in enumerate(counterexamples):
        sp = cp._sp(w_seq=w)
        encs.append(encode(sp, prefix="c%d:" % i, milp_problem=m,
                           input_var=input_var, with_cost=(i == 0)))
    sol = solve_milp(m)
    if sol.status != mp.OPTIMAL:
        return None
    return encs[0].u_seq(sol)


class CegisResult:
    def __init__(self, status, u_seq=None, counterexamples=None,
                 transcript=None):
        self.status = status  # 'realizable', 'unrealizable' or 'unknown'
        self.u_seq = u_seq
        self.counterexamples = counterexamples or []
        self.transcript = transcript or []

    @property
    def realizable(self):
        return self.status == "realizable"


def solve_cegis(cp, u0):
    """Counterexample-guided synthesis loop starting from a candidate input.

    Alternates worst-case falsification and re-synthesis until the worst case
    clears rho_min (realizable), re-synthesis fails (unrealizable, with the
    accumulated counterexamples), or the iteration budget or a duplicate
    counterexample stops progress (unknown).
    """
    u = np.asarray(u0, dtype=float)
    W = []
    transcript = []
    for it in range(cp.max_iter):
        w, rho = worst_disturbance(cp, u)
        if w is None:
            # no admissible disturbance at all: vacuously realizable
            transcript.append({"iteration": it, "note": "no admissible w"})
            return CegisResult("realizable", u, W, transcript)
        transcript.append({
            "iteration": it,
            "u": [list(map(float, row)) for row in u],
            "worst_w": [list(map(float, row)) for row in w],
            "rho": float(rho),
        })
        if rho >= cp.rho_min:
            return CegisResult("realizable", u, W, transcript)
        if any(np.max(np.abs(w - prev)) <= DUPLICATE_TOL for prev in W):
            transcript.append({"iteration": it, "note": "duplicate counterexample"})
            return CegisResult("unknown", u, W, transcript)
        W.append(w)
        u_new = _resynthesize(cp, W)
        if u_new is None:
            transcript.append({"iteration": it, "note": "re-synthesis infeasible"})
            return CegisResult("unrealizable", None, W, transcript)
        u = u_new
    transcript.append({"note": "iteration budget exhausted"})
    return CegisResult("unknown", u, W, transcript)


def repair_adversarial(cp, counterexamples):
    """Shrink the disturbance box just past the counterexamples.

    Only single-disturbance boxes are pruned.  Looking at counterexample
    entries from step 1 on, the box end closer to the counterexamples moves
    inward by eps.  Returns the pruned ContractProblem, or None when the box
    cannot shrink further.
    """
    if len(cp.model.disturbances) != 1:
        raise ValueError("box pruning handles a single disturbance variable")
    v = cp.model.disturbances[0]
    w_min, w_max = cp.w_box[v]
    entries = []
    for w in counterexamples:
        steps = w[1:] if len(w) > 1 else w
        entries.extend(float(x[0]) for x in steps)
    if not entries:
        return None
    w_u, w_l = max(entries), min(entries)
    s_u = w_max - w_u
    s_l = w_l - w_min
    if s_u <= s_l:
        new = (w_min, w_u - cp.eps)
    else:
        new = (w_l + cp.eps, w_max)
    if new[0] > new[1]:
        return None
    return cp.with_box({v: new})


def _apply_contract_repair(cp, repaired_spec):
    """Split a repaired contract body back into assumption and guarantee."""
    if cp.assumption is None:
        return cp.with_guarantee(repaired_spec)
    fixed = cp.with_assumption(repaired_spec.children[0])
    return fixed.with_guarantee(repaired_spec.children[1])


def _contract_repair_branch(cp, u0, first, weights, mode, slack_mode,
                            max_rounds=5):
    """Repair the contract body until it verifies adversarially.

    Each round relaxes the contract jointly against every counterexample
    recorded so far (one shared controller must survive all of them), applies
    the extracted repair, and re-runs the counterexample-guided loop.  Fresh
    counterexamples from a failed verification feed the next round.  Returns
    the branch summary dict, or None when no round produced a repair.
    """
    current = cp
    W = list(first.counterexamples)
    total_cost = 0.0
    reports = []
    verify = None
    for _ in range(max_rounds):
        m = MilpProblem("contract-repair")
        input_var = {}
        encs = []
        for i, w in enumerate(W):
            encs.append(encode(current._sp(w_seq=w), prefix="c%d:" % i,
                               milp_problem=m, input_var=input_var,
                               with_cost=False))
        if solve_milp(m).status == mp.OPTIMAL:
            break  # jointly feasible yet unrealizable: repair cannot help
        sp0 = current._sp(w_seq=W[0])
        status, repaired, rpt = repair_encoded(
            sp0, encs, m, weights=weights, mode=mode, slack_mode=slack_mode,
            report=RepairReport(sp0, mode))
        if status != "repaired":
            break
        total_cost += rpt.norm or 0.0
        reports.append(rpt)
        current = _apply_contract_repair(current, repaired)
        verify = solve_cegis(current, u0)
        if verify.status != "unrealizable":
            break
        for w in verify.counterexamples:
            if not any(np.max(np.abs(w - prev)) <= DUPLICATE_TOL
                       for prev in W):
                W.append(w)
    if not reports:
        return None
    branch = {
        "cost": round(total_cost, 9),
        "rounds": len(reports),
        "repaired": current.psi().pretty(),
        "report": reports[-1],
        "reports": reports,
        "problem": current,
        "adversarial_status": "unknown" if verify is None else verify.status,
    }
    if verify is not None and verify.realizable:
        branch["controller"] = [list(map(float, r)) for r in verify.u_seq]
    return branch


class AdversarialOutcome:
    def __init__(self):
        self.status = "in-progress"
        self.initial = None          # check_sat / first cegis summary
        self.first_counterexample = None
        self.box_branch = None       # dict: final box, cost, iterations
        self.contract_branch = None  # dict: repair report, cost
        self.chosen = None
        self.repaired = None         # repaired ContractProblem
        self.controller = None
        self.transcript = []

    def to_json(self):
        doc = {
            "status": self.status,
            "first_counterexample": self.first_counterexample,
            "box_branch": self.box_branch,
            "contract_branch": None if self.contract_branch is None else {
                k: v for k, v in self.contract_branch.items()
                if k not in ("report", "reports", "problem")},
            "chosen": self.chosen,
            "transcript": self.transcript,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def diagnose_repair_adversarial(cp, weights=None, mode="predicate",
                                slack_mode="per_time", max_prunings=500,
                                branches=("box", "contract")):
    """Decide realizability; if unrealizable, repair by the cheaper of box
    pruning and contract repair.

    Box pruning repeatedly shrinks the disturbance box by eps until the
    counterexample-guided loop succeeds (cost: total shrink).  Contract
    repair runs the non-adversarial diagnose/repair against the first
    counterexample and re-verifies adversarially (cost: weighted slack norm).

    @return AdversarialOutcome
    """
    out = AdversarialOutcome()
    sat = check_sat(cp)
    if not sat.feasible:
        out.status = "unsatisfiable"
        out.transcript.append({"note": "contract unsatisfiable even with a "
                                       "cooperative disturbance"})
        return out
    u0 = sat.u_seq
    first = solve_cegis(cp, u0)
    out.transcript.extend(first.transcript)
    if first.realizable:
        out.status = "realizable"
        out.controller = first.u_seq
        return out
    if first.status == "unknown":
        out.status = "unknown"
        return out
    out.first_counterexample = [list(map(float, row))
                                for row in first.counterexamples[0]]

    # branch (a): prune the disturbance box
    if "box" in branches and len(cp.model.disturbances) == 1:
        v = cp.model.disturbances[0]
        cpa, res, prunings = cp, first, 0
        while res.status == "unrealizable" and prunings < max_prunings:
            cpa2 = repair_adversarial(cpa, res.counterexamples)
            if cpa2 is None:
                cpa = None
                break
            cpa = cpa2
            prunings += 1
            res = solve_cegis(cpa, u0)
        if cpa is not None and res.realizable:
            lo0, hi0 = cp.w_box[v]
            lo1, hi1 = cpa.w_box[v]
            out.box_branch = {
                "box": [lo1, hi1],
                "cost": (lo1 - lo0) + (hi0 - hi1),
                "prunings": prunings,
                "controller": [list(map(float, r)) for r in res.u_seq],
            }
            out.transcript.append({"note": "box pruning realizable",
                                   "box": [lo1, hi1], "prunings": prunings})

    # branch (b): repair the contract against the recorded counterexamples
    if "contract" in branches:
        branch = _contract_repair_branch(cp, u0, first, weights, mode,
                                         slack_mode)
        if branch is not None:
            out.contract_branch = branch
            out.transcript.append({
                "note": "contract repair", "cost": branch["cost"],
                "adversarial_status": branch["adversarial_status"]})

    # pick the cheaper successful branch
    a_ok = out.box_branch is not None
    b_ok = (out.contract_branch is not None
            and out.contract_branch["adversarial_status"] == "realizable")
    if not a_ok and not b_ok:
        out.status = "unrepaired"
        return out
    if a_ok and (not b_ok or out.box_branch["cost"] <=
                 out.contract_branch["cost"]):
        out.chosen = "box"
        v = cp.model.disturbances[0]
        out.repaired = cp.with_box({v: tuple(out.box_branch["box"])})
        out.controller = out.box_branch.get("controller")
    else:
        out.chosen = "contract"
        out.repaired = out.contract_branch["problem"]
        out.controller = out.contract_branch.get("controller")
    out.status = "repaired"
    return out
