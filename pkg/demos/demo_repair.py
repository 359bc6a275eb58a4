"""Diagnosing and repairing an infeasible control specification.

Two cars race side by side.  The controlled car must keep its speed above
0.5 from the very first instant, but it starts from rest, so no admissible
acceleration profile can satisfy the requirement: the synthesis MILP is
infeasible.  Diagnosis localizes the conflict to the speed predicate at the
first few steps, and repair proposes the smallest change that restores
feasibility -- either by shifting the predicate bound or by delaying the
start of the requirement's time window.
"""

from stlrepair.repair import diagnose, diagnose_repair
from stlrepair.scenarios import load_scenario
from stlrepair.synthesis import encode, solve_synthesis

sc = load_scenario("race_nonadversarial")
sp = sc.synthesis_problem()

print("specification:")
print("  %s" % sp.spec.pretty())
print("horizon %d steps at dt=%s, x0=%s"
      % (sp.horizon, sp.model.delta_t, [float(x) for x in sp.x0]))
print()

res = solve_synthesis(sp)
print("direct synthesis: %s" % res.status)

# -- where exactly is the conflict? -----------------------------------------
diag = diagnose(encode(sp))
for nid in sorted(diag.nodes):
    print("conflicting predicate (node %d) evaluated at steps %s"
          % (nid, sorted(diag.supports[nid])))
print()

# -- repair 1: relax the guarantee (the ego car's own requirement) ----------
out = diagnose_repair(sp, weights=sc.weights("relax_guarantee"))
print("predicate repair, guarantee side preferred:")
print(out.report.to_text())

# -- repair 2: relax the assumption about the other car instead -------------
out = diagnose_repair(sp, weights=sc.weights("relax_assumption"))
print("predicate repair, assumption side preferred:")
print(out.report.to_text())

# -- repair 3: keep every bound, move the time window -----------------------
# the speed bound is only unmeetable while the car is still accelerating;
# starting the requirement 0.6 s later makes the original bound feasible
out = diagnose_repair(sp, weights=sc.weights("relax_guarantee"),
                      mode="interval")
print("interval repair:")
print(out.report.to_text())
assert out.controller is not None and out.controller.feasible
print("re-synthesized controller inputs (first 5 steps): %s"
      % [round(float(u[0]), 3) for u in out.controller.u_seq[:5]])
