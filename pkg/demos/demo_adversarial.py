"""Realizability against an adversarial disturbance, and contract repair.

Part 1: the racing contract.  The other car's acceleration is now chosen by
an adversary inside a box [0, 2].  The guarantee (match the adversary's speed
while keeping bounded acceleration) is satisfiable for a cooperative
adversary but unrealizable against the box: the counterexample-guided loop
returns the all-out acceleration trace as a witness.  Two repairs compete:
shrinking the disturbance box until a controller exists, and relaxing the
guarantee predicates; the cheaper one is chosen.

Part 2: a power distribution contract with binary switching.  The original
assumptions leave a window in which neither generator feeds the bus, so the
"bus never unpowered for 120 ms" guarantee is falsified.  Three hand-written
candidate repairs (two tightened assumptions, one stretched deadline) are
each verified to make the contract realizable.
"""

import time

import numpy as np

from stlrepair.cegis import check_sat, diagnose_repair_adversarial, solve_cegis
from stlrepair.scenarios import load_scenario

# -- part 1: racing against an adversarial driver ---------------------------

sc = load_scenario("race_adversarial")
cp = sc.contract_problem()
print("guarantee: %s" % cp.guarantee.pretty())
print("disturbance box: %s" % cp.w_box)

sat = check_sat(cp)
print("cooperative disturbance: %s" % sat.status)
first = solve_cegis(cp, sat.u_seq)
print("adversarial disturbance: %s after %d counterexamples"
      % (first.status, len(first.counterexamples)))
w0 = first.counterexamples[0]
print("first counterexample (adversary acceleration): %s"
      % [float(x[0]) for x in w0[:5]], "...")
print()

t0 = time.monotonic()
out = diagnose_repair_adversarial(cp, weights=sc.weights())
print("repair finished in %.1f s: %s" % (time.monotonic() - t0, out.status))
if out.box_branch:
    lo, hi = out.box_branch["box"]
    print("  box branch: prune to [%g, %g] after %d rounds (cost %g)"
          % (lo, hi, out.box_branch["prunings"], out.box_branch["cost"]))
if out.contract_branch:
    print("  contract branch: %s (cost %g)"
          % (out.contract_branch["adversarial_status"],
             out.contract_branch["cost"]))
print("  chosen: %s" % out.chosen)

# the pruned contract really is realizable: re-run the loop from scratch
check = solve_cegis(out.repaired, sat.u_seq)
assert check.realizable
u = np.asarray(out.controller)
print("  synthesized inputs (first 5 steps): %s"
      % [round(float(x[0]), 3) for x in u[:5]])
print()

# -- part 2: power distribution with binary contactors ----------------------

sc = load_scenario("aircraft_eps")
cp = sc.contract_problem()
print("power system contract, horizon %d ticks at dt=%s s"
      % (cp.horizon, cp.model.delta_t))

sat = check_sat(cp)
res = solve_cegis(cp, sat.u_seq)
print("original contract: %s" % res.status)
# longest run of unpowered ticks across the recorded counterexamples
longest = 0
for w in res.counterexamples:
    run = 0
    for v in np.asarray(w)[:, 1]:
        run = run + 1 if v < 0.5 else 0
        longest = max(longest, run)
print("worst recorded unpowered stretch: %d ticks (%d ms)"
      % (longest, longest * 20))
print()

for i, (_kind, _side, _nid, _arg, label) in enumerate(sc.candidate_repairs):
    cpr = sc.apply_candidate_repair(i)
    satr = check_sat(cpr)
    verdict = "unsatisfiable"
    if satr.feasible:
        verdict = solve_cegis(cpr, satr.u_seq).status
    print("candidate repair %d (%s): %s" % (i + 1, label, verdict))
