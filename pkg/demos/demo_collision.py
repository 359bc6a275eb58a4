"""Comparing repair alternatives on a collision-avoidance conflict.

An ego vehicle crosses an intersection occupied by another car.  The
specification demands both that the two never occupy the crossing box at the
same time and that the ego acceleration stays inside a narrow band -- and the
two demands cannot be met together: the mandated acceleration drives the ego
into the box exactly while the adversary is there.

The receding-horizon loop fails immediately; repair is then run under two
different weight profiles, which express two different views of what may be
changed.  The weighted slack norms make the alternatives directly comparable.
"""

from stlrepair.repair import diagnose_repair
from stlrepair.scenarios import load_scenario
from stlrepair.synthesis import mpc_run

sc = load_scenario("collision_avoidance")
sp = sc.synthesis_problem()

print("specification:")
print("  %s" % sp.spec.pretty())
print()

res = mpc_run(sp, steps=5)
print("receding-horizon run: %s (first infeasible solve at step %s)"
      % (res.status, res.infeasible_step))
print()

# profile "box": the acceleration band is sacred (weight 0), the crossing box
# may deform, each time step independently
box = diagnose_repair(sp, weights=sc.weights("box"),
                      slack_mode=sc.profile_slack_mode("box"))
print("repair A -- shrink the forbidden box, keep the acceleration band:")
print(box.report.to_text())

# profile "accel": the box is sacred, only the acceleration band may move,
# and it must move uniformly (a single bound change, not one per step)
accel = diagnose_repair(sp, weights=sc.weights("accel"),
                        slack_mode=sc.profile_slack_mode("accel"))
print("repair B -- keep the box, lower the acceleration band uniformly:")
print(accel.report.to_text())

print("weighted slack norm: A = %s, B = %s  ->  repair A is the smaller change"
      % (box.report.norm, accel.report.norm))
assert box.report.norm <= accel.report.norm
