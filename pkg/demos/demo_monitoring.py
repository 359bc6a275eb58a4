"""Monitoring a simulated run against temporal logic requirements.

A double-integrator cart is driven by a precomputed acceleration profile and
the resulting trace is checked against a few requirements, both for a yes/no
verdict and for the quantitative robustness margin (how far the run is from
violating, in the units of the predicates).
"""

import numpy as np

from stlrepair.stl import parse, robustness, satisfies
from stlrepair.system import SystemModel

# a cart on a line: position p, velocity v, acceleration input a
dt = 0.1
cart = SystemModel(
    states=["p", "v"], inputs=["a"],
    A=[[1, dt], [0, 1]], B=[[0], [dt]],
    delta_t=dt, x0=[0.0, 0.0],
    bounds={"p": (-10, 10), "v": (-5, 5), "a": (-2, 2)},
)

# bang-coast-bang: accelerate, hold, brake
u = np.concatenate([np.full(10, 1.5), np.zeros(20), np.full(10, -1.5)])
trace = cart.simulate(cart.x0, u.reshape(-1, 1))

requirements = [
    # reach p >= 1 within the first two seconds
    "F[0,2] p >= 1",
    # never exceed the speed limit
    "G[0,4] v <= 2",
    # once fast, eventually slow again
    "G[0,2]((v >= 1) -> F[0,2](v <= 0.5))",
    # an intentionally violated requirement
    "G[0,4] p <= 2",
]

print("trace: %d samples at dt=%s" % (trace.length, dt))
print("final position %.3f, final velocity %.3f"
      % (trace.data["p"][-1], trace.data["v"][-1]))
print()
for text in requirements:
    f = parse(text)
    rho = robustness(f, trace, truncate=True)
    verdict = "holds" if satisfies(f, trace, truncate=True) else "VIOLATED"
    print("%-38s rho = %+.4f   %s" % (text, rho, verdict))

# robustness is a margin: perturbing every sample by less than |rho| cannot
# flip the verdict.  Shrink the run toward zero and watch the sign change.
print()
f = parse("G[0,4] p <= 2")
for scale in (1.0, 0.8, 0.6, 0.4):
    scaled = cart.simulate(cart.x0, scale * u.reshape(-1, 1))
    print("input scale %.1f: rho(G p <= 2) = %+.4f"
          % (scale, robustness(f, scaled, truncate=True)))
