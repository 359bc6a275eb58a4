"""Command-line entry point.

Subcommands drive the toolkit against a scenario file or builtin scenario:

    monitor   robustness of a recorded trace against the specification
    synth     open-loop controller synthesis over the horizon
    mpc       receding-horizon execution
    diagnose  infeasibility localization (which predicates, at which times)
    repair    diagnose plus automatic predicate or interval repair
    cegis     adversarial realizability check and contract repair

Exit codes: 0 feasible/realizable, 2 infeasible or unrealizable (a report is
still produced), 1 usage or runtime error.  Reports are deterministic: the
same command on the same scenario produces byte-identical output.
"""

import argparse
import json
import os
import sys

import numpy as np

from .cegis import diagnose_repair_adversarial, worst_disturbance
from .repair import RepairError, diagnose, diagnose_repair
from .scenarios import ScenarioError, builtin_scenarios, load_scenario
from .stl import Trace, normalize, robustness
from .synthesis import encode, mpc_run, solve_synthesis

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def build_parser():
    p = argparse.ArgumentParser(
        prog="stlrepair",
        description="Controller synthesis from signal temporal logic "
                    "specifications, with infeasibility diagnosis and "
                    "automatic specification repair.",
        epilog="Builtin scenarios: %s" % ", ".join(builtin_scenarios()))
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text, **extra_flags):
        c = sub.add_parser(name, help=help_text)
        c.add_argument("scenario",
                       help="scenario file or builtin scenario name")
        c.add_argument("--horizon", type=int, default=None,
                       help="override the scenario horizon")
        c.add_argument("--out", metavar="DIR", default=None,
                       help="directory for report and trace artifacts")
        c.add_argument("--dump-milp", action="store_true",
                       help="write the encoded problem to <out>/milp.txt")
        return c

    add("monitor", "evaluate a trace against the specification") \
        .add_argument("--trace", required=True, metavar="CSV",
                      help="trace file (CSV, one column per variable)")
    add("synth", "synthesize an open-loop controller")
    c = add("mpc", "run the receding-horizon loop")
    c.add_argument("--steps", type=int, default=None,
                   help="number of plant steps (default: the horizon)")
    add("diagnose", "localize infeasibility to specification predicates")
    c = add("repair", "diagnose and repair the specification")
    c.add_argument("--mode", choices=("predicate", "interval"), default=None,
                   help="repair by shifting predicates or shrinking windows")
    c.add_argument("--profile", default=None,
                   help="weight profile from the scenario file")
    c.add_argument("--weights", metavar="FILE", default=None,
                   help="JSON file mapping predicate text to repair weight")
    c.add_argument("--interactive", action="store_true",
                   help="prompt for a weight per diagnosed predicate")
    c = add("cegis", "adversarial realizability check and repair")
    c.add_argument("--mode", choices=("predicate", "interval"), default=None)
    c.add_argument("--profile", default=None)
    c.add_argument("--weights", metavar="FILE", default=None)
    c.add_argument("--eps", type=float, default=None,
                   help="disturbance box pruning step")
    c.add_argument("--rho-min", type=float, default=None,
                   help="robustness level counted as adversarially won")
    c.add_argument("--max-cegis", type=int, default=None,
                   help="counterexample iteration budget")
    return p


def _outdir(args):
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write(out, name, text):
    if out is not None:
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text)


def _dump_milp(args, out, problem):
    if args.dump_milp:
        if out is None:
            print("note: --dump-milp needs --out; skipping", file=sys.stderr)
        else:
            problem.dump(os.path.join(out, "milp.txt"))


def _load_weights_arg(args, scenario):
    """Weights from --weights file, --interactive, or the scenario profile."""
    if getattr(args, "weights", None):
        with open(args.weights) as fh:
            return json.load(fh)
    if getattr(args, "interactive", False):
        spec = scenario.spec_formula()

        def prompt(nodes):
            table = {}
            print("assign repair weights (0 forbids changing a predicate):")
            for nid in nodes:
                leaf = normalize(spec).find(nid)
                text = leaf.pred.pretty()
                raw = input("  weight for '%s' [1.0]: " % text).strip()
                table[nid] = float(raw) if raw else 1.0
            return table
        return prompt
    return scenario.weights(getattr(args, "profile", None))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_monitor(args, sc, out):
    trace = Trace.from_csv(args.trace)
    spec = sc.spec_formula()
    rho = robustness(spec, trace, truncate=True)
    verdict = "satisfied" if rho > 0 else "violated"
    text = ("specification: %s\nrobustness: %r\nverdict: %s\n"
            % (spec.pretty(), rho, verdict))
    print(text, end="")
    _write(out, "report.txt", text)
    _write(out, "report.json", json.dumps(
        {"robustness": rho, "verdict": verdict}, indent=2, sort_keys=True))
    return EXIT_OK if rho > 0 else EXIT_INFEASIBLE


def cmd_synth(args, sc, out):
    sp = sc.synthesis_problem(horizon=args.horizon)
    _dump_milp(args, out, encode(sp).milp)
    res = solve_synthesis(sp)
    if not res.feasible:
        text = "status: %s\n" % res.status
        print(text, end="")
        _write(out, "report.txt", text)
        return EXIT_INFEASIBLE
    lines = ["status: feasible",
             "robustness: %r" % res.rho,
             "inputs:"]
    for k, row in enumerate(np.asarray(res.u_seq)):
        lines.append("  t=%-4s %s" % (
            round(k * sp.model.delta_t, 9),
            "  ".join("%s=%r" % (v, float(row[i]))
                      for i, v in enumerate(sp.model.inputs))))
    text = "\n".join(lines) + "\n"
    print(text, end="")
    _write(out, "report.txt", text)
    if out is not None:
        res.trace.to_csv(os.path.join(out, "trace.csv"))
    return EXIT_OK


def cmd_mpc(args, sc, out):
    sp = sc.synthesis_problem(horizon=args.horizon)
    steps = args.steps if args.steps is not None else sp.horizon
    res = mpc_run(sp, steps)
    if res.completed:
        text = "status: completed\nsteps: %d\n" % steps
    else:
        text = ("status: infeasible\nfailed at step: %d\n"
                % res.infeasible_step)
    print(text, end="")
    _write(out, "report.txt", text)
    if out is not None and res.trace is not None:
        res.trace.to_csv(os.path.join(out, "trace.csv"))
    if not res.completed and res.encoded is not None:
        _dump_milp(args, out, res.encoded.milp)
    return EXIT_OK if res.completed else EXIT_INFEASIBLE


def cmd_diagnose(args, sc, out):
    sp = sc.synthesis_problem(horizon=args.horizon)
    enc = encode(sp)
    _dump_milp(args, out, enc.milp)
    try:
        diag = diagnose(enc)
    except RepairError:
        text = "status: feasible\nnothing to diagnose\n"
        print(text, end="")
        _write(out, "report.txt", text)
        return EXIT_OK
    spec = normalize(sp.spec)
    labels = {n.node_id: i for i, n in enumerate(spec.walk())}
    lines = ["status: infeasible", "conflicting predicates:"]
    doc = []
    for nid in sorted(diag.nodes):
        leaf = spec.find(nid)
        text = ("!(%s)" % leaf.pred.pretty()) if leaf.negated \
            else leaf.pred.pretty()
        steps = sorted(diag.supports[nid])
        lines.append("  %-30s evaluated at steps %s" % (text, steps))
        doc.append({"node": labels[nid], "literal": text, "support": steps})
    lines.append("irreducible core rows:")
    for tag in sorted(diag.iis, key=lambda t: (labels[t.node_id], t.step)):
        lines.append("  node %s at step %s" % (labels[tag.node_id], tag.step))
    text = "\n".join(lines) + "\n"
    print(text, end="")
    _write(out, "report.txt", text)
    _write(out, "report.json", json.dumps(
        {"status": "infeasible", "conflicts": doc}, indent=2, sort_keys=True))
    return EXIT_INFEASIBLE


def cmd_repair(args, sc, out):
    sp = sc.synthesis_problem(horizon=args.horizon)
    _dump_milp(args, out, encode(sp).milp)
    weights = _load_weights_arg(args, sc)
    mode = args.mode or (sc.mode if sc.mode != "adversarial" else "predicate")
    res = diagnose_repair(sp, weights=weights, mode=mode,
                          slack_mode=sc.profile_slack_mode(args.profile))
    text = res.report.to_text()
    print(text, end="")
    _write(out, "report.txt", text)
    _write(out, "report.json", res.report.to_json())
    if out is not None and res.controller is not None \
            and res.controller.trace is not None:
        res.controller.trace.to_csv(os.path.join(out, "trace.csv"))
    return EXIT_OK if res.status == "feasible" else EXIT_INFEASIBLE


def cmd_cegis(args, sc, out):
    cp = sc.contract_problem(horizon=args.horizon)
    if args.eps is not None:
        cp.eps = args.eps
    if args.rho_min is not None:
        cp.rho_min = args.rho_min
    if args.max_cegis is not None:
        cp.max_iter = args.max_cegis
    weights = _load_weights_arg(args, sc)
    mode = args.mode or "predicate"
    res = diagnose_repair_adversarial(cp, weights=weights, mode=mode,
                                      slack_mode=sc.slack_mode)
    lines = ["status: %s" % res.status]
    if res.status == "realizable":
        lines.append("the contract is realizable as written")
    if res.box_branch is not None:
        lo, hi = res.box_branch["box"]
        lines.append("disturbance box pruned to [%r, %r] in %d rounds "
                     "(total shrink %r)" % (lo, hi,
                                            res.box_branch["prunings"],
                                            res.box_branch["cost"]))
    if res.contract_branch is not None:
        lines.append("contract repair (weighted slack norm %r):"
                     % res.contract_branch["cost"])
        lines.append("  %s" % res.contract_branch["repaired"])
        lines.append("  adversarial verdict: %s"
                     % res.contract_branch["adversarial_status"])
    if res.chosen is not None:
        lines.append("chosen repair: %s" % res.chosen)
    text = "\n".join(lines) + "\n"
    print(text, end="")
    _write(out, "report.txt", text)
    _write(out, "report.json", res.to_json())
    if out is not None and res.controller is not None:
        u = np.asarray(res.controller, dtype=float)
        repaired = res.repaired if res.repaired is not None else cp
        w, _rho = worst_disturbance(repaired, u)
        if w is not None:
            tr = cp.model.simulate(cp.x0, u, w)
            tr.to_csv(os.path.join(out, "trace.csv"))
    return EXIT_OK if res.status == "realizable" else EXIT_INFEASIBLE


COMMANDS = {
    "monitor": cmd_monitor,
    "synth": cmd_synth,
    "mpc": cmd_mpc,
    "diagnose": cmd_diagnose,
    "repair": cmd_repair,
    "cegis": cmd_cegis,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
    except ScenarioError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_ERROR
    if args.command == "cegis" and sc.mode != "adversarial":
        print("error: scenario '%s' is not adversarial" % sc.name,
              file=sys.stderr)
        return EXIT_ERROR
    out = _outdir(args)
    try:
        return COMMANDS[args.command](args, sc, out)
    except (OSError, ValueError, RepairError, AssertionError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_ERROR


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
