"""Scenario files: a JSON description of a system, its specification, solver
settings and repair weights, plus the builtin scenario library.

A scenario bundles everything one of the toolkit commands needs: the affine
system block, either a monolithic formula or an assumption/guarantee contract,
an optional disturbance description (a fixed sequence or an adversarial box),
solver settings, and named weight profiles steering which predicates a repair
may touch.  See docs/scenario.md for the schema.
"""

import importlib.resources
import json
import os

import numpy as np

from .cegis import ContractProblem
from .repair import contract_weights
from .stl import Interval, apply_interval_repair, apply_predicate_repair, parse
from .stl.ast import ALWAYS, EVENTUALLY, implies
from .synthesis import SynthesisProblem
from .system import SystemModel


class ScenarioError(ValueError):
    """Schema violation; the message names the offending field path."""


def _fail(path, msg):
    raise ScenarioError("%s: %s" % (path, msg))


def _get(doc, path, key, kind=None, required=True, default=None):
    here = "%s.%s" % (path, key) if path else key
    if key not in doc:
        if required:
            _fail(here, "missing required field")
        return default
    val = doc[key]
    if kind is not None and not isinstance(val, kind):
        want = kind[0] if isinstance(kind, tuple) else kind
        _fail(here, "expected %s, got %s" % (want.__name__,
                                             type(val).__name__))
    return val

_NUM = (float, int)


def _parse_formula(text, path):
    try:
        return parse(text)
    except Exception as e:
        _fail(path, "formula does not parse: %s" % e)


class Scenario:
    """A validated scenario document.

    Formulas are parsed once at load time, so node identities are stable:
    the same Scenario object hands out consistent weights, specs and
    candidate repairs.
    """

    def __init__(self, doc, name=None):
        path = ""
        self.name = doc.get("name", name or "scenario")
        self.description = doc.get("description", "")
        self.mode = _get(doc, path, "mode", str, required=False,
                         default="predicate")
        if self.mode not in ("predicate", "interval", "adversarial"):
            _fail("mode", "must be predicate, interval or adversarial")
        self.slack_mode = _get(doc, path, "slack_mode", str, required=False,
                               default="per_time")
        if self.slack_mode not in ("per_time", "shared"):
            _fail("slack_mode", "must be per_time or shared")

        self.model = self._load_system(_get(doc, path, "system", dict))
        self._load_spec(_get(doc, path, "spec", dict))
        self._load_disturbance(doc.get("disturbance", {}))
        self._load_solver(doc.get("solver", {}))
        self._load_weights(doc.get("weights", {}))
        self._load_candidate_repairs(doc.get("candidate_repairs", []))

    # -- blocks ------------------------------------------------------------

    def _load_system(self, sys_doc):
        p = "system"
        states = _get(sys_doc, p, "states", list)
        inputs = _get(sys_doc, p, "inputs", list)
        disturbances = _get(sys_doc, p, "disturbances", list, required=False,
                            default=[])
        outputs = _get(sys_doc, p, "outputs", list, required=False,
                       default=[])
        delta_t = _get(sys_doc, p, "delta_t", _NUM)
        x0 = _get(sys_doc, p, "x0", list)
        if len(x0) != len(states):
            _fail(p + ".x0", "expected %d entries, got %d"
                  % (len(states), len(x0)))
        bounds_doc = _get(sys_doc, p, "bounds", dict, required=False,
                          default={})
        names = set(states) | set(inputs) | set(disturbances) | set(outputs)
        bounds = {}
        for v, b in bounds_doc.items():
            if v not in names:
                _fail(p + ".bounds." + v, "unknown variable")
            if (not isinstance(b, list) or len(b) != 2
                    or not all(isinstance(x, _NUM) for x in b)):
                _fail(p + ".bounds." + v, "expected [lo, hi]")
            bounds[v] = (float(b[0]), float(b[1]))
        kinds = _get(sys_doc, p, "kinds", dict, required=False, default={})
        for v, k in kinds.items():
            if v not in names:
                _fail(p + ".kinds." + v, "unknown variable")
            if k not in ("continuous", "binary"):
                _fail(p + ".kinds." + v, "must be continuous or binary")
        try:
            return SystemModel(
                states, inputs, disturbances, outputs,
                A=sys_doc.get("A"), B=sys_doc.get("B"), E=sys_doc.get("E"),
                c=sys_doc.get("c"), C=sys_doc.get("C"), D=sys_doc.get("D"),
                F=sys_doc.get("F"), d=sys_doc.get("d"),
                delta_t=delta_t, x0=x0, bounds=bounds, kinds=kinds)
        except AssertionError as e:
            _fail(p, str(e))

    def _load_spec(self, spec_doc):
        p = "spec"
        has_formula = "formula" in spec_doc
        has_contract = "assumption" in spec_doc or "guarantee" in spec_doc
        if has_formula == has_contract:
            _fail(p, "give exactly one of 'formula' or "
                     "'assumption'/'guarantee'")
        if has_formula:
            self.assumption = None
            self.guarantee = _parse_formula(
                _get(spec_doc, p, "formula", str), p + ".formula")
        else:
            self.guarantee = _parse_formula(
                _get(spec_doc, p, "guarantee", str), p + ".guarantee")
            a = _get(spec_doc, p, "assumption", str, required=False)
            self.assumption = None if a is None else \
                _parse_formula(a, p + ".assumption")
        known = set(self.model.variables())
        for v in sorted(self.spec_formula().variables()):
            if v not in known:
                _fail(p, "formula references unknown variable '%s'" % v)

    def spec_formula(self):
        """The full specification: assumption -> guarantee, or the formula."""
        if self.assumption is None:
            return self.guarantee
        return implies(self.assumption, self.guarantee)

    def _load_disturbance(self, dist_doc):
        p = "disturbance"
        self.w_const = None
        self.w_box = None
        w_seq = _get(dist_doc, p, "w_seq", dict, required=False)
        w_box = _get(dist_doc, p, "w_box", dict, required=False)
        if self.mode == "adversarial" and w_seq is not None:
            _fail(p + ".w_seq", "adversarial scenarios take a w_box")
        if w_seq is not None:
            for v in w_seq:
                if v not in self.model.disturbances:
                    _fail(p + ".w_seq." + v, "unknown disturbance variable")
            missing = [v for v in self.model.disturbances if v not in w_seq]
            if missing:
                _fail(p + ".w_seq", "missing value for %s" % missing[0])
            self.w_const = {v: float(w_seq[v]) for v in w_seq}
        if w_box is not None:
            for v, b in w_box.items():
                if v not in self.model.disturbances:
                    _fail(p + ".w_box." + v, "unknown disturbance variable")
                if (not isinstance(b, list) or len(b) != 2
                        or not all(isinstance(x, _NUM) for x in b)):
                    _fail(p + ".w_box." + v, "expected [lo, hi]")
                if b[0] > b[1]:
                    _fail(p + ".w_box." + v, "lower bound above upper")
            self.w_box = {v: (float(b[0]), float(b[1]))
                          for v, b in w_box.items()}
        if self.mode == "adversarial" and not self.model.disturbances:
            _fail("system.disturbances",
                  "adversarial scenarios need a disturbance variable")

    def _load_solver(self, sol_doc):
        p = "solver"
        self.horizon = int(_get(sol_doc, p, "horizon", int, required=False,
                                default=10))
        if self.horizon < 1:
            _fail(p + ".horizon", "must be at least 1")
        self.eps_strict = float(_get(sol_doc, p, "eps_strict", _NUM,
                                     required=False, default=0.01))
        self.big_m = float(_get(sol_doc, p, "big_m", _NUM, required=False,
                                default=1e4))
        self.rho_min = float(_get(sol_doc, p, "rho_min", _NUM,
                                  required=False, default=1e-4))
        self.eps = float(_get(sol_doc, p, "eps", _NUM, required=False,
                              default=0.01))
        self.max_cegis = int(_get(sol_doc, p, "max_cegis", int,
                                  required=False, default=20))
        self.cost = _get(sol_doc, p, "cost", str, required=False,
                         default="input_l1")
        if self.cost not in ("input_l1", "zero"):
            _fail(p + ".cost", "must be input_l1 or zero")

    def _load_weights(self, w_doc):
        p = "weights"
        profiles = _get(w_doc, p, "profiles", dict, required=False)
        if profiles is None:
            self.profiles = {"default": dict(w_doc)} if w_doc else \
                {"default": {}}
            self.default_profile = "default"
        else:
            self.profiles = {k: dict(v) for k, v in profiles.items()}
            self.default_profile = _get(w_doc, p, "default", str,
                                        required=False,
                                        default=sorted(profiles)[0])
            if self.default_profile not in self.profiles:
                _fail(p + ".default", "unknown profile '%s'"
                      % self.default_profile)
        for name, prof in self.profiles.items():
            contract_keys = {"lambda_e", "lambda_s"} & set(prof)
            if contract_keys and self.assumption is None:
                _fail("%s.profiles.%s" % (p, name),
                      "lambda_e/lambda_s need an assumption/guarantee split")
            for k, v in prof.items():
                if k == "slack_mode":
                    continue
                if not isinstance(v, _NUM):
                    _fail("%s.profiles.%s.%s" % (p, name, k),
                          "expected a number")

    def weights(self, profile=None):
        """Weight table for resolve_weights, from the named profile."""
        name = profile or self.default_profile
        if name not in self.profiles:
            _fail("weights.profiles", "unknown profile '%s'" % name)
        prof = dict(self.profiles[name])
        prof.pop("slack_mode", None)
        if "lambda_e" in prof or "lambda_s" in prof:
            lam_e = prof.pop("lambda_e", 1.0)
            lam_s = prof.pop("lambda_s", 1.0)
            table = contract_weights(self.assumption, self.guarantee,
                                     lam_e, lam_s)
            table.update(prof)   # text-keyed overrides still apply
            return table
        return prof or None

    def profile_slack_mode(self, profile=None):
        name = profile or self.default_profile
        return self.profiles.get(name, {}).get("slack_mode", self.slack_mode)

    def _load_candidate_repairs(self, reps):
        p = "candidate_repairs"
        self.candidate_repairs = []
        by_text = {}
        for side in ("assumption", "guarantee"):
            f = getattr(self, side)
            if f is None:
                continue
            for n in f.predicates():
                by_text.setdefault(n.pred.pretty(), []).append((side, n))
        for i, rep in enumerate(reps):
            here = "%s[%d]" % (p, i)
            kind = _get(rep, here, "kind", str)
            if kind == "predicate":
                text = _get(rep, here, "predicate", str)
                shift = float(_get(rep, here, "shift", _NUM))
                hits = by_text.get(text, [])
                if len(hits) != 1:
                    _fail(here + ".predicate",
                          "matches %d predicates, need exactly 1" % len(hits))
                side, node = hits[0]
                self.candidate_repairs.append(
                    ("predicate", side, node.node_id, shift,
                     rep.get("label", "%s -> shift %g" % (text, shift))))
            elif kind == "interval":
                op = _get(rep, here, "operator", str)
                if op not in (ALWAYS, EVENTUALLY):
                    _fail(here + ".operator", "must be G or F")
                iv = _get(rep, here, "interval", list)
                if len(iv) != 2 or not all(isinstance(x, _NUM) for x in iv):
                    _fail(here + ".interval", "expected [lo, hi]")
                side = _get(rep, here, "side", str, required=False,
                            default="guarantee")
                f = getattr(self, side, None)
                if f is None:
                    _fail(here + ".side", "scenario has no %s" % side)
                hits = [n for n in f.walk() if n.kind == op]
                if len(hits) != 1:
                    _fail(here + ".operator",
                          "matches %d operators, need exactly 1" % len(hits))
                self.candidate_repairs.append(
                    ("interval", side, hits[0].node_id,
                     Interval(float(iv[0]), float(iv[1])),
                     rep.get("label", "%s window -> [%g,%g]"
                             % (op, iv[0], iv[1]))))
            else:
                _fail(here + ".kind", "must be predicate or interval")

    # -- problem construction ----------------------------------------------

    def w_seq(self, horizon=None):
        """Constant disturbance sequence as an (H, nw) array, or None."""
        if self.w_const is None:
            return None
        H = self.horizon if horizon is None else horizon
        row = [self.w_const[v] for v in self.model.disturbances]
        return np.tile(np.asarray(row, dtype=float), (H, 1))

    def synthesis_problem(self, horizon=None, x0=None):
        H = self.horizon if horizon is None else int(horizon)
        return SynthesisProblem(self.model, self.spec_formula(), H,
                                x0=x0, w_seq=self.w_seq(H),
                                eps_strict=self.eps_strict,
                                big_m=self.big_m, cost=self.cost)

    def contract_problem(self, horizon=None):
        assert self.mode == "adversarial", \
            "contract_problem needs an adversarial scenario"
        H = self.horizon if horizon is None else int(horizon)
        return ContractProblem(self.model, self.guarantee, self.assumption,
                               horizon=H, w_box=self.w_box,
                               eps_strict=self.eps_strict, big_m=self.big_m,
                               cost=self.cost, rho_min=self.rho_min,
                               eps=self.eps, max_iter=self.max_cegis)

    def apply_candidate_repair(self, index):
        """Contract problem with the indexed scripted repair applied."""
        kind, side, nid, arg, _label = self.candidate_repairs[index]
        assumption, guarantee = self.assumption, self.guarantee
        target = assumption if side == "assumption" else guarantee
        if kind == "predicate":
            fixed = apply_predicate_repair(target, nid, arg)
        else:
            fixed = apply_interval_repair(target, nid, arg)
        if side == "assumption":
            assumption = fixed
        else:
            guarantee = fixed
        cp = self.contract_problem()
        return cp.with_assumption(assumption).with_guarantee(guarantee)


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------

def _data_dir():
    return importlib.resources.files("stlrepair") / "data"


def builtin_scenarios():
    """Names of the scenarios shipped with the package."""
    return sorted(f.name[:-5] for f in _data_dir().iterdir()
                  if f.name.endswith(".json"))


def load_scenario(name_or_path):
    """Load a scenario from a JSON file or by builtin name."""
    if os.path.exists(name_or_path):
        with open(name_or_path) as fh:
            text = fh.read()
        name = os.path.splitext(os.path.basename(name_or_path))[0]
    else:
        res = _data_dir() / (name_or_path + ".json")
        try:
            text = res.read_text()
        except (FileNotFoundError, OSError):
            raise ScenarioError(
                "no such file, and no builtin scenario named %r "
                "(builtins: %s)" % (name_or_path,
                                    ", ".join(builtin_scenarios())))
        name = name_or_path
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("not valid JSON: %s" % e)
    if not isinstance(doc, dict):
        raise ScenarioError("top level: expected an object")
    return Scenario(doc, name=name)
