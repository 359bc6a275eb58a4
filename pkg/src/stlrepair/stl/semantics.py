"""Quantitative and Boolean monitoring of formulas over sampled traces."""

import csv
import math

import numpy as np

from .ast import (
    ALWAYS, AND, EVENTUALLY, IMPLIES, NOT, OR, PRED, UNTIL,
)


class Trace:
    """A finite sampled run: per-variable arrays over steps 0..length-1.

    @param data: dict mapping variable name -> array-like of samples
    @param delta_t: sampling period in seconds
    """

    def __init__(self, data, delta_t):
        assert delta_t > 0.0
        self.delta_t = float(delta_t)
        self.data = {v: np.asarray(vals, dtype=float) for v, vals in data.items()}
        lengths = {len(a) for a in self.data.values()}
        assert len(lengths) == 1, "all variables need the same number of samples"
        self.length = lengths.pop()

    def at(self, k):
        """Variable assignment at step k."""
        return {v: a[k] for v, a in self.data.items()}

    def variables(self):
        return set(self.data)

    def to_csv(self, path):
        names = sorted(self.data)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + names)
            for k in range(self.length):
                w.writerow([repr(float(k * self.delta_t))] +
                           [repr(float(self.data[v][k])) for v in names])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows and rows[0][0] == "time", "expected a 'time' header column"
        names = rows[0][1:]
        body = [[float(x) for x in r] for r in rows[1:] if r]
        assert len(body) >= 2, "need at least two samples to infer the period"
        dt = body[1][0] - body[0][0]
        data = {n: [r[i + 1] for r in body] for i, n in enumerate(names)}
        return cls(data, dt)


def window_steps(interval, t, delta_t, length, truncate=False):
    """Discretize a time interval anchored at step t into a list of steps.

    The window covers steps t + ceil(lower/dt) .. t + floor(upper/dt); an
    unbounded upper endpoint extends to the last step.  With truncate=True the
    window is clipped to the trace; otherwise a window that leaves the trace
    raises ValueError.
    """
    eps = 1e-9
    lo = t + int(math.ceil(interval.lower / delta_t - eps))
    if interval.unbounded:
        hi = length - 1
    else:
        hi = t + int(math.floor(interval.upper / delta_t + eps))
    if lo > hi and not interval.unbounded:
        raise ValueError(
            "window [%s] contains no sample points at period %s"
            % (interval.pretty(), delta_t))
    if truncate:
        # clipping may empty the window entirely; callers treat that as a
        # vacuous G / unreachable F
        hi = min(hi, length - 1)
        return list(range(lo, hi + 1)) if lo <= hi else []
    if hi >= length or lo < 0:
        raise ValueError(
            "window [%s] at step %d leaves the trace of length %d"
            % (interval.pretty(), t, length))
    return list(range(lo, hi + 1))


def robustness(f, trace, t=0, truncate=False):
    """Quantitative satisfaction margin of f over the trace, anchored at step t.

    Positive values mean the formula holds.  With truncate=True, temporal
    windows reaching past the end of the trace are clipped instead of raising,
    which matches the encoder's treatment of unbounded operators.
    """
    k = f.kind
    if k == PRED:
        v = f.pred.value(trace.at(t))
        return -v if f.negated else v
    if k == NOT:
        return -robustness(f.children[0], trace, t, truncate)
    if k == AND:
        return min(robustness(c, trace, t, truncate) for c in f.children)
    if k == OR:
        return max(robustness(c, trace, t, truncate) for c in f.children)
    if k == IMPLIES:
        a, b = f.children
        return max(-robustness(a, trace, t, truncate),
                   robustness(b, trace, t, truncate))
    if k == ALWAYS:
        steps = window_steps(f.interval, t, trace.delta_t, trace.length, truncate)
        return min((robustness(f.children[0], trace, s, truncate) for s in steps),
                   default=math.inf)
    if k == EVENTUALLY:
        steps = window_steps(f.interval, t, trace.delta_t, trace.length, truncate)
        return max((robustness(f.children[0], trace, s, truncate) for s in steps),
                   default=-math.inf)
    assert k == UNTIL
    a, b = f.children
    iv = f.interval
    if iv is None:
        steps = list(range(t, trace.length))
    else:
        steps = window_steps(iv, t, trace.delta_t, trace.length, truncate)
    best = -math.inf
    for tp in steps:
        right = robustness(b, trace, tp, truncate)
        hold = min([robustness(a, trace, s, truncate) for s in range(t, tp + 1)]
                   or [math.inf])
        best = max(best, min(right, hold))
    return best


def satisfies(f, trace, t=0, truncate=False):
    """Boolean satisfaction of f, evaluated by direct recursion.

    Predicates are strict (margin > 0), so this agrees with the sign of
    robustness whenever the margin is nonzero.
    """
    k = f.kind
    if k == PRED:
        v = f.pred.value(trace.at(t))
        return v < 0 if f.negated else v > 0
    if k == NOT:
        return not satisfies(f.children[0], trace, t, truncate)
    if k == AND:
        return all(satisfies(c, trace, t, truncate) for c in f.children)
    if k == OR:
        return any(satisfies(c, trace, t, truncate) for c in f.children)
    if k == IMPLIES:
        a, b = f.children
        return (not satisfies(a, trace, t, truncate)) or satisfies(b, trace, t, truncate)
    if k == ALWAYS:
        steps = window_steps(f.interval, t, trace.delta_t, trace.length, truncate)
        return all(satisfies(f.children[0], trace, s, truncate) for s in steps)
    if k == EVENTUALLY:
        steps = window_steps(f.interval, t, trace.delta_t, trace.length, truncate)
        return any(satisfies(f.children[0], trace, s, truncate) for s in steps)
    assert k == UNTIL
    a, b = f.children
    iv = f.interval
    if iv is None:
        steps = list(range(t, trace.length))
    else:
        steps = window_steps(iv, t, trace.delta_t, trace.length, truncate)
    for tp in steps:
        if satisfies(b, trace, tp, truncate) and \
                all(satisfies(a, trace, s, truncate) for s in range(t, tp + 1)):
            return True
    return False


def support(f, node_id, length, delta_t):
    """The set of steps at which the given node is evaluated.

    This is the union, over all evaluation times of the node reachable from
    the root anchored at step 0, of the node's own anchor steps.  Windows are
    truncated at the end of the trace.
    """
    found = []

    def visit(n, times):
        if n.node_id == node_id:
            found.append(set(times))
        k = n.kind
        if k == PRED:
            return
        if k in (ALWAYS, EVENTUALLY):
            child_times = set()
            for t in times:
                child_times |= set(window_steps(n.interval, t, delta_t, length,
                                                truncate=True))
            visit(n.children[0], child_times)
            return
        if k == UNTIL:
            a, b = n.children
            right, left = set(), set()
            for t in times:
                if n.interval is None:
                    w = list(range(t, length))
                else:
                    w = window_steps(n.interval, t, delta_t, length, truncate=True)
                if not w:
                    continue
                right |= set(w)
                left |= set(range(t, max(w) + 1))
            visit(a, left)
            visit(b, right)
            return
        for c in n.children:
            visit(c, set(times))

    visit(f, {0})
    if not found:
        raise KeyError("no node with id %r" % node_id)
    out = set()
    for s in found:
        out |= s
    return out
