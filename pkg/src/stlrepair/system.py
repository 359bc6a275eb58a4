"""Discrete-time affine system models.

A SystemModel describes the update

    x[k+1] = A x[k] + B u[k] + E w[k] + c
    y[k]   = C x[k] + D u[k] + F w[k] + d

over named state (x), input (u), disturbance (w) and output (y) variables,
sampled every delta_t seconds.  Variables carry box bounds (used both as hard
constraints and to certify big-M values) and a kind, so binary-valued inputs
or disturbances such as switch commands can be modeled as 0/1 integers.
"""

import numpy as np

from .stl.semantics import Trace

CONTINUOUS = "continuous"
BINARY = "binary"


def _mat(m, rows, cols):
    if m is None:
        return np.zeros((rows, cols))
    a = np.asarray(m, dtype=float)
    a = a.reshape((rows, cols)) if a.size else np.zeros((rows, cols))
    assert a.shape == (rows, cols), "expected shape %s, got %s" % ((rows, cols), a.shape)
    return a


def _vec(v, n):
    if v is None:
        return np.zeros(n)
    a = np.asarray(v, dtype=float).reshape(n)
    return a


class SystemModel:
    def __init__(self, states, inputs, disturbances=(), outputs=(),
                 A=None, B=None, E=None, c=None,
                 C=None, D=None, F=None, d=None,
                 delta_t=1.0, x0=None, bounds=None, kinds=None):
        self.states = list(states)
        self.inputs = list(inputs)
        self.disturbances = list(disturbances)
        self.outputs = list(outputs)
        nx, nu, nw, ny = map(len, (self.states, self.inputs,
                                   self.disturbances, self.outputs))
        names = self.states + self.inputs + self.disturbances + self.outputs
        assert len(set(names)) == len(names), "variable names must be unique"
        self.A = _mat(A, nx, nx)
        self.B = _mat(B, nx, nu)
        self.E = _mat(E, nx, nw)
        self.c = _vec(c, nx)
        self.C = _mat(C, ny, nx)
        self.D = _mat(D, ny, nu)
        self.F = _mat(F, ny, nw)
        self.d = _vec(d, ny)
        assert delta_t > 0
        self.delta_t = float(delta_t)
        self.x0 = _vec(x0, nx)
        self.bounds = dict(bounds or {})
        self.kinds = dict(kinds or {})
        for v in names:
            self.bounds.setdefault(v, (-1e3, 1e3))
            self.kinds.setdefault(v, CONTINUOUS)

    def variables(self):
        return self.states + self.inputs + self.disturbances + self.outputs

    def step(self, x, u, w=()):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float).reshape(len(self.inputs))
        w = np.asarray(w, dtype=float).reshape(len(self.disturbances))
        return self.A @ x + self.B @ u + self.E @ w + self.c

    def output(self, x, u, w=()):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float).reshape(len(self.inputs))
        w = np.asarray(w, dtype=float).reshape(len(self.disturbances))
        return self.C @ x + self.D @ u + self.F @ w + self.d

    def simulate(self, x0, u_seq, w_seq=None):
        """Roll the model forward; returns a Trace over all variables.

        @param u_seq: array (H, nu) of inputs; the trace has H steps
        @param w_seq: array (H, nw) of disturbances, or None when nw == 0
        """
        u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
        H = u_seq.shape[0]
        if w_seq is None:
            w_seq = np.zeros((H, len(self.disturbances)))
        w_seq = np.asarray(w_seq, dtype=float).reshape(H, len(self.disturbances))
        xs = np.zeros((H, len(self.states)))
        ys = np.zeros((H, len(self.outputs)))
        x = _vec(x0, len(self.states))
        for k in range(H):
            xs[k] = x
            ys[k] = self.output(x, u_seq[k], w_seq[k])
            x = self.step(x, u_seq[k], w_seq[k])
        data = {}
        for i, v in enumerate(self.states):
            data[v] = xs[:, i]
        for i, v in enumerate(self.inputs):
            data[v] = u_seq[:, i]
        for i, v in enumerate(self.disturbances):
            data[v] = w_seq[:, i]
        for i, v in enumerate(self.outputs):
            data[v] = ys[:, i]
        return Trace(data, self.delta_t)


def linearize(f, x0, u0, w0, delta_t, states, inputs, disturbances=(),
              h=1e-5, **kw):
    """Affine model matching a black-box update map around an operating point.

    Jacobians are taken by central finite differences with step h; the affine
    term is chosen so the model reproduces f exactly at (x0, u0, w0).

    @param f: callable (x, u, w) -> next state
    """
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    w0 = np.asarray(w0, dtype=float)

    def jac(point_index, base):
        cols = []
        for i in range(len(base)):
            hi = base.copy()
            lo = base.copy()
            hi[i] += h
            lo[i] -= h
            args_hi = [x0, u0, w0]
            args_lo = [x0, u0, w0]
            args_hi[point_index] = hi
            args_lo[point_index] = lo
            cols.append((np.asarray(f(*args_hi)) - np.asarray(f(*args_lo))) / (2 * h))
        if not cols:
            return np.zeros((len(x0), 0))
        return np.stack(cols, axis=1)

    A = jac(0, x0)
    B = jac(1, u0)
    E = jac(2, w0)
    c = np.asarray(f(x0, u0, w0)) - A @ x0 - B @ u0 - E @ w0
    return SystemModel(states, inputs, disturbances,
                       A=A, B=B, E=E, c=c, delta_t=delta_t, x0=x0, **kw)


def euler(cont_f, delta_t):
    """Turn a continuous-time vector field into a forward-Euler update map."""
    def f(x, u, w):
        return np.asarray(x) + delta_t * np.asarray(cont_f(x, u, w))
    return f
