"""The forced pendulum x'' + sin x = a cos t and its period map.

The reduced field on the (x, y) plane is x' = y, y' = -sin x + a cos t; the
period map P is the time-2pi flow from t = 0. Flows carry the monodromy
matrix integrated from the variational equations J' = A(t) J with
A = [[0, 1], [-cos x(t), 0]], which is what Newton shooting consumes.
The field is divergence-free, so det(monodromy) = 1 up to integrator error.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import StepFailure

PERIOD = 2.0 * math.pi


@dataclass(frozen=True)
class PendulumParams:
    """Forcing amplitude a >= 0 (dimensionless)."""

    a: float = 0.0

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("forcing amplitude must be >= 0")


@dataclass
class FlowResult:
    endpoint: tuple
    monodromy: np.ndarray
    steps_taken: int
    est_error: float


@dataclass
class Orbit:
    seed: tuple
    iterates: list
    params: PendulumParams


def pendulum_field(t, p, params):
    """Right-hand side (x', y') = (y, -sin x + a cos t)."""
    x, y = p
    return y, -math.sin(x) + params.a * math.cos(t)


def lyapunov(p):
    """V(x, y) = y^2/2 - cos x, conserved by the unforced flow."""
    return 0.5 * p[1] * p[1] - math.cos(p[0])


def flow(p, t0, t1, params, tol=1e-10, variational=True):
    """Flow a plane point from t0 to t1 with local error control at tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    try:
        r = _backend.flow(_backend.FIELD_PENDULUM, params.a, t0, t1,
                          p[0], p[1], tol, tol, variational)
    except RuntimeError as exc:
        raise StepFailure(str(exc)) from exc
    mon = np.array([[r[2], r[3]], [r[4], r[5]]]) if variational else None
    return FlowResult(endpoint=(r[0], r[1]), monodromy=mon,
                      steps_taken=r[6], est_error=r[7])


def period_map(p, params, tol=1e-10, variational=True):
    """One application of P = time-2pi flow from t = 0."""
    return flow(p, 0.0, PERIOD, params, tol, variational)


def period_map_batch(xs, ys, params, n=1, tol=1e-10):
    """P^n applied to arrays of plane points (no monodromy)."""
    xs = np.asarray(xs, float).copy()
    ys = np.asarray(ys, float).copy()
    for _ in range(n):
        xs, ys = _backend.flow_batch(_backend.FIELD_PENDULUM, params.a,
                                     0.0, PERIOD, xs, ys, tol, tol)
    return xs, ys


def iterate_orbit(seed, n, params, tol=1e-10):
    """n successive period-map images of a seed."""
    if n < 1:
        raise ValueError("need n >= 1")
    pts = []
    p = (float(seed[0]), float(seed[1]))
    for _ in range(n):
        p = period_map(p, params, tol, variational=False).endpoint
        pts.append(p)
    return Orbit(seed=(float(seed[0]), float(seed[1])), iterates=pts, params=params)


def flow_trace(p, t0, t1, params, n_samples=200, tol=1e-10):
    """Sample a trajectory at n_samples+1 equispaced times; rows (t, x, y)."""
    ts = np.linspace(t0, t1, n_samples + 1)
    out = np.empty((len(ts), 3))
    out[0] = (ts[0], p[0], p[1])
    cur = (float(p[0]), float(p[1]))
    for i in range(1, len(ts)):
        cur = flow(cur, ts[i - 1], ts[i], params, tol, variational=False).endpoint
        out[i] = (ts[i], cur[0], cur[1])
    return out
