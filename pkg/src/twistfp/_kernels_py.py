"""Pure-Python fallback for the integration kernels.

Implements exactly the same Dormand-Prince 5(4) scheme, PI step controller
and variational augmentation as the compiled ``twistfp._kernels`` extension,
in the same arithmetic order, so results of the two backends agree to
rounding noise. This module is the import-time fallback when the extension
is missing; it is one to two orders of magnitude slower.
"""

import math

import numpy as np

BACKEND = "python"

FIELD_PENDULUM = 0
FIELD_HAMTWIST = 1

_TWO_PI = 2.0 * math.pi

# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# b5 - b4 rows (error estimator), e2 = 0
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_MIN_STEP = 1e-12
_MAX_STEPS = 1_000_000


def _field(field, param, t, s, out, ndim):
    """Evaluate the vector field (plus variational block when ndim == 6)."""
    x = s[0]
    y = s[1]
    if field == FIELD_PENDULUM:
        fx = y
        fy = -math.sin(x) + param * math.cos(t)
        if ndim == 6:
            a21 = -math.cos(x)
            out[2] = s[4]
            out[3] = s[5]
            out[4] = a21 * s[2]
            out[5] = a21 * s[3]
    else:
        c = math.cos(_TWO_PI * x)
        sn = math.sin(_TWO_PI * x)
        fx = y - 0.5 + param * c * (1.0 - 2.0 * y)
        fy = _TWO_PI * param * sn * y * (1.0 - y)
        if ndim == 6:
            a11 = -_TWO_PI * param * sn * (1.0 - 2.0 * y)
            a12 = 1.0 - 2.0 * param * c
            a21 = 4.0 * math.pi * math.pi * param * c * y * (1.0 - y)
            a22 = _TWO_PI * param * sn * (1.0 - 2.0 * y)
            out[2] = a11 * s[2] + a12 * s[4]
            out[3] = a11 * s[3] + a12 * s[5]
            out[4] = a21 * s[2] + a22 * s[4]
            out[5] = a21 * s[3] + a22 * s[5]
    out[0] = fx
    out[1] = fy


def _initial_step(field, param, t0, direction, s, f0, rtol, atol, ndim, t_span):
    d0 = 0.0
    d1 = 0.0
    for i in range(ndim):
        sc = atol + rtol * abs(s[i])
        d0 = max(d0, abs(s[i]) / sc)
        d1 = max(d1, abs(f0[i]) / sc)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, t_span)
    s1 = [s[i] + direction * h0 * f0[i] for i in range(ndim)]
    f1 = [0.0] * 6
    _field(field, param, t0 + direction * h0, s1, f1, ndim)
    d2 = 0.0
    for i in range(ndim):
        sc = atol + rtol * abs(s[i])
        d2 = max(d2, abs(f1[i] - f0[i]) / sc)
    d2 /= h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    return min(100.0 * h0, h1, t_span)


def flow(field, param, t0, t1, x, y, rtol, atol, variational):
    """Integrate one trajectory from t0 to t1 (t1 < t0 flows backward).

    Returns (x, y, j11, j12, j21, j22, steps, est_error). When
    ``variational`` is false the j-block is the identity.
    """
    ndim = 6 if variational else 2
    s = [x, y, 1.0, 0.0, 0.0, 1.0]
    if t1 == t0:
        return (x, y, 1.0, 0.0, 0.0, 1.0, 0, 0.0)
    direction = 1.0 if t1 > t0 else -1.0
    t_span = abs(t1 - t0)

    k1 = [0.0] * 6
    k2 = [0.0] * 6
    k3 = [0.0] * 6
    k4 = [0.0] * 6
    k5 = [0.0] * 6
    k6 = [0.0] * 6
    k7 = [0.0] * 6
    stage = [0.0] * 6
    s_new = [0.0] * 6

    t = t0
    _field(field, param, t, s, k1, ndim)
    h = _initial_step(field, param, t0, direction, s, k1, rtol, atol, ndim, t_span)
    err_prev = 1e-4
    steps = 0
    est_error = 0.0

    while (t1 - t) * direction > 0.0:
        if h < _MIN_STEP:
            raise RuntimeError("step size underflow at t=%.6g" % t)
        if (t + direction * h - t1) * direction > 0.0:
            h = abs(t1 - t)
        hd = direction * h

        for i in range(ndim):
            stage[i] = s[i] + hd * (_A21 * k1[i])
        _field(field, param, t + _C2 * hd, stage, k2, ndim)
        for i in range(ndim):
            stage[i] = s[i] + hd * (_A31 * k1[i] + _A32 * k2[i])
        _field(field, param, t + _C3 * hd, stage, k3, ndim)
        for i in range(ndim):
            stage[i] = s[i] + hd * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _field(field, param, t + _C4 * hd, stage, k4, ndim)
        for i in range(ndim):
            stage[i] = s[i] + hd * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        _field(field, param, t + _C5 * hd, stage, k5, ndim)
        for i in range(ndim):
            stage[i] = s[i] + hd * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        _field(field, param, t + hd, stage, k6, ndim)
        for i in range(ndim):
            s_new[i] = s[i] + hd * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        _field(field, param, t + hd, s_new, k7, ndim)

        err = 0.0
        raw = 0.0
        for i in range(ndim):
            e = hd * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            )
            sc = atol + rtol * max(abs(s[i]), abs(s_new[i]))
            err += (e / sc) * (e / sc)
            raw += e * e
        err = math.sqrt(err / ndim)

        if err <= 1.0:
            t += hd
            for i in range(ndim):
                s[i] = s_new[i]
                k1[i] = k7[i]
            steps += 1
            est_error += math.sqrt(raw / ndim)
            if steps > _MAX_STEPS:
                raise RuntimeError("step budget exceeded")
            fac = _SAFETY * (err ** -0.14) * (err_prev ** 0.08) if err > 0.0 else _MAX_FACTOR
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, fac))
            err_prev = max(err, 1e-4)
        else:
            h *= max(_MIN_FACTOR, _SAFETY * (err ** -0.2))

    return (s[0], s[1], s[2], s[3], s[4], s[5], steps, est_error)


def flow_batch(field, param, t0, t1, xs, ys, rtol, atol):
    """Integrate many trajectories (no variational block).

    Returns (xs1, ys1) as float64 arrays.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    n = xs.shape[0]
    out_x = np.empty(n)
    out_y = np.empty(n)
    for i in range(n):
        r = flow(field, param, t0, t1, float(xs[i]), float(ys[i]), rtol, atol, False)
        out_x[i] = r[0]
        out_y[i] = r[1]
    return out_x, out_y
