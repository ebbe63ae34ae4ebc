# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled integration kernels (Dormand-Prince 5(4) with variational block).

Mirrors twistfp._kernels_py exactly; see that module for the reference
description of the algorithm and the backend contract.
"""

from libc.math cimport sin, cos, sqrt, fabs, pow, fmax, fmin

import numpy as np

BACKEND = "cython"

FIELD_PENDULUM = 0
FIELD_HAMTWIST = 1

cdef double TWO_PI = 6.283185307179586476925286766559
cdef double PI = 3.1415926535897932384626433832795

cdef double C2 = 1.0/5.0, C3 = 3.0/10.0, C4 = 4.0/5.0, C5 = 8.0/9.0
cdef double A21 = 1.0/5.0
cdef double A31 = 3.0/40.0, A32 = 9.0/40.0
cdef double A41 = 44.0/45.0, A42 = -56.0/15.0, A43 = 32.0/9.0
cdef double A51 = 19372.0/6561.0, A52 = -25360.0/2187.0, A53 = 64448.0/6561.0, A54 = -212.0/729.0
cdef double A61 = 9017.0/3168.0, A62 = -355.0/33.0, A63 = 46732.0/5247.0
cdef double A64 = 49.0/176.0, A65 = -5103.0/18656.0
cdef double B1 = 35.0/384.0, B3 = 500.0/1113.0, B4 = 125.0/192.0
cdef double B5 = -2187.0/6784.0, B6 = 11.0/84.0
cdef double E1 = 71.0/57600.0, E3 = -71.0/16695.0, E4 = 71.0/1920.0
cdef double E5 = -17253.0/339200.0, E6 = 22.0/525.0, E7 = -1.0/40.0

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 5.0
cdef double MIN_STEP = 1e-12
cdef long MAX_STEPS = 1000000


cdef inline void field_eval(int field, double param, double t, double* s,
                            double* out, int ndim) noexcept nogil:
    cdef double x = s[0]
    cdef double y = s[1]
    cdef double fx, fy, c, sn, a11, a12, a21, a22
    if field == 0:
        fx = y
        fy = -sin(x) + param * cos(t)
        if ndim == 6:
            a21 = -cos(x)
            out[2] = s[4]
            out[3] = s[5]
            out[4] = a21 * s[2]
            out[5] = a21 * s[3]
    else:
        c = cos(TWO_PI * x)
        sn = sin(TWO_PI * x)
        fx = y - 0.5 + param * c * (1.0 - 2.0 * y)
        fy = TWO_PI * param * sn * y * (1.0 - y)
        if ndim == 6:
            a11 = -TWO_PI * param * sn * (1.0 - 2.0 * y)
            a12 = 1.0 - 2.0 * param * c
            a21 = 4.0 * PI * PI * param * c * y * (1.0 - y)
            a22 = TWO_PI * param * sn * (1.0 - 2.0 * y)
            out[2] = a11 * s[2] + a12 * s[4]
            out[3] = a11 * s[3] + a12 * s[5]
            out[4] = a21 * s[2] + a22 * s[4]
            out[5] = a21 * s[3] + a22 * s[5]
    out[0] = fx
    out[1] = fy


cdef inline double initial_step(int field, double param, double t0, double direction,
                                double* s, double* f0, double rtol, double atol,
                                int ndim, double t_span) noexcept nogil:
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, sc, h0, h1, dm
    cdef double s1[6]
    cdef double f1[6]
    cdef int i
    for i in range(ndim):
        sc = atol + rtol * fabs(s[i])
        d0 = fmax(d0, fabs(s[i]) / sc)
        d1 = fmax(d1, fabs(f0[i]) / sc)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = fmin(h0, t_span)
    for i in range(ndim):
        s1[i] = s[i] + direction * h0 * f0[i]
    field_eval(field, param, t0 + direction * h0, s1, f1, ndim)
    for i in range(ndim):
        sc = atol + rtol * fabs(s[i])
        d2 = fmax(d2, fabs(f1[i] - f0[i]) / sc)
    d2 /= h0
    dm = fmax(d1, d2)
    if dm <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / dm, 0.2)
    return fmin(fmin(100.0 * h0, h1), t_span)


cdef int flow_core(int field, double param, double t0, double t1,
                   double* s, double rtol, double atol, int ndim,
                   long* steps_out, double* err_out) noexcept nogil:
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double k5[6]
    cdef double k6[6]
    cdef double k7[6]
    cdef double stage[6]
    cdef double s_new[6]
    cdef double t, h, hd, err, raw, e, sc, fac, err_prev, direction, t_span, est_error
    cdef long steps = 0
    cdef int i

    steps_out[0] = 0
    err_out[0] = 0.0
    if t1 == t0:
        return 0
    direction = 1.0 if t1 > t0 else -1.0
    t_span = fabs(t1 - t0)
    t = t0
    field_eval(field, param, t, s, k1, ndim)
    h = initial_step(field, param, t0, direction, s, k1, rtol, atol, ndim, t_span)
    err_prev = 1e-4
    est_error = 0.0

    while (t1 - t) * direction > 0.0:
        if h < MIN_STEP:
            return 1
        if (t + direction * h - t1) * direction > 0.0:
            h = fabs(t1 - t)
        hd = direction * h

        for i in range(ndim):
            stage[i] = s[i] + hd * (A21 * k1[i])
        field_eval(field, param, t + C2 * hd, stage, k2, ndim)
        for i in range(ndim):
            stage[i] = s[i] + hd * (A31 * k1[i] + A32 * k2[i])
        field_eval(field, param, t + C3 * hd, stage, k3, ndim)
        for i in range(ndim):
            stage[i] = s[i] + hd * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        field_eval(field, param, t + C4 * hd, stage, k4, ndim)
        for i in range(ndim):
            stage[i] = s[i] + hd * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        field_eval(field, param, t + C5 * hd, stage, k5, ndim)
        for i in range(ndim):
            stage[i] = s[i] + hd * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        field_eval(field, param, t + hd, stage, k6, ndim)
        for i in range(ndim):
            s_new[i] = s[i] + hd * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        field_eval(field, param, t + hd, s_new, k7, ndim)

        err = 0.0
        raw = 0.0
        for i in range(ndim):
            e = hd * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * fmax(fabs(s[i]), fabs(s_new[i]))
            err += (e / sc) * (e / sc)
            raw += e * e
        err = sqrt(err / ndim)

        if err <= 1.0:
            t += hd
            for i in range(ndim):
                s[i] = s_new[i]
                k1[i] = k7[i]
            steps += 1
            est_error += sqrt(raw / ndim)
            if steps > MAX_STEPS:
                return 2
            if err > 0.0:
                fac = SAFETY * pow(err, -0.14) * pow(err_prev, 0.08)
            else:
                fac = MAX_FACTOR
            h *= fmin(MAX_FACTOR, fmax(MIN_FACTOR, fac))
            err_prev = fmax(err, 1e-4)
        else:
            h *= fmax(MIN_FACTOR, SAFETY * pow(err, -0.2))

    steps_out[0] = steps
    err_out[0] = est_error
    return 0


def flow(int field, double param, double t0, double t1, double x, double y,
         double rtol, double atol, bint variational):
    """Integrate one trajectory from t0 to t1 (t1 < t0 flows backward).

    Returns (x, y, j11, j12, j21, j22, steps, est_error). When
    ``variational`` is false the j-block is the identity.
    """
    cdef double s[6]
    cdef long steps = 0
    cdef double est = 0.0
    cdef int ndim = 6 if variational else 2
    cdef int rc
    s[0] = x; s[1] = y
    s[2] = 1.0; s[3] = 0.0; s[4] = 0.0; s[5] = 1.0
    rc = flow_core(field, param, t0, t1, s, rtol, atol, ndim, &steps, &est)
    if rc == 1:
        raise RuntimeError("step size underflow")
    if rc == 2:
        raise RuntimeError("step budget exceeded")
    return (s[0], s[1], s[2], s[3], s[4], s[5], steps, est)


def flow_batch(int field, double param, double t0, double t1,
               xs, ys, double rtol, double atol):
    """Integrate many trajectories (no variational block)."""
    cdef double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    out_x = np.empty(n)
    out_y = np.empty(n)
    cdef double[::1] ox = out_x
    cdef double[::1] oy = out_y
    cdef double s[6]
    cdef long steps = 0
    cdef double est = 0.0
    cdef Py_ssize_t i
    cdef int rc = 0
    with nogil:
        for i in range(n):
            s[0] = xv[i]; s[1] = yv[i]
            s[2] = 1.0; s[3] = 0.0; s[4] = 0.0; s[5] = 1.0
            rc = flow_core(field, param, t0, t1, s, rtol, atol, 2, &steps, &est)
            if rc != 0:
                break
            ox[i] = s[0]
            oy[i] = s[1]
    if rc == 1:
        raise RuntimeError("step size underflow")
    if rc == 2:
        raise RuntimeError("step budget exceeded")
    return out_x, out_y
