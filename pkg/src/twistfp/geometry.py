"""Small geometric primitives shared across modules.

Annulus coordinates are (x, y) with x 1-periodic in [0, 1) and y in [0, 1];
the universal cover keeps x unwrapped.
"""

import math

import numpy as np


def wrap01(x):
    """Reduce x modulo 1 into [0, 1)."""
    r = x - math.floor(x)
    if r >= 1.0:
        r -= 1.0
    return r


def wrap_half(dx):
    """Reduce a horizontal displacement to the representative in (-1/2, 1/2]."""
    r = dx - math.floor(dx + 0.5)
    if r <= -0.5:
        r += 1.0
    return r


def split_lift(xl):
    """Split a cover coordinate into (integer sheet, fractional part in [0,1))."""
    k = math.floor(xl)
    r = xl - k
    if r >= 1.0:
        r -= 1.0
        k += 1
    return k, r


def periodic_dist(p, q):
    """Euclidean distance on the annulus (x wrapped, y flat)."""
    dx = wrap_half(p[0] - q[0])
    return math.hypot(dx, p[1] - q[1])


def halton(n, skip=0):
    """First n points of the (2,3) Halton sequence in the open unit square."""
    out = np.empty((n, 2))
    for j, base in enumerate((2, 3)):
        for i in range(n):
            k = i + 1 + skip
            f = 1.0
            r = 0.0
            while k > 0:
                f /= base
                r += f * (k % base)
                k //= base
            out[i, j] = r
    return out


def halton1(i, base=2):
    """i-th element (1-indexed) of the van der Corput sequence in base `base`."""
    f = 1.0
    r = 0.0
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


def polyline_arclength(pts):
    """Cumulative arclength along a polyline given as an (n, 2) array."""
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_closed(pts, n, close_offset=0.0):
    """Resample a closed polyline to n points, uniform in arclength.

    `pts` is (m, 2) in cover coordinates with the closure edge implied; for
    annulus loops that wind, the closure target is pts[0] shifted by the
    winding, passed as close_offset.
    """
    closed = np.vstack([pts, [[pts[0, 0] + close_offset, pts[0, 1]]]])
    s = polyline_arclength(closed)
    total = s[-1]
    targets = np.linspace(0.0, total, n, endpoint=False)
    xs = np.interp(targets, s, closed[:, 0])
    ys = np.interp(targets, s, closed[:, 1])
    return np.column_stack([xs, ys])


def hausdorff_annulus(a, b):
    """Symmetric Hausdorff distance between two vertex sets on the annulus."""

    def directed(p, q):
        worst = 0.0
        for i in range(p.shape[0]):
            dx = np.abs(p[i, 0] - q[:, 0])
            dx = np.minimum(dx, 1.0 - dx)
            d = np.min(np.hypot(dx, p[i, 1] - q[:, 1]))
            worst = max(worst, d)
        return worst

    return max(directed(a, b), directed(b, a))


def segment_crossings(poly1, poly2, tol=1e-7):
    """Count transversal crossings between two open polylines.

    Intersections closer than `tol` to tangential (or to shared endpoints)
    are not counted; this is the signed-crossing oracle used by the path
    casework fixtures, returned as (crossings, signed_sum).
    """
    crossings = 0
    signed = 0
    for i in range(len(poly1) - 1):
        p, p2 = poly1[i], poly1[i + 1]
        u = (p2[0] - p[0], p2[1] - p[1])
        for j in range(len(poly2) - 1):
            q, q2 = poly2[j], poly2[j + 1]
            v = (q2[0] - q[0], q2[1] - q[1])
            denom = u[0] * v[1] - u[1] * v[0]
            scale = math.hypot(*u) * math.hypot(*v)
            if scale == 0.0 or abs(denom) <= tol * scale:
                continue  # parallel or tangential at tolerance
            w = (q[0] - p[0], q[1] - p[1])
            t = (w[0] * v[1] - w[1] * v[0]) / denom
            s = (w[0] * u[1] - w[1] * u[0]) / denom
            eps = tol / max(math.hypot(*u), 1e-300)
            eps2 = tol / max(math.hypot(*v), 1e-300)
            if eps < t < 1.0 - eps and eps2 < s < 1.0 - eps2:
                crossings += 1
                signed += 1 if denom > 0 else -1
    return crossings, signed
