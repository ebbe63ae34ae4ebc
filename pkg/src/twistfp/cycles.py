"""Periodic cycles of the pendulum period map and the band chart.

Newton shooting solves P^n(z) = z with the chained variational monodromy;
rotation numbers measure the apparent angular drift of iterates about an
elliptic fixed point; the chart turns the band between two invariant orbit
closures into standard annulus coordinates, on which the n-th power of the
period map becomes an :class:`~twistfp.maps.AnnulusMap`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CenterCollision, ChartGapError, NewtonDiverged, NotStarShaped
from .geometry import wrap_half
from .maps import INTEGRATED_BOUNDARY_TOL, AnnulusMap
from .pendulum import (PERIOD, PendulumParams, flow, iterate_orbit,
                       period_map, period_map_batch)

TRACE_CLASS_TOL = 1e-6  # |trace| within this of 2 counts as parabolic


@dataclass
class PeriodicCycle:
    period: int
    points: list
    residual: float
    trace: float
    cycle_class: str
    minimal_period: int

    def to_dict(self):
        return {
            "period": self.period,
            "points": [[p[0], p[1]] for p in self.points],
            "residual": self.residual,
            "trace": self.trace,
            "class": self.cycle_class,
            "minimal_period": self.minimal_period,
        }


@dataclass
class RotationEstimate:
    value: float
    iterates_used: int
    center: tuple
    uncertainty: float


def _classify(trace):
    if abs(trace) > 2.0 + TRACE_CLASS_TOL:
        return "saddle"
    if abs(trace) < 2.0 - TRACE_CLASS_TOL:
        return "center"
    return "parabolic"


def _pn_with_monodromy(z, n, params, tol):
    w = (z[0], z[1])
    mon = np.eye(2)
    pts = [w]
    for _ in range(n):
        r = flow(w, 0.0, PERIOD, params, tol, variational=True)
        w = r.endpoint
        mon = r.monodromy @ mon
        pts.append(w)
    return w, mon, pts


def newton_cycle(seed, n, params, tol=1e-10, conv_tol=1e-10, max_iter=50):
    """Damped Newton on G(z) = P^n(z) - z from a plane seed.

    Converges when |G| < conv_tol; raises NewtonDiverged after max_iter
    iterations, on a singular shooting matrix (|det(DP^n - I)| < 1e-12,
    the parabolic degeneracy), or when iterates leave the plane window.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    z = np.array([seed[0], seed[1]], float)
    for _ in range(max_iter):
        w, mon, _ = _pn_with_monodromy(z, n, params, tol)
        g = np.array(w) - z
        gn = float(np.hypot(*g))
        if gn < conv_tol:
            return _build_cycle(z, n, params, tol)
        dg = mon - np.eye(2)
        det = dg[0, 0] * dg[1, 1] - dg[0, 1] * dg[1, 0]
        if abs(det) < 1e-12:
            raise NewtonDiverged(f"singular shooting matrix (det {det:.2e})")
        step = np.linalg.solve(dg, -g)
        sn = float(np.hypot(*step))
        if sn > 1.0:
            step *= 1.0 / sn  # trust region: the band geometry is O(1)
        lam = 1.0
        for _ in range(8):
            trial = z + lam * step
            wt = trial.copy()
            for _ in range(n):
                wt = np.array(period_map(tuple(wt), params, tol,
                                         variational=False).endpoint)
            if float(np.hypot(*(wt - trial))) < (1.0 - 0.25 * lam) * gn:
                break
            lam *= 0.5
        z = z + lam * step
        if abs(z[1]) > 6.0 or abs(z[0]) > 50.0:
            raise NewtonDiverged("iterate left the plane window")
    raise NewtonDiverged(f"no convergence in {max_iter} iterations")


def _build_cycle(z, n, params, tol):
    w, mon, pts = _pn_with_monodromy(z, n, params, tol)
    points = [tuple(p) for p in pts[:n]]
    residual = 0.0
    for k in range(n):
        tgt = points[(k + 1) % n] if k + 1 < n else points[0]
        got = pts[k + 1]
        residual = max(residual, math.hypot(got[0] - tgt[0], got[1] - tgt[1]))
    trace = float(mon[0, 0] + mon[1, 1])
    minimal = n
    for k in range(1, n):
        if n % k == 0 and math.hypot(pts[k][0] - z[0], pts[k][1] - z[1]) < 1e-6:
            minimal = k
            break
    return PeriodicCycle(period=n, points=points, residual=residual,
                         trace=trace, cycle_class=_classify(trace),
                         minimal_period=minimal)


def same_cycle(a, b, tol=1e-6):
    """Point sets match as multisets after an optimal rotation of indices."""
    if a.period != b.period:
        return False
    pa = np.array(a.points)
    pb = np.array(b.points)
    for s in range(len(pb)):
        rolled = np.roll(pb, s, axis=0)
        if float(np.max(np.hypot(*(pa - rolled).T))) < tol:
            return True
    return False


def find_center(params, seed=(0.0, 0.0), tol=1e-10):
    """Locate the elliptic fixed point of P, wrapped to x in (-pi, pi].

    Tries a deterministic ladder of seeds; the pendulum plane is 2pi-periodic
    in x, so the Newton result is reduced before classification.
    """
    trial_seeds = [seed, (-0.9, 0.0), (0.5, 0.3), (-0.5, -0.3), (0.1, 0.0)]
    last_exc = None
    for s in trial_seeds:
        try:
            cyc = newton_cycle(s, 1, params, tol)
        except NewtonDiverged as exc:
            last_exc = exc
            continue
        x, y = cyc.points[0]
        x = math.remainder(x, 2.0 * math.pi)
        cyc2 = newton_cycle((x, y), 1, params, tol)
        if cyc2.cycle_class == "center":
            return cyc2
    raise NewtonDiverged(f"no elliptic fixed point found: {last_exc}")


def rotation_number(seed, center, n_iter, params, tol=1e-10):
    """Apparent revolutions per iterate of the orbit of `seed` about `center`.

    Consecutive iterate angles are unwrapped to the nearest representative,
    so the value measures the slow drift visible in the section. The
    uncertainty is the 1/n_iter windowing bound.
    """
    if n_iter < 60:
        raise ValueError("need n_iter >= 60")
    cx, cy = center
    z = (float(seed[0]), float(seed[1]))
    if math.hypot(z[0] - cx, z[1] - cy) < 1e-9:
        raise CenterCollision("seed coincides with the center")
    prev = math.atan2(z[1] - cy, z[0] - cx)
    total = 0.0
    for _ in range(n_iter):
        z = period_map(z, params, tol, variational=False).endpoint
        if math.hypot(z[0] - cx, z[1] - cy) < 1e-9:
            raise CenterCollision("orbit iterate landed on the center")
        th = math.atan2(z[1] - cy, z[0] - cx)
        d = th - prev
        while d <= -math.pi:
            d += 2.0 * math.pi
        while d > math.pi:
            d -= 2.0 * math.pi
        total += d
        prev = th
    value = (total / (2.0 * math.pi * n_iter)) % 1.0
    return RotationEstimate(value=value, iterates_used=n_iter,
                            center=(cx, cy), uncertainty=1.0 / n_iter)


# ---------------------------------------------------------------------------
# annulus chart over the band between two invariant orbit closures
# ---------------------------------------------------------------------------

@dataclass
class AnnulusChart:
    """Radial-linear chart between two star-shaped orbit closures.

    theta = 2 pi x, r = (1-y) r_inner(theta) + y r_outer(theta), both radius
    profiles sampled on m equispaced angles about the center fixed point.
    """

    center: tuple
    thetas: np.ndarray
    r_inner: np.ndarray
    r_outer: np.ndarray

    def _interp(self, profile, theta):
        m = len(self.thetas)
        t = np.mod(theta, 2.0 * math.pi)
        pos = t / (2.0 * math.pi) * m
        i0 = np.floor(pos).astype(int) % m
        frac = pos - np.floor(pos)
        i1 = (i0 + 1) % m
        return profile[i0] * (1.0 - frac) + profile[i1] * frac

    def radii_at(self, theta):
        return self._interp(self.r_inner, theta), self._interp(self.r_outer, theta)

    def to_plane(self, x, y):
        theta = 2.0 * math.pi * x
        ri, ro = self.radii_at(theta)
        r = (1.0 - y) * ri + y * ro
        return (self.center[0] + r * np.cos(theta),
                self.center[1] + r * np.sin(theta))

    def from_plane(self, px, py):
        dx = px - self.center[0]
        dy = py - self.center[1]
        theta = np.mod(np.arctan2(dy, dx), 2.0 * math.pi)
        r = np.hypot(dx, dy)
        ri, ro = self.radii_at(theta)
        return theta / (2.0 * math.pi), (r - ri) / (ro - ri)


def _radius_profile(seed, center, params, n_iter, tol, max_gap=0.15):
    orbit = iterate_orbit(seed, n_iter, params, tol)
    pts = np.array(orbit.iterates)
    th = np.mod(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]),
                2.0 * math.pi)
    r = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
    order = np.argsort(th)
    th, r = th[order], r[order]
    gaps = np.diff(np.concatenate([th, [th[0] + 2.0 * math.pi]]))
    if float(np.max(gaps)) > max_gap:
        raise NotStarShaped(
            f"orbit of {tuple(seed)} leaves angular gap {np.max(gaps):.3f} rad")
    # radial graph check: radii of angular neighbours must agree to the
    # local secant scale, else the closure is not a graph over angle
    rjump = np.abs(np.diff(r)) / np.maximum(gaps[:-1], 1e-6)
    if float(np.max(rjump)) > 50.0 * float(np.median(np.abs(rjump)) + 1e-9):
        raise NotStarShaped(f"orbit of {tuple(seed)} is not a radial graph")
    return th, r


def build_annulus_chart(inner_seed, outer_seed, params, m=512, n_iter=600,
                        center=None, tol=1e-10):
    """Chart the band between the orbit closures of two seeds.

    Iterates each seed n_iter times, sorts by angle about the center
    (computed by Newton when not given) and interpolates both radius
    profiles on m equispaced angles.
    """
    if center is None:
        center = find_center(params, tol=tol).points[0]
    thi, ri = _radius_profile(inner_seed, center, params, n_iter, tol)
    tho, ro = _radius_profile(outer_seed, center, params, n_iter, tol)
    thetas = 2.0 * math.pi * np.arange(m) / m

    def resample(th, r):
        th_ext = np.concatenate([th - 2.0 * math.pi, th, th + 2.0 * math.pi])
        r_ext = np.concatenate([r, r, r])
        return np.interp(thetas, th_ext, r_ext)

    r_in = resample(thi, ri)
    r_out = resample(tho, ro)
    gap = float(np.min(r_out - r_in))
    if gap <= 1e-3:
        raise ChartGapError(f"radius profiles not separated (min gap {gap:.2e})")
    return AnnulusChart(center=tuple(center), thetas=thetas,
                        r_inner=r_in, r_outer=r_out)


def annulus_map_from_chart(chart, n, params, tol=1e-10):
    """P^n read through the chart as an annulus map.

    Boundary preservation only holds to the orbit-closure tolerance, so the
    map carries the relaxed boundary tolerance (default 5e-3) in its report.
    The lift picks the minimal-displacement branch, valid because band
    rotation numbers sit near an integer multiple of 1/n.
    """
    pp = params

    def core(r, y):
        px, py = chart.to_plane(r, y)
        p = (float(px), float(py))
        for _ in range(n):
            p = period_map(p, pp, tol, variational=False).endpoint
        fx, fy = chart.from_plane(p[0], p[1])
        return r + wrap_half(float(fx) - r), float(fy)

    def refine(p_annulus):
        # Newton in plane coordinates, where P^n is smooth; the chart's
        # piecewise-linear radii would poison finite differences.
        z = np.array(chart.to_plane(p_annulus[0], p_annulus[1]), float)
        for _ in range(40):
            w, mon, _ = _pn_with_monodromy(z, n, pp, tol)
            g = np.array(w) - z
            if float(np.hypot(*g)) < 1e-12:
                break
            z = z + np.linalg.solve(mon - np.eye(2), -g)
        w, mon, _ = _pn_with_monodromy(z, n, pp, tol)
        fx, fy = chart.from_plane(z[0], z[1])
        resid = float(np.hypot(*(np.array(w) - z)))
        trace = float(mon[0, 0] + mon[1, 1])
        return (float(np.mod(fx, 1.0)), float(fy)), resid, trace

    def plane_index(p_annulus, radius=1e-3, n_pts=64):
        z = np.array(chart.to_plane(p_annulus[0], p_annulus[1]), float)
        angles = 2.0 * math.pi * np.arange(n_pts) / n_pts
        qx = z[0] + radius * np.cos(angles)
        qy = z[1] + radius * np.sin(angles)
        wx, wy = period_map_batch(qx, qy, pp, n=n, tol=tol)
        vx, vy = wx - qx, wy - qy
        th = np.arctan2(vy, vx)
        d = np.diff(np.concatenate([th, th[:1]]))
        d = (d + math.pi) % (2.0 * math.pi) - math.pi
        return int(round(float(np.sum(d)) / (2.0 * math.pi)))

    return AnnulusMap(f"pendulum_p{n}", core,
                      params={"a": pp.a, "power": n},
                      analytic=False, boundary_tol=5e-3,
                      fixed_point_refiner=refine, plane_index=plane_index)


def pendulum_annulus_map(a=0.1, inner=(1.0, 0.0), outer=(1.3, 0.0), power=6,
                         n_iter=600, m=512, tol=1e-10, lazy=False):
    """Catalog entry: chart-conjugated P^power over the standard band.

    With lazy=True the chart (two long orbits) is built on first evaluation.
    """
    params = PendulumParams(a=a)

    if not lazy:
        chart = build_annulus_chart(inner, outer, params, m=m, n_iter=n_iter, tol=tol)
        return annulus_map_from_chart(chart, power, params, tol=tol)

    built = {}

    def inner_map():
        if "m" not in built:
            chart = build_annulus_chart(inner, outer, params, m=m,
                                        n_iter=n_iter, tol=tol)
            built["m"] = annulus_map_from_chart(chart, power, params, tol=tol)
        return built["m"]

    def core(r, y):
        return inner_map()._lift_core(r, y)

    def refine(p):
        return inner_map().fixed_point_refiner(p)

    def plane_index(p, radius=1e-3, n_pts=64):
        return inner_map().plane_index(p, radius, n_pts)

    return AnnulusMap(f"pendulum_p{power}", core,
                      params={"a": a, "power": power},
                      analytic=False, boundary_tol=5e-3,
                      fixed_point_refiner=refine, plane_index=plane_index)


def band_seed_grid(chart, n_theta=40, n_radial=10, pad=0.0):
    """Plane seeds radially arranged across the chart band."""
    seeds = []
    for i in range(n_theta):
        theta = 2.0 * math.pi * i / n_theta
        ri, ro = chart.radii_at(np.array([theta]))
        lo = float(ri[0]) * (1.0 - pad)
        hi = float(ro[0]) * (1.0 + pad)
        for j in range(n_radial):
            r = lo + (hi - lo) * (j + 0.5) / n_radial
            seeds.append((chart.center[0] + r * math.cos(theta),
                          chart.center[1] + r * math.sin(theta)))
    return seeds


def find_band_cycles(seeds, n, params, tol=1e-10, dedup_tol=1e-6):
    """Newton from every seed; keep distinct minimal-period-n cycles."""
    kept = []
    for seed in seeds:
        try:
            cyc = newton_cycle(seed, n, params, tol)
        except NewtonDiverged:
            continue
        if cyc.minimal_period != n:
            continue
        if any(same_cycle(cyc, other, dedup_tol) for other in kept):
            continue
        kept.append(cyc)
    kept.sort(key=lambda c: (round(c.trace, 9), c.points[0][0], c.points[0][1]))
    return kept
