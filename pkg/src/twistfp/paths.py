"""Critical points, directed paths, and the measure-violation witness.

On a monotonically translating invariant set (every component's u sign
constant), a directed path departs each vertical tangency of type +1 by the
rules

    v = -flow      (vertical direction leaving the critical point)
    t = -u' v flow (travel direction along the component that is hit)

and always terminates on another type +1 critical point, so chaining paths
must close into a loop C. The image f(C) then never crosses over C, and the
areas enclosed by C and f(C) differ: the witness that such a map preserves
no positive integral invariant.

Coordinates: the machinery runs in the straightened (T-conjugated) frame
where fibers are vertical; polylines carry unwrapped cover x.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (CrossoverDetected, HitBoundary, NoCriticalPoints,
                     OnlyDegenerateCriticals, PathRuleViolation)
from .geometry import resample_closed, wrap01, wrap_half

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)

_VERTICAL_SLOPE = 0.02  # |dx| below this fraction of segment length is vertical


@dataclass
class CriticalPoint:
    """A vertical-tangency point on a component.

    c: +1 right-facing (local max of x), -1 left-facing (local min);
    flow: sign of the horizontal displacement on the outer side of the
    tangent; type = u * c. Degenerate tangencies carry c = flow = type = 0
    and are excluded from path generation.
    """

    component_id: int
    vertex_index: int
    position: tuple
    x_lift: float
    c: int
    flow: int
    type: int
    degenerate: bool = False

    def key(self):
        return (self.component_id, self.vertex_index)


@dataclass
class PathSegment:
    kind: str            # "vertical" | "along"
    start: tuple
    end: tuple
    direction: int       # v for verticals (+1 up), t for along (+1 right)
    component_id: int = None
    points: np.ndarray = None   # (n, 2) cover coordinates

    def to_dict(self):
        return {
            "kind": self.kind,
            "start": [self.start[0], self.start[1]],
            "end": [self.end[0], self.end[1]],
            "direction": self.direction,
            "component_id": self.component_id,
        }


@dataclass
class DirectedPath:
    segments: list
    visited_criticals: list
    closed: bool
    winding: int = None

    def polyline(self):
        """Concatenated cover-coordinate polyline (consecutive duplicates dropped)."""
        pts = []
        for seg in self.segments:
            p = seg.points.copy()
            if pts:
                p[:, 0] += round(pts[-1][0] - p[0, 0])
            for q in p:
                if pts and abs(q[0] - pts[-1][0]) < 1e-13 and abs(q[1] - pts[-1][1]) < 1e-13:
                    continue
                pts.append((q[0], q[1]))
        return np.array(pts)

    def to_dict(self):
        return {
            "closed": self.closed,
            "winding": self.winding,
            "segments": [s.to_dict() for s in self.segments],
        }


@dataclass
class MeasureVerdict:
    area_inside_C: float = None
    area_inside_fC: float = None
    difference: float = None
    crossover_found: bool = False
    junctions: list = dc_field(default_factory=list)

    def to_dict(self):
        return {
            "area_inside_C": self.area_inside_C,
            "area_inside_fC": self.area_inside_fC,
            "difference": self.difference,
            "crossover_found": self.crossover_found,
        }


# ---------------------------------------------------------------------------
# critical points
# ---------------------------------------------------------------------------

def find_critical_points(comp, eps_window, dx_field):
    """Locate vertical tangencies of a component and classify them.

    A vertex is a non-degenerate critical point when it is a strict local
    extremum of unwrapped x over the eps_window arc on both sides (the curve
    bends back in the same direction). Vertical tangencies that are not
    two-sided extrema (inflections, plateaus) are returned with
    degenerate=True. Raises NoCriticalPoints for monotone wrap-around
    components with no vertical tangencies at all.

    dx_field(x, y) samples the horizontal displacement used for the outer
    flow, evaluated at the point offset by eps_window/2 on the tangent side.
    """
    if comp.n < 8:
        raise ValueError("component too short")
    xl = comp.x_lift
    vy = comp.vertices[:, 1]
    n = comp.n
    closing = wrap_half(comp.vertices[0, 0] - comp.vertices[-1, 0])
    dx = np.diff(xl, append=xl[-1] + closing)        # dx[k] = edge k -> k+1
    dy = np.diff(vy, append=vy[0])
    seg = np.hypot(dx, dy)
    L = float(np.sum(seg))
    w = min(eps_window, 0.125 * L)
    wind_jump = comp.winding  # cover jump when an index window wraps the seam

    def window_extremum(k):
        """(is strict max, is strict min) of cover x over the +/- w arc."""
        xk = xl[k]
        hi = -math.inf
        lo = math.inf
        # backward
        acc, i, sheet = 0.0, k, 0.0
        while acc < w:
            i -= 1
            if i < 0:
                i += n
                sheet -= wind_jump
            acc += seg[i]
            v = xl[i] + sheet
            hi = max(hi, v)
            lo = min(lo, v)
            if i == k:
                break
        # forward
        acc, i, sheet = 0.0, k, 0.0
        while acc < w:
            acc += seg[i]
            i += 1
            if i >= n:
                i -= n
                sheet += wind_jump
            v = xl[i] + sheet
            hi = max(hi, v)
            lo = min(lo, v)
            if i == k:
                break
        return xk > hi, xk < lo

    sign = np.sign(dx)

    def run_sign(k, step):
        i = (k + step) % n if step < 0 else k
        for _ in range(n):
            if sign[i] != 0:
                return sign[i]
            i = (i + step) % n
        return 0

    found = []
    turning_at = set()
    for k in range(n):
        before = run_sign(k, -1)
        after = run_sign(k, +1)
        if before != 0 and after != 0 and before != after:
            turning_at.add(k)
    for k in sorted(turning_at):
        is_max, is_min = window_extremum(k)
        if is_max or is_min:
            c = 1 if is_max else -1
            fx = wrap01(comp.vertices[k, 0] + c * 0.5 * w)
            val = dx_field(fx, float(vy[k]))
            flow = 1 if val > 0 else (-1 if val < 0 else 0)
            degen = flow == 0
            found.append(CriticalPoint(comp.id, k, tuple(comp.vertices[k]),
                                       float(xl[k]), c, flow,
                                       0 if degen else comp.u * c,
                                       degenerate=degen))
        else:
            found.append(CriticalPoint(comp.id, k, tuple(comp.vertices[k]),
                                       float(xl[k]), 0, 0, 0, degenerate=True))

    # vertical inflections: locally most-vertical vertex of a near-vertical
    # stretch with no turning point inside the window
    for k in range(n):
        if k in turning_at:
            continue
        sl_prev = abs(dx[(k - 1) % n]) / max(seg[(k - 1) % n], 1e-300)
        sl_next = abs(dx[k]) / max(seg[k], 1e-300)
        if min(sl_prev, sl_next) > _VERTICAL_SLOPE:
            continue
        here = min(sl_prev, sl_next)
        neigh_prev = abs(dx[(k - 2) % n]) / max(seg[(k - 2) % n], 1e-300)
        neigh_next = abs(dx[(k + 1) % n]) / max(seg[(k + 1) % n], 1e-300)
        if here > min(neigh_prev, sl_prev) or here > min(sl_next, neigh_next):
            continue
        acc, i = 0.0, k
        clear = True
        while acc < w:
            i = (i - 1) % n
            acc += seg[i]
            if i in turning_at:
                clear = False
                break
        acc, i = 0.0, k
        while clear and acc < w:
            acc += seg[i]
            i = (i + 1) % n
            if i in turning_at:
                clear = False
                break
        if clear:
            found.append(CriticalPoint(comp.id, k, tuple(comp.vertices[k]),
                                       float(xl[k]), 0, 0, 0, degenerate=True))

    if not found:
        raise NoCriticalPoints(f"component {comp.id} has no vertical tangencies")
    found.sort(key=lambda cp: cp.vertex_index)
    return found


def criticals_for(inv, eps_window=None, dx_field=None):
    """Critical points of every component of an invariant set.

    Returns (dict keyed by (component_id, vertex_index), ids of components
    with no vertical tangencies). eps_window defaults to 4 grid cells of the
    generating extraction; dx_field defaults to the sampled field over phi,
    which is the horizontal displacement in the straightened frame.
    """
    if eps_window is None:
        eps_window = 4.0 / inv.grid_resolution[0]
    if dx_field is None:
        fld = inv.field
        dx_field = lambda x, y: fld.evaluate(x, y) / fld.phi  # noqa: E731
    crits = {}
    bare = []
    for comp in inv.components:
        try:
            for cp in find_critical_points(comp, eps_window, dx_field):
                crits[cp.key()] = cp
        except NoCriticalPoints:
            bare.append(comp.id)
    return crits, bare


# ---------------------------------------------------------------------------
# path generation
# ---------------------------------------------------------------------------

def _vertical_intersections(x0, y0, v, components, skip_tol=1e-12):
    hits = []
    for comp in components:
        verts = comp.vertices
        n = comp.n
        dxs = np.fromiter((wrap_half(verts[k, 0] - x0) for k in range(n)),
                          float, n)
        for k in range(n):
            k1 = (k + 1) % n
            a, b = dxs[k], dxs[k1]
            # segments are short, so |a - b| near 1 means the segment passes
            # the antipodal meridian, not the query fiber
            if a * b >= 0.0 or abs(a - b) >= 0.5:
                continue
            t = a / (a - b)
            ycr = verts[k, 1] + t * (verts[k1, 1] - verts[k, 1])
            d = (ycr - y0) * v
            if d > skip_tol:
                hits.append((d, comp.id, k, t, ycr))
    return hits


def generate_path(start, inv, criticals, dx_field=None):
    """One hop of the directed path from a type +1 critical point.

    Travels vertically in v = -flow until the first component intersection
    (ties within 1e-9 broken toward the smaller component id), then along
    that component in t = -u' v flow until the first non-degenerate critical
    point, which again has type +1.
    """
    if start.degenerate or start.type != 1:
        raise ValueError("paths depart only from non-degenerate type +1 points")
    if any(c.u == 0 for c in inv.components):
        raise PathRuleViolation("mixed-sign component: monotone hypothesis fails")
    comps = {c.id: c for c in inv.components}

    v = -start.flow
    x0, y0 = start.position
    hits = _vertical_intersections(x0, y0, v, inv.components)
    if not hits:
        raise HitBoundary(
            f"vertical from {start.key()} reaches the boundary: "
            "hypothesis breach or extraction artifact")
    dmin = min(h[0] for h in hits)
    best = sorted(h for h in hits if h[0] <= dmin + 1e-9)[0]
    _, cid, kseg, _, ycr = best
    comp = comps[cid]
    t_dir = -comp.u * v * start.flow

    k1 = (kseg + 1) % comp.n
    ddx = wrap_half(comp.vertices[k1, 0] - comp.vertices[kseg, 0])
    if ddx == 0.0:
        raise PathRuleViolation("vertical landed on a vertical segment")
    step = 1 if (ddx > 0) == (t_dir > 0) else -1

    walk = [(kseg + 1) % comp.n if step == 1 else kseg]
    terminal = None
    m = walk[0]
    for _ in range(comp.n + 1):
        cp = criticals.get((cid, m))
        if cp is not None and not cp.degenerate:
            terminal = cp
            break
        m = (m + step) % comp.n
        walk.append(m)
    if terminal is None:
        raise OnlyDegenerateCriticals(
            f"component {cid} has no non-degenerate critical point to stop at")
    if terminal.c != t_dir:
        raise PathRuleViolation(
            f"terminal facing {terminal.c} != travel {t_dir} at {terminal.key()}")

    # cover-coordinate polylines anchored at the start's x_lift
    vert_pts = np.array([[start.x_lift, y0], [start.x_lift, ycr]])
    along = [(start.x_lift, ycr)]
    xcur = start.x_lift
    prev_x = x0
    for m2 in walk:
        vx, vyy = comp.vertices[m2]
        xcur += wrap_half(vx - prev_x)
        prev_x = vx
        along.append((xcur, vyy))
    vseg = PathSegment("vertical", (x0, y0), (x0, ycr), v,
                       component_id=None, points=vert_pts)
    aseg = PathSegment("along", (x0, ycr), terminal.position, t_dir,
                       component_id=cid, points=np.array(along))
    return DirectedPath(segments=[vseg, aseg],
                        visited_criticals=[start, terminal], closed=False)


def find_closed_loop(inv, criticals=None, bare=None, dx_field=None,
                     eps_window=None):
    """Chain directed paths until they repeat, returning the closed loop.

    A wrap-around monotone component with no vertical tangencies at all is
    itself the loop (the direct area argument needs no path). Otherwise hops
    start at the first type +1 critical point; the pigeonhole principle
    closes the chain within the number of type +1 points. The loop winding
    is asserted non-zero.
    """
    if any(c.u == 0 for c in inv.components):
        raise PathRuleViolation("mixed-sign component: monotone hypothesis fails")
    if criticals is None:
        criticals, bare = criticals_for(inv, eps_window, dx_field)
    if dx_field is None:
        fld = inv.field
        dx_field = lambda x, y: fld.evaluate(x, y) / fld.phi  # noqa: E731
    comps = {c.id: c for c in inv.components}

    for cid in sorted(bare or []):
        comp = comps[cid]
        if comp.winding != 0:
            pts = comp.cover_vertices()
            closed_pts = np.vstack([pts, [[pts[0, 0] + comp.winding, pts[0, 1]]]])
            seg = PathSegment("along", tuple(comp.vertices[0]),
                              tuple(comp.vertices[0]), 1, component_id=cid,
                              points=closed_pts)
            return DirectedPath(segments=[seg], visited_criticals=[],
                                closed=True, winding=comp.winding)

    plus = sorted((cp for cp in criticals.values()
                   if cp.type == 1 and not cp.degenerate),
                  key=lambda cp: cp.key())
    if not plus:
        if any(cp.degenerate for cp in criticals.values()):
            raise OnlyDegenerateCriticals(
                "only degenerate tangencies found: perturb phi and retry")
        raise NoCriticalPoints("no type +1 critical points available")

    hops = []
    seen = {plus[0].key(): 0}
    cur = plus[0]
    for _ in range(len(plus) + 1):
        hop = generate_path(cur, inv, criticals, dx_field)
        hops.append(hop)
        nxt = hop.visited_criticals[-1]
        if nxt.key() in seen:
            j = seen[nxt.key()]
            cyc = hops[j:]
            segments = [s for h in cyc for s in h.segments]
            visited = [h.visited_criticals[0] for h in cyc]
            loop = DirectedPath(segments=segments, visited_criticals=visited,
                                closed=True)
            poly = loop.polyline()
            loop.winding = int(round(poly[-1, 0] + wrap_half(poly[0, 0] - poly[-1, 0])
                                     - poly[0, 0]))
            if loop.winding == 0:
                raise PathRuleViolation("closed loop has zero winding")
            return loop
        seen[nxt.key()] = len(hops)
        cur = nxt
    raise PathRuleViolation("loop failed to close within the pigeonhole bound")


# ---------------------------------------------------------------------------
# crossover check and measure verdict
# ---------------------------------------------------------------------------

def _image_polyline(poly, m):
    """Image of a cover polyline under the map, continuous in the cover."""
    out = np.empty_like(poly)
    for i, (xlift, y) in enumerate(poly):
        d1, d2 = m.disp(xlift, y)
        out[i] = (xlift + d1, y + d2)
    return out


def _below_parity(qx, qy, poly):
    """Parity of loop crossings strictly below a query point (cylinder)."""
    cnt = 0
    n = len(poly)
    for k in range(n):
        a = wrap_half(poly[k, 0] - qx)
        b = wrap_half(poly[(k + 1) % n, 0] - qx)
        # skip non-straddles and antipodal-meridian artifacts (see
        # _vertical_intersections)
        if (a <= 0.0) == (b <= 0.0) or abs(a - b) >= 0.5:
            continue
        t = a / (a - b)
        ycr = poly[k, 1] + t * (poly[(k + 1) % n, 1] - poly[k, 1])
        if ycr < qy:
            cnt += 1
    return cnt & 1


def _dist_to_polyline(qx, qy, poly):
    best = math.inf
    n = len(poly)
    for k in range(n):
        p = poly[k]
        q = poly[(k + 1) % n]
        ux = wrap_half(q[0] - p[0])
        uy = q[1] - p[1]
        wx = wrap_half(qx - p[0])
        wy = qy - p[1]
        L2 = ux * ux + uy * uy
        t = 0.0 if L2 == 0 else max(0.0, min(1.0, (wx * ux + wy * uy) / L2))
        best = min(best, math.hypot(wx - t * ux, wy - t * uy))
    return best


def _junction_tuples(path, m):
    """Re-derive the sign rules at every junction of a chained path.

    Departures must satisfy v = -flow; landings t = -u' v flow, with u'
    re-sampled from the map's vertical displacement on the landing
    component. Returns the list of junction case tuples.
    """
    out = []
    segs = path.segments
    for i, seg in enumerate(segs):
        if seg.kind != "vertical":
            continue
        cp = path.visited_criticals[i // 2] if path.visited_criticals else None
        if cp is not None:
            if seg.direction != -cp.flow:
                raise PathRuleViolation(
                    f"vertical direction {seg.direction} != -flow at {cp.key()}")
            prev = segs[i - 1] if (i > 0 or path.closed) else None
            approach = None
            if prev is not None and prev.kind == "along" and len(prev.points) > 1:
                approach = int(np.sign(prev.points[-1, 1] - prev.points[-2, 1])) or 1
            out.append({"junction": "departure", "component": cp.component_id,
                        "c": cp.c, "flow": cp.flow, "v": seg.direction,
                        "approach": approach})
        if i + 1 < len(segs) and segs[i + 1].kind == "along":
            nxt = segs[i + 1]
            mid = nxt.points[len(nxt.points) // 2]
            _, d2 = m.disp(float(mid[0]), float(mid[1]))
            u_prime = 1 if d2 > 0 else -1
            if cp is not None and nxt.direction != -u_prime * seg.direction * cp.flow:
                raise PathRuleViolation(
                    f"travel direction {nxt.direction} breaks t = -u'vf after {cp.key()}")
            out.append({"junction": "landing", "component": nxt.component_id,
                        "u": u_prime, "v": seg.direction, "t": nxt.direction})
    return out


def check_no_crossover(path, m, n_dense=2048, touch_tol=1e-7):
    """Verify f(path) stays within the closure of one side of the path.

    Classifies densely sampled image points as above/below the closed path
    (tangential touching within touch_tol allowed) and re-derives every
    junction against the departure/landing sign rules. Raises
    CrossoverDetected with the offending junction context on breach.
    """
    if not path.closed:
        raise ValueError("crossover check needs a closed path")
    junctions = _junction_tuples(path, m)
    raw = path.polyline()
    wind = path.winding if path.winding is not None else \
        int(round(raw[-1, 0] + wrap_half(raw[0, 0] - raw[-1, 0]) - raw[0, 0]))
    poly = resample_closed(raw, n_dense, close_offset=wind)
    img = _image_polyline(poly, m)
    sides = np.fromiter((_below_parity(img[i, 0], img[i, 1], poly)
                         for i in range(len(img))), int, len(img))
    counts = np.bincount(sides, minlength=2)
    if counts[0] and counts[1]:
        minority = 0 if counts[0] <= counts[1] else 1
        for i in np.nonzero(sides == minority)[0]:
            if _dist_to_polyline(img[i, 0], img[i, 1], poly) > touch_tol:
                frac = i / len(img)
                near = junctions[min(int(frac * len(junctions)),
                                     len(junctions) - 1)] if junctions else None
                raise CrossoverDetected(
                    f"image point ({img[i, 0]:.6f}, {img[i, 1]:.6f}) crossed "
                    "to the other side of the path", junction=near)
    return MeasureVerdict(crossover_found=False, junctions=junctions)


def _column_integral(m, xs, ys, density=None):
    """G(x, y) = integral of the density along the fiber from 0 to y."""
    rho = density if density is not None else m.density
    if density is None and m.has_lebesgue_density:
        return np.asarray(ys, float).copy()
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    out = np.zeros_like(ys)
    for i in range(len(ys)):
        half = 0.5 * ys[i]
        nodes = half * (_GL_NODES + 1.0)
        acc = 0.0
        for t, wgt in zip(nodes, _GL_WEIGHTS):
            acc += wgt * rho(xs[i], t)
        out[i] = half * acc
    return out


def _area_below(poly, m, density):
    """Weighted area between a winding +1 cover polyline and y = 0."""
    x = poly[:, 0]
    y = poly[:, 1]
    G = _column_integral(m, np.mod(x, 1.0), y, density)
    wind = round((x[-1] - x[0]) + wrap_half(x[0] - x[-1]))
    xn = np.roll(x, -1)
    xn[-1] = x[0] + wind
    Gn = np.roll(G, -1)
    return float(np.sum(0.5 * (G + Gn) * (xn - x)))


def measure_verdict(path, m, density=None, n_stations=1024):
    """Measure of the sub-annulus below the loop versus below its image.

    Both areas are weighted by column integrals of the density; for a true
    integral invariant the difference vanishes, so a non-zero difference at
    quadrature accuracy is the witness against measure preservation.
    """
    if not path.closed or not path.winding:
        raise ValueError("measure verdict needs a closed loop of non-zero winding")
    poly = resample_closed(path.polyline(), max(2 * n_stations, 2048),
                           close_offset=path.winding)
    if path.winding < 0:
        poly = poly[::-1].copy()
    img = _image_polyline(poly, m)
    a_c = _area_below(poly, m, density)
    a_f = _area_below(img, m, density)
    check = check_no_crossover(path, m, n_dense=min(2048, 2 * n_stations))
    return MeasureVerdict(area_inside_C=a_c, area_inside_fC=a_f,
                          difference=a_f - a_c,
                          crossover_found=False,
                          junctions=check.junctions)
