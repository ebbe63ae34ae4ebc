"""Annulus maps, the analytic test catalog, and hypothesis checkers.

An annulus map is a boundary-preserving diffeomorphism of R/Z x [0,1]
carried here as an :class:`AnnulusMap`: an evaluator in annulus coordinates,
a fixed continuous lift to the universal cover, a Jacobian field, and a
positive density whose measure the map is supposed to preserve (Lebesgue by
default). The two hypothesis checkers test the twist condition (boundary
circles displaced in opposite directions under one lift) and pointwise
preservation of the density.

Tolerances come in two tiers: analytic maps (closed-form evaluators) and
integrated maps (time-1 flows or chart conjugations, whose accuracy is
bounded by integrator tolerance).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import NotBoundaryPreserving, SingularJacobian
from .geometry import halton, split_lift, wrap01

TWO_PI = 2.0 * math.pi

# default tolerance tiers
ANALYTIC_BOUNDARY_TOL = 1e-9
INTEGRATED_BOUNDARY_TOL = 1e-6
ANALYTIC_MEASURE_TOL = 1e-6
INTEGRATED_MEASURE_TOL = 1e-5

_FD_STEP = 1e-6  # central-difference step for maps without analytic Jacobians


def _lebesgue(x, y):
    return 1.0


class AnnulusMap:
    """A boundary-preserving annulus diffeomorphism with a chosen lift.

    Parameters
    ----------
    name : str
        Catalog identifier.
    lift_core : callable
        (r, y) -> (x_lift, y') for r in [0, 1); the full lift is obtained by
        integer equivariance, so lift consistency holds exactly.
    jacobian : callable, optional
        (x, y) -> 2x2 array. Central differences on the lift when omitted.
    density : callable, optional
        Positive invariant density; Lebesgue when omitted.
    analytic : bool
        Tolerance tier flag (closed-form vs integrated evaluator).
    """

    def __init__(self, name, lift_core, params=None, jacobian=None, density=None,
                 analytic=True, boundary_tol=None, disp_batch=None,
                 fixed_point_refiner=None, plane_index=None):
        self.name = name
        self.params = dict(params or {})
        self._lift_core = lift_core
        self._jacobian = jacobian
        self.density = density if density is not None else _lebesgue
        self.has_lebesgue_density = density is None
        self.analytic = analytic
        self.boundary_tol = boundary_tol if boundary_tol is not None else (
            ANALYTIC_BOUNDARY_TOL if analytic else INTEGRATED_BOUNDARY_TOL)
        self.measure_tol = ANALYTIC_MEASURE_TOL if analytic else INTEGRATED_MEASURE_TOL
        self._disp_batch = disp_batch
        self.fixed_point_refiner = fixed_point_refiner
        self.plane_index = plane_index

    def lift(self, xl, y):
        """Evaluate the chosen lift on the universal cover."""
        k, r = split_lift(xl)
        lx, ly = self._lift_core(r, y)
        return lx + k, ly

    def eval(self, x, y):
        """Evaluate in annulus coordinates (x reduced mod 1)."""
        lx, ly = self._lift_core(wrap01(x), y)
        return wrap01(lx), ly

    def disp(self, x, y):
        """Lifted displacement (delta1, delta2) at an annulus point."""
        r = wrap01(x)
        lx, ly = self._lift_core(r, y)
        return lx - r, ly - y

    def disp_batch(self, xs, ys):
        """Vectorized displacement; falls back to a Python loop."""
        if self._disp_batch is not None:
            return self._disp_batch(np.asarray(xs, float), np.asarray(ys, float))
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        d1 = np.empty(xs.shape)
        d2 = np.empty(xs.shape)
        flat1, flat2 = d1.ravel(), d2.ravel()
        fx, fy = xs.ravel(), ys.ravel()
        for i in range(fx.size):
            a, b = self.disp(fx[i], fy[i])
            flat1[i] = a
            flat2[i] = b
        return d1, d2

    def jacobian(self, x, y):
        """Jacobian matrix at an annulus point."""
        if self._jacobian is not None:
            return np.asarray(self._jacobian(x, y), float)
        return self._fd_jacobian(x, y)

    def _fd_jacobian(self, x, y, h=_FD_STEP):
        # x-derivatives via the lift, so no mod-1 jumps; y-derivatives use
        # one-sided stencils within h of the boundary.
        xp = self.lift(x + h, y)
        xm = self.lift(x - h, y)
        j11 = (xp[0] - xm[0]) / (2 * h)
        j21 = (xp[1] - xm[1]) / (2 * h)
        ylo = max(y - h, 0.0)
        yhi = min(y + h, 1.0)
        yp = self.lift(x, yhi)
        ym = self.lift(x, ylo)
        j12 = (yp[0] - ym[0]) / (yhi - ylo)
        j22 = (yp[1] - ym[1]) / (yhi - ylo)
        return np.array([[j11, j12], [j21, j22]])

    def det_jacobian(self, x, y):
        j = self.jacobian(x, y)
        return j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]

    def spec(self):
        """The JSON map-specification this instance answers to."""
        return {"name": self.name, **self.params}

    def __repr__(self):
        return f"AnnulusMap({json.dumps(self.spec(), sort_keys=True)})"


@dataclass
class HypothesisReport:
    """Outcome of the twist / integral-invariant checks."""

    map_name: str
    twist_ok: bool = None
    twist_margin_bottom: float = None
    twist_margin_top: float = None
    lift_shift: int = None
    measure_ok: bool = None
    max_density_transport_error: float = None
    boundary_tol: float = None
    measure_tol: float = None
    samples: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


# ---------------------------------------------------------------------------
# catalog maps
# ---------------------------------------------------------------------------

def shear_map():
    """f(x, y) = (x + y - 1/2, y): the linear standard twist."""

    def core(r, y):
        return r + y - 0.5, y

    def dbatch(xs, ys):
        return ys - 0.5, np.zeros_like(ys)

    return AnnulusMap("shear", core, jacobian=lambda x, y: np.array([[1.0, 1.0], [0.0, 1.0]]),
                      disp_batch=dbatch)


def identity_map():
    def core(r, y):
        return r, y

    return AnnulusMap("identity", core,
                      jacobian=lambda x, y: np.eye(2),
                      disp_batch=lambda xs, ys: (np.zeros_like(xs), np.zeros_like(ys)))


def hamiltonian_twist_map(epsilon=0.1, tol=1e-10):
    """Time-1 flow of H(x,y) = y^2/2 - y/2 + epsilon cos(2 pi x) y(1-y).

    For epsilon = 0 this is the shear exactly. Both boundary circles are
    invariant curves of the generating field, so boundary preservation is
    exact; the Jacobian is integrated alongside via the variational
    equations.
    """
    if not 0.0 <= epsilon < 0.4:
        raise ValueError("epsilon must lie in [0, 0.4)")
    fid = _backend.FIELD_HAMTWIST

    def core(r, y):
        res = _backend.flow(fid, epsilon, 0.0, 1.0, r, y, tol, tol, False)
        return res[0], res[1]

    def jac(x, y):
        res = _backend.flow(fid, epsilon, 0.0, 1.0, wrap01(x), y, tol, tol, True)
        return np.array([[res[2], res[3]], [res[4], res[5]]])

    def dbatch(xs, ys):
        shape = xs.shape
        fx, fy = _backend.flow_batch(fid, epsilon, 0.0, 1.0,
                                     xs.ravel(), ys.ravel(), tol, tol)
        return (fx - xs.ravel()).reshape(shape), (fy - ys.ravel()).reshape(shape)

    return AnnulusMap("hamiltonian_twist", core, params={"epsilon": epsilon},
                      jacobian=jac, analytic=False, disp_batch=dbatch)


def _psi_forward(c, x, y):
    return y + c * math.sin(TWO_PI * x) * y * (1.0 - y)


def _psi_inverse(c, x, Y):
    # solve y + s y(1-y) = Y for y in [0,1]; rationalized quadratic root,
    # stable as s -> 0
    s = c * math.sin(TWO_PI * x)
    disc = (1.0 + s) ** 2 - 4.0 * s * Y
    return 2.0 * Y / ((1.0 + s) + math.sqrt(disc))


def _dpsi(c, x, y):
    """Jacobian of psi(x, y) = (x, y + c sin(2 pi x) y (1-y))."""
    s = c * math.sin(TWO_PI * x)
    a = c * TWO_PI * math.cos(TWO_PI * x) * y * (1.0 - y)
    d = 1.0 + s * (1.0 - 2.0 * y)
    return a, d


def conjugated_shear_map(c=0.2, lebesgue=False):
    """psi o shear o psi^-1 with psi(x,y) = (x, y + c sin(2 pi x) y(1-y)).

    Preserves the pushforward of Lebesgue measure under psi; pass
    ``lebesgue=True`` to deliberately pair it with the wrong (Lebesgue)
    density, which the measure checker must reject.
    """
    if abs(c) >= 1.0:
        raise ValueError("need |c| < 1 for psi to be a diffeomorphism")

    def core(r, y):
        qy = _psi_inverse(c, r, y)
        lx = r + qy - 0.5
        return lx, _psi_forward(c, wrap01(lx), qy)

    def jac(x, y):
        x = wrap01(x)
        qy = _psi_inverse(c, x, y)
        a_q, d_q = _dpsi(c, x, qy)
        sx = wrap01(x + qy - 0.5)
        a_s, d_s = _dpsi(c, sx, qy)
        dpsi_inv = np.array([[1.0, 0.0], [-a_q / d_q, 1.0 / d_q]])
        dshear = np.array([[1.0, 1.0], [0.0, 1.0]])
        dpsi_s = np.array([[1.0, 0.0], [a_s, d_s]])
        return dpsi_s @ dshear @ dpsi_inv

    def density(x, y):
        qy = _psi_inverse(c, x, y)
        _, d = _dpsi(c, x, qy)
        return 1.0 / d

    def dbatch(xs, ys):
        s = c * np.sin(TWO_PI * xs)
        disc = (1.0 + s) ** 2 - 4.0 * s * ys
        qy = 2.0 * ys / ((1.0 + s) + np.sqrt(disc))
        lx = xs + qy - 0.5
        sx = np.mod(lx, 1.0)
        fy = qy + c * np.sin(TWO_PI * sx) * qy * (1.0 - qy)
        return lx - xs, fy - ys

    return AnnulusMap("conjugated_shear", core,
                      params={"c": c, "density": "lebesgue" if lebesgue else "pushforward"},
                      jacobian=jac,
                      density=None if lebesgue else density,
                      disp_batch=dbatch)


def leaky_shear_map(delta=0.1):
    """f(x,y) = (x + y - 1/2, y + delta y(1-y) sigma(x)) with a positive bump.

    sigma(x) = 0.6 + 0.4 cos(2 pi x) is smooth and strictly positive, so the
    map pushes every interior point strictly upward: a twist map with no
    invariant measure at all. Serves as the witness-loop fixture.
    """

    def sigma(x):
        return 0.6 + 0.4 * math.cos(TWO_PI * x)

    def sigma_prime(x):
        return -0.8 * math.pi * math.sin(TWO_PI * x)

    def core(r, y):
        return r + y - 0.5, y + delta * y * (1.0 - y) * sigma(r)

    def jac(x, y):
        x = wrap01(x)
        return np.array([
            [1.0, 1.0],
            [delta * y * (1.0 - y) * sigma_prime(x),
             1.0 + delta * (1.0 - 2.0 * y) * sigma(x)],
        ])

    def dbatch(xs, ys):
        sig = 0.6 + 0.4 * np.cos(TWO_PI * xs)
        return ys - 0.5, delta * ys * (1.0 - ys) * sig

    return AnnulusMap("leaky_shear", core, params={"delta": delta},
                      jacobian=jac, disp_batch=dbatch)


def catalog():
    """The named test maps: shear, Hamiltonian twist, conjugated shear and
    the chart-conjugated pendulum power map (built lazily on first use)."""
    from .cycles import pendulum_annulus_map  # deferred: heavy dependencies

    return [
        shear_map(),
        hamiltonian_twist_map(epsilon=0.1),
        conjugated_shear_map(c=0.2),
        pendulum_annulus_map(lazy=True),
    ]


def make_map(spec):
    """Build a catalog map from a JSON spec, e.g. {"name":"shear"}."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "shear":
        return shear_map()
    if name == "identity":
        return identity_map()
    if name == "hamiltonian_twist":
        return hamiltonian_twist_map(epsilon=float(spec.get("epsilon", 0.1)),
                                     tol=float(spec.get("tol", 1e-10)))
    if name == "conjugated_shear":
        return conjugated_shear_map(c=float(spec.get("c", 0.2)),
                                    lebesgue=spec.get("density") == "lebesgue")
    if name == "leaky_shear":
        return leaky_shear_map(delta=float(spec.get("delta", 0.1)))
    if name == "pendulum_p6":
        from .cycles import pendulum_annulus_map

        return pendulum_annulus_map(
            a=float(spec.get("a", 0.1)),
            inner=tuple(spec.get("inner", (1.0, 0.0))),
            outer=tuple(spec.get("outer", (1.3, 0.0))),
            power=int(spec.get("power", 6)),
            n_iter=int(spec.get("iters", 600)),
        )
    raise ValueError(f"unknown map name: {name!r}")


# ---------------------------------------------------------------------------
# hypothesis checkers
# ---------------------------------------------------------------------------

def _boundary_displacements(m, n_samples, boundary_tol):
    xs = np.arange(n_samples) / n_samples
    d0 = np.empty(n_samples)
    d1 = np.empty(n_samples)
    for i, x in enumerate(xs):
        lx, ly = m.lift(x, 0.0)
        if abs(ly) > boundary_tol:
            raise NotBoundaryPreserving(
                f"{m.name}: f2({x:.4f}, 0) = {ly:.3e} exceeds {boundary_tol:.1e}")
        d0[i] = lx - x
        lx, ly = m.lift(x, 1.0)
        if abs(1.0 - ly) > boundary_tol:
            raise NotBoundaryPreserving(
                f"{m.name}: 1 - f2({x:.4f}, 1) = {1.0 - ly:.3e} exceeds {boundary_tol:.1e}")
        d1[i] = lx - x
    return d0, d1


def select_lift_shift(m, n_samples=64, boundary_tol=None):
    """Integer lift translate minimizing mean |displacement| on both boundaries.

    The twist dichotomy is invariant under this choice; it pins the branch
    used by every downstream displacement-field sampling.
    """
    btol = boundary_tol if boundary_tol is not None else m.boundary_tol
    d0, d1 = _boundary_displacements(m, n_samples, btol)
    center = -round(float(np.mean(np.concatenate([d0, d1]))))
    best_k, best_cost = 0, math.inf
    for k in range(center - 2, center + 3):
        cost = float(np.mean(np.abs(d0 + k)) + np.mean(np.abs(d1 + k)))
        if cost < best_cost:
            best_k, best_cost = k, cost
    return best_k


def check_twist(m, n_samples=64, boundary_tol=None):
    """Check the twist condition on equispaced boundary samples.

    The condition holds when one lift displaces the bottom circle strictly
    left (margin < 0) and the top circle strictly right (margin > 0).
    """
    if n_samples < 16:
        raise ValueError("n_samples must be >= 16")
    btol = boundary_tol if boundary_tol is not None else m.boundary_tol
    d0, d1 = _boundary_displacements(m, n_samples, btol)
    k = select_lift_shift(m, n_samples, btol)
    bottom = float(np.max(d0 + k))
    top = float(np.min(d1 + k))
    return HypothesisReport(
        map_name=m.name,
        twist_ok=bool(bottom < 0.0 < top),
        twist_margin_bottom=bottom,
        twist_margin_top=top,
        lift_shift=k,
        boundary_tol=btol,
        samples={"twist": n_samples},
    )


def check_invariant_measure(m, n_samples=256, tol=None):
    """Check pointwise density transport rho(f(p)) |det Df(p)| = rho(p).

    Samples a quasi-random (Halton) set in the annulus; the report carries
    the worst transport residual.
    """
    if n_samples < 16:
        raise ValueError("n_samples must be >= 16")
    mtol = tol if tol is not None else m.measure_tol
    pts = halton(n_samples)
    worst = 0.0
    for x, y in pts:
        det = m.det_jacobian(x, y)
        if abs(det) < 1e-12:
            raise SingularJacobian(
                f"{m.name}: |det Df({x:.4f},{y:.4f})| = {abs(det):.2e}")
        fx, fy = m.eval(x, y)
        err = abs(m.density(fx, fy) * abs(det) - m.density(x, y))
        worst = max(worst, err)
    return HypothesisReport(
        map_name=m.name,
        measure_ok=bool(worst < mtol),
        max_density_transport_error=worst,
        measure_tol=mtol,
        samples={"measure": n_samples},
    )


def check_hypotheses(m, n_samples=64, n_measure=256):
    """Run both checkers and merge the reports."""
    rt = check_twist(m, n_samples)
    rm = check_invariant_measure(m, n_measure)
    rt.measure_ok = rm.measure_ok
    rt.max_density_transport_error = rm.max_density_transport_error
    rt.measure_tol = rm.measure_tol
    rt.samples.update(rm.samples)
    return rt
