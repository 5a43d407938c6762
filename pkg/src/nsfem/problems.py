"""Benchmark problem definitions: domains, data, and exact solutions."""

import numpy as np
from dataclasses import dataclass, field
from functools import lru_cache

from .dofmap import VelocityBC, build_taylor_hood
from .mesh import build_rect_mesh, build_periodic_map, INFLOW, OUTFLOW, WALL

PROBLEM_NAMES = ("planar_lattice", "gresho", "channel_transport", "manufactured")


@dataclass
class TransportSpec:
    """Passive-scalar payload attached to a flow problem."""

    initial: callable
    eps: float
    scalar_bc: dict
    analytic_mass: float


@dataclass
class ProblemSpec:
    """A benchmark problem: geometry, boundary data, closures, presets.

    Exact-solution closures take (x, y, t) with array-valued x, y;
    ``exact_velocity_grad`` returns (du1/dx, du1/dy, du2/dx, du2/dy).
    ``presets`` maps preset names to mesh/time-step defaults.
    """

    name: str
    box: tuple
    periodic_axes: tuple = ()
    face_tags: dict = field(default_factory=dict)
    bc: dict = field(default_factory=dict)
    nu: float = 1.0
    grad_div_gamma: float = 0.0
    initial_kind: str = "project_divfree"
    initial_velocity: callable = None
    initial_pressure: callable = None
    exact_velocity: callable = None
    exact_velocity_grad: callable = None
    exact_pressure: callable = None
    forcing: callable = None
    transport: TransportSpec = None
    pin_nodes: callable = None
    presets: dict = field(default_factory=dict)

    @property
    def center(self):
        xmin, xmax, ymin, ymax = self.box
        return (0.5 * (xmin + xmax), 0.5 * (ymin + ymax))

    @property
    def has_exact(self):
        return self.exact_velocity is not None

    def preset(self, which="desk"):
        if which not in self.presets:
            raise KeyError(f"problem {self.name} has no preset {which!r}")
        return dict(self.presets[which])

    def build_mesh(self, nx=None, ny=None, preset="desk", pattern="right"):
        p = self.preset(preset)
        nx = nx if nx is not None else p["nx"]
        ny = ny if ny is not None else p.get("ny", nx)
        mesh = build_rect_mesh(nx, ny, self.box, pattern=pattern)
        if self.face_tags:
            mesh = mesh.retag_boundary(self.face_tags)
        return mesh

    def build_dofmaps(self, mesh):
        """DofMaps for the solve space and the projection space.

        The solve space carries the full Dirichlet data; the projection
        space constrains only the boundary-normal velocity component, so
        tangential values relax in projection steps.  On fully periodic
        domains the two coincide.
        """
        periodic = build_periodic_map(mesh, self.periodic_axes) \
            if self.periodic_axes else None
        scalar_bc = self.transport.scalar_bc if self.transport else None
        dofmap = build_taylor_hood(mesh, bc=dict(self.bc), periodic=periodic,
                                   scalar_bc=scalar_bc)
        if self.pin_nodes is not None:
            _pin_zero_velocity(dofmap, self.pin_nodes)
        if not self.bc:
            return dofmap, dofmap, periodic
        bc_proj = {tag: _normal_only(spec) for tag, spec in self.bc.items()}
        dofmap_proj = build_taylor_hood(mesh, bc=bc_proj, periodic=periodic,
                                        scalar_bc=scalar_bc)
        if self.pin_nodes is not None:
            _pin_zero_velocity(dofmap_proj, self.pin_nodes)
        return dofmap, dofmap_proj, periodic


def _normal_only(spec):
    if spec.kind == "none":
        return spec
    if spec.kind == "noslip":
        return VelocityBC("normal")
    return VelocityBC("normal", spec.value)


def _pin_zero_velocity(dofmap, mask_fn):
    """Pin both velocity components of masked nodes to zero (immersed
    obstacle on a structured mesh)."""
    coords = dofmap.node_coords()
    mask = np.asarray(mask_fn(coords[:, 0], coords[:, 1]), dtype=bool)
    for node in np.flatnonzero(mask):
        rep = int(dofmap.node_rep[node])
        dofmap.u_dirichlet[2 * rep] = 0.0
        dofmap.u_dirichlet[2 * rep + 1] = 0.0


def problem_planar_lattice(nu=4e-6):
    """Four counter-rotating periodic vortices with exponential decay.

    The exact velocity keeps the initial spatial pattern and decays like
    exp(-8 pi^2 nu t); the domain is the fully periodic unit square with
    no forcing.
    """
    two_pi = 2.0 * np.pi

    def u0(x, y):
        return (np.sin(two_pi * x) * np.sin(two_pi * y),
                np.cos(two_pi * x) * np.cos(two_pi * y))

    def decay(t):
        return np.exp(-8.0 * np.pi ** 2 * nu * t)

    def u_exact(x, y, t):
        g = decay(t)
        ux, uy = u0(x, y)
        return (g * ux, g * uy)

    def grad_exact(x, y, t):
        g = decay(t)
        s1, c1 = np.sin(two_pi * x), np.cos(two_pi * x)
        s2, c2 = np.sin(two_pi * y), np.cos(two_pi * y)
        return (g * two_pi * c1 * s2, g * two_pi * s1 * c2,
                -g * two_pi * s1 * c2, -g * two_pi * c1 * s2)

    def p_exact(x, y, t):
        g = np.exp(-16.0 * np.pi ** 2 * nu * t)
        return 0.25 * (np.cos(2 * two_pi * x) - np.cos(2 * two_pi * y)) * g

    return ProblemSpec(
        name="planar_lattice",
        box=(0.0, 1.0, 0.0, 1.0),
        periodic_axes=("x", "y"),
        face_tags={"xmin": "periodic_x", "xmax": "periodic_x",
                   "ymin": "periodic_y", "ymax": "periodic_y"},
        bc={},
        nu=nu,
        initial_velocity=u0,
        initial_pressure=lambda x, y: p_exact(x, y, 0.0),
        exact_velocity=u_exact,
        exact_velocity_grad=grad_exact,
        exact_pressure=p_exact,
        presets={
            "paper": dict(nx=48, ny=48, dt=1e-3, t_end=5.0),
            "desk": dict(nx=24, ny=24, dt=2e-3, t_end=5.0),
        })


# Gresho pressure constants from continuity: p is continuous at r = 0.2
# and vanishes identically for r > 0.4.
GRESHO_C2 = 6.0 - 4.0 * np.log(0.4)
GRESHO_C1 = GRESHO_C2 - 4.0 + 4.0 * np.log(0.2)


def problem_gresho():
    """Standing vortex: rigid core, matched ring, quiescent exterior.

    Steady solution of the inviscid equations (nu = 0, f = 0) on the
    centered unit square, standard orientation u = u_theta (-y/r, x/r)
    with u_theta = 5r, then 2 - 5r, then 0.  Published variants of this
    benchmark occasionally print sign-inconsistent middle-ring formulas;
    the fields here are the continuity-consistent standard ones.
    """

    def u0(x, y):
        r = np.hypot(x, y)
        rs = np.maximum(r, 1e-300)
        inner = r < 0.2
        ring = (r >= 0.2) & (r <= 0.4)
        utheta = np.where(inner, 5.0 * r, np.where(ring, 2.0 - 5.0 * r, 0.0))
        return (-utheta * y / rs, utheta * x / rs)

    def u_exact(x, y, t):
        return u0(x, y)

    def grad_exact(x, y, t):
        r = np.hypot(x, y)
        rs = np.maximum(r, 1e-300)
        r3 = rs ** 3
        inner = r < 0.2
        ring = (r >= 0.2) & (r <= 0.4)
        zeros = np.zeros_like(rs)
        # inner: u = (-5y, 5x)
        # ring:  u = (-2y/r + 5y, 2x/r - 5x)
        dudx = np.where(ring, 2.0 * x * y / r3, zeros)
        dudy = np.where(inner, -5.0,
                        np.where(ring, -2.0 / rs + 2.0 * y ** 2 / r3 + 5.0,
                                 zeros))
        dvdx = np.where(inner, 5.0,
                        np.where(ring, 2.0 / rs - 2.0 * x ** 2 / r3 - 5.0,
                                 zeros))
        dvdy = np.where(ring, -2.0 * x * y / r3, zeros)
        return (dudx, dudy, dvdx, dvdy)

    def p_exact(x, y, t):
        r = np.hypot(x, y)
        rs = np.maximum(r, 1e-300)
        inner = r < 0.2
        ring = (r >= 0.2) & (r <= 0.4)
        p_in = 12.5 * r ** 2 + GRESHO_C1
        p_ring = 12.5 * r ** 2 - 20.0 * r + 4.0 * np.log(rs) + GRESHO_C2
        return np.where(inner, p_in, np.where(ring, p_ring, 0.0))

    return ProblemSpec(
        name="gresho",
        box=(-0.5, 0.5, -0.5, 0.5),
        bc={WALL: VelocityBC("noslip")},
        nu=0.0,
        initial_velocity=u0,
        initial_pressure=lambda x, y: p_exact(x, y, 0.0),
        exact_velocity=u_exact,
        exact_velocity_grad=grad_exact,
        exact_pressure=p_exact,
        presets={
            "paper": dict(nx=48, ny=48, dt=0.01, t_end=4.0),
            "desk": dict(nx=24, ny=24, dt=0.01, t_end=2.0),
        })


@lru_cache(maxsize=8)
def _manufactured_closures(nu, amp, pamp, omega):
    import sympy

    x, y, t = sympy.symbols("x y t")
    psi = amp * sympy.cos(omega * t) * (x * (1 - x) * y * (1 - y)) ** 2
    u1 = sympy.diff(psi, y)
    u2 = -sympy.diff(psi, x)
    p = pamp * sympy.cos(omega * t) * (x ** 3 + y ** 3 - sympy.Rational(1, 2))
    f1 = (sympy.diff(u1, t) + u1 * sympy.diff(u1, x) + u2 * sympy.diff(u1, y)
          + sympy.diff(p, x) - nu * (sympy.diff(u1, x, 2) + sympy.diff(u1, y, 2)))
    f2 = (sympy.diff(u2, t) + u1 * sympy.diff(u2, x) + u2 * sympy.diff(u2, y)
          + sympy.diff(p, y) - nu * (sympy.diff(u2, x, 2) + sympy.diff(u2, y, 2)))
    args = (x, y, t)
    lam = lambda e: sympy.lambdify(args, e, "numpy")
    return {
        "u1": lam(u1), "u2": lam(u2), "p": lam(p),
        "f1": lam(sympy.simplify(f1)), "f2": lam(sympy.simplify(f2)),
        "g11": lam(sympy.diff(u1, x)), "g12": lam(sympy.diff(u1, y)),
        "g21": lam(sympy.diff(u2, x)), "g22": lam(sympy.diff(u2, y)),
    }


def problem_manufactured(nu=0.05, amp=40.0, pamp=0.5, omega=3.0):
    """Smooth manufactured solution on the no-slip unit square.

    The velocity derives from a polynomial stream function vanishing to
    second order on the boundary (exactly divergence-free, exactly
    no-slip); a time-oscillating cubic pressure and the matching forcing
    close the strong equations.  Used for temporal convergence studies.
    """
    c = _manufactured_closures(float(nu), float(amp), float(pamp), float(omega))

    def u_exact(x, y, t):
        return (c["u1"](x, y, t), c["u2"](x, y, t))

    def grad_exact(x, y, t):
        return (c["g11"](x, y, t), c["g12"](x, y, t),
                c["g21"](x, y, t), c["g22"](x, y, t))

    def p_exact(x, y, t):
        return c["p"](x, y, t)

    def forcing(x, y, t):
        return (c["f1"](x, y, t), c["f2"](x, y, t))

    return ProblemSpec(
        name="manufactured",
        box=(0.0, 1.0, 0.0, 1.0),
        bc={WALL: VelocityBC("noslip")},
        nu=nu,
        initial_velocity=lambda x, y: u_exact(x, y, 0.0),
        initial_pressure=lambda x, y: p_exact(x, y, 0.0),
        exact_velocity=u_exact,
        exact_velocity_grad=grad_exact,
        exact_pressure=p_exact,
        forcing=forcing,
        presets={
            "paper": dict(nx=32, ny=32, dt=0.025, t_end=1.0),
            "desk": dict(nx=32, ny=32, dt=0.1, t_end=1.0),
        })


CHANNEL_OBSTACLE = (1.0, 0.5, 0.12)
CHANNEL_BLOBS = ((0.4, 0.3, 0.12), (0.4, 0.7, 0.12))


def problem_channel_transport(nu=0.01, eps=1e-3):
    """Channel with an immersed circular obstacle and contaminant blobs.

    Parabolic unit inflow on the left, do-nothing outflow on the right,
    no-slip walls, grad-div stabilization, and a passive contaminant
    (two unit-value disks) advected with diffusivity ``eps``.  The
    obstacle is realized by pinning all velocity nodes inside the disk,
    staircase-accurate on the structured mesh.  No exact solution; this
    is a qualitative smoke-test configuration.
    """

    def inflow(x, y):
        return (4.0 * y * (1.0 - y), 0.0 * y)

    cx, cy, cr = CHANNEL_OBSTACLE

    def pin(x, y):
        return (x - cx) ** 2 + (y - cy) ** 2 < cr ** 2

    def blob_init(x, y):
        c = np.zeros_like(np.asarray(x, dtype=float))
        for bx, by, br in CHANNEL_BLOBS:
            c = np.where((x - bx) ** 2 + (y - by) ** 2 < br ** 2, 1.0, c)
        return c

    analytic_mass = sum(np.pi * br ** 2 for _, _, br in CHANNEL_BLOBS)
    transport = TransportSpec(initial=blob_init, eps=eps,
                              scalar_bc={INFLOW: 0.0},
                              analytic_mass=analytic_mass)

    return ProblemSpec(
        name="channel_transport",
        box=(0.0, 2.0, 0.0, 1.0),
        face_tags={"xmin": INFLOW, "xmax": OUTFLOW},
        bc={WALL: VelocityBC("noslip"),
            INFLOW: VelocityBC("value", inflow),
            OUTFLOW: VelocityBC("none")},
        nu=nu,
        grad_div_gamma=1.0,
        initial_kind="stokes",
        transport=transport,
        pin_nodes=pin,
        presets={
            "paper": dict(nx=96, ny=48, dt=0.01, t_end=2.0),
            "desk": dict(nx=64, ny=32, dt=0.01, t_end=0.5),
        })


def get_problem(name, nu=None):
    """Problem factory by name; ``nu`` overrides the default viscosity."""
    if name == "planar_lattice":
        return problem_planar_lattice() if nu is None else problem_planar_lattice(nu)
    if name == "gresho":
        if nu not in (None, 0.0):
            raise ValueError("the standing-vortex problem is inviscid")
        return problem_gresho()
    if name == "manufactured":
        return problem_manufactured() if nu is None else problem_manufactured(nu)
    if name == "channel_transport":
        return problem_channel_transport() if nu is None \
            else problem_channel_transport(nu)
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")
