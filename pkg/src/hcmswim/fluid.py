"""
Incompressible 2D Navier-Stokes on a staggered (MAC) grid.

Nondimensional form::

    du/dt + (u . grad) u = -grad p + lap(u) / Re + f,   div u = 0

Time integration is a fractional-step scheme: Adams-Bashforth 2 for the
advection term, Crank-Nicolson for diffusion, then an exact discrete
projection. On a uniform grid the Helmholtz and Poisson operators are
diagonalised by sine/cosine transforms (closed box) or FFTs (periodic box),
so every linear solve is direct.

Array layout uses ``[i, j]`` indexing with ``i`` along x.

Closed box (``periodic=False``)
    ``u`` has shape ``(nx + 1, ny)`` with faces at ``(i h, (j + 1/2) h)``; the
    rows ``i = 0`` and ``i = nx`` are the wall faces and stay zero.
    ``v`` has shape ``(nx, ny + 1)`` with faces at ``((i + 1/2) h, j h)``.
    Tangential no-slip is imposed with antisymmetric ghost values.

Periodic box (``periodic=True``)
    ``u`` and ``v`` both have shape ``(nx, ny)``; ``u[i, j]`` is the left face
    and ``v[i, j]`` the bottom face of cell ``(i, j)``.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, SolverDivergenceError, StepSizeError

MIN_CELLS = 16


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    domain_width: float
    domain_height: float
    h: float
    periodic: bool = False

    @property
    def u_shape(self):
        return (self.nx, self.ny) if self.periodic else (self.nx + 1, self.ny)

    @property
    def v_shape(self):
        return (self.nx, self.ny) if self.periodic else (self.nx, self.ny + 1)

    @property
    def u_origin(self):
        """Coordinates of ``u[0, 0]``."""
        return (0.0, 0.5 * self.h)

    @property
    def v_origin(self):
        return (0.5 * self.h, 0.0)

    def u_coords(self):
        x0, y0 = self.u_origin
        mx, my = self.u_shape
        return np.meshgrid(x0 + self.h * np.arange(mx), y0 + self.h * np.arange(my), indexing="ij")

    def v_coords(self):
        x0, y0 = self.v_origin
        mx, my = self.v_shape
        return np.meshgrid(x0 + self.h * np.arange(mx), y0 + self.h * np.arange(my), indexing="ij")

    def cell_coords(self):
        c = self.h * (np.arange(self.nx) + 0.5), self.h * (np.arange(self.ny) + 0.5)
        return np.meshgrid(*c, indexing="ij")

    def node_coords(self):
        mx, my = (self.nx, self.ny) if self.periodic else (self.nx + 1, self.ny + 1)
        return np.meshgrid(self.h * np.arange(mx), self.h * np.arange(my), indexing="ij")


@dataclass
class FluidState:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    t: float
    Re: float
    # advection terms of the previous step, needed by AB2
    adv_u: np.ndarray = None
    adv_v: np.ndarray = None


@dataclass(frozen=True)
class SolverConfig:
    cfl_max: float = 0.5
    poisson_rel_tol: float = 1e-8
    poisson_max_iter: int = 500
    diffusion_scheme: str = "crank_nicolson"
    advection_scheme: str = "adams_bashforth2"

    def __post_init__(self):
        if not 0.0 < self.cfl_max <= 1.0:
            raise ConfigurationError("must lie in (0, 1]", "cfl_max")
        if not self.poisson_rel_tol > 0.0:
            raise ConfigurationError("must be positive", "poisson_rel_tol")
        if self.poisson_max_iter < 1:
            raise ConfigurationError("must be at least 1", "poisson_max_iter")
        if self.diffusion_scheme != "crank_nicolson":
            raise ConfigurationError(f"unsupported scheme {self.diffusion_scheme!r}", "diffusion_scheme")
        if self.advection_scheme != "adams_bashforth2":
            raise ConfigurationError(f"unsupported scheme {self.advection_scheme!r}", "advection_scheme")


def make_grid(nx, ny, domain_width, domain_height, periodic=False):
    """Build a uniform grid of square cells."""
    if nx < MIN_CELLS or ny < MIN_CELLS:
        raise ConfigurationError(f"grid must have at least {MIN_CELLS} cells per direction, got {nx}x{ny}", "nx/ny")
    if not (domain_width > 0 and domain_height > 0):
        raise ConfigurationError("domain sizes must be positive", "domain_width/domain_height")
    hx = domain_width / nx
    hy = domain_height / ny
    if abs(hx - hy) > 1e-12 * max(hx, hy):
        raise ConfigurationError(f"cells are not square (hx={hx:g}, hy={hy:g})", "domain_width/domain_height")
    return Grid(int(nx), int(ny), float(domain_width), float(domain_height), hx, bool(periodic))


def zero_state(grid, Re):
    return FluidState(np.zeros(grid.u_shape), np.zeros(grid.v_shape), np.zeros((grid.nx, grid.ny)), 0.0, float(Re))


# ----------------------------------------------------------------------------
# discrete operators
# ----------------------------------------------------------------------------

def _ghost_u(u):
    """Pad ``u`` in y with no-slip ghost rows (closed box)."""
    up = np.empty((u.shape[0], u.shape[1] + 2))
    up[:, 1:-1] = u
    up[:, 0] = -u[:, 0]
    up[:, -1] = -u[:, -1]
    return up


def _ghost_v(v):
    vp = np.empty((v.shape[0] + 2, v.shape[1]))
    vp[1:-1] = v
    vp[0] = -v[0]
    vp[-1] = -v[-1]
    return vp


def divergence(state, grid):
    """Cell-centred discrete divergence."""
    return _div(state.u, state.v, grid)


def _div(u, v, grid):
    h = grid.h
    if grid.periodic:
        return (np.roll(u, -1, 0) - u + np.roll(v, -1, 1) - v) / h
    return (u[1:] - u[:-1] + v[:, 1:] - v[:, :-1]) / h


def _grad(phi, grid):
    h = grid.h
    if grid.periodic:
        return (phi - np.roll(phi, 1, 0)) / h, (phi - np.roll(phi, 1, 1)) / h
    gx = np.zeros(grid.u_shape)
    gy = np.zeros(grid.v_shape)
    gx[1:-1] = (phi[1:] - phi[:-1]) / h
    gy[:, 1:-1] = (phi[:, 1:] - phi[:, :-1]) / h
    return gx, gy


def laplacian(u, v, grid):
    """Vector Laplacian of the face velocities (zero on wall faces)."""
    h2 = grid.h**2
    if grid.periodic:
        lu = (np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1) - 4 * u) / h2
        lv = (np.roll(v, 1, 0) + np.roll(v, -1, 0) + np.roll(v, 1, 1) + np.roll(v, -1, 1) - 4 * v) / h2
        return lu, lv
    up = _ghost_u(u)
    lu = np.zeros_like(u)
    lu[1:-1] = (u[2:] + u[:-2] + up[1:-1, 2:] + up[1:-1, :-2] - 4 * u[1:-1]) / h2
    vp = _ghost_v(v)
    lv = np.zeros_like(v)
    lv[:, 1:-1] = (v[:, 2:] + v[:, :-2] + vp[2:, 1:-1] + vp[:-2, 1:-1] - 4 * v[:, 1:-1]) / h2
    return lu, lv


def advection(u, v, grid):
    """Conservative central advection ``div(u u)`` at the faces.

    This is the energy-conserving MAC discretisation for divergence-free
    fields. Wall faces get zero.
    """
    h = grid.h
    if grid.periodic:
        uc = 0.5 * (u + np.roll(u, -1, 0))
        vc = 0.5 * (v + np.roll(v, -1, 1))
        # node (i, j) sits at the bottom-left corner of cell (i, j)
        un = 0.5 * (u + np.roll(u, 1, 1))
        vn = 0.5 * (v + np.roll(v, 1, 0))
        uv = un * vn
        au = (uc**2 - np.roll(uc**2, 1, 0) + np.roll(uv, -1, 1) - uv) / h
        av = (vc**2 - np.roll(vc**2, 1, 1) + np.roll(uv, -1, 0) - uv) / h
        return au, av
    uc = 0.5 * (u[1:] + u[:-1])
    vc = 0.5 * (v[:, 1:] + v[:, :-1])
    up = _ghost_u(u)
    vp = _ghost_v(v)
    uv = 0.5 * (up[:, 1:] + up[:, :-1]) * 0.5 * (vp[1:] + vp[:-1])  # (nx+1, ny+1) nodes
    au = np.zeros_like(u)
    av = np.zeros_like(v)
    au[1:-1] = (uc[1:] ** 2 - uc[:-1] ** 2 + uv[1:-1, 1:] - uv[1:-1, :-1]) / h
    av[:, 1:-1] = (vc[:, 1:] ** 2 - vc[:, :-1] ** 2 + uv[1:, 1:-1] - uv[:-1, 1:-1]) / h
    return au, av


def vorticity(state, grid):
    """Node-centred vorticity ``dv/dx - du/dy``.

    Closed box: shape ``(nx + 1, ny + 1)``, wall nodes use the ghost values.
    Periodic: shape ``(nx, ny)``.
    """
    h = grid.h
    u, v = state.u, state.v
    if grid.periodic:
        return (v - np.roll(v, 1, 0)) / h - (u - np.roll(u, 1, 1)) / h
    up = _ghost_u(u)
    vp = _ghost_v(v)
    return (vp[1:] - vp[:-1]) / h - (up[:, 1:] - up[:, :-1]) / h


def cell_vorticity(state, grid):
    """Vorticity averaged from the four corners onto cell centres, ``(nx, ny)``."""
    w = vorticity(state, grid)
    if grid.periodic:
        w = np.pad(w, ((0, 1), (0, 1)), mode="wrap")
    return 0.25 * (w[1:, 1:] + w[:-1, 1:] + w[1:, :-1] + w[:-1, :-1])


def kinetic_energy(state, grid):
    return 0.5 * grid.h**2 * (np.sum(state.u**2) + np.sum(state.v**2))


def cfl_number(u, v, grid, dt):
    umax = max(np.max(np.abs(u), initial=0.0), np.max(np.abs(v), initial=0.0))
    return umax * dt / grid.h


# ----------------------------------------------------------------------------
# fast direct solvers
# ----------------------------------------------------------------------------

def _eig(n, kind, h):
    """1D Laplacian eigenvalues for the transform matching ``kind``."""
    if kind == "dst1":  # Dirichlet on face points, n - 1 unknowns
        k = np.arange(1, n)
        return -(2 - 2 * np.cos(np.pi * k / n)) / h**2
    if kind == "dst2":  # Dirichlet half a cell outside the first/last unknown
        k = np.arange(1, n + 1)
        return -(2 - 2 * np.cos(np.pi * k / n)) / h**2
    if kind == "dct2":  # homogeneous Neumann, cell centred
        k = np.arange(n)
        return -(2 - 2 * np.cos(np.pi * k / n)) / h**2
    if kind == "fft":
        k = np.arange(n)
        return -(2 - 2 * np.cos(2 * np.pi * k / n)) / h**2
    raise ValueError(kind)


_FWD = {
    "dst1": lambda a, ax: sfft.dst(a, type=1, axis=ax, norm="ortho"),
    "dst2": lambda a, ax: sfft.dst(a, type=2, axis=ax, norm="ortho"),
    "dct2": lambda a, ax: sfft.dct(a, type=2, axis=ax, norm="ortho"),
}
_INV = {
    "dst1": lambda a, ax: sfft.idst(a, type=1, axis=ax, norm="ortho"),
    "dst2": lambda a, ax: sfft.idst(a, type=2, axis=ax, norm="ortho"),
    "dct2": lambda a, ax: sfft.idct(a, type=2, axis=ax, norm="ortho"),
}

_U_KINDS = ("dst1", "dst2")
_V_KINDS = ("dst2", "dst1")
_P_KINDS = ("dct2", "dct2")


@lru_cache(maxsize=32)
def _eig2d(grid, kinds):
    if grid.periodic:
        lx = _eig(grid.nx, "fft", grid.h)
        ly = _eig(grid.ny, "fft", grid.h)[: grid.ny // 2 + 1]
    else:
        nxs = {"dst1": grid.nx, "dst2": grid.nx, "dct2": grid.nx}
        nys = {"dst1": grid.ny, "dst2": grid.ny, "dct2": grid.ny}
        lx = _eig(nxs[kinds[0]], kinds[0], grid.h)
        ly = _eig(nys[kinds[1]], kinds[1], grid.h)
    return lx[:, None] + ly[None, :]


def _transform_solve(rhs, grid, kinds, scale):
    """Solve ``scale(lambda) * x = rhs`` in the transform basis."""
    lam = _eig2d(grid, kinds)
    if grid.periodic:
        r = sfft.rfft2(rhs)
        return sfft.irfft2(r / scale(lam), s=rhs.shape)
    r = _FWD[kinds[1]](_FWD[kinds[0]](rhs, 0), 1)
    return _INV[kinds[0]](_INV[kinds[1]](r / scale(lam), 1), 0)


def solve_helmholtz(ru, rv, grid, a):
    """Solve ``(I - a lap) x = r`` for each velocity component."""
    scale = lambda lam: 1.0 - a * lam  # noqa: E731
    if grid.periodic:
        return _transform_solve(ru, grid, None, scale), _transform_solve(rv, grid, None, scale)
    xu = np.zeros_like(ru)
    xv = np.zeros_like(rv)
    xu[1:-1] = _transform_solve(ru[1:-1], grid, _U_KINDS, scale)
    xv[:, 1:-1] = _transform_solve(rv[:, 1:-1], grid, _V_KINDS, scale)
    return xu, xv


def _poisson_scale(lam):
    out = lam.copy()
    out.flat[0] = 1.0  # constant mode is the pressure gauge
    return out


def solve_poisson(rhs, grid):
    """Zero-mean solution of ``lap(phi) = rhs`` with Neumann or periodic BCs."""
    r = rhs - rhs.mean()
    if grid.periodic:
        lam = _eig2d(grid, None)
        rh = sfft.rfft2(r)
        rh /= _poisson_scale(lam)
        rh.flat[0] = 0.0
        return sfft.irfft2(rh, s=r.shape)
    lam = _eig2d(grid, _P_KINDS)
    rh = sfft.dct(sfft.dct(r, type=2, axis=0, norm="ortho"), type=2, axis=1, norm="ortho")
    rh /= _poisson_scale(lam)
    rh[0, 0] = 0.0
    return sfft.idct(sfft.idct(rh, type=2, axis=1, norm="ortho"), type=2, axis=0, norm="ortho")


def pressure_laplacian(phi, grid):
    """``div(grad(phi))``, the operator inverted by :func:`solve_poisson`."""
    gx, gy = _grad(phi, grid)
    return _div(gx, gy, grid)


def project(u, v, grid, check_tol=None):
    """Remove the discrete gradient part of ``(u, v)``.

    Returns the divergence-free velocity and the potential ``phi`` such that
    ``u_new = u - grad(phi)``. When ``check_tol`` is given the Poisson
    residual is verified against it.
    """
    d = _div(u, v, grid)
    phi = solve_poisson(d, grid)
    if check_tol is not None:
        dn = np.linalg.norm(d - d.mean())
        if dn > 0.0:
            res = np.linalg.norm(pressure_laplacian(phi, grid) - (d - d.mean())) / dn
            if not res <= check_tol:
                raise SolverDivergenceError("pressure Poisson solve missed its tolerance", res)
    gx, gy = _grad(phi, grid)
    return u - gx, v - gy, phi


# ----------------------------------------------------------------------------
# time stepping
# ----------------------------------------------------------------------------

def predict(state, grid, cfg, dt, body_force=None):
    """Momentum predictor: AB2 advection + CN diffusion, no pressure.

    Returns ``(u_star, v_star, adv_u, adv_v)``. On the first step (no
    advection history) a forward-Euler advection term is used.
    """
    cfl = cfl_number(state.u, state.v, grid, dt)
    if cfl > cfg.cfl_max:
        raise StepSizeError(f"CFL {cfl:.3f} exceeds cfl_max={cfg.cfl_max}", cfl)
    au, av = advection(state.u, state.v, grid)
    if state.adv_u is None:
        nu_, nv_ = au, av
    else:
        nu_ = 1.5 * au - 0.5 * state.adv_u
        nv_ = 1.5 * av - 0.5 * state.adv_v
    a = 0.5 * dt / state.Re
    lu, lv = laplacian(state.u, state.v, grid)
    ru = state.u + a * lu - dt * nu_
    rv = state.v + a * lv - dt * nv_
    if body_force is not None:
        ru = ru + dt * body_force[0]
        rv = rv + dt * body_force[1]
    if not grid.periodic:
        ru[0] = ru[-1] = 0.0
        rv[:, 0] = rv[:, -1] = 0.0
    us, vs = solve_helmholtz(ru, rv, grid, a)
    return us, vs, au, av


def _check_finite(state, step=None):
    for name in ("u", "v", "p"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise SolverDivergenceError(f"non-finite values in {name}", float("inf"), step)


def step(state, grid, cfg, dt, body_force=None):
    """Advance the fluid by one time step and return the new state."""
    us, vs, au, av = predict(state, grid, cfg, dt, body_force)
    u, v, phi = project(us, vs, grid, check_tol=cfg.poisson_rel_tol)
    new = replace(state, u=u, v=v, p=phi / dt, t=state.t + dt, adv_u=au, adv_v=av)
    _check_finite(new)
    return new
