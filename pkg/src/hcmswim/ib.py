"""
Rigid swinging link coupled to the fluid by the immersed boundary method.

The link is a zero-thickness chain of Lagrangian markers hinged at a fixed
pivot. Boundary forces are Lagrange multipliers for the no-slip constraint:
they are solved together with the pressure projection so that the projected
velocity, interpolated at every marker, equals the prescribed marker
velocity. Transfer between markers and faces uses a regularised delta kernel
(4-point cosine by default).

Sign conventions
    ``MarkerForces.forces`` is the force of the fluid on the body. Thrust is
    ``-sum(f . swim_axis)``: positive when the link pushes fluid out along the
    swim axis (towards its tip), i.e. when the body is propelled towards its
    head. Torque is the actuator effort ``sum(cross(X - pivot, -f))``,
    positive counter-clockwise.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from . import fluid
from .errors import ConfigurationError, GeometryError, SolverDivergenceError


def peskin4(r):
    """Peskin's 4-point cosine kernel, support ``|r| < 2``."""
    r = np.abs(r)
    return np.where(r < 2.0, 0.25 * (1.0 + np.cos(0.5 * np.pi * r)), 0.0)


def roma3(r):
    """3-point kernel of Roma et al., support ``|r| <= 1.5``."""
    r = np.abs(r)
    inner = (1.0 + np.sqrt(np.maximum(1.0 - 3.0 * r**2, 0.0))) / 3.0
    outer = (5.0 - 3.0 * r - np.sqrt(np.maximum(1.0 - 3.0 * (1.0 - r) ** 2, 0.0))) / 6.0
    return np.where(r <= 0.5, inner, np.where(r <= 1.5, outer, 0.0))


KERNELS = {"peskin4": peskin4, "roma3": roma3}


@dataclass(frozen=True)
class LinkBody:
    length: float
    pivot: np.ndarray
    n_markers: int
    arclengths: np.ndarray
    swim_axis: np.ndarray

    @property
    def ds(self):
        return self.length / (self.n_markers - 1)


@dataclass
class MarkerForces:
    forces: np.ndarray  # (n, 2), fluid on body, per marker
    positions: np.ndarray  # (n, 2)
    slip_residual: float = 0.0  # max |interpolated u - U_k| after the solve
    iterations: int = 0


@dataclass(frozen=True)
class CouplingConfig:
    kernel: str = "peskin4"
    slip_tol: float = 1e-6  # CG target on the marker slip velocity
    slip_max: float = 1e-3  # hard bound; larger slip after max_iter is an error
    max_iter: int = 500

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}, expected one of {sorted(KERNELS)}", "kernel")
        if not self.slip_tol > 0:
            raise ConfigurationError("must be positive", "slip_tol")


def build_link(length, pivot, grid, swim_axis=(1.0, 0.0)):
    """Place ``n`` evenly spaced markers so that the spacing is close to ``h``.

    The pivot must keep a full sweep of the link at least one link length
    away from every wall.
    """
    if not length > 0:
        raise ConfigurationError("link length must be positive", "L")
    pivot = np.asarray(pivot, dtype=float)
    axis = np.asarray(swim_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    reach = 2.0 * length
    px, py = pivot
    if min(px, py, grid.domain_width - px, grid.domain_height - py) < reach:
        raise ConfigurationError(
            f"link sweep of radius {length:g} at pivot ({px:g}, {py:g}) leaves less than one link length to a wall",
            "pivot",
        )
    n = int(round(length / grid.h)) + 1
    n = max(n, 2)
    ds = length / (n - 1)
    if not 0.5 * grid.h <= ds <= 1.5 * grid.h:
        raise ConfigurationError(f"marker spacing {ds:g} incompatible with h={grid.h:g}", "n_markers")
    r = np.linspace(0.0, length, n)
    return LinkBody(float(length), pivot, n, r, axis)


def link_kinematics(link, theta, omega):
    """Marker positions and velocities for link angle ``theta`` (from the swim axis)."""
    c, s = np.cos(theta), np.sin(theta)
    ax, ay = link.swim_axis
    d = np.array([c * ax - s * ay, s * ax + c * ay])
    perp = np.array([-d[1], d[0]])
    X = link.pivot[None, :] + link.arclengths[:, None] * d[None, :]
    U = omega * link.arclengths[:, None] * perp[None, :]
    return X, U


# ----------------------------------------------------------------------------
# transfer operators
# ----------------------------------------------------------------------------

def _component_matrix(X, origin, shape, h, kernel, periodic):
    """Sparse interpolation matrix from one face array to the markers."""
    n = X.shape[0]
    sx = (X[:, 0] - origin[0]) / h
    sy = (X[:, 1] - origin[1]) / h
    offs = np.arange(-1, 3)
    ix = np.floor(sx).astype(int)[:, None] + offs[None, :]  # (n, 4)
    iy = np.floor(sy).astype(int)[:, None] + offs[None, :]
    wx = kernel(sx[:, None] - ix)
    wy = kernel(sy[:, None] - iy)
    mx, my = shape
    if periodic:
        ix %= mx
        iy %= my
    elif ix.min() < 0 or iy.min() < 0 or ix.max() >= mx or iy.max() >= my:
        raise GeometryError("marker kernel support leaves the fluid domain")
    cols = (ix[:, :, None] * my + iy[:, None, :]).reshape(n, 16)
    data = (wx[:, :, None] * wy[:, None, :]).reshape(n, 16)
    rows = np.repeat(np.arange(n), 16)
    return sp.csr_matrix((data.ravel(), (rows, cols.ravel())), shape=(n, mx * my))


@lru_cache(maxsize=8)
def _divergence_matrices(grid):
    """Sparse cell-by-face divergence operators ``(D_u, D_v)``."""
    nx, ny, h = grid.nx, grid.ny, grid.h
    cells = np.arange(nx * ny).reshape(nx, ny)
    mx, my = grid.u_shape
    fi, fj = np.meshgrid(np.arange(mx), np.arange(my), indexing="ij")
    if grid.periodic:
        left, right = cells[(fi - 1) % nx, fj], cells[fi, fj]
        rows = np.concatenate([left.ravel(), right.ravel()])
        cols = np.concatenate([(fi * my + fj).ravel()] * 2)
        vals = np.concatenate([np.full(left.size, 1.0 / h), np.full(right.size, -1.0 / h)])
    else:
        inner = (fi >= 1) & (fi <= nx - 1)
        fi, fj = fi[inner], fj[inner]
        rows = np.concatenate([cells[fi - 1, fj], cells[fi, fj]])
        cols = np.concatenate([fi * my + fj] * 2)
        vals = np.concatenate([np.full(fi.size, 1.0 / h), np.full(fi.size, -1.0 / h)])
    Du = sp.csr_matrix((vals, (rows, cols)), shape=(nx * ny, mx * my))
    mx, my = grid.v_shape
    fi, fj = np.meshgrid(np.arange(mx), np.arange(my), indexing="ij")
    if grid.periodic:
        low, high = cells[fi, (fj - 1) % ny], cells[fi, fj]
        rows = np.concatenate([low.ravel(), high.ravel()])
        cols = np.concatenate([(fi * my + fj).ravel()] * 2)
        vals = np.concatenate([np.full(low.size, 1.0 / h), np.full(high.size, -1.0 / h)])
    else:
        inner = (fj >= 1) & (fj <= ny - 1)
        fi, fj = fi[inner], fj[inner]
        rows = np.concatenate([cells[fi, fj - 1], cells[fi, fj]])
        cols = np.concatenate([fi * my + fj] * 2)
        vals = np.concatenate([np.full(fi.size, 1.0 / h), np.full(fi.size, -1.0 / h)])
    Dv = sp.csr_matrix((vals, (rows, cols)), shape=(nx * ny, mx * my))
    return Du, Dv


@lru_cache(maxsize=8)
def _green_column(grid, i0, j0):
    """Response of the pressure Poisson solver to a unit source in cell ``(i0, j0)``."""
    src = np.zeros((grid.nx, grid.ny))
    src[i0, j0] = 1.0
    g = fluid.solve_poisson(src, grid)
    g.setflags(write=False)
    return g


class Transfer:
    """Interpolation ``E`` and spreading ``S = E^T / h^2`` for one marker set.

    ``spread`` takes per-marker forces and returns a force density on the
    faces, so ``h^2 <spread(F), u> = <F, interp(u)>`` holds exactly. Also
    carries ``B = D S``, the divergence of a spread force, which is all the
    pressure projection needs to see of the markers.
    """

    def __init__(self, X, grid, kernel="peskin4"):
        k = KERNELS[kernel]
        self.grid = grid
        self.n = X.shape[0]
        self.Eu = _component_matrix(X, grid.u_origin, grid.u_shape, grid.h, k, grid.periodic)
        self.Ev = _component_matrix(X, grid.v_origin, grid.v_shape, grid.h, k, grid.periodic)
        self.EuT = self.Eu.T.tocsr()
        self.EvT = self.Ev.T.tocsr()
        Du, Dv = _divergence_matrices(grid)
        h2 = grid.h**2
        # columns 0..n-1 act on x forces, n..2n-1 on y forces
        self.B = sp.hstack([Du @ self.EuT, Dv @ self.EvT]).tocsr() / h2
        self.BT = self.B.T.tocsr()

    def interp(self, u, v):
        return np.column_stack((self.Eu @ u.ravel(), self.Ev @ v.ravel()))

    def spread(self, F):
        h2 = self.grid.h**2
        fu = (self.EuT @ F[:, 0]).reshape(self.grid.u_shape) / h2
        fv = (self.EvT @ F[:, 1]).reshape(self.grid.v_shape) / h2
        return fu, fv

    def local_matrix(self):
        """``E S`` as a dense ``2n x 2n`` matrix (block diagonal)."""
        n, h2 = self.n, self.grid.h**2
        M = np.zeros((2 * n, 2 * n))
        M[:n, :n] = (self.Eu @ self.EuT).toarray() / h2
        M[n:, n:] = (self.Ev @ self.EvT).toarray() / h2
        return M

    def projected_matrix(self, pivot_cell):
        """Approximation of ``E P S`` used as preconditioner.

        The Poisson inverse between two support cells is taken from the
        Green's function of a source at ``pivot_cell``, shifted by the cell
        offset. This is exact for a periodic box and accurate in the interior
        of a closed box.
        """
        grid = self.grid
        g = _green_column(grid, *pivot_cell)
        B = self.B.tocsc()
        support = np.unique(B.indices)
        Bs = B[support].toarray()
        ia, ja = np.divmod(support, grid.ny)
        di = pivot_cell[0] + (ia[:, None] - ia[None, :])
        dj = pivot_cell[1] + (ja[:, None] - ja[None, :])
        if grid.periodic:
            di %= grid.nx
            dj %= grid.ny
        G = g[di, dj]
        K = self.local_matrix() + grid.h**2 * (Bs.T @ (G @ Bs))
        return 0.5 * (K + K.T)


def ib_solve(state, grid, cfg, link, X, U, dt, coupling=None, guess=None):
    """Advance fluid and link by one coupled step.

    Solves for per-marker forces ``F`` (body on fluid) such that::

        u_new = P(u_star + dt * spread(F)),   interp(u_new) = U

    with ``P`` the exact discrete projection and ``u_star`` the momentum
    predictor. Writing ``P = I - G L^-1 D`` gives the reduced system::

        (E S + h^2 B^T L^-1 B) F = (U - E P u_star) / dt,   B = D S

    which is symmetric positive semi-definite and solved by conjugate
    gradients. Each iteration costs one Poisson solve; the preconditioner is
    the same matrix with a translated Green's function in place of ``L^-1``.

    Parameters
    ----------
    guess : array_like, optional
        Starting forces (body on fluid), e.g. the previous step's solution.

    Returns
    -------
    FluidState, MarkerForces
    """
    coupling = coupling or CouplingConfig()
    us, vs, au, av = fluid.predict(state, grid, cfg, dt)
    u1, v1, phi1 = fluid.project(us, vs, grid, check_tol=cfg.poisson_rel_tol)
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    n = X.shape[0]
    T = Transfer(X, grid, coupling.kernel)
    rhs = ((U - T.interp(u1, v1)) / dt).T.ravel()  # [Fx..., Fy...]

    h2 = grid.h**2
    M = T.local_matrix()
    pivot_cell = (
        min(max(int(link.pivot[0] / grid.h), 0), grid.nx - 1),
        min(max(int(link.pivot[1] / grid.h), 0), grid.ny - 1),
    )
    prec = cho_factor(T.projected_matrix(pivot_cell))
    shape = (grid.nx, grid.ny)

    def apply_q(f):
        phi = fluid.solve_poisson((T.B @ f).reshape(shape), grid)
        return M @ f + h2 * (T.BT @ phi.ravel()), phi

    tol = coupling.slip_tol / dt
    f = np.zeros(2 * n) if guess is None else -np.asarray(guess, dtype=float).T.ravel()
    Phi = np.zeros(shape)
    r = rhs.copy()
    if np.any(f):
        q, Phi = apply_q(f)
        r = rhs - q
    it = 0
    if np.max(np.abs(r)) > tol:
        z = cho_solve(prec, r)
        p = z.copy()
        rz = r @ z
        while it < coupling.max_iter:
            q, phi = apply_q(p)
            pq = p @ q
            if not pq > 0.0:
                break
            alpha = rz / pq
            f += alpha * p
            Phi += alpha * phi
            r -= alpha * q
            it += 1
            if np.max(np.abs(r)) <= tol:
                break
            z = cho_solve(prec, r)
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new

    F = f.reshape(2, n).T
    fu, fv = T.spread(F)
    gx, gy = fluid._grad(Phi, grid)
    u = u1 + dt * (fu - gx)
    v = v1 + dt * (fv - gy)
    slip = float(np.max(np.abs(T.interp(u, v) - U), initial=0.0))
    if slip > coupling.slip_max:
        raise SolverDivergenceError("immersed-boundary coupling did not converge", slip)
    new = replace(state, u=u, v=v, p=(phi1 + dt * Phi) / dt, t=state.t + dt, adv_u=au, adv_v=av)
    fluid._check_finite(new)
    # the solved F acts on the fluid; report the reaction on the body
    return new, MarkerForces(-F, X.copy(), slip, it)


def net_thrust(forces, swim_axis):
    """Thrust per unit depth from fluid-on-body marker forces."""
    f = forces.forces if isinstance(forces, MarkerForces) else np.asarray(forces, dtype=float)
    return float(-np.sum(f @ np.asarray(swim_axis, dtype=float)))


def net_lateral(forces, swim_axis):
    """Force component normal to the swim axis, same sign convention as thrust."""
    f = forces.forces if isinstance(forces, MarkerForces) else np.asarray(forces, dtype=float)
    ax = np.asarray(swim_axis, dtype=float)
    return float(-np.sum(f @ np.array([-ax[1], ax[0]])))


def net_torque(forces, pivot, positions=None):
    """Actuator torque about ``pivot`` balancing the fluid forces."""
    if isinstance(forces, MarkerForces):
        f, X = forces.forces, forces.positions
    else:
        f, X = np.asarray(forces, dtype=float), np.asarray(positions, dtype=float)
    r = X - np.asarray(pivot, dtype=float)[None, :]
    return float(np.sum(r[:, 0] * (-f[:, 1]) - r[:, 1] * (-f[:, 0])))
