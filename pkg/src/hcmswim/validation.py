"""
Self-checks of the flow solver and the boundary coupling.

Each suite returns a :class:`ValidationResult` with the measured quantity,
the threshold it is held to, and whether it passed.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import fluid, ib


@dataclass
class ValidationResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    details: dict = field(default_factory=dict)
    seconds: float = 0.0


def _taylor_green_run(n, Re, t_end, k=1.0):
    size = 2 * math.pi / k
    g = fluid.make_grid(n, n, size, size, periodic=True)
    xu, yu = g.u_coords()
    xv, yv = g.v_coords()
    s = fluid.zero_state(g, Re)
    u0 = np.sin(k * xu) * np.cos(k * yu)
    v0 = -np.cos(k * xv) * np.sin(k * yv)
    s.u, s.v = u0.copy(), v0.copy()
    steps = int(math.ceil(t_end / (0.25 * g.h)))
    dt = t_end / steps
    cfg = fluid.SolverConfig()
    for _ in range(steps):
        s = fluid.step(s, g, cfg, dt)
    decay = math.exp(-2 * k * k * t_end / Re)
    err = math.sqrt(g.h**2 * (np.sum((s.u - u0 * decay) ** 2) + np.sum((s.v - v0 * decay) ** 2)))
    amp = float(np.sum(s.u * u0) / np.sum(u0 * u0))
    return err, amp / decay - 1.0, float(np.max(np.abs(fluid.divergence(s, g))))


def taylor_green(n_coarse=64, Re=10.0):
    """Refinement study of the decaying Taylor-Green vortex over one period.

    Passes when the L2 error drops by at least 3.5 from ``n`` to ``2n`` and
    the fitted amplitude is within 1 % of ``exp(-2 k^2 t / Re)`` on both grids.
    """
    t0 = time.perf_counter()
    t_end = 2 * math.pi
    e1, a1, d1 = _taylor_green_run(n_coarse, Re, t_end)
    e2, a2, d2 = _taylor_green_run(2 * n_coarse, Re, t_end)
    ratio = e1 / e2
    ok = ratio >= 3.5 and abs(a1) <= 0.01 and abs(a2) <= 0.01
    details = {"error_coarse": e1, "error_fine": e2, "amplitude_error_coarse": a1, "amplitude_error_fine": a2, "max_divergence": max(d1, d2)}
    return ValidationResult("taylor_green", ok, ratio, 3.5, details, time.perf_counter() - t0)


def cavity_energy(n=64, Re=100.0, forced_steps=40, free_steps=200):
    """Kinetic energy of a closed box must not grow once stirring stops."""
    t0 = time.perf_counter()
    g = fluid.make_grid(n, n, 1.0, 1.0)
    xu, yu = g.u_coords()
    xv, yv = g.v_coords()
    fu = np.sin(np.pi * xu) ** 2 * np.sin(2 * np.pi * yu)
    fv = -np.sin(2 * np.pi * xv) * np.sin(np.pi * yv) ** 2
    s = fluid.zero_state(g, Re)
    cfg = fluid.SolverConfig()
    dt = 0.25 * g.h
    for _ in range(forced_steps):
        s = fluid.step(s, g, cfg, dt, (fu, fv))
    energy = [fluid.kinetic_energy(s, g)]
    for _ in range(free_steps):
        s = fluid.step(s, g, cfg, dt)
        energy.append(fluid.kinetic_energy(s, g))
    e = np.array(energy)
    growth = float(np.max(np.diff(e) / e[:-1]))
    ok = bool(growth <= 1e-12 and e[-1] < e[0])
    details = {"initial_energy": float(e[0]), "final_energy": float(e[-1])}
    return ValidationResult("cavity_energy", ok, growth, 1e-12, details, time.perf_counter() - t0)


def ib_equilibrium(n=64, steps=10, theta=0.3):
    """A link held still in still fluid must feel no force."""
    t0 = time.perf_counter()
    g = fluid.make_grid(n, n, 5.0, 5.0)
    link = ib.build_link(1.0, (2.5, 2.5), g)
    s = fluid.zero_state(g, 100.0)
    cfg = fluid.SolverConfig()
    X, U = ib.link_kinematics(link, theta, 0.0)
    worst = 0.0
    for _ in range(steps):
        s, mf = ib.ib_solve(s, g, cfg, link, X, U, 0.01)
        worst = max(worst, float(np.max(np.abs(mf.forces))))
    return ValidationResult("ib_equilibrium", worst <= 1e-8, worst, 1e-8, {}, time.perf_counter() - t0)


SUITES = {"taylor_green": taylor_green, "cavity_energy": cavity_energy, "ib_equilibrium": ib_equilibrium}


def run_suite(name):
    return SUITES[name]()
