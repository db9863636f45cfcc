"""
Buckled-ribbon profile of the prestressed clip.

A thin ribbon of half length ``l`` under its critical lateral-torsional load
twists by

    phi(z) = sqrt(l - z) * A1 * J_{1/4}(0.5 * k * (l - z)**2),
    k = P_cr / sqrt(EI_eta * C) = 5.5618 / l**2,

and its lateral deflection is the running integral of ``phi``. ``A1`` sets
the overall scale and is supplied by the caller (see :func:`normalize_tip`).
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError, NumericalError

BUCKLING_COEFF = 5.5618
NU = 0.25
SERIES_LIMIT = 20.0
GAMMA_5_4 = np.longdouble("0.906402477055477077982671288967")


@dataclass(frozen=True)
class HcmBeamParams:
    """Ribbon parameters.

    Parameters
    ----------
    l : float
        Half ribbon length (m).
    EI_eta : float
        Out-of-plane bending stiffness (N m^2).
    C : float
        Torsional rigidity (N m^2).
    E : float
        Young's modulus (Pa). Informational only.
    A1 : float
        Amplitude constant (rad m^-1/2).
    """

    l: float
    EI_eta: float
    C: float
    E: float = 0.0
    A1: float = 1.0

    def __post_init__(self):
        for name in ("l", "EI_eta", "C"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"must be positive and finite, got {v}", name)
        if not math.isfinite(self.A1):
            raise ConfigurationError("must be finite", "A1")


def _series(x):
    # ascending series, stopped once the next term is below 1e-16 of the sum;
    # terms near x = 20 reach ~4e7 before cancelling, so accumulate in
    # extended precision where the platform offers it
    half = 0.5 * x.astype(np.longdouble)
    q = half * half
    term = np.full(x.shape, 1 / GAMMA_5_4, dtype=np.longdouble)
    total = term.copy()
    active = np.ones(x.shape, dtype=bool)
    k = 0
    while active.any() and k < 500:
        k += 1
        term = np.where(active, -term * q / (k * (k + NU)), 0)
        total += term
        active &= np.abs(term) > 1e-16 * np.abs(total)
    return total.astype(float) * (0.5 * x) ** NU


def _hankel(x):
    # large-argument expansion, summed until terms stop decreasing
    mu = 4.0 * NU * NU
    chi = x - (0.5 * NU + 0.25) * math.pi
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    a = np.ones_like(x)
    prev = np.full(x.shape, np.inf)
    live = np.ones(x.shape, dtype=bool)
    for k in range(1, 60):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(a)
        live &= (mag < prev) & (mag > 1e-18)
        if not live.any():
            break
        sign = (-1) ** (k // 2)
        if k % 2:
            Q = Q + np.where(live, sign * a, 0.0)
        else:
            P = P + np.where(live, sign * a, 0.0)
        prev = mag
    return np.sqrt(2.0 / (math.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def bessel_j_quarter(x):
    """Bessel function of the first kind of order 1/4.

    Uses the ascending series for ``x <= 20`` and the large-argument
    expansion above. Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("argument must be >= 0")
    flat = np.atleast_1d(arr).ravel()
    out = np.zeros_like(flat)
    small = flat <= SERIES_LIMIT
    if small.any():
        out[small] = _series(flat[small])
    if (~small).any():
        out[~small] = _hankel(flat[~small])
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def critical_load(p):
    """Critical buckling load ``5.5618 sqrt(EI_eta C) / l**2`` (N)."""
    return BUCKLING_COEFF * math.sqrt(p.EI_eta * p.C) / p.l**2


def _check_z(p, z):
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)) or np.any(z < 0) or np.any(z > p.l):
        raise DomainError(f"z must lie in [0, {p.l}]")
    return z


def angular_displacement(p, z):
    """Cross-section twist ``phi(z)`` in radians, for ``0 <= z <= l``."""
    z = _check_z(p, z)
    k = critical_load(p) / math.sqrt(p.EI_eta * p.C)
    r = p.l - z
    phi = np.sqrt(r) * p.A1 * bessel_j_quarter(0.5 * k * r * r)
    return float(phi) if np.ndim(phi) == 0 else phi


def _integral(p, a, b):
    if a == b:
        return 0.0
    res = integrate.quad(
        lambda s: angular_displacement(p, s), a, b, epsabs=0.0, epsrel=1e-9, limit=200, full_output=1
    )
    val, err = res[0], res[1]
    # a fourth element is quadpack's warning message
    if len(res) > 3 or not math.isfinite(val) or err > 1e-9 * abs(val) + 1e-15:
        raise NumericalError(f"quadrature on [{a:g}, {b:g}] did not converge", achieved=err / max(abs(val), 1e-300))
    return val


def lateral_displacement(p, z):
    """Lateral deflection ``u(z) = int_0^z phi(s) ds`` (m)."""
    z = _check_z(p, z)
    if z.ndim == 0:
        return _integral(p, 0.0, float(z))
    return np.array([_integral(p, 0.0, float(zi)) for zi in z.ravel()]).reshape(z.shape)


def normalize_tip(p, tip_displacement):
    """Return a copy of ``p`` whose ``A1`` gives ``u(l) = tip_displacement``."""
    unit = lateral_displacement(replace(p, A1=1.0), p.l)
    if unit == 0.0:
        raise DomainError("tip deflection vanishes for A1 = 1; cannot normalise")
    return replace(p, A1=tip_displacement / unit)


def beam_profile(p, n=101):
    """Sample ``(z, phi, u)`` on ``n`` evenly spaced points of ``[0, l]``."""
    if n < 2:
        raise ConfigurationError("need at least two samples", "n")
    z = np.linspace(0.0, p.l, n)
    phi = angular_displacement(p, z)
    return z, phi, lateral_displacement(p, z)
