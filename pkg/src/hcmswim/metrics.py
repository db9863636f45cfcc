"""
Thrust, power and efficiency figures from per-step run records.

Input power is torque times angular velocity with negative values clipped:
the actuator cannot harvest energy from the fluid. "Efficiency" for the
tethered link is thrust per unit power; the propulsive efficiency
``F U / P`` is only available when a cruise speed is supplied.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConfigurationError, DomainError, NormalizationError


@dataclass
class RunSeries:
    """Parallel per-step records of one run.

    Units follow the run: seconds, radians, N/m, N m/m. ``period`` is the
    waveform period; samples are uniform in time and the record spans an
    integer number of periods starting at ``t = 0``.
    """

    t: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray
    thrust: np.ndarray
    lateral: np.ndarray
    torque: np.ndarray
    period: float

    def __post_init__(self):
        names = ("t", "theta", "omega", "alpha", "thrust", "lateral", "torque")
        for name in names:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.t.size
        if any(getattr(self, name).shape != (n,) for name in names):
            raise ConfigurationError("series arrays must be one-dimensional and of equal length", "series")
        if n >= 2:
            d = np.diff(self.t)
            if np.any(d <= 0) or np.ptp(d) > 1e-9 * max(abs(d[0]), 1e-300):
                raise ConfigurationError("timestamps must be strictly increasing and uniform", "t")

    @property
    def power(self):
        return input_power(self.torque, self.omega)

    @property
    def n_cycles(self):
        return int(round(self.t[-1] / self.period))


@dataclass
class MetricsReport:
    pattern: str
    mean_thrust: float
    mean_power: float
    thrust_per_power: float
    eta_p: float = None
    normalized_thrust: float = None
    normalized_power: float = None
    normalized_efficiency: float = None


def input_power(torque, omega):
    """Instantaneous actuator power, negative values removed."""
    torque = np.asarray(torque, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if torque.shape != omega.shape:
        raise ConfigurationError(f"length mismatch {torque.shape} vs {omega.shape}", "torque/omega")
    return np.maximum(torque * omega, 0.0)


def _window(series, t_start, t_end=None):
    t = series.t
    eps = 1e-9 * series.period
    keep = t >= t_start - eps
    if t_end is not None:
        keep &= t <= t_end + eps
    if np.count_nonzero(keep) < 2:
        raise DomainError(f"averaging window starting at t={t_start:g} holds fewer than two samples")
    return keep


def time_average(t, y):
    """Trapezoidal time average of samples ``y(t)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 2:
        raise DomainError("need at least two samples")
    return float(trapezoid(y, t) / (t[-1] - t[0]))


def cycle_averages(series, discard_cycles=0):
    """Mean thrust and mean clipped power after dropping leading cycles."""
    if discard_cycles < 0 or discard_cycles >= series.n_cycles:
        raise DomainError(f"discard_cycles={discard_cycles} leaves no full cycle of {series.n_cycles}")
    keep = _window(series, discard_cycles * series.period)
    t = series.t[keep]
    return time_average(t, series.thrust[keep]), time_average(t, series.power[keep])


def cycle_means(series):
    """Mean thrust of every individual cycle (needs a sample at each cycle start)."""
    out = []
    for k in range(series.n_cycles):
        keep = _window(series, k * series.period, (k + 1) * series.period)
        out.append(time_average(series.t[keep], series.thrust[keep]))
    return out


def propulsive_efficiency(F, U, P):
    """``F U / P``."""
    if not P > 0:
        raise DomainError(f"power must be positive, got {P}")
    return F * U / P


def efficiency_scaling(speed_ratio):
    """Efficiency gain for a speed ratio when drag grows with speed squared.

    ``eta = F U / P`` with ``F ~ U^2`` at fixed input power gives ``r^3``.
    """
    if not speed_ratio > 0:
        raise DomainError(f"speed ratio must be positive, got {speed_ratio}")
    return speed_ratio**3


def make_report(pattern, series, discard_cycles=0, cruise_speed=None):
    F, P = cycle_averages(series, discard_cycles)
    tpp = F / P if P > 0 else math.nan
    eta = propulsive_efficiency(F, cruise_speed, P) if cruise_speed is not None and P > 0 else None
    return MetricsReport(pattern, F, P, tpp, eta)


def normalize_reports(reports):
    """Divide thrust, power and thrust-per-power by their maxima across patterns.

    Columns whose entries are all zero (or undefined) cannot be normalised.
    """
    if not reports:
        raise NormalizationError("no reports to normalise")
    cols = {
        "normalized_thrust": [r.mean_thrust for r in reports],
        "normalized_power": [r.mean_power for r in reports],
        "normalized_efficiency": [r.thrust_per_power for r in reports],
    }
    scale = {}
    for name, vals in cols.items():
        finite = [v for v in vals if v is not None and math.isfinite(v)]
        top = max(finite) if finite else 0.0
        if not top > 0:
            raise NormalizationError(f"{name}: column has no positive maximum")
        scale[name] = top
    out = []
    for r, *vals in zip(reports, *cols.values()):
        upd = {name: (v / scale[name] if v is not None and math.isfinite(v) else math.nan) for name, v in zip(cols, vals)}
        out.append(replace(r, **upd))
    return out


def pearson(x, y):
    """Pearson coefficient, ``nan`` when either input has zero variance."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    den = math.sqrt(float(x @ x) * float(y @ y))
    if den == 0.0 or not math.isfinite(den):
        return math.nan
    return float(x @ y) / den


def thrust_accel_correlation(series, discard_cycles=0):
    """Pearson coefficient of thrust against angular acceleration per half period.

    Windows are consecutive half periods of the retained record. Windows with
    zero variance yield ``nan``.
    """
    start = discard_cycles * series.period
    if series.n_cycles - discard_cycles < 2:
        raise DomainError("need at least two retained cycles")
    half = 0.5 * series.period
    n_win = 2 * (series.n_cycles - discard_cycles)
    eps = 1e-9 * series.period
    out = []
    for k in range(n_win):
        a = start + k * half
        keep = (series.t >= a - eps) & (series.t < a + half - eps)
        out.append(pearson(series.thrust[keep], series.alpha[keep]))
    return out


def sign_alternation(coeffs):
    """Fraction of consecutive window pairs whose coefficients differ in sign."""
    pairs = [(a, b) for a, b in zip(coeffs[:-1], coeffs[1:]) if math.isfinite(a) and math.isfinite(b)]
    if not pairs:
        return math.nan
    return sum(1 for a, b in pairs if a * b < 0) / len(pairs)


REPORT_COLUMNS = ("pattern", "mean_thrust", "mean_power", "thrust_per_power", "norm_thrust", "norm_power", "norm_eff")


def report_rows(reports):
    """Rows for the report CSV, in ``REPORT_COLUMNS`` order."""
    return [
        (
            r.pattern,
            r.mean_thrust,
            r.mean_power,
            r.thrust_per_power,
            r.normalized_thrust,
            r.normalized_power,
            r.normalized_efficiency,
        )
        for r in reports
    ]


def report_from_row(row):
    vals = [row[c] for c in REPORT_COLUMNS]

    def num(x):
        return math.nan if x in (None, "", "nan") else float(x)

    return MetricsReport(vals[0], num(vals[1]), num(vals[2]), num(vals[3]), None, num(vals[4]), num(vals[5]), num(vals[6]))

