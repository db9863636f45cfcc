"""
Link variables from digitised centrelines, and waveform shape descriptors.

A centreline is an ordered head-to-tail polyline. Four stations placed by
normalised arclength define three chords; ``h_i`` is the signed offset of
station ``i`` from the reference axis through the head (left of the axis is
positive) and ``theta_i`` is the angle of chord ``i`` measured from that axis.
"""

import csv
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .errors import ConfigurationError, FitError, GeometryError, IngestionError

DEFAULT_STATIONS = (0.25, 0.50, 0.75, 1.00)
LINK_COLUMNS = ("t", "h1", "h2", "h3", "h4", "theta1", "theta2", "theta3")


@dataclass(frozen=True)
class CenterlineFrame:
    t: float
    points: np.ndarray  # (n, 2), head first

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
            raise GeometryError(f"centreline needs at least 4 (x, y) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("centreline coordinates must be finite")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class LinkVariables:
    t: float
    h: tuple  # h1..h4
    theta: tuple  # theta1..theta3

    def row(self):
        return (self.t, *self.h, *self.theta)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def extract_link_variables(frame, station_fractions=DEFAULT_STATIONS, axis=None):
    """Three-link variables of one centreline frame.

    Parameters
    ----------
    frame : CenterlineFrame
    station_fractions : sequence of 4 floats
        Strictly increasing arclength fractions in ``[0, 1]``.
    axis : array_like of 2 floats, optional
        Fixed reference direction. By default the direction from the first
        to the second centreline point is used, frame by frame.
    """
    fr = np.asarray(station_fractions, dtype=float)
    if fr.shape != (4,) or np.any(np.diff(fr) <= 0) or fr[0] < 0 or fr[-1] > 1:
        raise ConfigurationError("need four strictly increasing values in [0, 1]", "station_fractions")
    pts = frame.points
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if not s[-1] > 0:
        raise GeometryError("centreline has zero length")
    if axis is None:
        axis = pts[1] - pts[0]
    axis = np.asarray(axis, dtype=float)
    norm = math.hypot(*axis)
    if not norm > 0:
        raise GeometryError("reference axis has zero length")
    axis = axis / norm
    # repeated points give flat stretches of s; np.interp needs it increasing
    keep = np.concatenate([[True], seg > 0])
    s, p = s[keep] / s[-1], pts[keep]
    st = np.column_stack([np.interp(fr, s, p[:, 0]), np.interp(fr, s, p[:, 1])])
    h = _cross(axis, st - pts[0])
    d = np.diff(st, axis=0)
    theta = np.arctan2(_cross(axis, d), d @ axis)
    return LinkVariables(frame.t, tuple(float(v) for v in h), tuple(float(v) for v in theta))


def read_centerlines(path):
    """Read ``t_seconds,point_index,x_meters,y_meters`` rows into frames."""
    frames = defaultdict(list)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            need = {"t_seconds", "point_index", "x_meters", "y_meters"}
            if reader.fieldnames is None or not need <= set(reader.fieldnames):
                raise IngestionError(f"{path}: header must contain {sorted(need)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    key = float(row["t_seconds"])
                    frames[key].append((int(row["point_index"]), float(row["x_meters"]), float(row["y_meters"])))
                except (TypeError, ValueError):
                    raise IngestionError(f"{path}:{lineno}: malformed row") from None
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from None
    out = []
    for t in sorted(frames):
        rows = sorted(frames[t])
        idx = [r[0] for r in rows]
        if len(set(idx)) != len(idx):
            raise IngestionError(f"{path}: duplicate point_index at t={t}")
        out.append(CenterlineFrame(t, np.array([[r[1], r[2]] for r in rows])))
    return out


def write_link_variables(path, variables):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LINK_COLUMNS)
        for v in variables:
            w.writerow([f"{x:.10e}" for x in v.row()])


# ----------------------------------------------------------------------------
# waveform shape
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SineFit:
    amplitude: float
    phase: float
    offset: float
    rms_residual: float


@dataclass(frozen=True)
class ShapeMetrics:
    skewness: float
    asymmetry_index: float
    cambering_index: float
    defined: bool = True


def _as_series(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ConfigurationError("t and values must be 1-D arrays of equal length", "series")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise ConfigurationError("series contains non-finite values", "series")
    return t, y


def fit_sine(t, y, period):
    """Least-squares ``offset + amplitude * sin(2 pi t / period + phase)``."""
    t, y = _as_series(t, y)
    if not period > 0:
        raise ConfigurationError("must be positive", "period")
    if t.size < 8:
        raise FitError(f"need at least 8 samples, got {t.size}")
    step = np.median(np.diff(np.sort(t)))
    if t.max() - t.min() + step < period * (1 - 1e-9):
        raise FitError("samples span less than one period")
    w = 2 * np.pi / period
    X = np.column_stack([np.ones_like(t), np.sin(w * t), np.cos(w * t)])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 3:
        raise FitError("design matrix is rank deficient (samples do not resolve the phase)")
    a, b, c = coef
    resid = y - X @ coef
    return SineFit(float(math.hypot(b, c)), float(math.atan2(c, b)), float(a), float(np.sqrt(np.mean(resid**2))))


def _periodic_samples(t, y, period):
    # uniform samples covering an integer number of periods, endpoint dropped
    t, y = _as_series(t, y)
    if t.size < 8:
        raise FitError(f"need at least 8 samples, got {t.size}")
    d = np.diff(t)
    if np.any(d <= 0) or np.ptp(d) > 1e-6 * d.mean():
        raise ConfigurationError("samples must be uniform in time", "t")
    dt = d.mean()
    for n in (t.size, t.size - 1):
        cycles = n * dt / period
        if round(cycles) >= 1 and abs(cycles - round(cycles)) < 1e-6:
            return t[:n], y[:n], int(round(cycles))
    raise ConfigurationError("samples must cover an integer number of periods", "t")


def _interpolant(y, cycles, period, t0):
    # trigonometric interpolant of periodic uniform samples
    n = y.size
    c = np.fft.rfft(y) / n
    k = np.arange(c.size)
    w = 2 * np.pi / (period * cycles) if cycles else 0.0
    if n % 2 == 0:
        c[-1] *= 0.5

    def f(tq):
        ph = np.exp(1j * w * np.outer(np.asarray(tq, dtype=float) - t0, k))
        return (c[0].real + 2 * np.real(ph[:, 1:] @ c[1:])).reshape(np.shape(tq))

    return f


def _crossings(f, t0, period, upward):
    grid = t0 + np.linspace(0.0, 1.25 * period, 2561)
    v = f(grid)
    for i in range(grid.size - 1):
        a, b = v[i], v[i + 1]
        if (a <= 0 < b) if upward else (a >= 0 > b):
            if a == 0.0:
                return grid[i]
            g = lambda x: float(f(np.array([x]))[0])  # noqa: E731
            if g(grid[i]) * g(grid[i + 1]) > 0:
                # root sits within rounding of an endpoint
                return grid[i] if abs(a) < abs(b) else grid[i + 1]
            return optimize.brentq(g, grid[i], grid[i + 1], xtol=1e-14 * period)
    return None


def _camber_model(B, s):
    if B < 1e-8:
        return s
    return np.tanh(B * s) / np.tanh(B)


def shape_metrics(t, y, period):
    """Skewness, rise/fall asymmetry and cambering index of a periodic signal.

    ``asymmetry_index`` compares the half wave after the upward zero crossing
    with the time-reversed half wave before the next downward crossing; it is
    0 for signals whose rise and fall are mirror images. ``cambering_index``
    is the ``B`` of the best ``m tanh(B sin(.))/tanh(B)`` fit at the signal's
    own amplitude and phase. A constant signal returns ``defined=False``.
    """
    t, y, cycles = _periodic_samples(t, y, period)
    if np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y))):
        return ShapeMetrics(math.nan, math.nan, math.nan, defined=False)
    skew = float(stats.skew(y, bias=True))

    fit = fit_sine(t, y, period)
    yc = y - fit.offset
    f = _interpolant(yc, cycles, period, t[0])
    dense = f(t[0] + np.linspace(0.0, period * cycles, 64 * y.size, endpoint=False))
    m = 0.5 * np.ptp(dense)

    t_up = _crossings(f, t[0], period, upward=True)
    t_dn = _crossings(f, t_up, period, upward=False) if t_up is not None else None
    if t_up is None or t_dn is None:
        asym = math.nan
    else:
        tau = np.linspace(0.0, period, 1025)
        a = f(t_up + tau)
        b = f(t_dn - tau)
        asym = float(np.sqrt(np.mean((a - b) ** 2)) / (np.sqrt(np.mean(a**2)) + np.sqrt(np.mean(b**2))))

    s = np.sin(2 * np.pi * t / period + fit.phase)
    # near B = 0 the model is s + B^2 (s - s^3) / 3, which seeds the search
    d = (s - s**3) / 3
    c0 = max(float((yc - m * s) @ d) / (m * float(d @ d)), 0.0)

    def resid(c):
        return m * _camber_model(math.sqrt(c[0]), s) - yc

    sol = optimize.least_squares(resid, [min(c0, 100.0)], bounds=([0.0], [100.0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    # keep B = 0 unless cambering buys a real reduction of the misfit
    gain = 0.5 * float(resid([0.0]) @ resid([0.0])) - sol.cost
    c = sol.x[0] if gain > 1e-12 * float(yc @ yc) else 0.0
    return ShapeMetrics(skew, asym, float(math.sqrt(c)))
