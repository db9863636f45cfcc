"""
Prescribed link-angle signals and the traveling-wave body model.

Four kinds of periodic angle signal drive the link:

``sine``
    ``A sin(2 pi t / T + phase)``.
``cambering``
    ``m tanh(B s) / tanh(B)`` with ``s = sin(2 pi t / T + phase)``. Same
    amplitude as the sine, steeper zero crossings; ``B -> 0`` recovers the sine.
``hcm_snap``
    Bistable snap-through swing. Each half period is a slow quintic loading
    ramp from ``preload * A`` out to ``A``, followed by a fast quintic snap
    from ``A`` across to ``-preload * A``; the second half period mirrors the
    first. The snap duration ``s T / 2`` is calibrated so the peak angular
    speed equals ``peak_speed``.
``sampled``
    Measured ``(t, psi)`` samples, smoothed by a centred periodic moving
    average and interpolated with a periodic cubic spline.

Angles are radians, times seconds.
"""

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, DomainError, IngestionError

KINDS = ("sine", "cambering", "hcm_snap", "sampled")

DEFAULT_AMPLITUDE = math.radians(40.0)
DEFAULT_PERIOD = 0.760
DEFAULT_PEAK_SPEED = math.radians(1200.0)
DEFAULT_PRELOAD = 0.8


@dataclass(frozen=True)
class WaveformSpec:
    """Parameters of one periodic angle signal.

    ``amplitude`` is ``A`` (or ``m`` for the cambering kind). ``snap_fraction``
    is derived from ``peak_speed`` when left as ``None``. ``samples`` holds
    ``(t, psi)`` pairs in seconds and radians for the sampled kind.
    """

    kind: str
    amplitude: float = DEFAULT_AMPLITUDE
    period: float = DEFAULT_PERIOD
    phase: float = 0.0
    B: float = 2.0
    snap_fraction: float = None
    peak_speed: float = DEFAULT_PEAK_SPEED
    preload: float = DEFAULT_PRELOAD
    samples: tuple = field(default=None, repr=False)
    smoothing_window: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown waveform kind {self.kind!r}", "kind")
        if not self.period > 0:
            raise ConfigurationError("must be positive", "period")
        if not self.amplitude >= 0:
            raise ConfigurationError("must be non-negative", "amplitude")
        if self.kind == "cambering" and not self.B > 0:
            raise ConfigurationError("shape factor B must be positive", "B")
        if self.kind == "hcm_snap":
            if not 0.0 <= self.preload < 1.0:
                raise ConfigurationError("must lie in [0, 1)", "preload")
            s = self.resolved_snap_fraction()
            if not 0.0 < s < 0.5:
                raise ConfigurationError(
                    f"peak speed {math.degrees(self.peak_speed):.1f} deg/s needs snap fraction {s:.3f}, outside (0, 0.5)",
                    "peak_speed",
                )
        if self.kind == "sampled":
            if self.samples is None:
                raise IngestionError("sampled waveform needs samples")
            if self.smoothing_window < 1:
                raise ConfigurationError("must be at least 1", "smoothing_window")
            _check_samples(self.samples, self.period)

    def resolved_snap_fraction(self):
        if self.snap_fraction is not None:
            return float(self.snap_fraction)
        if self.amplitude == 0.0:
            return 0.25
        # quintic snap across (1 + preload) A in s T / 2 peaks at 15/8 of its mean rate
        return 15.0 * (1.0 + self.preload) * self.amplitude / (4.0 * self.period * self.peak_speed)


def _check_samples(samples, period):
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise IngestionError("samples must be (t, psi) pairs")
    if arr.shape[0] < 8:
        raise IngestionError(f"need at least 8 samples, got {arr.shape[0]}")
    t = arr[:, 0]
    if np.any(np.diff(t) <= 0):
        raise IngestionError("sample timestamps must be strictly increasing")
    if t[-1] - t[0] < period * (1 - 1e-9):
        raise IngestionError(f"samples span {t[-1] - t[0]:g} s, less than one period {period:g} s")


def load_samples_csv(path):
    """Read a ``t_seconds,psi_degrees`` CSV into ``(t, psi_rad)`` pairs."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = (ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#"))
        reader = csv.reader(lines)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_seconds", "psi_degrees"]:
            raise IngestionError(f"{path}: expected header 't_seconds,psi_degrees', got {header}")
        for k, row in enumerate(reader, start=2):
            try:
                t, psi = float(row[0]), float(row[1])
            except (IndexError, ValueError) as exc:
                raise IngestionError(f"{path}: bad row {k}: {row}") from exc
            rows.append((t, math.radians(psi)))
    return tuple(rows)


def reference_samples():
    """Approximate reference-robot trace shipped with the package."""
    return load_samples_csv(Path(__file__).with_name("data") / "reference_approx.csv")


# ----------------------------------------------------------------------------
# parametric kinds
# ----------------------------------------------------------------------------

def _arg(spec, t):
    return 2.0 * np.pi * np.asarray(t, dtype=float) / spec.period + spec.phase


def sine_angle(spec, t):
    return spec.amplitude * np.sin(_arg(spec, t))


def cambering_angle(spec, t):
    if not spec.B > 0:
        raise ConfigurationError("shape factor B must be positive", "B")
    return spec.amplitude * np.tanh(spec.B * np.sin(_arg(spec, t))) / np.tanh(spec.B)


def _cambering_rates(spec, t):
    w = 2.0 * np.pi / spec.period
    x = _arg(spec, t)
    s, c = np.sin(x), np.cos(x)
    B = spec.B
    th = np.tanh(B * s)
    sech2 = 1.0 - th**2
    k = spec.amplitude * B / np.tanh(B)
    omega = k * w * c * sech2
    alpha = k * w**2 * sech2 * (-s - 2.0 * B * c**2 * th)
    return omega, alpha


def _quintic(x):
    return x**3 * (10.0 + x * (-15.0 + 6.0 * x))


def _quintic_d1(x):
    return 30.0 * x**2 * (1.0 - x) ** 2


def _quintic_d2(x):
    return 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)


def _hcm_eval(spec, t):
    """Angle, rate and acceleration of the snap profile."""
    T = spec.period
    half = 0.5 * T
    s = spec.resolved_snap_fraction()
    A, b = spec.amplitude, spec.preload
    tau = np.mod(np.asarray(t, dtype=float) + spec.phase * T / (2.0 * np.pi), T)
    sign = np.where(tau < half, 1.0, -1.0)
    tl = np.where(tau < half, tau, tau - half)
    d_slow = (1.0 - s) * half
    d_snap = s * half
    slow = tl < d_slow
    x = np.where(slow, tl / d_slow, (tl - d_slow) / d_snap)
    x = np.clip(x, 0.0, 1.0)
    # slow: b A -> A over d_slow;  snap: A -> -b A over d_snap
    span = np.where(slow, (1.0 - b) * A, -(1.0 + b) * A)
    start = np.where(slow, b * A, A)
    dur = np.where(slow, d_slow, d_snap)
    theta = sign * (start + span * _quintic(x))
    omega = sign * span * _quintic_d1(x) / dur
    alpha = sign * span * _quintic_d2(x) / dur**2
    return theta, omega, alpha


def hcm_angle(spec, t):
    return _hcm_eval(spec, t)[0]


def hcm_joints(spec):
    """Times within one period where the snap profile switches segment."""
    half = 0.5 * spec.period
    s = spec.resolved_snap_fraction()
    return np.array([0.0, (1.0 - s) * half, half, half + (1.0 - s) * half])


# ----------------------------------------------------------------------------
# sampled kind
# ----------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _sampled_spline(spec):
    arr = np.asarray(spec.samples, dtype=float)
    t0 = arr[0, 0]
    keep = arr[:, 0] < t0 + spec.period * (1 - 1e-12)
    t, y = arr[keep, 0], arr[keep, 1]
    w = spec.smoothing_window
    if w > 1:
        # centred moving average with periodic wrap; even windows lean forward
        lo = (w - 1) // 2
        hi = w - 1 - lo
        ext = np.concatenate([y[-lo:] if lo else y[:0], y, y[:hi]])
        y = np.convolve(ext, np.ones(w) / w, mode="valid")
    tt = np.append(t, t0 + spec.period)
    yy = np.append(y, y[0])
    return t0, CubicSpline(tt, yy, bc_type="periodic")


def sampled_angle(spec, t):
    t0, cs = _sampled_spline(spec)
    return cs(t0 + np.mod(np.asarray(t, dtype=float) - t0, spec.period))


# ----------------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------------

def angle(spec, t):
    """Link angle of any waveform kind."""
    if spec.kind == "sine":
        return sine_angle(spec, t)
    if spec.kind == "cambering":
        return cambering_angle(spec, t)
    if spec.kind == "hcm_snap":
        return hcm_angle(spec, t)
    return sampled_angle(spec, t)


def differentiate(spec, t):
    """Angular velocity and acceleration ``(omega, alpha)``."""
    if spec.kind == "sine":
        w = 2.0 * np.pi / spec.period
        x = _arg(spec, t)
        return spec.amplitude * w * np.cos(x), -spec.amplitude * w**2 * np.sin(x)
    if spec.kind == "cambering":
        return _cambering_rates(spec, t)
    if spec.kind == "hcm_snap":
        _, omega, alpha = _hcm_eval(spec, t)
        return omega, alpha
    t0, cs = _sampled_spline(spec)
    tt = t0 + np.mod(np.asarray(t, dtype=float) - t0, spec.period)
    return cs(tt, 1), cs(tt, 2)


def peak_rates(spec, n=20000):
    """Peak ``|omega|`` and ``|alpha|`` over one period (dense sampling)."""
    t = np.linspace(0.0, spec.period, n, endpoint=False)
    if spec.kind == "hcm_snap":
        # quintic extrema are known; include them so sampling cannot miss them
        s = spec.resolved_snap_fraction()
        half = 0.5 * spec.period
        a = (3.0 - math.sqrt(3.0)) / 6.0
        d_slow, d_snap = (1 - s) * half, s * half
        extra = [d_slow + 0.5 * d_snap, d_slow + a * d_snap, d_slow + (1 - a) * d_snap, 0.5 * d_slow]
        t = np.concatenate([t, extra, np.add(extra, half)])
    omega, alpha = differentiate(spec, t)
    return float(np.max(np.abs(omega))), float(np.max(np.abs(alpha)))


# ----------------------------------------------------------------------------
# traveling wave body model
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TravelingWaveSpec:
    """Lateral body wave ``h(x, t) = g(x) sin(k x + omega t)``.

    ``g_x``/``g_values`` tabulate the amplitude envelope (piecewise linear).
    """

    g_x: tuple
    g_values: tuple
    k: float
    omega: float

    def __post_init__(self):
        gx = np.asarray(self.g_x, dtype=float)
        gv = np.asarray(self.g_values, dtype=float)
        if gx.ndim != 1 or gx.shape != gv.shape or gx.size < 2:
            raise ConfigurationError("envelope table needs matching x and g arrays of length >= 2", "g")
        if np.any(np.diff(gx) <= 0):
            raise ConfigurationError("envelope x must be strictly increasing", "g_x")
        if np.any(gv < 0):
            raise ConfigurationError("envelope must be non-negative", "g_values")


def traveling_wave_h(spec, x, t):
    x = np.asarray(x, dtype=float)
    lo, hi = spec.g_x[0], spec.g_x[-1]
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError(f"x outside envelope domain [{lo}, {hi}]")
    g = np.interp(x, spec.g_x, spec.g_values)
    return g * np.sin(spec.k * x + spec.omega * np.asarray(t, dtype=float))
