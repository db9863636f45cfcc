"""
Pattern-comparison experiments: configuration, simulation loop and outputs.

A run swings the link about a fixed pivot at the centre of a closed box,
once per waveform pattern, and writes for every pattern

* ``<pattern>_series.csv``: per-step kinematics, forces and power (SI units
  per unit depth), preceded by ``#`` lines echoing the scaling constants;
* ``<pattern>_diagnostics.csv``: per-step divergence, no-slip residual, CFL
  number and coupling iterations;
* ``<pattern>_vorticity_<step>.txt``: optional field dumps;

followed by ``report.csv`` (steady window, leading cycles discarded) and
``report_full.csv`` (all cycles) once every pattern has finished.

Nondimensionalisation uses the link length ``L`` and the reference speed
``U_ref = L * omega_peak`` of the default sine swing, so one nondimensional
time unit is ``L / U_ref`` seconds and forces scale with ``rho U_ref^2 L``.
"""

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import fluid, ib, metrics, waveforms
from .errors import ConfigurationError, HcmSwimError, NormalizationError, SolverDivergenceError, StepSizeError

log = logging.getLogger(__name__)

SERIES_COLUMNS = (
    "t",
    "theta_rad",
    "omega_rad_s",
    "alpha_rad_s2",
    "thrust_N_per_m",
    "lateral_N_per_m",
    "torque_Nm_per_m",
    "power_W_per_m",
)
DIAGNOSTIC_COLUMNS = ("step", "t", "max_divergence", "max_slip", "cfl", "cg_iterations")

BUILTIN_PATTERNS = {
    "hcm": "hcm_snap",
    "reference": "sampled",
    "sine": "sine",
    "cambering": "cambering",
}

PATTERN_FIELDS = {
    "kind",
    "amplitude_deg",
    "phase_deg",
    "B",
    "peak_speed_deg",
    "snap_fraction",
    "preload",
    "samples_csv",
    "smoothing_window",
}


@dataclass
class ExperimentConfig:
    nx: int = 256
    ny: int = 256
    domain_width: float = 5.0  # in link lengths
    domain_height: float = 5.0
    Re: float = 1000.0
    patterns: list = field(default_factory=lambda: default_patterns())
    cycles: int = 4
    period: float = waveforms.DEFAULT_PERIOD
    discard_cycles: int = 1
    output_dir: str = "runs/default"
    dump_fields_every: int = 0
    rho: float = 998.0
    L_physical: float = 0.12
    U_ref: float = None
    cfl_max: float = 0.5
    # expected ratio of peak fluid speed to peak link-tip speed, sizes dt
    flow_speed_factor: float = 3.5
    kernel: str = "peskin4"
    slip_tol: float = 1e-6
    workers: int = 1
    amplitude_deg: float = 40.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.cycles < 1:
            raise ConfigurationError("must be at least 1", "cycles")
        if self.discard_cycles < 0 or self.discard_cycles >= self.cycles:
            raise ConfigurationError(f"must lie in [0, cycles={self.cycles})", "discard_cycles")
        if self.discard_cycles >= 1 and self.cycles < 2:
            raise ConfigurationError("needs at least 2 cycles when discarding", "cycles")
        if not self.Re > 0:
            raise ConfigurationError("must be positive", "Re")
        if not self.period > 0:
            raise ConfigurationError("must be positive", "period")
        for name in ("rho", "L_physical", "flow_speed_factor", "slip_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError("must be positive", name)
        if self.U_ref is not None and not self.U_ref > 0:
            raise ConfigurationError("must be positive", "U_ref")
        if self.U_ref is None and not self.amplitude_deg > 0:
            raise ConfigurationError("U_ref must be given when the default amplitude is zero", "U_ref")
        if self.dump_fields_every < 0:
            raise ConfigurationError("must be >= 0", "dump_fields_every")
        if self.workers < 1:
            raise ConfigurationError("must be >= 1", "workers")
        if not self.patterns:
            raise ConfigurationError("at least one pattern is required", "patterns")
        names = [n for n, _ in self.patterns]
        if len(set(names)) != len(names):
            raise ConfigurationError("pattern names must be unique", "patterns")
        fluid.SolverConfig(cfl_max=self.cfl_max)
        ib.CouplingConfig(kernel=self.kernel, slip_tol=self.slip_tol)
        grid = fluid.make_grid(self.nx, self.ny, self.domain_width, self.domain_height)
        ib.build_link(1.0, (0.5 * self.domain_width, 0.5 * self.domain_height), grid)

    @property
    def u_ref(self):
        """Reference speed in m/s (link length times peak sine angular speed)."""
        if self.U_ref is not None:
            return self.U_ref
        return self.L_physical * math.radians(self.amplitude_deg) * 2.0 * math.pi / self.period


def default_patterns(period=waveforms.DEFAULT_PERIOD, amplitude_deg=40.0):
    """The four built-in patterns with their default settings."""
    return [(name, _pattern_spec(name, {}, period, amplitude_deg, None)) for name in BUILTIN_PATTERNS]


# ----------------------------------------------------------------------------
# config files
# ----------------------------------------------------------------------------

_SCALAR_TYPES = {
    "nx": int,
    "ny": int,
    "domain_width": float,
    "domain_height": float,
    "Re": float,
    "cycles": int,
    "period": float,
    "discard_cycles": int,
    "output_dir": str,
    "dump_fields_every": int,
    "rho": float,
    "L_physical": float,
    "U_ref": float,
    "cfl_max": float,
    "flow_speed_factor": float,
    "kernel": str,
    "slip_tol": float,
    "workers": int,
    "amplitude_deg": float,
}


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines into a dict (``#`` starts a comment)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'", f"line {lineno}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key", f"line {lineno}")
        out[key] = value
    return out


def _convert(key, value, typ):
    try:
        if typ is int:
            return int(value)
        if typ is float:
            return float(value)
    except ValueError:
        raise ConfigurationError(f"cannot parse {value!r} as {typ.__name__}", key) from None
    return value


def build_config(values, base_dir=None):
    """Build an :class:`ExperimentConfig` from parsed ``key -> str`` values.

    Pattern settings use dotted keys, e.g. ``sine.amplitude_deg = 0``.
    """
    kwargs = {}
    pattern_opts = {}
    pattern_list = None
    for key, value in values.items():
        if key == "patterns":
            pattern_list = [p.strip() for p in value.split(",") if p.strip()]
            continue
        if "." in key:
            name, opt = key.split(".", 1)
            if opt not in PATTERN_FIELDS:
                raise ConfigurationError(f"unknown pattern option {opt!r}", key)
            pattern_opts.setdefault(name, {})[opt] = value
            continue
        if key not in _SCALAR_TYPES:
            raise ConfigurationError("unknown config key", key)
        if key == "U_ref" and value.lower() in ("", "auto"):
            continue
        kwargs[key] = _convert(key, value, _SCALAR_TYPES[key])
    if pattern_list is None:
        pattern_list = list(BUILTIN_PATTERNS)
    for name in pattern_opts:
        if name not in pattern_list:
            raise ConfigurationError("options given for a pattern that is not listed in 'patterns'", f"{name}.*")
    period = kwargs.get("period", waveforms.DEFAULT_PERIOD)
    amp = kwargs.get("amplitude_deg", 40.0)
    specs = [(name, _pattern_spec(name, pattern_opts.get(name, {}), period, amp, base_dir)) for name in pattern_list]
    return ExperimentConfig(patterns=specs, **kwargs)


def _pattern_spec(name, opts, period, amplitude_deg, base_dir):
    kind = opts.get("kind", BUILTIN_PATTERNS.get(name))
    if kind is None:
        raise ConfigurationError("custom pattern needs a kind", f"{name}.kind")
    if kind not in waveforms.KINDS:
        raise ConfigurationError(f"unknown kind {kind!r}", f"{name}.kind")
    kw = {"kind": kind, "period": period}

    def get(opt, typ, default=None):
        if opt in opts:
            return _convert(f"{name}.{opt}", opts[opt], typ)
        return default

    kw["amplitude"] = math.radians(get("amplitude_deg", float, amplitude_deg))
    kw["phase"] = math.radians(get("phase_deg", float, 0.0))
    if "B" in opts:
        kw["B"] = get("B", float)
    if "peak_speed_deg" in opts:
        kw["peak_speed"] = math.radians(get("peak_speed_deg", float))
    if "snap_fraction" in opts:
        kw["snap_fraction"] = get("snap_fraction", float)
    if "preload" in opts:
        kw["preload"] = get("preload", float)
    if kind == "sampled":
        path = opts.get("samples_csv")
        if path is None:
            if name != "reference":
                raise ConfigurationError("sampled pattern needs samples_csv", f"{name}.samples_csv")
            samples = waveforms.reference_samples()
            kw["smoothing_window"] = get("smoothing_window", int, 3)
        else:
            p = Path(path)
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            samples = waveforms.load_samples_csv(p)
            kw["smoothing_window"] = get("smoothing_window", int, 1)
        kw["samples"] = samples
    try:
        return waveforms.WaveformSpec(**kw)
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc).split(": ", 1)[-1], f"{name}.{exc.field}") from None


def load_config(path, overrides=()):
    """Read a config file and apply ``key=value`` overrides."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}", "config") from None
    values = parse_config_text(text, str(path))
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value", "--set")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    return build_config(values, base_dir=path.parent)


# ----------------------------------------------------------------------------
# one pattern
# ----------------------------------------------------------------------------

@dataclass
class PatternResult:
    name: str
    series: metrics.RunSeries
    diagnostics: dict
    steps_per_period: int
    wall_time: float


def _scales(cfg):
    U = cfg.u_ref
    L = cfg.L_physical
    return {
        "omega_ref": U / L,  # 1/s per nondimensional rate unit
        "force": cfg.rho * U**2 * L,
        "torque": cfg.rho * U**2 * L**2,
    }


def steps_per_period(cfg, spec, grid):
    sc = _scales(cfg)
    t_star = cfg.period * sc["omega_ref"]
    peak_omega, _ = waveforms.peak_rates(spec)
    tip = max(peak_omega / sc["omega_ref"], 1.0)  # link length is 1
    return int(math.ceil(t_star * cfg.flow_speed_factor * tip / (cfg.cfl_max * grid.h)))


def simulate_pattern(name, spec, cfg, out_dir=None, n_per_period=None):
    """Run one pattern; write its CSVs when ``out_dir`` is given."""
    grid = fluid.make_grid(cfg.nx, cfg.ny, cfg.domain_width, cfg.domain_height)
    link = ib.build_link(1.0, (0.5 * cfg.domain_width, 0.5 * cfg.domain_height), grid)
    solver = fluid.SolverConfig(cfl_max=cfg.cfl_max)
    coupling = ib.CouplingConfig(kernel=cfg.kernel, slip_tol=cfg.slip_tol)
    sc = _scales(cfg)
    n = n_per_period or steps_per_period(cfg, spec, grid)
    t0 = time.perf_counter()
    for attempt in range(4):
        try:
            res = _run(name, spec, cfg, grid, link, solver, coupling, sc, n, out_dir)
            # wall time includes any discarded attempts
            return replace(res, wall_time=time.perf_counter() - t0)
        except StepSizeError as exc:
            log.warning("%s: %s with %d steps/period, retrying finer", name, exc, n)
            n = int(math.ceil(n * 1.2 * max(exc.cfl / cfg.cfl_max, 1.0)))
    raise SolverDivergenceError(f"{name}: no admissible time step found", float("nan"))


def _run(name, spec, cfg, grid, link, solver, coupling, sc, n_per, out_dir):
    t0 = time.perf_counter()
    total = n_per * cfg.cycles
    dt_s = cfg.period / n_per
    dt = dt_s * sc["omega_ref"]
    state = fluid.zero_state(grid, cfg.Re)
    k = np.arange(1, total + 1)
    t_s = k * dt_s
    theta = waveforms.angle(spec, t_s)
    omega, alpha = waveforms.differentiate(spec, t_s)
    thrust = np.empty(total)
    lateral = np.empty(total)
    torque = np.empty(total)
    diag = {c: np.empty(total) for c in DIAGNOSTIC_COLUMNS}
    guess = None
    for i in range(total):
        X, U = ib.link_kinematics(link, theta[i], omega[i] / sc["omega_ref"])
        try:
            state, mf = ib.ib_solve(state, grid, solver, link, X, U, dt, coupling, guess)
        except SolverDivergenceError as exc:
            exc.step = i + 1
            raise SolverDivergenceError(f"pattern {name!r} diverged at step {i + 1}", exc.residual, i + 1) from exc
        guess = mf.forces
        thrust[i] = ib.net_thrust(mf, link.swim_axis)
        lateral[i] = ib.net_lateral(mf, link.swim_axis)
        torque[i] = ib.net_torque(mf, link.pivot)
        diag["step"][i] = i + 1
        diag["t"][i] = t_s[i]
        diag["max_divergence"][i] = np.max(np.abs(fluid.divergence(state, grid)))
        diag["max_slip"][i] = mf.slip_residual
        diag["cfl"][i] = fluid.cfl_number(state.u, state.v, grid, dt)
        diag["cg_iterations"][i] = mf.iterations
        if out_dir is not None and cfg.dump_fields_every and (i + 1) % cfg.dump_fields_every == 0:
            write_field_dump(Path(out_dir) / f"{name}_vorticity_{i + 1:06d}.txt", fluid.cell_vorticity(state, grid), t_s[i])
        if (i + 1) % max(n_per // 4, 1) == 0:
            log.info("%s: step %d/%d thrust=%.4g cfl=%.3f", name, i + 1, total, thrust[i], diag["cfl"][i])
    series = metrics.RunSeries(
        t_s, theta, omega, alpha, thrust * sc["force"], lateral * sc["force"], torque * sc["torque"], cfg.period
    )
    res = PatternResult(name, series, diag, n_per, time.perf_counter() - t0)
    if out_dir is not None:
        write_series(Path(out_dir) / f"{name}_series.csv", series, _header(name, spec, cfg, grid, n_per))
        write_diagnostics(Path(out_dir) / f"{name}_diagnostics.csv", diag)
    return res


# ----------------------------------------------------------------------------
# files
# ----------------------------------------------------------------------------

def _fmt(x):
    return "nan" if not math.isfinite(x) else f"{x:.16e}"


def _header(name, spec, cfg, grid, n_per):
    return [
        f"pattern={name}",
        f"kind={spec.kind}",
        f"period={cfg.period!r}",
        f"rho={cfg.rho}",
        f"L_physical={cfg.L_physical}",
        f"U_ref={cfg.u_ref:.10g}",
        f"Re={cfg.Re}",
        f"grid={grid.nx}x{grid.ny}",
        f"steps_per_period={n_per}",
        "thrust>0 pushes fluid towards the link tip (body propelled towards its head)",
        "torque>0 is counter-clockwise actuator effort; power=max(torque*omega,0)",
    ]


def write_series(path, series, header_lines=()):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    buf.write(",".join(SERIES_COLUMNS) + "\n")
    cols = (series.t, series.theta, series.omega, series.alpha, series.thrust, series.lateral, series.torque, series.power)
    for row in zip(*cols):
        buf.write(",".join(_fmt(float(x)) for x in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_series(path, period):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    col = lambda c: np.array([float(r[c]) for r in rows])  # noqa: E731
    return metrics.RunSeries(
        col("t"),
        col("theta_rad"),
        col("omega_rad_s"),
        col("alpha_rad_s2"),
        col("thrust_N_per_m"),
        col("lateral_N_per_m"),
        col("torque_Nm_per_m"),
        period,
    )


def read_series_header(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            if not ln.startswith("#"):
                break
            body = ln[1:].strip()
            if "=" in body and " " not in body.split("=", 1)[0]:
                k, v = body.split("=", 1)
                out[k] = v
    return out


def write_diagnostics(path, diag):
    buf = io.StringIO()
    buf.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
    for row in zip(*(diag[c] for c in DIAGNOSTIC_COLUMNS)):
        step, t, dv, sl, cfl, it = row
        buf.write(f"{int(step)},{_fmt(t)},{_fmt(dv)},{_fmt(sl)},{_fmt(cfl)},{int(it)}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_field_dump(path, field_xy, t):
    """Write an ``(nx, ny)`` field as ``ny`` text rows, bottom row first."""
    nx, ny = field_xy.shape
    buf = io.StringIO()
    buf.write(f"# vorticity nx={nx} ny={ny} t={t:.10g}\n")
    for j in range(ny):
        buf.write(" ".join(_fmt(float(x)) for x in field_xy[:, j]) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_field_dump(path):
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        meta = dict(tok.split("=", 1) for tok in head[2:])
        data = np.loadtxt(fh, ndmin=2)
    nx, ny = int(meta["nx"]), int(meta["ny"])
    if data.shape != (ny, nx):
        raise HcmSwimError(f"{path}: expected {ny} rows of {nx} values, got {data.shape}")
    return data.T, float(meta["t"])


def write_report(path, reports):
    buf = io.StringIO()
    buf.write(",".join(metrics.REPORT_COLUMNS) + "\n")
    for row in metrics.report_rows(reports):
        buf.write(row[0] + "," + ",".join(_fmt(float(x)) if x is not None else "nan" for x in row[1:]) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        return [metrics.report_from_row(r) for r in csv.DictReader(fh)]


def _normalized(reports):
    try:
        return metrics.normalize_reports(reports)
    except NormalizationError as exc:
        log.warning("report left unnormalised: %s", exc)
        return reports


# ----------------------------------------------------------------------------
# whole experiment
# ----------------------------------------------------------------------------

def _job(args):
    name, spec, cfg, out_dir = args
    return simulate_pattern(name, spec, cfg, out_dir)


def run_experiment(cfg):
    """Simulate every pattern, then write the steady and full-record reports.

    Returns ``(steady_reports, full_reports, results)``.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(name, spec, cfg, str(out)) for name, spec in cfg.patterns]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs), os.cpu_count() or 1)) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    steady = [metrics.make_report(r.name, r.series, cfg.discard_cycles) for r in results]
    full = [metrics.make_report(r.name, r.series, 0) for r in results]
    steady = _normalized(steady)
    full = _normalized(full)
    write_report(out / "report.csv", steady)
    write_report(out / "report_full.csv", full)
    return steady, full, results


def config_fields():
    return [f.name for f in fields(ExperimentConfig)]
