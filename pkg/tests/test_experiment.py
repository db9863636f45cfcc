import math

import numpy as np
import pytest

from hcmswim import experiment as ex
from hcmswim import metrics
from hcmswim import waveforms as wf
from hcmswim.errors import ConfigurationError, IngestionError

COARSE = {"nx": "32", "ny": "32", "cycles": "2", "discard_cycles": "1"}


def cfg(tmp_path, **extra):
    values = dict(COARSE, output_dir=str(tmp_path / "out"))
    values.update({k: str(v) for k, v in extra.items()})
    return ex.build_config(values)


def test_defaults():
    c = ex.ExperimentConfig()
    assert (c.nx, c.ny, c.Re, c.cycles, c.discard_cycles, c.period) == (256, 256, 1000.0, 4, 1, 0.76)
    assert [n for n, _ in c.patterns] == ["hcm", "reference", "sine", "cambering"]
    assert c.u_ref == pytest.approx(0.12 * math.radians(40) * 2 * math.pi / 0.76)


def test_parse_config_text():
    vals = ex.parse_config_text("# header\nnx = 64  # trailing\n\nsine.amplitude_deg=10\n")
    assert vals == {"nx": "64", "sine.amplitude_deg": "10"}
    with pytest.raises(ConfigurationError) as ei:
        ex.parse_config_text("nx 64\n")
    assert ei.value.field == "line 1"


@pytest.mark.parametrize(
    "values,field",
    [
        ({"cycles": "1", "discard_cycles": "1"}, "discard_cycles"),
        ({"Re": "-5"}, "Re"),
        ({"nx": "abc"}, "nx"),
        ({"bogus": "1"}, "bogus"),
        ({"sine.colour": "red"}, "sine.colour"),
        ({"patterns": "wiggle"}, "wiggle.kind"),
        ({"patterns": "w", "w.kind": "square"}, "w.kind"),
        ({"cambering.B": "-1"}, "cambering.B"),
        ({"hcm.peak_speed_deg": "100"}, "hcm.peak_speed"),
        ({"patterns": "sine", "hcm.B": "1"}, "hcm.*"),
        ({"kernel": "gauss"}, "kernel"),
        ({"nx": "8"}, "nx/ny"),
        ({"domain_width": "3", "domain_height": "3"}, "pivot"),
    ],
)
def test_invalid_config_names_field(values, field):
    with pytest.raises(ConfigurationError) as ei:
        ex.build_config(values)
    assert ei.value.field == field


def test_pattern_overrides(tmp_path):
    csv = tmp_path / "trace.csv"
    t = np.linspace(0, 0.76, 20)
    csv.write_text("t_seconds,psi_degrees\n" + "\n".join(f"{a},{30 * math.sin(2 * math.pi * a / 0.76)}" for a in t))
    conf = tmp_path / "c.cfg"
    conf.write_text("patterns = sine, mine\nsine.amplitude_deg = 20\nmine.kind = sampled\nmine.samples_csv = trace.csv\n")
    c = ex.load_config(conf, ["sine.phase_deg=90", "cycles=3"])
    specs = dict(c.patterns)
    assert specs["sine"].amplitude == pytest.approx(math.radians(20))
    assert specs["sine"].phase == pytest.approx(math.pi / 2)
    assert specs["mine"].kind == "sampled" and c.cycles == 3
    with pytest.raises(ConfigurationError):
        ex.load_config(conf, ["nonsense"])
    with pytest.raises(ConfigurationError):
        ex.load_config(tmp_path / "missing.cfg")
    conf.write_text("patterns = mine\nmine.kind = sampled\nmine.samples_csv = nope.csv\n")
    with pytest.raises((IngestionError, OSError)):
        ex.load_config(conf)


def test_steps_per_period_scales_with_speed():
    c = ex.ExperimentConfig(nx=64, ny=64)
    g = ex.fluid.make_grid(64, 64, 5.0, 5.0)
    n_sine = ex.steps_per_period(c, wf.WaveformSpec("sine"), g)
    n_hcm = ex.steps_per_period(c, wf.WaveformSpec("hcm_snap"), g)
    assert n_hcm / n_sine == pytest.approx(3.63, rel=0.02)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    c = ex.build_config(dict(COARSE, output_dir=str(out), dump_fields_every="100"))
    steady, full, results = ex.run_experiment(c)
    return c, out, steady, full, results


def test_outputs_complete(small_run):
    c, out, steady, full, results = small_run
    for name, _ in c.patterns:
        assert (out / f"{name}_series.csv").is_file()
        assert (out / f"{name}_diagnostics.csv").is_file()
    assert [r.pattern for r in steady] == [n for n, _ in c.patterns]
    assert len(ex.read_report(out / "report.csv")) == 4
    assert len(ex.read_report(out / "report_full.csv")) == 4
    assert max(r.normalized_thrust for r in steady) == 1.0


def test_series_csv_layout(small_run):
    c, out, _, _, results = small_run
    lines = (out / "sine_series.csv").read_text().splitlines()
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header == "t,theta_rad,omega_rad_s,alpha_rad_s2,thrust_N_per_m,lateral_N_per_m,torque_Nm_per_m,power_W_per_m"
    meta = ex.read_series_header(out / "sine_series.csv")
    assert float(meta["period"]) == 0.76 and float(meta["rho"]) == 998.0
    s = ex.read_series(out / "sine_series.csv", 0.76)
    ref = results[2].series
    assert np.array_equal(s.thrust, ref.thrust) and np.array_equal(s.t, ref.t)
    assert s.n_cycles == 2
    assert np.all(s.power >= 0)


def test_diagnostics_within_contract(small_run):
    c, _, _, _, results = small_run
    for r in results:
        d = r.diagnostics
        assert np.max(d["max_divergence"]) <= 1e-6
        assert np.max(d["max_slip"]) <= 1e-3
        assert np.max(d["cfl"]) <= c.cfl_max


def test_field_dump_format(small_run):
    _, out, _, _, _ = small_run
    dumps = sorted(out.glob("sine_vorticity_*.txt"))
    assert dumps
    first = dumps[0].read_text().splitlines()
    assert first[0].startswith("# vorticity nx=32 ny=32 t=")
    assert len(first) == 33 and len(first[1].split()) == 32
    w, t = ex.read_field_dump(dumps[0])
    assert w.shape == (32, 32) and t > 0


def test_zero_amplitude_pattern_gives_no_thrust(tmp_path, small_run):
    hcm_thrust = small_run[2][0].mean_thrust
    c = cfg(tmp_path, patterns="still", **{"still.kind": "sine", "still.amplitude_deg": 0})
    steady, _, _ = ex.run_experiment(c)
    assert abs(steady[0].mean_thrust) <= 1e-4 * abs(hcm_thrust)


def test_rerun_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        c = cfg(tmp_path, patterns="sine,cambering", output_dir=tmp_path / f"r{k}", dump_fields_every=150)
        ex.run_experiment(c)
        outs.append(tmp_path / f"r{k}")
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()


def test_parallel_matches_serial(tmp_path):
    serial = cfg(tmp_path, patterns="sine,cambering", output_dir=tmp_path / "s")
    par = cfg(tmp_path, patterns="sine,cambering", output_dir=tmp_path / "p", workers=2)
    ex.run_experiment(serial)
    ex.run_experiment(par)
    for n in ("sine_series.csv", "cambering_series.csv", "report.csv"):
        assert (tmp_path / "s" / n).read_bytes() == (tmp_path / "p" / n).read_bytes()


def test_unnormalisable_report_is_written(tmp_path):
    c = cfg(tmp_path, patterns="a,b", **{"a.kind": "sine", "a.amplitude_deg": 0, "b.kind": "sine", "b.amplitude_deg": 0})
    steady, _, _ = ex.run_experiment(c)
    assert all(r.normalized_thrust is None for r in steady)
    rows = ex.read_report(tmp_path / "out" / "report.csv")
    assert all(math.isnan(r.normalized_thrust) for r in rows)


def test_write_report_round_trip(tmp_path):
    reps = metrics.normalize_reports([metrics.MetricsReport("a", 2.0, 1.0, 2.0), metrics.MetricsReport("b", 1.0, 4.0, 0.25)])
    ex.write_report(tmp_path / "r.csv", reps)
    back = ex.read_report(tmp_path / "r.csv")
    assert [(r.pattern, r.mean_thrust, r.normalized_efficiency) for r in back] == [("a", 2.0, 1.0), ("b", 1.0, 0.125)]
