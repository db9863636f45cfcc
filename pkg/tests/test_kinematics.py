import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcmswim import kinematics as kin
from hcmswim import waveforms as wf
from hcmswim.errors import ConfigurationError, FitError, GeometryError, IngestionError

T = 0.76


def straight(n=12, angle=0.0, length=1.0, origin=(0.0, 0.0)):
    s = np.linspace(0, length, n)
    return np.column_stack([origin[0] + s * math.cos(angle), origin[1] + s * math.sin(angle)])


def rotate(pts, beta):
    c, s = math.cos(beta), math.sin(beta)
    return pts @ np.array([[c, s], [-s, c]])


def test_straight_centerline_is_zero():
    v = kin.extract_link_variables(kin.CenterlineFrame(0.0, straight()))
    assert v.h == (0.0, 0.0, 0.0, 0.0) and v.theta == (0.0, 0.0, 0.0)


def test_rigid_rotation_fixed_axis():
    beta = 0.37
    v = kin.extract_link_variables(kin.CenterlineFrame(0.0, straight(angle=beta)), axis=(1.0, 0.0))
    assert np.allclose(v.theta, beta, atol=1e-14)


@given(beta=st.floats(-3.0, 3.0), bend=st.floats(-0.8, 0.8))
def test_head_axis_follows_rotation(beta, bend):
    pts = arc_points(2.0 / max(abs(bend), 1e-3) * math.copysign(1, bend or 1), 1.0, 40) if bend else straight(40)
    a = kin.extract_link_variables(kin.CenterlineFrame(0.0, pts))
    b = kin.extract_link_variables(kin.CenterlineFrame(0.0, rotate(pts, beta)))
    assert np.allclose(a.theta, b.theta, atol=1e-9)
    assert np.allclose(a.h, b.h, atol=1e-9)


def arc_points(R, length, n):
    phi = np.linspace(0, length / R, n)
    return np.column_stack([R * np.sin(phi), R * (1 - np.cos(phi))])


def arc_oracle(R, length, fractions):
    # chord between arc parameters a and b makes angle (a + b) / 2 with the tangent at 0
    phi = np.asarray(fractions) * length / R
    h = R * (1 - np.cos(phi))
    theta = 0.5 * (phi[:-1] + phi[1:])
    return h, theta


@pytest.mark.parametrize("R", [0.8, 2.0, -1.5])
def test_circular_arc_against_oracle(R):
    pts = arc_points(R, 1.0, 4001)
    v = kin.extract_link_variables(kin.CenterlineFrame(0.0, pts), axis=(1.0, 0.0))
    h, theta = arc_oracle(R, 1.0, kin.DEFAULT_STATIONS)
    # polyline chords shorten arclength by O(ds^2)
    assert np.allclose(v.theta, theta, atol=1e-6)
    assert np.allclose(v.h, h, atol=1e-6)


@settings(deadline=None)
@given(scale=st.floats(1e-3, 1e3), R=st.floats(0.5, 5.0))
def test_scaling_equivariance(scale, R):
    pts = arc_points(R, 1.0, 60)
    a = kin.extract_link_variables(kin.CenterlineFrame(0.0, pts))
    b = kin.extract_link_variables(kin.CenterlineFrame(0.0, pts * scale))
    assert np.allclose(np.array(b.h), scale * np.array(a.h), rtol=1e-9, atol=1e-12 * scale)
    assert np.allclose(b.theta, a.theta, atol=1e-10)


def test_left_of_axis_is_positive():
    pts = arc_points(1.0, 1.0, 100)  # bends towards +y
    v = kin.extract_link_variables(kin.CenterlineFrame(0.0, pts))
    assert all(h > 0 for h in v.h) and all(th > 0 for th in v.theta)


def test_geometry_errors():
    with pytest.raises(GeometryError):
        kin.CenterlineFrame(0.0, np.zeros((3, 2)))
    with pytest.raises(GeometryError):
        kin.extract_link_variables(kin.CenterlineFrame(0.0, np.ones((5, 2))))
    with pytest.raises(ConfigurationError):
        kin.extract_link_variables(kin.CenterlineFrame(0.0, straight()), (0.5, 0.25, 0.75, 1.0))


def test_centerline_csv_round_trip(tmp_path):
    p = tmp_path / "c.csv"
    lines = ["t_seconds,point_index,x_meters,y_meters"]
    for t in (0.0, 0.04):
        for i, (x, y) in reversed(list(enumerate(straight(6, angle=t)))):
            lines.append(f"{t},{i},{float(x)!r},{float(y)!r}")
    p.write_text("\n".join(lines) + "\n")
    frames = kin.read_centerlines(p)
    assert [f.t for f in frames] == [0.0, 0.04]
    assert np.allclose(frames[1].points, straight(6, angle=0.04))
    out = tmp_path / "v.csv"
    kin.write_link_variables(out, [kin.extract_link_variables(f, axis=(1, 0)) for f in frames])
    text = out.read_text().splitlines()
    assert text[0] == "t,h1,h2,h3,h4,theta1,theta2,theta3"
    assert float(text[2].split(",")[5]) == pytest.approx(0.04)


def test_centerline_csv_errors(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("t,i,x,y\n0,0,0,0\n")
    with pytest.raises(IngestionError):
        kin.read_centerlines(p)
    p.write_text("t_seconds,point_index,x_meters,y_meters\n0,0,zero,0\n")
    with pytest.raises(IngestionError):
        kin.read_centerlines(p)


def periodic_t(n=400, cycles=2):
    return np.arange(n) * T * cycles / n


def test_fit_sine_exact():
    t = periodic_t()
    f = kin.fit_sine(t, 0.1 + 0.6 * np.sin(2 * np.pi * t / T + 0.7), T)
    assert f.rms_residual <= 1e-10
    assert f.amplitude == pytest.approx(0.6, abs=1e-10)
    assert f.phase == pytest.approx(0.7, abs=1e-10) and f.offset == pytest.approx(0.1, abs=1e-10)


def test_fit_sine_constant_and_errors():
    t = periodic_t()
    f = kin.fit_sine(t, np.full_like(t, 2.5), T)
    assert f.amplitude == pytest.approx(0.0, abs=1e-12) and f.offset == pytest.approx(2.5)
    with pytest.raises(FitError):
        kin.fit_sine(np.arange(10) * T, np.ones(10), T)
    with pytest.raises(FitError):
        kin.fit_sine(t[:5], t[:5], T)
    with pytest.raises(FitError):
        kin.fit_sine(np.linspace(0, T / 2, 20), np.ones(20), T)


def test_cambered_signal_fits_worse():
    t = periodic_t()
    sine = kin.fit_sine(t, wf.angle(wf.WaveformSpec("sine"), t), T)
    camb = kin.fit_sine(t, wf.angle(wf.WaveformSpec("cambering", B=2.0), t), T)
    assert camb.rms_residual > sine.rms_residual


def test_shape_metrics_pure_sine():
    t = periodic_t()
    m = kin.shape_metrics(t, 0.3 + np.sin(2 * np.pi * t / T + 1.1), T)
    assert abs(m.skewness) <= 1e-6 and abs(m.asymmetry_index) <= 1e-6 and abs(m.cambering_index) <= 1e-6


def test_shape_metrics_cambering_two():
    t = periodic_t()
    m = kin.shape_metrics(t, wf.angle(wf.WaveformSpec("cambering", B=2.0, phase=0.5), t), T)
    assert m.cambering_index == pytest.approx(2.0, abs=0.05)


@settings(deadline=None, max_examples=30)
@given(B=st.floats(0.5, 4.0), phase=st.floats(-math.pi, math.pi), amp=st.floats(0.1, 1.0))
def test_cambering_round_trip(B, phase, amp):
    t = periodic_t(256, 1)
    y = wf.angle(wf.WaveformSpec("cambering", amplitude=amp, B=B, phase=phase), t)
    assert kin.shape_metrics(t, y, T).cambering_index == pytest.approx(B, rel=0.025)


def test_shape_metrics_time_reversal_skewness(rng):
    t = periodic_t(300, 1)
    y = np.sin(2 * np.pi * t / T) + 0.4 * np.sin(4 * np.pi * t / T + 0.3) + 0.2 * np.cos(6 * np.pi * t / T)
    a = kin.shape_metrics(t, y, T)
    b = kin.shape_metrics(t, y[::-1], T)
    assert abs(a.skewness) == pytest.approx(abs(b.skewness), rel=1e-12)


def test_shape_metrics_snap_is_asymmetric():
    t = periodic_t()
    hcm = kin.shape_metrics(t, wf.angle(wf.WaveformSpec("hcm_snap"), t), T)
    assert hcm.asymmetry_index > 0.01


def test_shape_metrics_constant_flag():
    t = periodic_t()
    m = kin.shape_metrics(t, np.ones_like(t), T)
    assert not m.defined and math.isnan(m.skewness)


def test_shape_metrics_needs_whole_periods():
    t = np.arange(100) * 0.013
    with pytest.raises(ConfigurationError):
        kin.shape_metrics(t, np.sin(t), T)
