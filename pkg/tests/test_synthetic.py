"""Synthetic reference systems and the marker video renderer."""

import math

import numpy as np
import pytest

from vidrom import BoundsError, DivergenceError, InputError, ShapeError
from vidrom.synthetic import (
    DoublePendulumParams,
    HopfParams,
    dp_derivatives,
    dp_energy,
    dp_tip_position,
    hopf_derivatives,
    integrate,
    make_textured_marker,
    render_marker_video,
)

from oracles import dp_small_angle_frequencies


def test_energy_constants():
    p = DoublePendulumParams()
    a, b, c, d, e = p.energy_constants
    # C, D, E follow directly from the primitive parameters
    assert c == pytest.approx(0.5 * 0.114 * 0.200 * 0.180, abs=1e-15)
    assert d == pytest.approx((0.5 * 0.253 + 0.114) * 9.81 * 0.200, abs=1e-12)
    assert e == pytest.approx(0.5 * 0.114 * 9.81 * 0.180, abs=1e-12)
    # A and B carry the end-capped rod inertia
    assert p.inertia[0] == pytest.approx(0.001030998914, abs=1e-11)
    assert p.inertia[1] == pytest.approx(0.0003848454488, abs=1e-12)
    assert a == pytest.approx(0.004060499457, abs=1e-11)
    assert b == pytest.approx(0.0006541227244, abs=1e-12)


def test_dp_hanging_equilibrium():
    p = DoublePendulumParams()
    assert np.array_equal(dp_derivatives([0.0, 0.0, 0.0, 0.0], p), np.zeros(4))
    _, _, _, d, e = p.energy_constants
    assert dp_energy([0.0, 0.0, 0.0, 0.0], p) == pytest.approx(-(d + e), abs=1e-15)
    assert dp_energy([0.0, 0.0, 0.0, 0.0], p) == pytest.approx(-0.5725116, abs=1e-9)


def test_dp_tip_position():
    p = DoublePendulumParams()
    hang = dp_tip_position([0.0, 0.0], p)
    assert np.allclose(hang, [0.0, -(p.l1 + p.l2)], atol=1e-15)
    right = dp_tip_position([math.pi / 2, math.pi / 2], p)
    assert np.allclose(right, [p.l1 + p.l2, 0.0], atol=1e-12)
    tip = dp_tip_position([math.pi / 6, math.pi / 3], p)
    assert tip[0] == pytest.approx(0.2558845727, abs=1e-9)
    assert tip[1] == pytest.approx(-0.2632050808, abs=1e-9)


def test_dp_energy_conserved_without_damping():
    p = DoublePendulumParams(beta1=0.0, beta2=0.0)
    states = integrate(lambda s: dp_derivatives(s, p), [0.4, 0.4, 0.0, 0.0], 1e-3, 2000)
    energies = np.array([dp_energy(s, p) for s in states])
    assert np.abs(energies - energies[0]).max() < 1e-9


def test_dp_energy_decays_with_damping():
    p = DoublePendulumParams()
    states = integrate(lambda s: dp_derivatives(s, p), [0.5, 0.3, 0.0, 0.0], 1e-3, 3000)
    energies = np.array([dp_energy(s, p) for s in states])
    assert np.all(np.diff(energies) <= 1e-12)
    assert energies[-1] < energies[0]


def test_dp_small_angle_frequency_matches_eigenproblem():
    p = DoublePendulumParams(beta1=0.0, beta2=0.0)
    freqs = dp_small_angle_frequencies(p)
    assert freqs[0] == pytest.approx(6.35605033, abs=1e-6)
    assert freqs[1] == pytest.approx(13.53874651, abs=1e-6)
    # integrate a tiny slow-mode motion and read the period off theta1
    a, b, c, d, e = p.energy_constants
    mass = np.array([[2 * a, c], [c, 2 * b]])
    stiff = np.array([[d, 0.0], [0.0, e]])
    evals, evecs = np.linalg.eig(np.linalg.solve(mass, stiff))
    shape = evecs[:, np.argmin(evals)].real
    x0 = 1e-3 * shape / np.abs(shape).max()
    dt = 1e-3
    states = integrate(
        lambda s: dp_derivatives(s, p), [x0[0], x0[1], 0.0, 0.0], dt, 4000
    )
    th1 = states[:, 0]
    sign_flips = np.nonzero(np.diff(np.sign(th1)))[0]
    crossings = []
    for i in sign_flips:
        frac = th1[i] / (th1[i] - th1[i + 1])
        crossings.append((i + frac) * dt)
    period = 2.0 * np.mean(np.diff(crossings))
    assert 2.0 * np.pi / period == pytest.approx(freqs[0], rel=1e-3)


def test_hopf_limit_cycle():
    params = HopfParams(0.08, 2.0, -0.5, 0.3)
    assert params.limit_radius == pytest.approx(0.4, abs=1e-15)
    states = integrate(lambda s: hopf_derivatives(s, params), [0.15, 0.0], 0.01, 8000)
    assert np.linalg.norm(states[-1]) == pytest.approx(0.4, rel=1e-3)
    with pytest.raises(InputError):
        HopfParams(-0.08, 2.0, -0.5, 0.3).limit_radius


def test_integrate_validation_and_divergence():
    grow = lambda s: s
    with pytest.raises(DivergenceError) as info:
        integrate(grow, [1.0], 0.1, 500, bound=100.0)
    assert 0.0 < info.value.time <= 50.0
    with pytest.raises(InputError):
        integrate(grow, [1.0], 0.0, 10)
    with pytest.raises(InputError):
        integrate(grow, [1.0], 0.1, -1)
    only_start = integrate(grow, [1.0, 2.0], 0.1, 0)
    assert np.array_equal(only_start, [[1.0, 2.0]])


def test_integrate_rk4_accuracy():
    rhs = lambda s: np.array([s[1], -s[0]])
    steps = 200
    dt = 2.0 * np.pi / steps
    states = integrate(rhs, [1.0, 0.0], dt, steps)
    assert np.allclose(states[-1], [1.0, 0.0], atol=1e-5)


def test_textured_marker():
    m = make_textured_marker(21, seed=7)
    assert m.intensities.shape == (21, 21, 1)
    assert not m.mask[0, 0] and not m.mask[0, 20]
    assert m.mask[10, 10] and m.mask[0, 10]
    assert m.intensities.min() >= 0.1 and m.intensities.max() <= 0.95
    again = make_textured_marker(21, seed=7)
    assert np.array_equal(m.intensities, again.intensities)
    other = make_textured_marker(21, seed=8)
    assert not np.array_equal(m.intensities, other.intensities)
    rgb = make_textured_marker(9, seed=1, channels=3)
    assert rgb.intensities.shape == (9, 9, 3)
    with pytest.raises(InputError):
        make_textured_marker(10)
    with pytest.raises(InputError):
        make_textured_marker(1)
    with pytest.raises(InputError):
        make_textured_marker(9, channels=2)


def test_render_marker_video_static():
    marker = make_textured_marker(9, seed=3)
    seq = render_marker_video([10], [12], [0.0], marker, (32, 24), 60.0)
    assert len(seq) == 1 and seq.frame_rate == 60.0
    frame = seq[0].intensities
    assert frame.shape == (24, 32, 1)
    patch = frame[8:17, 6:15]
    assert np.array_equal(patch[marker.mask], marker.intensities[marker.mask])
    assert np.all(patch[~marker.mask] == 0.5)
    assert frame[0, 0, 0] == 0.5


def test_render_marker_video_rotation_is_exact_at_quarter_turn():
    marker = make_textured_marker(9, seed=3)
    seq = render_marker_video([10, 10], [12, 12], [0.0, 90.0], marker, (32, 24), 30.0)
    plain = seq[0].intensities[8:17, 6:15, 0]
    turned = seq[1].intensities[8:17, 6:15, 0]
    inside = marker.mask
    assert np.allclose(turned[inside], np.rot90(plain, -1)[inside])


def test_render_marker_video_errors():
    marker = make_textured_marker(9, seed=3)
    with pytest.raises(BoundsError):
        render_marker_video([2], [12], [0.0], marker, (32, 24), 30.0)
    with pytest.raises(InputError):
        render_marker_video([10.4], [12], [0.0], marker, (32, 24), 30.0)
    with pytest.raises(ShapeError):
        render_marker_video([10], [12], [0.0, 0.0], marker, (32, 24), 30.0)
    from vidrom import Frame

    bad_bg = Frame(np.full((10, 10, 1), 0.5))
    with pytest.raises(ShapeError):
        render_marker_video([10], [12], [0.0], marker, (32, 24), 30.0, bad_bg)
