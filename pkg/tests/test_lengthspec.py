import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sectorlab import lengthspec as LS


def test_dirac_conversion():
    L0 = 250.0
    seq = LS.to_wavevectors([math.sqrt(3) / (2 * L0)], "Dirac", L0=L0)
    assert seq.values[0] == pytest.approx(1.0, rel=1e-14)
    shifted = LS.to_wavevectors([0.3 + math.sqrt(3) / (2 * L0)], "Dirac", L0=L0, E_dirac=0.3)
    assert shifted.values[0] == pytest.approx(1.0, rel=1e-10)


def test_band_edge_conversion():
    seq = LS.to_wavevectors([3.0, 2.99], "BandEdge", L0=100.0)
    np.testing.assert_allclose(seq.values, [0.0, 2 * 100 * math.sqrt(0.01)])
    assert seq.regime is LS.Regime.BAND_EDGE


def test_billiard_passthrough():
    k = np.array([5.0, 7.5, 9.0])
    np.testing.assert_array_equal(LS.to_wavevectors(k, "QuantumBilliard").values, k)


def test_regime_mismatch_warns():
    with pytest.warns(UserWarning):
        LS.to_wavevectors([2.5], "Dirac", L0=10.0)
    with pytest.warns(UserWarning):
        LS.to_wavevectors([0.1], "BandEdge", L0=10.0)


def test_single_wavevector_flat():
    seq = LS.WavevectorSeq(np.array([3.7]), "QuantumBilliard", 1.0)
    with pytest.warns(UserWarning):
        spec = LS.length_spectrum(seq, np.linspace(0, 10, 50))
    np.testing.assert_allclose(spec.F, spec.F[0], rtol=1e-12)


def test_picket_fence_comb():
    q = np.arange(1, 401) * math.pi / 2
    seq = LS.WavevectorSeq(q, "QuantumBilliard", 1.0)
    l = np.arange(0.5, 17.0, 0.002)
    spec = LS.length_spectrum(seq, l)
    np.testing.assert_allclose(spec.dominant_peaks(4), [4.0, 8.0, 12.0, 16.0], atol=0.003)
    # with a flat taper the comb is still there, buried in sinc sidelobes
    flat = LS.length_spectrum(seq, l, LS.rectangular)
    np.testing.assert_allclose(flat.dominant_peaks(4), [4.0, 8.0, 12.0, 16.0], atol=0.003)


@given(st.integers(0, 1000), st.floats(-50, 50))
def test_modulus_invariant_under_global_shift(seed, c):
    rng = np.random.default_rng(seed)
    q = np.sort(rng.uniform(10, 60, 150))
    l = np.linspace(0.1, 8, 300)
    a = LS.length_spectrum(LS.WavevectorSeq(q, "QuantumBilliard", 1.0), l).F
    b = LS.length_spectrum(LS.WavevectorSeq(q + abs(c) + 1, "QuantumBilliard", 1.0), l).F
    assert np.all(a >= 0)
    np.testing.assert_allclose(a, b, rtol=1e-7, atol=1e-9)


def test_resolution_and_grid_warning():
    q = np.linspace(0, 100, 200)
    seq = LS.WavevectorSeq(q, "QuantumBilliard", 1.0)
    with pytest.warns(UserWarning, match="coarser"):
        spec = LS.length_spectrum(seq, np.linspace(0, 10, 5))
    assert spec.resolution == pytest.approx(2 * math.pi / 100)
    with pytest.raises(LS.LengthSpecError):
        LS.length_spectrum(LS.WavevectorSeq(np.empty(0), "Dirac", 1.0), [1.0])


def test_wavevector_invariants():
    with pytest.raises(LS.LengthSpecError):
        LS.WavevectorSeq(np.array([2.0, 1.0]), "Dirac", 1.0)


# --- ray tracing -----------------------------------------------------------------------

def test_normal_incidence_on_arc_retraces():
    alpha = math.pi / 6
    u = np.array([math.cos(alpha / 2), math.sin(alpha / 2)])
    tr = LS.ray_trace(alpha, 0.5 * u, u, max_length=1.0)
    assert tr.bounces == 1 and tr.length == pytest.approx(1.0)
    np.testing.assert_allclose(tr.points[-1], 0.5 * u, atol=1e-12)
    np.testing.assert_allclose(tr.final_direction, -u, atol=1e-12)


def test_apex_hit_flagged():
    alpha = math.pi / 6
    u = np.array([math.cos(alpha / 2), math.sin(alpha / 2)])
    tr = LS.ray_trace(alpha, 0.5 * u, -u)
    assert tr.apex_hit


@pytest.mark.parametrize("n", [1, 2, 3, 12])
def test_containment_and_speed(n):
    alpha = math.pi / n
    rng = np.random.default_rng(n)
    for _ in range(3):
        r, phi, th = rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.95) * alpha, rng.uniform(0, 2 * math.pi)
        start = np.array([r * math.cos(phi), r * math.sin(phi)])
        tr = LS.ray_trace(alpha, start, [math.cos(th), math.sin(th)], max_bounces=10_000)
        p = tr.points
        rho = np.hypot(p[:, 0], p[:, 1])
        assert np.all(rho <= 1 + 1e-9)
        assert np.all(p[:, 1] >= -1e-9)
        assert np.all(p[:, 0] * math.sin(alpha) - p[:, 1] * math.cos(alpha) >= -1e-9)
        seg = np.linalg.norm(np.diff(p, axis=0), axis=1).sum()
        assert seg == pytest.approx(tr.length, rel=1e-9)
        assert np.linalg.norm(tr.final_direction) == pytest.approx(1.0, abs=1e-12)


def test_ray_trace_validation():
    with pytest.raises(LS.LengthSpecError):
        LS.ray_trace(math.pi / 4, [2.0, 0.1], [1.0, 0.0])
    with pytest.raises(LS.LengthSpecError):
        LS.ray_trace(math.pi / 4, [0.5, 0.1], [1.0, 1.0])


# --- periodic orbits -------------------------------------------------------------------

def test_diameter_and_triangle():
    half = LS.enumerate_orbits(math.pi, 6.0)
    by_pw = {(o.p, o.w, o.order): o for o in half}
    assert by_pw[(2, 1, 1)].length == pytest.approx(4.0, abs=1e-12)
    assert by_pw[(3, 1, 1)].length == pytest.approx(3 * math.sqrt(3), abs=1e-12)
    assert by_pw[(2, 1, 1)].kind == "diameter"


def test_sixty_degree_lengths():
    lengths = [o.length for o in LS.enumerate_orbits(math.pi / 3, 6.0)]
    assert any(abs(x - 4.0) < 1e-12 for x in lengths)  # diameter folds twice
    assert any(abs(x - math.sqrt(3)) < 1e-12 for x in lengths)  # triangle closes after one bounce


@pytest.mark.parametrize("n", [2, 3, 12])
def test_every_orbit_ray_traced(n):
    alpha = math.pi / n
    orbits = LS.enumerate_orbits(alpha, 12.0)
    assert orbits and all(o.closure < LS.CLOSURE_TOL for o in orbits)
    for o in orbits[:: max(1, len(orbits) // 25)]:
        if o.order == 1:
            assert LS.validate_orbit(alpha, o.length, o.p, o.w) < 1e-6
    lengths = np.array([o.length for o in orbits])
    assert np.all(lengths > 0) and np.all(np.diff(lengths) > 1e-9)


def test_enumerate_orbits_limits():
    with pytest.raises(LS.LengthSpecError):
        LS.enumerate_orbits(math.pi / 12, 60.0)
    with pytest.raises(LS.LengthSpecError):
        LS.enumerate_orbits(0.3, 10.0)


def test_exports(tmp_path):
    orbits = LS.enumerate_orbits(math.pi / 3, 8.0)
    lines = LS.write_orbits_csv(orbits, tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "length,order,p,w,type" and len(lines) == len(orbits) + 1
    seq = LS.WavevectorSeq(np.linspace(1, 200, 300), "QuantumBilliard", 1.0)
    spec = LS.length_spectrum(seq, np.arange(0.1, 8, 0.01))
    assert spec.write_csv(tmp_path / "l.csv").read_text().startswith("l,F")
    assert LS.plot_length_spectrum(spec, orbits, tmp_path / "l.svg").exists()
    d = LS.nearest_orbit_distance([4.0, 4.5], orbits)
    assert d[0] == pytest.approx(0.0, abs=1e-12)
