"""Acceptance criteria 1-11 at their stated tolerances.

Every test reports one ``PASS``/``FAIL`` line (also repeated in the terminal
summary) before asserting. Window spectra of the large lattices are cached in
``$SECTORLAB_TEST_CACHE`` when set, otherwise in a per-session temp directory.
"""

import math
import os
import time

import numpy as np
import pytest
import scipy.linalg as sla

from sectorlab import lattice as L
from sectorlab import lengthspec, qbilliard, rmtstats, spectra, unfold
from sectorlab.hamiltonian import TBParams, assemble

from conftest import ACCEPTANCE_LINES, dimer, hexagon

pytestmark = pytest.mark.slow

SIZE_15 = 57_600  # 15 degree sector, criteria 6, 7, 9, 10
SIZE_60 = 50_000  # 60 degree armchair sector, criterion 8
DIRAC = (0.02, 0.2)
EDGE = (2.95, 3.0)


def report(request, number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    request.config.stash.setdefault(ACCEPTANCE_LINES, []).append(line)
    with request.config.pluginmanager.getplugin("capturemanager").global_and_fixture_disabled():
        print("\n" + line)


# --- shared spectra -------------------------------------------------------------------

class Flake:
    """A lattice with lazily assembled Hamiltonian and cached window spectra."""

    def __init__(self, spec: L.SectorSpec, cache: spectra.SpectrumCache, params: TBParams = TBParams()):
        self.lat = L.build_sector(spec)
        self.params = params
        self.H = assemble(self.lat, params)
        self.key = spectra.config_hash(spec.to_dict(), params.to_dict())
        self.cache = cache

    def window(self, lo: float, hi: float) -> np.ndarray:
        rec = self.cache.load(self.key, (lo, hi))
        if rec is None:
            rec = spectra.eig_window(self.H, lo, hi, config_hash=self.key)
            self.cache.store(rec)
        return rec.eigenvalues


@pytest.fixture(scope="session")
def cache(tmp_path_factory):
    d = os.environ.get("SECTORLAB_TEST_CACHE")
    path = tmp_path_factory.mktemp("spectra") if not d else d
    c = spectra.SpectrumCache(path)
    c.directory.mkdir(parents=True, exist_ok=True)
    return c


@pytest.fixture(scope="session")
def refs():
    return {"Poisson": rmtstats.poisson_reference(), "GOE": rmtstats.goe_reference(),
            "TwoGOE": rmtstats.two_goe_reference()}


@pytest.fixture(scope="session")
def sector15(cache):
    return Flake(L.SectorSpec(n=12, target_size=SIZE_15), cache)


@pytest.fixture(scope="session")
def sector60(cache):
    return Flake(L.SectorSpec(n=3, target_size=SIZE_60, orientation=L.Orientation.ARMCHAIR_FIRST), cache)


def ks_all(levels, refs, degree=unfold.DEFAULT_DEGREE):
    seq = unfold.polynomial_unfold(levels, None, degree)
    return seq, {k: rmtstats.ks_distance(seq, r) for k, r in refs.items()}


def goe_like(request, number, levels, refs, label):
    """Criterion 6 thresholds: KS to GOE below 0.08 and below half the Poisson distance,
    Delta3 within 20% of the GOE Monte Carlo curve for L <= 15."""
    seq, ks = ks_all(levels, refs)
    Ls = np.arange(1.0, 15.01, 1.0)
    ratio = np.array([rmtstats.delta3(seq, x) for x in Ls]) / refs["GOE"].delta3(Ls)
    worst = float(np.max(np.abs(ratio - 1)))
    ok = ks["GOE"] < 0.08 and ks["GOE"] < 0.5 * ks["Poisson"] and worst <= 0.20
    report(request, number, ok,
           f"{label}: {len(levels)} levels, KS GOE {ks['GOE']:.3f}, KS Poisson {ks['Poisson']:.3f}, "
           f"Delta3/GOE in [{ratio.min():.3f}, {ratio.max():.3f}]")
    return ok


# --- criteria ---------------------------------------------------------------------------

def test_c01_exact_small_systems(request):
    t0 = time.perf_counter()
    errs = []
    for lat, exact in ((dimer(), [-1.0, 1.0]), (hexagon(), [-2, -1, -1, 1, 1, 2])):
        H = assemble(lat)
        errs.append(np.max(np.abs(spectra.full_spectrum(H).eigenvalues - exact)))
        errs.append(np.max(np.abs(spectra.eig_window(H, -2.5, 2.5).eigenvalues - exact)))
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-12 and elapsed < 1.0
    report(request, 1, ok, f"max error {max(errs):.1e}, {elapsed:.3f} s")
    assert ok


P = L.Perturbation
K = L.PerturbationKind
CHIRAL_LATTICES = [
    L.SectorSpec(n=12, target_size=3000),
    L.SectorSpec(n=6, target_size=3000, orientation=L.Orientation.ARMCHAIR_FIRST),
    L.SectorSpec(n=3, target_size=3000),
    L.SectorSpec(n=2, target_size=2000),
    L.SectorSpec(n=12, target_size=3000, perturbations=(P(K.REMOVE_EDGE_ROW, L.Edge.FIRST),)),
    L.SectorSpec(n=3, target_size=3000, orientation=L.Orientation.ARMCHAIR_FIRST,
                 perturbations=(P(K.REMOVE_EDGE_ROW, L.Edge.SECOND),)),
    L.SectorSpec(n=12, target_size=3000, perturbations=(P(K.ADD_EDGE_ROW, L.Edge.SECOND),)),
    L.SectorSpec(n=12, target_size=3000, perturbations=(P(K.REMOVE_TIP_ATOMS, count=5),)),
    L.SectorSpec(n=12, target_size=19_900),
]


def _dense_eigvalsh(H) -> np.ndarray:
    # transpose of the symmetric C-ordered array is Fortran-ordered: LAPACK works in place
    a = H.matrix.toarray().T
    return sla.eigvalsh(a, overwrite_a=True, check_finite=False, driver="evd")


def test_c02_chiral_symmetry(request):
    t0 = time.perf_counter()
    worst = 0.0
    sizes = []
    for spec in CHIRAL_LATTICES:
        lat = L.build_sector(spec)
        assert lat.N <= 20_000
        H = assemble(lat)
        w = _dense_eigvalsh(H)
        del H
        worst = max(worst, float(np.max(np.abs(w + w[::-1]))))
        sizes.append(lat.N)
    ok = worst <= 1e-10
    report(request, 2, ok, f"{len(sizes)} lattices, N {min(sizes)}..{max(sizes)}, "
                           f"max|l_k + l_N+1-k| {worst:.1e}, {time.perf_counter() - t0:.0f} s")
    assert ok


def test_c03_inertia_consistency(request, desk_sector):
    H = assemble(desk_sector)
    dense = spectra.full_spectrum(H).eigenvalues
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(50):
        lo, hi = np.sort(rng.uniform(-3.1, 3.1, 2))
        expected = int(np.sum((dense >= lo) & (dense < hi)))
        got = spectra.count_below(H, hi) - spectra.count_below(H, lo)
        mismatches += got != expected
    ok = mismatches == 0
    report(request, 3, ok, f"N {desk_sector.N}, {mismatches}/50 windows disagree with dense counts")
    assert ok


def test_c04_rmt_oracles(request):
    from scipy import stats

    s = np.concatenate([rmtstats.spacings(rmtstats.sample_goe(400, seed)) for seed in range(200)])
    ks_goe = stats.kstest(s, rmtstats.goe_surmise_cdf).statistic
    ks_poisson = rmtstats.ks_distance(rmtstats.sample_poisson(100_000, 7), rmtstats.poisson_reference())
    ok = ks_goe < 0.02 and ks_poisson < 0.01
    report(request, 4, ok, f"GOE pool vs Wigner {ks_goe:.4f}, Poisson {ks_poisson:.4f}")
    assert ok


def test_c05_quantum_sector_billiard(request, refs):
    alpha = math.pi / 12
    levels = qbilliard.lowest_levels(alpha, 3000)
    k = np.array([lv.k for lv in levels])
    # staircase midpoint between the last kept level and the next one
    k_next = qbilliard.lowest_levels(alpha, 3001)[-1].k
    weyl = qbilliard.weyl_count(0.5 * (k[-1] + k_next), alpha)
    weyl_err = abs(weyl - 3000) / 3000
    seq, ks = ks_all(k, refs)
    Ls = np.arange(5.0, 20.01, 1.0)
    ratio = np.array([rmtstats.delta3(seq, x) for x in Ls]) / (Ls / 15)
    ok = weyl_err < 0.02 and ks["Poisson"] < 0.05 and np.all(np.abs(ratio - 1) <= 0.15)
    report(request, 5, ok, f"Weyl {weyl_err:.2%}, KS Poisson {ks['Poisson']:.3f}, "
                           f"Delta3/(L/15) in [{ratio.min():.3f}, {ratio.max():.3f}]")
    assert ok


def test_c06_dirac_window_goe(request, sector15, refs):
    assert goe_like(request, 6, sector15.window(*DIRAC), refs, f"N {sector15.lat.N}")


def test_c07_band_edge_window(request, sector15, refs):
    e = sector15.window(*EDGE)
    _, ks = ks_all(e, refs)
    lat = sector15.lat
    k_max = 2 * lat.L0 * math.sqrt(3.0 - EDGE[0])
    billiard = qbilliard.sector_spectrum(lat.alpha, k_max, check_weyl=False)
    match = qbilliard.match_band_edge(e, lat.L0, billiard)
    frac = match.fraction_near_median(0.02, 300)
    ok = ks["Poisson"] < 0.08 and frac >= 0.90
    report(request, 7, ok, f"{len(e)} levels, KS Poisson {ks['Poisson']:.3f}, "
                           f"{frac:.1%} of 300 ratios within 2% of median {match.median_ratio():.4f}")
    assert ok


def test_c08_sixty_degree_armchair(request, sector60, cache, refs):
    _, ks_dirac = ks_all(sector60.window(*DIRAC), refs)
    cut = (L.Perturbation(L.PerturbationKind.REMOVE_EDGE_ROW, L.Edge.SECOND),)
    removed = Flake(L.SectorSpec(n=3, target_size=SIZE_60, orientation=L.Orientation.ARMCHAIR_FIRST,
                                 perturbations=cut), cache)
    _, ks_removed = ks_all(removed.window(*DIRAC), refs)
    high = sector60.window(0.7, 0.8)
    _, ks_high = ks_all(high, refs)
    ok = (ks_dirac["Poisson"] < 0.10 and ks_removed["GOE"] < 0.08 and ks_high["TwoGOE"] < 0.08
          and ks_high["TwoGOE"] < min(ks_high["GOE"], ks_high["Poisson"]))
    report(request, 8, ok,
           f"N {sector60.lat.N}: Dirac KS Poisson {ks_dirac['Poisson']:.3f}; edge row removed KS GOE "
           f"{ks_removed['GOE']:.3f}; [0.7, 0.8) {len(high)} levels KS TwoGOE {ks_high['TwoGOE']:.3f} "
           f"(GOE {ks_high['GOE']:.3f}, Poisson {ks_high['Poisson']:.3f})")
    assert ok


def dos_minimum(centres, counts):
    """Position of the smallest 3-bin moving average of the level counts; ties are averaged."""
    smooth = np.convolve(counts, np.ones(3) / 3, mode="valid")
    mid = centres[1:-1]
    return float(np.mean(mid[np.isclose(smooth, smooth.min())]))


def test_c09_next_nearest_hopping(request, cache, refs):
    params = TBParams(t=2.8, t_prime=0.28)
    flake = Flake(L.SectorSpec(n=12, target_size=SIZE_15), cache, params)
    e_dirac = 3 * params.t_prime_over_t
    # bins of half the tolerance; inertia counts are exact, so the histogram is the finite-flake DOS
    edges = np.round(np.arange(0.0, 0.6 + 1e-9, 0.01), 10)
    counts = spectra.level_counts(flake.H, edges).astype(float)
    centres = 0.5 * (edges[1:] + edges[:-1])
    e0 = dos_minimum(centres, counts)
    shift_ok = abs(e0 - e_dirac) <= 0.02
    report(request, 9, shift_ok, f"DOS minimum at {e0:.3f} t (expected {e_dirac:.3f} t), "
                                 f"{int(counts.min())} levels in the emptiest 0.01 t bin")
    window = (e_dirac + DIRAC[0], e_dirac + DIRAC[1])
    nnsd_ok = goe_like(request, 9, flake.window(*window), refs, f"window [{window[0]:.2f}, {window[1]:.2f})")
    assert shift_ok and nnsd_ok


def test_c10_length_spectra(request, sector15):
    alpha = math.pi / 12
    k = np.array([lv.k for lv in qbilliard.lowest_levels(alpha, 1500)])
    qb = lengthspec.to_wavevectors(k, "QuantumBilliard")
    l_max = 10.0
    grid = np.arange(0.5, l_max, 2 * np.pi / qb.span / 4)
    spec = lengthspec.length_spectrum(qb, grid)
    orbits = lengthspec.enumerate_orbits(alpha, l_max + 1, p_max=60)
    peaks = spec.peaks(3.0, l_min=1.0)
    d = lengthspec.nearest_orbit_distance(peaks, orbits) / spec.resolution
    qb_ok = len(peaks) > 0 and bool(np.all(d <= 1.0))
    report(request, 10, qb_ok, f"billiard: {len(peaks)} peaks in [1, {l_max:g}], "
                               f"max distance to an orbit {d.max():.2f} dl")

    e = sector15.window(*EDGE)
    g = lengthspec.to_wavevectors(e, "BandEdge", sector15.lat.L0)
    qb_same = lengthspec.to_wavevectors(k[k <= g.values[-1]], "QuantumBilliard")
    grid_g = np.arange(0.5, l_max, 2 * np.pi / g.span / 4)
    Fg = lengthspec.length_spectrum(g, grid_g)
    Fq = lengthspec.length_spectrum(qb_same, grid_g)
    dg, dq = Fg.dominant_peaks(6, l_min=1.0), Fq.dominant_peaks(6, l_min=1.0)
    miss = np.array([np.min(np.abs(dq - x)) for x in dg]) / Fg.resolution
    edge_ok = bool(np.all(miss <= 2.0))
    report(request, 10, edge_ok, f"graphene band edge: dominant peaks {np.round(dg, 2).tolist()} "
                                 f"within {miss.max():.2f} dl of billiard peaks")
    assert qb_ok and edge_ok


def test_c11_two_goe_reference(request, refs):
    table = rmtstats.two_goe_table()
    p0 = float(refs["TwoGOE"].pdf(0.0))
    Ls = np.array([2.0, 5.0, 10.0, 20.0, 30.0])
    rule = 2 * refs["GOE"].delta3(Ls / 2)
    dev = np.abs(refs["TwoGOE"].delta3(Ls) / rule - 1)
    ok = abs(p0 - 0.5) <= 0.03 and np.all(dev <= 0.05)
    report(request, 11, ok, f"P(0) {p0:.4f} from {table.n_spacings} spacings; "
                            f"Delta3 superposition deviation {dev.max():.2%}")
    assert ok
