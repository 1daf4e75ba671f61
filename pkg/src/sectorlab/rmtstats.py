"""Spectral fluctuation statistics and random-matrix reference ensembles.

Nearest-neighbour spacing distributions use Wigner surmises for GOE and GUE
and the exponential law for Poisson. Delta_3 references for the Gaussian
ensembles, and every curve of the two-GOE superposition, are Monte Carlo
tables built from :func:`sample_goe`.
"""

from __future__ import annotations

import enum
import functools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import special, stats

from .unfold import UnfoldedSequence, UnfoldMethod

DEFAULT_BIN_WIDTH = 0.25
DEFAULT_S_MAX = 4.0
MIN_KS_SPACINGS = 100
PARITY_THRESHOLD = 0.9
# Delta_3 reference tables are tabulated on this grid of interval lengths.
L_GRID = np.arange(0.5, 40.01, 0.5)


class StatsError(ValueError):
    pass


class Ensemble(str, enum.Enum):
    POISSON = "Poisson"
    GOE = "GOE"
    GUE = "GUE"
    TWO_GOE = "TwoGOE"


@dataclass(frozen=True, eq=False)
class EnsembleRef:
    kind: Ensemble
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    delta3: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)


# --- closed forms -----------------------------------------------------------------

def poisson_pdf(s):
    s = np.asarray(s, dtype=float)
    return np.where(s >= 0, np.exp(-np.clip(s, 0, None)), 0.0)


def poisson_cdf(s):
    s = np.clip(np.asarray(s, dtype=float), 0, None)
    return -np.expm1(-s)


def goe_surmise_pdf(s):
    s = np.clip(np.asarray(s, dtype=float), 0, None)
    return 0.5 * np.pi * s * np.exp(-0.25 * np.pi * s**2)


def goe_surmise_cdf(s):
    s = np.clip(np.asarray(s, dtype=float), 0, None)
    return -np.expm1(-0.25 * np.pi * s**2)


def gue_surmise_pdf(s):
    s = np.clip(np.asarray(s, dtype=float), 0, None)
    return 32.0 / np.pi**2 * s**2 * np.exp(-4.0 * s**2 / np.pi)


def gue_surmise_cdf(s):
    s = np.clip(np.asarray(s, dtype=float), 0, None)
    return special.erf(2 * s / np.sqrt(np.pi)) - 4 * s / np.pi * np.exp(-4 * s**2 / np.pi)


def two_goe_surmise_pdf(s):
    """Superposition of two equal-weight Wigner-surmise sequences.

    The gap probability is ``E(s) = erfc(sqrt(pi) s / 4)^2`` and the density its
    second derivative. Used only to cross-check the Monte Carlo table.
    """
    s = np.clip(np.asarray(s, dtype=float), 0, None)
    return 0.5 * np.exp(-np.pi * s**2 / 8) + np.pi * s / 8 * special.erfc(np.sqrt(np.pi) * s / 4) * np.exp(
        -np.pi * s**2 / 16
    )


def poisson_delta3(L):
    return np.asarray(L, dtype=float) / 15.0


# --- samplers ----------------------------------------------------------------------

def _semicircle_count(E, radius: float, dim: int):
    x = np.clip(E / radius, -1.0, 1.0)
    return dim * (0.5 + (x * np.sqrt(1 - x**2) + np.arcsin(x)) / np.pi)


def sample_goe(dim: int, seed: int) -> UnfoldedSequence:
    """Central half of a GOE spectrum unfolded with the semicircle law.

    ``H = (A + A^T)/2`` with standard normal ``A``: diagonal variance 1,
    off-diagonal variance 1/2, semicircle radius ``sqrt(2 dim)``.
    """
    if dim < 50:
        raise StatsError("dim must be at least 50")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim))
    w = np.linalg.eigvalsh(0.5 * (a + a.T))
    x = _semicircle_count(w, np.sqrt(2.0 * dim), dim)
    q = dim // 4
    return UnfoldedSequence(x[q:dim - q], None, UnfoldMethod.ANALYTIC_DOS)


def sample_gue(dim: int, seed: int) -> UnfoldedSequence:
    """Central half of a GUE spectrum, ``H = (A + A^H)/2`` with unit complex normal entries."""
    if dim < 50:
        raise StatsError("dim must be at least 50")
    rng = np.random.default_rng(seed)
    a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    w = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    x = _semicircle_count(w, np.sqrt(2.0 * dim), dim)
    q = dim // 4
    return UnfoldedSequence(x[q:dim - q], None, UnfoldMethod.ANALYTIC_DOS)


def sample_poisson(n: int, seed: int) -> UnfoldedSequence:
    """Cumulative sums of unit-rate exponential gaps."""
    rng = np.random.default_rng(seed)
    return UnfoldedSequence(np.cumsum(rng.exponential(1.0, n)), None, UnfoldMethod.ANALYTIC_DOS)


def superpose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Merge two unit-density sequences over their common span and rescale to unit density."""
    lo, hi = max(a[0], b[0]), min(a[-1], b[-1])
    merged = np.sort(np.concatenate([a[(a >= lo) & (a <= hi)], b[(b >= lo) & (b <= hi)]]))
    return 2.0 * merged


# --- statistics ----------------------------------------------------------------------

def _values(seq) -> np.ndarray:
    return np.asarray(seq.values if isinstance(seq, UnfoldedSequence) else seq, dtype=float)


def spacings(seq) -> np.ndarray:
    return np.diff(_values(seq))


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    density: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def mass(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


def nnsd(seq, bin_width: float = DEFAULT_BIN_WIDTH, s_max: float = DEFAULT_S_MAX) -> Histogram:
    """Density histogram of nearest-neighbour spacings.

    Bins start at 0 and extend past ``s_max`` if needed so every spacing is counted.
    """
    s = spacings(seq)
    if len(s) == 0:
        raise StatsError("need at least two levels")
    top = max(s_max, float(s.max()) + bin_width)
    nb = int(np.ceil(top / bin_width - 1e-12))
    edges = bin_width * np.arange(nb + 1)
    density, _ = np.histogram(s, bins=edges, density=True)
    return Histogram(edges, density)


def _delta3_windows(x: np.ndarray, L: float, starts: np.ndarray, chunk: int = 2_000_000) -> np.ndarray:
    """Least-squares staircase deviation for each window ``[a, a+L]``.

    In local coordinates ``y_j = x_j - a`` with the staircase reset to 0 at the
    window start (the intercept absorbs the offset), the moments are exact sums:
    ``int N = sum(L - y)``, ``int u N = sum(L^2 - y^2)/2`` and
    ``int N^2 = sum((2j - 1)(L - y_j))``.
    """
    starts = np.asarray(starts, dtype=float)
    lo = np.searchsorted(x, starts, side="right")
    k = np.searchsorted(x, starts + L, side="right") - lo
    m0, m1, m2 = L, L**2 / 2, L**3 / 3
    det = m0 * m2 - m1 * m1
    out = np.empty(len(starts))
    kmax = max(int(k.max()) if len(k) else 0, 1)
    rows = max(chunk // kmax, 1)
    j = np.arange(kmax)
    for r0 in range(0, len(starts), rows):
        sl = slice(r0, r0 + rows)
        idx = np.minimum(lo[sl, None] + j, len(x) - 1)
        mask = j < k[sl, None]
        y = np.where(mask, x[idx] - starts[sl, None], L)  # padded entries contribute zero
        gap = L - y
        i0 = gap.sum(axis=1)
        i1 = 0.5 * (L * L - y * y).sum(axis=1)
        i2 = (gap * (2 * j + 1)).sum(axis=1)
        A = (m0 * i1 - m1 * i0) / det
        B = (m2 * i0 - m1 * i1) / det
        out[sl] = np.maximum(i2 - A * i1 - B * i0, 0.0) / L
    return out


def delta3(seq, L: float, n_positions: Optional[int] = None) -> float:
    """Dyson-Mehta Delta_3(L) averaged over window positions.

    Window starts are spaced ``L/4`` apart by default; ``n_positions`` spreads
    that many starts evenly instead.
    """
    x = _values(seq)
    if L <= 0:
        raise StatsError("L must be positive")
    if len(x) < 2 or x[-1] - x[0] < 2 * L:
        raise StatsError(f"sequence span too short for L={L}")
    last = x[-1] - L
    if n_positions is None:
        starts = np.arange(x[0], last + 1e-12, L / 4)
    else:
        starts = np.linspace(x[0], last, max(int(n_positions), 1))
    return float(np.mean(_delta3_windows(x, L, starts)))


def delta3_curve(seq, L_values: Iterable[float], n_positions: Optional[int] = None) -> np.ndarray:
    return np.array([delta3(seq, L, n_positions) for L in L_values])


def pooled_delta3(sequences: Sequence, L_values: Iterable[float]) -> np.ndarray:
    """Average Delta_3 over several independent sequences (weighted by window count)."""
    L_values = np.asarray(list(L_values), dtype=float)
    out = np.zeros(len(L_values))
    for i, L in enumerate(L_values):
        vals = []
        for seq in sequences:
            x = _values(seq)
            if x[-1] - x[0] < 2 * L:
                continue
            vals.append(_delta3_windows(x, L, np.arange(x[0], x[-1] - L + 1e-12, L / 4)))
        out[i] = np.mean(np.concatenate(vals)) if vals else np.nan
    return out


# --- references -----------------------------------------------------------------------

def _tabulated(L_grid: np.ndarray, values: np.ndarray):
    def f(L):
        return np.interp(L, L_grid, values)

    return f


@functools.lru_cache(maxsize=4)
def _goe_delta3_table(dim: int, n_samples: int, seed: int) -> np.ndarray:
    seqs = [sample_goe(dim, seed + i) for i in range(n_samples)]
    return pooled_delta3(seqs, L_GRID)


@functools.lru_cache(maxsize=4)
def _gue_delta3_table(dim: int, n_samples: int, seed: int) -> np.ndarray:
    seqs = [sample_gue(dim, seed + i) for i in range(n_samples)]
    return pooled_delta3(seqs, L_GRID)


def poisson_reference() -> EnsembleRef:
    return EnsembleRef(Ensemble.POISSON, poisson_pdf, poisson_cdf, poisson_delta3)


def goe_reference(dim: int = 400, n_samples: int = 200, seed: int = 0) -> EnsembleRef:
    """Wigner surmise NNSD; Monte Carlo Delta_3 (valid up to L = dim/4)."""

    def d3(L):
        return np.interp(L, L_GRID, _goe_delta3_table(dim, n_samples, seed))

    return EnsembleRef(
        Ensemble.GOE, goe_surmise_pdf, goe_surmise_cdf, d3,
        params={"dim": dim, "n_samples": n_samples, "seed": seed},
    )


def gue_reference(dim: int = 400, n_samples: int = 100, seed: int = 0) -> EnsembleRef:
    def d3(L):
        return np.interp(L, L_GRID, _gue_delta3_table(dim, n_samples, seed))

    return EnsembleRef(
        Ensemble.GUE, gue_surmise_pdf, gue_surmise_cdf, d3,
        params={"dim": dim, "n_samples": n_samples, "seed": seed},
    )


@dataclass(frozen=True, eq=False)
class TwoGOETable:
    s: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray
    L: np.ndarray
    delta3: np.ndarray
    n_spacings: int
    mean_spacing: float


@functools.lru_cache(maxsize=4)
def two_goe_table(resolution: float = 0.02, dim: int = 400, n_pairs: int = 400, seed: int = 1000) -> TwoGOETable:
    """Monte Carlo superposition of independent GOE pairs, tabulated on ``s`` and ``L`` grids.

    The pdf is the spacing histogram (bin ``resolution``) read as a piecewise
    linear curve through the bin centres, pinned at ``s = 0`` by linear
    extrapolation from the first two bins; it is renormalised to unit mass
    and the spacing axis rescaled to unit mean.
    """
    merged = []
    for i in range(n_pairs):
        a = sample_goe(dim, seed + 2 * i).values
        b = sample_goe(dim, seed + 2 * i + 1).values
        merged.append(superpose(a, b))
    sp = np.concatenate([np.diff(m) for m in merged])
    mean = float(sp.mean())
    sp = sp / mean
    edges = np.arange(0.0, sp.max() + 2 * resolution, resolution)
    hist, _ = np.histogram(sp, bins=edges, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    p0 = max(hist[0] - 0.5 * (hist[1] - hist[0]), 0.0)
    s = np.concatenate([[0.0], centers, [edges[-1]]])
    pdf = np.concatenate([[p0], hist, [0.0]])
    mass = np.trapezoid(pdf, s)
    pdf = pdf / mass
    mu = np.trapezoid(s * pdf, s)
    s, pdf = s / mu, pdf * mu
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(s))])
    cdf /= cdf[-1]
    d3 = pooled_delta3(merged, L_GRID)
    return TwoGOETable(s, pdf, cdf, L_GRID.copy(), d3, len(sp), mean)


def two_goe_reference(resolution: float = 0.02, dim: int = 400, n_pairs: int = 400, seed: int = 1000) -> EnsembleRef:
    t = two_goe_table(resolution, dim, n_pairs, seed)
    return EnsembleRef(
        Ensemble.TWO_GOE,
        pdf=lambda x: np.interp(x, t.s, t.pdf, right=0.0),
        cdf=lambda x: np.interp(x, t.s, t.cdf, left=0.0, right=1.0),
        delta3=lambda L: np.interp(L, t.L, t.delta3),
        params={"resolution": resolution, "dim": dim, "n_pairs": n_pairs, "seed": seed},
    )


def reference(kind: Ensemble | str) -> EnsembleRef:
    kind = Ensemble(kind)
    return {
        Ensemble.POISSON: poisson_reference,
        Ensemble.GOE: goe_reference,
        Ensemble.GUE: gue_reference,
        Ensemble.TWO_GOE: two_goe_reference,
    }[kind]()


def ks_distance(seq, ref: EnsembleRef) -> float:
    """Sup-norm distance between the empirical spacing CDF and ``ref.cdf``."""
    s = spacings(seq)
    if len(s) < MIN_KS_SPACINGS:
        raise StatsError(f"need at least {MIN_KS_SPACINGS} spacings, got {len(s)}")
    return float(stats.kstest(s, ref.cdf).statistic)


# --- reports ------------------------------------------------------------------------------

@dataclass(eq=False)
class StatReport:
    nnsd: Histogram
    delta3: list[tuple[float, float]]
    ks: dict[str, float]
    n_levels: int
    window: Optional[tuple[float, float]]

    def write(self, directory: Path | str, svg: bool = False, refs: Sequence[EnsembleRef] = ()) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = [directory / "nnsd.csv", directory / "delta3.csv", directory / "ks.json"]
        np.savetxt(paths[0], np.column_stack([self.nnsd.centers, self.nnsd.density]),
                   delimiter=",", header="bin_center,density", comments="", fmt="%.10g")
        np.savetxt(paths[1], np.array(self.delta3).reshape(-1, 2),
                   delimiter=",", header="L,value", comments="", fmt="%.10g")
        paths[2].write_text(json.dumps({
            "ks": self.ks, "n_levels": self.n_levels,
            "window": list(self.window) if self.window else None,
            "bin_width": float(self.nnsd.edges[1] - self.nnsd.edges[0]),
        }, indent=2))
        if svg:
            paths.extend(plot_report(self, directory, refs))
        return paths


def analyze(
    seq: UnfoldedSequence,
    refs: Sequence[EnsembleRef] = (),
    bin_width: float = DEFAULT_BIN_WIDTH,
    L_values: Iterable[float] = (),
    window: Optional[tuple[float, float]] = None,
) -> StatReport:
    x = _values(seq)
    hist = nnsd(x, bin_width)
    d3 = []
    for L in L_values:
        if x[-1] - x[0] >= 2 * L:
            d3.append((float(L), delta3(x, L)))
    ks = {r.kind.value: ks_distance(x, r) for r in refs}
    if window is None and isinstance(seq, UnfoldedSequence):
        window = seq.source_window
    return StatReport(hist, d3, ks, len(x), window)


def verdict(ks: dict[str, float], threshold: float = 0.1) -> str:
    """Label by the nearest reference, or "mixed" when none is within ``threshold``."""
    if not ks:
        return "mixed"
    best = min(ks, key=ks.get)
    if ks[best] >= threshold:
        return "mixed"
    return {"Poisson": "Poisson-like", "GOE": "GOE-like", "GUE": "GUE-like", "TwoGOE": "2GOE-like"}[best]


def plot_report(report: StatReport, directory: Path, refs: Sequence[EnsembleRef] = ()) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = []
    s = np.linspace(0, report.nnsd.edges[-1], 400)
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.stairs(report.nnsd.density, report.nnsd.edges, fill=True, alpha=0.4, label="data")
    for r in refs:
        ax.plot(s, r.pdf(s), label=r.kind.value)
    ax.set_xlim(0, 4)
    ax.set_xlabel("s")
    ax.set_ylabel("P(s)")
    ax.legend()
    fig.tight_layout()
    out.append(directory / "nnsd.svg")
    fig.savefig(out[-1])
    plt.close(fig)
    if report.delta3:
        L, v = np.array(report.delta3).T
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.plot(L, v, "o", label="data")
        for r in refs:
            ax.plot(L, r.delta3(L), label=r.kind.value)
        ax.set_xlabel("L")
        ax.set_ylabel("Delta_3(L)")
        ax.legend()
        fig.tight_layout()
        out.append(directory / "delta3.svg")
        fig.savefig(out[-1])
        plt.close(fig)
    return out


# --- parity ---------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ParitySplit:
    even: np.ndarray
    odd: np.ndarray
    unclassified: np.ndarray  # indices into the input levels
    parities: np.ndarray  # <psi|R psi> after symmetrisation


def parity_split(
    levels,
    vectors: np.ndarray,
    reflection: Optional[np.ndarray],
    cluster_tol: float = 1e-8,
    threshold: float = PARITY_THRESHOLD,
) -> ParitySplit:
    """Split levels by mirror parity ``sign <psi|R psi>``.

    Within runs of levels closer than ``cluster_tol`` the reflection is
    diagonalised on the span of the vectors first, since an exact degeneracy
    lets the solver return arbitrary even/odd mixtures.
    """
    if reflection is None:
        raise StatsError("lattice has no reflection symmetry; parity split impossible")
    w = np.asarray(levels, dtype=float)
    v = np.array(vectors, dtype=float, copy=True)
    if v.shape[1] != len(w):
        raise StatsError("one eigenvector per level required")
    perm = np.asarray(reflection)
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    breaks = np.flatnonzero(np.diff(w) > cluster_tol) + 1
    for block in np.split(np.arange(len(w)), breaks):
        if len(block) > 1:
            q = v[:, block]
            m = q.T @ q[perm]
            _, u = np.linalg.eigh(0.5 * (m + m.T))
            v[:, block] = q @ u
    p = np.einsum("ij,ij->j", v, v[perm])
    ok = np.abs(p) > threshold
    return ParitySplit(
        even=w[ok & (p > 0)],
        odd=w[ok & (p < 0)],
        unclassified=order[~ok],
        parities=p,
    )
