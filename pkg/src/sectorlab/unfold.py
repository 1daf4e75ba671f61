"""Unfolding of level sequences to unit mean spacing.

Two smooth integrated densities are available: a least-squares polynomial fit
to the empirical staircase, and the infinite-lattice honeycomb density of
states (needed near the van Hove singularities at |E| = t where no low-order
polynomial follows the staircase).
"""

from __future__ import annotations

import enum
import functools
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

DEFAULT_DEGREE = 6
MIN_LEVELS = 50
EDGE_STATE_CUTOFF = 0.02


class UnfoldError(ValueError):
    pass


class UnfoldMethod(str, enum.Enum):
    POLYNOMIAL = "Polynomial"
    ANALYTIC_DOS = "AnalyticDOS"


@dataclass(eq=False)
class UnfoldedSequence:
    values: np.ndarray
    source_window: Optional[tuple[float, float]]
    method: UnfoldMethod
    degree: Optional[int] = None
    map_coefficients: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.method = UnfoldMethod(self.method)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.values)

    def metadata(self) -> dict:
        return {
            "method": self.method.value,
            "window": list(self.source_window) if self.source_window else None,
            "degree": self.degree,
            "n_levels": len(self),
            "map_coefficients": list(self.map_coefficients),
        }

    def write_csv(self, path: Path | str) -> tuple[Path, Path]:
        """Single-column CSV of the unfolded values plus a ``.json`` sidecar."""
        path = Path(path)
        np.savetxt(path, self.values, fmt="%.17g", header="unfolded", comments="")
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps(self.metadata(), indent=2))
        return path, sidecar


def select_window(levels, window: Optional[tuple[float, float]]) -> np.ndarray:
    x = np.sort(np.asarray(levels, dtype=float))
    if window is None:
        return x
    lo, hi = window
    return x[(x >= lo) & (x <= hi)]


def _monotone_on(p: Polynomial, lo: float, hi: float) -> bool:
    grid = np.linspace(lo, hi, 4001)
    return bool(np.all(p.deriv()(grid) > 0))


def polynomial_unfold(
    levels,
    window: Optional[tuple[float, float]] = None,
    degree: int = DEFAULT_DEGREE,
) -> UnfoldedSequence:
    """Map levels through a polynomial fit of the staircase ``N(E_i) = i``.

    If the fit is not increasing over the level range, the degree drops by one
    and the fit is repeated.

    Parameters
    ----------
    levels : array_like
        Raw eigenvalues; sorted internally.
    window : (float, float), optional
        Keep only levels inside ``[lo, hi]``.
    degree : int
        Starting polynomial degree, 1 to 12.
    """
    if not 1 <= degree <= 12:
        raise UnfoldError("degree must lie in 1..12")
    x = select_window(levels, window)
    if len(x) < MIN_LEVELS:
        raise UnfoldError(f"need at least {MIN_LEVELS} levels, got {len(x)}")
    if x[-1] == x[0]:
        raise UnfoldError("all levels coincide")
    staircase = np.arange(len(x), dtype=float)
    for deg in range(degree, 0, -1):
        p = Polynomial.fit(x, staircase, deg)
        if _monotone_on(p, x[0], x[-1]):
            break
    else:
        raise UnfoldError("no monotone polynomial fit; try a lower degree or a narrower window")
    if deg < degree:
        warnings.warn(f"degree {degree} fit was not monotone; used degree {deg}")
    return UnfoldedSequence(
        values=p(x),
        source_window=window,
        method=UnfoldMethod.POLYNOMIAL,
        degree=deg,
        map_coefficients=[float(c) for c in p.convert().coef],
    )


# --- honeycomb density of states ------------------------------------------------

@dataclass(frozen=True, eq=False)
class HoneycombDOS:
    """Tabulated infinite-lattice DOS, per site and per unit t, one band normalised to 1.

    Band energies are ``E = +-|f(k)| - t'(|f(k)|^2 - 3)`` with
    ``f(k) = 1 + exp(i k.a1) + exp(i k.a2)``.
    """

    energies: np.ndarray
    density: np.ndarray
    cumulative: np.ndarray
    t_prime_over_t: float
    grid: int

    @property
    def band(self) -> tuple[float, float]:
        return float(self.energies[0]), float(self.energies[-1])

    def __call__(self, E):
        return np.interp(E, self.energies, self.density, left=0.0, right=0.0)

    def integrated(self, E):
        """Cumulative states below E per band; 0 at the bottom, 2 at the top."""
        return np.interp(E, self.energies, self.cumulative, left=0.0, right=self.cumulative[-1])

    def in_band(self, E) -> np.ndarray:
        lo, hi = self.band
        E = np.asarray(E)
        return (E >= lo) & (E <= hi)


def _abs_f_chunks(grid: int, rows: int = 256):
    u = (np.arange(grid) + 0.5) / grid
    cu = 2 * np.pi * u
    for start in range(0, grid, rows):
        a = cu[start:start + rows, None]
        b = cu[None, :]
        f2 = 3 + 2 * np.cos(a) + 2 * np.cos(b) + 2 * np.cos(a - b)
        yield np.sqrt(np.clip(f2, 0.0, None)).ravel()


@functools.lru_cache(maxsize=8)
def honeycomb_dos(t_prime_over_t: float = 0.0, grid: int = 4096, bins_per_t: float = 2048 / 3) -> HoneycombDOS:
    """Brillouin-zone histogram of the band energies on a midpoint ``grid x grid`` mesh."""
    width = 1.0 / bins_per_t
    tp = float(t_prime_over_t)
    if tp == 0.0:
        # histogram |f| on [0, 3] and mirror; rho(0) = 0 exactly (Dirac point)
        nb = int(round(3.0 / width))
        edges = np.linspace(0.0, 3.0, nb + 1)
        counts = np.zeros(nb)
        for chunk in _abs_f_chunks(grid):
            counts += np.histogram(chunk, bins=edges)[0]
        rho = counts / (counts.sum() * width)
        centers = 0.5 * (edges[1:] + edges[:-1])
        e = np.concatenate([-centers[::-1], [0.0], centers])
        d = np.concatenate([rho[::-1], [0.0], rho])
        e = np.concatenate([[-3.0], e, [3.0]])
        d = np.concatenate([[0.0], d, [0.0]])
    else:
        lo = -3.0 - 6 * abs(tp) - width
        hi = 3.0 + 6 * abs(tp) + width
        nb = int(np.ceil((hi - lo) / width))
        edges = lo + width * np.arange(nb + 1)
        counts = np.zeros(nb)
        total = 0
        for chunk in _abs_f_chunks(grid):
            shift = -tp * (chunk**2 - 3)
            counts += np.histogram(chunk + shift, bins=edges)[0]
            counts += np.histogram(-chunk + shift, bins=edges)[0]
            total += chunk.size
        rho = counts / (total * width)
        centers = 0.5 * (edges[1:] + edges[:-1])
        nz = np.flatnonzero(counts)
        keep = slice(max(nz[0] - 1, 0), min(nz[-1] + 2, nb))
        e, d = centers[keep], rho[keep]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(e))])
    cum *= 2.0 / cum[-1]
    return HoneycombDOS(energies=e, density=d, cumulative=cum, t_prime_over_t=tp, grid=grid)


def analytic_dos_honeycomb(E, t_prime_over_t: float = 0.0, grid: int = 4096):
    """DOS per site per t at ``E``; zero outside the band.

    Returns
    -------
    rho : ndarray
    out_of_band : ndarray of bool
    """
    table = honeycomb_dos(t_prime_over_t, grid)
    E = np.asarray(E, dtype=float)
    return table(E), ~table.in_band(E)


def unfold_with_dos(
    levels,
    window: Optional[tuple[float, float]] = None,
    t_prime_over_t: float = 0.0,
    grid: int = 4096,
) -> UnfoldedSequence:
    """Unfold through the integrated infinite-lattice DOS.

    The map is affine in the integrated DOS, pinned so the first and last level
    land on 0 and n-1; the mean spacing is therefore exactly 1.
    """
    table = honeycomb_dos(t_prime_over_t, grid)
    if window is not None:
        blo, bhi = table.band
        if window[1] < blo or window[0] > bhi:
            raise UnfoldError(f"window {window} lies outside the band [{blo:.3f}, {bhi:.3f}]")
    x = select_window(levels, window)
    if len(x) == 0:
        return UnfoldedSequence(np.empty(0), window, UnfoldMethod.ANALYTIC_DOS)
    smooth = table.integrated(x)
    if len(x) == 1 or smooth[-1] == smooth[0]:
        return UnfoldedSequence(np.zeros(len(x)), window, UnfoldMethod.ANALYTIC_DOS)
    scale = (len(x) - 1) / (smooth[-1] - smooth[0])
    offset = -scale * smooth[0]
    return UnfoldedSequence(
        values=offset + scale * smooth,
        source_window=window,
        method=UnfoldMethod.ANALYTIC_DOS,
        map_coefficients=[float(offset), float(scale)],
    )
