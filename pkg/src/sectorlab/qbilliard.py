"""Dirichlet quantum billiard on a circular sector of unit radius and opening ``alpha = pi/n``.

Eigenfunctions are ``sin(m pi phi / alpha) J_nu(k rho)`` with ``nu = m pi / alpha``
and ``k`` a zero of ``J_nu``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bessel import bessel_j, bessel_zeros

WEYL_TOL = 0.02
# below this expected count the perimeter-corrected Weyl law is too coarse to police completeness
WEYL_MIN_LEVELS = 200


class BilliardError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class BilliardLevel:
    k: float
    m: int
    n: int
    nu: float


def sector_order(alpha: float) -> int:
    n = round(math.pi / alpha)
    if n < 1 or abs(math.pi / n - alpha) > 1e-12:
        raise BilliardError(f"alpha={alpha} is not pi/n for an integer n")
    return n


def weyl_count(k, alpha: float):
    """Smooth level count ``N(k) = A k^2/(4 pi) - P k/(4 pi)`` for area ``alpha/2`` and perimeter ``2 + alpha``."""
    k = np.asarray(k, dtype=float)
    return (0.5 * alpha) * k**2 / (4 * np.pi) - (2.0 + alpha) * k / (4 * np.pi)


def weyl_inverse(count: float, alpha: float) -> float:
    a = 0.5 * alpha / (4 * np.pi)
    b = (2.0 + alpha) / (4 * np.pi)
    return (b + math.sqrt(b * b + 4 * a * count)) / (2 * a)


def sector_spectrum(alpha: float, k_max: float, check_weyl: bool = True) -> list[BilliardLevel]:
    """Every level with ``k <= k_max``, sorted by ``k``."""
    n_int = sector_order(alpha)
    levels: list[BilliardLevel] = []
    m = 1
    while True:
        nu = m * n_int
        if nu >= k_max:
            break
        zeros = bessel_zeros(nu, k_max)
        if len(zeros) == 0:
            break  # first zero of J_nu exceeds nu, and grows with nu
        levels.extend(BilliardLevel(float(z), m, i + 1, float(nu)) for i, z in enumerate(zeros))
        m += 1
    if not levels:
        raise BilliardError(f"k_max={k_max} lies below the ground state")
    levels.sort()
    if check_weyl:
        expected = float(weyl_count(k_max, alpha))
        if expected >= WEYL_MIN_LEVELS and abs(len(levels) - expected) > WEYL_TOL * expected:
            raise BilliardError(f"found {len(levels)} levels below k={k_max}, Weyl law expects {expected:.0f}")
    return levels


def lowest_levels(alpha: float, count: int) -> list[BilliardLevel]:
    """The lowest ``count`` levels; ``k_max`` is grown from the Weyl estimate until enough are found."""
    k_max = weyl_inverse(count, alpha) * 1.05 + 5
    while True:
        levels = sector_spectrum(alpha, k_max)
        if len(levels) >= count:
            return levels[:count]
        k_max *= 1.1


def sector_wavefunction(level: BilliardLevel, rho, phi, alpha: float):
    """Unnormalised eigenfunction on the sector ``0 <= rho <= 1``, ``0 <= phi <= alpha``."""
    rho = np.asarray(rho, dtype=float)
    phi = np.asarray(phi, dtype=float)
    eps = 1e-12
    if np.any(rho < -eps) or np.any(rho > 1 + eps) or np.any(phi < -eps) or np.any(phi > alpha + eps):
        raise BilliardError("point outside the sector")
    ang = np.sin(level.m * np.pi * phi / alpha)
    rad = bessel_j(level.nu, np.clip(level.k * rho, 0.0, None))
    return ang * rad


def wavefunction_raster(level: BilliardLevel, alpha: float, n_rho: int = 100, n_phi: int = 100):
    rho = np.linspace(0.0, 1.0, n_rho)
    phi = np.linspace(0.0, alpha, n_phi)
    R, P = np.meshgrid(rho, phi, indexing="ij")
    return rho, phi, sector_wavefunction(level, R.ravel(), P.ravel(), alpha).reshape(R.shape)


def write_csv(levels: Sequence[BilliardLevel], path: Path | str) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "n", "nu", "k"])
        for lv in levels:
            w.writerow([lv.m, lv.n, repr(lv.nu), repr(lv.k)])
    return path


# --- band-edge correspondence ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BandEdgeMatch:
    energies: np.ndarray
    levels: list[BilliardLevel]
    ratios: np.ndarray
    complete: bool
    note: str = ""

    def __len__(self) -> int:
        return len(self.ratios)

    def median_ratio(self) -> float:
        return float(np.median(self.ratios)) if len(self.ratios) else math.nan

    def fraction_near_median(self, tol: float = 0.02, count: int | None = None) -> float:
        r = self.ratios[:count] if count else self.ratios
        if len(r) == 0:
            return math.nan
        med = np.median(r)
        return float(np.mean(np.abs(r / med - 1) <= tol))


def match_band_edge(
    energies,
    L0: float,
    billiard_levels: Sequence[BilliardLevel],
    E_edge: float = 3.0,
) -> BandEdgeMatch:
    """Pair graphene levels near a band edge with billiard levels in order.

    The billiard scale is ``|E - E_edge| = k^2 / (4 L0^2)`` with the unit-radius
    ``k`` playing the role of ``qL``. Returned ratios are
    ``|E - E_edge| / (k^2 / (4 L0^2))``.
    """
    e = np.asarray(energies, dtype=float)
    if np.any(np.abs(e - E_edge) > 0.05 + 1e-12):
        raise BilliardError("energies must lie within 0.05 t of the band edge")
    order = np.argsort(np.abs(e - E_edge), kind="stable")
    e = e[order]
    bl = sorted(billiard_levels)
    n = min(len(e), len(bl))
    complete = True
    note = ""
    if max(len(e), len(bl)) and abs(len(e) - len(bl)) > 0.05 * max(len(e), len(bl)):
        complete = False
        note = f"count mismatch: {len(e)} graphene vs {len(bl)} billiard levels; paired the lowest {n}"
    k = np.array([lv.k for lv in bl[:n]])
    ratios = np.abs(e[:n] - E_edge) / (k**2 / (4 * L0**2)) if n else np.empty(0)
    return BandEdgeMatch(e[:n], bl[:n], ratios, complete, note)
