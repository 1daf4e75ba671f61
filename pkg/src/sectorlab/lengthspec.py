"""Length spectra of wavevector sequences and periodic orbits of circular-sector billiards.

Lengths are in units of the sector radius. Periodic orbits are found by
unfolding the sector into the full disk: the ``2n`` images of a sector of
opening ``pi/n`` tile the disk, so every disk polygon orbit ``(p, w)`` folds
into a sector orbit. Each candidate is confirmed with :func:`ray_trace`.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import signal

APEX_TOL = 1e-9
CLOSURE_TOL = 1e-6
MIN_WAVEVECTORS = 100
L_MAX = 50.0
DEFAULT_P_MAX = 60


class LengthSpecError(ValueError):
    pass


class Regime(str, enum.Enum):
    DIRAC = "Dirac"
    BAND_EDGE = "BandEdge"
    QUANTUM_BILLIARD = "QuantumBilliard"


@dataclass(eq=False)
class WavevectorSeq:
    values: np.ndarray
    regime: Regime
    L0: float
    window: Optional[tuple[float, float]] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.regime = Regime(self.regime)
        if np.any(self.values < 0) or np.any(np.diff(self.values) < 0):
            raise LengthSpecError("wavevectors must be non-negative and sorted")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def span(self) -> float:
        return float(self.values[-1] - self.values[0]) if len(self.values) else 0.0


def to_wavevectors(
    levels,
    regime: Regime | str,
    L0: float = 1.0,
    E_edge: float = 3.0,
    E_dirac: float = 0.0,
    window: Optional[tuple[float, float]] = None,
) -> WavevectorSeq:
    """Convert energies (units of t) to dimensionless ``qL``.

    Dirac: ``qL = 2 L0 (E - E_dirac)/sqrt(3)``. BandEdge:
    ``qL = 2 L0 sqrt(|E - E_edge|)``. QuantumBilliard: the input already is ``k``.
    """
    regime = Regime(regime)
    e = np.asarray(levels, dtype=float)
    if regime is Regime.DIRAC:
        if np.any(np.abs(e - E_dirac) > 1.0):
            warnings.warn("Dirac conversion applied to levels farther than t from the Dirac point")
        q = 2.0 * L0 * np.abs(e - E_dirac) / math.sqrt(3.0)
    elif regime is Regime.BAND_EDGE:
        if np.any(np.abs(e - E_edge) > 0.5):
            warnings.warn("band-edge conversion applied to levels farther than 0.5 t from the edge")
        q = 2.0 * L0 * np.sqrt(np.abs(e - E_edge))
    else:
        q = e
    return WavevectorSeq(np.sort(q), regime, L0, window)


# --- length spectrum ----------------------------------------------------------------

def hann(q: np.ndarray) -> np.ndarray:
    span = q[-1] - q[0] if len(q) else 0.0
    if span == 0:
        return np.ones_like(q)
    return 0.5 * (1.0 - np.cos(2 * np.pi * (q - q[0]) / span))


def rectangular(q: np.ndarray) -> np.ndarray:
    return np.ones_like(q)


@dataclass(frozen=True, eq=False)
class LengthSpectrum:
    l: np.ndarray
    F: np.ndarray
    resolution: float

    def peaks(self, prominence_factor: float = 3.0, l_min: float = 0.0) -> np.ndarray:
        """Peak positions whose prominence exceeds ``prominence_factor`` times the median of F."""
        thr = prominence_factor * float(np.median(self.F))
        idx, _ = signal.find_peaks(self.F, prominence=thr)
        pos = self.l[idx]
        return pos[pos >= l_min]

    def dominant_peaks(self, count: int, l_min: float = 0.0) -> np.ndarray:
        idx, _ = signal.find_peaks(self.F)
        idx = idx[self.l[idx] >= l_min]
        top = idx[np.argsort(self.F[idx])[::-1][:count]]
        return np.sort(self.l[top])

    def write_csv(self, path: Path | str) -> Path:
        path = Path(path)
        np.savetxt(path, np.column_stack([self.l, self.F]), delimiter=",", header="l,F", comments="", fmt="%.10g")
        return path


def length_spectrum(
    seq: WavevectorSeq,
    l_grid,
    window_fn: Callable[[np.ndarray], np.ndarray] = hann,
    chunk: int = 4_000_000,
) -> LengthSpectrum:
    """``F(l) = |sum_j w(qL_j) exp(i qL_j l)|`` on ``l_grid``."""
    q = seq.values
    l = np.asarray(l_grid, dtype=float)
    if len(q) == 0:
        raise LengthSpecError("empty wavevector sequence")
    if len(q) < MIN_WAVEVECTORS:
        warnings.warn(f"only {len(q)} wavevectors; the length spectrum will be noisy")
    resolution = 2 * np.pi / seq.span if seq.span > 0 else np.inf
    if len(l) > 1 and np.max(np.diff(l)) > resolution:
        warnings.warn(f"l grid step {np.max(np.diff(l)):.3g} is coarser than the resolution {resolution:.3g}")
    w = window_fn(q)
    F = np.empty(len(l))
    rows = max(chunk // len(q), 1)
    for r0 in range(0, len(l), rows):
        ph = np.exp(1j * np.outer(l[r0:r0 + rows], q))
        F[r0:r0 + rows] = np.abs(ph @ w)
    return LengthSpectrum(l, F, resolution)


# --- ray tracing ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    points: np.ndarray  # start, every bounce, end
    length: float
    bounces: int
    closure: float  # |x - x0| + |d - d0| at the end point
    apex_hit: bool
    final_direction: np.ndarray


def _inside(alpha: float, p: np.ndarray, tol: float = 1e-12) -> bool:
    r = math.hypot(p[0], p[1])
    if r >= 1 + tol or r == 0:
        return False
    phi = math.atan2(p[1], p[0])
    return -tol < phi < alpha + tol


def ray_trace(
    alpha: float,
    start,
    direction,
    max_bounces: int = 1000,
    max_length: Optional[float] = None,
) -> Trajectory:
    """Specular billiard flow in the sector ``0 < phi < alpha`` of the unit disk (``alpha <= pi``).

    The sector is the intersection of two half-planes and the disk, so the next
    wall is the one with the smallest positive exit time. Hitting the apex
    (within 1e-9) ends the trajectory with ``apex_hit`` set.
    """
    if not 0 < alpha <= math.pi:
        raise LengthSpecError("alpha must lie in (0, pi]")
    x = np.array(start, dtype=float)
    d = np.array(direction, dtype=float)
    if not _inside(alpha, x):
        raise LengthSpecError("start point must lie inside the open sector")
    if abs(np.linalg.norm(d) - 1) > 1e-9:
        raise LengthSpecError("direction must be a unit vector")
    x0, d0 = x.copy(), d.copy()
    # inward normals of the straight edges
    normals = (np.array([0.0, 1.0]), np.array([math.sin(alpha), -math.cos(alpha)]))
    pts = [x.copy()]
    total = 0.0
    bounces = 0
    apex = False
    while bounces < max_bounces:
        # arc: |x + t d| = 1, larger root
        b = x @ d
        c = x @ x - 1.0
        t_best = -b + math.sqrt(max(b * b - c, 0.0))
        wall = None
        for i, nrm in enumerate(normals):
            dn = d @ nrm
            if dn < 0:
                t = -(x @ nrm) / dn
                if 0 < t < t_best:
                    t_best, wall = t, i
        if max_length is not None and total + t_best >= max_length:
            x = x + (max_length - total) * d
            total = max_length
            break
        x = x + t_best * d
        total += t_best
        pts.append(x.copy())
        if math.hypot(x[0], x[1]) < APEX_TOL:
            apex = True
            break
        nrm = -x / math.hypot(x[0], x[1]) if wall is None else normals[wall]
        d = d - 2 * (d @ nrm) * nrm
        d /= np.linalg.norm(d)
        bounces += 1
    pts.append(x.copy())
    closure = float(np.linalg.norm(x - x0) + np.linalg.norm(d - d0))
    return Trajectory(np.array(pts), total, bounces, closure, apex, d)


# --- periodic orbits ------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class OrbitFamily:
    length: float
    order: int = field(compare=False)  # repetition count of the primitive orbit
    p: int = field(compare=False)
    w: int = field(compare=False)
    kind: str = field(default="disk", compare=False)
    closure: float = field(default=0.0, compare=False)


def _disk_orbit_start(alpha: float, p: int, w: int, offset: float = 0.0):
    """Point just inside the arc and the chord direction of a disk ``(p, w)`` polygon orbit.

    ``offset`` rotates the chord end slightly; used to move diameters off the apex.
    """
    th0 = 0.37 * alpha
    th1 = th0 + 2 * np.pi * w / p + offset
    a = np.array([math.cos(th0), math.sin(th0)])
    b = np.array([math.cos(th1), math.sin(th1)])
    d = (b - a) / np.linalg.norm(b - a)
    return a + 1e-3 * d, d


def validate_orbit(alpha: float, length: float, p: int, w: int) -> float:
    """Closure distance after tracing one period of the folded disk orbit ``(p, w)``."""
    # diameters pass through the apex; trace a chord 1e-8 off centre instead
    offset = 2e-8 if p == 2 * w else 0.0
    x, d = _disk_orbit_start(alpha, p, w, offset)
    tr = ray_trace(alpha, x, d, max_bounces=100_000, max_length=length)
    if tr.apex_hit:
        return math.inf
    return tr.closure


def enumerate_orbits(
    alpha: float,
    l_max: float,
    p_max: int = DEFAULT_P_MAX,
    validate: bool = True,
) -> list[OrbitFamily]:
    """Periodic-orbit lengths of the sector ``alpha = pi/n`` up to ``l_max``.

    A disk orbit ``(p, w)`` (``gcd(p, w) = 1``, ``p >= 2w``) advances by
    ``2 pi w / p`` per bounce; its folded image closes once the accumulated
    rotation is a multiple of ``2 alpha``, i.e. after ``b = p / gcd(p, n)``
    bounces, giving a primitive length ``2 b sin(pi w / p)``. Repetitions are
    listed with ``order > 1``. Whispering-gallery families accumulate at
    ``2 pi w / n``; ``p_max`` caps the polygon order.
    """
    if l_max > L_MAX:
        raise LengthSpecError(f"l_max may not exceed {L_MAX}")
    n = round(math.pi / alpha)
    if n < 1 or abs(math.pi / n - alpha) > 1e-12:
        raise LengthSpecError("alpha must equal pi/n for an integer n >= 1")
    found: list[OrbitFamily] = []
    for p in range(2, p_max + 1):
        for w in range(1, p // 2 + 1):
            if math.gcd(p, w) != 1:
                continue
            b = p // math.gcd(p, n)
            length = 2 * b * math.sin(math.pi * w / p)
            if length > l_max:
                continue
            closure = validate_orbit(alpha, length, p, w) if validate else 0.0
            if closure >= CLOSURE_TOL:
                continue
            kind = "diameter" if p == 2 * w else "disk"
            r = 1
            while r * length <= l_max + 1e-12:
                found.append(OrbitFamily(r * length, r, p, w, kind, closure))
                r += 1
    found.sort()
    out: list[OrbitFamily] = []
    for orb in found:
        if out and abs(orb.length - out[-1].length) < 1e-9:
            continue
        out.append(orb)
    return out


def write_orbits_csv(orbits: Sequence[OrbitFamily], path: Path | str) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["length", "order", "p", "w", "type"])
        for o in orbits:
            wr.writerow([repr(o.length), o.order, o.p, o.w, o.kind])
    return path


def nearest_orbit_distance(positions, orbits: Sequence[OrbitFamily]) -> np.ndarray:
    lengths = np.array([o.length for o in orbits])
    pos = np.asarray(positions, dtype=float)
    if len(lengths) == 0:
        return np.full(len(pos), np.inf)
    return np.min(np.abs(pos[:, None] - lengths[None, :]), axis=1)


def plot_length_spectrum(spec: LengthSpectrum, orbits: Sequence[OrbitFamily], path: Path | str) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(spec.l, spec.F, lw=0.8)
    for o in orbits:
        if spec.l[0] <= o.length <= spec.l[-1]:
            ax.axvline(o.length, color="grey", lw=0.5, ls=":")
    ax.set_xlabel("l / R")
    ax.set_ylabel("F(l)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
