"""Honeycomb lattices clipped to circular sectors of opening angle pi/n.

Lengths are in units of the graphene lattice constant ``a`` (2.46 Angstrom),
so nearest-neighbour bonds have length ``1/sqrt(3)`` and next-nearest
neighbours sit at distance ``1``.

The sector apex is placed at a hexagon (plaquette) centre and the first
straight edge runs along the positive x axis.  ``ZIGZAG_FIRST`` aligns a
zigzag direction with that edge, ``ARMCHAIR_FIRST`` an armchair direction.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

SQRT3 = math.sqrt(3.0)
NN_DIST = 1.0 / SQRT3
NNN_DIST = 1.0
LATTICE_CONSTANT_ANGSTROM = 2.46

_INSIDE_TOL = 1e-9
_ROW_WIDTH = 0.5
_ARC_BAND = 1.5
MIN_SITES = 6


class LatticeError(ValueError):
    """Raised for impossible lattice constructions or perturbations."""


class Orientation(str, enum.Enum):
    ZIGZAG_FIRST = "zigzag"
    ARMCHAIR_FIRST = "armchair"


class Edge(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"


class PerturbationKind(str, enum.Enum):
    REMOVE_EDGE_ROW = "remove_edge_row"
    ADD_EDGE_ROW = "add_edge_row"
    REMOVE_TIP_ATOMS = "remove_tip_atoms"


class Sublattice(enum.IntEnum):
    A = 0
    B = 1


class EdgeTag(enum.IntEnum):
    INTERIOR = 0
    ZIGZAG = 1
    ARMCHAIR = 2
    MIXED_STRAIGHT = 3
    ARC = 4
    TIP = 5

    @property
    def label(self) -> str:
        return _TAG_LABELS[self]


_TAG_LABELS = {
    EdgeTag.INTERIOR: "Interior",
    EdgeTag.ZIGZAG: "Zigzag",
    EdgeTag.ARMCHAIR: "Armchair",
    EdgeTag.MIXED_STRAIGHT: "MixedStraight",
    EdgeTag.ARC: "Arc",
    EdgeTag.TIP: "Tip",
}


@dataclass(frozen=True)
class Perturbation:
    kind: PerturbationKind
    edge: Optional[Edge] = None
    count: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PerturbationKind(self.kind))
        if self.kind is PerturbationKind.REMOVE_TIP_ATOMS:
            if self.count is None or int(self.count) < 1:
                raise LatticeError("RemoveTipAtoms needs count >= 1")
            object.__setattr__(self, "count", int(self.count))
        else:
            if self.edge is None:
                raise LatticeError(f"{self.kind.value} needs an edge")
            if str(getattr(self.edge, "value", self.edge)).lower() == "arc":
                raise LatticeError("row perturbations on the arc are unsupported")
            object.__setattr__(self, "edge", Edge(str(getattr(self.edge, "value", self.edge)).lower()))

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.edge is not None:
            out["edge"] = self.edge.value
        if self.count is not None:
            out["count"] = self.count
        return out


@dataclass(frozen=True)
class SectorSpec:
    """Requested sector: angle pi/n, size (atom count or radius), edge alignment."""

    n: int
    target_size: Optional[int] = None
    radius_in_a: Optional[float] = None
    orientation: Orientation = Orientation.ZIGZAG_FIRST
    perturbations: tuple[Perturbation, ...] = ()

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise LatticeError(f"n must be a positive integer, got {self.n!r}")
        if (self.target_size is None) == (self.radius_in_a is None):
            raise LatticeError("exactly one of target_size / radius_in_a must be set")
        if self.target_size is not None and self.target_size < 1:
            raise LatticeError("target_size must be positive")
        if self.radius_in_a is not None and not self.radius_in_a > 0:
            raise LatticeError("radius_in_a must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        object.__setattr__(self, "perturbations", tuple(self.perturbations))

    @property
    def alpha(self) -> float:
        return math.pi / self.n

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "target_size": self.target_size,
            "radius_in_a": self.radius_in_a,
            "orientation": self.orientation.value,
            "perturbations": [p.to_dict() for p in self.perturbations],
        }


@dataclass(frozen=True)
class LatticeSite:
    index: int
    position: tuple[float, float]
    sublattice: Sublattice
    boundary: bool
    edge_tag: EdgeTag


@dataclass(frozen=True, eq=False)
class Lattice:
    """A finite honeycomb flake.  Arrays are read-only after construction.

    ``cells`` holds the integer honeycomb coordinates ``(i, j, sublattice)`` of
    every site, which lets perturbations add atoms of the same infinite sheet.
    """

    positions: np.ndarray
    cells: np.ndarray
    sublattice: np.ndarray
    nn_bonds: np.ndarray
    nnn_bonds: np.ndarray
    boundary: np.ndarray
    edge_tags: np.ndarray
    n_sector: int
    radius: float
    orientation: Orientation
    L0: float = field(init=False)

    def __post_init__(self):
        for name in ("positions", "cells", "sublattice", "nn_bonds", "nnn_bonds", "boundary", "edge_tags"):
            getattr(self, name).setflags(write=False)
        object.__setattr__(self, "L0", math.sqrt(SQRT3 * self.N / (2.0 * self.alpha)))

    @property
    def N(self) -> int:
        return int(self.positions.shape[0])

    @property
    def alpha(self) -> float:
        return math.pi / self.n_sector

    @property
    def nn(self) -> list[np.ndarray]:
        return _adjacency(self.N, self.nn_bonds)

    @property
    def nnn(self) -> list[np.ndarray]:
        return _adjacency(self.N, self.nnn_bonds)

    def nn_degree(self) -> np.ndarray:
        return np.bincount(self.nn_bonds.ravel(), minlength=self.N)

    @property
    def sites(self) -> list[LatticeSite]:
        return [
            LatticeSite(
                index=i,
                position=(float(x), float(y)),
                sublattice=Sublattice(int(s)),
                boundary=bool(b),
                edge_tag=EdgeTag(int(t)),
            )
            for i, ((x, y), s, b, t) in enumerate(
                zip(self.positions, self.sublattice, self.boundary, self.edge_tags)
            )
        ]

    def polar(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.positions.T
        return np.hypot(x, y), np.arctan2(y, x)

    def edge_distance(self, edge: Edge) -> np.ndarray:
        """Signed distance of every site to a straight edge line, positive inside."""
        return _edge_signed_distance(self.positions, self.alpha, edge)


def _adjacency(n: int, bonds: np.ndarray) -> list[np.ndarray]:
    if len(bonds) == 0:
        return [np.empty(0, dtype=np.int64) for _ in range(n)]
    rows = np.concatenate([bonds[:, 0], bonds[:, 1]])
    cols = np.concatenate([bonds[:, 1], bonds[:, 0]])
    m = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    m.sort_indices()
    return [m.indices[m.indptr[i]:m.indptr[i + 1]].astype(np.int64) for i in range(n)]


def _edge_signed_distance(positions: np.ndarray, alpha: float, edge: Edge) -> np.ndarray:
    x, y = positions[:, 0], positions[:, 1]
    if Edge(edge) is Edge.FIRST:
        return y.copy()
    return x * math.sin(alpha) - y * math.cos(alpha)


def _frame_rotation(orientation: Orientation) -> float:
    # armchair directions of the base sheet sit at 30 deg; rotate one onto the x axis
    return 0.0 if orientation is Orientation.ZIGZAG_FIRST else -math.pi / 6.0


def _cell_positions(cells: np.ndarray, orientation: Orientation) -> np.ndarray:
    """Map integer honeycomb coordinates to sector-frame positions.

    Hexagon centres of the base sheet are ``i*a1 + j*a2`` with ``a1=(1,0)`` and
    ``a2=(1/2, sqrt(3)/2)``; sublattice A sits ``1/sqrt(3)`` above a centre,
    B the same distance below.
    """
    i = cells[:, 0].astype(float)
    j = cells[:, 1].astype(float)
    sign = np.where(cells[:, 2] == Sublattice.A, 1.0, -1.0)
    x = i + 0.5 * j
    y = 0.5 * SQRT3 * j + sign * NN_DIST
    theta = _frame_rotation(orientation)
    if theta == 0.0:
        return np.column_stack([x, y])
    c, s = math.cos(theta), math.sin(theta)
    return np.column_stack([c * x - s * y, s * x + c * y])


def _candidate_cells(radius: float, alpha: float, orientation: Orientation) -> np.ndarray:
    """All sheet sites in a parallelogram covering the sector (plus a margin)."""
    theta = _frame_rotation(orientation)
    angles = np.linspace(0.0, alpha, 256)
    r = radius + 2.0
    pts = np.vstack([[0.0, 0.0], np.column_stack([r * np.cos(angles), r * np.sin(angles)])])
    c, s = math.cos(-theta), math.sin(-theta)
    base = np.column_stack([c * pts[:, 0] - s * pts[:, 1], s * pts[:, 0] + c * pts[:, 1]])
    xmin, ymin = base.min(axis=0) - 2.0
    xmax, ymax = base.max(axis=0) + 2.0
    jmin = math.floor(ymin / (0.5 * SQRT3)) - 1
    jmax = math.ceil(ymax / (0.5 * SQRT3)) + 1
    imin = math.floor(xmin - 0.5 * jmax) - 1
    imax = math.ceil(xmax - 0.5 * jmin) + 1
    jj, ii, ss = np.meshgrid(
        np.arange(jmin, jmax + 1), np.arange(imin, imax + 1), np.array([0, 1]), indexing="ij"
    )
    cells = np.column_stack([ii.ravel(), jj.ravel(), ss.ravel()]).astype(np.int64)
    # cheap pre-filter in the base frame before the exact sector test
    x = cells[:, 0] + 0.5 * cells[:, 1]
    y = 0.5 * SQRT3 * cells[:, 1]
    keep = (x >= xmin - 1) & (x <= xmax + 1) & (y >= ymin - 1) & (y <= ymax + 1)
    return cells[keep]


def _inside_sector(positions: np.ndarray, radius: float, alpha: float) -> np.ndarray:
    rho = np.hypot(positions[:, 0], positions[:, 1])
    return (
        (rho <= radius + _INSIDE_TOL)
        & (_edge_signed_distance(positions, alpha, Edge.FIRST) >= -_INSIDE_TOL)
        & (_edge_signed_distance(positions, alpha, Edge.SECOND) >= -_INSIDE_TOL)
    )


def _bonds(positions: np.ndarray, distance: float) -> np.ndarray:
    if len(positions) < 2:
        return np.empty((0, 2), dtype=np.int64)
    tree = cKDTree(positions)
    pairs = tree.query_pairs(distance * (1 + 1e-6), output_type="ndarray")
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    d = np.linalg.norm(positions[pairs[:, 0]] - positions[pairs[:, 1]], axis=1)
    pairs = pairs[np.abs(d - distance) < 1e-6 * distance]
    pairs = np.sort(pairs, axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order].astype(np.int64)


def _prune_dangling(positions: np.ndarray) -> np.ndarray:
    """Mask of sites surviving iterative removal of degree <= 1 atoms."""
    alive = np.ones(len(positions), dtype=bool)
    bonds = _bonds(positions, NN_DIST)
    while True:
        live = alive[bonds[:, 0]] & alive[bonds[:, 1]]
        deg = np.bincount(bonds[live].ravel(), minlength=len(positions))
        drop = alive & (deg <= 1)
        if not drop.any():
            return alive
        alive &= ~drop


def _components(n: int, bonds: np.ndarray) -> tuple[int, np.ndarray]:
    graph = sparse.coo_matrix((np.ones(len(bonds)), (bonds[:, 0], bonds[:, 1])), shape=(n, n))
    return csgraph.connected_components(graph, directed=False)


def _largest_component(positions: np.ndarray) -> np.ndarray:
    bonds = _bonds(positions, NN_DIST)
    ncomp, labels = _components(len(positions), bonds)
    if ncomp <= 1:
        return np.ones(len(positions), dtype=bool)
    sizes = np.bincount(labels)
    # ties resolved towards the component holding the lowest site index
    best = max(range(ncomp), key=lambda c: (sizes[c], -np.argmax(labels == c)))
    return labels == best


def _finalize(
    cells: np.ndarray,
    n_sector: int,
    radius: float,
    orientation: Orientation,
    *,
    prune: bool,
    require_connected: bool,
) -> Lattice:
    cells = np.asarray(cells, dtype=np.int64)
    # canonical site order: by row j, then i, then sublattice
    order = np.lexsort((cells[:, 2], cells[:, 0], cells[:, 1]))
    cells = cells[order]
    positions = _cell_positions(cells, orientation)
    if prune:
        keep = _prune_dangling(positions)
        cells, positions = cells[keep], positions[keep]
        if not require_connected:
            keep = _largest_component(positions)
            cells, positions = cells[keep], positions[keep]
    if len(cells) < MIN_SITES:
        raise LatticeError(f"only {len(cells)} atoms survive; need at least {MIN_SITES} for a connected sector")
    nn_bonds = _bonds(positions, NN_DIST)
    if require_connected:
        ncomp, _ = _components(len(positions), nn_bonds)
        if ncomp != 1:
            raise LatticeError(f"perturbation disconnects the lattice into {ncomp} pieces")
    nnn_bonds = _bonds(positions, NNN_DIST)
    deg = np.bincount(nn_bonds.ravel(), minlength=len(positions))
    boundary = deg < 3
    sublattice = cells[:, 2].astype(np.int8)
    tags = _edge_tags(positions, nn_bonds, deg, boundary, math.pi / n_sector, radius)
    return Lattice(
        positions=positions,
        cells=cells,
        sublattice=sublattice,
        nn_bonds=nn_bonds,
        nnn_bonds=nnn_bonds,
        boundary=boundary,
        edge_tags=tags,
        n_sector=n_sector,
        radius=float(radius),
        orientation=orientation,
    )


def _edge_tags(positions, nn_bonds, deg, boundary, alpha, radius) -> np.ndarray:
    n = len(positions)
    tags = np.full(n, EdgeTag.INTERIOR, dtype=np.int8)
    rho = np.hypot(positions[:, 0], positions[:, 1])
    d1 = _edge_signed_distance(positions, alpha, Edge.FIRST)
    d2 = _edge_signed_distance(positions, alpha, Edge.SECOND)
    d_arc = radius - rho
    if n_sector_is_half_disk(alpha):
        d2 = np.full(n, np.inf)
    nearest = np.argmin(np.column_stack([d1, d2, d_arc]), axis=1)

    # a degree-2 boundary atom is zigzag if both neighbours are bulk (degree 3)
    # and armchair if it is bonded to another degree-2 atom (the edge dimer)
    nbr_low = np.zeros(n, dtype=np.int64)
    if len(nn_bonds):
        low = deg < 3
        np.add.at(nbr_low, nn_bonds[:, 0], low[nn_bonds[:, 1]])
        np.add.at(nbr_low, nn_bonds[:, 1], low[nn_bonds[:, 0]])

    arc = boundary & ((nearest == 2) | (d_arc < _ARC_BAND))
    straight = boundary & ~arc
    zig = straight & (deg == 2) & (nbr_low == 0)
    arm = straight & (deg == 2) & (nbr_low == 1)
    tags[straight] = EdgeTag.MIXED_STRAIGHT
    tags[zig] = EdgeTag.ZIGZAG
    tags[arm] = EdgeTag.ARMCHAIR
    tags[arc] = EdgeTag.ARC
    tags[boundary & (rho < _tip_radius(alpha))] = EdgeTag.TIP
    return tags


def _tip_radius(alpha: float) -> float:
    # near the apex both straight edges are within a couple of bonds of each other
    if alpha >= math.pi / 2:
        return 2.0
    return max(2.0, 1.5 / math.sin(alpha))


def n_sector_is_half_disk(alpha: float) -> bool:
    return abs(alpha - math.pi) < 1e-12


def _build_at_radius(n: int, radius: float, orientation: Orientation) -> Lattice:
    alpha = math.pi / n
    cells = _candidate_cells(radius, alpha, orientation)
    positions = _cell_positions(cells, orientation)
    cells = cells[_inside_sector(positions, radius, alpha)]
    if len(cells) == 0:
        raise LatticeError("sector radius too small: no atoms inside")
    return _finalize(cells, n, radius, orientation, prune=True, require_connected=False)


def radius_for_size(n_atoms: float, alpha: float) -> float:
    """Radius (units of a) of a sector holding ``n_atoms`` at bulk density."""
    return math.sqrt(SQRT3 * n_atoms / (2.0 * alpha))


def build_sector(spec: SectorSpec) -> Lattice:
    """Cut a sector out of a perfect honeycomb sheet and apply ``spec.perturbations``.

    Sites are kept when their centres lie in the closed sector; dangling atoms
    are pruned iteratively and only the largest connected piece is retained.
    With ``target_size`` the radius is refined by a few deterministic secant
    steps on the atom count.
    """
    if spec.radius_in_a is not None:
        lat = _build_at_radius(spec.n, float(spec.radius_in_a), spec.orientation)
    else:
        target = spec.target_size
        radius = radius_for_size(target, spec.alpha)
        best = None
        for _ in range(4):
            try:
                lat = _build_at_radius(spec.n, radius, spec.orientation)
            except LatticeError:
                radius *= 1.5
                continue
            if best is None or abs(lat.N - target) < abs(best.N - target):
                best = lat
            if lat.N == target:
                break
            radius *= math.sqrt(target / lat.N)
        if best is None:
            raise LatticeError(f"target_size={target} too small to form a connected sector")
        lat = best
    for p in spec.perturbations:
        lat = apply_perturbation(lat, p)
    return lat


def apply_perturbation(lat: Lattice, p: Perturbation) -> Lattice:
    """Return a new lattice with one structural perturbation applied.

    Rows along a straight edge are the atoms within ``a/2`` (exclusive) of the
    outermost atom line.  Adding a row takes the next such slab of the
    infinite sheet outside the edge, clipped to the sector radius.
    """
    if p.kind is PerturbationKind.REMOVE_TIP_ATOMS:
        rho, phi = lat.polar()
        if p.count >= lat.N:
            raise LatticeError("cannot remove every atom")
        order = np.lexsort((np.round(phi, 12), np.round(rho, 12)))
        keep = np.ones(lat.N, dtype=bool)
        keep[order[: p.count]] = False
        return _finalize(
            lat.cells[keep], lat.n_sector, lat.radius, lat.orientation, prune=False, require_connected=True
        )

    dist = lat.edge_distance(p.edge)
    d_min = dist.min()
    if p.kind is PerturbationKind.REMOVE_EDGE_ROW:
        keep = dist >= d_min + _ROW_WIDTH - 1e-6
        cells = lat.cells[keep]
    else:
        cells = np.vstack([lat.cells, _outer_row(lat, p.edge, d_min)])
    return _finalize(cells, lat.n_sector, lat.radius, lat.orientation, prune=True, require_connected=True)


def _outer_row(lat: Lattice, edge: Edge, d_min: float) -> np.ndarray:
    alpha = lat.alpha
    cand = _candidate_cells(lat.radius + 1.0, alpha, lat.orientation)
    # widen the candidate window by also scanning the region just outside the edge
    pos = _cell_positions(cand, lat.orientation)
    rho = np.hypot(pos[:, 0], pos[:, 1])
    dist = _edge_signed_distance(pos, alpha, edge)
    if Edge(edge) is Edge.FIRST:
        along = pos[:, 0]
    else:
        along = pos[:, 0] * math.cos(alpha) + pos[:, 1] * math.sin(alpha)
    outside = (dist < d_min - 1e-6) & (rho <= lat.radius + _INSIDE_TOL) & (along >= 0.0)
    if not outside.any():
        raise LatticeError("no sheet sites available beyond the edge")
    d1 = dist[outside].max()
    row = outside & (dist > d1 - _ROW_WIDTH + 1e-6)
    return cand[row]


def reflection_map(lat: Lattice, tol: float = 1e-9) -> Optional[np.ndarray]:
    """Site permutation realising the mirror about the sector bisector, or None."""
    a = lat.alpha
    c, s = math.cos(a), math.sin(a)
    x, y = lat.positions.T
    mirrored = np.column_stack([c * x + s * y, s * x - c * y])
    tree = cKDTree(lat.positions)
    dist, idx = tree.query(mirrored, distance_upper_bound=tol)
    if not np.all(np.isfinite(dist)):
        return None
    if len(np.unique(idx)) != lat.N:
        return None
    return idx.astype(np.int64)


def classify_edges(lat: Lattice) -> Lattice:
    """Recompute boundary flags and edge tags from the current bond geometry."""
    deg = lat.nn_degree()
    boundary = deg < 3
    tags = _edge_tags(lat.positions, lat.nn_bonds, deg, boundary, lat.alpha, lat.radius)
    return Lattice(
        positions=lat.positions.copy(),
        cells=lat.cells.copy(),
        sublattice=lat.sublattice.copy(),
        nn_bonds=lat.nn_bonds.copy(),
        nnn_bonds=lat.nnn_bonds.copy(),
        boundary=boundary,
        edge_tags=tags,
        n_sector=lat.n_sector,
        radius=lat.radius,
        orientation=lat.orientation,
    )


def from_positions(
    positions: np.ndarray,
    sublattice: Sequence[int],
    *,
    n_sector: int = 1,
    radius: Optional[float] = None,
) -> Lattice:
    """Wrap explicit coordinates (units of a) as a Lattice; bonds come from distances.

    Intended for small hand-made systems such as dimers and single hexagons.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    sub = np.asarray(sublattice, dtype=np.int8)
    nn_bonds = _bonds(positions, NN_DIST)
    nnn_bonds = _bonds(positions, NNN_DIST)
    deg = np.bincount(nn_bonds.ravel(), minlength=len(positions))
    boundary = deg < 3
    if radius is None:
        radius = float(np.hypot(positions[:, 0], positions[:, 1]).max()) if len(positions) else 0.0
    alpha = math.pi / n_sector
    tags = _edge_tags(positions, nn_bonds, deg, boundary, alpha, radius)
    cells = np.column_stack([np.arange(len(positions)), np.zeros(len(positions)), sub]).astype(np.int64)
    return Lattice(
        positions=positions,
        cells=cells,
        sublattice=sub,
        nn_bonds=nn_bonds,
        nnn_bonds=nnn_bonds,
        boundary=boundary,
        edge_tags=tags,
        n_sector=n_sector,
        radius=radius,
        orientation=Orientation.ZIGZAG_FIRST,
    )


def write_csv(lat: Lattice, directory: Path | str) -> tuple[Path, Path]:
    """Write ``sites.csv`` and ``bonds.csv`` (positions to 12 significant digits)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sites_path = directory / "sites.csv"
    bonds_path = directory / "bonds.csv"
    with open(sites_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "x", "y", "sublattice", "boundary", "edge_tag"])
        for i in range(lat.N):
            x, y = lat.positions[i]
            w.writerow([
                i,
                f"{x:.12g}",
                f"{y:.12g}",
                Sublattice(int(lat.sublattice[i])).name,
                int(bool(lat.boundary[i])),
                EdgeTag(int(lat.edge_tags[i])).label,
            ])
    with open(bonds_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "order"])
        for i, j in lat.nn_bonds:
            w.writerow([int(i), int(j), 1])
        for i, j in lat.nnn_bonds:
            w.writerow([int(i), int(j), 2])
    return sites_path, bonds_path


def read_sites_csv(path: Path | str) -> dict[str, np.ndarray]:
    """Load a ``sites.csv`` back into column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    label_to_tag = {v: k for k, v in _TAG_LABELS.items()}
    return {
        "index": np.array([int(r["index"]) for r in rows]),
        "x": np.array([float(r["x"]) for r in rows]),
        "y": np.array([float(r["y"]) for r in rows]),
        "sublattice": np.array([Sublattice[r["sublattice"]] for r in rows], dtype=np.int8),
        "boundary": np.array([r["boundary"] == "1" for r in rows]),
        "edge_tag": np.array([label_to_tag[r["edge_tag"]] for r in rows], dtype=np.int8),
    }
