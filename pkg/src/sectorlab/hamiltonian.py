"""Real symmetric tight-binding Hamiltonians on honeycomb flakes (units of t)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.io import mmread

from .lattice import Lattice


@dataclass(frozen=True)
class TBParams:
    """Hopping parameters.

    ``t`` is kept in eV for bookkeeping only; matrices are in units of ``t``.
    ``boundary_t_scale`` multiplies every bond with at least one boundary atom.
    """

    t: float = 2.8
    t_prime: float = 0.0
    boundary_t_scale: float = 1.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.t_prime < 0:
            raise ValueError("t_prime must be non-negative")
        if not self.boundary_t_scale > 0:
            raise ValueError("boundary_t_scale must be positive")

    @property
    def t_prime_over_t(self) -> float:
        return self.t_prime / self.t

    def to_dict(self) -> dict:
        return {"t": self.t, "t_prime": self.t_prime, "boundary_t_scale": self.boundary_t_scale}


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    matrix: sparse.csr_matrix
    params: TBParams = field(default_factory=TBParams)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[k]), int(coo.col[k]), float(coo.data[k])) for k in order]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm(self) -> float:
        """Max absolute row sum, an upper bound on the spectral norm."""
        return float(abs(self.matrix).sum(axis=1).max()) if self.dim else 0.0


def _scaled(bonds: np.ndarray, boundary: np.ndarray, value: float, scale: float) -> np.ndarray:
    vals = np.full(len(bonds), value)
    if scale != 1.0 and len(bonds):
        edge = boundary[bonds[:, 0]] | boundary[bonds[:, 1]]
        vals[edge] *= scale
    return vals


def assemble(lat: Lattice, params: TBParams | None = None) -> SparseHamiltonian:
    """H_ij = -1 on nearest-neighbour bonds, -t'/t on next-nearest ones, zero on site."""
    params = params or TBParams()
    if lat.N == 0:
        raise ValueError("cannot assemble a Hamiltonian for an empty lattice")
    bonds = [lat.nn_bonds]
    values = [_scaled(lat.nn_bonds, lat.boundary, -1.0, params.boundary_t_scale)]
    if params.t_prime > 0:
        bonds.append(lat.nnn_bonds)
        values.append(_scaled(lat.nnn_bonds, lat.boundary, -params.t_prime_over_t, params.boundary_t_scale))
    b = np.vstack(bonds) if any(len(x) for x in bonds) else np.empty((0, 2), dtype=np.int64)
    v = np.concatenate(values)
    # both triangles inserted from the same value array: exact symmetry
    rows = np.concatenate([b[:, 0], b[:, 1]])
    cols = np.concatenate([b[:, 1], b[:, 0]])
    data = np.concatenate([v, v])
    m = sparse.csr_matrix((data, (rows, cols)), shape=(lat.N, lat.N))
    m.sort_indices()
    return SparseHamiltonian(matrix=m, params=params)


def chiral_check(H: SparseHamiltonian, lat: Lattice) -> bool:
    """True iff S H S == -H exactly, with S = diag(+1 on A, -1 on B)."""
    if H.params.t_prime != 0:
        raise ValueError("chiral check is inapplicable with next-nearest-neighbour hopping")
    s = np.where(lat.sublattice == 0, 1.0, -1.0)
    coo = H.matrix.tocoo()
    flipped = s[coo.row] * coo.data * s[coo.col]
    return bool(np.all(flipped == -coo.data))


def write_matrix_market(H: SparseHamiltonian, path: Path | str) -> Path:
    """Coordinate-format export, 1-based indices, full (both triangles) storage."""
    path = Path(path)
    coo = H.matrix.tocoo()
    order = np.lexsort((coo.row, coo.col))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"% tight-binding Hamiltonian in units of t; t = {H.params.t} eV, "
                 f"t' = {H.params.t_prime} eV, boundary scale = {H.params.boundary_t_scale}\n")
        fh.write(f"{H.dim} {H.dim} {coo.nnz}\n")
        for k in order:
            fh.write(f"{coo.row[k] + 1} {coo.col[k] + 1} {coo.data[k]:.17g}\n")
    return path


def read_matrix_market(path: Path | str, params: TBParams | None = None) -> SparseHamiltonian:
    return SparseHamiltonian(matrix=sparse.csr_matrix(mmread(str(path))), params=params or TBParams())
