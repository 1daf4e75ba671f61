"""Eigenvalues of tight-binding Hamiltonians.

Three routes:

* :func:`full_spectrum` -- dense symmetric eigensolve for small systems;
* :func:`count_below` -- exact eigenvalue counts from the inertia of a sparse
  symmetric factorisation of ``H - E*I``;
* :func:`eig_window` -- every eigenpair inside an energy window, by shift-invert
  Lanczos on slices, with completeness certified by inertia counts.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
import os
import struct
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg
from scipy import sparse, stats
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .hamiltonian import SparseHamiltonian

log = logging.getLogger(__name__)

DENSE_THRESHOLD = 20_000
MAX_SLICE = 800
DEFAULT_SLICE = 250
DEGENERACY_TOL = 1e-9
RESIDUAL_TOL = 1e-8


class SpectrumError(RuntimeError):
    """Eigen-solve failures: oversize dense requests, incomplete windows, factorisation breakdown."""


class Method(str, enum.Enum):
    DENSE = "Dense"
    WINDOWED = "WindowedIterative"


@dataclass(eq=False)
class SpectrumRecord:
    eigenvalues: np.ndarray
    dim: int
    method: Method
    window: Optional[tuple[float, float]] = None
    eigenvectors: Optional[np.ndarray] = None
    config_hash: str = ""

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        self.method = Method(self.method)
        if self.window is not None:
            self.window = (float(self.window[0]), float(self.window[1]))
        if np.any(np.diff(self.eigenvalues) < 0):
            raise ValueError("eigenvalues must be sorted")

    @property
    def count(self) -> int:
        return len(self.eigenvalues)


def config_hash(*parts: dict) -> str:
    """Stable short hash of JSON-serialisable configuration dictionaries."""
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --- dense -----------------------------------------------------------------

def full_spectrum(
    H: SparseHamiltonian,
    want_vectors: bool = False,
    dense_threshold: int = DENSE_THRESHOLD,
    config_hash: str = "",
) -> SpectrumRecord:
    if H.dim > dense_threshold:
        raise SpectrumError(
            f"dim={H.dim} exceeds the dense threshold {dense_threshold}; use eig_window / count_below"
        )
    a = H.toarray()
    if want_vectors:
        w, v = scipy.linalg.eigh(a, overwrite_a=True, check_finite=False)
    else:
        w = scipy.linalg.eigh(a, eigvals_only=True, overwrite_a=True, check_finite=False)
        v = None
    return SpectrumRecord(w, H.dim, Method.DENSE, eigenvectors=v, config_hash=config_hash)


# --- inertia ---------------------------------------------------------------

def _shifted(H: SparseHamiltonian, sigma: float) -> sparse.csc_matrix:
    return (H.matrix - sigma * sparse.identity(H.dim, format="csr")).tocsc()


def _ldl_negative_pivots(H: SparseHamiltonian, sigma: float) -> Optional[int]:
    """Negative pivot count of a symmetric LDL^T of H - sigma*I, or None on breakdown.

    SuperLU with a zero diagonal-pivot threshold in symmetric mode applies the
    same permutation to rows and columns; U's diagonal is then the D factor.
    """
    a = _shifted(H, sigma)
    if np.any(a.diagonal() == 0):
        # a zero diagonal forces SuperLU off the diagonal: broken symmetry and heavy fill
        return None
    try:
        lu = splu(
            a,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True, Equil=False),
        )
    except RuntimeError:
        return None
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None
    d = lu.U.diagonal()
    scale = max(1.0, H.norm() + abs(sigma))
    if not np.all(np.isfinite(d)) or np.min(np.abs(d)) <= 1e-11 * scale:
        return None
    return int(np.count_nonzero(d < 0))


_SHIFT_RETRIES = (0.0, 1e-10, -1e-10, 1e-9, -1e-9, 1e-8, -1e-8, 1e-7, -1e-7)


def count_below(H: SparseHamiltonian, E: float) -> int:
    """Number of eigenvalues strictly below ``E`` (Sylvester inertia)."""
    if H.dim == 0:
        return 0
    for delta in _SHIFT_RETRIES:
        n = _ldl_negative_pivots(H, E + delta)
        if n is not None:
            if delta:
                log.debug("inertia at E=%g needed shift %g", E, delta)
            return n
    raise SpectrumError(f"symmetric factorisation of H - E*I broke down at E={E} after shift retries")


# --- windowed --------------------------------------------------------------

def _slices(H, lo, hi, n_lo, n_hi, max_slice, out):
    if n_hi - n_lo <= max_slice or hi - lo < 1e-9:
        out.append((lo, hi, n_hi - n_lo))
        return
    mid = 0.5 * (lo + hi)
    n_mid = count_below(H, mid)
    _slices(H, lo, mid, n_lo, n_mid, max_slice, out)
    _slices(H, mid, hi, n_mid, n_hi, max_slice, out)


def _solve_slice(H: SparseHamiltonian, lo: float, hi: float, expected: int, max_restarts: int):
    if expected == 0:
        return np.empty(0), np.empty((H.dim, 0))
    if H.dim <= max(400, 3 * expected):
        w, v = scipy.linalg.eigh(H.toarray(), subset_by_value=(lo, hi), check_finite=False)
        keep = (w >= lo) & (w < hi)
        return w[keep], v[:, keep]

    sigma = 0.5 * (lo + hi)
    for delta in _SHIFT_RETRIES:
        try:
            shifted = _shifted(H, sigma + delta)
            lu = splu(shifted, permc_spec="COLAMD")
            sigma += delta
            break
        except RuntimeError:
            continue
    else:
        raise SpectrumError(f"cannot factor H - sigma*I near sigma={sigma}")

    def solve(x):
        # one step of iterative refinement keeps the residual near machine precision
        y = lu.solve(x)
        return y + lu.solve(x - shifted @ y)

    op = LinearOperator((H.dim, H.dim), matvec=solve, dtype=float)
    v0 = np.random.default_rng(20240601).standard_normal(H.dim)

    k = min(H.dim - 2, expected + max(8, expected // 10))
    found = 0
    for attempt in range(max_restarts + 1):
        ncv = min(H.dim - 1, max(2 * k + 1, k + 40))
        w, v = eigsh(H.matrix, k=k, sigma=sigma, which="LM", OPinv=op, ncv=ncv, v0=v0, tol=0)
        keep = (w >= lo) & (w < hi)
        w, v = w[keep], v[:, keep]
        w, v = _dedupe(w, v)
        found = len(w)
        if found == expected:
            order = np.argsort(w)
            return w[order], v[:, order]
        log.info("slice [%g, %g): found %d of %d, restarting with larger k", lo, hi, found, expected)
        k = min(H.dim - 2, int(1.5 * k) + 10)
    raise SpectrumError(
        f"window slice [{lo}, {hi}) incomplete after {max_restarts} restarts: missing {expected - found} eigenvalues"
    )


def _dedupe(w: np.ndarray, v: np.ndarray):
    """Drop repeated Ritz pairs: equal values (1e-9 t) with strongly overlapping vectors."""
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    keep = np.ones(len(w), dtype=bool)
    for i in range(1, len(w)):
        j = i - 1
        while j >= 0 and w[i] - w[j] < DEGENERACY_TOL:
            if keep[j] and abs(v[:, i] @ v[:, j]) > 0.5:
                keep[i] = False
                break
            j -= 1
    return w[keep], v[:, keep]


def _polish_clusters(H: SparseHamiltonian, w: np.ndarray, v: np.ndarray, gap: float = 1e-6):
    """Rayleigh-Ritz inside runs of close eigenvalues so vectors from different slices stay orthonormal."""
    if len(w) < 2:
        return w, v
    breaks = np.flatnonzero(np.diff(w) > gap) + 1
    for block in np.split(np.arange(len(w)), breaks):
        if len(block) < 2:
            continue
        q, _ = np.linalg.qr(v[:, block])
        hq = H.matrix @ q
        ww, u = np.linalg.eigh(q.T @ hq)
        w[block] = ww
        v[:, block] = q @ u
    return w, v


def eig_window(
    H: SparseHamiltonian,
    E_lo: float,
    E_hi: float,
    want_vectors: bool = False,
    *,
    max_slice: int = DEFAULT_SLICE,
    threads: int = 1,
    max_restarts: int = 4,
    config_hash: str = "",
) -> SpectrumRecord:
    """All eigenvalues in ``[E_lo, E_hi)`` with completeness checked by inertia.

    The window is bisected until every slice holds at most ``max_slice``
    eigenvalues; slices are independent and may run on ``threads`` workers.
    """
    if not E_lo < E_hi:
        raise ValueError("need E_lo < E_hi")
    if max_slice > MAX_SLICE:
        raise ValueError(f"max_slice may not exceed {MAX_SLICE}")
    n_lo = count_below(H, E_lo)
    n_hi = count_below(H, E_hi)
    pieces: list[tuple[float, float, int]] = []
    _slices(H, E_lo, E_hi, n_lo, n_hi, max_slice, pieces)

    def run(piece):
        return _solve_slice(H, piece[0], piece[1], piece[2], max_restarts)

    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, pieces))
    else:
        results = [run(p) for p in pieces]

    w = np.concatenate([r[0] for r in results]) if results else np.empty(0)
    v = np.hstack([r[1] for r in results]) if results else np.empty((H.dim, 0))
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    w, v = _polish_clusters(H, w, v)
    if len(w) != n_hi - n_lo:
        raise SpectrumError(f"window incomplete: missing {n_hi - n_lo - len(w)} eigenvalues")
    if len(w):
        res = np.linalg.norm(H.matrix @ v - v * w, axis=0)
        if res.max() > RESIDUAL_TOL:
            raise SpectrumError(f"eigenpair residual {res.max():.2e} exceeds {RESIDUAL_TOL}")
    dense_only = H.dim <= max(400, 3 * max((p[2] for p in pieces), default=0))
    return SpectrumRecord(
        eigenvalues=w,
        dim=H.dim,
        method=Method.DENSE if dense_only else Method.WINDOWED,
        window=(E_lo, E_hi),
        eigenvectors=v if want_vectors else None,
        config_hash=config_hash,
    )


def level_counts(H: SparseHamiltonian, edges) -> np.ndarray:
    """Eigenvalue counts per bin from inertia at the bin edges (a histogram DOS)."""
    below = np.array([count_below(H, e) for e in edges])
    return np.diff(below)


# --- eigenvector diagnostics -------------------------------------------------

@dataclass(frozen=True)
class AmplitudeReport:
    ks_gaussian: float
    participation_ratio: float


def amplitude_stats(vec: np.ndarray, lat=None) -> AmplitudeReport:
    """KS distance of site amplitudes to a fitted zero-mean Gaussian, plus sum |psi|^4."""
    psi = np.asarray(vec, dtype=float).ravel()
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("zero vector")
    psi = psi / norm
    sigma = math.sqrt(np.mean(psi**2))
    ks = stats.kstest(psi, "norm", args=(0.0, sigma)).statistic
    return AmplitudeReport(ks_gaussian=float(ks), participation_ratio=float(np.sum(psi**4)))


# --- persistence ------------------------------------------------------------

_MAGIC = b"SLSPEC\x00\x00"
_VERSION = 1
# magic, version, dim, window lo, window hi, count, method, has_vectors, hash length
_HEADER = struct.Struct("<8sIQddQBBH")
_METHOD_CODES = {Method.DENSE: 0, Method.WINDOWED: 1}


def write_record(record: SpectrumRecord, path: Path | str) -> Path:
    """Binary layout: header, sorted little-endian float64 eigenvalues, then vectors (column-major)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lo, hi = record.window if record.window is not None else (math.nan, math.nan)
    hbytes = record.config_hash.encode()
    vecs = record.eigenvectors
    header = _HEADER.pack(
        _MAGIC, _VERSION, record.dim, lo, hi, record.count,
        _METHOD_CODES[record.method], int(vecs is not None), len(hbytes),
    )
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(header)
        fh.write(hbytes)
        fh.write(record.eigenvalues.astype("<f8").tobytes())
        if vecs is not None:
            fh.write(np.asfortranarray(vecs, dtype="<f8").tobytes(order="F"))
    os.replace(tmp, path)
    return path


def read_record(path: Path | str) -> SpectrumRecord:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, dim, lo, hi, count, mcode, has_vec, hlen = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not a spectrum file (magic/version mismatch)")
    off = _HEADER.size
    chash = data[off:off + hlen].decode()
    off += hlen
    need = off + 8 * count + (8 * count * dim if has_vec else 0)
    if len(data) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(data)}")
    w = np.frombuffer(data, dtype="<f8", count=count, offset=off).copy()
    off += 8 * count
    vecs = None
    if has_vec:
        vecs = np.frombuffer(data, dtype="<f8", count=count * dim, offset=off).reshape((dim, count), order="F").copy()
    method = {v: k for k, v in _METHOD_CODES.items()}[mcode]
    window = None if math.isnan(lo) else (lo, hi)
    return SpectrumRecord(w, dim, method, window=window, eigenvectors=vecs, config_hash=chash)


def write_csv(record: SpectrumRecord, path: Path | str) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for i, e in enumerate(record.eigenvalues):
            w.writerow([i, repr(float(e))])
    return path


class SpectrumCache:
    """One file per (config hash, window) under a directory; writes are atomic renames."""

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)

    def path_for(self, chash: str, window: Optional[tuple[float, float]], vectors: bool = False) -> Path:
        tag = "full" if window is None else f"{window[0]:.9g}_{window[1]:.9g}"
        suffix = ".vec.spec" if vectors else ".spec"
        return self.directory / f"{chash}_{tag}{suffix}"

    def load(self, chash: str, window, need_vectors: bool = False) -> Optional[SpectrumRecord]:
        candidates = [self.path_for(chash, window, True)]
        if not need_vectors:
            candidates.append(self.path_for(chash, window, False))
        for p in candidates:
            if not p.exists():
                continue
            try:
                rec = read_record(p)
            except (ValueError, KeyError, struct.error) as exc:
                warnings.warn(f"corrupt spectrum cache {p.name} ({exc}); recomputing")
                p.unlink(missing_ok=True)
                continue
            if need_vectors and rec.eigenvectors is None:
                continue
            return rec
        return None

    def store(self, record: SpectrumRecord) -> Path:
        return write_record(
            record, self.path_for(record.config_hash, record.window, record.eigenvectors is not None)
        )
