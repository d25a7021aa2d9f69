"""Truncated proper orthogonal decomposition via the method of snapshots.

The basis solves the least-squares snapshot reconstruction problem; modes are
eigenvectors of the snapshot covariance. Instead of the (huge) node-space
covariance we eigendecompose the small m x m Gram matrix of the centered
snapshots, which yields identical modes at a fraction of the memory.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (
    ConfigurationError,
    CorruptionError,
    DataError,
    DegenerateBasisError,
    FormatError,
    ShapeError,
)

__all__ = [
    "PodBasis",
    "compute_pod",
    "project",
    "reconstruct",
    "energy_fraction",
    "save_basis",
    "load_basis",
]

BASIS_MAGIC = b"PODB"
BASIS_VERSION = 1
_BASIS_HEADER = struct.Struct("<4sBIII")  # magic, version, n_nodes, rank, m

#: Relative singular-value cutoff; modes below it are never formed (their
#: eigenvectors are numerically meaningless and would divide by ~0).
SV_RELATIVE_CUTOFF = 1e-12


def _sigma_floor(m: int) -> float:
    # the Gram route squares the condition number: eigenvalues carry an
    # absolute error ~m*eps*lambda_1, so sigmas below ~sqrt(m*eps)*sigma_1
    # are pure rounding noise no matter how small the nominal cutoff is
    return max(SV_RELATIVE_CUTOFF, 4.0 * math.sqrt(m * np.finfo(np.float64).eps))


@dataclass(frozen=True)
class PodBasis:
    """Truncated orthonormal basis of a snapshot set.

    Attributes
    ----------
    modes : (n_nodes, rank) ndarray
        Orthonormal spatial modes, one per column.
    singular_values : (m,) ndarray
        All singular values of the centered snapshot matrix, descending.
    reference : (n_nodes,) ndarray
        Field subtracted before projection (the snapshot mean, or zeros).
    rank : int
        Number of retained modes.
    energy_captured : float
        Fraction of squared singular values captured by the retained modes.
    """

    modes: np.ndarray
    singular_values: np.ndarray
    reference: np.ndarray
    rank: int
    energy_captured: float

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=np.float64)
        sv = np.asarray(self.singular_values, dtype=np.float64)
        ref = np.asarray(self.reference, dtype=np.float64)
        if modes.ndim != 2:
            raise ShapeError("modes must be a 2-D array")
        if modes.shape != (ref.shape[0], self.rank):
            raise ShapeError(
                f"modes shape {modes.shape} inconsistent with reference length "
                f"{ref.shape[0]} and rank {self.rank}"
            )
        if not 1 <= self.rank <= sv.shape[0]:
            raise ConfigurationError(
                f"rank must be in [1, {sv.shape[0]}], got {self.rank}"
            )
        if np.any(sv < 0.0) or np.any(np.diff(sv) > 0.0):
            raise ConfigurationError(
                "singular values must be nonnegative and descending"
            )
        for name, arr in (("modes", modes), ("singular_values", sv),
                          ("reference", ref)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.modes.shape[0]


def _fix_mode_signs(modes: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude entry positive (deterministic)."""
    if modes.size == 0:
        return modes
    idx = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[idx, np.arange(modes.shape[1])])
    signs[signs == 0.0] = 1.0
    return modes * signs


def compute_pod(snapshots: np.ndarray, energy_threshold: float,
                center: bool = True) -> PodBasis:
    """Compute a truncated POD basis of the given snapshot matrix.

    Parameters
    ----------
    snapshots : (n_nodes, m) ndarray
        One snapshot per column.
    energy_threshold : float
        Retain the smallest rank whose cumulative squared-singular-value
        fraction reaches this value, in (0, 1].
    center : bool
        Subtract the column mean before decomposing (default). With
        ``center=False`` the reference field is zero.

    Returns
    -------
    PodBasis

    Raises
    ------
    ConfigurationError
        Empty input or threshold outside (0, 1].
    DegenerateBasisError
        The (centered) snapshot matrix is identically zero.
    """
    snapshots = np.asarray(snapshots, dtype=np.float64)
    if snapshots.ndim != 2:
        raise ShapeError("snapshots must be a 2-D array (n_nodes, m)")
    n_nodes, m = snapshots.shape
    if m == 0 or n_nodes == 0:
        raise ConfigurationError("snapshot matrix must be non-empty")
    if not np.all(np.isfinite(snapshots)):
        raise DataError("snapshots must be finite")
    if not 0.0 < energy_threshold <= 1.0:
        raise ConfigurationError(
            f"energy_threshold must be in (0, 1], got {energy_threshold}"
        )

    reference = snapshots.mean(axis=1) if center else np.zeros(n_nodes)
    centered = snapshots - reference[:, None]

    gram = centered.T @ centered
    eigvals, eigvecs = scipy.linalg.eigh(gram)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    sigma = np.sqrt(np.maximum(eigvals, 0.0))

    if sigma[0] <= 0.0:
        raise DegenerateBasisError(
            "centered snapshot matrix is zero; no modes exist"
        )
    n_effective = int(np.count_nonzero(sigma > _sigma_floor(m) * sigma[0]))

    energy = np.cumsum(sigma**2) / np.sum(sigma**2)
    reachable = np.nonzero(energy[:n_effective] >= energy_threshold)[0]
    if reachable.size:
        rank = int(reachable[0]) + 1
    else:
        rank = n_effective
        warnings.warn(
            f"energy threshold {energy_threshold} unreachable with "
            f"{n_effective} effective modes; returning all of them",
            stacklevel=2,
        )

    modes = centered @ (eigvecs[:, :rank] / sigma[:rank])
    modes = _fix_mode_signs(modes)
    return PodBasis(
        modes=modes,
        singular_values=sigma,
        reference=reference,
        rank=rank,
        energy_captured=float(energy[rank - 1]),
    )


def project(basis: PodBasis, field: np.ndarray) -> np.ndarray:
    """Project a field onto the basis: coefficients of ``field - reference``."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (basis.n_nodes,):
        raise ShapeError(
            f"field has shape {field.shape}, expected ({basis.n_nodes},)"
        )
    return basis.modes.T @ (field - basis.reference)


def reconstruct(basis: PodBasis, coefficients: np.ndarray) -> np.ndarray:
    """Rebuild a field from mode coefficients: reference + modes @ coefficients."""
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape != (basis.rank,):
        raise ShapeError(
            f"expected {basis.rank} coefficients, got shape {coefficients.shape}"
        )
    return basis.reference + basis.modes @ coefficients


def energy_fraction(singular_values: np.ndarray, r: int) -> float:
    """Cumulative squared-singular-value fraction of the first ``r`` values."""
    singular_values = np.asarray(singular_values, dtype=np.float64)
    if not 1 <= r <= singular_values.shape[0]:
        raise IndexError(
            f"r must be in [1, {singular_values.shape[0]}], got {r}"
        )
    total = np.sum(singular_values**2)
    return float(np.sum(singular_values[:r] ** 2) / total)


def save_basis(basis: PodBasis, path) -> None:
    """Serialize a basis to the PODB binary layout (all little-endian f64)."""
    n_nodes, rank = basis.modes.shape
    m = basis.singular_values.shape[0]
    with open(path, "wb") as fh:
        fh.write(_BASIS_HEADER.pack(BASIS_MAGIC, BASIS_VERSION, n_nodes, rank, m))
        fh.write(basis.reference.astype("<f8").tobytes())
        fh.write(np.asfortranarray(basis.modes).astype("<f8").tobytes(order="F"))
        fh.write(basis.singular_values.astype("<f8").tobytes())


def load_basis(path) -> PodBasis:
    """Load a basis written by :func:`save_basis`, validating the header."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != BASIS_MAGIC:
        raise FormatError(f"{path}: bad magic, not a PODB file")
    if len(raw) < _BASIS_HEADER.size:
        raise CorruptionError(f"{path}: truncated header")
    _, version, n_nodes, rank, m = _BASIS_HEADER.unpack_from(raw)
    if version != BASIS_VERSION:
        raise FormatError(f"{path}: unsupported PODB version {version}")
    expected = _BASIS_HEADER.size + 8 * (n_nodes + n_nodes * rank + m)
    if len(raw) != expected:
        raise CorruptionError(
            f"{path}: file holds {len(raw)} bytes, header implies {expected}"
        )
    offset = _BASIS_HEADER.size
    reference = np.frombuffer(raw, "<f8", count=n_nodes, offset=offset).copy()
    offset += 8 * n_nodes
    modes = np.frombuffer(raw, "<f8", count=n_nodes * rank, offset=offset)
    modes = modes.reshape((n_nodes, rank), order="F").copy()
    offset += 8 * n_nodes * rank
    sigma = np.frombuffer(raw, "<f8", count=m, offset=offset).copy()
    return PodBasis(
        modes=modes,
        singular_values=sigma,
        reference=reference,
        rank=rank,
        energy_captured=energy_fraction(sigma, rank),
    )
