"""Dense complex linear algebra shared by the rest of the package.

Everything here is a pure function of its inputs. Matrices are plain
``numpy`` arrays; nothing is copied into wrapper types.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

HERMITIAN_TOL = 1e-10
DROP_TOL = 1e-10


class EmptyComplementError(ValueError):
    """Raised when the requested orthogonal complement has no columns."""


class EigenSystem(NamedTuple):
    """Ascending eigenvalues and phase-fixed orthonormal eigenvectors (columns)."""

    values: NDArray[np.float64]
    vectors: NDArray[np.complex128]


def hermiticity_defect(m: NDArray) -> float:
    """Return ``max|M - M^H|`` relative to ``max|M|`` (0 for the zero matrix)."""
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)) / scale)


def fix_phases(vectors: NDArray) -> NDArray[np.complex128]:
    """Rotate each column so that its largest-magnitude entry is real and >= 0."""
    v = np.array(vectors, dtype=np.complex128, copy=True)
    if v.size == 0:
        return v
    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(v.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    return v / phases[np.newaxis, :]


def hermitian_eig(m: NDArray) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues are returned in ascending order and every eigenvector is
    phase-fixed (see :func:`fix_phases`), so identical inputs give identical
    outputs.

    Raises
    ------
    ValueError
        If `m` is not square or deviates from Hermiticity by more than
        ``1e-10 * max|M|``.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"hermitian_eig needs a square matrix, got shape {m.shape}")
    defect = hermiticity_defect(m)
    if defect > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian (relative defect {defect:.3e})")
    sym = 0.5 * (m + m.conj().T)
    values, vectors = np.linalg.eigh(sym)
    return EigenSystem(values, fix_phases(vectors))


def orthonormalize(block: NDArray, drop_tol: float = DROP_TOL) -> tuple[NDArray[np.complex128], list[int]]:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Columns whose norm after projection falls below `drop_tol` (relative to
    their original norm) are dropped.

    Returns
    -------
    q : ndarray
        Orthonormal columns spanning the accepted input columns.
    dropped : list of int
        Indices of the input columns that were dropped.
    """
    block = np.asarray(block, dtype=np.complex128)
    if block.ndim != 2:
        raise ValueError("orthonormalize expects a 2-d array")
    cols: list[NDArray] = []
    dropped: list[int] = []
    for j in range(block.shape[1]):
        v = block[:, j].copy()
        ref = np.linalg.norm(v)
        if ref == 0.0:
            dropped.append(j)
            continue
        for _ in range(2):
            for q in cols:
                v -= np.vdot(q, v) * q
        nv = np.linalg.norm(v)
        if nv < drop_tol * ref:
            dropped.append(j)
            continue
        cols.append(v / nv)
    q = np.stack(cols, axis=1) if cols else np.zeros((block.shape[0], 0), dtype=np.complex128)
    return q, dropped


def orthonormal_complement(block: NDArray, within_dim: int | None = None) -> NDArray[np.complex128]:
    """Orthonormal basis of the complement of ``span(block)`` in ``C^within_dim``.

    The block is first orthonormalized (linearly dependent columns are
    dropped). Canonical basis vectors are then projected out in pivoted
    order, always taking the candidate with the largest remaining norm, so
    the result is deterministic and well conditioned.

    Raises
    ------
    EmptyComplementError
        If the block already spans the whole space.
    """
    block = np.asarray(block, dtype=np.complex128)
    if block.ndim == 1:
        block = block[:, np.newaxis]
    n = block.shape[0] if within_dim is None else within_dim
    if block.shape[0] != n:
        raise ValueError(f"block has {block.shape[0]} rows, expected {n}")
    q, _ = orthonormalize(block)
    target = n - q.shape[1]
    if target == 0:
        raise EmptyComplementError("empty complement: block spans the full space")

    basis = q
    residual = np.eye(n, dtype=np.complex128) - basis @ basis.conj().T
    found: list[NDArray] = []
    for _ in range(target):
        norms = np.linalg.norm(residual, axis=0)
        j = int(np.argmax(norms))
        v = residual[:, j].copy()
        for _ in range(2):
            if basis.shape[1]:
                v -= basis @ (basis.conj().T @ v)
        v /= np.linalg.norm(v)
        found.append(v)
        basis = np.column_stack([basis, v])
        residual -= np.outer(v, v.conj() @ residual)
    return np.stack(found, axis=1)


def mode_contract(tensor: NDArray, matrix: NDArray, mode: int) -> NDArray:
    """Mode-`mode` product: ``out[..., i, ...] = sum_j matrix[i, j] tensor[..., j, ...]``."""
    tensor = np.asarray(tensor)
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("mode_contract expects a matrix")
    if not 0 <= mode < tensor.ndim:
        raise ValueError(f"mode {mode} out of range for a {tensor.ndim}-d tensor")
    if matrix.shape[1] != tensor.shape[mode]:
        raise ValueError(
            f"extent mismatch: matrix has {matrix.shape[1]} columns, tensor mode {mode} has {tensor.shape[mode]}"
        )
    out = np.tensordot(matrix, tensor, axes=(1, mode))
    return np.moveaxis(out, 0, mode)


def multi_mode_contract(tensor: NDArray, matrices, skip: int | None = None) -> NDArray:
    """Apply ``matrices[k]`` along every mode ``k`` (``None`` entries and `skip` are left alone)."""
    out = tensor
    for k, mat in enumerate(matrices):
        if k == skip or mat is None:
            continue
        out = mode_contract(out, mat, k)
    return out


def partial_trace_contract(a: NDArray, b: NDArray, keep: int) -> NDArray:
    """``out[i, j] = sum_J conj(a[J; i]) b[J; j]`` over all modes except `keep`."""
    axes = [k for k in range(a.ndim) if k != keep]
    return np.tensordot(a.conj(), b, axes=(axes, axes))


def regularized_inverse(rho: NDArray, eps: float) -> tuple[NDArray[np.complex128], NDArray[np.float64]]:
    """Spectral inverse of a Hermitian PSD matrix with eigenvalues floored at `eps`.

    Returns the inverse and the (ascending) eigenvalues of `rho`.
    """
    values, vectors = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    inv = (vectors / np.maximum(values, eps)) @ vectors.conj().T
    return inv, values


def relative_deviation(a: float, b: float, floor: float = 0.0) -> float:
    """``|a - b| / max(|a|, |b|)``; returns 0 when both sit at or below `floor` in magnitude."""
    scale = max(abs(a), abs(b))
    if scale <= floor:
        return 0.0
    return abs(a - b) / scale
