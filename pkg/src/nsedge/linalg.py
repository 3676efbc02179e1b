"""Small dense complex Hermitian linear algebra.

Operators are plain ``numpy`` arrays of shape ``(d, d)``; nothing is wrapped.
All routines are pure functions and safe to call from multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonHermitianError, NotPSDError

HERMITICITY_TOL = 1e-10
PSD_TOL = 1e-9
INTERSECTION_TOL = 1e-8


@dataclass(frozen=True)
class RankTolerance:
    """Eigenvalue cutoff for numerical rank.

    An eigenvalue counts toward the rank when it exceeds
    ``max(abs_tol, rel_tol * lam_max)``, which stays scale-free on
    normalized assemblage blocks (traces <= 1).
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8

    def cutoff(self, eigenvalues: np.ndarray) -> float:
        lam_max = float(np.max(eigenvalues, initial=0.0))
        return max(self.abs_tol, self.rel_tol * lam_max)


DEFAULT_RANK_TOL = RankTolerance()


def as_operator(m) -> np.ndarray:
    """Coerce to a finite square complex matrix."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def hermitian_part(m) -> np.ndarray:
    m = as_operator(m)
    return (m + m.conj().T) / 2


def hermiticity_defect(m) -> float:
    """Max-norm distance between ``m`` and its conjugate transpose."""
    m = as_operator(m)
    return float(np.max(np.abs(m - m.conj().T), initial=0.0))


def require_hermitian(m, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Return the Hermitian part of ``m``; reject if the defect exceeds ``tol``."""
    m = as_operator(m)
    defect = hermiticity_defect(m)
    if defect > tol:
        raise NonHermitianError(f"max |M - M^dag| = {defect:.3e} exceeds {tol:.1e}")
    return (m + m.conj().T) / 2


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a global phase so the largest-modulus entry is real positive.

    Makes eigenvector output reproducible and test fixtures diffable.
    """
    idx = int(np.argmax(np.abs(v)))
    pivot = v[idx]
    if abs(pivot) < 1e-300:
        return v
    return v * (pivot.conjugate() / abs(pivot))


def eigh(m, tol: float = HERMITICITY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Spectral decomposition with ascending eigenvalues.

    Returns ``(w, v)`` with ``m = v @ diag(w) @ v^dag``; eigenvector columns
    are orthonormal and phase-fixed.
    """
    m = require_hermitian(m, tol)
    w, v = np.linalg.eigh(m)
    for k in range(v.shape[1]):
        v[:, k] = fix_phase(v[:, k])
    return w, v


def min_eigenvalue(m, tol: float = HERMITICITY_TOL) -> float:
    m = require_hermitian(m, tol)
    return float(np.linalg.eigvalsh(m)[0])


def psd_eigh(m, psd_tol: float = PSD_TOL) -> tuple[np.ndarray, np.ndarray]:
    """``eigh`` with a positivity gate.

    Eigenvalues below ``-psd_tol`` raise :class:`NotPSDError`; small negatives
    (partial-trace noise) are clamped to zero.
    """
    w, v = eigh(m)
    if w.size and w[0] < -psd_tol:
        raise NotPSDError(f"smallest eigenvalue {w[0]:.3e} below -{psd_tol:.1e}")
    return np.clip(w, 0.0, None), v


def rank_of(m, tol: RankTolerance = DEFAULT_RANK_TOL, psd_tol: float = PSD_TOL) -> int:
    """Numerical rank of a PSD operator under ``tol``."""
    w, _ = psd_eigh(m, psd_tol)
    return int(np.count_nonzero(w > tol.cutoff(w)))


def image_projector(m, tol: RankTolerance = DEFAULT_RANK_TOL, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Orthogonal projector onto the image (range) of a PSD operator."""
    w, v = psd_eigh(m, psd_tol)
    cols = v[:, w > tol.cutoff(w)]
    return cols @ cols.conj().T


def pseudo_inverse(m, tol: RankTolerance = DEFAULT_RANK_TOL, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a PSD operator via eigenvalue inversion."""
    w, v = psd_eigh(m, psd_tol)
    keep = w > tol.cutoff(w)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (v * inv) @ v.conj().T


@dataclass(frozen=True)
class Subspace:
    """A subspace of C^dim spanned by orthonormal basis columns."""

    dim: int
    basis: np.ndarray  # shape (dim, k), orthonormal columns

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[1])

    def contains(self, v, tol: float = 1e-8) -> bool:
        v = np.asarray(v, dtype=complex)
        proj = self.basis @ (self.basis.conj().T @ v)
        return float(np.linalg.norm(proj - v)) <= tol * max(1.0, float(np.linalg.norm(v)))


def range_intersection(
    operators,
    tol: RankTolerance = DEFAULT_RANK_TOL,
    intersection_tol: float = INTERSECTION_TOL,
    psd_tol: float = PSD_TOL,
) -> Subspace:
    """Common image of a family of PSD operators.

    Computed as the kernel of ``K = sum_i (1 - R_i)`` where ``R_i`` projects
    onto the image of the i-th operator: eigenvectors of ``K`` with eigenvalue
    at most ``intersection_tol`` span the intersection.  ``K`` has eigenvalues
    in ``[0, len(operators)]`` so the gap at zero is O(1) for generic input.
    """
    ops = [as_operator(op) for op in operators]
    if not ops:
        raise ValueError("need at least one operator")
    d = ops[0].shape[0]
    k_total = np.zeros((d, d), dtype=complex)
    for op in ops:
        if op.shape[0] != d:
            raise ValueError("operators must share one dimension")
        k_total += np.eye(d) - image_projector(op, tol, psd_tol)
    w, v = np.linalg.eigh(hermitian_part(k_total))
    basis = v[:, w <= intersection_tol]
    for k in range(basis.shape[1]):
        basis[:, k] = fix_phase(basis[:, k])
    return Subspace(dim=d, basis=basis)
