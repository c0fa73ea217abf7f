"""Dense complex tensor algebra: contraction, truncated SVD, matrix exponential.

Tensors are plain ``numpy.ndarray`` objects in row-major (C) layout; a "leg"
is one array axis.  Everything here is a pure function, safe to call from
concurrent workers.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ContractionError, NumericError

__all__ = ["ComplexTensor", "TruncatedSVD", "contract", "svd_truncate", "matrix_exp"]

# Alias kept for signature readability; any complex ndarray qualifies.
ComplexTensor = np.ndarray


@dataclass(frozen=True)
class TruncatedSVD:
    """Result of a relative-threshold truncated SVD, ``m ~= U @ diag(s) @ Vh``.

    ``discarded_weight`` is the root-sum-square of the dropped singular
    values, an upper bound on the spectral-norm reconstruction error is the
    largest dropped value.
    """

    left_factors: np.ndarray
    singular_values: np.ndarray
    right_factors: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    def reconstruct(self) -> np.ndarray:
        return (self.left_factors * self.singular_values) @ self.right_factors


def contract(
    a: ComplexTensor,
    legs_a: Sequence[int],
    b: ComplexTensor,
    legs_b: Sequence[int],
) -> ComplexTensor:
    """Contract tensors ``a`` and ``b`` over the paired legs.

    Result legs are the unpaired legs of ``a`` (in order) followed by those
    of ``b``.  Paired legs must have equal dimensions.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    legs_a = list(legs_a)
    legs_b = list(legs_b)
    if len(legs_a) != len(legs_b):
        raise ContractionError(
            f"paired leg lists differ in length: {len(legs_a)} vs {len(legs_b)}"
        )
    for la, lb in zip(legs_a, legs_b):
        if not (-a.ndim <= la < a.ndim) or not (-b.ndim <= lb < b.ndim):
            raise ContractionError(f"leg index out of range: ({la}, {lb})")
        if a.shape[la] != b.shape[lb]:
            raise ContractionError(
                f"dimension mismatch on pair ({la}, {lb}): "
                f"{a.shape[la]} != {b.shape[lb]}"
            )
    # tensordot permutes the paired legs to the back/front and calls GEMM on
    # the row-major matricization, which is the fixed-layout behaviour we want.
    return np.tensordot(a, b, axes=(legs_a, legs_b))


def svd_truncate(m: np.ndarray, eps_rel: float) -> TruncatedSVD:
    """SVD of ``m`` keeping singular values strictly above ``eps_rel * s_max``.

    At least one singular value is always retained so that a valid (if
    trivial) factorization survives even for numerically zero input.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise NumericError(f"svd_truncate expects a matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise NumericError("svd_truncate: input contains non-finite entries")
    if not 0.0 < eps_rel <= 1.0:
        raise NumericError(f"eps_rel must lie in (0, 1], got {eps_rel}")
    try:
        u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except scipy.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    cut = eps_rel * s[0] if s.size else 0.0
    keep = max(1, int(np.count_nonzero(s > cut)))
    discarded = float(np.sqrt(np.sum(s[keep:] ** 2)))
    return TruncatedSVD(
        left_factors=u[:, :keep],
        singular_values=s[:keep],
        right_factors=vh[:keep, :],
        discarded_weight=discarded,
    )


def matrix_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential of a square complex matrix.

    Normal matrices go through an eigendecomposition (exact up to roundoff);
    everything else falls back to scaling-and-squaring Pade.  The matrices
    in this package are at most 9x9, so accuracy outranks speed.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NumericError(f"matrix_exp expects a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise NumericError("matrix_exp: input contains non-finite entries")
    # Hermitian and anti-Hermitian inputs (the common cases here: -iH with H
    # Hermitian) go through eigh, which gives a unitarily exact exponential.
    mh = m.conj().T
    scale = max(1.0, float(np.abs(m).max()))
    if np.allclose(m, mh, rtol=0.0, atol=1e-14 * scale):
        w, v = scipy.linalg.eigh(m)
        return (v * np.exp(w)) @ v.conj().T
    if np.allclose(m, -mh, rtol=0.0, atol=1e-14 * scale):
        w, v = scipy.linalg.eigh(1j * m)
        return (v * np.exp(-1j * w)) @ v.conj().T
    return scipy.linalg.expm(m)
