"""Data centering, SVD, truncated projectors, and reconstruction error.

The left singular basis of the centered data matrix provides the optimal
rank-r linear encoder/decoder pair in the mean-squared sense; the surrogate
network is wired between two such truncated bases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DataSet:
    """Paired parameter/state samples as columns, with their raw means."""

    m_data: np.ndarray   # (q_m, N)
    u_data: np.ndarray   # (q_u, N)
    m_mean: np.ndarray
    u_mean: np.ndarray
    problem_id: str
    seed: int

    def __post_init__(self):
        if self.m_data.shape[1] != self.u_data.shape[1]:
            raise ValueError("parameter and state sample counts differ")

    @property
    def n_samples(self) -> int:
        return self.m_data.shape[1]

    @classmethod
    def from_columns(cls, m_data, u_data, problem_id: str, seed: int) -> "DataSet":
        m_data = np.asarray(m_data, dtype=np.float64)
        u_data = np.asarray(u_data, dtype=np.float64)
        return cls(
            m_data=m_data,
            u_data=u_data,
            m_mean=m_data.mean(axis=1),
            u_mean=u_data.mean(axis=1),
            problem_id=problem_id,
            seed=seed,
        )


@dataclass(frozen=True)
class Projector:
    """Truncated orthonormal basis plus the centering mean.

    encode maps a full vector to basis coordinates of its centered version;
    decode is the affine inverse on the retained subspace. The full singular
    spectrum of the source data is kept for diagnostics.
    """

    basis: np.ndarray            # (q, r), orthonormal columns
    mean: np.ndarray             # (q,)
    singular_values: np.ndarray  # full spectrum, nonincreasing

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def compute_svd(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left singular vectors (to numerical rank) and the full spectrum.

    Works through the Gram matrix on the smaller side, then restores the
    orthonormality of the lifted vectors with a thin QR pass. The sign of
    each vector is fixed so its largest-magnitude entry is positive.
    """
    A = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise ValueError("data matrix has non-finite entries")
    q, n = A.shape

    if n <= q:
        gram = A.T @ A
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
        s = np.sqrt(np.maximum(evals, 0.0))
        rank = int(np.sum(s > 1e-12 * s[0])) if s[0] > 0.0 else 0
        U = A @ evecs[:, :rank] / s[:rank] if rank else np.empty((q, 0))
    else:
        gram = A @ A.T
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
        s = np.sqrt(np.maximum(evals, 0.0))
        rank = int(np.sum(s > 1e-12 * s[0])) if s[0] > 0.0 else 0
        U = evecs[:, :rank]

    if rank:
        U, R = np.linalg.qr(U)
        U = U * np.where(np.diag(R) < 0.0, -1.0, 1.0)
        flip = np.where(U[np.argmax(np.abs(U), axis=0), np.arange(rank)] < 0.0, -1.0, 1.0)
        U = U * flip
    return np.ascontiguousarray(U), s


def truncate(svd_result: tuple[np.ndarray, np.ndarray], mean: np.ndarray, r: int) -> Projector:
    """Keep the first r left singular vectors as an encoder basis."""
    U, s = svd_result
    if not 1 <= r <= U.shape[1]:
        raise ValueError(f"reduced dimension {r} outside [1, {U.shape[1]}]")
    return Projector(basis=U[:, :r].copy(), mean=np.asarray(mean, dtype=np.float64).copy(), singular_values=s.copy())


def encode(p: Projector, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != p.basis.shape[0]:
        raise ValueError("vector length does not match the projector")
    return p.basis.T @ (x - p.mean if x.ndim == 1 else x - p.mean[:, None])


def decode(p: Projector, c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.shape[0] != p.rank:
        raise ValueError("coordinate length does not match the projector rank")
    return p.basis @ c + (p.mean if c.ndim == 1 else p.mean[:, None])


def reconstruction_error(p: Projector, data: np.ndarray) -> float:
    """Mean squared Frobenius deficit of projecting the centered data onto the basis."""
    A = np.asarray(data, dtype=np.float64) - p.mean[:, None]
    residual = A - p.basis @ (p.basis.T @ A)
    return float(np.sum(residual**2) / A.shape[1])


def normalized_spectrum(p: Projector) -> np.ndarray:
    s = p.singular_values
    return s / s[0] if len(s) and s[0] > 0.0 else s.copy()
