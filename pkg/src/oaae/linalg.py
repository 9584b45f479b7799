"""Dense SVD and nuclear-norm primitives used by the OLE loss.

Matrices are plain 2-D ``float64`` numpy arrays.  Two SVD backends are
provided: LAPACK through :func:`numpy.linalg.svd` (the default, used in
training) and a one-sided Jacobi iteration kept as an independent
cross-check.  Both return the same canonical form: thin factors, singular
values sorted nonincreasing, tiny values clamped to zero and a fixed sign
convention on the singular vectors.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

# singular values below this fraction of the largest one are set to zero
RELATIVE_ZERO = 1e-12
JACOBI_MAX_SWEEPS = 60


class DecompositionError(RuntimeError):
    """Raised when an SVD fails to converge."""


class SvdResult(NamedTuple):
    u: np.ndarray  # (rows, r), orthonormal columns
    s: np.ndarray  # (r,), nonincreasing, >= 0
    v: np.ndarray  # (cols, r), orthonormal columns

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    return m


def _canonicalize(u: np.ndarray, s: np.ndarray, v: np.ndarray) -> SvdResult:
    order = np.argsort(-s, kind="stable")
    u, s, v = u[:, order], s[order].copy(), v[:, order]
    if s.size and s[0] > 0:
        s[s < RELATIVE_ZERO * s[0]] = 0.0
    else:
        s[:] = 0.0
    # largest-magnitude entry of every U column made nonnegative
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[idx, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return SvdResult(u * signs, s, v * signs)


def _complete_orthonormal(q: np.ndarray, filled: np.ndarray) -> np.ndarray:
    """Replace the columns of ``q`` not flagged in ``filled`` by an orthonormal completion."""
    q = q.copy()
    n = q.shape[0]
    basis = [q[:, j] for j in np.flatnonzero(filled)]
    candidates = iter(np.eye(n))
    for j in np.flatnonzero(~filled):
        for e in candidates:
            w = e.copy()
            for _ in range(2):  # re-orthogonalize once for stability
                for b in basis:
                    w -= (b @ w) * b
            norm = np.linalg.norm(w)
            if norm > 1e-8:
                q[:, j] = w / norm
                basis.append(q[:, j])
                break
    return q


def jacobi_svd(a, tol: float = 1e-13, max_sweeps: int = JACOBI_MAX_SWEEPS) -> SvdResult:
    """One-sided (Hestenes) Jacobi SVD."""
    m = as_matrix(a)
    transposed = m.shape[1] > m.shape[0]
    # work at unit scale so column norms neither underflow nor overflow
    scale = float(np.max(np.abs(m)))
    if scale == 0.0:
        scale = 1.0
    work = (m.T if transposed else m) / scale
    k = work.shape[1]
    vecs = np.eye(k)
    # columns this small relative to the whole matrix are numerically zero
    negligible = (np.finfo(float).eps ** 2) * float(np.sum(work * work))

    for _ in range(max_sweeps):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                ap, aq = work[:, p], work[:, q]
                alpha, beta, gamma = ap @ ap, aq @ aq, ap @ aq
                if min(alpha, beta) <= negligible or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = c * t
                work[:, [p, q]] = np.column_stack((c * ap - sn * aq, sn * ap + c * aq))
                vp, vq = vecs[:, p].copy(), vecs[:, q].copy()
                vecs[:, p], vecs[:, q] = c * vp - sn * vq, sn * vp + c * vq
        if not rotated:
            break
    else:
        raise DecompositionError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")

    s = np.linalg.norm(work, axis=0)
    nonzero = s > RELATIVE_ZERO * max(s.max(), np.finfo(float).tiny)
    left = np.zeros_like(work)
    left[:, nonzero] = work[:, nonzero] / s[nonzero]
    left = _complete_orthonormal(left, nonzero)
    s = np.where(nonzero, s, 0.0) * scale
    if transposed:
        return _canonicalize(vecs, s, left)
    return _canonicalize(left, s, vecs)


def svd(a, method: str = "lapack") -> SvdResult:
    """Thin SVD ``a = U diag(s) V^T`` with r = min(rows, cols)."""
    if method == "jacobi":
        return jacobi_svd(a)
    if method != "lapack":
        raise ValueError(f"unknown SVD method {method!r}")
    m = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD of {m.shape} matrix failed: {exc}") from exc
    return _canonicalize(u, s, vt.T)


def nuclear_norm(a, method: str = "lapack") -> float:
    return float(svd(a, method).s.sum())


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(as_matrix(a)))


def spectral_norm(a, method: str = "lapack") -> float:
    return float(svd(a, method).s[0])


def nuclear_norm_subgradient(a, delta: float, method: str = "lapack") -> np.ndarray:
    """Projected subgradient ``U1 V1^T`` of the nuclear norm.

    Only singular directions with singular value strictly above ``delta``
    contribute; the result is the zero matrix when none do.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    res = svd(a, method)
    keep = res.s > delta
    return res.u[:, keep] @ res.v[:, keep].T
