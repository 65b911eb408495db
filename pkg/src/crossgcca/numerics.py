"""Small dense factorizations: cyclic Jacobi eigensolver and Gram-route thin SVD.

Matrices are plain 2-D float64 ``numpy.ndarray`` objects. Everything here is a
pure function of its inputs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
RANK_TOL = 1e-12


@dataclass(frozen=True)
class ThinSvd:
    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return (self.u * self.singular_values) @ self.v.T


def as_matrix(a, name="a"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def jacobi_eigh(s, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi on a symmetric matrix.

    Returns unsorted ``(eigenvalues, eigenvectors)``. Iteration stops once the
    off-diagonal Frobenius norm drops below ``tol * ||s||_F``.
    """
    a = np.array(s, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return np.diag(a).copy(), v
    threshold = tol * scale
    for _ in range(max_sweeps):
        # summed directly: ||a||^2 - ||diag||^2 cancels catastrophically near convergence
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q])) or abs(apq) <= 1e-300:
                    a[p, q] = a[q, p] = 0.0
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
    return np.diag(a).copy(), v


def sym_eig(s, sym_tol=1e-10):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Eigenvectors are the columns of the second return value.
    """
    s = as_matrix(s, "s")
    if s.shape[0] != s.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got {s.shape}")
    if np.max(np.abs(s - s.T), initial=0.0) > sym_tol:
        raise InvalidInputError("matrix is not symmetric")
    w, v = jacobi_eigh(0.5 * (s + s.T))
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def complete_orthonormal(q, n_new, avoid=None):
    """Append ``n_new`` orthonormal columns to ``q`` (which must already be orthonormal).

    New columns are also kept orthogonal to the columns of ``avoid`` (assumed
    orthonormal and orthogonal to ``q``). Each new column starts from the
    coordinate axis with the largest component outside the current span and
    is cleaned with two Gram-Schmidt passes.
    """
    m = q.shape[0]
    fixed = q if avoid is None else np.hstack([q, avoid])
    added = []
    for _ in range(n_new):
        basis = np.hstack([fixed] + [a[:, None] for a in added]) if added else fixed
        residual = 1.0 - np.sum(basis * basis, axis=1)
        j = int(np.argmax(residual))
        if residual[j] <= 1e-8:
            raise InvalidInputError("cannot complete basis: not enough room in the ambient space")
        cand = np.zeros(m)
        cand[j] = 1.0
        for _ in range(2):
            cand -= basis @ (basis.T @ cand)
        added.append(cand / np.linalg.norm(cand))
    return np.column_stack([q] + [a[:, None] for a in added]) if added else q.copy()


def thin_svd(a):
    """Thin SVD of a tall matrix through the eigendecomposition of ``a.T @ a``.

    Every one of the ``cols`` singular triplets is returned. Left vectors
    belonging to numerically zero singular values are filled in by completing
    the orthonormal basis.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise InvalidInputError(f"thin_svd needs rows >= cols, got {a.shape}")
    if n == 0:
        return ThinSvd(np.zeros((m, 0)), np.zeros(0), np.zeros((0, 0)))
    # scale to unit max-entry so the Gram matrix neither under- nor overflows
    amax = np.max(np.abs(a))
    if amax == 0.0:
        return ThinSvd(complete_orthonormal(np.zeros((m, 0)), n), np.zeros(n), np.eye(n))
    a = a / amax
    _, v = sym_eig(a.T @ a, sym_tol=np.inf)
    av = a @ v
    s = np.linalg.norm(av, axis=0)
    order = np.argsort(-s, kind="stable")
    s, v, av = s[order], v[:, order], av[:, order]

    keep = s > RANK_TOL * max(s[0], np.finfo(float).tiny)
    cols = []
    for i in np.flatnonzero(keep):
        u_i = av[:, i] / s[i]
        # re-orthogonalize: the Gram route loses orthogonality for small s
        for _ in range(2):
            for b in cols:
                u_i = u_i - (b @ u_i) * b
        norm = np.linalg.norm(u_i)
        if norm < 0.5:
            keep[i] = False
            continue
        cols.append(u_i / norm)
    u = np.column_stack(cols) if cols else np.zeros((m, 0))
    n_missing = n - u.shape[1]
    if n_missing:
        u = complete_orthonormal(u, n_missing)
        # completed columns pair with the dropped singular directions
        v = np.column_stack([v[:, keep], v[:, ~keep]])
        s = np.concatenate([s[keep], np.zeros(n_missing)])
    return ThinSvd(u, s * amax, v)


def inv_sqrt_psd(c, ridge=0.0):
    """``(c + ridge*I)^(-1/2)`` for a symmetric positive semidefinite matrix."""
    w, v = sym_eig(c, sym_tol=np.inf)
    w = w + ridge
    if np.any(w <= 0):
        raise InvalidInputError("matrix is not positive definite")
    return (v / np.sqrt(w)) @ v.T
