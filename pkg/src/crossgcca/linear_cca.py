"""Closed-form linear baselines and canonical-angle correlation measures."""

from dataclasses import dataclass
import warnings

import numpy as np

from .errors import IllConditionedError, InvalidInputError, RankDeficiencyWarning
from .numerics import as_matrix, inv_sqrt_psd, sym_eig, thin_svd

DEFAULT_RIDGE_SCALE = 1e-8


@dataclass
class LinearProjections:
    """Per-view projections ``q[k]`` (D_k x F) plus the training target ``g``.

    ``means`` holds the per-view column means removed before projecting, so
    new data is embedded as ``(x - means[k]) @ q[k]``.
    """

    q: list
    g: np.ndarray
    canonical_correlations: np.ndarray
    means: list

    def transform(self, views):
        return [(np.asarray(x) - mu) @ q for x, mu, q in zip(views, self.means, self.q)]


def default_ridge(x):
    """1e-8 times the average per-coordinate variance of ``x``."""
    d = x.shape[1]
    return DEFAULT_RIDGE_SCALE * np.trace(x.T @ x / x.shape[0]) / d


def _cov_inv_sqrt(xc, ridge):
    m = xc.shape[0]
    cov = xc.T @ xc / m
    if ridge is None:
        ridge = default_ridge(xc)
    w = sym_eig(cov, sym_tol=np.inf)[0]
    if w[-1] + ridge <= 1e-14 * max(w[0], 1e-300):
        raise IllConditionedError("view covariance is singular; pass a positive ridge")
    return inv_sqrt_psd(cov, ridge)


def _fix_signs(g):
    idx = np.argmax(np.abs(g), axis=0)
    signs = np.sign(g[idx, np.arange(g.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def cca_two_view(x1, x2, f, ridge=None):
    """Classical two-view CCA on centered data.

    ``ridge`` is added to each view's covariance; ``None`` picks the default
    scale-aware value, ``0`` means no regularization.
    """
    x1, x2 = as_matrix(x1, "x1"), as_matrix(x2, "x2")
    m = x1.shape[0]
    if x2.shape[0] != m:
        raise InvalidInputError("views must have the same number of rows")
    if f > min(x1.shape[1], x2.shape[1]) or f < 1:
        raise InvalidInputError(f"f={f} must be in [1, min(D1, D2)]")
    if m <= f:
        raise InvalidInputError("need more samples than canonical pairs")
    mu1, mu2 = x1.mean(axis=0), x2.mean(axis=0)
    x1c, x2c = x1 - mu1, x2 - mu2
    w1 = _cov_inv_sqrt(x1c, ridge)
    w2 = _cov_inv_sqrt(x2c, ridge)
    t = w1 @ (x1c.T @ x2c / m) @ w2
    transposed = t.shape[0] < t.shape[1]
    svd = thin_svd(t.T if transposed else t)
    a, b = (svd.v, svd.u) if transposed else (svd.u, svd.v)
    q1 = w1 @ a[:, :f]
    q2 = w2 @ b[:, :f]
    corrs = np.clip(svd.singular_values[:f], 0.0, 1.0)
    z1 = x1c @ q1
    signs = _fix_signs(z1)
    q1, q2 = q1 * signs, q2 * signs
    g = 0.5 * (x1c @ q1 + x2c @ q2)
    return LinearProjections([q1, q2], g, corrs, [mu1, mu2])


def maxvar_gcca(views, f, ridge=None):
    """MAX-VAR GCCA through an eigendecomposition of summed projection matrices.

    ``g`` holds sqrt(M) times the top-``f`` eigenvectors of
    sum_k X_k (X_k^T X_k + ridge I)^-1 X_k^T, so ``g.T @ g = M I`` with
    centered columns. Each ``q[k]`` is the least-squares map from the
    centered view onto ``g``. For two views the reported canonical
    correlations are ``eigenvalue - 1``.
    """
    views = [as_matrix(x, f"views[{k}]") for k, x in enumerate(views)]
    if len(views) < 2:
        raise InvalidInputError("MAX-VAR needs at least two views")
    m = views[0].shape[0]
    if any(x.shape[0] != m for x in views):
        raise InvalidInputError("views must be row-aligned")
    if m <= f:
        raise InvalidInputError("need more samples than target dimensions")
    if f < 1 or f > sum(x.shape[1] for x in views):
        raise InvalidInputError(f"invalid f={f}")
    means = [x.mean(axis=0) for x in views]
    centered = [x - mu for x, mu in zip(views, means)]
    # X_k (X_k^T X_k + rI)^-1 X_k^T = W_k W_k^T with W_k = X_k (X_k^T X_k + rI)^-1/2
    whitened = []
    for xc in centered:
        r = (default_ridge(xc) if ridge is None else ridge) * m
        gram = xc.T @ xc
        w = sym_eig(gram, sym_tol=np.inf)[0]
        if w[-1] + r <= 1e-14 * max(w[0], 1e-300):
            raise IllConditionedError("view covariance is singular; pass a positive ridge")
        whitened.append(xc @ inv_sqrt_psd(gram, r))
    stacked = np.hstack(whitened)
    if stacked.shape[0] < stacked.shape[1]:
        raise InvalidInputError("MAX-VAR needs M >= sum of view dimensions")
    svd = thin_svd(stacked)
    eigvals = svd.singular_values ** 2
    g = np.sqrt(m) * svd.u[:, :f]
    g *= _fix_signs(g)
    q = []
    for xc in centered:
        r = (default_ridge(xc) if ridge is None else ridge) * m
        q.append(np.linalg.solve(xc.T @ xc + r * np.eye(xc.shape[1]), xc.T @ g))
    corrs = np.clip(eigvals[:f] - 1.0, 0.0, 1.0) if len(views) == 2 else np.clip(eigvals[:f], 0.0, None)
    return LinearProjections(q, g, corrs, means)


def maxvar_objective(projections, views):
    """Sum over views of the mean squared residual ``||Q_k^T x_k - g||^2``."""
    zs = projections.transform(views)
    return sum(np.mean(np.sum((z - projections.g) ** 2, axis=1)) for z in zs)


def canonical_corrs(z1, z2, ridge=1e-10):
    """Cosines of the principal angles between the centered column spaces of z1 and z2."""
    z1, z2 = as_matrix(z1, "z1"), as_matrix(z2, "z2")
    m = z1.shape[0]
    if z2.shape[0] != m:
        raise InvalidInputError("inputs must have the same number of rows")
    if m <= max(z1.shape[1], z2.shape[1]):
        raise InvalidInputError("need more samples than columns")
    z1c, z2c = z1 - z1.mean(axis=0), z2 - z2.mean(axis=0)
    bases = []
    for zc in (z1c, z2c):
        cov = zc.T @ zc / m
        w = sym_eig(cov, sym_tol=np.inf)[0]
        reg = 0.0
        if w[-1] <= 1e-12 * max(w[0], 1e-300):
            warnings.warn("rank-deficient embedding; canonical correlations use a ridge",
                          RankDeficiencyWarning, stacklevel=2)
            reg = ridge * max(w[0], 1.0)
        bases.append(zc @ inv_sqrt_psd(cov, reg) / np.sqrt(m))
    cross = bases[0].T @ bases[1]
    if cross.shape[0] < cross.shape[1]:
        cross = cross.T
    s = thin_svd(cross).singular_values
    return np.clip(s, 0.0, 1.0)


def total_corr_coef(embeddings):
    """Mean over all view pairs of the mean canonical cosine."""
    if len(embeddings) < 2:
        raise InvalidInputError("need at least two embeddings")
    pair_means = [np.mean(canonical_corrs(embeddings[i], embeddings[j]))
                  for i in range(len(embeddings)) for j in range(i + 1, len(embeddings))]
    return float(np.mean(pair_means))
