# %% [markdown]
# The shared-target step
#
# Each outer iteration replaces G by the closest centered matrix with
# G^T G = M I to the summed encodings. This is an orthogonal Procrustes
# problem solved by one thin SVD; here we poke at it directly.

# %%
import numpy as np

from crossgcca.numerics import thin_svd
from crossgcca.trainer import update_shared_target

rng = np.random.default_rng(1)
m, f = 200, 3
encodings = [rng.standard_normal((m, f)) @ rng.standard_normal((f, f)) for _ in range(2)]
target = update_shared_target(encodings)
g = target.g

print("G^T G / M =\n", np.round(g.T @ g / m, 12))
print("column means:", g.mean(axis=0))

# %% optimality: no random feasible candidate does better on trace(G^T Ybar)
y = sum(encodings)
ybar = y - y.mean(axis=0)
best = np.trace(g.T @ ybar)
cands = rng.standard_normal((2000, m, f))
cands -= cands.mean(axis=1, keepdims=True)
cands = np.sqrt(m) * np.linalg.qr(cands)[0]
scores = np.einsum("nmf,mf->n", cands, ybar)
print("Procrustes trace %.2f, best of 2000 random candidates %.2f" % (best, scores.max()))

# %% G^T Ybar is symmetric positive semidefinite at the optimum
gy = g.T @ ybar
print("asymmetry:", np.abs(gy - gy.T).max(), " eigenvalues:", np.round(np.linalg.eigvalsh(gy), 3))

# %% the SVD underneath: Gram-route thin SVD vs LAPACK
s = thin_svd(ybar)
print("singular values:", s.singular_values)
print("numpy          :", np.linalg.svd(ybar, compute_uv=False))
