"""NumPy implementations of the hot kernels (used when the compiled core is absent)."""
import numpy as np
from scipy.special import gammaln

K2, BIC, MI = 0, 1, 2


def discrete_family_score(codes, child, parents, arities, kind):
    """Family score from integer codes; rows with a negative code in the family are dropped.

    ``kind`` is 0 (K2), 1 (BIC) or 2 (plug-in mutual information times N).
    """
    parents = np.asarray(parents, dtype=np.int64)
    cols = np.concatenate(([child], parents)).astype(np.int64)
    sub = codes[:, cols]
    sub = sub[(sub >= 0).all(axis=1)]
    n = sub.shape[0]
    if n == 0:
        return 0.0
    r = int(arities[child])
    cfg = np.zeros(n, dtype=np.int64)
    q = 1.0
    for j, p in enumerate(parents):
        a = int(arities[p])
        cfg = cfg * a + sub[:, j + 1]
        q *= a
    key = cfg * r + sub[:, 0]
    keys, nijk = np.unique(key, return_counts=True)
    cfg_of_key = keys // r
    _, inv = np.unique(cfg_of_key, return_inverse=True)
    nijk = nijk.astype(float)
    nij = np.bincount(inv, weights=nijk)
    if kind == K2:
        return float(len(nij) * gammaln(r) - gammaln(nij + r).sum() + gammaln(nijk + 1.0).sum())
    if kind == BIC:
        ll = float((nijk * np.log(nijk / nij[inv])).sum())
        return ll - 0.5 * np.log(n) * q * (r - 1)
    if kind == MI:
        if len(parents) == 0:
            return 0.0
        nk = np.bincount(sub[:, 0], minlength=r).astype(float)
        child_of_key = keys % r
        return float((nijk * np.log(nijk * n / (nij[inv] * nk[child_of_key]))).sum())
    raise ValueError(f"unknown score kind {kind}")


def mixed_dissimilarity(cat, num, tcat, tnum, wcat, wnum, scale):
    """Weighted per-row dissimilarity sums and comparable-weight sums.

    Categorical mismatch contributes its weight; a continuous gap contributes
    ``w * |u - t| / scale`` (zero when scale <= 0).  Missing cells (code -1 or
    NaN) on either side drop the variable for that pair.
    """
    n = cat.shape[0] if cat.size else num.shape[0]
    sum_d = np.zeros(n)
    sum_w = np.zeros(n)
    if cat.shape[1]:
        ok = (cat >= 0) & (tcat >= 0)[None, :]
        w = np.where(ok, wcat[None, :], 0.0)
        sum_w += w.sum(axis=1)
        sum_d += np.where(cat != tcat[None, :], w, 0.0).sum(axis=1)
    if num.shape[1]:
        ok = ~np.isnan(num) & ~np.isnan(tnum)[None, :]
        w = np.where(ok, wnum[None, :], 0.0)
        safe = np.where(scale > 0, scale, 1.0)
        gap = np.abs(num - tnum[None, :]) / safe[None, :]
        gap = np.where(ok & (scale > 0)[None, :], gap, 0.0)
        sum_w += w.sum(axis=1)
        sum_d += (w * gap).sum(axis=1)
    return sum_d, sum_w
