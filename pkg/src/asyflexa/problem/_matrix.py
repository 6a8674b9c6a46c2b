"""Matrix helpers: JSON encoding and spectral-norm estimates."""

import numpy as np
import scipy.sparse as sp


def as_matrix(M):
    """Return ``M`` as a dense float array or a CSR matrix."""
    if sp.issparse(M):
        return sp.csr_matrix(M, dtype=float)
    return np.ascontiguousarray(M, dtype=float)


def encode_matrix(M):
    if sp.issparse(M):
        coo = sp.coo_matrix(M)
        return {
            "shape": [int(coo.shape[0]), int(coo.shape[1])],
            "rows": coo.row.tolist(),
            "cols": coo.col.tolist(),
            "vals": coo.data.tolist(),
        }
    return np.asarray(M, dtype=float).tolist()


def decode_matrix(obj):
    if isinstance(obj, dict):
        shape = tuple(obj["shape"])
        return sp.csr_matrix(
            (np.asarray(obj["vals"], dtype=float), (np.asarray(obj["rows"], dtype=int), np.asarray(obj["cols"], dtype=int))),
            shape=shape,
        )
    return np.asarray(obj, dtype=float)


def power_iteration(op, n, tol=1e-8, max_iter=10000, seed=0):
    """Largest eigenvalue magnitude of a symmetric linear operator.

    ``op`` maps a vector of length ``n`` to its image.  Iterates until the
    relative change of the Rayleigh estimate drops below ``tol``.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = op(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam_new = nw
        v = w / nw
        if abs(lam_new - lam) <= tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return float(lam)


def spectral_norm_sym(Q, tol=1e-8):
    """Spectral norm of a symmetric matrix, padded so it is a safe upper bound.

    Power iteration approaches the norm from below; the relative pad of
    ``1e3 * tol`` covers the residual gap at the stopping tolerance.
    """
    n = Q.shape[0]
    if n <= 400 and not sp.issparse(Q):
        lam = float(np.max(np.abs(np.linalg.eigvalsh(Q))))
    else:
        lam = power_iteration(lambda v: Q @ v, n, tol=tol)
    return lam * (1.0 + 1e3 * tol)
