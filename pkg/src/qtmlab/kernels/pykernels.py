"""Reference numpy implementations of the batch kernels.

Semantics here define the contract; the compiled backend must agree to
floating-point noise. Every softmax subtracts the row maximum before
exponentiating so huge vote totals stay finite.
"""

import numpy as np

BACKEND = "python"


def softmax_rows(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    z = v - v.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def rjk_matrix(a: np.ndarray, totals: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Field expectation of the outer product Q Q^T at own vote a.

    Entry (j, k) is sum_n w_n Q_j(a + V_n) Q_k(a + V_n), the pivotality
    between alternatives j and k.
    """
    q = softmax_rows(np.asarray(totals, dtype=np.float64) + np.asarray(a, dtype=np.float64)[None, :])
    wq = q * np.asarray(weights, dtype=np.float64)[:, None]
    return wq.T @ q


def rjk_grad(a: np.ndarray, totals: np.ndarray, weights: np.ndarray):
    """Pivotality matrix r plus its gradient tensor T[j, k, l] = dr_jk / da_l."""
    q = softmax_rows(np.asarray(totals, dtype=np.float64) + np.asarray(a, dtype=np.float64)[None, :])
    w = np.asarray(weights, dtype=np.float64)
    wq = q * w[:, None]
    r = wq.T @ q
    m = q.shape[1]
    t = -2.0 * np.einsum("nj,nk,nl->jkl", wq, q, q, optimize=True)
    idx = np.arange(m)
    t[idx, :, idx] += r
    t[:, idx, idx] += r
    return r, t


def choice_values(cands: np.ndarray, totals: np.ndarray, weights: np.ndarray, u: np.ndarray,
                  chunk: int = 2048) -> np.ndarray:
    """Expected chosen value sum_k E_field[Q_k(a_b + V)] u_k for each candidate row a_b."""
    cands = np.asarray(cands, dtype=np.float64)
    totals = np.asarray(totals, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    out = np.empty(cands.shape[0])
    for lo in range(0, cands.shape[0], chunk):
        block = cands[lo:lo + chunk]
        z = block[:, None, :] + totals[None, :, :]
        z -= z.max(axis=2, keepdims=True)
        np.exp(z, out=z)
        z /= z.sum(axis=2, keepdims=True)
        out[lo:lo + chunk] = np.einsum("bnk,k,n->b", z, u, weights, optimize=True)
    return out


def mean_probs(totals: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Field expectation of the selection probabilities."""
    q = softmax_rows(np.asarray(totals, dtype=np.float64))
    return np.asarray(weights, dtype=np.float64) @ q
