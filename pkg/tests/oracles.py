"""
Slow, obviously-correct reference implementations used to cross-check the
library: brute-force closure rank, index-loop partial trace and Kronecker
product, and a Taylor-series matrix exponential.
"""

import itertools

import numpy as np


def kron_loop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for i, j, k, l in itertools.product(range(ra), range(ca), range(rb), range(cb)):
        out[i * rb + k, j * cb + l] = a[i, j] * b[k, l]
    return out


def partial_trace_loop(rho: np.ndarray, dims, keep) -> np.ndarray:
    """Sum over matching traced indices, one matrix element at a time"""
    keep = sorted(keep)
    traced = [i for i in range(len(dims)) if i not in keep]
    d_keep = int(np.prod([dims[i] for i in keep]))
    out = np.zeros((d_keep, d_keep), dtype=complex)
    all_indices = list(itertools.product(*[range(d) for d in dims]))
    for row in all_indices:
        for col in all_indices:
            if any(row[t] != col[t] for t in traced):
                continue
            r = np.ravel_multi_index(tuple(row[i] for i in keep), [dims[i] for i in keep])
            c = np.ravel_multi_index(tuple(col[i] for i in keep), [dims[i] for i in keep])
            out[r, c] += rho[np.ravel_multi_index(row, dims), np.ravel_multi_index(col, dims)]
    return out


def expm_series(a: np.ndarray, terms: int = 60) -> np.ndarray:
    """exp(a) by scaling and squaring around a Taylor series"""
    norm = np.linalg.norm(a)
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    scaled = a / (2 ** squarings)
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ scaled / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def closure_rank(generators, max_rounds: int = 20, rtol: float = 1e-8) -> int:
    """
    Dimension of the real span of traceless parts of the commutator closure,
    by repeatedly commuting everything with everything and taking the
    singular-value rank of the vectorized (real, imag) set.
    """
    n = generators[0].shape[0]

    def traceless(m):
        return m - np.trace(m) / n * np.eye(n)

    def rank(ops):
        if not ops:
            return 0
        vecs = np.array([np.concatenate([o.real.ravel(), o.imag.ravel()]) for o in ops])
        s = np.linalg.svd(vecs, compute_uv=False)
        return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0

    ops = [traceless(np.asarray(g, dtype=complex)) for g in generators]
    ops = [o for o in ops if np.linalg.norm(o) > 1e-12]
    current = rank(ops)
    for _ in range(max_rounds):
        new = [1j * (a @ b - b @ a) for a, b in itertools.combinations(ops, 2)]
        candidate = ops + [o for o in new if np.linalg.norm(o) > 1e-12]
        # keep a basis so the set does not blow up
        vecs = np.array([np.concatenate([o.real.ravel(), o.imag.ravel()]) for o in candidate])
        u, s, vt = np.linalg.svd(vecs.T, full_matrices=False)
        keep = s > rtol * s[0]
        basis = u[:, keep].T
        half = n * n
        ops = [(v[:half] + 1j * v[half:]).reshape(n, n) for v in basis]
        ops = [(o + o.conj().T) / 2 for o in ops]
        new_rank = rank(ops)
        if new_rank == current:
            break
        current = new_rank
    return current
