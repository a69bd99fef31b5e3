"""Lanczos eigensolvers for sparse symmetric matrices.

Two drivers live here:

* :func:`lanczos_eigvalsh` runs a complete Lanczos tridiagonalization with
  full reorthogonalization. When the Krylov space becomes invariant (which
  happens for every repeated eigenvalue, and graph Laplacians have many) the
  recurrence restarts from a fresh random vector orthogonal to the basis, so
  after ``n`` steps the tridiagonal matrix is orthogonally similar to ``A``.

* :func:`thick_restart_lanczos` finds the largest eigenvalues with a
  thick-restart scheme (mathematically equivalent to implicit restarting with
  exact shifts). A deflation pass afterwards looks for eigenvalues missed
  because a single starting vector cannot see a whole eigenspace.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceFailure


def _orthogonalize(w: np.ndarray, basis: np.ndarray) -> np.ndarray:
    # two passes of classical Gram-Schmidt ("twice is enough")
    for _ in range(2):
        if basis.shape[0]:
            w = w - (basis @ w) @ basis
    return w


def _operator_scale(A) -> float:
    return max(1.0, float(abs(A).sum(axis=1).max()))


def _fresh_direction(n: int, basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    for _ in range(8):
        w = _orthogonalize(rng.standard_normal(n), basis)
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            return w / norm
    raise ConvergenceFailure("could not extend the Krylov basis")


def lanczos_eigvalsh(A, rng: np.random.Generator) -> np.ndarray:
    """All eigenvalues of the symmetric sparse matrix ``A``, ascending."""
    n = A.shape[0]
    if n == 0:
        return np.empty(0)
    Q = np.zeros((n, n))
    alpha = np.zeros(n)
    beta = np.zeros(n - 1)
    breakdown = 1e-10 * _operator_scale(A)

    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    for j in range(n):
        Q[j] = q
        w = A @ q
        alpha[j] = q @ w
        w = _orthogonalize(w, Q[: j + 1])
        if j == n - 1:
            break
        b = np.linalg.norm(w)
        if b <= breakdown:
            q = _fresh_direction(n, Q[: j + 1], rng)
            beta[j] = 0.0
        else:
            q = w / b
            beta[j] = b
    return sla.eigh_tridiagonal(alpha, beta, eigvals_only=True)


def _largest_ritz(
    A,
    k: int,
    tol: float,
    rng: np.random.Generator,
    budget: list,
    locked: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` Ritz pairs of ``A`` restricted to the complement of ``locked``.

    ``budget`` is a one-element list holding the remaining matvec allowance.
    Returns ``(values_desc, vectors)`` with vectors as rows.
    """
    n = A.shape[0]
    free_dim = n - locked.shape[0]
    m = min(free_dim, max(2 * k, k + 16))
    k = min(k, m)
    V = np.zeros((m + 1, n))
    H = np.zeros((m, m))
    breakdown = 1e-10 * _operator_scale(A)

    V[0] = _fresh_direction(n, locked, rng)
    start = 0
    while True:
        last_beta = 0.0
        for j in range(start, m):
            if budget[0] <= 0:
                raise ConvergenceFailure("Lanczos iteration budget exhausted")
            budget[0] -= 1
            w = A @ V[j]
            if locked.shape[0]:
                w = w - (locked @ w) @ locked
            h = V[: j + 1] @ w
            w = w - h @ V[: j + 1]
            h2 = V[: j + 1] @ w
            w = w - h2 @ V[: j + 1]
            h = h + h2
            if locked.shape[0]:
                w = _orthogonalize(w, locked)
            H[: j + 1, j] = h
            H[j, : j + 1] = h
            last_beta = np.linalg.norm(w)
            if j + 1 == m and m == free_dim:
                last_beta = 0.0  # whole free space spanned: Ritz values are exact
                break
            if last_beta <= breakdown:
                last_beta = 0.0
                V[j + 1] = _fresh_direction(n, np.vstack([locked, V[: j + 1]]), rng)
            else:
                V[j + 1] = w / last_beta

        theta, Y = np.linalg.eigh(H)
        theta, Y = theta[::-1], Y[:, ::-1]
        residual = np.abs(last_beta * Y[m - 1, :])
        if np.all(residual[:k] <= tol):
            return theta[:k], Y[:, :k].T @ V[:m]

        keep = min(m - 1, k + (m - k) // 2)
        V[:keep] = Y[:, :keep].T @ V[:m]
        V[keep] = V[m]
        H[:] = 0.0
        H[np.arange(keep), np.arange(keep)] = theta[:keep]
        start = keep


def thick_restart_lanczos(
    A,
    k: int,
    tol: float,
    rng: np.random.Generator,
    max_matvecs: Optional[int] = None,
) -> np.ndarray:
    """The ``k`` largest eigenvalues of symmetric ``A``, descending.

    Ritz values are accepted once their residual norm is at most ``tol / 10``,
    which bounds each eigenvalue error by the same amount. ``max_matvecs``
    defaults to ``300 * k``.
    """
    n = A.shape[0]
    k = min(k, n)
    budget = [300 * k if max_matvecs is None else max_matvecs]
    rtol = tol / 10

    values, vectors = _largest_ritz(A, k, rtol, rng, budget, np.empty((0, n)))
    found_vals = list(values)
    found_vecs = vectors

    # deflation: any eigenvalue above the current k-th that a single Krylov
    # sequence could not see is picked up in the orthogonal complement
    while found_vecs.shape[0] < n:
        extra_val, extra_vec = _largest_ritz(A, 1, rtol, rng, budget, found_vecs)
        kth = sorted(found_vals, reverse=True)[k - 1]
        if extra_val[0] <= kth + tol:
            break
        found_vals.append(float(extra_val[0]))
        found_vecs = np.vstack([found_vecs, extra_vec])
    return np.sort(np.asarray(found_vals))[::-1][:k]
