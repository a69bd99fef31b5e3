"""Laplacian spectra (full and top-K) and vector normalization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceFailure, InvalidParameter
from .lanczos import lanczos_eigvalsh, thick_restart_lanczos

DENSE_CUTOFF = 64
# Beyond this size full reorthogonalization is memory-bound on one core and
# loses to LAPACK's Householder reduction by a wide margin.
LANCZOS_MAX = 1024
DEFAULT_K = 100


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues in descending order; ``k`` is None for a full spectrum."""

    eigenvalues: np.ndarray
    k: Optional[int] = None

    @property
    def kind(self) -> str:
        return "full" if self.k is None else f"top_k({self.k})"

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _components(L: sp.spmatrix) -> list[np.ndarray]:
    n = L.shape[0]
    if n == 0:
        return []
    n_comp, labels = connected_components(L, directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(n_comp + 1))
    return [order[bounds[i]:bounds[i + 1]] for i in range(n_comp)]


def _component_eigvals(block, method: str, dense_cutoff: int, lanczos_max: int, rng) -> np.ndarray:
    size = block.shape[0]
    if size == 1:
        return np.zeros(1)
    if method == "dense" or (method == "auto" and (size < dense_cutoff or size > lanczos_max)):
        return np.linalg.eigvalsh(block.toarray())
    return lanczos_eigvalsh(block, rng)


def full_spectrum(
    L: sp.spmatrix,
    tol: float = 1e-8,
    *,
    method: str = "auto",
    dense_cutoff: int = DENSE_CUTOFF,
    lanczos_max: int = LANCZOS_MAX,
    seed: int = 0,
) -> Spectrum:
    """Every eigenvalue of the Laplacian ``L``, descending, clamped at 0.

    Connected components are solved independently. ``method`` is ``"auto"``
    (dense below ``dense_cutoff`` and above ``lanczos_max``, Lanczos in
    between), ``"lanczos"`` or ``"dense"``. The eigenvalue sum is checked
    against ``trace(L)``; a mismatch above ``n * tol`` raises
    ``ConvergenceFailure``.
    """
    if tol <= 0:
        raise InvalidParameter("tol must be > 0")
    if method not in ("auto", "lanczos", "dense"):
        raise InvalidParameter(f"unknown method {method!r}")
    L = sp.csr_matrix(L)
    n = L.shape[0]
    rng = np.random.default_rng(seed)
    parts = [
        _component_eigvals(L[idx][:, idx], method, dense_cutoff, lanczos_max, rng)
        for idx in _components(L)
    ]
    values = np.concatenate(parts) if parts else np.empty(0)
    if n and abs(values.sum() - L.diagonal().sum()) > n * tol:
        raise ConvergenceFailure("eigenvalue sum does not match trace(L)")
    values = np.maximum(np.sort(values)[::-1], 0.0)
    return Spectrum(values)


def top_k_spectrum(
    L: sp.spmatrix,
    K: int,
    tol: float = 1e-6,
    *,
    cutoff: int = DENSE_CUTOFF,
    seed: int = 0,
    max_matvecs: Optional[int] = None,
) -> Spectrum:
    """The ``min(K, n)`` largest eigenvalues of ``L``, descending.

    Components small enough for the restarted solver to be pointless (at most
    ``max(cutoff, max(2K, K+16))`` vertices) go through :func:`full_spectrum`,
    so any graph with ``n <= K`` gets exactly the full-spectrum values.
    """
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise InvalidParameter(f"K must be >= 1, got {K!r}")
    if tol <= 0:
        raise InvalidParameter("tol must be > 0")
    L = sp.csr_matrix(L)
    n = L.shape[0]
    rng = np.random.default_rng(seed)
    subspace = max(2 * K, K + 16)

    parts = []
    for idx in _components(L):
        size = len(idx)
        if size == 1:
            parts.append(np.zeros(1))
            continue
        block = L[idx][:, idx]
        if size <= max(cutoff, subspace):
            parts.append(full_spectrum(block, seed=seed).eigenvalues[:K])
        else:
            parts.append(thick_restart_lanczos(block, K, tol, rng, max_matvecs))
    values = np.concatenate(parts) if parts else np.empty(0)
    values = np.maximum(np.sort(values)[::-1][: min(K, n)], 0.0)
    return Spectrum(values, int(K))


def normalize(x) -> np.ndarray:
    """``x / ||x||_2``, or ``x`` unchanged when its norm is zero."""
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0:
        return x.copy()
    return x / norm
