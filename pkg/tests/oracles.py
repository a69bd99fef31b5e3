"""Independent reference implementations used only by the tests."""
import itertools
import math

import numpy as np


def jacobi_eigvals(matrix, tol=1e-13, max_sweeps=100):
    """Cyclic Jacobi rotations on a dense symmetric matrix; eigenvalues descending."""
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if n == 0:
        return np.empty(0)
    scale = max(1.0, np.abs(a).max())
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * apq)
                if abs(theta) > 1e150:
                    t = 1 / (2 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
    return np.sort(np.diag(a))[::-1]


def dense_laplacian(n, pairs):
    lap = np.zeros((n, n))
    for u, v in pairs:
        if u == v:
            continue
        if lap[u, v] == 0:
            lap[u, v] = lap[v, u] = -1
            lap[u, u] += 1
            lap[v, v] += 1
    return lap


def er_pairs(rng, n, p):
    return [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]


def brute_force_rank_biserial(flags, ranks):
    """Count wins and losses over every (flagged, unflagged) pair."""
    flagged = [r for f, r in zip(flags, ranks) if f]
    other = [r for f, r in zip(flags, ranks) if not f]
    favourable = sum(1.0 if a < b else 0.5 if a == b else 0.0 for a in flagged for b in other)
    unfavourable = len(flagged) * len(other) - favourable
    return (favourable - unfavourable) / (len(flagged) * len(other))
