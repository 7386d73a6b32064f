"""Linear assignment by the Jonker-Volgenant shortest augmenting path method.

The solver runs the three classic phases: column reduction with reduction
transfer, two rounds of augmenting row reduction, then Dijkstra-style
augmentation for the rows that are still free. Only column potentials are
stored; a row's potential is implied by its current assignment. The core loop
is compiled with numba.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import ShapeError

LARGE = 1e6


def _as_cost_matrix(cost_matrix) -> np.ndarray:
    c = np.asarray(cost_matrix, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"cost matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix entries must be finite (use LARGE for forbidden cells)")
    if c.size and c.min() < 0:
        raise ValueError("cost matrix entries must be non-negative")
    return c


def solve_lap(cost_matrix) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect assignment of a square matrix.

    Returns ``(assignment, total)`` where ``assignment[i]`` is the column
    given to row ``i``. Ties resolve the same way on every run.
    """
    c = _as_cost_matrix(cost_matrix)
    n = c.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp), 0.0
    x = _lapjv(np.ascontiguousarray(c))
    total = 0.0
    for i in range(n):
        total += c[i, x[i]]
    return x, float(total)


def lap_total(c: np.ndarray) -> float:
    """Optimal total of an already validated float matrix (no checks, hot loops)."""
    if c.shape[0] == 0:
        return 0.0
    return float(_total(c, _lapjv(c)))


@njit(cache=True)
def _total(c, x):
    t = 0.0
    for i in range(x.shape[0]):
        t += c[i, x[i]]
    return t


@njit(cache=True)
def _lapjv(c):
    n = c.shape[0]
    x = np.full(n, -1, dtype=np.intp)  # row -> column
    y = np.full(n, -1, dtype=np.intp)  # column -> row
    v = np.empty(n)
    if n == 1:
        x[0] = 0
        return x

    # column reduction, scanning columns right to left
    matches = np.zeros(n, dtype=np.intp)
    for j in range(n - 1, -1, -1):
        imin = 0
        vmin = c[0, j]
        for i in range(1, n):
            if c[i, j] < vmin:
                vmin = c[i, j]
                imin = i
        v[j] = vmin
        matches[imin] += 1
        if matches[imin] == 1:
            x[imin] = j
            y[j] = imin

    # reduction transfer
    free = np.empty(n, dtype=np.intp)
    nfree = 0
    for i in range(n):
        if matches[i] == 0:
            free[nfree] = i
            nfree += 1
        elif matches[i] == 1:
            j1 = x[i]
            hmin = np.inf
            for j in range(n):
                if j != j1 and c[i, j] - v[j] < hmin:
                    hmin = c[i, j] - v[j]
            v[j1] -= hmin

    # augmenting row reduction, two rounds
    budget = 10 * n * n
    for _ in range(2):
        k = 0
        prev = nfree
        nfree = 0
        while k < prev and budget > 0:
            budget -= 1
            i = free[k]
            k += 1
            umin = c[i, 0] - v[0]
            j1 = 0
            usubmin = np.inf
            j2 = -1
            for j in range(1, n):
                h = c[i, j] - v[j]
                if h < usubmin:
                    if h >= umin:
                        usubmin = h
                        j2 = j
                    else:
                        usubmin = umin
                        umin = h
                        j2 = j1
                        j1 = j
            i0 = y[j1]
            if umin < usubmin:
                v[j1] -= usubmin - umin
            elif i0 >= 0:
                j1 = j2
                i0 = y[j2]
            x[i] = j1
            y[j1] = i
            if i0 >= 0:
                x[i0] = -1
                if umin < usubmin:
                    # reprocess the displaced row immediately
                    k -= 1
                    free[k] = i0
                else:
                    free[nfree] = i0
                    nfree += 1
        # rows left unprocessed when the budget ran out stay free
        while k < prev:
            free[nfree] = free[k]
            nfree += 1
            k += 1

    # shortest augmenting paths for the remaining free rows
    d = np.empty(n)
    pred = np.empty(n, dtype=np.intp)
    scanned = np.empty(n, dtype=np.bool_)
    for f in range(n):
        if x[f] >= 0:
            continue
        for j in range(n):
            d[j] = c[f, j] - v[j]
            pred[j] = f
            scanned[j] = False
        end = -1
        mu = 0.0
        while True:
            jmin = -1
            mu = np.inf
            for j in range(n):
                if not scanned[j] and d[j] < mu:
                    mu = d[j]
                    jmin = j
            if y[jmin] < 0:
                end = jmin
                break
            scanned[jmin] = True
            i = y[jmin]
            ui = c[i, jmin] - v[jmin] - mu
            for j in range(n):
                if not scanned[j]:
                    h = c[i, j] - v[j] - ui
                    if h < d[j]:
                        d[j] = h
                        pred[j] = i
        for j in range(n):
            if scanned[j]:
                v[j] += d[j] - mu
        j = end
        while True:
            i = pred[j]
            y[j] = i
            nxt = x[i]
            x[i] = j
            j = nxt
            if i == f:
                break
    return x


def square_edit_matrix(sub, del_costs, ins_costs, large: float = LARGE) -> np.ndarray:
    """Standard ``(n+m) x (n+m)`` edit matrix.

    Top-left holds substitutions, top-right the deletion diagonal, bottom-left
    the insertion diagonal, bottom-right zeros. Off-diagonal cells of the two
    diagonal blocks are forbidden (``large``).
    """
    sub = np.asarray(sub, dtype=float).reshape(len(del_costs), len(ins_costs))
    n, m = sub.shape
    out = np.zeros((n + m, n + m))
    out[:n, :m] = sub
    top_right = np.full((n, n), large)
    np.fill_diagonal(top_right, del_costs)
    out[:n, m:] = top_right
    bottom_left = np.full((m, m), large)
    np.fill_diagonal(bottom_left, ins_costs)
    out[n:, :m] = bottom_left
    return out
