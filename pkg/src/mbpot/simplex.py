"""Transportation simplex for balanced discrete OT.

North-west-corner start and u/v dual pricing on the spanning-tree basis.
Entering cells are priced by most negative reduced cost (first in row-major
order on ties); as soon as a pivot is degenerate the solver switches to
Bland's rule (first improving cell, lowest-index leaving cell) until a pivot
moves mass again. Cycling needs an endless run of degenerate pivots, which
Bland's rule forbids, and every choice is a deterministic function of the
input ordering.
"""
from __future__ import annotations

from collections import deque

import numpy as np

from .errors import SolverFailureError

RC_RTOL = 1e-12


def _northwest_corner(a, b):
    n, m = len(a), len(b)
    flow = np.zeros((n, m))
    ra, rb = a.astype(float).copy(), b.astype(float).copy()
    basis = []
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        flow[i, j] = x
        basis.append((i, j))
        row_done = ra[i] <= rb[j]
        ra[i] -= x
        rb[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if (row_done and i < n - 1) or j == m - 1:
            i += 1
        else:
            j += 1
    return flow, basis


def _tree_path(row_adj, col_adj, src_row, dst_col, n):
    """Nodes on the unique tree path from row ``src_row`` to column ``dst_col``.

    Rows are nodes ``0..n-1`` and columns ``n..n+m-1``.
    """
    start, goal = src_row, n + dst_col
    parent = {start: -1}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        nbrs = (n + c for c in row_adj[node]) if node < n else col_adj[node - n]
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def _duals(C, row_adj, col_adj, n, m):
    u = np.zeros(n)
    v = np.zeros(m)
    seen_r = np.zeros(n, dtype=bool)
    seen_c = np.zeros(m, dtype=bool)
    seen_r[0] = True
    queue = deque([0])
    while queue:
        node = queue.popleft()
        if node < n:
            for c in row_adj[node]:
                if not seen_c[c]:
                    v[c] = C[node, c] - u[node]
                    seen_c[c] = True
                    queue.append(n + c)
        else:
            c = node - n
            for r in col_adj[c]:
                if not seen_r[r]:
                    u[r] = C[r, c] - v[c]
                    seen_r[r] = True
                    queue.append(r)
    return u, v


def transportation_simplex(a, b, C, max_pivots=None):
    """Solve ``min <C, P>`` over couplings of ``a`` and ``b``.

    ``a`` and ``b`` must carry the same total mass (checked by the caller).
    Returns ``(plan, u, v, pivots)`` where ``u, v`` are optimal duals.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    n, m = C.shape
    flow, basis = _northwest_corner(a, b)
    row_adj = [set() for _ in range(n)]
    col_adj = [set() for _ in range(m)]
    for i, j in basis:
        row_adj[i].add(j)
        col_adj[j].add(i)

    scale = float(np.max(np.abs(C))) if C.size else 0.0
    rc_tol = RC_RTOL * scale
    flow_tol = 1e-14 * max(float(a.sum()), 1e-300)
    if max_pivots is None:
        max_pivots = 50 * n * m + 1000

    pivots = 0
    bland = False
    while True:
        u, v = _duals(C, row_adj, col_adj, n, m)
        reduced = C - u[:, None] - v[None, :]
        improving = (reduced < -rc_tol).ravel()
        if not improving.any():
            return flow, u, v, pivots
        if pivots >= max_pivots:
            raise SolverFailureError(f"transportation simplex exceeded {max_pivots} pivots")
        if bland:
            entering = int(np.argmax(improving))
        else:
            entering = int(np.argmin(reduced))
        ei, ej = divmod(entering, m)

        path = _tree_path(row_adj, col_adj, ei, ej, n)
        # consecutive path nodes alternate row/col; the cells walked backwards
        # from the entering cell alternate -, +, -, ...
        cells = []
        for k in range(len(path) - 1):
            p, q = path[k], path[k + 1]
            cells.append((p, q - n) if p < n else (q, p - n))
        minus = cells[::-1][0::2]
        plus = cells[::-1][1::2]

        theta = min(flow[c] for c in minus)
        leave = min((c for c in minus if flow[c] - theta <= flow_tol), key=lambda c: c[0] * m + c[1])
        theta = flow[leave]
        bland = theta <= flow_tol

        for c in minus:
            flow[c] = max(flow[c] - theta, 0.0)
        for c in plus:
            flow[c] += theta
        flow[ei, ej] = theta
        flow[leave] = 0.0

        li, lj = leave
        row_adj[li].discard(lj)
        col_adj[lj].discard(li)
        row_adj[ei].add(ej)
        col_adj[ej].add(ei)
        pivots += 1
