"""Maximum-weight bipartite matching with forbidden edges.

Solves rectangular instances where any entry may be -inf (forbidden) and any
row or column may stay unmatched. Among equal-weight optima the
lexicographically smallest pair set is returned, so results are exactly
reproducible across runs and platforms. Edges with non-positive weight are
never forced into the result: leaving them out keeps the total and yields a
lexicographically smaller set.

The solver decomposes the instance into connected components of the
finite-edge graph, computes the exact optimum per component with a
subset dynamic program over column masks, and reconstructs the
lexicographic optimum with a single row-major scan over the DP tables.
Components with too many columns for the DP fall back to repeated scipy
assignment solves for the optimum values.
"""

from __future__ import annotations

import math

import numpy as np

# Tolerance for "this partial choice still reaches the optimum" checks.
# Sums of the same weights in different association orders can differ by a
# few ulps; exact integer-valued weights are unaffected.
_REL_TOL = 1e-9
_ABS_TOL = 1e-12

# Mask-DP limit; components with more columns use the scipy fallback.
_DP_MAX_COLS = 20


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_REL_TOL, abs_tol=_ABS_TOL)


def _scipy_max_weight(row_edges: list[list[tuple[int, float]]], free_cols: list[int]) -> float:
    """Optimal total weight via a padded linear assignment reduction."""
    from scipy.optimize import linear_sum_assignment

    n_rows = len(row_edges)
    n_cols = len(free_cols)
    if n_rows == 0 or n_cols == 0:
        return 0.0
    col_pos = {c: k for k, c in enumerate(free_cols)}
    w = np.full((n_rows, n_cols), -math.inf)
    for i, edges in enumerate(row_edges):
        for j, value in edges:
            pos = col_pos.get(j)
            if pos is not None:
                w[i, pos] = value
    finite = np.isfinite(w)
    if not finite.any():
        return 0.0
    big = (float(np.abs(w[finite]).max()) + 1.0) * (n_rows + n_cols + 1)
    cost = np.full((n_rows + n_cols, n_cols + n_rows), big)
    cost[:n_rows, :n_cols] = np.where(finite, -w, big)
    for i in range(n_rows):
        cost[i, n_cols + i] = 0.0
    for j in range(n_cols):
        cost[n_rows + j, j] = 0.0
    cost[n_rows:, n_cols:] = 0.0
    rows, cols = linear_sum_assignment(cost)
    total = 0.0
    for r, c in zip(rows, cols):
        if r < n_rows and c < n_cols and finite[r, c]:
            total += w[r, c]
    return total


class _Component:
    """One connected component of the finite-edge bipartite graph.

    `rows` and `cols` hold global indices ascending; `row_edges[i]` lists
    (local_col, weight) for local row i. `value(ptr, mask)` is the optimal
    total over local rows ptr.. with the columns in `mask` unavailable.
    """

    __slots__ = ("rows", "cols", "row_edges", "_table", "_memo")

    def __init__(self, rows: list[int], cols: list[int],
                 row_edges: list[list[tuple[int, float]]]):
        self.rows = rows
        self.cols = cols
        self.row_edges = row_edges
        self._table: list[list[float]] | None = None
        self._memo: dict[tuple[int, int], float] = {}
        if len(cols) <= _DP_MAX_COLS:
            self._build_table()

    def _build_table(self) -> None:
        n_masks = 1 << len(self.cols)
        nxt = [0.0] * n_masks
        table = [nxt]
        for edges in reversed(self.row_edges):
            cur = nxt.copy()
            for mask in range(n_masks):
                best = nxt[mask]
                for j, w in edges:
                    bit = 1 << j
                    if not mask & bit:
                        cand = w + nxt[mask | bit]
                        if cand > best:
                            best = cand
                cur[mask] = best
            table.append(cur)
            nxt = cur
        table.reverse()
        self._table = table

    def value(self, ptr: int, mask: int) -> float:
        if self._table is not None:
            return self._table[ptr][mask]
        key = (ptr, mask)
        cached = self._memo.get(key)
        if cached is None:
            free = [j for j in range(len(self.cols)) if not mask & (1 << j)]
            cached = _scipy_max_weight(self.row_edges[ptr:], free)
            self._memo[key] = cached
        return cached


def _components(w_rows: list[list[float]], n_rows: int, n_cols: int) -> list[_Component]:
    parent = list(range(n_rows + n_cols))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges_by_row: list[list[tuple[int, float]]] = []
    for i, row in enumerate(w_rows):
        edges = [(j, v) for j, v in enumerate(row) if math.isfinite(v)]
        edges_by_row.append(edges)
        for j, _ in edges:
            ra, rb = find(i), find(n_rows + j)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, tuple[list[int], list[int]]] = {}
    for i in range(n_rows):
        if edges_by_row[i]:
            groups.setdefault(find(i), ([], []))[0].append(i)
    col_used = [False] * n_cols
    for edges in edges_by_row:
        for j, _ in edges:
            col_used[j] = True
    for j in range(n_cols):
        if col_used[j]:
            groups.setdefault(find(n_rows + j), ([], []))[1].append(j)

    comps = []
    for root in sorted(groups):
        rows, cols = groups[root]
        col_local = {c: k for k, c in enumerate(cols)}
        local_edges = [
            [(col_local[j], v) for j, v in edges_by_row[r]] for r in rows
        ]
        comps.append(_Component(rows, cols, local_edges))
    return comps


def solve_max_weight_matching(weights) -> list[tuple[int, int]]:
    """Return the maximum-total-weight matching as sorted (row, col) pairs.

    Any cardinality is legal; -inf edges are never used and ties between
    equal-weight optima resolve to the lexicographically smallest pair set.
    Raises ValueError on +inf or NaN entries.
    """
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        return []
    if w.ndim != 2:
        raise ValueError("weight matrix must be 2-D")
    if np.isposinf(w).any():
        raise ValueError("+inf weights are not allowed")
    if np.isnan(w).any():
        raise ValueError("NaN weights are not allowed")

    n_rows, n_cols = w.shape
    comps = _components(w.tolist(), n_rows, n_cols)
    if not comps:
        return []

    # Per-component scan state: rows consumed so far and the used-column mask.
    ptr = {id(c): 0 for c in comps}
    mask = {id(c): 0 for c in comps}
    rest = {id(c): c.value(0, 0) for c in comps}
    comp_of_row: dict[int, _Component] = {}
    row_local: dict[int, int] = {}
    for comp in comps:
        for local, r in enumerate(comp.rows):
            comp_of_row[r] = comp
            row_local[r] = local

    w_star = sum(rest[id(c)] for c in comps)
    total_rest = w_star
    matched: list[tuple[int, int]] = []
    w_f = 0.0

    for r in range(n_rows):
        comp = comp_of_row.get(r)
        if comp is None:
            continue
        if _close(w_f, w_star):
            break
        key = id(comp)
        cur_rest = rest[key]
        chosen = None
        for local_j, w_rc in comp.row_edges[row_local[r]]:
            if mask[key] & (1 << local_j):
                continue
            cand_rest = comp.value(ptr[key] + 1, mask[key] | (1 << local_j))
            if _close(w_f + w_rc + (total_rest - cur_rest + cand_rest), w_star):
                chosen = (local_j, w_rc, cand_rest)
                break
        ptr[key] += 1
        if chosen is None:
            new_rest = comp.value(ptr[key], mask[key])
        else:
            local_j, w_rc, new_rest = chosen
            matched.append((r, comp.cols[local_j]))
            w_f += w_rc
            mask[key] |= 1 << local_j
        total_rest += new_rest - cur_rest
        rest[key] = new_rest

    return matched


def matching_total_weight(weights, matching: list[tuple[int, int]]) -> float:
    """Total weight of a matching, summed in sorted pair order."""
    w = np.asarray(weights, dtype=float)
    return float(sum(w[r, c] for r, c in sorted(matching)))
