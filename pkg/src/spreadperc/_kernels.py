"""Hot loops of the graph sampler.

Each numba kernel has a numpy/scipy twin with identical floating-point
operation order, so both backends open exactly the same edges.
"""

import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from ._accel import njit
from .kernel import radial_profile, radial_profile_scalar
from .rng import pair_uniform, pair_uniform_scalar

# --------------------------------------------------------------------------
# numba path


@njit
def _find(parent, off, i, stack, track):
    root = i
    k = 0
    while parent[root] != root:
        stack[k] = root
        k += 1
        root = parent[root]
    # stack[k-1] already hangs off the root; fold offsets from the top down
    for t in range(k - 2, -1, -1):
        node = stack[t]
        if track:
            p = parent[node]
            for a in range(off.shape[1]):
                off[node, a] += off[p, a]
        parent[node] = root
    return root


@njit
def _union(parent, size, off, wrap, stack, i, j, disp, sides, track):
    ri = _find(parent, off, i, stack, track)
    rj = _find(parent, off, j, stack, track)
    d = disp.shape[0]
    if ri == rj:
        if track:
            for a in range(d):
                mismatch = off[i, a] + disp[a] - off[j, a]
                if abs(mismatch) > 0.5 * sides[a]:
                    wrap[ri, a] = True
        return
    sign = 1.0
    if size[ri] < size[rj]:
        ri, rj = rj, ri
        i, j = j, i
        sign = -1.0
    parent[rj] = ri
    size[ri] += size[rj]
    if track:
        for a in range(d):
            off[rj, a] = off[i, a] + sign * disp[a] - off[j, a]
            wrap[ri, a] = wrap[ri, a] or wrap[rj, a]


@njit
def sample_components_nb(pos, ids, order, cell_start, cell_pairs, sides, torus,
                         knots, values, mode, scale, r, tmax, key, track):
    """Streaming union-find over all open edges; returns (parent, wrap, n_edges)."""
    n, d = pos.shape
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    off = np.zeros((n if track else 1, d))
    wrap = np.zeros((n if track else 1, d), dtype=np.bool_)
    stack = np.empty(n + 1, dtype=np.int64)
    disp = np.empty(d)
    edges = 0
    ukey = np.uint64(key)
    for k in range(cell_pairs.shape[0]):
        ca = cell_pairs[k, 0]
        cb = cell_pairs[k, 1]
        for ia in range(cell_start[ca], cell_start[ca + 1]):
            i = order[ia]
            jb0 = ia + 1 if ca == cb else cell_start[cb]
            for jb in range(jb0, cell_start[cb + 1]):
                j = order[jb]
                s2 = 0.0
                for a in range(d):
                    dx = pos[j, a] - pos[i, a]
                    if torus:
                        dx = dx - sides[a] * math.ceil(dx / sides[a] - 0.5)
                    disp[a] = dx
                    s2 = s2 + dx * dx
                t = math.sqrt(s2) / r
                if t >= tmax:
                    continue
                p = scale * radial_profile_scalar(t, knots, values, mode)
                if p > 1.0:
                    p = 1.0
                if pair_uniform_scalar(ukey, ids[i], ids[j]) < p:
                    edges += 1
                    _union(parent, size, off, wrap, stack, i, j, disp, sides, track)
    for i in range(n):
        _find(parent, off, i, stack, False)
    return parent, wrap, edges


@njit
def expected_degree_sum_nb(pos, order, cell_start, cell_pairs, sides, torus,
                           knots, values, mode, scale, r, tmax):
    n, d = pos.shape
    total = 0.0
    for k in range(cell_pairs.shape[0]):
        ca = cell_pairs[k, 0]
        cb = cell_pairs[k, 1]
        for ia in range(cell_start[ca], cell_start[ca + 1]):
            i = order[ia]
            jb0 = ia + 1 if ca == cb else cell_start[cb]
            for jb in range(jb0, cell_start[cb + 1]):
                j = order[jb]
                s2 = 0.0
                for a in range(d):
                    dx = pos[j, a] - pos[i, a]
                    if torus:
                        dx = dx - sides[a] * math.ceil(dx / sides[a] - 0.5)
                    s2 = s2 + dx * dx
                t = math.sqrt(s2) / r
                if t >= tmax:
                    continue
                p = scale * radial_profile_scalar(t, knots, values, mode)
                total += min(p, 1.0)
    return 2.0 * total


# --------------------------------------------------------------------------
# numpy path


def iter_cell_pairs(cell_start, cell_pairs, chunk=1 << 21):
    """Yield ``(ia, ib)`` positions in cell-sorted order for every candidate pair."""
    counts = np.diff(cell_start)
    ca, cb = cell_pairs[:, 0], cell_pairs[:, 1]
    na, nb = counts[ca], counts[cb]
    sizes = na * nb
    live = sizes > 0
    ca, cb, nb, sizes = ca[live], cb[live], nb[live], sizes[live]
    if len(sizes) == 0:
        return
    cum = np.cumsum(sizes)
    cuts = np.searchsorted(cum, np.arange(chunk, cum[-1], chunk), side="right")
    bounds = np.unique(np.concatenate([[0], cuts, [len(sizes)]]))
    for k0, k1 in zip(bounds[:-1], bounds[1:]):
        s = sizes[k0:k1]
        pid = np.repeat(np.arange(k0, k1), s)
        t = np.arange(len(pid)) - np.repeat(np.cumsum(s) - s, s)
        ia = cell_start[ca[pid]] + t // nb[pid]
        ib = cell_start[cb[pid]] + t % nb[pid]
        keep = (ca[pid] != cb[pid]) | (ia < ib)
        yield ia[keep], ib[keep]


def _pair_geometry(pos, i, j, sides, torus, r):
    d = pos.shape[1]
    disp = np.empty((len(i), d))
    s2 = np.zeros(len(i))
    for a in range(d):
        dx = pos[j, a] - pos[i, a]
        if torus:
            dx = dx - sides[a] * np.ceil(dx / sides[a] - 0.5)
        disp[:, a] = dx
        s2 = s2 + dx * dx
    return disp, np.sqrt(s2) / r


def iter_pair_probabilities(pos, order, cell_start, cell_pairs, sides, torus,
                            knots, values, mode, scale, r, tmax):
    """Yield ``(i, j, disp, p)`` for candidate pairs with positive probability."""
    for ia, ib in iter_cell_pairs(cell_start, cell_pairs):
        i, j = order[ia], order[ib]
        disp, t = _pair_geometry(pos, i, j, sides, torus, r)
        near = t < tmax
        i, j, disp, t = i[near], j[near], disp[near], t[near]
        p = np.minimum(scale * radial_profile(t, knots, values, mode), 1.0)
        pos_p = p > 0
        yield i[pos_p], j[pos_p], disp[pos_p], p[pos_p]


def open_edges_np(pos, ids, order, cell_start, cell_pairs, sides, torus,
                  knots, values, mode, scale, r, tmax, key):
    ei, ej, ed = [], [], []
    for i, j, disp, p in iter_pair_probabilities(pos, order, cell_start, cell_pairs, sides, torus,
                                                 knots, values, mode, scale, r, tmax):
        is_open = pair_uniform(key, ids[i], ids[j]) < p
        ei.append(i[is_open])
        ej.append(j[is_open])
        ed.append(disp[is_open])
    d = pos.shape[1]
    if not ei:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, d))
    return np.concatenate(ei), np.concatenate(ej), np.concatenate(ed)


def wrapping_from_edges(n, ei, ej, disp, labels, sides):
    """Per-component wrap flags from an explicit edge list.

    Builds a BFS spanning forest, unwraps positions along it by pointer
    jumping, then flags every edge whose displacement disagrees with the
    unwrapped positions by a lattice vector of the torus.
    """
    sides = np.asarray(sides, dtype=float)
    d = len(sides)
    ncomp = int(labels.max()) + 1 if n else 0
    wrap = np.zeros((ncomp, d), dtype=bool)
    if len(ei) == 0:
        return wrap
    reps = np.full(ncomp, -1)
    reps[labels[::-1]] = np.arange(n)[::-1]
    src = np.concatenate([ei, ej, np.full(ncomp, n)])
    dst = np.concatenate([ej, ei, reps])
    g = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n + 1, n + 1)).tocsr()
    _, pred = breadth_first_order(g, n, directed=True, return_predecessors=True)
    par = pred[:n].copy()
    par[par == n] = np.arange(n)[par == n]
    # tree edges are open edges, so the minimal-image step is the true step
    step = np.zeros((n, d))
    child = np.nonzero(par != np.arange(n))[0]
    if len(child):
        key = np.minimum(ei, ej) * (n + 1) + np.maximum(ei, ej)
        sorter = np.argsort(key, kind="stable")
        want = np.minimum(par[child], child) * (n + 1) + np.maximum(par[child], child)
        hit = sorter[np.searchsorted(key, want, sorter=sorter)]
        sign = np.where(ei[hit] == par[child], 1.0, -1.0)
        step[child] = sign[:, None] * disp[hit]
    off = step
    while True:
        nxt = par[par]
        if np.array_equal(nxt, par):
            break
        off = off + off[par]
        par = nxt
    mismatch = off[ei] + disp - off[ej]
    bad = np.abs(mismatch) > 0.5 * sides
    for a in range(d):
        wrap[np.unique(labels[ei[bad[:, a]]]), a] = True
    return wrap


def components_np(n, ei, ej):
    g = coo_matrix((np.ones(len(ei)), (ei, ej)), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return labels
