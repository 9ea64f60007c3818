"""Sampling the spread-out random graph and summarising its components."""

import csv
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import _kernels as K
from ._accel import get_backend
from .errors import InvalidArgumentError, InvalidConfigError, UndefinedStatisticError
from .geometry import TORUS, PointCloud, Window, min_image
from .kernel import KernelSpec
from .rng import as_stream

MONOTONE = "monotone"
FRESH = "fresh"
STATS_HEADER = ["replicate", "d", "r", "lambda", "n", "C1", "C2", "components", "wrap_any"]


@dataclass(frozen=True, eq=False)
class CellIndex:
    """Points bucketed into a grid of cells no narrower than the interaction radius."""

    interaction_radius: float
    cell_side: np.ndarray
    shape: tuple
    order: np.ndarray        # point positions sorted by cell
    cell_start: np.ndarray   # bucket c is order[cell_start[c]:cell_start[c+1]]
    cell_pairs: np.ndarray   # unordered neighbouring cell pairs (a <= b)
    torus: bool

    def bucket(self, c: int) -> np.ndarray:
        return self.order[self.cell_start[c]:self.cell_start[c + 1]]

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))


@dataclass
class ComponentStats:
    n: int
    C1: int
    C2: int
    component_count: int
    wrapping: tuple = ()
    edges: int = 0
    labels: np.ndarray = field(default=None, repr=False)
    ids: np.ndarray = field(default=None, repr=False)

    @property
    def wrap_any(self) -> bool:
        return bool(any(self.wrapping))

    @property
    def sizes(self) -> np.ndarray:
        if self.labels is None or self.n == 0:
            return np.zeros(0, dtype=np.int64)
        return np.bincount(self.labels)

    def largest_component_ids(self) -> np.ndarray:
        """Ids in the largest component (lowest label wins a tie)."""
        if self.n == 0:
            return np.zeros(0, dtype=np.int64)
        big = int(np.argmax(self.sizes))
        return self.ids[self.labels == big]

    def row(self, replicate, r, lam, d) -> list:
        return [replicate, d, repr(float(r)), repr(float(lam)), self.n, self.C1, self.C2,
                self.component_count, int(self.wrap_any)]


def _cell_pairs(shape, torus):
    shape = np.asarray(shape)
    d = len(shape)
    grid = np.indices(tuple(shape)).reshape(d, -1).T
    flat = np.ravel_multi_index(grid.T, tuple(shape))
    out = []
    for off in product((-1, 0, 1), repeat=d):
        nb = grid + np.asarray(off)
        if torus:
            nb = np.mod(nb, shape)
            ok = np.ones(len(grid), bool)
        else:
            ok = np.all((nb >= 0) & (nb < shape), axis=1)
        other = np.ravel_multi_index(nb[ok].T, tuple(shape))
        a, b = flat[ok], other
        out.append(np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1))
    pairs = np.unique(np.concatenate(out), axis=0)
    return np.ascontiguousarray(pairs, dtype=np.int64)


def build_cell_index(cloud: PointCloud, interaction_radius: float) -> CellIndex:
    if not interaction_radius > 0:
        raise InvalidConfigError("interaction_radius must be positive")
    win = cloud.window
    sides = np.asarray(win.sides)
    torus = win.boundary == TORUS
    if torus and interaction_radius >= 0.5 * sides.min():
        raise InvalidConfigError(
            f"interaction radius {interaction_radius:g} >= half the torus side {0.5 * sides.min():g}")
    shape = tuple(int(max(1, math.floor(s / interaction_radius))) for s in sides)
    cell_side = sides / np.asarray(shape)
    if len(cloud):
        coords = np.floor((cloud.points - win.lower) / cell_side).astype(np.int64)
        coords = np.clip(coords, 0, np.asarray(shape) - 1)
        flat = np.ravel_multi_index(coords.T, shape)
    else:
        flat = np.zeros(0, np.int64)
    order = np.argsort(flat, kind="stable").astype(np.int64)
    counts = np.bincount(flat, minlength=int(np.prod(shape)))
    cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return CellIndex(float(interaction_radius), cell_side, shape, order, cell_start,
                     _cell_pairs(shape, torus), torus)


def candidate_pairs(cloud: PointCloud, index: CellIndex) -> np.ndarray:
    """All pairs ``i < j`` (cloud positions) within the interaction radius, sorted."""
    sides = np.asarray(cloud.window.sides)
    out = []
    for ia, ib in K.iter_cell_pairs(index.cell_start, index.cell_pairs):
        i, j = index.order[ia], index.order[ib]
        _, dist = K._pair_geometry(cloud.points, i, j, sides, index.torus, 1.0)
        keep = dist <= index.interaction_radius
        out.append(np.stack([np.minimum(i, j)[keep], np.maximum(i, j)[keep]], axis=1))
    if not out:
        return np.zeros((0, 2), np.int64)
    pairs = np.concatenate(out)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def _edge_key(stream, lam, coupling):
    stream = as_stream(stream)
    if coupling == MONOTONE:
        return np.uint64(stream.edge_key)
    if coupling == FRESH:
        return np.uint64(stream.fresh_edge_key(lam))
    raise InvalidArgumentError(f"coupling must be 'monotone' or 'fresh', got {coupling!r}")


def _check_params(cloud, spec, lam, r):
    if spec.d != cloud.d:
        raise InvalidArgumentError(f"kernel is {spec.d}-dimensional, cloud is {cloud.d}-dimensional")
    if not (math.isfinite(lam) and lam >= 0):
        raise InvalidArgumentError(f"lambda must be finite and >= 0, got {lam}")
    if not (math.isfinite(r) and r > 0):
        raise InvalidArgumentError(f"r must be finite and positive, got {r}")


def _kernel_args(cloud, spec, lam, r, index):
    sides = np.asarray(cloud.window.sides, dtype=np.float64)
    scale = lam * r ** (-spec.d) * spec.normalization_constant
    return (cloud.points, index.order, index.cell_start, index.cell_pairs, sides, index.torus,
            spec.knots, spec.values, spec.mode, scale, float(r), float(spec.knots[-1]))


def _canonical(labels):
    """Relabel components by order of first appearance."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inv]


def _stats_from_labels(labels, ids, wrap_by_label, edges):
    n = len(labels)
    if n == 0:
        return ComponentStats(0, 0, 0, 0, (), edges, labels, ids)
    labels = _canonical(labels)
    sizes = np.sort(np.bincount(labels))[::-1]
    c2 = int(sizes[1]) if len(sizes) > 1 else 0
    return ComponentStats(n, int(sizes[0]), c2, len(sizes), tuple(bool(w) for w in wrap_by_label),
                          edges, labels, ids)


def sample_graph(cloud: PointCloud, spec: KernelSpec, lam: float, r: float, stream,
                 coupling: str = MONOTONE, index: CellIndex = None, backend=None) -> ComponentStats:
    """Sample the graph on ``cloud`` and return its component structure.

    Pair ``{i, j}`` is open iff ``U(key, min id, max id) < p``.  With
    ``coupling="monotone"`` the uniform ignores ``lam``, so the open-edge set
    grows with ``lam`` for a fixed stream.
    """
    lam, r = float(lam), float(r)
    _check_params(cloud, spec, lam, r)
    key = _edge_key(stream, lam, coupling)
    n, d = len(cloud), cloud.d
    torus = cloud.window.boundary == TORUS
    if n == 0:
        return ComponentStats(0, 0, 0, 0, (False,) * d if torus else (), 0,
                              np.zeros(0, np.int64), cloud.ids)
    if lam == 0:
        return _stats_from_labels(np.arange(n), cloud.ids, (False,) * d if torus else (), 0)
    if index is None:
        index = build_cell_index(cloud, r * spec.truncation_radius)
    args = _kernel_args(cloud, spec, lam, r, index)
    if get_backend(backend) == "numba":
        parent, wrap, edges = K.sample_components_nb(*args[:1], cloud.ids, *args[1:], key, torus)
        labels = parent
        wrap_any = tuple(wrap.any(axis=0)) if torus else ()
    else:
        ei, ej, disp = K.open_edges_np(args[0], cloud.ids, *args[1:], key)
        labels = K.components_np(n, ei, ej)
        edges = len(ei)
        if torus:
            wrap = K.wrapping_from_edges(n, ei, ej, disp, labels, args[4])
            wrap_any = tuple(wrap.any(axis=0))
        else:
            wrap_any = ()
    return _stats_from_labels(labels, cloud.ids, wrap_any, int(edges))


def open_edges(cloud: PointCloud, spec: KernelSpec, lam: float, r: float, stream,
               coupling: str = MONOTONE, index: CellIndex = None) -> np.ndarray:
    """Explicit ``(m, 2)`` list of open edges (cloud positions, ``i < j``)."""
    lam, r = float(lam), float(r)
    _check_params(cloud, spec, lam, r)
    if len(cloud) == 0 or lam == 0:
        return np.zeros((0, 2), np.int64)
    key = _edge_key(stream, lam, coupling)
    if index is None:
        index = build_cell_index(cloud, r * spec.truncation_radius)
    args = _kernel_args(cloud, spec, lam, r, index)
    ei, ej, _ = K.open_edges_np(args[0], cloud.ids, *args[1:], key)
    e = np.stack([np.minimum(ei, ej), np.maximum(ei, ej)], axis=1)
    return e[np.lexsort((e[:, 1], e[:, 0]))]


def mean_degree(cloud: PointCloud, spec: KernelSpec, lam: float, r: float, stream=None,
                expected: bool = False, coupling: str = MONOTONE, backend=None) -> float:
    """Sampled ``2|E|/n``, or with ``expected=True`` the sum of edge probabilities times ``2/n``."""
    if len(cloud) == 0:
        raise UndefinedStatisticError("mean degree of an empty cloud is undefined")
    lam, r = float(lam), float(r)
    _check_params(cloud, spec, lam, r)
    if lam == 0:
        return 0.0
    if not expected:
        if stream is None:
            raise InvalidArgumentError("a stream is required for the sampled mean degree")
        return 2.0 * sample_graph(cloud, spec, lam, r, stream, coupling, backend=backend).edges / len(cloud)
    index = build_cell_index(cloud, r * spec.truncation_radius)
    args = _kernel_args(cloud, spec, lam, r, index)
    if get_backend(backend) == "numba":
        total = K.expected_degree_sum_nb(*args)
    else:
        total = 2.0 * sum(float(p.sum()) for *_, p in K.iter_pair_probabilities(*args))
    return total / len(cloud)


def box_stats(cloud: PointCloud, spec: KernelSpec, lam: float, r: float, stream, box: Window,
              coupling: str = MONOTONE, backend=None) -> ComponentStats:
    """Components of the subgraph induced by the points in ``box``.

    Edges come from the same keyed uniforms as :func:`sample_graph`, so this is
    exactly the induced subgraph of the full sample.
    """
    if box.d != cloud.d:
        raise InvalidArgumentError("box dimension differs from cloud dimension")
    if not cloud.window.contains_box(box):
        raise InvalidArgumentError(f"box {box.origin}+{box.sides} is not inside the window")
    sub = cloud.restrict(box)
    stats = sample_graph(sub, spec, lam, r, stream, coupling, backend=backend)
    # wrapping is a property of the ambient torus, not of a sub-box
    stats.wrapping = ()
    return stats


def write_stats_csv(path, rows, header=STATS_HEADER) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
