"""Box renormalisation: good events on adjacent boxes and the induced bond field."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from .errors import InvalidArgumentError, InvalidConfigError
from .geometry import FREE, PointCloud, Window, sample_poisson
from .graph import MONOTONE, ComponentStats, box_stats
from .kernel import KernelSpec
from .rng import as_stream

P0_K1 = 0.8639  # Balister-Bollobas-Walters bound p_0(1) for 1-independent bond percolation


@dataclass(frozen=True, eq=False)
class GraphSample:
    """One realisation: a cloud plus the keyed edge randomness at (lam, r)."""

    cloud: PointCloud
    kernel: KernelSpec
    lam: float
    r: float
    stream: object
    coupling: str = MONOTONE
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def rho(self) -> float:
        return self.r ** self.cloud.d

    def box_stats(self, box: Window) -> ComponentStats:
        key = (box.origin, box.sides)
        if key not in self._cache:
            self._cache[key] = box_stats(self.cloud, self.kernel, self.lam, self.r, self.stream,
                                         box, self.coupling)
        return self._cache[key]


@dataclass(frozen=True)
class BoxGrid:
    """Boxes ``S_v = prod [v_i L, v_i L + L)`` in rescaled units (side ``L r`` in the cloud)."""

    L: float
    shape: tuple
    r: float
    d: int = 2

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidConfigError("box side L must be positive")
        if len(self.shape) != 2:
            raise InvalidConfigError("bond fields live on a two-dimensional slice of boxes")
        if self.d < 2:
            raise InvalidConfigError("box grids need d >= 2")

    @property
    def side(self) -> float:
        return self.L * self.r

    def _vec(self, v):
        v = tuple(int(x) for x in v)
        return v + (0,) * (self.d - len(v))

    def box(self, v) -> Window:
        v = self._vec(v)
        return Window((self.side,) * self.d, FREE, tuple(self.side * x for x in v))

    def union_box(self, v, w) -> Window:
        v, w = self._vec(v), self._vec(w)
        diff = [b - a for a, b in zip(v, w)]
        if sorted(map(abs, diff)) != [0] * (self.d - 1) + [1]:
            raise InvalidArgumentError(f"boxes {v} and {w} are not adjacent")
        lo = tuple(min(a, b) for a, b in zip(v, w))
        sides = tuple(self.side * (2 if a != b else 1) for a, b in zip(v, w))
        return Window(sides, FREE, tuple(self.side * x for x in lo))

    def window(self) -> Window:
        sides = tuple(self.side * n for n in self.shape) + (self.side,) * (self.d - 2)
        return Window(sides, FREE)

    def contains(self, v) -> bool:
        return all(0 <= x < n for x, n in zip(v, self.shape))


@dataclass(frozen=True)
class GoodEventConfig:
    a: float
    rho: float

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidConfigError("good-event threshold a must be positive")

    @property
    def threshold(self) -> float:
        return self.a * self.rho


def good_event(sample: GraphSample, v, w, cfg: GoodEventConfig, grid: BoxGrid) -> bool:
    """Both boxes carry a component larger than ``a rho`` and their union has at most one."""
    if not (grid.contains(v) and grid.contains(w)):
        raise InvalidArgumentError(f"edge {{{v}, {w}}} leaves the box grid")
    union = grid.union_box(v, w)
    if not sample.cloud.window.contains_box(union):
        raise InvalidArgumentError("union box is outside the sampled window")
    t = cfg.threshold
    if sample.box_stats(grid.box(v)).C1 <= t or sample.box_stats(grid.box(w)).C1 <= t:
        return False
    return sample.box_stats(union).C2 < t


def largest_components_joined(sample: GraphSample, v, w, grid: BoxGrid) -> bool:
    """Whether the largest components of ``S_v`` and ``S_w`` lie in one component of ``S_e``."""
    sv = sample.box_stats(grid.box(v)).largest_component_ids()
    sw = sample.box_stats(grid.box(w)).largest_component_ids()
    se = sample.box_stats(grid.union_box(v, w))
    lookup = dict(zip(se.ids.tolist(), se.labels.tolist()))
    labs = {lookup[i] for i in np.concatenate([sv, sw]).tolist()}
    return len(labs) == 1


def _edge_window(grid: BoxGrid) -> Window:
    sides = (2 * grid.side,) + (grid.side,) * (grid.d - 1)
    return Window(sides, FREE)


def calibrate_a(kernel: KernelSpec, lam: float, r: float, L: float, replicates: int = 50, stream=0) -> float:
    """Half the median of ``C1(G'[S_1]) / rho`` over a pilot run."""
    stream = as_stream(stream)
    d = kernel.d
    box = Window((L * r,) * d, FREE)
    fracs = []
    for k in range(replicates):
        s = stream.child(k)
        cloud = sample_poisson(box, 1.0, s.child(0))
        st = box_stats(cloud, kernel, lam, r, s.child(1), box)
        fracs.append(st.C1 / r ** d)
    return 0.5 * float(np.median(fracs))


@dataclass(frozen=True)
class GoodEstimate:
    p_hat: float
    ci_lo: float
    ci_hi: float
    successes: int
    replicates: int


def wilson_interval(k: int, n: int, confidence: float = 0.95):
    ci = sps.binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def estimate_good_probability(kernel: KernelSpec, lam: float, r: float, L: float, a: float,
                              replicates: int, stream) -> GoodEstimate:
    """Frequency of good(e) for one edge, a fresh Poisson sample per replicate."""
    if replicates < 30:
        raise InvalidArgumentError("replicates must be >= 30")
    stream = as_stream(stream)
    grid = BoxGrid(L, (2, 1), r, kernel.d)
    cfg = GoodEventConfig(a, r ** kernel.d)
    win = _edge_window(grid)
    hits = 0
    for k in range(replicates):
        s = stream.child(k)
        cloud = sample_poisson(win, 1.0, s.child(0))
        sample = GraphSample(cloud, kernel, lam, r, s.child(1))
        hits += good_event(sample, (0, 0), (1, 0), cfg, grid)
    lo, hi = wilson_interval(hits, replicates)
    return GoodEstimate(hits / replicates, lo, hi, hits, replicates)


@dataclass(frozen=True, eq=False)
class BondConfig:
    """Bond states on an ``nx x ny`` piece of Z^2.

    ``horizontal[x, y]`` joins ``(x, y)`` and ``(x + 1, y)``; ``vertical[x, y]``
    joins ``(x, y)`` and ``(x, y + 1)``.  Periodic configs wrap both axes.
    """

    horizontal: np.ndarray
    vertical: np.ndarray
    periodic: bool = False

    @property
    def shape(self) -> tuple:
        return self.vertical.shape[0], self.horizontal.shape[1]

    def edges(self):
        nx, ny = self.shape
        idx = np.arange(nx * ny).reshape(nx, ny)
        if self.periodic:
            hi, hj = idx, np.roll(idx, -1, axis=0)
            vi, vj = idx, np.roll(idx, -1, axis=1)
        else:
            hi, hj = idx[:-1, :], idx[1:, :]
            vi, vj = idx[:, :-1], idx[:, 1:]
        hm, vm = self.horizontal.astype(bool), self.vertical.astype(bool)
        i = np.concatenate([hi[hm], vi[vm]])
        j = np.concatenate([hj[hm], vj[vm]])
        axis = np.concatenate([np.zeros(hm.sum(), int), np.ones(vm.sum(), int)])
        return i, j, axis

    def n_open(self) -> int:
        return int(self.horizontal.sum() + self.vertical.sum())


def bond_config(shape, fill=False, periodic=False) -> BondConfig:
    nx, ny = shape
    hs = (nx, ny) if periodic else (nx - 1, ny)
    vs = (nx, ny) if periodic else (nx, ny - 1)
    return BondConfig(np.full(hs, fill, bool), np.full(vs, fill, bool), periodic)


def iid_bond_sample(p: float, shape, stream, periodic: bool = False) -> BondConfig:
    if not 0 <= p <= 1:
        raise InvalidArgumentError(f"p must lie in [0, 1], got {p}")
    gen = as_stream(stream).generator()
    base = bond_config(shape, periodic=periodic)
    h = gen.random(base.horizontal.shape) < p
    v = gen.random(base.vertical.shape) < p
    return BondConfig(h, v, periodic)


def _site_labels(cfg: BondConfig):
    nx, ny = cfg.shape
    i, j, _ = cfg.edges()
    g = coo_matrix((np.ones(len(i)), (i, j)), shape=(nx * ny, nx * ny))
    _, labels = connected_components(g, directed=False)
    return labels.reshape(nx, ny)


def spanning_exists(cfg: BondConfig, axis: int = 0) -> bool:
    """Open crossing between the two faces orthogonal to ``axis`` (0: left-right)."""
    if axis not in (0, 1):
        raise InvalidArgumentError("axis must be 0 or 1")
    labels = _site_labels(cfg)
    if axis == 0:
        a, b = labels[0, :], labels[-1, :]
    else:
        a, b = labels[:, 0], labels[:, -1]
    return bool(np.intersect1d(a, b).size)


def wraps(cfg: BondConfig, axis: int = 0) -> bool:
    """Open cycle winding around the torus along ``axis`` (periodic configs)."""
    if not cfg.periodic:
        raise InvalidArgumentError("wrapping needs a periodic bond config")
    nx, ny = cfg.shape
    i, j, ax = cfg.edges()
    disp = np.zeros((len(i), 2))
    disp[np.arange(len(i)), ax] = 1.0
    labels = _site_labels(cfg).ravel()
    w = K.wrapping_from_edges(nx * ny, i, j, disp, labels, (nx, ny))
    return bool(w[:, axis].any()) if len(w) else False


def derived_bond_field(sample: GraphSample, grid: BoxGrid, cfg: GoodEventConfig) -> BondConfig:
    """Bond ``e`` open iff good(e) holds in the one shared sample."""
    nx, ny = grid.shape
    if nx < 8 or ny < 8:
        raise InvalidConfigError("the box grid must have at least 8 x 8 boxes")
    if not sample.cloud.window.contains_box(grid.window()):
        raise InvalidArgumentError("box grid does not fit inside the sampled window")
    out = bond_config((nx, ny))
    for x in range(nx - 1):
        for y in range(ny):
            out.horizontal[x, y] = good_event(sample, (x, y), (x + 1, y), cfg, grid)
    for x in range(nx):
        for y in range(ny - 1):
            out.vertical[x, y] = good_event(sample, (x, y), (x, y + 1), cfg, grid)
    return out


def bond_distance(e, f) -> int:
    """Graph distance in Z^2 between two bonds given as pairs of sites."""
    return min(abs(a[0] - b[0]) + abs(a[1] - b[1]) for a in e for b in f)


def independence_pvalue(x, y, n_resamples: int = 9999, seed: int = 0) -> float:
    """Two-sided permutation test of zero correlation between paired samples."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.std() == 0 or y.std() == 0:
        return 1.0
    res = sps.permutation_test((x, y), lambda a, b: np.corrcoef(a, b)[0, 1],
                               permutation_type="pairings", n_resamples=n_resamples,
                               alternative="two-sided", random_state=seed)
    return float(res.pvalue)


def crossing_frequency(p: float, shape, replicates: int, stream, axis: int = 0) -> float:
    stream = as_stream(stream)
    return float(np.mean([spanning_exists(iid_bond_sample(p, shape, stream.child(k)), axis)
                          for k in range(replicates)]))
