"""Discretised integral operator ``(T f)(x) = lam * int_S phi(x - y) f(y) dy`` on boxes."""

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy.fft import irfftn, rfftn
from scipy.signal import fftconvolve

from ._accel import get_backend, njit
from .errors import ConvergenceError, InvalidArgumentError, InvalidConfigError
from .kernel import KernelSpec

SUBSAMPLES = 8
MAX_M_HIGH_D = 48


@dataclass(frozen=True, eq=False)
class OperatorGrid:
    """Midpoint grid of spacing ``L/m`` on ``[0, L)^d`` (or ``[0, 2L) x [0, L)^{d-1}``)."""

    L: float
    m: int
    kernel: KernelSpec
    lam: float
    boundary: str = "free"
    doubled: bool = False
    allow_large: bool = field(default=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.L) and self.L > 0):
            raise InvalidConfigError(f"box side must be positive, got {self.L}")
        if int(self.m) < 8:
            raise InvalidConfigError(f"grid resolution m must be >= 8, got {self.m}")
        if self.kernel.d >= 3 and self.m > MAX_M_HIGH_D and not self.allow_large:
            raise InvalidConfigError(f"m > {MAX_M_HIGH_D} in d >= 3 needs allow_large=True")
        if self.boundary not in ("free", "torus"):
            raise InvalidConfigError("boundary must be 'free' or 'torus'")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidConfigError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.boundary == "torus" and self.kernel.truncation_radius >= 0.5 * self.L:
            raise InvalidConfigError("torus grid needs kernel support radius < L/2")
        object.__setattr__(self, "m", int(self.m))

    @property
    def d(self) -> int:
        return self.kernel.d

    @property
    def h(self) -> float:
        return self.L / self.m

    @property
    def shape(self) -> tuple:
        first = 2 * self.m if self.doubled else self.m
        return (first,) + (self.m,) * (self.d - 1)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    def nodes(self) -> np.ndarray:
        axes = [(np.arange(n) + 0.5) * self.h for n in self.shape]
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)

    @cached_property
    def stencil(self) -> np.ndarray:
        """Dense ``(2q+1)^d`` array of cell-averaged phi, scaled to unit total mass."""
        h, d = self.h, self.d
        q_full = int(math.ceil(self.kernel.truncation_radius / h + 0.5 * math.sqrt(d)))
        q = min(q_full, max(n - 1 for n in self.shape))
        ax = np.arange(-q, q + 1) * h
        sub = (np.arange(SUBSAMPLES) + 0.5) / SUBSAMPLES - 0.5
        acc = np.zeros((2 * q + 1,) * d)
        centres = np.meshgrid(*([ax] * d), indexing="ij")
        for shift in product(sub * h, repeat=d):
            r2 = sum((c + s) ** 2 for c, s in zip(centres, shift))
            acc += self.kernel.profile(np.sqrt(r2))
        acc /= SUBSAMPLES ** d
        if q < q_full:
            # offsets beyond the box are never used; keep plain cell averages
            return acc
        # quadrature error at the indicator edge is removed by restoring unit mass
        return acc / (acc.sum() * h ** d)

    @cached_property
    def sparse_stencil(self):
        st = self.stencil
        q = (st.shape[0] - 1) // 2
        nz = np.nonzero(st)
        offs = np.stack(nz, axis=1).astype(np.int64) - q
        return np.ascontiguousarray(offs), np.ascontiguousarray(st[nz])

    def apply(self, f, backend=None) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64).ravel()
        if self.lam == 0:
            return np.zeros_like(f)
        coef = self.lam * self.cell_volume
        if get_backend(backend) == "numba":
            offs, w = self.sparse_stencil
            out = np.empty_like(f)
            _apply_stencil_nb(f, np.asarray(self.shape, np.int64), offs, w * coef,
                              self.boundary == "torus", out)
            return out
        grid = f.reshape(self.shape)
        if self.boundary == "free":
            return coef * fftconvolve(grid, self.stencil, mode="same").ravel()
        wrapped = np.zeros(self.shape)
        offs, w = self.sparse_stencil
        np.add.at(wrapped, tuple(np.mod(offs, np.asarray(self.shape)).T), w)
        out = irfftn(rfftn(grid) * rfftn(wrapped), s=self.shape)
        return coef * out.ravel()

    def matrix(self) -> np.ndarray:
        """Dense quadrature matrix (small grids only; used for cross-checks)."""
        n = int(np.prod(self.shape))
        if n > 4096:
            raise InvalidArgumentError("dense matrix limited to 4096 grid points")
        eye = np.eye(n)
        return np.stack([self.apply(eye[:, k], backend="numpy") for k in range(n)], axis=1)


@njit
def _apply_stencil_nb(f, shape, offs, w, torus, out):
    # one contiguous shifted add along the last axis per (offset, row)
    d = shape.shape[0]
    m = shape[d - 1]
    nrows = f.shape[0] // m
    out[:] = 0.0
    for k in range(offs.shape[0]):
        o = offs[k, d - 1]
        wk = w[k]
        for row in range(nrows):
            rem = row
            src = 0
            stride = 1
            ok = True
            for a in range(d - 2, -1, -1):
                c = rem % shape[a] + offs[k, a]
                rem //= shape[a]
                if torus:
                    c = c % shape[a]
                elif c < 0 or c >= shape[a]:
                    ok = False
                    break
                src += c * stride
                stride *= shape[a]
            if not ok:
                continue
            bo = row * m
            bs = src * m
            if torus:
                for c in range(m):
                    cc = c + o
                    if cc >= m:
                        cc -= m
                    elif cc < 0:
                        cc += m
                    out[bo + c] += wk * f[bs + cc]
            else:
                c0 = max(0, -o)
                c1 = min(m, m - o)
                for c in range(c0, c1):
                    out[bo + c] += wk * f[bs + c + o]


@dataclass
class PowerResult:
    norm: float
    iterations: int
    vector: np.ndarray = field(repr=False)
    history: list = field(repr=False, default_factory=list)


def power_iteration(grid: OperatorGrid, tol: float = 1e-11, max_iter: int = 50_000,
                    backend=None) -> PowerResult:
    """Largest eigenvalue of the symmetric nonnegative quadrature operator.

    Starts from the constant function; stops when successive Rayleigh
    quotients differ by less than ``tol``.
    """
    n = int(np.prod(grid.shape))
    x = np.full(n, 1.0 / math.sqrt(n))
    if grid.lam == 0:
        return PowerResult(0.0, 0, x, [0.0])
    history = []
    prev = None
    for it in range(1, max_iter + 1):
        y = grid.apply(x, backend=backend)
        rq = float(x @ y)
        history.append(rq)
        ny = float(np.linalg.norm(y))
        if ny == 0:
            return PowerResult(0.0, it, x, history)
        x = y / ny
        if prev is not None and abs(rq - prev) < tol:
            return PowerResult(rq, it, x, history)
        prev = rq
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps",
                           last=prev, iterations=max_iter)


def operator_norm(grid: OperatorGrid, tol: float = 1e-11, max_iter: int = 50_000, backend=None) -> float:
    return power_iteration(grid, tol, max_iter, backend).norm


def grid_with_spacing(kernel, lam, L, h, **kw) -> OperatorGrid:
    m = int(round(L / h))
    if not math.isclose(m * h, L, rel_tol=1e-9):
        raise InvalidArgumentError(f"L={L} is not a multiple of spacing h={h}")
    return OperatorGrid(L, m, kernel, lam, **kw)


def minimal_supercritical_L(spec: KernelSpec, lam: float, d: int = None, tol: float = 1e-3,
                            m: int = 32, backend=None) -> float:
    """Smallest box side (to ``tol``) with operator norm above one on ``[0, L)^d``.

    The result is also checked on the doubled box ``[0, 2L) x [0, L)^{d-1}``,
    whose norm dominates by domain inclusion.
    """
    if d is not None and d != spec.d:
        raise InvalidArgumentError(f"kernel is {spec.d}-dimensional, d={d} requested")
    if not lam > 1:
        raise InvalidArgumentError(f"lambda must exceed 1 (norm <= lambda <= 1 otherwise), got {lam}")
    spec.ensure_positive_near_origin()

    def norm(L, doubled=False):
        return operator_norm(OperatorGrid(L, m, spec, lam, doubled=doubled), backend=backend)

    lo = hi = spec.truncation_radius
    while norm(hi) <= 1:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise ConvergenceError("operator norm never exceeds 1", last=hi)
    if lo == hi:
        lo = 0.0
        while True:
            mid = 0.5 * hi
            if norm(mid) <= 1:
                lo = mid
                break
            hi = mid
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if norm(mid) > 1:
            hi = mid
        else:
            lo = mid
    L_star = 0.5 * (lo + hi)
    if not norm(L_star + tol, doubled=True) > 1:
        raise ConvergenceError("doubled box is not supercritical at L*", last=L_star)
    return L_star


def _directions(d, n_dirs):
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = (np.arange(n_dirs) + 0.5) * (2 * math.pi / n_dirs)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    g = np.random.Generator(np.random.Philox(key=0x5EED)).standard_normal((n_dirs, d))
    # antipodal pairs keep the direction average exactly symmetric
    g = np.concatenate([g, -g])
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def row_masses(spec: KernelSpec, lam: float, L: float, points, n_dirs: int = 4096) -> np.ndarray:
    """``lam * int_{S - x} phi`` for each ``x`` in the box ``[0, L]^d``.

    Uses that ``S - x`` is star-shaped around 0: the phi-mass is the direction
    average of the radial mass out to the exit distance of each ray.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = _directions(spec.d, n_dirs)
    out = np.empty(len(pts))
    with np.errstate(divide="ignore", invalid="ignore"):
        for k, x in enumerate(pts):
            t_up = np.where(u > 0, (L - x) / u, np.inf)
            t_dn = np.where(u < 0, -x / u, np.inf)
            t = np.minimum(t_up, t_dn).min(axis=1)
            out[k] = lam * np.mean(spec.mass_within(np.minimum(t, 1e300)))
    return out


def interior_row_mass(spec: KernelSpec, lam: float, L: float, K: float, grid: int = 33,
                      n_dirs: int = 4096):
    """Minimum of ``(T 1)(x)`` over nodes at distance >= K from the boundary.

    Returns ``(min_mass, K_min)`` where ``K_min`` is the smallest node distance
    at which the minimum reaches ``(1 + lam) / 2`` (``None`` if never).
    """
    if not K < L / 2:
        raise InvalidConfigError(f"K={K} must be below L/2={L / 2}")
    axes = [np.linspace(0.0, L, grid)] * spec.d
    g = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([a.ravel() for a in g], axis=1)
    dist = np.minimum(nodes, L - nodes).min(axis=1)
    sel = dist >= K - 1e-12
    if not sel.any():
        raise InvalidConfigError("no grid node at the requested distance from the boundary")
    mass = row_masses(spec, lam, L, nodes, n_dirs)
    target = 0.5 * (1 + lam)
    k_min = None
    for level in np.unique(np.round(dist, 12)):
        if mass[dist >= level - 1e-12].min() >= target - 1e-12:
            k_min = float(level)
            break
    return float(mass[sel].min()), k_min
