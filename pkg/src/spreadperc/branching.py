"""Poisson Galton-Watson companion process and the path-count law."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix

from .errors import InvalidArgumentError
from .rng import as_stream

EXTINCT = "extinct"
CAPPED = "survived-to-cap"
ALIVE = "alive"


@dataclass(frozen=True)
class GWResult:
    lam: float
    psi: float
    residual: float


def _fixed_point(lam, psi):
    return 1.0 - math.exp(-lam * psi) - psi


def survival_probability(lam: float, tol: float = 1e-15) -> GWResult:
    """Largest root of ``psi = 1 - exp(-lam * psi)``.

    Newton iterations kept inside a shrinking bracket, bisecting whenever the
    Newton step leaves it.  Returns exactly 0 for ``lam <= 1``.
    """
    lam = float(lam)
    if not math.isfinite(lam):
        raise InvalidArgumentError(f"lambda must be finite, got {lam}")
    if lam <= 0:
        raise InvalidArgumentError(f"lambda must be positive, got {lam}")
    if not 0 < tol <= 1e-6:
        raise InvalidArgumentError("tol must lie in (0, 1e-6]")
    if lam <= 1:
        return GWResult(lam, 0.0, 0.0)
    # f > 0 just right of the origin when lam > 1, f(1) = -exp(-lam) < 0
    lo = min(1e-9, 0.5 * (1.0 - 1.0 / lam))
    while _fixed_point(lam, lo) <= 0:
        lo *= 0.5
    hi = 1.0
    x = 1.0 - math.exp(-lam)
    for _ in range(200):
        f = _fixed_point(lam, x)
        if f > 0:
            lo = x
        else:
            hi = x
        fp = lam * math.exp(-lam * x) - 1.0
        step = f / fp if fp != 0 else math.inf
        nxt = x - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= tol * max(1.0, abs(x)) or hi - lo <= tol:
            x = nxt
            break
        x = nxt
    return GWResult(lam, x, abs(_fixed_point(lam, x)))


@dataclass
class GWRun:
    outcome: str
    generations: list

    @property
    def survived(self) -> bool:
        return self.outcome != EXTINCT


def gw_simulate(lam: float, max_generations: int, population_cap: int = 10 ** 7, stream=0) -> GWRun:
    """Generation sizes of a Poisson(lam) Galton-Watson tree from one ancestor.

    The offspring of ``z`` individuals is drawn as one Poisson(lam * z).
    """
    if max_generations < 1 or population_cap < 1:
        raise InvalidArgumentError("max_generations and population_cap must be positive")
    gen = as_stream(stream).generator()
    z = 1
    sizes = [1]
    for _ in range(max_generations):
        z = int(gen.poisson(lam * z))
        sizes.append(z)
        if z == 0:
            return GWRun(EXTINCT, sizes)
        if z >= population_cap:
            return GWRun(CAPPED, sizes)
    return GWRun(ALIVE, sizes)


def survival_frequency(lam, runs, max_generations, stream, population_cap=10 ** 7) -> float:
    stream = as_stream(stream)
    hits = sum(gw_simulate(lam, max_generations, population_cap, stream.child(k)).survived
               for k in range(runs))
    return hits / runs


def expected_paths(r: float, d: int, lam: float, n: int) -> float:
    """Expected number of n-step paths started in a unit box of the rescaled graph: ``r^d lam^n``."""
    if n < 0:
        raise InvalidArgumentError("n must be >= 0")
    return float(r) ** d * float(lam) ** n


def count_paths(n_points: int, edges: np.ndarray, start_mask: np.ndarray, max_len: int = 3) -> list:
    """Numbers of self-avoiding directed paths of length 0..max_len starting in ``start_mask``."""
    if max_len > 3:
        raise InvalidArgumentError("path counting is implemented for lengths up to 3")
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    a = coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                   shape=(n_points, n_points)).tocsr()
    deg = np.asarray(a.sum(axis=1)).ravel()
    s = np.asarray(start_mask, dtype=float)
    counts = [float(s.sum())]
    if max_len >= 1:
        counts.append(float(s @ deg))
    if max_len >= 2:
        # x0 - x1 - x2 with x2 != x0
        counts.append(float((a @ s) @ (deg - 1)))
    if max_len >= 3:
        # sum over (x0, x1, x2) of deg(x2) - 1 - [x0 ~ x2]
        two = a @ (a @ s) - deg * s     # (x0, x1) pairs ending next to x2, x0 != x2
        counts.append(float(two @ (deg - 1)) - _closing_count(a, s))
    return counts


def _closing_count(a, s):
    """Number of (x0, x1, x2) paths with x0 in the start set and x0 ~ x2."""
    # for each edge x0 ~ x2, the number of common neighbours x1
    a = a.tocsr()
    common = a.multiply(a @ a)  # entry (x0, x2) = #x1 adjacent to both, on edges only
    return float(np.asarray(common.sum(axis=1)).ravel() @ s)
