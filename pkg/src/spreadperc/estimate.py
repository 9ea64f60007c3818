"""Giant-fraction curves, threshold bisection and the trend of the threshold in r."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from ._accel import parallel_map
from .branching import survival_probability
from .errors import BracketError, InvalidArgumentError
from .geometry import TORUS, Window, sample_poisson
from .graph import MONOTONE, build_cell_index, sample_graph
from .kernel import KernelSpec
from .rng import as_stream

log = logging.getLogger(__name__)

WRAP = "wrap-probability-half"
GIANT = "giant-fraction-crossing"
DEFAULT_SCALE = 48


def torus_window(r: float, d: int, scale: float = DEFAULT_SCALE) -> Window:
    """Torus of side ``scale * r`` (constant geometry in rescaled units)."""
    return Window.cube(scale * r, d, TORUS)


def _mean_ci(x, confidence=0.95):
    x = np.asarray(x, float)
    m = float(x.mean())
    if len(x) < 2:
        return m, m, m
    half = float(sps.t.ppf(0.5 + confidence / 2, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x)))
    return m, m - half, m + half


class _Replicates:
    """Clouds and cell indices for a batch, reused across lambda probes."""

    def __init__(self, kernel, r, window, replicates, stream):
        stream = as_stream(stream)
        self.kernel, self.r = kernel, float(r)
        self.items = []
        for k in range(replicates):
            s = stream.child(k)
            cloud = sample_poisson(window, 1.0, s.child(0))
            index = build_cell_index(cloud, self.r * kernel.truncation_radius)
            self.items.append((cloud, index, s.child(1)))

    def stats(self, lam, backend=None):
        def one(item):
            cloud, index, es = item
            return sample_graph(cloud, self.kernel, lam, self.r, es, MONOTONE, index, backend)
        return parallel_map(one, self.items)


@dataclass
class GiantCurve:
    lam: np.ndarray
    c1: np.ndarray          # (replicates, len(lam)) of C1/n
    c2: np.ndarray
    wrap: np.ndarray

    def table(self) -> list:
        rows = []
        for k, lam in enumerate(self.lam):
            m, lo, hi = _mean_ci(self.c1[:, k])
            rows.append({"lambda": float(lam), "mean_C1_frac": m, "mean_C2_frac": float(self.c2[:, k].mean()),
                         "ci_lo": lo, "ci_hi": hi, "wrap_frac": float(self.wrap[:, k].mean())})
        return rows


def giant_curve(kernel: KernelSpec, r: float, lam_grid, window: Window, replicates: int, stream,
                backend=None) -> GiantCurve:
    """C1/n and C2/n along an increasing lambda grid under monotone coupling."""
    lam_grid = np.asarray(lam_grid, dtype=float)
    if np.any(np.diff(lam_grid) <= 0):
        raise InvalidArgumentError("lambda grid must be strictly increasing")
    reps = _Replicates(kernel, r, window, replicates, stream)
    c1 = np.zeros((replicates, len(lam_grid)))
    c2 = np.zeros_like(c1)
    wrap = np.zeros_like(c1, dtype=bool)
    for k, lam in enumerate(lam_grid):
        for i, st in enumerate(reps.stats(lam, backend)):
            n = max(st.n, 1)
            c1[i, k], c2[i, k], wrap[i, k] = st.C1 / n, st.C2 / n, st.wrap_any
    return GiantCurve(lam_grid, c1, c2, wrap)


def saturation_lambda(kernel: KernelSpec, r: float) -> float:
    """Smallest lambda at which every pair inside the support is joined with probability one."""
    peak = float(kernel.scaled_values.max())
    return float(r) ** kernel.d / peak


def bisect_monotone(statistic, target, lo, hi, tol):
    """Locate where a nondecreasing ``statistic`` reaches ``target`` on ``[lo, hi]``."""
    s_lo, s_hi = statistic(lo), statistic(hi)
    if not (s_lo < target <= s_hi):
        raise BracketError(f"statistic does not cross {target} on [{lo}, {hi}]: "
                           f"values {s_lo:.4g}, {s_hi:.4g}", lo, hi, s_lo, s_hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if statistic(mid) >= target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), lo, hi


@dataclass
class ThresholdEstimate:
    r: float
    lambda_c: float
    ci_lo: float
    ci_hi: float
    criterion: str
    replicates: int
    batches: list = field(default_factory=list)
    window: dict = field(default_factory=dict)
    saturated: bool = False

    @property
    def half_width(self) -> float:
        if not math.isfinite(self.lambda_c):
            return 0.0
        return 0.5 * (self.ci_hi - self.ci_lo)

    def row(self) -> list:
        return [repr(float(self.r)), repr(float(self.lambda_c)), repr(float(self.ci_lo)), repr(float(self.ci_hi)),
                self.criterion]


def threshold_bisect(kernel: KernelSpec, r: float, window: Window = None, replicates: int = 16,
                     tol: float = 0.01, stream=0, criterion: str = WRAP, theta: float = 0.05,
                     lam_lo: float = 0.5, lam_hi: float = 3.0, batches: int = 4,
                     statistic=None, backend=None, allow_infinite: bool = False) -> ThresholdEstimate:
    """Bisect the monotone criterion statistic once per independent replicate batch.

    ``statistic(lam, batch)`` may be injected; by default it is the wrap
    fraction (target 1/2) or the mean C1/n (target ``theta``).

    With ``allow_infinite`` a statistic that stays below target at
    ``lam_hi`` is re-probed at the saturation point, beyond which no edge
    probability can grow.  If it is still below target there, the batch's
    threshold is infinite.
    """
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    if criterion == GIANT and not 0 < theta < 1:
        raise InvalidArgumentError("theta must lie in (0, 1)")
    if criterion not in (WRAP, GIANT):
        raise InvalidArgumentError(f"unknown criterion {criterion!r}")
    stream = as_stream(stream)
    if window is None:
        window = torus_window(r, kernel.d)
    if criterion == WRAP and window.boundary != TORUS:
        raise InvalidArgumentError("the wrap criterion needs a torus window")
    target = 0.5 if criterion == WRAP else theta
    label = WRAP if criterion == WRAP else f"{GIANT}({theta:g})"
    estimates = []
    for b in range(batches):
        if statistic is None:
            reps = _Replicates(kernel, r, window, replicates, stream.child(b))

            def stat(lam, reps=reps):
                sts = reps.stats(lam, backend)
                if criterion == WRAP:
                    return float(np.mean([s.wrap_any for s in sts]))
                return float(np.mean([s.C1 / max(s.n, 1) for s in sts]))
        else:
            def stat(lam, b=b):
                return statistic(lam, b)
        try:
            est, _, _ = bisect_monotone(stat, target, lam_lo, lam_hi, tol)
        except BracketError as err:
            lam_sat = saturation_lambda(kernel, r)
            if not (allow_infinite and err.stat_hi < target and lam_sat > lam_hi):
                raise
            if stat(lam_sat) < target:
                est = math.inf
            else:
                est, _, _ = bisect_monotone(stat, target, lam_hi, lam_sat, tol)
        log.info("r=%g batch %d: lambda_c=%.4f", r, b, est)
        estimates.append(est)
    n_inf = sum(not math.isfinite(e) for e in estimates)
    if n_inf:
        if n_inf < len(estimates):
            raise BracketError(f"r={r}: {n_inf} of {len(estimates)} batches never cross the target")
        return ThresholdEstimate(float(r), math.inf, math.inf, math.inf, label, replicates, estimates,
                                 {"sides": list(window.sides), "boundary": window.boundary}, True)
    if batches >= 2:
        m, lo, hi = _mean_ci(estimates)
    else:
        m = estimates[0]
        lo, hi = m - tol / 2, m + tol / 2
    lo, hi = min(lo, m - tol / 2), max(hi, m + tol / 2)
    return ThresholdEstimate(float(r), m, lo, hi, label, replicates, estimates,
                             {"sides": list(window.sides), "boundary": window.boundary})


@dataclass
class TrendReport:
    estimates: list
    nonincreasing: bool = None
    distance_to_one: list = field(default_factory=list)


def threshold_trend(kernel: KernelSpec, r_list, window_scale: float = DEFAULT_SCALE, stream=0,
                    **kw) -> TrendReport:
    """Threshold estimates over increasing r with a shared criterion."""
    r_list = [float(r) for r in r_list]
    if any(b <= a for a, b in zip(r_list, r_list[1:])):
        raise InvalidArgumentError("r-list must be increasing")
    stream = as_stream(stream)
    kw.setdefault("allow_infinite", True)
    ests = [threshold_bisect(kernel, r, torus_window(r, kernel.d, window_scale), stream=stream.child(k), **kw)
            for k, r in enumerate(r_list)]
    report = TrendReport(ests, distance_to_one=[e.lambda_c - 1.0 for e in ests])
    if len(ests) >= 2:
        report.nonincreasing = all(b.lambda_c - a.lambda_c <= a.half_width + b.half_width
                                   for a, b in zip(ests, ests[1:]))
    return report


def finite_size_drift(kernel: KernelSpec, r: float, scale: float = DEFAULT_SCALE, stream=0, **kw) -> float:
    """Threshold at window scale 2s minus threshold at scale s."""
    stream = as_stream(stream)
    small = threshold_bisect(kernel, r, torus_window(r, kernel.d, scale), stream=stream.child(0), **kw)
    large = threshold_bisect(kernel, r, torus_window(r, kernel.d, 2 * scale), stream=stream.child(1), **kw)
    drift = large.lambda_c - small.lambda_c
    log.info("finite-size drift at r=%g: %.4f (scale %g -> %g)", r, drift, scale, 2 * scale)
    return drift


@dataclass(frozen=True)
class GWComparison:
    mean_c1: float
    ci_lo: float
    ci_hi: float
    psi: float
    difference: float


def gw_comparison(kernel: KernelSpec, lam: float, r: float, window: Window = None, replicates: int = 20,
                  stream=0, backend=None) -> GWComparison:
    """Mean giant fraction against the Poisson branching survival probability."""
    if not lam > 1:
        raise InvalidArgumentError("gw_comparison needs lambda > 1")
    if window is None:
        window = torus_window(r, kernel.d)
    reps = _Replicates(kernel, r, window, replicates, stream)
    fr = [s.C1 / s.n for s in reps.stats(lam, backend)]
    m, lo, hi = _mean_ci(fr)
    psi = survival_probability(lam).psi
    return GWComparison(m, lo, hi, psi, m - psi)
