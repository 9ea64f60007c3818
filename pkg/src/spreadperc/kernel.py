"""Radial connection functions and the edge-probability rule.

A kernel is stored as a radial profile on knots (piecewise constant or
piecewise linear) times a normalisation constant fixed at construction so
that the profile integrates to one over R^d.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit
from .errors import InvalidArgumentError, InvalidConfigError, NotNormalizedError

STEP = 0
LINEAR = 1
NORM_TOL = 1e-6


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return d * unit_ball_volume(d)


@njit
def radial_profile_scalar(t, knots, values, mode):
    n = knots.shape[0]
    if t < knots[0] or t >= knots[n - 1]:
        return 0.0
    lo = 0
    hi = n - 1
    # invariant: knots[lo] <= t < knots[hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if knots[mid] <= t:
            lo = mid
        else:
            hi = mid
    if mode == 0:
        return values[lo]
    return values[lo] + (values[lo + 1] - values[lo]) * (t - knots[lo]) / (knots[lo + 1] - knots[lo])


def radial_profile(t, knots, values, mode):
    t = np.asarray(t, dtype=np.float64)
    k = np.searchsorted(knots, t, side="right") - 1
    inside = (k >= 0) & (k < len(knots) - 1)
    kk = np.clip(k, 0, len(knots) - 2)
    if mode == STEP:
        out = values[kk]
    else:
        out = values[kk] + (values[kk + 1] - values[kk]) * (t - knots[kk]) / (knots[kk + 1] - knots[kk])
    return np.where(inside, out, 0.0)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Radial kernel ``phi(x) = normalization_constant * profile(|x|)``.

    ``shape`` is informational ("ball", "annulus", "radial-table"); the
    numerical content lives in ``knots``/``values``/``mode``.  Passing
    ``normalization_constant=None`` derives it; passing a value checks it.
    """

    shape: str
    d: int
    knots: np.ndarray
    values: np.ndarray
    mode: int = STEP
    normalization_constant: float = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.d) < 1:
            raise InvalidConfigError(f"d must be >= 1, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        knots = np.ascontiguousarray(self.knots, dtype=np.float64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if knots.ndim != 1 or knots.shape != values.shape or len(knots) < 2:
            raise InvalidConfigError("knots and values must be 1-d arrays of equal length >= 2")
        if knots[0] < 0 or np.any(np.diff(knots) <= 0) or not np.all(np.isfinite(knots)):
            raise InvalidConfigError("knots must be finite, nonnegative and strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidConfigError("kernel values must be finite and nonnegative")
        if self.mode not in (STEP, LINEAR):
            raise InvalidConfigError(f"mode must be STEP or LINEAR, got {self.mode}")
        for a in (knots, values):
            a.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        raw = self.raw_mass(math.inf)
        if raw <= 0:
            raise NotNormalizedError("kernel profile has zero mass")
        if self.normalization_constant is None:
            object.__setattr__(self, "normalization_constant", 1.0 / raw)
        else:
            c = float(self.normalization_constant)
            if not (c > 0 and abs(c * raw - 1.0) <= NORM_TOL):
                raise NotNormalizedError(f"integral of phi is {c * raw:.9g}, not 1")
            object.__setattr__(self, "normalization_constant", c)

    # radial mass -----------------------------------------------------------

    def raw_mass(self, t):
        """Integral of the un-normalised profile over the ball of radius ``t``."""
        d = self.d
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape)
        for i in range(len(self.knots) - 1):
            a, b_full = self.knots[i], self.knots[i + 1]
            b = np.clip(t, a, b_full)
            v0 = self.values[i]
            if self.mode == STEP:
                total = total + v0 * (b ** d - a ** d) / d
            else:
                slope = (self.values[i + 1] - v0) / (b_full - a)
                alpha = v0 - slope * a
                total = total + alpha * (b ** d - a ** d) / d + slope * (b ** (d + 1) - a ** (d + 1)) / (d + 1)
        out = sphere_area(d) * total
        return float(out) if out.ndim == 0 else out

    def mass_within(self, t):
        """phi-mass of the ball of radius ``t`` (vectorised over ``t``)."""
        return self.normalization_constant * self.raw_mass(t)

    # evaluation ------------------------------------------------------------

    def profile(self, t):
        return self.normalization_constant * radial_profile(t, self.knots, self.values, self.mode)

    @property
    def scaled_values(self) -> np.ndarray:
        return self.values * self.normalization_constant

    @property
    def truncation_radius(self) -> float:
        """Smallest radius beyond which phi vanishes identically."""
        v = self.values
        if self.mode == STEP:
            pos = np.nonzero(v[:-1] > 0)[0]
            return float(self.knots[pos[-1] + 1])
        seg = np.nonzero((v[:-1] > 0) | (v[1:] > 0))[0]
        return float(self.knots[seg[-1] + 1])

    @property
    def positive_near_origin(self) -> bool:
        return bool(self.knots[0] == 0.0 and self.values[0] > 0)

    def ensure_positive_near_origin(self) -> None:
        if not self.positive_near_origin:
            raise InvalidConfigError(
                f"{self.shape} kernel vanishes near the origin; the kernel would be reducible")

    def truncated(self, radius: float) -> "KernelSpec":
        """Same normalisation constant, profile cut to zero beyond ``radius``."""
        if radius >= self.truncation_radius:
            return self
        keep = self.knots < radius
        knots = np.append(self.knots[keep], radius)
        end = self.profile(radius) / self.normalization_constant if self.mode == LINEAR else 0.0
        values = np.append(self.values[keep], end)
        spec = object.__new__(KernelSpec)
        for name, val in dict(shape=self.shape, d=self.d, knots=knots, values=values, mode=self.mode,
                              normalization_constant=self.normalization_constant,
                              params={**self.params, "truncated_at": radius}).items():
            object.__setattr__(spec, name, val)
        return spec

    def to_config(self) -> dict:
        return {"shape": self.shape, "d": self.d, "parameters": dict(self.params)}


def ball(d: int, radius: float = None) -> KernelSpec:
    """Indicator of a ball; by default the ball of volume one (value 1)."""
    c = None
    if radius is None:
        radius = unit_ball_volume(d) ** (-1.0 / d)
        c = 1.0
    if not radius > 0:
        raise InvalidConfigError("ball radius must be positive")
    return KernelSpec("ball", d, [0.0, radius], [1.0, 0.0], STEP, c, params={"radius": radius})


def annulus(d: int, inner: float, outer: float) -> KernelSpec:
    if not 0 <= inner < outer:
        raise InvalidConfigError(f"annulus needs 0 <= inner < outer, got {inner}, {outer}")
    if inner == 0:
        knots, values = [0.0, outer], [1.0, 0.0]
    else:
        knots, values = [0.0, inner, outer], [0.0, 1.0, 0.0]
    return KernelSpec("annulus", d, knots, values, STEP, params={"inner": inner, "outer": outer})


def radial_table(d: int, knots, values, normalization_constant=None, interpolation="linear") -> KernelSpec:
    mode = {"linear": LINEAR, "step": STEP}.get(interpolation)
    if mode is None:
        raise InvalidConfigError(f"interpolation must be 'linear' or 'step', got {interpolation!r}")
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    return KernelSpec("radial-table", d, knots, values, mode, normalization_constant,
                      params={"knots": knots.tolist(), "values": values.tolist(),
                              "interpolation": interpolation})


def load_radial_table(path, d: int, interpolation="linear") -> KernelSpec:
    """Two-column CSV ``radius,value``; a header row is tolerated."""
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    if data.shape[1] != 2:
        raise InvalidConfigError("radial table CSV must have exactly two columns")
    return radial_table(d, data[:, 0], data[:, 1], interpolation=interpolation)


def from_config(cfg: dict) -> KernelSpec:
    """Build from ``{"shape": ..., "parameters": {...}, "d": ...}``."""
    unknown = set(cfg) - {"shape", "parameters", "d"}
    if unknown:
        raise InvalidConfigError(f"unknown kernel keys: {sorted(unknown)}")
    shape = cfg.get("shape", "ball")
    params = dict(cfg.get("parameters") or {})
    d = int(cfg["d"])
    if shape == "ball":
        return ball(d, params.get("radius"))
    if shape == "annulus":
        return annulus(d, params["inner"], params["outer"])
    if shape == "radial-table":
        if "path" in params:
            return load_radial_table(params["path"], d, params.get("interpolation", "linear"))
        return radial_table(d, params["knots"], params["values"], params.get("normalization_constant"),
                            params.get("interpolation", "linear"))
    raise InvalidConfigError(f"unknown kernel shape {shape!r}")


def phi(spec: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.d:
        raise InvalidArgumentError(f"expected {spec.d}-vectors, got trailing dimension {x.shape[-1]}")
    return spec.profile(np.linalg.norm(x, axis=-1))


def edge_probability(spec: KernelSpec, lam: float, r: float, delta) -> np.ndarray:
    """``min(lam * r**-d * phi(delta / r), 1)``."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape[-1] != spec.d:
        raise InvalidArgumentError(f"expected {spec.d}-vectors, got trailing dimension {delta.shape[-1]}")
    t = np.linalg.norm(delta, axis=-1) / r
    return np.minimum(lam * r ** (-spec.d) * spec.profile(t), 1.0)


def _radial_quadrature(spec, n_points, scale=1.0):
    """Gauss-Legendre over each profile segment of ``s -> |S^{d-1}| s^{d-1} scale^-d phi(s/scale)``."""
    segs = len(spec.knots) - 1
    per = max(2, math.ceil(n_points / segs))
    x, w = np.polynomial.legendre.leggauss(per)
    total = 0.0
    for i in range(segs):
        a, b = scale * spec.knots[i], scale * spec.knots[i + 1]
        s = 0.5 * (b - a) * x + 0.5 * (a + b)
        # evaluate at the node; the profile is polynomial on the open segment
        f = spec.normalization_constant * radial_profile(s / scale, spec.knots, spec.values, spec.mode)
        total += 0.5 * (b - a) * np.sum(w * f * s ** (spec.d - 1)) * scale ** (-spec.d)
    return sphere_area(spec.d) * total


def normalization_integral(spec: KernelSpec, quadrature_points: int = 1000, tol: float = 1e-4,
                           r_check: float = 7.3) -> float:
    """Numerical integral of phi over R^d; also checks the rescaled kernel ``r^-d phi(x/r)``."""
    if quadrature_points < 1000:
        raise InvalidArgumentError("quadrature_points must be >= 1000")
    value = _radial_quadrature(spec, quadrature_points)
    rescaled = _radial_quadrature(spec, quadrature_points, scale=r_check)
    for label, v in (("phi", value), (f"r^-d phi(x/r), r={r_check}", rescaled)):
        if abs(v - 1.0) > tol:
            raise NotNormalizedError(f"integral of {label} is {v:.9g}, outside 1 +/- {tol:g}")
    return value


def support_radius(spec: KernelSpec, eps: float = 1e-9) -> float:
    """Radius outside which the phi-mass is at most ``eps``."""
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive")
    full = spec.truncation_radius
    if spec.shape in ("ball", "annulus"):
        return full
    lo, hi = 0.0, full
    if 1.0 - spec.normalization_constant * spec.raw_mass(lo) <= eps:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 1.0 - spec.normalization_constant * spec.raw_mass(mid) <= eps:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * full:
            break
    return hi
