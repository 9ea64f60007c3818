"""Point sets in axis-aligned windows: Poisson, lattice and jittered lattice."""

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigError
from .rng import Stream, as_stream

TORUS = "torus"
FREE = "free"


@dataclass(frozen=True)
class Window:
    """Box ``origin + [0, sides)`` with torus or free boundary."""

    sides: tuple
    boundary: str = TORUS
    origin: tuple = None

    def __post_init__(self):
        sides = tuple(float(s) for s in np.atleast_1d(self.sides))
        if not sides:
            raise InvalidConfigError("window needs at least one side")
        if not all(math.isfinite(s) and s > 0 for s in sides):
            raise InvalidConfigError(f"window sides must be finite and positive, got {sides}")
        if self.boundary not in (TORUS, FREE):
            raise InvalidConfigError(f"boundary must be 'torus' or 'free', got {self.boundary!r}")
        origin = (0.0,) * len(sides) if self.origin is None else tuple(float(o) for o in np.atleast_1d(self.origin))
        if len(origin) != len(sides) or not all(math.isfinite(o) for o in origin):
            raise InvalidConfigError("origin must be finite with one entry per side")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def cube(cls, side, d, boundary=TORUS):
        return cls((side,) * d, boundary)

    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.sides)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lower) & (pts < self.upper), axis=1)

    def contains_box(self, box: "Window") -> bool:
        eps = 1e-12 * max(self.sides)
        return bool(np.all(box.lower >= self.lower - eps) and np.all(box.upper <= self.upper + eps))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Immutable realisation of the vertex set inside a window.

    Ids are positions in generation order; all per-edge randomness is keyed on
    them, so the points of a sub-box keep their ids.
    """

    points: np.ndarray
    window: Window
    provenance: str
    seed: int = 0
    intensity: float = None
    jitter: float = None
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64).reshape(-1, self.window.d))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        ids = np.arange(len(pts), dtype=np.int64) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        ids.setflags(write=False)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.points)

    @property
    def d(self) -> int:
        return self.window.d

    def subset(self, mask) -> "PointCloud":
        return PointCloud(self.points[mask], self.window, self.provenance, self.seed,
                          self.intensity, self.jitter, self.ids[mask])

    def restrict(self, box: Window) -> "PointCloud":
        """Points inside ``box``; ids and ambient window are kept."""
        return self.subset(box.contains(self.points) if len(self) else np.zeros(0, bool))

    def metadata(self) -> dict:
        meta = {
            "d": self.d,
            "sides": list(self.window.sides),
            "origin": list(self.window.origin),
            "boundary": self.window.boundary,
            "provenance": self.provenance,
            "seed": int(self.seed),
            "n": len(self),
        }
        if self.intensity is not None:
            meta["intensity"] = self.intensity
        if self.jitter is not None:
            meta["jitter_bound"] = self.jitter
        return meta


def _check_d(window):
    if window.d < 2:
        warnings.warn("d < 2 is outside the model's hypotheses (d >= 2); allowed for testing",
                      stacklevel=3)


def sample_poisson(window: Window, intensity: float, stream) -> PointCloud:
    """Homogeneous Poisson process of the given intensity in ``window``."""
    intensity = float(intensity)
    if not math.isfinite(intensity) or intensity < 0:
        raise InvalidConfigError(f"intensity must be finite and >= 0, got {intensity}")
    _check_d(window)
    stream = as_stream(stream)
    gen = stream.generator()
    n = int(gen.poisson(intensity * window.volume))
    pts = window.lower + gen.random((n, window.d)) * np.asarray(window.sides)
    # floating round-up can land exactly on the upper face
    pts = np.minimum(pts, np.nextafter(window.upper, -np.inf))
    return PointCloud(pts, window, "poisson", stream.key, intensity=intensity)


def _lattice_array(window):
    axes = [np.arange(math.ceil(lo), math.ceil(hi), dtype=np.float64)
            for lo, hi in zip(window.lower, window.upper)]
    if any(len(a) == 0 for a in axes):
        return np.zeros((0, window.d))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def lattice_points(window: Window) -> PointCloud:
    """Integer vectors inside the window, lexicographic order."""
    return PointCloud(_lattice_array(window), window, "lattice")


def jittered_lattice(window: Window, jitter_bound: float, stream) -> PointCloud:
    """Lattice points displaced by iid uniform vectors in ``[-b, b]^d``, wrapped on the torus."""
    jitter_bound = float(jitter_bound)
    if not math.isfinite(jitter_bound) or jitter_bound < 0:
        raise InvalidConfigError(f"jitter_bound must be finite and >= 0, got {jitter_bound}")
    if window.boundary != TORUS:
        raise InvalidConfigError("jittered lattice requires a torus window")
    stream = as_stream(stream)
    base = _lattice_array(window)
    if jitter_bound == 0:
        pts = base
    else:
        gen = stream.generator()
        pts = base + gen.uniform(-jitter_bound, jitter_bound, size=base.shape)
        pts = window.lower + np.mod(pts - window.lower, np.asarray(window.sides))
        pts = np.minimum(pts, np.nextafter(window.upper, -np.inf))
    return PointCloud(pts, window, "jittered", stream.key, jitter=jitter_bound)


def min_image(delta, sides):
    """Wrap displacements componentwise into ``(-side/2, side/2]``."""
    sides = np.asarray(sides, dtype=float)
    return delta - sides * np.ceil(delta / sides - 0.5)


def displacement(p, q, window: Window) -> np.ndarray:
    """Vector from ``p`` to ``q``; minimal image on a torus."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != window.d or q.shape[-1] != window.d:
        raise InvalidArgumentError(
            f"dimension mismatch: points have {p.shape[-1]}/{q.shape[-1]} coords, window d={window.d}")
    delta = q - p
    if window.boundary == TORUS:
        delta = min_image(delta, window.sides)
    return delta


def empirical_density(cloud: PointCloud, region: Window) -> float:
    if region.d != cloud.d:
        raise InvalidArgumentError("region dimension differs from cloud dimension")
    if region.volume <= 0:
        raise InvalidArgumentError("region has zero volume")
    if len(cloud) == 0:
        return 0.0
    return int(region.contains(cloud.points).sum()) / region.volume


def save_cloud(cloud: PointCloud, path) -> None:
    """Write ``id,x0,..`` CSV plus a ``.json`` metadata sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [f"x{k}" for k in range(cloud.d)])
        for i, row in zip(cloud.ids, cloud.points):
            w.writerow([int(i)] + [repr(float(x)) for x in row])
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(cloud.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_cloud(path) -> PointCloud:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        meta = json.load(fh)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = meta["d"]
    if data.size == 0:
        data = np.zeros((0, d + 1))
    window = Window(tuple(meta["sides"]), meta["boundary"], tuple(meta["origin"]))
    return PointCloud(data[:, 1:], window, meta["provenance"], meta.get("seed", 0),
                      meta.get("intensity"), meta.get("jitter_bound"), data[:, 0].astype(np.int64))
