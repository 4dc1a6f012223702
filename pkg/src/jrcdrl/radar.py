"""FMCW radar modes, random road scenes and resolution-limited detection."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import ConfigError, ContractViolation

# speed of light, rounded so the derived ranges come out as round numbers
C0 = 3.0e8

# side of the reference square in which traffic density is quoted (m)
DENSITY_SIDE = 45.0


@dataclass(frozen=True)
class ChirpConfig:
    bandwidth: float  # sweep bandwidth b (Hz)
    slope: float  # frequency slope f_c (Hz/s)
    r_max_override: Optional[float] = None
    f_max: Optional[float] = None  # max IF bandwidth (Hz)

    def __post_init__(self):
        if not (self.bandwidth > 0 and self.slope > 0):
            raise ConfigError(f"chirp needs positive bandwidth and slope, got {self}")


@dataclass(frozen=True)
class RadarMode:
    r_re: float
    r_max: float

    def __post_init__(self):
        if not 0 < self.r_re < self.r_max:
            raise ConfigError(f"need 0 < r_re < r_max, got {self}")


@dataclass(frozen=True)
class SizeDistributions:
    """Normal fits (mean, std) of object footprints in metres."""

    car_length: tuple = (4.62, 0.18)
    car_width: tuple = (1.92, 0.08)
    ped_length: tuple = (0.73, 0.085)
    ped_width: tuple = (0.68, 0.055)
    car_fraction: float = 20 / 27

    def __post_init__(self):
        for name in ("car_length", "car_width", "ped_length", "ped_width"):
            _, std = getattr(self, name)
            if std <= 0:
                raise ConfigError(f"{name} std must be positive")
        if not 0.0 <= self.car_fraction <= 1.0:
            raise ConfigError("car_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SceneObject:
    x: float
    y: float
    radius: float
    kind: str  # "car" | "pedestrian"


@dataclass
class Scene:
    """Objects in the detection square, stored column-wise."""

    positions: np.ndarray  # (n, 2)
    radii: np.ndarray  # (n,)
    is_car: np.ndarray  # (n,) bool

    def __len__(self):
        return len(self.radii)

    def objects(self) -> list[SceneObject]:
        return [
            SceneObject(float(x), float(y), float(r), "car" if c else "pedestrian")
            for (x, y), r, c in zip(self.positions, self.radii, self.is_car)
        ]


def derive_ranges(chirp: ChirpConfig) -> RadarMode:
    """Range resolution and maximum range of a chirp configuration."""
    r_re = C0 / (2.0 * chirp.bandwidth)
    if chirp.r_max_override is not None:
        r_max = chirp.r_max_override
    elif chirp.f_max is not None:
        r_max = C0 * chirp.f_max / (2.0 * chirp.slope)
    else:
        raise ConfigError("chirp needs either r_max_override or f_max")
    return RadarMode(r_re=r_re, r_max=float(r_max))


def expected_object_count(density: float, r_max: float) -> float:
    return density * (r_max / DENSITY_SIDE) ** 2


def scaled_object_count(density: float, r_max: float, rng: np.random.Generator) -> int:
    """Poisson object count whose mean scales the density to the mode's square."""
    if density <= 0:
        raise ContractViolation("traffic density must be positive")
    return int(rng.poisson(expected_object_count(density, r_max)))


def generate_scene(count: int, mode: RadarMode, sizes: SizeDistributions,
                   rng: np.random.Generator) -> Scene:
    if count < 0:
        raise ContractViolation("object count must be non-negative")
    positions = rng.uniform(0.0, mode.r_max, size=(count, 2))
    is_car = rng.random(count) < sizes.car_fraction
    n_car = int(is_car.sum())
    n_ped = count - n_car
    radii = np.empty(count)
    # radius = (length + width) / 4; resample the pair until the radius is positive
    radii[is_car] = _radius(rng, sizes.car_length, sizes.car_width, n_car)
    radii[~is_car] = _radius(rng, sizes.ped_length, sizes.ped_width, n_ped)
    return Scene(positions, radii, is_car)


def _radius(rng, length, width, n):
    r = (rng.normal(*length, size=n) + rng.normal(*width, size=n)) / 4.0
    bad = r <= 0
    while bad.any():
        k = int(bad.sum())
        r[bad] = (rng.normal(*length, size=k) + rng.normal(*width, size=k)) / 4.0
        bad = r <= 0
    return r


_DENSE_LIMIT = 160


@lru_cache(maxsize=_DENSE_LIMIT + 1)
def _upper_pairs(n):
    # same ordering as the condensed output of pdist
    return np.triu_indices(n, 1)


def merge_pairs(positions: np.ndarray, radii: np.ndarray, r_re: float) -> np.ndarray:
    """Index pairs (i < j) whose edge gap is below the range resolution."""
    n = len(radii)
    if n < 2:
        return np.empty((0, 2), dtype=np.intp)
    if n <= _DENSE_LIMIT:
        i, j = _upper_pairs(n)
        close = pdist(positions) - radii[i] - radii[j] < r_re
        return np.stack([i[close], j[close]], axis=1)
    reach = r_re + 2.0 * float(radii.max())
    pairs = cKDTree(positions).query_pairs(reach, output_type="ndarray")
    if len(pairs) == 0:
        return pairs
    i, j = pairs[:, 0], pairs[:, 1]
    gap = np.hypot(*(positions[i] - positions[j]).T) - radii[i] - radii[j]
    return pairs[gap < r_re]


def count_components(n: int, pairs: np.ndarray) -> int:
    """Connected components of an undirected graph given as an edge list."""
    if len(pairs) == 0:
        return n
    i, j = pairs[:, 0], pairs[:, 1]
    # min-label hooking with pointer jumping; labels[k] <= k throughout
    labels = np.arange(n)
    while True:
        li, lj = labels[i], labels[j]
        if np.array_equal(li, lj):
            break
        low = np.minimum(li, lj)
        np.minimum.at(labels, li, low)
        np.minimum.at(labels, lj, low)
        while True:
            jumped = labels[labels]
            if np.array_equal(jumped, labels):
                break
            labels = jumped
    return int(np.count_nonzero(labels == np.arange(n)))


def count_detected(scene: Scene, r_re: float) -> int:
    """Number of distinguishable detections.

    Two objects fall into the same detection when their edge gap (centre
    distance minus both radii) is below ``r_re``; detections are the connected
    components of that relation.
    """
    if r_re <= 0:
        raise ContractViolation("range resolution must be positive")
    n = len(scene)
    if n < 2:
        return n
    return count_components(n, merge_pairs(scene.positions, scene.radii, r_re))


def miss_ratio(scene_count: int, detected: int) -> float:
    if not 0 <= detected <= scene_count:
        raise ContractViolation(f"detected={detected} outside [0, {scene_count}]")
    if scene_count == 0:
        return 0.0
    return (scene_count - detected) / scene_count


def sample_miss_ratio(mode: RadarMode, density: float, sizes: SizeDistributions,
                      rng: np.random.Generator) -> tuple[float, int, int]:
    """Draw one scene for ``mode`` and return (miss ratio, objects, detections)."""
    count = scaled_object_count(density, mode.r_max, rng)
    scene = generate_scene(count, mode, sizes, rng)
    detected = count_detected(scene, mode.r_re)
    return miss_ratio(count, detected), count, detected
