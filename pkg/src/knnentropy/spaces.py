"""Metric measure spaces with exact ball volumes: Euclidean R^D and the flat torus.

Both spaces satisfy mu(B(x, r)) = c_D r^D exactly for r <= rho. The geodesic
sphere is deliberately absent since its ball areas are not a power of r.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
FLAT_TORUS = "flat_torus"
KINDS = (EUCLIDEAN, FLAT_TORUS)


class DimensionMismatch(ValueError):
    pass


class BallVolumeWarning(UserWarning):
    """Raised (as a warning) when r exceeds the radius where c_D r^D is exact."""


def unit_ball_volume(D):
    """Lebesgue volume of the unit Euclidean ball in R^D."""
    # c_D = c_{D-2} 2 pi / D keeps c_1 = 2 and c_2 = pi exact
    c = 2.0 if D % 2 else 1.0
    for d in range(2 + D % 2, D + 1, 2):
        c *= 2.0 * math.pi / d
    return c


@dataclass(frozen=True)
class MetricSpaceSpec:
    kind: str
    D: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}; expected one of {KINDS}")
        if int(self.D) != self.D or self.D < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.D!r}")

    @property
    def c_D(self):
        return unit_ball_volume(self.D)

    @property
    def rho(self):
        return math.inf if self.kind == EUCLIDEAN else 0.5

    @property
    def is_torus(self):
        return self.kind == FLAT_TORUS


def euclidean(D):
    return MetricSpaceSpec(EUCLIDEAN, D)


def flat_torus(D):
    return MetricSpaceSpec(FLAT_TORUS, D)


def normalize(space, coords):
    """Return coords as a float array of shape (..., D), wrapped into [0, 1) on the torus."""
    arr = np.asarray(coords, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != space.D:
        if space.D == 1 and arr.ndim == 1:
            arr = arr[:, None]
        else:
            raise DimensionMismatch(
                f"expected trailing dimension {space.D}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    if space.is_torus:
        arr = np.mod(arr, 1.0)
        # mod of tiny negatives rounds up to exactly 1.0
        arr[arr >= 1.0] = 0.0
    return arr


def distances_to(space, points, x):
    """Distances from every row of ``points`` (shape (..., D)) to ``x`` (shape (D,) or broadcastable).

    This is the single arithmetic path for all distance computations in the
    package, so results from different search backends agree bitwise.
    """
    diff = np.asarray(points, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    if space.is_torus:
        diff = np.abs(diff)
        diff = np.minimum(diff, 1.0 - diff)
    acc = diff[..., 0] * diff[..., 0]
    for j in range(1, diff.shape[-1]):
        acc = acc + diff[..., j] * diff[..., j]
    return np.sqrt(acc)


def distance(space, a, b):
    """Metric distance between two points of ``space``."""
    a = normalize(space, np.reshape(np.asarray(a, dtype=np.float64), -1))
    b = normalize(space, np.reshape(np.asarray(b, dtype=np.float64), -1))
    if a.shape != (1, space.D) and a.shape != (space.D,):
        raise DimensionMismatch(f"point has shape {a.shape}, space dimension is {space.D}")
    if a.shape != b.shape:
        raise DimensionMismatch(f"points have shapes {a.shape} and {b.shape}")
    return float(distances_to(space, a.reshape(1, space.D), b.reshape(space.D))[0])


def ball_volume(space, r):
    """Base-measure volume c_D r^D of a ball; warns when r > rho."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r > space.rho:
        warnings.warn(f"r={r} exceeds rho={space.rho}; c_D r^D is not the exact ball volume",
                      BallVolumeWarning, stacklevel=2)
    return space.c_D * r ** space.D


def product_space(a, b):
    """Product of two spaces of the same kind, with Euclidean combining of coordinates."""
    if a.kind != b.kind:
        raise ValueError(f"cannot form a product of {a.kind} and {b.kind}")
    return MetricSpaceSpec(a.kind, a.D + b.D)
