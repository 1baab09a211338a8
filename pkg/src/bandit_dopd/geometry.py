"""Decision sets with closed-form projections, and sphere/ball sampling.

Only origin-symmetric boxes and centered balls are supported. Both contain the
ball of radius :func:`inner_radius` and are contained in the ball of radius
:func:`outer_radius`, and both project exactly onto any scaled copy ``s * X``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from bandit_dopd.exceptions import ParameterError

#: Absolute slack used by membership tests.
MEMBERSHIP_TOL = 1e-12


def _check_shrink(shrink: float) -> float:
    shrink = float(shrink)
    if not (0.0 < shrink <= 1.0):
        raise ParameterError(f"shrink factor must lie in (0, 1], got {shrink!r}")
    return shrink


@dataclass(frozen=True)
class Box:
    """The cube ``[-half_width, half_width]^dim``."""

    half_width: float
    dim: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ParameterError(f"half_width must be positive, got {self.half_width!r}")
        if int(self.dim) < 1:
            raise ParameterError(f"dim must be >= 1, got {self.dim!r}")

    @property
    def inner_radius(self) -> float:
        return float(self.half_width)

    @property
    def outer_radius(self) -> float:
        return float(self.half_width) * float(np.sqrt(self.dim))

    def project(self, point, shrink: float = 1.0) -> np.ndarray:
        s = _check_shrink(shrink) * self.half_width
        return np.clip(np.asarray(point, dtype=float), -s, s)

    def contains(self, point, shrink: float = 1.0, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        s = _check_shrink(shrink) * self.half_width
        return np.all(np.abs(np.asarray(point, dtype=float)) <= s + tol, axis=-1)

    def sample(self, rng: np.random.Generator, shrink: float = 1.0, size=None) -> np.ndarray:
        """Uniform sample from ``shrink * X``."""
        s = _check_shrink(shrink) * self.half_width
        shape = (self.dim,) if size is None else (*np.atleast_1d(size), self.dim)
        return rng.uniform(-s, s, size=shape)

    def sample_extreme(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Uniform sample from the vertices ``{-h, h}^dim``."""
        shape = (self.dim,) if size is None else (*np.atleast_1d(size), self.dim)
        return self.half_width * rng.choice((-1.0, 1.0), size=shape)

    def bounds(self, shrink: float = 1.0) -> list[tuple[float, float]]:
        s = _check_shrink(shrink) * self.half_width
        return [(-s, s)] * self.dim


@dataclass(frozen=True)
class Ball:
    """The Euclidean ball of the given radius centered at the origin."""

    radius: float
    dim: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"radius must be positive, got {self.radius!r}")
        if int(self.dim) < 1:
            raise ParameterError(f"dim must be >= 1, got {self.dim!r}")

    @property
    def inner_radius(self) -> float:
        return float(self.radius)

    @property
    def outer_radius(self) -> float:
        return float(self.radius)

    def project(self, point, shrink: float = 1.0) -> np.ndarray:
        s = _check_shrink(shrink) * self.radius
        point = np.asarray(point, dtype=float)
        norm = np.linalg.norm(point, axis=-1, keepdims=True)
        # Points already inside are returned untouched so projection is idempotent.
        scale = np.where(norm > s, s / np.where(norm > 0, norm, 1.0), 1.0)
        out = point * scale
        # Rounding can leave the rescaled point a few ulps outside; step the
        # scale down until it fits so a second projection is a no-op.
        for _ in range(8):
            over = np.linalg.norm(out, axis=-1, keepdims=True) > s
            if not np.any(over):
                break
            scale = np.where(over, np.nextafter(scale, 0.0), scale)
            out = point * scale
        return out

    def contains(self, point, shrink: float = 1.0, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        s = _check_shrink(shrink) * self.radius
        return np.linalg.norm(np.asarray(point, dtype=float), axis=-1) <= s + tol

    def sample(self, rng: np.random.Generator, shrink: float = 1.0, size=None) -> np.ndarray:
        """Uniform sample from ``shrink * X``."""
        s = _check_shrink(shrink) * self.radius
        return s * sample_unit_ball(rng, self.dim, size)

    def sample_extreme(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Uniform sample from the boundary sphere."""
        return self.radius * sample_unit_sphere(rng, self.dim, size)


FeasibleSet = Union[Box, Ball]


def inner_radius(fset: FeasibleSet) -> float:
    """Radius of the largest centered ball contained in ``fset``."""
    return fset.inner_radius


def outer_radius(fset: FeasibleSet) -> float:
    """Radius of the smallest centered ball containing ``fset``."""
    return fset.outer_radius


def project(fset: FeasibleSet, shrink: float, point) -> np.ndarray:
    """Euclidean projection of ``point`` (or of each row) onto ``shrink * fset``."""
    return fset.project(point, shrink)


def sample_unit_sphere(rng: np.random.Generator, p: int, size=None) -> np.ndarray:
    """Uniform direction(s) on the unit sphere in R^p, via normalized Gaussians."""
    shape = (p,) if size is None else (*np.atleast_1d(size), p)
    g = rng.standard_normal(shape)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    # A zero Gaussian draw has probability zero; redraw rather than divide by it.
    while np.any(norm == 0):
        bad = (norm == 0)[..., 0]
        g[bad] = rng.standard_normal((int(bad.sum()), p))
        norm = np.linalg.norm(g, axis=-1, keepdims=True)
    return g / norm


def sample_unit_ball(rng: np.random.Generator, p: int, size=None) -> np.ndarray:
    """Uniform point(s) in the unit ball: a sphere direction scaled by U^(1/p)."""
    u = sample_unit_sphere(rng, p, size)
    radius = rng.uniform(size=u.shape[:-1] + (1,)) ** (1.0 / p)
    return u * radius
