"""Geometry primitives, tensor quadrature grids and Monte Carlo averaging.

Volume integrals with integrable point singularities (1/r-type kernels) are
handled by dropping every node that lies within ``exclusion_radius`` of a
singular point.  The default radius is one cell diagonal; the resulting bias
is O(h^2) for 1/r kernels and is reported, not corrected.

Node ordering is C-order over the (x, y, z) axes, so the cell with axis
indices (i, j, k) has flat index ``(i * ny + j) * nz + k``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NumericalError

RULES = ("midpoint", "gauss-legendre")


@dataclass(frozen=True)
class Point3:
    """Position in metres."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"Point3.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    def as_array(self):
        return np.array([self.x, self.y, self.z])

    def distance(self, other):
        return float(np.linalg.norm(self.as_array() - as_xyz(other)))


@dataclass(frozen=True)
class TransversePoint:
    """Transverse position (y, z) with x the propagation axis."""

    y: float
    z: float

    def __post_init__(self):
        for name in ("y", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"TransversePoint.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)


def as_xyz(p):
    """Coerce a Point3 or array-like into a float array with trailing axis 3."""
    if isinstance(p, Point3):
        return p.as_array()
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"expected coordinates with trailing dimension 3, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    box: tuple
    counts: tuple
    rule: str
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    exclusion_radius: float

    @property
    def n_nodes(self):
        return self.weights.size

    @property
    def volume(self):
        return float(np.prod([hi - lo for lo, hi in self.box]))

    @property
    def cell_shape(self):
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.box, self.counts))

    @property
    def cell_diagonal(self):
        return float(np.sqrt(sum(h * h for h in self.cell_shape)))

    def __eq__(self, other):
        if not isinstance(other, QuadratureGrid):
            return NotImplemented
        return (self.box == other.box and self.counts == other.counts
                and self.rule == other.rule
                and self.exclusion_radius == other.exclusion_radius)

    def __hash__(self):
        return hash((self.box, self.counts, self.rule, self.exclusion_radius))


def _axis_rule(lo, hi, n, rule):
    if rule == "midpoint":
        h = (hi - lo) / n
        return lo + h * (np.arange(n) + 0.5), np.full(n, h)
    t, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


def build_grid(box, counts, rule="midpoint", exclusion_radius=None):
    """Tensor-product quadrature over an axis-aligned box.

    Parameters
    ----------
    box : sequence of three (lo, hi) pairs, metres
    counts : three positive integers, nodes per axis
    rule : ``"midpoint"`` or ``"gauss-legendre"``
    exclusion_radius : float, optional
        Radius of the ball dropped around singular points.  Defaults to the
        cell diagonal ``sqrt(sum((L_i / n_i)^2))``.
    """
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    counts = tuple(int(n) for n in counts)
    if len(box) != 3 or len(counts) != 3:
        raise ValueError("box and counts must both have three entries")
    for (lo, hi) in box:
        if not (math.isfinite(lo) and math.isfinite(hi)) or not hi > lo:
            raise ValueError(f"interval ({lo}, {hi}) must have positive length")
    for n in counts:
        if n < 1:
            raise ValueError(f"node counts must be >= 1, got {counts}")
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")

    axes = [_axis_rule(lo, hi, n, rule) for (lo, hi), n in zip(box, counts)]
    X, Y, Z = np.meshgrid(*(a[0] for a in axes), indexing="ij")
    WX, WY, WZ = np.meshgrid(*(a[1] for a in axes), indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    weights = (WX * WY * WZ).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)

    volume = float(np.prod([hi - lo for lo, hi in box]))
    if abs(weights.sum() - volume) > 1e-12 * volume or np.any(weights <= 0):
        raise NumericalError("quadrature weights do not reproduce the box volume")

    diag = float(np.sqrt(sum(((hi - lo) / n) ** 2 for (lo, hi), n in zip(box, counts))))
    if exclusion_radius is None:
        exclusion_radius = diag
    exclusion_radius = float(exclusion_radius)
    if exclusion_radius < 0:
        raise ValueError("exclusion_radius must be non-negative")
    return QuadratureGrid(box, counts, rule, nodes, weights, exclusion_radius)


def retained_mask(grid, singular_points=()):
    """Boolean mask of nodes farther than the exclusion radius from every singular point."""
    keep = np.ones(grid.n_nodes, dtype=bool)
    for s in singular_points:
        d = np.linalg.norm(grid.nodes - as_xyz(s), axis=1)
        keep &= d > grid.exclusion_radius
    return keep


class Integral(NamedTuple):
    value: complex
    excluded_volume: float
    retained: int


def integrate(grid, f, singular_points=()):
    """Weighted node sum of ``f`` skipping nodes near ``singular_points``.

    ``f`` is vectorised: it receives an ``(M, 3)`` array of retained nodes
    and returns ``M`` values.
    """
    keep = retained_mask(grid, singular_points)
    pts = grid.nodes[keep]
    vals = np.asarray(f(pts))
    if vals.shape != (pts.shape[0],):
        raise ValueError(f"integrand returned shape {vals.shape}, expected ({pts.shape[0]},)")
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NumericalError(f"integrand not finite at retained node {pts[bad].tolist()}")
    w = grid.weights[keep]
    value = complex(np.dot(w, vals))
    excluded = float(grid.weights[~keep].sum())
    return Integral(value, excluded, int(keep.sum()))


@dataclass(frozen=True)
class MonteCarloSpec:
    n_samples: int
    seed: int = 0

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ValueError("n_samples must be >= 1")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "n_samples", int(self.n_samples))
        object.__setattr__(self, "seed", int(self.seed))


def _chunks(n, size):
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def mc_mean(spec, sampler, statistic, standard_error=True, workers=1):
    """Ensemble mean of ``statistic(sampler(seed, i))`` for ``i < N``.

    Statistics may be complex scalars or arrays of a fixed shape.  The
    standard error is the sample standard deviation over ``sqrt(N)``, taken
    separately for the real and imaginary parts and reported as the larger.
    Samples are stored by index before reduction, so the result does not
    depend on ``workers``.
    """
    n = spec.n_samples
    if standard_error and n < 2:
        raise ValueError("a standard error needs at least two samples")

    def run(indices):
        return [np.asarray(statistic(sampler(spec.seed, i)), dtype=complex) for i in indices]

    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, _chunks(n, max(1, n // (4 * workers)))))
        values = [v for part in parts for v in part]
    else:
        values = run(range(n))
    data = np.stack(values)
    mean = data.mean(axis=0)
    if not standard_error:
        return mean, None
    # shifting by the first sample makes a constant statistic give exactly zero
    dev = data - data[0]
    se_re = dev.real.std(axis=0, ddof=1) / np.sqrt(n)
    se_im = dev.imag.std(axis=0, ddof=1) / np.sqrt(n)
    se = np.maximum(se_re, se_im)
    if mean.ndim == 0:
        return complex(mean), float(se)
    return mean, se
