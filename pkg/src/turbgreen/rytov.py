"""First-order Rytov perturbations and turbulent Green's functions.

A realization enters every formula through node sums ``sum_c n1_c w_c f(c)``
on its quadrature grid.  Nodes within the grid's exclusion radius of a
kernel singularity are dropped, and the same dropped set is used by the
analytic ensemble means, so discrete means and Monte Carlo estimates target
exactly the same quantity.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, OrderingError, SingularityError
from .greens import ParaxialCoords, as_paraxial, g0, gp
from .quadrature import as_xyz, retained_mask

CONVENTIONS = ("gaussian", "paper")


def moment_coefficient(convention, paper_coefficient):
    """Exponent coefficient of a Gaussian mean under the chosen convention.

    ``paper`` keeps the doubled coefficient.  ``gaussian`` applies
    E[exp(X)] = exp(E[X^2] / 2) for centred Gaussian X, which halves it.
    """
    if convention == "paper":
        return float(paper_coefficient)
    if convention == "gaussian":
        return 0.5 * paper_coefficient
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


BACKGROUNDS = ("plane_wave", "beam_wave", "point_source")


@dataclass(frozen=True)
class BackgroundField:
    """Unperturbed field u0 along +x.

    ``alpha`` (1/m) is the beam parameter of ``beam_wave``; ``source`` is the
    emitter of ``point_source``.
    """

    kind: str
    wave: object
    alpha: float = None
    source: tuple = None

    def __post_init__(self):
        if self.kind not in BACKGROUNDS:
            raise ConfigError(f"unknown background {self.kind!r}; expected one of {BACKGROUNDS}")
        if self.kind == "beam_wave" and not (self.alpha is not None and self.alpha > 0):
            raise ConfigError("beam_wave background needs alpha > 0")
        if self.kind == "point_source":
            if self.source is None:
                raise ConfigError("point_source background needs a source point")
            object.__setattr__(self, "source", tuple(float(c) for c in as_xyz(self.source)))

    def u0(self, points):
        """Full Helmholtz background at ``(M, 3)`` points."""
        p = as_xyz(points)
        k = self.wave.k0
        if self.kind == "plane_wave":
            return np.exp(1j * k * p[..., 0])
        if self.kind == "beam_wave":
            return beam_field(p, self.alpha, self.wave)
        return g0(p, self.source, self.wave)

    def v0(self, points):
        """Paraxial envelope ``u0 exp(-i k0 x)``."""
        p = as_paraxial(points)
        if self.kind == "plane_wave":
            return np.ones(p.shape[:-1], dtype=complex)
        if self.kind == "beam_wave":
            return beam_envelope(p, self.alpha, self.wave)
        return gp(p, self.source, self.wave)


class LogPerturbation(NamedTuple):
    point: tuple
    value: complex
    excluded_volume: float
    nodes: int


class TurbulentGreens(NamedTuple):
    source: tuple
    observation: tuple
    value: complex
    free: complex
    exponent: complex
    delta: float
    realization: int


def beam_envelope(obs, alpha, wave):
    """Gaussian-beam envelope ``exp(-alpha k0 rho^2 / (2 q)) / q``, ``q = 1 + i alpha x``."""
    p = as_paraxial(obs)
    q = 1.0 + 1j * alpha * p[..., 0]
    rho2 = p[..., 1] ** 2 + p[..., 2] ** 2
    v = np.exp(-alpha * wave.k0 * rho2 / (2.0 * q)) / q
    return complex(v) if np.ndim(v) == 0 else v


def beam_field(obs, alpha, wave):
    """Gaussian beam ``u0 = exp(i k0 x) v0`` with waist profile ``exp(-alpha k0 rho^2 / 2)``."""
    if not alpha > 0:
        raise ValueError("beam parameter alpha must be positive")
    p = as_paraxial(obs)
    u = np.exp(1j * wave.k0 * p[..., 0]) * beam_envelope(p, alpha, wave)
    return complex(u) if np.ndim(u) == 0 else u


def _point_tuple(p):
    return tuple(float(c) for c in as_paraxial(p))


def phi1_full(r, background, field):
    """First Rytov log-perturbation with the spherical Green's function.

    ``Phi1(r) = k0^2 / (2 pi u0(r)) * sum_c u0(c) n1_c w_c exp(i k0 d) / d``
    with ``d = |r - c|``; nodes within the exclusion radius of ``r`` are
    skipped.
    """
    grid = field.grid
    wave = background.wave
    r = as_xyz(r)
    u0r = complex(background.u0(r[None, :])[0])
    if u0r == 0:
        raise SingularityError("background field vanishes at the evaluation point")
    keep = retained_mask(grid, [r])
    nodes = grid.nodes[keep]
    d = np.linalg.norm(nodes - r, axis=1)
    integrand = background.u0(nodes) * field.values[keep] * np.exp(1j * wave.k0 * d) / d
    value = wave.k0 ** 2 / (2.0 * np.pi * u0r) * np.dot(grid.weights[keep], integrand)
    return LogPerturbation(_point_tuple(r), complex(value),
                           float(grid.weights[~keep].sum()), int(keep.sum()))


def _require_upstream(grid, obs_x, src_x=None):
    (xlo, xhi) = grid.box[0]
    if xhi > obs_x:
        raise OrderingError(
            f"field cells extend to x = {xhi}, at or beyond the observation plane x = {obs_x}")
    if src_x is not None and xlo < src_x:
        raise OrderingError(
            f"field cells start at x = {xlo}, upstream of the source plane x = {src_x}")


def phi1_parabolic(obs, background, field):
    """First Rytov log-perturbation of the paraxial equation.

    ``Phi1 = 2 k0^2 / v0(obs) * sum_c v0(c) n1_c w_c gp(obs; c)``.  All field
    cells must lie upstream of ``obs``.
    """
    grid = field.grid
    wave = background.wave
    o = as_paraxial(obs)
    _require_upstream(grid, o[0])
    v0o = complex(background.v0(o[None, :])[0])
    if v0o == 0:
        raise SingularityError("background envelope vanishes at the evaluation point")
    nodes = grid.nodes
    integrand = background.v0(nodes) * field.values * gp(o, nodes, wave)
    value = 2.0 * wave.k0 ** 2 / v0o * np.dot(grid.weights, integrand)
    return LogPerturbation(_point_tuple(o), complex(value), 0.0, grid.n_nodes)


def k_weights(r, xi, grid, wave):
    """Per-node ``w_c K(r, xi, c)``, zero on nodes excluded around ``r`` and ``xi``."""
    r = as_xyz(r)
    xi = as_xyz(xi)
    if np.array_equal(r, xi):
        raise SingularityError("turbulent Green's function at coincident points")
    keep = retained_mask(grid, [r, xi])
    out = np.zeros(grid.n_nodes, dtype=complex)
    nodes = grid.nodes[keep]
    K = g0(nodes, xi, wave) * g0(r, nodes, wave) / g0(r, xi, wave)
    out[keep] = grid.weights[keep] * K
    return out


def kprime_weights(obs, src, grid, wave):
    """Per-node ``w_c K'(obs, src, c)`` for a slab strictly between the planes."""
    o = as_paraxial(obs)
    s = as_paraxial(src)
    _require_upstream(grid, o[0], s[0])
    nodes = grid.nodes
    K = gp(nodes, s, wave) * gp(o, nodes, wave) / gp(o, s, wave)
    return grid.weights * K


def turbulent_green(r, xi, delta, field, wave):
    """Rytov Green's function ``g0(r, xi) exp(delta * 2 k0^2 sum n1 w K)``."""
    a = k_weights(r, xi, field.grid, wave)
    exponent = 2.0 * wave.k0 ** 2 * np.dot(field.values, a)
    free = g0(r, xi, wave)
    value = free * np.exp(delta * exponent)
    return TurbulentGreens(_point_tuple(r), _point_tuple(xi), complex(value), complex(free),
                           complex(exponent), float(delta), field.index)


def parabolic_turbulent_green(obs, src, delta, field, wave):
    """Paraxial Rytov Green's function ``gp exp(delta * 2 k0^2 sum n1 w K')``."""
    a = kprime_weights(obs, src, field.grid, wave)
    exponent = 2.0 * wave.k0 ** 2 * np.dot(field.values, a)
    free = gp(obs, src, wave)
    value = free * np.exp(delta * exponent)
    return TurbulentGreens(_point_tuple(obs), _point_tuple(src), complex(value), complex(free),
                           complex(exponent), float(delta), field.index)


def k_squared_integral(r, xi, grid, wave):
    """Discrete ``int K(r, xi, zeta)^2 d zeta`` on the retained nodes."""
    a = k_weights(r, xi, grid, wave)
    return complex(np.sum(a ** 2 / grid.weights))


def mean_turbulent_green(r, xi, spec, wave, convention="gaussian"):
    """White-noise ensemble mean ``g0 exp(c delta^2 sigma^2 k0^4 int K^2)``.

    ``c`` is 4 under ``convention="paper"`` and 2 under ``"gaussian"``.
    """
    c = moment_coefficient(convention, 4.0)
    free = g0(r, xi, wave)
    if spec.delta == 0 or spec.sigma == 0:
        return complex(free)
    s = k_squared_integral(r, xi, spec.grid, wave)
    return complex(free * np.exp(c * spec.delta ** 2 * spec.sigma ** 2 * wave.k0 ** 4 * s))


class GreensTable:
    """Turbulent Green's functions for fixed point pairs, reused across realizations.

    The per-node kernel weights are computed once; evaluating a realization
    is then one matrix-vector product.  Values agree with ``turbulent_green``
    to rounding.
    """

    def __init__(self, pairs, grid, wave):
        self.pairs = [(as_xyz(a), as_xyz(b)) for a, b in pairs]
        self.grid = grid
        self.wave = wave
        self.free = np.array([g0(a, b, wave) for a, b in self.pairs], dtype=complex)
        if self.pairs:
            self.weights = np.stack([k_weights(a, b, grid, wave) for a, b in self.pairs])
        else:
            self.weights = np.zeros((0, grid.n_nodes), dtype=complex)

    def exponents(self, field):
        if field.grid != self.grid:
            raise ValueError("realization lives on a different grid")
        return 2.0 * self.wave.k0 ** 2 * (self.weights @ field.values)

    def values(self, field, delta):
        return self.free * np.exp(delta * self.exponents(field))

    def k_squared(self):
        """``int K^2`` per pair on the retained nodes."""
        return (self.weights ** 2 / self.grid.weights).sum(axis=1)


def reciprocity_defect(G, pairs):
    """Largest ``|G(a, b) - G(b, a)| / |G(a, b)|`` over the given pairs.

    ``G`` maps two points to a complex value (or a ``TurbulentGreens``).
    """
    worst = 0.0
    for a, b in pairs:
        gab, gba = G(a, b), G(b, a)
        gab = getattr(gab, "value", gab)
        gba = getattr(gba, "value", gba)
        worst = max(worst, abs(gab - gba) / abs(gab))
    return worst


def frozen_green(delta, field, wave):
    """Evaluator ``(a, b) -> G(a, b)`` for one frozen realization."""
    def G(a, b):
        return turbulent_green(a, b, delta, field, wave).value
    return G


def free_green(wave):
    def G(a, b):
        return g0(a, b, wave)
    return G


__all__ = [
    "BackgroundField", "LogPerturbation", "TurbulentGreens", "ParaxialCoords",
    "beam_envelope", "beam_field", "phi1_full", "phi1_parabolic", "turbulent_green",
    "parabolic_turbulent_green", "mean_turbulent_green", "k_weights", "kprime_weights",
    "k_squared_integral", "GreensTable", "reciprocity_defect", "frozen_green", "free_green",
    "moment_coefficient", "CONVENTIONS",
]
