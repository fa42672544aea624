"""Atmospheric refractive-index physics and white-noise field realizations.

Units are SI except where the optical refractivity formula wants pressure
in millibars and profile heights in kilometres.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import OutOfRangeError
from .quadrature import QuadratureGrid

# 3 C_1 / (2 k_B) in the optical band, K/mbar
REFRACTIVITY_COEFF = 79e-6


@dataclass(frozen=True)
class WaveParams:
    """Monochromatic wave; ``wavelength = inf`` gives the static (k0 = 0) limit."""

    wavelength: float

    def __post_init__(self):
        lam = float(self.wavelength)
        if not lam > 0 or math.isnan(lam):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        object.__setattr__(self, "wavelength", lam)

    @property
    def k0(self):
        return 2.0 * math.pi / self.wavelength

    @classmethod
    def from_wavenumber(cls, k0):
        k0 = float(k0)
        if k0 < 0:
            raise ValueError("wavenumber must be non-negative")
        return cls(math.inf if k0 == 0 else 2.0 * math.pi / k0)


@dataclass(frozen=True)
class AtmosphericState:
    pressure: float  # mbar
    temperature: float  # K
    gamma: float = 1.4

    def __post_init__(self):
        if not self.pressure > 0:
            raise ValueError("pressure must be positive (mbar)")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive (K)")
        if not self.gamma > 1:
            raise ValueError("adiabatic exponent must exceed 1")


def refractivity(state):
    """n - 1 for air at the given pressure and temperature."""
    return REFRACTIVITY_COEFF * state.pressure / state.temperature


def delta_n_from_delta_T(state, dT):
    """Index fluctuation produced by an adiabatic temperature fluctuation ``dT``."""
    return (REFRACTIVITY_COEFF / (state.gamma - 1.0)
            * state.pressure / state.temperature ** 2 * dT)


def cn_from_ct(state, ct):
    """Index structure constant C_n (m^-1/3) from the temperature one C_T."""
    if ct < 0:
        raise ValueError("C_T must be non-negative")
    return REFRACTIVITY_COEFF * state.pressure / state.temperature ** 2 * ct


@dataclass(frozen=True, eq=False)
class CnProfile:
    """C_n(h) table with heights in km; ``heights is None`` means constant C_n."""

    heights: np.ndarray = field(default=None)
    values: np.ndarray = field(default=None)
    constant: float = None
    name: str = ""

    @classmethod
    def from_table(cls, heights_km, cn, name=""):
        h = np.asarray(heights_km, dtype=float)
        c = np.asarray(cn, dtype=float)
        if h.ndim != 1 or h.shape != c.shape or h.size < 2:
            raise ValueError("profile needs matching 1-D height and C_n columns of length >= 2")
        if np.any(h <= 0) or np.any(np.diff(h) <= 0):
            raise ValueError("profile heights must be positive and strictly increasing")
        if np.any(c <= 0):
            raise ValueError("profile C_n values must be positive")
        h.setflags(write=False)
        c.setflags(write=False)
        return cls(heights=h, values=c, name=name)

    @classmethod
    def uniform(cls, cn):
        if not cn >= 0:
            raise ValueError("constant C_n must be non-negative")
        return cls(constant=float(cn), name="constant")

    @property
    def is_constant(self):
        return self.heights is None


# Typical C_n versus height near the ground (km, m^-1/3)
TYPICAL_CN_PROFILE = CnProfile.from_table(
    [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0],
    [30e-8, 20e-8, 15e-8, 10e-8, 6e-8, 4e-8, 1e-8, 1e-8],
    name="typical-ground",
)

NAMED_PROFILES = {"typical-ground": TYPICAL_CN_PROFILE}


def load_cn_profile(path):
    """Read a two-column ``height_km  C_n`` text file (``#`` comments allowed)."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (height_km, Cn)")
    return CnProfile.from_table(data[:, 0], data[:, 1], name=str(path))


def cn_lookup(profile, height_km):
    """C_n at ``height_km``: linear in C_n against log(height), no extrapolation."""
    h = np.asarray(height_km, dtype=float)
    if profile.is_constant:
        return np.full(h.shape, profile.constant) if h.ndim else profile.constant
    lo, hi = profile.heights[0], profile.heights[-1]
    if np.any(h < lo) or np.any(h > hi) or np.any(np.isnan(h)):
        raise OutOfRangeError(f"height {height_km} km outside profile range [{lo}, {hi}] km")
    out = np.interp(np.log(h), np.log(profile.heights), profile.values)
    return float(out) if out.ndim == 0 else out


def _cn2_along_path(profile, z_m):
    if profile.is_constant:
        return np.full_like(z_m, profile.constant ** 2)
    # below the lowest knot the lowest tabulated value is held
    h = np.maximum(z_m / 1000.0, profile.heights[0])
    return cn_lookup(profile, h) ** 2


def rytov_validity(wave, profile, length, nodes=32):
    """Weak-fluctuation criterion ``k0^(7/6) * int_0^L Cn^2(z) z^(5/6) dz``.

    The path coordinate ``z`` (metres) is read as height for tabulated
    profiles.  The first panel uses ``z = z1 t^6`` to remove the endpoint
    singularity of ``z^(5/6)``; remaining panels are split at the table
    knots and integrated by plain Gauss-Legendre.

    Returns
    -------
    value : float
    valid : bool
        ``value < 1``.
    """
    L = float(length)
    if not L > 0:
        raise ValueError("path length must be positive")
    if not profile.is_constant and L > profile.heights[-1] * 1000.0:
        raise OutOfRangeError(
            f"path length {L} m exceeds profile top {profile.heights[-1]} km")
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w

    if profile.is_constant:
        breaks = [0.0, L]
    else:
        knots = profile.heights * 1000.0
        breaks = [0.0] + [k for k in knots if 0.0 < k < L] + [L]

    total = 0.0
    z1 = breaks[1]
    z = z1 * t ** 6
    # dz = 6 z1 t^5 dt and z^(5/6) = z1^(5/6) t^5
    total += np.sum(w * _cn2_along_path(profile, z) * 6.0 * z1 ** (11.0 / 6.0) * t ** 10)
    for a, b in zip(breaks[1:-1], breaks[2:]):
        z = a + (b - a) * t
        total += (b - a) * np.sum(w * _cn2_along_path(profile, z) * z ** (5.0 / 6.0))
    value = float(wave.k0 ** (7.0 / 6.0) * total)
    return value, value < 1.0


@dataclass(frozen=True)
class TurbulenceSpec:
    """White-noise fluctuation model ``E[n1(a) n1(b)] = sigma^2 delta(a - b)``.

    ``sigma`` carries units of m^(3/2).  The field lives on ``grid``.
    """

    delta: float
    sigma: float
    grid: QuadratureGrid
    seed: int = 0

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError("delta must be non-negative")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")

    def strength(self, wave, length=None):
        """Dimensionless ``delta^2 sigma^2 k0^4 L`` (L defaults to the box diagonal)."""
        if length is None:
            length = math.sqrt(sum((hi - lo) ** 2 for lo, hi in self.grid.box))
        return self.delta ** 2 * self.sigma ** 2 * wave.k0 ** 4 * length


@dataclass(frozen=True, eq=False)
class RefractiveFieldRealization:
    grid: QuadratureGrid
    values: np.ndarray = field(repr=False)
    seed: int
    index: int


def sample_field(spec, realization_index):
    """Draw n1 per cell as independent Normal(0, sigma^2 / V_cell)."""
    grid = spec.grid
    if spec.sigma == 0:
        values = np.zeros(grid.n_nodes)
    else:
        z = rng.normals(spec.seed, realization_index, grid.n_nodes)
        values = spec.sigma / np.sqrt(grid.weights) * z
    values.setflags(write=False)
    return RefractiveFieldRealization(grid, values, spec.seed, int(realization_index))
