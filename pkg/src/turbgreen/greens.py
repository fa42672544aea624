"""Free-space kernels of the Helmholtz and paraxial wave equations.

All kernels are vectorised over leading axes of their coordinate arguments.
Paraxial coordinates use x as the propagation axis and (y, z) as the
transverse vector rho.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import OrderingError, SingularityError
from .quadrature import Point3, TransversePoint, as_xyz

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class ParaxialCoords:
    x: float
    rho: TransversePoint

    def as_array(self):
        return np.array([self.x, self.rho.y, self.rho.z])

    @classmethod
    def from_xyz(cls, x, y, z):
        return cls(float(x), TransversePoint(y, z))


def as_paraxial(p):
    if isinstance(p, ParaxialCoords):
        return p.as_array()
    return as_xyz(p)


def _distance(a, b):
    d = np.linalg.norm(as_xyz(a) - as_xyz(b), axis=-1)
    if np.any(d == 0):
        raise SingularityError("Green's function evaluated at coincident points")
    return d


def _scalar(v):
    return complex(v) if np.ndim(v) == 0 else v


def g0(r, xi, wave):
    """Outgoing spherical wave ``exp(i k0 |r - xi|) / (4 pi |r - xi|)``."""
    d = _distance(r, xi)
    return _scalar(np.exp(1j * wave.k0 * d) / (FOUR_PI * d))


def g0_radial_derivative(r, xi, wave):
    """d g0 / d|r - xi|, from differentiating the closed form."""
    d = _distance(r, xi)
    return _scalar(np.exp(1j * wave.k0 * d) / (FOUR_PI * d) * (1j * wave.k0 - 1.0 / d))


def radiation_defect(xi, wave, radii, direction=(1.0, 0.0, 0.0)):
    """Sommerfeld defect ``|R (dG/dR - i k0 G)|`` of g0 at each radius ``R``.

    For the exact kernel this is ``1 / (4 pi R)``.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if radii.size > 1 and np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing")
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    xi = as_xyz(xi)
    r = xi + radii[:, None] * u
    G = g0(r, xi, wave)
    dG = g0_radial_derivative(r, xi, wave)
    return np.abs(radii * (dG - 1j * wave.k0 * G))


_STENCIL = np.array([[0, 0, 0],
                     [1, 0, 0], [-1, 0, 0],
                     [0, 1, 0], [0, -1, 0],
                     [0, 0, 1], [0, 0, -1]], dtype=float)


def _check_clearance(probe, h, singular_points):
    for s in singular_points:
        if np.linalg.norm(probe - as_xyz(s)) <= 3 * h:
            raise SingularityError(
                f"probe {probe.tolist()} within 3h of singular point {as_xyz(s).tolist()}")


def helmholtz_residual(field, wave, probe, h, n=None, singular_points=()):
    """Second-order finite-difference residual of ``Lap u + k0^2 n^2 u``.

    Parameters
    ----------
    field : callable
        Vectorised ``(M, 3) -> (M,)`` complex field.
    n : callable, optional
        Vectorised refractive index; ``None`` means n = 1.
    singular_points : sequence
        The probe must be farther than ``3 h`` from each of these.
    """
    probe = as_xyz(probe)
    if not h > 0:
        raise ValueError("step h must be positive")
    _check_clearance(probe, h, singular_points)
    u = np.asarray(field(probe + h * _STENCIL), dtype=complex)
    lap = (u[1:].sum() - 6.0 * u[0]) / (h * h)
    n2 = 1.0 if n is None else float(np.asarray(n(probe[None, :]))[0]) ** 2
    return complex(lap + wave.k0 ** 2 * n2 * u[0])


def paraxial_residual(field, wave, probe, h, singular_points=()):
    """Finite-difference residual of ``2 i k0 dv/dx + Lap_rho v``.

    ``field`` is vectorised over ``(M, 3)`` arrays of (x, y, z).
    """
    probe = as_paraxial(probe)
    if not h > 0:
        raise ValueError("step h must be positive")
    _check_clearance(probe, h, singular_points)
    v = np.asarray(field(probe + h * _STENCIL), dtype=complex)
    dx = (v[1] - v[2]) / (2 * h)
    lap_rho = (v[3] + v[4] + v[5] + v[6] - 4.0 * v[0]) / (h * h)
    return complex(2j * wave.k0 * dx + lap_rho)


def gp(obs, src, wave):
    """Paraxial Green's function ``exp(i k0 |rho - theta|^2 / (2 dx)) / (4 pi dx)``.

    Only forward propagation (``obs.x > src.x``) is defined; backward legs
    are formed by the caller through conjugation.
    """
    o = as_paraxial(obs)
    s = as_paraxial(src)
    dx = o[..., 0] - s[..., 0]
    if np.any(dx <= 0):
        raise OrderingError("paraxial kernel needs obs.x > src.x")
    t2 = np.sum((o[..., 1:] - s[..., 1:]) ** 2, axis=-1)
    return _scalar(np.exp(1j * wave.k0 * t2 / (2.0 * dx)) / (FOUR_PI * dx))


def kernel_K(r, xi, zeta, wave):
    """Rytov ratio kernel ``g0(zeta, xi) g0(r, zeta) / g0(r, xi)``."""
    return _scalar(g0(zeta, xi, wave) * g0(r, zeta, wave) / g0(r, xi, wave))


def kernel_Kprime(obs, src, mid, wave):
    """Paraxial ratio kernel ``gp(mid; src) gp(obs; mid) / gp(obs; src)``."""
    o, s, m = as_paraxial(obs), as_paraxial(src), as_paraxial(mid)
    if np.any(m[..., 0] <= s[..., 0]) or np.any(o[..., 0] <= m[..., 0]):
        raise OrderingError("paraxial ratio kernel needs src.x < mid.x < obs.x")
    return _scalar(gp(m, s, wave) * gp(o, m, wave) / gp(o, s, wave))


__all__ = [
    "ParaxialCoords", "Point3", "TransversePoint", "as_paraxial",
    "g0", "g0_radial_derivative", "radiation_defect", "helmholtz_residual",
    "paraxial_residual", "gp", "kernel_K", "kernel_Kprime",
]
