"""Energy-concentration eigenproblems for a circular pupil.

The pupil lies in the plane x = 0 and the image disk in the plane x = z,
both centred on the axis.  Transverse coordinates are (y, z) pairs.

The mean pupil-to-image kernel is ``H(x, xi) = G(x, xi) exp(c s^2 S(x, xi))``
with ``s^2 = delta^2 sigma^2 k0^4`` and ``S = int K^2`` over a slab grid
between the planes.  ``G`` is either the spherical free-space kernel or its
far-field (Fraunhofer) limit ``exp(-i k0 x.xi / z) / (4 pi z)``.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import rng
from .errors import ConfigError, NumericalError
from .greens import FOUR_PI
from .quadrature import build_grid
from .rytov import CONVENTIONS, moment_coefficient, turbulent_green

KERNELS = ("spherical", "fraunhofer")


class DiskGrid(NamedTuple):
    """Disk nodes whose second half is the exact negation of the first."""

    points: np.ndarray
    weights: np.ndarray
    radius: float

    @property
    def half(self):
        return self.weights.size // 2


def disk_grid(radius, n_radial, n_angular):
    """Gauss-Legendre in radius (with the ``r dr`` Jacobian) times a periodic trapezoid in angle.

    ``n_angular`` must be even; angles ``theta`` and ``theta + pi`` are paired
    by negating coordinates, so the node set is exactly symmetric under
    ``x -> -x``.
    """
    if not radius > 0:
        raise ConfigError("disk radius must be positive")
    if n_radial < 1 or n_angular < 2 or n_angular % 2:
        raise ConfigError("need n_radial >= 1 and an even n_angular >= 2")
    t, wt = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * radius * (t + 1.0)
    wr = 0.5 * radius * wt * r
    theta = 2.0 * np.pi * (np.arange(n_angular // 2) + 0.5) / n_angular
    R, TH = np.meshgrid(r, theta, indexing="ij")
    first = np.stack([R.ravel() * np.cos(TH.ravel()), R.ravel() * np.sin(TH.ravel())], axis=1)
    w = np.repeat(wr, n_angular // 2) * (2.0 * np.pi / n_angular)
    points = np.vstack([first, -first])
    weights = np.concatenate([w, w])
    area = math.pi * radius ** 2
    if abs(weights.sum() - area) > 1e-10 * area:
        raise NumericalError("disk weights do not sum to the disk area")
    points.setflags(write=False)
    weights.setflags(write=False)
    return DiskGrid(points, weights, float(radius))


def is_symmetric(grid):
    n = grid.half
    return (2 * n == grid.weights.size
            and np.array_equal(grid.points[n:], -grid.points[:n])
            and np.array_equal(grid.weights[n:], grid.weights[:n]))


def _lift(points2, x):
    p = np.asarray(points2, dtype=float).reshape(-1, 2)
    return np.column_stack([np.full(p.shape[0], float(x)), p])


@dataclass(frozen=True, eq=False)
class ApodizationProblem:
    """Pupil radius ``a``, image radius ``b`` and plane separation ``z`` (metres).

    ``pupil_nodes`` and ``image_nodes`` are ``(n_radial, n_angular)``;
    ``image_nodes`` defaults to ``pupil_nodes``.  ``slab_counts`` sets the
    grid for the exponent integrals, whose transverse half-width defaults
    to ``a + b``.
    """

    a: float
    b: float
    z: float
    wave: object
    delta: float = 0.0
    sigma: float = 0.0
    convention: str = "gaussian"
    pupil_nodes: tuple = (24, 24)
    image_nodes: tuple = None
    slab_counts: tuple = (16, 8, 8)
    slab_half_width: float = None
    kernel: str = "spherical"

    def __post_init__(self):
        for name in ("a", "b", "z"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive (metres)")
        if self.delta < 0 or self.sigma < 0:
            raise ConfigError("delta and sigma must be non-negative")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"unknown convention {self.convention!r}")
        if self.kernel not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        object.__setattr__(self, "pupil_nodes", tuple(self.pupil_nodes))
        if self.image_nodes is None:
            object.__setattr__(self, "image_nodes", self.pupil_nodes)
        object.__setattr__(self, "image_nodes", tuple(self.image_nodes))

    @property
    def bandwidth(self):
        """Space-bandwidth product ``k0 a b / z``."""
        return self.wave.k0 * self.a * self.b / self.z

    @property
    def strength(self):
        return self.delta ** 2 * self.sigma ** 2 * self.wave.k0 ** 4

    @property
    def turbulent(self):
        return self.strength > 0

    @cached_property
    def pupil(self):
        return disk_grid(self.a, *self.pupil_nodes)

    @cached_property
    def image(self):
        if self.image_nodes == self.pupil_nodes and self.b == self.a:
            return self.pupil
        return disk_grid(self.b, *self.image_nodes)

    @cached_property
    def slab(self):
        hw = self.a + self.b if self.slab_half_width is None else self.slab_half_width
        return build_grid([(0.0, self.z), (-hw, hw), (-hw, hw)], self.slab_counts)

    def free_kernel(self, pupil_pts, image_pts):
        """Free-space kernel between pupil and image transverse points, shape (P, I)."""
        x = np.asarray(pupil_pts, dtype=float).reshape(-1, 2)
        xi = np.asarray(image_pts, dtype=float).reshape(-1, 2)
        k = self.wave.k0
        if self.kernel == "fraunhofer":
            return np.exp(-1j * k * (x @ xi.T) / self.z) / (FOUR_PI * self.z)
        d = np.sqrt(self.z ** 2 + ((x[:, None, :] - xi[None, :, :]) ** 2).sum(axis=-1))
        return np.exp(1j * k * d) / (FOUR_PI * d)

    def exponent_integrals(self, pupil_pts, image_pts):
        """``(int K^2, int |K|^2)`` on the slab for every pupil/image pair."""
        slab = self.slab
        k = self.wave.k0
        src = _lift(pupil_pts, 0.0)
        obs = _lift(image_pts, self.z)
        nodes, w, eps = slab.nodes, slab.weights, slab.exclusion_radius
        d_obs = np.linalg.norm(obs[:, None, :] - nodes[None, :, :], axis=-1)
        near_obs = d_obs <= eps
        sq = np.empty((src.shape[0], obs.shape[0]), dtype=complex)
        mag = np.empty((src.shape[0], obs.shape[0]))
        for i, s in enumerate(src):
            d_src = np.linalg.norm(nodes - s, axis=1)
            d = np.linalg.norm(obs - s, axis=1)
            # K = g0(zeta, src) g0(obs, zeta) / g0(obs, src)
            K = (d[:, None] / (FOUR_PI * d_src[None, :] * d_obs)
                 * np.exp(1j * k * (d_src[None, :] + d_obs - d[:, None])))
            K[near_obs | (d_src <= eps)[None, :]] = 0.0
            sq[i] = (K ** 2) @ w
            mag[i] = (np.abs(K) ** 2) @ w
        return sq, mag

    @cached_property
    def _pair_integrals(self):
        return self.exponent_integrals(self.pupil.points, self.image.points)

    @property
    def coefficient(self):
        return moment_coefficient(self.convention, 4.0)

    @cached_property
    def mean_kernel(self):
        """``H`` between pupil and image nodes, shape (P, I)."""
        H = self.free_kernel(self.pupil.points, self.image.points)
        if self.turbulent:
            H = H * np.exp(self.coefficient * self.strength * self._pair_integrals[0])
        return H

    def cross_term_bound(self):
        """Upper bound on the omitted exponent term ``2 c s^2 |int K_x conj(K_y)|``."""
        if not self.turbulent:
            return 0.0
        return float(2.0 * self.coefficient * self.strength * self._pair_integrals[1].max())


def image_amplitude(problem, T, xi, mean=True, field=None):
    """Image-plane amplitude ``sum_i w_i G(x_i, xi) T_i`` at transverse points ``xi``.

    With ``mean=True`` the ensemble-mean kernel is used.  Otherwise a
    realization ``field`` supplies the turbulent Green's function; its grid
    must span the gap between the planes.
    """
    T = np.asarray(T, dtype=complex)
    p = problem.pupil
    if T.shape != p.weights.shape:
        raise ValueError("one amplitude per pupil node")
    xi2 = np.asarray(xi, dtype=float).reshape(-1, 2)
    if mean:
        H = problem.free_kernel(p.points, xi2)
        if problem.turbulent:
            sq, _ = problem.exponent_integrals(p.points, xi2)
            H = H * np.exp(problem.coefficient * problem.strength * sq)
    else:
        if field is None:
            raise ValueError("a realization is required when mean=False")
        src = _lift(p.points, 0.0)
        obs = _lift(xi2, problem.z)
        H = np.array([[turbulent_green(o, s, problem.delta, field, problem.wave).value
                       for o in obs] for s in src])
    out = (p.weights * T) @ H
    return complex(out[0]) if np.ndim(xi) == 1 else out


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Nystrom-symmetrized concentration kernel ``W^1/2 K_s W^1/2``."""

    matrix: np.ndarray
    weights: np.ndarray
    symmetric_grid: bool
    cross_term_bound: float = 0.0

    @property
    def hermitian_defect(self):
        A = self.matrix
        scale = np.abs(A).max()
        return float(np.abs(A - A.conj().T).max() / scale) if scale else 0.0

    def kernel(self):
        """Unsymmetrized ``K_s`` on node pairs."""
        r = np.sqrt(self.weights)
        return self.matrix / r[:, None] / r[None, :]


def build_Ks(problem):
    """Assemble ``K_s(x, y) = sum_j v_j H(x, xi_j) conj(H(y, xi_j))`` over the image disk."""
    H = problem.mean_kernel
    B = np.sqrt(problem.pupil.weights)[:, None] * H * np.sqrt(problem.image.weights)[None, :]
    A = B @ B.conj().T
    if not np.all(np.isfinite(A)):
        raise NumericalError("non-finite entries in the concentration kernel")
    return KernelMatrix(A, problem.pupil.weights, is_symmetric(problem.pupil),
                        problem.cross_term_bound())


@dataclass(frozen=True, eq=False)
class EigenResult:
    """One eigenpair on the pupil nodes.

    ``eigenfunction`` solves the concentration eigen-equation; the amplitude
    that maximizes the physical energy ratio is its conjugate,
    ``pupil_amplitude``.  ``alpha`` is ``None`` for concentration results.
    """

    lam: float
    alpha: complex
    eigenfunction: np.ndarray
    parity: str
    degeneracy: int = 1

    @property
    def pupil_amplitude(self):
        return np.conj(self.eigenfunction)


def _parity(v, n, tol=1e-8):
    scale = np.abs(v).max()
    if np.abs(v[n:] - v[:n]).max() <= tol * scale:
        return "even"
    if np.abs(v[n:] + v[:n]).max() <= tol * scale:
        return "odd"
    return "mixed"


def _canonical_phase(v):
    j = int(np.argmax(np.abs(v) > 1e-8 * np.abs(v).max()))
    return v * (abs(v[j]) / v[j])


def solve_concentration(problem, matrix=None, hermitian_tol=1e-12, degeneracy_tol=1e-10):
    """Largest eigenpair of the symmetrized concentration kernel.

    Raises ``NumericalError`` if the matrix is not Hermitian within
    ``hermitian_tol``.  Within a degenerate top eigenspace the vector with the
    largest leading coefficient (made real and positive) is returned.
    """
    if matrix is None:
        matrix = build_Ks(problem)
    if matrix.hermitian_defect > hermitian_tol:
        raise NumericalError(f"kernel matrix not Hermitian (defect {matrix.hermitian_defect:.3g})")
    A = 0.5 * (matrix.matrix + matrix.matrix.conj().T)
    vals, vecs = np.linalg.eigh(A)
    top = vals[-1]
    tied = np.flatnonzero(vals >= top - degeneracy_tol * abs(top))
    cands = [_canonical_phase(vecs[:, j]) for j in tied]
    best = max(cands, key=lambda v: (abs(v[int(np.argmax(np.abs(v) > 1e-8))]), v.real.tolist()))
    psi = best / np.sqrt(matrix.weights)
    n = matrix.weights.size // 2
    parity = _parity(psi, n) if matrix.symmetric_grid else "mixed"
    return EigenResult(float(top), None, psi, parity, int(tied.size))


def concentration_spectrum(matrix):
    """All eigenvalues of the symmetrized kernel, descending."""
    A = 0.5 * (matrix.matrix + matrix.matrix.conj().T)
    return np.linalg.eigvalsh(A)[::-1]


def power_iteration(matrix, tol=1e-12, max_iter=10000, seed=0):
    """Top eigenvalue by power iteration; stops when the Rayleigh quotient settles to ``tol``."""
    A = matrix.matrix
    n = A.shape[0]
    v = rng.normals(seed, 0, n) + 1j * rng.normals(seed, 1, n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        u = A @ v
        new = float(np.real(np.vdot(v, u)))
        norm = np.linalg.norm(u)
        if norm == 0:
            return 0.0
        v = u / norm
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    raise NumericalError("power iteration did not converge")


def solve_alpha(problem):
    """Eigenpairs of ``alpha Psi(x) = sum_j w_j H(x, eta_j) Psi(eta_j)`` with ``a = b``.

    The pupil grid is symmetric under ``x -> -x``, so the symmetrized
    operator splits exactly into even and odd blocks.  Results are sorted by
    decreasing ``|alpha|``.
    """
    if problem.a != problem.b or problem.image_nodes != problem.pupil_nodes:
        raise ConfigError("the alpha eigenproblem needs a = b and identical disk grids")
    grid = problem.pupil
    if not is_symmetric(grid):
        raise ConfigError("pupil grid is not symmetric under x -> -x")
    n = grid.half
    r = np.sqrt(grid.weights)
    B = r[:, None] * problem.mean_kernel * r[None, :]
    out = []
    for parity, block in (("even", B[:n, :n] + B[:n, n:]), ("odd", B[:n, :n] - B[:n, n:])):
        vals, vecs = np.linalg.eig(block)
        sign = 1.0 if parity == "even" else -1.0
        for j in range(vals.size):
            u = vecs[:, j]
            psi = np.concatenate([u, sign * u]) / r
            out.append(EigenResult(float(abs(vals[j]) ** 2), complex(vals[j]),
                                   _canonical_phase(psi), parity))
    out.sort(key=lambda e: -abs(e.alpha))
    return out


def energy_ratio(problem, T, matrix=None):
    """Fraction of the pupil energy ``sum w |T|^2`` landing inside the image disk."""
    T = np.asarray(T, dtype=complex)
    w = problem.pupil.weights
    denom = float(np.sum(w * np.abs(T) ** 2))
    if denom == 0:
        raise ValueError("pupil amplitude is identically zero")
    if matrix is None:
        matrix = build_Ks(problem)
    u = np.sqrt(w) * np.conj(T)
    return float(np.real(np.vdot(u, matrix.matrix @ u)) / denom)


__all__ = [
    "DiskGrid", "disk_grid", "is_symmetric", "ApodizationProblem", "KernelMatrix",
    "EigenResult", "image_amplitude", "build_Ks", "solve_concentration",
    "concentration_spectrum", "power_iteration", "solve_alpha", "energy_ratio", "KERNELS",
]
