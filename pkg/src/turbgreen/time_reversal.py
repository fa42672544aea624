"""Phase-conjugation (time-reversal) refocusing through a frozen medium.

A field emitted from source nodes is recorded on mirror elements in the
plane x = 0, conjugated and re-emitted.  The aperture indicator is a list of
element centres with area weights, so every superposition is a finite sum.
Both legs of one experiment use the same realization.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SingularityError
from .quadrature import as_xyz, mc_mean
from .rytov import GreensTable, k_weights, moment_coefficient
from .turbulence import sample_field


def _frozen_array(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MirrorSpec:
    """Mirror elements at x = 0 with positive area weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = _frozen_array(np.atleast_2d(as_xyz(self.points)))
        w = _frozen_array(np.atleast_1d(self.weights))
        if p.shape[0] == 0:
            raise ValueError("mirror needs at least one element")
        if w.shape != (p.shape[0],) or np.any(~(w > 0)):
            raise ValueError("mirror weights must be positive, one per element")
        if np.any(p[:, 0] != 0.0):
            raise ValueError("mirror elements must lie in the plane x = 0")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, y=0.0, z=0.0):
        return cls([[0.0, y, z]], [1.0])

    @classmethod
    def grid(cls, half_width, n):
        """``n x n`` square pixels covering ``[-half_width, half_width]^2``."""
        h = 2.0 * half_width / n
        c = -half_width + h * (np.arange(n) + 0.5)
        Y, Z = np.meshgrid(c, c, indexing="ij")
        pts = np.stack([np.zeros(n * n), Y.ravel(), Z.ravel()], axis=1)
        return cls(pts, np.full(n * n, h * h))

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True, eq=False)
class SourceField:
    """Input amplitude on source nodes (a single point has weight 1)."""

    points: np.ndarray
    amplitudes: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        p = _frozen_array(np.atleast_2d(as_xyz(self.points)))
        a = _frozen_array(np.atleast_1d(self.amplitudes), complex)
        w = np.ones(p.shape[0]) if self.weights is None else self.weights
        w = _frozen_array(np.atleast_1d(w))
        if p.shape[0] == 0:
            raise ValueError("source needs at least one node")
        if a.shape != (p.shape[0],) or w.shape != (p.shape[0],):
            raise ValueError("one amplitude and one weight per source node")
        if not np.all(np.isfinite(a)):
            raise ValueError("source amplitudes must be finite")
        if np.any(~(w > 0)):
            raise ValueError("source weights must be positive")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, position, amplitude=1.0):
        return cls([as_xyz(position)], [amplitude])

    def scaled(self, c):
        return SourceField(self.points, c * self.amplitudes, self.weights)

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True, eq=False)
class RefocusResult:
    """Back-propagated field on evaluation points.

    For a single realization ``intensity == abs(psi) ** 2``.  Ensemble
    results hold the mean of each quantity and, for Monte Carlo, its
    standard error.
    """

    points: np.ndarray
    psi: np.ndarray
    intensity: np.ndarray
    psi_se: np.ndarray = field(default=None)
    intensity_se: np.ndarray = field(default=None)


def _check_disjoint(a, b, what):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    if np.any(d == 0):
        raise SingularityError(f"{what} share a point")


def mirror_field(src, mirror, G):
    """Recorded field ``Psi_m = sum_s w_s G(r_m, r_s) Psi0_s`` per element."""
    _check_disjoint(mirror.points, src.points, "mirror and source")
    out = np.zeros(len(mirror), dtype=complex)
    for m, rm in enumerate(mirror.points):
        for s, rs in enumerate(src.points):
            if src.amplitudes[s] != 0:
                out[m] += src.weights[s] * G(rm, rs) * src.amplitudes[s]
    return out


def backpropagate(psi_m, mirror, eval_points, G):
    """Re-emit ``conj(Psi_m)``: ``Psi_B(r) = sum_m w_m G(r, r_m) conj(Psi_m)``."""
    pts = np.atleast_2d(as_xyz(eval_points))
    _check_disjoint(pts, mirror.points, "evaluation points and mirror")
    conj_m = np.conj(np.asarray(psi_m, dtype=complex))
    psi = np.zeros(pts.shape[0], dtype=complex)
    for i, r in enumerate(pts):
        for m, rm in enumerate(mirror.points):
            psi[i] += mirror.weights[m] * G(r, rm) * conj_m[m]
    return RefocusResult(pts, psi, np.abs(psi) ** 2)


def refocus(src, mirror, eval_points, G):
    """Forward recording followed by conjugate back-propagation with the same ``G``."""
    return backpropagate(mirror_field(src, mirror, G), mirror, eval_points, G)


class _Geometry:
    """Pair tables for the two legs: (r, m) for the return, (m, s) for the recording."""

    def __init__(self, src, mirror, eval_points, grid, wave):
        self.pts = np.atleast_2d(as_xyz(eval_points))
        _check_disjoint(mirror.points, src.points, "mirror and source")
        _check_disjoint(self.pts, mirror.points, "evaluation points and mirror")
        self.src, self.mirror, self.wave, self.grid = src, mirror, wave, grid
        P, M, S = self.pts.shape[0], len(mirror), len(src)
        self.shape = (P, M, S)
        self.back = GreensTable([(r, rm) for r in self.pts for rm in mirror.points], grid, wave)
        self.fwd = GreensTable([(rm, rs) for rm in mirror.points for rs in src.points], grid, wave)

    def coefficients(self):
        """Free-space amplitude of every (r, m, s) path, shape (P, M*S)."""
        P, M, S = self.shape
        back = self.back.free.reshape(P, M)
        fwd = self.fwd.free.reshape(M, S)
        c = (self.mirror.weights[None, :, None] * back[:, :, None]
             * np.conj(fwd[None, :, :] * self.src.weights[None, None, :]
                       * self.src.amplitudes[None, None, :]))
        return c.reshape(P, M * S)

    def path_weights(self, i):
        """Kernel weights ``a_rm + conj(a_ms)`` of every path ending at point ``i``, (M*S, N)."""
        P, M, S = self.shape
        back = self.back.weights.reshape(P, M, -1)[i]
        fwd = self.fwd.weights.reshape(M, S, -1)
        return (back[:, None, :] + np.conj(fwd)).reshape(M * S, -1)

    def realization(self, field, delta):
        P, M, S = self.shape
        back = self.back.values(field, delta).reshape(P, M)
        fwd = self.fwd.values(field, delta).reshape(M, S)
        psi_m = fwd @ (self.src.weights * self.src.amplitudes)
        return back @ (self.mirror.weights * np.conj(psi_m))


def mean_refocus(src, mirror, eval_points, spec, wave, convention="gaussian"):
    """Analytic white-noise ensemble means of ``Psi_B`` and ``I``.

    Every path ``(m, s)`` carries ``exp(X_ms)`` with ``X_ms`` linear in the
    field, so each mean is a sum of Gaussian moments.  The exponent of a
    single path is ``c delta^2 sigma^2 k0^4 int (K_rm + conj K_ms)^2`` and of
    a path pair in the intensity ``c ... int (T_ms + conj T_m's')^2``, with
    ``c = 4`` for ``convention="paper"`` and ``2`` for ``"gaussian"``.  For one source and one mirror
    point the intensity exponent reduces to ``16 c int (Re K)^2``.
    """
    geo = _Geometry(src, mirror, eval_points, spec.grid, wave)
    coef = geo.coefficients()
    P = geo.shape[0]
    if spec.delta == 0 or spec.sigma == 0:
        psi = coef.sum(axis=1)
        return RefocusResult(geo.pts, psi, np.abs(psi) ** 2)
    c = moment_coefficient(convention, 4.0) * spec.delta ** 2 * spec.sigma ** 2 * wave.k0 ** 4
    root_w = np.sqrt(spec.grid.weights)
    psi = np.zeros(P, dtype=complex)
    inten = np.zeros(P)
    for i in range(P):
        U = geo.path_weights(i) / root_w
        sq = np.einsum("pn,pn->p", U, U)
        psi[i] = np.sum(coef[i] * np.exp(c * sq))
        cross = U @ np.conj(U).T
        q = sq[:, None] + np.conj(sq)[None, :] + 2.0 * cross
        inten[i] = np.real(np.sum(coef[i][:, None] * np.conj(coef[i])[None, :] * np.exp(c * q)))
    return RefocusResult(geo.pts, psi, inten)


def mc_refocus(src, mirror, eval_points, spec, wave, mc, workers=1):
    """Monte Carlo means and standard errors of ``Psi_B`` and ``I``.

    Realization ``i`` is ``sample_field(spec with seed=mc.seed, i)``.
    """
    geo = _Geometry(src, mirror, eval_points, spec.grid, wave)
    seeded = replace(spec, seed=mc.seed)
    P = geo.shape[0]

    def statistic(field):
        psi = geo.realization(field, spec.delta)
        return np.concatenate([psi, np.abs(psi) ** 2])

    mean, se = mc_mean(mc, lambda seed, i: sample_field(seeded, i), statistic, workers=workers)
    return RefocusResult(geo.pts, mean[:P], mean[P:].real, se[:P], se[P:])


def point_exponent_weights(source, mirror_point, grid, wave):
    """``Re(w K)`` per node for the point-source, point-mirror path."""
    return np.real(k_weights(mirror_point, source, grid, wave))


def spot_fwhm(coords, values):
    """Full width at half maximum of ``|values|`` along a 1-D cut.

    Crossings are located by linear interpolation; ``nan`` if the profile
    does not fall below half maximum on both sides of the peak.
    """
    x = np.asarray(coords, dtype=float)
    v = np.abs(np.asarray(values))
    if x.ndim != 1 or x.shape != v.shape or x.size < 3 or np.any(np.diff(x) <= 0):
        raise ValueError("need increasing coordinates and matching values")
    i = int(np.argmax(v))
    half = 0.5 * v[i]
    left = np.flatnonzero(v[:i] < half)
    right = np.flatnonzero(v[i:] < half)
    if left.size == 0 or right.size == 0:
        return float("nan")
    j = left[-1]
    xl = x[j] + (half - v[j]) * (x[j + 1] - x[j]) / (v[j + 1] - v[j])
    k = i + right[0]
    xr = x[k - 1] + (half - v[k - 1]) * (x[k] - x[k - 1]) / (v[k] - v[k - 1])
    return float(xr - xl)


__all__ = [
    "MirrorSpec", "SourceField", "RefocusResult", "mirror_field", "backpropagate",
    "refocus", "mean_refocus", "mc_refocus", "point_exponent_weights", "spot_fwhm",
]
