import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad

from turbgreen import rng
from turbgreen.errors import NumericalError
from turbgreen.quadrature import (MonteCarloSpec, Point3, TransversePoint, build_grid,
                                  integrate, mc_mean, retained_mask)

UNIT = [(0.0, 1.0)] * 3
CENTRED = [(-0.5, 0.5)] * 3


def inverse_distance_cube():
    """int over [-1/2, 1/2]^3 of 1/|p|, reduced to one face by the pyramid decomposition."""
    face, _ = dblquad(lambda v, u: (0.25 + u * u + v * v) ** -0.5, -0.5, 0.5, -0.5, 0.5,
                      epsabs=1e-13, epsrel=1e-13)
    return 1.5 * face


def test_points_reject_nonfinite():
    with pytest.raises(ValueError):
        Point3(0.0, math.nan, 1.0)
    with pytest.raises(ValueError):
        TransversePoint(math.inf, 0.0)
    assert Point3(0, 3, 4).distance((0, 0, 0)) == 5.0


def test_midpoint_two_per_axis():
    g = build_grid(UNIT, (2, 2, 2))
    assert g.n_nodes == 8
    np.testing.assert_array_equal(g.weights, np.full(8, 0.125))
    assert sorted(set(g.nodes[:, 0])) == [0.25, 0.75]


def test_single_cell_is_centre():
    g = build_grid(UNIT, (1, 1, 1))
    np.testing.assert_array_equal(g.nodes, [[0.5, 0.5, 0.5]])
    assert g.weights.tolist() == [1.0]


def test_gauss_legendre_weight_sum():
    g = build_grid([(0.0, 2.0)] * 3, (4, 4, 4), rule="gauss-legendre")
    assert abs(g.weights.sum() - 8.0) < 1e-12
    assert np.all(g.weights > 0)


def test_node_order_is_c_order():
    g = build_grid(UNIT, (2, 3, 4))
    i, j, k = 1, 2, 3
    flat = (i * 3 + j) * 4 + k
    np.testing.assert_allclose(g.nodes[flat], [0.75, (j + 0.5) / 3, (k + 0.5) / 4])


@pytest.mark.parametrize("bad", [
    dict(box=[(0, 1), (0, 1)], counts=(1, 1, 1)),
    dict(box=UNIT, counts=(0, 1, 1)),
    dict(box=[(1, 0), (0, 1), (0, 1)], counts=(1, 1, 1)),
    dict(box=UNIT, counts=(1, 1, 1), rule="simpson"),
    dict(box=UNIT, counts=(1, 1, 1), exclusion_radius=-1.0),
])
def test_build_grid_rejects(bad):
    with pytest.raises(ValueError):
        build_grid(**bad)


def test_grid_arrays_are_read_only():
    g = build_grid(UNIT, (2, 2, 2))
    with pytest.raises(ValueError):
        g.weights[0] = 1.0


def test_constant_and_linear_integrands():
    g = build_grid(UNIT, (5, 4, 3))
    assert abs(integrate(g, lambda p: np.ones(len(p))).value - 1.0) < 1e-14
    assert abs(integrate(g, lambda p: p[:, 0]).value - 0.5) < 1e-14


def test_inverse_distance_richardson():
    exact = inverse_distance_cube()
    values = []
    for n in (16, 32, 64):
        g = build_grid(CENTRED, (n, n, n))
        values.append(integrate(g, lambda p: 1.0 / np.linalg.norm(p, axis=1), [(0, 0, 0)]).value.real)
    errors = [abs(v - exact) for v in values]
    assert errors[0] > errors[1] > errors[2]
    # O(h^2) exclusion bias: the error ratio under halving is ~4
    assert 3.5 < errors[1] / errors[2] < 4.5
    extrapolated = (4.0 * values[2] - values[1]) / 3.0
    assert abs(extrapolated - exact) < 1e-4 * exact


def test_excluded_volume_shrinks():
    vols = []
    for n in (4, 8, 16):
        g = build_grid(CENTRED, (n, n, n))
        vols.append(integrate(g, lambda p: np.ones(len(p)), [(0.1, 0.0, 0.0)]).excluded_volume)
    assert vols[0] > vols[1] > vols[2] > 0


def test_nonfinite_integrand_raises():
    g = build_grid(CENTRED, (3, 3, 3))
    with pytest.raises(NumericalError), np.errstate(divide="ignore"):
        integrate(g, lambda p: 1.0 / np.linalg.norm(p, axis=1))


def test_retained_mask_uses_radius():
    g = build_grid(UNIT, (4, 4, 4), exclusion_radius=0.0)
    assert retained_mask(g, [(0.5, 0.5, 0.5)]).all()
    g = build_grid(UNIT, (4, 4, 4), exclusion_radius=10.0)
    assert not retained_mask(g, [(0.5, 0.5, 0.5)]).any()


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_integrate_is_linear(a, b):
    g = build_grid(UNIT, (3, 3, 3), rule="gauss-legendre")
    f = lambda p: np.sin(p[:, 0]) * p[:, 1]
    h = lambda p: np.exp(p[:, 2]) + 1j * p[:, 0]
    lhs = integrate(g, lambda p: a * f(p) + b * h(p)).value
    rhs = a * integrate(g, f).value + b * integrate(g, h).value
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def _normal_sampler(seed, i):
    return rng.normals(seed, i, 1)[0]


def test_mc_constant_statistic():
    mean, se = mc_mean(MonteCarloSpec(100, 3), _normal_sampler, lambda s: 2.5 - 1j)
    assert mean == 2.5 - 1j and se == 0.0


def test_mc_deterministic_and_clt():
    spec = MonteCarloSpec(10_000, 7)
    a = mc_mean(spec, _normal_sampler, lambda s: s)
    b = mc_mean(spec, _normal_sampler, lambda s: s)
    assert a == b
    mean, se = a
    assert abs(mean) < 3 * se


def test_mc_se_scaling():
    _, se_small = mc_mean(MonteCarloSpec(100, 1), _normal_sampler, lambda s: s)
    _, se_big = mc_mean(MonteCarloSpec(10_000, 1), _normal_sampler, lambda s: s)
    assert 5.0 < se_small / se_big < 20.0


def test_mc_workers_do_not_change_result():
    spec = MonteCarloSpec(257, 5)
    one = mc_mean(spec, _normal_sampler, lambda s: np.array([s, s * s]))
    many = mc_mean(spec, _normal_sampler, lambda s: np.array([s, s * s]), workers=4)
    np.testing.assert_array_equal(one[0], many[0])
    np.testing.assert_array_equal(one[1], many[1])


def test_mc_needs_two_samples_for_se():
    with pytest.raises(ValueError):
        mc_mean(MonteCarloSpec(1), _normal_sampler, lambda s: s)
    mean, se = mc_mean(MonteCarloSpec(1), _normal_sampler, lambda s: s, standard_error=False)
    assert se is None
