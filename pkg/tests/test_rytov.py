import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from turbgreen.errors import ConfigError, OrderingError, SingularityError
from turbgreen.greens import g0, gp, kernel_K, kernel_Kprime, paraxial_residual
from turbgreen.quadrature import build_grid
from turbgreen.rytov import (BackgroundField, GreensTable, beam_envelope, beam_field,
                             frozen_green, free_green, k_squared_integral,
                             mean_turbulent_green, moment_coefficient,
                             parabolic_turbulent_green, phi1_full, phi1_parabolic,
                             reciprocity_defect, turbulent_green)
from turbgreen.turbulence import RefractiveFieldRealization, sample_field


def with_values(field, values):
    v = np.asarray(values, dtype=float)
    v.setflags(write=False)
    return RefractiveFieldRealization(field.grid, v, field.seed, field.index)


def one_cell(grid, c, value):
    v = np.zeros(grid.n_nodes)
    v[c] = value
    v.setflags(write=False)
    return RefractiveFieldRealization(grid, v, 0, 0)


@pytest.fixture(scope="module")
def field(spec16):
    return sample_field(spec16, 0)


@pytest.fixture(scope="module")
def upstream_grid():
    return build_grid([(0.5, 3.5), (-1, 1), (-1, 1)], (6, 6, 6))


def test_moment_coefficient():
    assert moment_coefficient("paper", 64) == 64.0
    assert moment_coefficient("gaussian", 64) == 32.0
    with pytest.raises(ValueError):
        moment_coefficient("other", 4)


def test_background_validation(wave):
    with pytest.raises(ConfigError):
        BackgroundField("spherical", wave)
    with pytest.raises(ConfigError):
        BackgroundField("beam_wave", wave, alpha=0.0)
    with pytest.raises(ConfigError):
        BackgroundField("point_source", wave)


def test_phi1_zero_field(spec16, wave):
    f = sample_field(replace(spec16, sigma=0.0), 0)
    bg = BackgroundField("plane_wave", wave)
    assert phi1_full((2.0, 0.1, 0.0), bg, f).value == 0
    assert phi1_parabolic((5.0, 0.0, 0.0), bg, f).value == 0


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-1e3, 1e3).filter(lambda a: abs(a) > 1e-6))
def test_phi1_linear(a, spec16, wave):
    f = sample_field(spec16, 3)
    fa = with_values(f, a * f.values)
    for bg in (BackgroundField("plane_wave", wave), BackgroundField("beam_wave", wave, alpha=0.2)):
        p = phi1_full((1.3, 0.2, -0.1), bg, f).value
        assert abs(phi1_full((1.3, 0.2, -0.1), bg, fa).value - a * p) <= 1e-12 * abs(a * p)
        q = phi1_parabolic((4.5, 0.2, -0.1), bg, f).value
        assert abs(phi1_parabolic((4.5, 0.2, -0.1), bg, fa).value - a * q) <= 1e-12 * abs(a * q)


def test_phi1_full_single_cell(slab8, wave):
    c = 123
    v = 0.37
    f = one_cell(slab8, c, v)
    r = np.array([3.9, 0.4, -0.7])
    node, w = slab8.nodes[c], slab8.weights[c]
    d = np.linalg.norm(r - node)
    expected = (wave.k0 ** 2 / (2 * math.pi) * v * w * np.exp(1j * wave.k0 * (node[0] - r[0]))
                * np.exp(1j * wave.k0 * d) / d)
    got = phi1_full(r, BackgroundField("plane_wave", wave), f)
    assert abs(got.value - expected) <= 1e-13 * abs(expected)
    assert got.nodes + int(round(got.excluded_volume / w)) == slab8.n_nodes


def test_phi1_point_source_background(slab8, wave):
    f = sample_field(replace_grid(slab8), 2)
    bg = BackgroundField("point_source", wave, source=(-1.0, 0.0, 0.0))
    r = (2.2, 0.3, 0.1)
    lp = phi1_full(r, bg, f)
    keep = np.linalg.norm(slab8.nodes - r, axis=1) > slab8.exclusion_radius
    nodes = slab8.nodes[keep]
    d = np.linalg.norm(nodes - r, axis=1)
    direct = (wave.k0 ** 2 / (2 * math.pi * g0(r, (-1, 0, 0), wave))
              * np.sum(g0(nodes, (-1, 0, 0), wave) * f.values[keep] * slab8.weights[keep]
                       * np.exp(1j * wave.k0 * d) / d))
    assert abs(lp.value - direct) <= 1e-12 * abs(direct)


def replace_grid(grid):
    from turbgreen.turbulence import TurbulenceSpec
    return TurbulenceSpec(0.01, 0.4, grid, seed=5)


def test_phi1_parabolic_single_cell(slab8, wave):
    c = 77
    v = -1.1
    f = one_cell(slab8, c, v)
    obs = np.array([4.6, 0.2, 0.3])
    node, w = slab8.nodes[c], slab8.weights[c]
    dx = obs[0] - node[0]
    t2 = np.sum((obs[1:] - node[1:]) ** 2)
    plane = (wave.k0 ** 2 / (2 * math.pi)) * v * w / dx * np.exp(1j * wave.k0 * t2 / (2 * dx))
    got = phi1_parabolic(obs, BackgroundField("plane_wave", wave), f).value
    assert abs(got - plane) <= 1e-13 * abs(plane)
    beam = BackgroundField("beam_wave", wave, alpha=0.3)
    expected = (2 * wave.k0 ** 2 * beam_envelope(node, 0.3, wave) * v * w * gp(obs, node, wave)
                / beam_envelope(obs, 0.3, wave))
    got = phi1_parabolic(obs, beam, f).value
    assert abs(got - expected) <= 1e-13 * abs(expected)


def test_phi1_parabolic_requires_upstream_cells(field, wave):
    with pytest.raises(OrderingError):
        phi1_parabolic((3.0, 0, 0), BackgroundField("plane_wave", wave), field)


def test_phi1_vanishing_background(slab8, wave):
    f = sample_field(replace_grid(slab8), 0)
    bg = BackgroundField("beam_wave", wave, alpha=1e3)
    with pytest.raises(SingularityError):
        phi1_full((0.0, 40.0, 0.0), bg, f)


def test_beam_field_closed_forms(wave):
    alpha = 0.4
    for rho in (0.0, 0.3, 1.2):
        v = beam_field((0.0, rho * 0.6, rho * 0.8), alpha, wave)
        assert v.imag == 0 and v.real == pytest.approx(math.exp(-rho ** 2 * alpha * wave.k0 / 2),
                                                       rel=1e-15)
    for x in (0.5, 3.0):
        expected = np.exp(1j * wave.k0 * x) / (1 + 1j * x * alpha)
        assert abs(beam_field((x, 0, 0), alpha, wave) - expected) <= 1e-15 * abs(expected)


@pytest.mark.parametrize("probe", [(0.5, 0, 0), (1, 0.3, 0), (2, -0.2, 0.4), (4, 0.5, 0.5), (0.2, 0.1, -0.3)])
def test_beam_envelope_solves_paraxial_equation(wave, probe):
    field = lambda p: beam_envelope(p, 0.3, wave)
    res = np.abs([paraxial_residual(field, wave, probe, h) for h in (0.04, 0.02, 0.01)])
    assert np.all(np.log2(res[:-1] / res[1:]) >= 1.9)


@pytest.mark.parametrize("alpha", [1e-3, 1e-5])
def test_beam_tends_to_plane_wave(wave, alpha):
    for x in (1.0, 2.0, 5.0):
        for rho in (0.0, 0.3):
            u = beam_field((x, rho, 0.0), alpha, wave)
            err = abs(u - np.exp(1j * wave.k0 * x))
            assert err < alpha * x * (1 + wave.k0 * rho ** 2 / 2)


def test_turbulent_green_delta_zero(field, wave):
    tg = turbulent_green((0.3, 0.1, 0.2), (3.7, -0.2, 0.1), 0.0, field, wave)
    assert tg.value == g0((0.3, 0.1, 0.2), (3.7, -0.2, 0.1), wave)


def test_turbulent_green_coincident(field, wave):
    with pytest.raises(SingularityError):
        turbulent_green((1, 0, 0), (1, 0, 0), 0.1, field, wave)


def test_turbulent_green_single_cell(slab8, wave):
    c = 200
    f = one_cell(slab8, c, 0.8)
    r, xi, delta = (0.1, 0.2, -0.3), (3.8, -0.4, 0.5), 0.02
    tg = turbulent_green(r, xi, delta, f, wave)
    expected = delta * 2 * wave.k0 ** 2 * 0.8 * slab8.weights[c] * kernel_K(r, xi, slab8.nodes[c], wave)
    assert abs(delta * tg.exponent - expected) <= 1e-13 * abs(expected)
    assert abs(tg.value - g0(r, xi, wave) * np.exp(expected)) <= 1e-13 * abs(tg.value)


def test_reciprocity_property(spec16, wave):
    gen = np.random.default_rng(0)
    pts = gen.uniform([0, -1, -1], [4, 1, 1], size=(20, 2, 3))
    for i in range(3):
        G = frozen_green(spec16.delta, sample_field(spec16, i), wave)
        assert reciprocity_defect(G, pts) < 1e-12
    assert reciprocity_defect(free_green(wave), pts) == 0.0


def test_reciprocity_defect_accepts_result_objects(field, wave):
    def G(a, b):
        return turbulent_green(a, b, 0.0, field, wave)
    assert reciprocity_defect(G, [((0, 0, 0), (1, 1, 1))]) == 0.0


def test_table_matches_turbulent_green(spec16, wave):
    pairs = [((0.3, 0.1, 0.2), (3.7, -0.2, 0.1)), ((1.0, 0.9, -0.9), (2.0, 0.0, 0.0))]
    table = GreensTable(pairs, spec16.grid, wave)
    for i in range(3):
        f = sample_field(spec16, i)
        direct = [turbulent_green(a, b, spec16.delta, f, wave).value for a, b in pairs]
        np.testing.assert_allclose(table.values(f, spec16.delta), direct, rtol=1e-13)
    assert np.allclose(table.k_squared(), [k_squared_integral(a, b, spec16.grid, wave) for a, b in pairs])


def test_mean_sigma_zero(spec16, wave):
    s = replace(spec16, sigma=0.0)
    assert mean_turbulent_green((0, 0, 0), (3, 0, 0), s, wave) == g0((0, 0, 0), (3, 0, 0), wave)


def test_mean_conventions_ratio(spec16, wave):
    r, xi = (0.2, 0.0, 0.1), (3.5, 0.3, -0.2)
    gauss = mean_turbulent_green(r, xi, spec16, wave, "gaussian")
    paper = mean_turbulent_green(r, xi, spec16, wave, "paper")
    S = k_squared_integral(r, xi, spec16.grid, wave)
    free = g0(r, xi, wave)
    s2 = spec16.delta ** 2 * spec16.sigma ** 2 * wave.k0 ** 4
    assert abs(paper - free * np.exp(4 * s2 * S)) <= 1e-13 * abs(paper)
    ratio = paper / gauss
    assert abs(ratio - np.exp(2 * s2 * S)) <= 1e-10 * abs(ratio)


def test_parabolic_green_delta_zero(wave):
    grid = build_grid([(0.5, 3.5), (-1, 1), (-1, 1)], (4, 4, 4))
    f = sample_field(replace_grid(grid), 0)
    tg = parabolic_turbulent_green((4.0, 0.1, 0), (0.0, 0, 0.2), 0.0, f, wave)
    assert tg.value == gp((4.0, 0.1, 0), (0.0, 0, 0.2), wave)


def test_parabolic_green_ordering(upstream_grid, wave):
    f = sample_field(replace_grid(upstream_grid), 0)
    with pytest.raises(OrderingError):
        parabolic_turbulent_green((3.0, 0, 0), (0.0, 0, 0), 0.1, f, wave)
    with pytest.raises(OrderingError):
        parabolic_turbulent_green((4.0, 0, 0), (1.0, 0, 0), 0.1, f, wave)


def test_parabolic_green_single_cell(upstream_grid, wave):
    c = 50
    f = one_cell(upstream_grid, c, 1.7)
    obs, src = (4.0, 0.2, -0.1), (0.0, -0.3, 0.2)
    tg = parabolic_turbulent_green(obs, src, 1.0, f, wave)
    expected = 2 * wave.k0 ** 2 * 1.7 * upstream_grid.weights[c] * kernel_Kprime(
        obs, src, upstream_grid.nodes[c], wave)
    assert abs(tg.exponent - expected) <= 1e-13 * abs(expected)


def test_parabolic_green_reflection_invariance(upstream_grid, wave):
    f = sample_field(replace_grid(upstream_grid), 4)
    obs, src = (4.0, 0.2, -0.1), (0.0, -0.3, 0.2)
    # x -> 4 - x maps the slab [0.5, 3.5] onto itself with the x index reversed
    mirrored = f.values.reshape(upstream_grid.counts)[::-1].ravel()
    g = with_values(f, mirrored)
    a = parabolic_turbulent_green(obs, src, 0.1, f, wave).exponent
    b = parabolic_turbulent_green((4.0, *src[1:]), (0.0, *obs[1:]), 0.1, g, wave).exponent
    assert abs(a - b) <= 1e-12 * abs(a)


def test_delta_continuity_is_linear(spec16, wave):
    f = sample_field(spec16, 1)
    r, xi = (0.2, 0.1, 0.0), (3.9, -0.1, 0.3)
    free = g0(r, xi, wave)
    d3 = abs(turbulent_green(r, xi, 1e-3, f, wave).value - free)
    d4 = abs(turbulent_green(r, xi, 1e-4, f, wave).value - free)
    assert abs(d3 / d4 / 10 - 1) < 0.05
