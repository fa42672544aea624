"""Per-command computations producing output file contents."""

import numpy as np

from .apodization import (ApodizationProblem, build_Ks, concentration_spectrum,
                          solve_alpha, solve_concentration)
from .greens import g0
from .quadrature import MonteCarloSpec, build_grid, mc_mean
from .runner import csv_text, summary_text
from .rytov import (BackgroundField, GreensTable, frozen_green, k_squared_integral,
                    kprime_weights, mean_turbulent_green, parabolic_turbulent_green,
                    phi1_full, phi1_parabolic, turbulent_green)
from .time_reversal import (MirrorSpec, SourceField, mc_refocus, mean_refocus, refocus,
                            spot_fwhm)
from .turbulence import (NAMED_PROFILES, CnProfile, TurbulenceSpec, load_cn_profile,
                         rytov_validity, sample_field)


def _enc(text):
    return text.encode("utf-8")


def _spec(scenario):
    t = scenario.turbulence
    grid = build_grid(t.box, t.counts, t.rule, t.exclusion_radius)
    return TurbulenceSpec(t.delta, t.sigma, grid, scenario.seed)


def _common(scenario, wave, spec=None):
    items = [("command", scenario.command), ("k0", wave.k0),
             ("convention", scenario.convention), ("seed", scenario.seed)]
    if spec is not None:
        items += [("delta", spec.delta), ("sigma", spec.sigma),
                  ("strength", spec.strength(wave)), ("field_cells", spec.grid.n_nodes)]
    return items


def run_greens(scenario, workers):
    wave = scenario.wave()
    b = scenario.block
    pts = np.array(b.points)
    vals = np.atleast_1d(g0(pts, b.source, wave))
    rows = [(*p, v.real, v.imag, abs(v)) for p, v in zip(b.points, vals)]
    summary = _common(scenario, wave) + [
        ("value_re", vals[0].real), ("value_im", vals[0].imag), ("value_abs", abs(vals[0])),
        ("points", len(b.points))]
    return {"greens.csv": _enc(csv_text(["x", "y", "z", "re", "im", "abs"], rows)),
            "summary.txt": _enc(summary_text(summary))}


def run_validity(scenario, workers):
    wave = scenario.wave()
    b = scenario.block
    if b.profile == "constant":
        profile = CnProfile.uniform(b.cn)
    elif b.profile == "file":
        profile = load_cn_profile(b.profile_file)
    else:
        profile = NAMED_PROFILES[b.profile]
    rows = []
    for L in b.lengths:
        value, ok = rytov_validity(wave, profile, L, b.nodes)
        rows.append((L, value, ok))
    summary = _common(scenario, wave) + [
        ("profile", b.profile), ("max_valid_length",
                                 max([r[0] for r in rows if r[2]], default=0.0))]
    return {"validity.csv": _enc(csv_text(["length_m", "value", "valid"], rows)),
            "summary.txt": _enc(summary_text(summary))}


def run_rytov(scenario, workers):
    wave = scenario.wave()
    spec = _spec(scenario)
    b = scenario.block
    field = sample_field(spec, b.realization)
    summary = _common(scenario, wave, spec) + [("quantity", b.quantity),
                                               ("realization", b.realization)]
    if b.quantity in ("phi1", "phi1-parabolic"):
        bg = BackgroundField(b.background, wave, b.alpha, b.background_source)
        fn = phi1_full if b.quantity == "phi1" else phi1_parabolic
        rows = []
        for p in b.points:
            lp = fn(p, bg, field)
            rows.append((*p, lp.value.real, lp.value.imag, lp.excluded_volume, lp.nodes))
        text = csv_text(["x", "y", "z", "re", "im", "excluded_volume", "nodes"], rows)
        return {"phi1.csv": _enc(text), "summary.txt": _enc(summary_text(summary))}

    paraxial = b.quantity == "parabolic-green"
    header = ["x", "y", "z", "re", "im", "free_re", "free_im"]
    rows = []
    for p in b.points:
        if paraxial:
            tg = parabolic_turbulent_green(p, b.source, spec.delta, field, wave)
        else:
            tg = turbulent_green(p, b.source, spec.delta, field, wave)
        rows.append([*p, tg.value.real, tg.value.imag, tg.free.real, tg.free.imag])
    if not paraxial:
        header += ["mean_re", "mean_im", "int_k2_re", "int_k2_im"]
        for row, p in zip(rows, b.points):
            m = mean_turbulent_green(p, b.source, spec, wave, scenario.convention)
            s = k_squared_integral(p, b.source, spec.grid, wave)
            row += [m.real, m.imag, s.real, s.imag]
    if b.samples:
        if paraxial:
            weights = np.stack([kprime_weights(p, b.source, spec.grid, wave) for p in b.points])
            free = np.array([r[5] + 1j * r[6] for r in rows])

            def stat(f):
                return free * np.exp(spec.delta * 2.0 * wave.k0 ** 2 * (weights @ f.values))
        else:
            table = GreensTable([(p, b.source) for p in b.points], spec.grid, wave)

            def stat(f):
                return table.values(f, spec.delta)
        mc = MonteCarloSpec(b.samples, scenario.seed)
        mean, se = mc_mean(mc, lambda seed, i: sample_field(spec, i), stat, workers=workers)
        mean = np.atleast_1d(mean)
        se = np.atleast_1d(se)
        header += ["mc_re", "mc_im", "mc_se"]
        for row, m, e in zip(rows, mean, se):
            row += [m.real, m.imag, e]
        summary.append(("samples", b.samples))
    return {"green.csv": _enc(csv_text(header, rows)), "summary.txt": _enc(summary_text(summary))}


def _eval_points(b):
    if b.eval_half_width is None:
        return np.array(b.eval_points), None
    c = np.linspace(-b.eval_half_width, b.eval_half_width, b.eval_n)
    Y, Z = np.meshgrid(b.source[1] + c, b.source[2] + c, indexing="ij")
    pts = np.column_stack([np.full(Y.size, b.source[0]), Y.ravel(), Z.ravel()])
    if b.eval_points:
        pts = np.vstack([np.array(b.eval_points), pts])
    return pts, c


def run_time_reversal(scenario, workers):
    wave = scenario.wave()
    spec = _spec(scenario)
    b = scenario.block
    if b.mirror_half_width is None:
        mirror = MirrorSpec.point()
    else:
        mirror = MirrorSpec.grid(b.mirror_half_width, b.mirror_n)
    src = SourceField.point(b.source, b.amplitude)
    pts, cut = _eval_points(b)
    field = sample_field(spec, b.realization)
    single = refocus(src, mirror, pts, frozen_green(spec.delta, field, wave))
    mean = mean_refocus(src, mirror, pts, spec, wave, scenario.convention)
    header = ["x", "y", "z", "psi_re", "psi_im", "intensity",
              "mean_re", "mean_im", "mean_intensity"]
    cols = [pts[:, 0], pts[:, 1], pts[:, 2], single.psi.real, single.psi.imag,
            single.intensity, mean.psi.real, mean.psi.imag, mean.intensity]
    summary = _common(scenario, wave, spec) + [("mirror_elements", len(mirror)),
                                               ("realization", b.realization)]
    if b.samples:
        mc = mc_refocus(src, mirror, pts, spec, wave, MonteCarloSpec(b.samples, scenario.seed),
                        workers)
        header += ["mc_re", "mc_im", "mc_se", "mc_intensity", "mc_intensity_se"]
        cols += [mc.psi.real, mc.psi.imag, mc.psi_se, mc.intensity, mc.intensity_se]
        summary.append(("samples", b.samples))
    k = int(np.argmax(np.abs(mean.psi)))
    summary += [("peak_x", pts[k, 0]), ("peak_y", pts[k, 1]), ("peak_z", pts[k, 2]),
                ("peak_abs_mean", abs(mean.psi[k]))]
    if cut is not None:
        n = b.eval_n
        offset = len(b.eval_points)
        grid_vals = np.abs(mean.psi[offset:]).reshape(n, n)
        fwhm = spot_fwhm(cut, grid_vals[:, n // 2])
        if np.isfinite(fwhm):
            summary.append(("spot_fwhm_y", fwhm))
    rows = list(zip(*cols))
    return {"refocus.csv": _enc(csv_text(header, rows)), "summary.txt": _enc(summary_text(summary))}


def run_apodize(scenario, workers):
    wave = scenario.wave()
    b = scenario.block
    t = scenario.turbulence
    delta, sigma, slab = 0.0, 0.0, b.slab_counts
    if t is not None:
        delta, sigma = t.delta, t.sigma
    problem = ApodizationProblem(b.a, b.b, b.z, wave, delta, sigma, scenario.convention,
                                 b.pupil_nodes, b.image_nodes, slab, kernel=b.kernel)
    matrix = build_Ks(problem)
    top = solve_concentration(problem, matrix)
    spectrum = concentration_spectrum(matrix)
    files = {}
    rows = [(i, lam) for i, lam in enumerate(spectrum[:b.n_eigen])]
    files["eigenvalues.csv"] = _enc(csv_text(["index", "lambda"], rows))
    pts = problem.pupil.points
    psi = top.pupil_amplitude
    rows = [(p[0], p[1], v.real, v.imag, top.parity) for p, v in zip(pts, psi)]
    files["eigenfunction.csv"] = _enc(csv_text(["x1", "x2", "re", "im", "parity"], rows))
    summary = _common(scenario, wave) + [
        ("kernel", b.kernel), ("bandwidth", problem.bandwidth), ("lambda_max", top.lam),
        ("parity", top.parity), ("degeneracy", top.degeneracy),
        ("hermitian_defect", matrix.hermitian_defect), ("spectrum_min", spectrum[-1]),
        ("cross_term_bound", matrix.cross_term_bound), ("pupil_nodes", pts.shape[0])]
    if b.a == b.b and b.image_nodes == b.pupil_nodes:
        alphas = solve_alpha(problem)[:b.n_eigen]
        rows = [(i, e.alpha.real, e.alpha.imag, e.lam, e.parity) for i, e in enumerate(alphas)]
        files["alpha.csv"] = _enc(csv_text(["index", "re", "im", "abs2", "parity"], rows))
    files["summary.txt"] = _enc(summary_text(summary))
    return files


COMMANDS = {
    "greens": run_greens, "validity": run_validity, "rytov": run_rytov,
    "time-reversal": run_time_reversal, "apodize": run_apodize,
}
