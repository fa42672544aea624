"""Scenario documents: parsing, validation and canonical serialization.

A scenario is a YAML mapping with top-level keys ``command``, ``wave``,
``convention``, ``seed``, ``output``, an optional ``turbulence`` block and
one block named after the command.  Unknown keys are rejected.  All
defaults are filled in at parse time, so ``serialize`` followed by
``parse_scenario`` reproduces an equal ``Scenario``.
"""

import dataclasses
import math
import re
from dataclasses import dataclass, fields

import yaml

from .errors import ConfigError
from .apodization import KERNELS
from .quadrature import RULES
from .rytov import BACKGROUNDS, CONVENTIONS
from .turbulence import NAMED_PROFILES, WaveParams

COMMANDS = ("greens", "validity", "rytov", "time-reversal", "apodize")

# Target delta^2 sigma^2 k0^4 L when sigma is omitted.
DEFAULT_STRENGTH = 0.01


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot, such as ``1e-6``."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                |[-+]?\.(?:inf|Inf|INF)
                |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def _where(path, msg):
    return ConfigError(f"{path}: {msg}")


def _float(v, path, positive=False, nonneg=False, allow_inf=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _where(path, f"expected a number, got {v!r}")
    v = float(v)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise _where(path, f"must be finite, got {v}")
    if positive and not v > 0:
        raise _where(path, f"must be positive, got {v}")
    if nonneg and v < 0:
        raise _where(path, f"must be non-negative, got {v}")
    return v


def _int(v, path, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise _where(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise _where(path, f"must be >= {minimum}, got {v}")
    return v


def _choice(v, path, options):
    if v not in options:
        raise _where(path, f"{v!r} is not one of {list(options)}")
    return v


def _point(v, path):
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise _where(path, f"expected [x, y, z], got {v!r}")
    return tuple(_float(c, f"{path}[{i}]") for i, c in enumerate(v))


def _points(v, path, nonempty=True):
    if not isinstance(v, (list, tuple)) or (nonempty and not v):
        raise _where(path, "expected a non-empty list of [x, y, z] points")
    return tuple(_point(p, f"{path}[{i}]") for i, p in enumerate(v))


def _ints(v, path, n, minimum=1):
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise _where(path, f"expected {n} integers, got {v!r}")
    return tuple(_int(c, f"{path}[{i}]", minimum) for i, c in enumerate(v))


def _mapping(v, path):
    if not isinstance(v, dict):
        raise _where(path, f"expected a mapping, got {type(v).__name__}")
    return v


def _check_keys(d, allowed, path):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise _where(path, f"unknown keys {unknown}")


def _require(d, key, path):
    if key not in d:
        raise _where(path, f"missing required key {key!r}")
    return d[key]


@dataclass(frozen=True)
class TurbulenceBlock:
    delta: float
    sigma: float
    box: tuple
    counts: tuple
    rule: str = "midpoint"
    exclusion_radius: float = None


@dataclass(frozen=True)
class GreensBlock:
    source: tuple
    points: tuple


@dataclass(frozen=True)
class ValidityBlock:
    lengths: tuple
    profile: str = "typical-ground"
    cn: float = None
    profile_file: str = None
    nodes: int = 32


@dataclass(frozen=True)
class RytovBlock:
    quantity: str
    points: tuple
    background: str = "plane_wave"
    alpha: float = None
    background_source: tuple = None
    source: tuple = None
    realization: int = 0
    samples: int = 0


@dataclass(frozen=True)
class TimeReversalBlock:
    source: tuple
    amplitude: float = 1.0
    mirror_half_width: float = None
    mirror_n: int = 1
    eval_points: tuple = ()
    eval_half_width: float = None
    eval_n: int = 0
    realization: int = 0
    samples: int = 0


@dataclass(frozen=True)
class ApodizeBlock:
    a: float
    b: float
    z: float
    pupil_nodes: tuple = (24, 24)
    image_nodes: tuple = None
    kernel: str = "spherical"
    slab_counts: tuple = (16, 8, 8)
    n_eigen: int = 10


@dataclass(frozen=True)
class Scenario:
    command: str
    wavelength: float
    block: object
    turbulence: TurbulenceBlock = None
    convention: str = "gaussian"
    seed: int = 0
    output: str = None

    def wave(self):
        return WaveParams(self.wavelength)


RYTOV_QUANTITIES = ("phi1", "phi1-parabolic", "green", "parabolic-green")
_NEEDS_TURBULENCE = ("rytov", "time-reversal")


def _parse_wave(d):
    d = _mapping(d, "wave")
    _check_keys(d, ("wavelength", "wavenumber"), "wave")
    if ("wavelength" in d) == ("wavenumber" in d):
        raise _where("wave", "give exactly one of 'wavelength' (m) or 'wavenumber' (1/m)")
    if "wavelength" in d:
        return _float(d["wavelength"], "wave.wavelength", positive=True, allow_inf=True)
    k = _float(d["wavenumber"], "wave.wavenumber", nonneg=True)
    return math.inf if k == 0 else 2.0 * math.pi / k


def _parse_turbulence(d, wavelength):
    path = "turbulence"
    d = _mapping(d, path)
    _check_keys(d, ("delta", "sigma", "box", "counts", "rule", "exclusion_radius"), path)
    box = _require(d, "box", path)
    if not isinstance(box, (list, tuple)) or len(box) != 3:
        raise _where(f"{path}.box", "expected three [lo, hi] pairs")
    pairs = []
    for i, iv in enumerate(box):
        if not isinstance(iv, (list, tuple)) or len(iv) != 2:
            raise _where(f"{path}.box[{i}]", "expected [lo, hi]")
        lo, hi = (_float(c, f"{path}.box[{i}]") for c in iv)
        if not hi > lo:
            raise _where(f"{path}.box[{i}]", "upper bound must exceed lower bound")
        pairs.append((lo, hi))
    counts = _ints(_require(d, "counts", path), f"{path}.counts", 3)
    delta = _float(d.get("delta", 0.0), f"{path}.delta", nonneg=True)
    if d.get("sigma") is not None:
        sigma = _float(d["sigma"], f"{path}.sigma", nonneg=True)
    elif delta == 0 or math.isinf(wavelength):
        sigma = 0.0
    else:
        k = 2.0 * math.pi / wavelength
        diag = math.sqrt(sum((hi - lo) ** 2 for lo, hi in pairs))
        sigma = math.sqrt(DEFAULT_STRENGTH / (delta ** 2 * k ** 4 * diag))
    rule = _choice(d.get("rule", "midpoint"), f"{path}.rule", RULES)
    excl = d.get("exclusion_radius")
    if excl is not None:
        excl = _float(excl, f"{path}.exclusion_radius", nonneg=True)
    return TurbulenceBlock(delta, sigma, tuple(pairs), counts, rule, excl)


def _parse_greens(d, path):
    _check_keys(d, ("source", "points"), path)
    return GreensBlock(_point(_require(d, "source", path), f"{path}.source"),
                       _points(_require(d, "points", path), f"{path}.points"))


def _parse_validity(d, path):
    _check_keys(d, ("lengths", "log_range", "profile", "cn", "profile_file", "nodes"), path)
    if ("lengths" in d) == ("log_range" in d):
        raise _where(path, "give exactly one of 'lengths' or 'log_range'")
    if "lengths" in d:
        v = d["lengths"]
        if not isinstance(v, (list, tuple)) or not v:
            raise _where(f"{path}.lengths", "expected a non-empty list of path lengths (m)")
        lengths = tuple(_float(x, f"{path}.lengths[{i}]", positive=True) for i, x in enumerate(v))
    else:
        v = d["log_range"]
        if not isinstance(v, (list, tuple)) or len(v) != 3:
            raise _where(f"{path}.log_range", "expected [start_m, stop_m, count]")
        lo = _float(v[0], f"{path}.log_range[0]", positive=True)
        hi = _float(v[1], f"{path}.log_range[1]", positive=True)
        n = _int(v[2], f"{path}.log_range[2]", 1)
        if n == 1:
            lengths = (lo,)
        else:
            step = math.log(hi / lo) / (n - 1)
            lengths = tuple([lo] + [lo * math.exp(step * i) for i in range(1, n - 1)] + [hi])
    profile = _choice(d.get("profile", "typical-ground"), f"{path}.profile",
                      tuple(NAMED_PROFILES) + ("constant", "file"))
    cn = d.get("cn")
    if profile == "constant":
        cn = _float(_require(d, "cn", path), f"{path}.cn", nonneg=True)
    elif cn is not None:
        raise _where(f"{path}.cn", "only used with profile: constant")
    pfile = d.get("profile_file")
    if profile == "file":
        pfile = str(_require(d, "profile_file", path))
    elif pfile is not None:
        raise _where(f"{path}.profile_file", "only used with profile: file")
    nodes = _int(d.get("nodes", 32), f"{path}.nodes", 2)
    return ValidityBlock(lengths, profile, cn, pfile, nodes)


def _parse_rytov(d, path):
    _check_keys(d, ("quantity", "points", "background", "alpha", "background_source",
                    "source", "realization", "samples"), path)
    quantity = _choice(_require(d, "quantity", path), f"{path}.quantity", RYTOV_QUANTITIES)
    points = _points(_require(d, "points", path), f"{path}.points")
    background = _choice(d.get("background", "plane_wave"), f"{path}.background", BACKGROUNDS)
    alpha = d.get("alpha")
    if background == "beam_wave":
        alpha = _float(_require(d, "alpha", path), f"{path}.alpha", positive=True)
    elif alpha is not None:
        raise _where(f"{path}.alpha", "only used with background: beam_wave")
    bsrc = d.get("background_source")
    if background == "point_source":
        bsrc = _point(_require(d, "background_source", path), f"{path}.background_source")
    elif bsrc is not None:
        raise _where(f"{path}.background_source", "only used with background: point_source")
    src = d.get("source")
    if quantity in ("green", "parabolic-green"):
        src = _point(_require(d, "source", path), f"{path}.source")
    elif src is not None:
        raise _where(f"{path}.source", f"not used by quantity {quantity!r}")
    realization = _int(d.get("realization", 0), f"{path}.realization", 0)
    samples = _int(d.get("samples", 0), f"{path}.samples", 0)
    if samples == 1:
        raise _where(f"{path}.samples", "Monte Carlo needs at least 2 samples (0 disables it)")
    return RytovBlock(quantity, points, background, alpha, bsrc, src, realization, samples)


def _parse_time_reversal(d, path):
    _check_keys(d, ("source", "amplitude", "mirror_half_width", "mirror_n", "eval_points",
                    "eval_half_width", "eval_n", "realization", "samples"), path)
    src = _point(_require(d, "source", path), f"{path}.source")
    amp = _float(d.get("amplitude", 1.0), f"{path}.amplitude")
    mhw = d.get("mirror_half_width")
    mn = _int(d.get("mirror_n", 1), f"{path}.mirror_n", 1)
    if mhw is not None:
        mhw = _float(mhw, f"{path}.mirror_half_width", positive=True)
    elif mn != 1:
        raise _where(f"{path}.mirror_n", "a pixel mirror needs mirror_half_width")
    pts = _points(d["eval_points"], f"{path}.eval_points") if "eval_points" in d else ()
    ehw = d.get("eval_half_width")
    en = _int(d.get("eval_n", 0), f"{path}.eval_n", 0)
    if ehw is not None:
        ehw = _float(ehw, f"{path}.eval_half_width", positive=True)
        if en < 2:
            raise _where(f"{path}.eval_n", "an evaluation grid needs eval_n >= 2")
    elif en:
        raise _where(f"{path}.eval_n", "an evaluation grid needs eval_half_width")
    if not pts and ehw is None:
        raise _where(path, "give eval_points or an evaluation grid (eval_half_width, eval_n)")
    realization = _int(d.get("realization", 0), f"{path}.realization", 0)
    samples = _int(d.get("samples", 0), f"{path}.samples", 0)
    if samples == 1:
        raise _where(f"{path}.samples", "Monte Carlo needs at least 2 samples (0 disables it)")
    return TimeReversalBlock(src, amp, mhw, mn, pts, ehw, en, realization, samples)


def _parse_apodize(d, path):
    _check_keys(d, ("a", "b", "z", "pupil_nodes", "image_nodes", "kernel", "slab_counts",
                    "n_eigen"), path)
    a = _float(_require(d, "a", path), f"{path}.a", positive=True)
    b = _float(_require(d, "b", path), f"{path}.b", positive=True)
    z = _float(_require(d, "z", path), f"{path}.z", positive=True)
    pupil = _ints(d.get("pupil_nodes", [24, 24]), f"{path}.pupil_nodes", 2)
    image = d.get("image_nodes")
    image = pupil if image is None else _ints(image, f"{path}.image_nodes", 2)
    for name, nodes in (("pupil_nodes", pupil), ("image_nodes", image)):
        if nodes[1] % 2:
            raise _where(f"{path}.{name}", "angular node count must be even")
    kernel = _choice(d.get("kernel", "spherical"), f"{path}.kernel", KERNELS)
    slab = _ints(d.get("slab_counts", [16, 8, 8]), f"{path}.slab_counts", 3)
    n_eigen = _int(d.get("n_eigen", 10), f"{path}.n_eigen", 1)
    return ApodizeBlock(a, b, z, pupil, image, kernel, slab, n_eigen)


_PARSERS = {
    "greens": _parse_greens, "validity": _parse_validity, "rytov": _parse_rytov,
    "time-reversal": _parse_time_reversal, "apodize": _parse_apodize,
}


def from_mapping(doc):
    """Validate a loaded document and build a ``Scenario``."""
    doc = _mapping(doc, "scenario")
    command = _choice(_require(doc, "command", "scenario"), "command", COMMANDS)
    _check_keys(doc, ("command", "wave", "convention", "seed", "output", "turbulence", command),
                "scenario")
    wavelength = _parse_wave(_require(doc, "wave", "scenario"))
    convention = _choice(doc.get("convention", "gaussian"), "convention", CONVENTIONS)
    seed = _int(doc.get("seed", 0), "seed", 0)
    if seed >= 2 ** 64:
        raise _where("seed", "must fit in 64 bits")
    output = doc.get("output")
    output = None if output is None else str(output)
    turbulence = None
    if doc.get("turbulence") is not None:
        turbulence = _parse_turbulence(doc["turbulence"], wavelength)
    elif command in _NEEDS_TURBULENCE:
        raise _where("scenario", f"command {command!r} needs a 'turbulence' block")
    if command not in doc:
        raise _where("scenario", f"missing required block {command!r}")
    block = _PARSERS[command](_mapping(doc[command], command), command)
    return Scenario(command, wavelength, block, turbulence, convention, seed, output)


def parse_scenario(text):
    """Parse a YAML scenario document."""
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed scenario document: {exc}") from exc
    return from_mapping(doc)


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _block_dict(block):
    out = {}
    for f in fields(block):
        v = getattr(block, f.name)
        if v is None or v == ():
            continue
        out[f.name] = _plain(v)
    return out


def to_mapping(scenario, include_output=True):
    doc = {"command": scenario.command, "wave": {"wavelength": scenario.wavelength},
           "convention": scenario.convention, "seed": scenario.seed}
    if include_output and scenario.output is not None:
        doc["output"] = scenario.output
    if scenario.turbulence is not None:
        doc["turbulence"] = _block_dict(scenario.turbulence)
    doc[scenario.command] = _block_dict(scenario.block)
    return doc


def serialize(scenario):
    """Canonical YAML text; ``parse_scenario(serialize(s)) == s``."""
    return yaml.safe_dump(to_mapping(scenario), sort_keys=True, default_flow_style=None)


def with_overrides(scenario, seed=None, convention=None, output=None):
    changes = {}
    if seed is not None:
        changes["seed"] = _int(seed, "--seed", 0)
    if convention is not None:
        changes["convention"] = _choice(convention, "--convention", CONVENTIONS)
    if output is not None:
        changes["output"] = str(output)
    return dataclasses.replace(scenario, **changes)
