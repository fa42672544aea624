"""Scenario execution, deterministic output files and the result cache.

Every output file is a pure function of the canonical scenario and the tool
version: numbers are written with 17 significant digits, rows follow input
order and no timestamps are embedded.  Results are cached under the
scenario digest; the cache directory is ``$TURBGREEN_CACHE_DIR`` or
``~/.cache/turbgreen``.
"""

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock

from . import __version__
from .errors import NumericalError
from .scenario import to_mapping

CACHE_ENV = "TURBGREEN_CACHE_DIR"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if not math.isfinite(v):
        raise NumericalError(f"non-finite value {v} in output")
    return "%.17g" % v


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def summary_text(items):
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in items)


@dataclass
class ResultBundle:
    """Output of one scenario run.

    ``files`` maps file names to their exact bytes; ``wall_clock`` is kept
    out of the files so reruns are byte-identical.
    """

    digest: str
    files: dict
    version: str = __version__
    wall_clock: float = 0.0
    cached: bool = False
    summary: dict = field(default_factory=dict)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, data in sorted(self.files.items()):
            (out / name).write_bytes(data)
        return out


def scenario_digest(scenario):
    """sha256 of the canonical scenario (output path excluded) and the tool version."""
    doc = to_mapping(scenario, include_output=False)
    canon = json.dumps({"scenario": doc, "version": __version__}, sort_keys=True,
                       separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def cache_dir():
    root = os.environ.get(CACHE_ENV)
    return Path(root) if root else Path.home() / ".cache" / "turbgreen"


def _load_cached(path):
    manifest = path / "MANIFEST"
    if not manifest.is_file():
        return None
    names = manifest.read_text(encoding="utf-8").split()
    files = {}
    for name in names:
        f = path / name
        if not f.is_file():
            return None
        files[name] = f.read_bytes()
    return files


def _store(path, files):
    path.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (path / name).write_bytes(data)
    # manifest last: its presence marks a complete entry
    (path / "MANIFEST").write_text("\n".join(sorted(files)) + "\n", encoding="utf-8")


def _parse_summary(data):
    out = {}
    for line in data.decode("utf-8").splitlines():
        k, _, v = line.partition(" = ")
        out[k] = v
    return out


def run(scenario, workers=1, use_cache=True):
    """Execute a scenario, consulting and filling the digest cache."""
    from .commands import COMMANDS

    digest = scenario_digest(scenario)
    start = time.perf_counter()
    entry = cache_dir() / digest
    if use_cache:
        entry.parent.mkdir(parents=True, exist_ok=True)
        with FileLock(str(entry) + ".lock"):
            files = _load_cached(entry)
            if files is None:
                files = COMMANDS[scenario.command](scenario, workers)
                _store(entry, files)
                cached = False
            else:
                cached = True
    else:
        files = COMMANDS[scenario.command](scenario, workers)
        cached = False
    summary = _parse_summary(files.get("summary.txt", b""))
    return ResultBundle(digest, files, __version__, time.perf_counter() - start, cached, summary)
