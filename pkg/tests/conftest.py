import pytest

from turbgreen.quadrature import build_grid
from turbgreen.turbulence import TurbulenceSpec, WaveParams


@pytest.fixture(scope="session")
def wave():
    return WaveParams(1.0)


@pytest.fixture(scope="session")
def slab16():
    """4 m path with a 2 m x 2 m cross-section, 16^3 cells."""
    return build_grid([(0.0, 4.0), (-1.0, 1.0), (-1.0, 1.0)], (16, 16, 16))


@pytest.fixture(scope="session")
def slab8():
    return build_grid([(0.0, 4.0), (-1.0, 1.0), (-1.0, 1.0)], (8, 8, 8))


@pytest.fixture(scope="session")
def spec16(slab16):
    return TurbulenceSpec(delta=0.01, sigma=0.5, grid=slab16, seed=11)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("TURBGREEN_CACHE_DIR", str(tmp_path / "cache"))


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])
