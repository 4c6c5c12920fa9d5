import numpy as np
import pytest

from binary_iop.grid_pde import GridSpec, ModelParams
from binary_iop.inference import PosteriorSpec, PriorBox, calibrate_sigma_eps
from binary_iop.synthetic import NoiseSpec, generate

# criterion number -> list of (part, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[num]
        verdict = "PASS" if all(p[1] for p in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {verdict}")
        for part, ok, detail in parts:
            terminalreporter.write_line(f"    [{'ok' if ok else 'FAIL'}] {part}: {detail}")


@pytest.fixture(scope="session")
def grid():
    return GridSpec()


@pytest.fixture(scope="session")
def truth1():
    return ModelParams(1.0, 0.0, 0.0, 1.0, 0.05)


@pytest.fixture(scope="session")
def example1_spec(grid, truth1):
    ms = generate(truth1, grid)
    return PosteriorSpec(ms.observed(), grid, truth1.r, PriorBox(), calibrate_sigma_eps(ms.values, 0.0))


def make_spec(family="identity", level=0.0, seed=0, grid=None):
    grid = grid or GridSpec()
    if family == "identity":
        truth, drift = ModelParams(1.0, 0.0, 0.0, 1.0, 0.05), None
    else:
        truth, drift = ModelParams(1.0, 0.0, -1.0 / 6.0, 1.0, 0.05), np.sin
    ms = generate(truth, grid, noise=NoiseSpec(level, seed), drift=drift)
    return PosteriorSpec(ms.observed(), grid, truth.r, PriorBox(), calibrate_sigma_eps(ms.values, level))
