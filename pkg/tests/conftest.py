import numpy as np
import pytest

from cqedsim import multilevel as ml


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def odd_preset():
    s = ml.ScsParams.odd(0.0, 5.40e9, 4.73e9, 2.49e9, 0.21e9, 0.11e9, 1.69e9,
                         eta_L=0.92, eta_R=0.913, g0=220e6)
    n = ml.NoiseRates(180e6, {c: (30e6 if c == "24" else 1e6) for c in ml.CHANNELS})
    return s, n


@pytest.fixture(scope="session")
def wigner_sweep():
    """Default-grid anisotropy sweep at lambda_W = 4.46, shared by several tests."""
    from cqedsim.wigner import anisotropy_sweep
    return anisotropy_sweep(4.46, np.round(np.arange(0.70, 1.0001, 0.05), 2), band=(4e9, 8e9))


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
