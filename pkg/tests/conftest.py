import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from artifact.env import FieldSpec, generate_field, inject_field  # noqa: E402


def small_random_field(rng, n_levels=3, n_nodes=8, level_min=0):
    """Injected random-walk field on an integer grid with 0 as the first node."""
    spec = FieldSpec(level_min, level_min + n_levels - 1, -1.0, float(n_nodes - 2), 1.0)
    vals = np.cumsum(rng.standard_normal((n_levels, spec.n_nodes)), axis=1)
    vals -= vals[:, [spec.zero_index]]
    return inject_field(spec, vals)


def linear_field(spec):
    return inject_field(spec, np.tile(spec.times, (spec.n_levels, 1)))


def zero_field(spec):
    return inject_field(spec, np.zeros((spec.n_levels, spec.n_nodes)))


@pytest.fixture(scope="session")
def field_mid():
    """Seeded field big enough for horizon 200 pipelines."""
    return generate_field(FieldSpec(0, 200, -20, 300, 0.1, seed=3))


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Print and keep one pass/fail line per acceptance criterion."""
    def emit(number, name, ok, detail, status=None):
        status = status or ("PASS" if ok else "FAIL")
        line = f"[{status}] criterion {str(number):>3} {name}: {detail}"
        print(line)
        request.config.stash[_VERDICTS].append(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
