import numpy as np
import pytest

from cpcsim import _kernels_py
from cpcsim.agent import AgentState
from cpcsim.probkernels import GaussCatHyper

try:
    from cpcsim import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_line():
    def _report(name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {name} {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _report


BACKENDS = [pytest.param(_kernels_py, id="python")]
if _kernels_c is not None:
    BACKENDS.append(pytest.param(_kernels_c, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_agent(means, precisions, phi_counts, assignments=None, alpha=1.0, k=0):
    means = np.atleast_2d(np.asarray(means, dtype=float))
    precisions = np.atleast_2d(np.asarray(precisions, dtype=float))
    phi = np.asarray(phi_counts, dtype=np.int64)
    w, z = phi.shape
    d = 1 if assignments is None else len(assignments)
    return AgentState(
        agent_id=k,
        assignments=np.zeros(d, dtype=np.int64) if assignments is None
        else np.asarray(assignments, dtype=np.int64),
        means=means,
        precisions=precisions,
        phi_counts=phi,
        hyper=GaussCatHyper(dirichlet_alpha=alpha, num_signs=w, num_categories=z),
        prior_mean=np.zeros(means.shape[1]),
    )
