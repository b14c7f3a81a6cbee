import sys

import pytest

from rdfload import _accel, dataset, ntriples
from rdfload.store import reference

BACKENDS = _accel.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run a test against each available kernel backend."""
    k = BACKENDS[request.param]
    for mod in (ntriples, dataset, reference):
        monkeypatch.setattr(mod, "kernels", k)
    return k


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, (status, title) in sorted(mod.RESULTS.items()):
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {title}")
