import pytest

from onlinefwer import _pykernels
from onlinefwer.kernels import compiled_backend

ACCEPTANCE_LINES: list[str] = []

_backends = [pytest.param(_pykernels, id="python")]
if compiled_backend is not None:
    _backends.append(pytest.param(compiled_backend, id="cython"))


@pytest.fixture(params=_backends)
def kernel_backend(request):
    return request.param


@pytest.fixture
def use_backend(monkeypatch, kernel_backend):
    """Route procedure batch evaluation through one specific backend."""
    from onlinefwer import kernels

    for name in ("adaptive_spending", "geometric", "graph", "spending"):
        monkeypatch.setattr(kernels, name, getattr(kernel_backend, name))
    return kernel_backend


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
