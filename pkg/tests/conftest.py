import shutil
from pathlib import Path

import pytest

from intopt.ir import load_ir
from intopt.toolchain import ToolchainConfig

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def toolchain() -> ToolchainConfig:
    return ToolchainConfig()


@pytest.fixture(scope="session")
def llvm_tree() -> Path:
    return FIXTURES / "llvm"


@pytest.fixture(scope="session")
def docs_text() -> str:
    return (FIXTURES / "llvm" / "llvm" / "docs" / "Passes.rst").read_text()


@pytest.fixture
def sum_squares():
    return load_ir(FIXTURES / "ir" / "sum_squares.ll")


@pytest.fixture
def bit_count():
    return load_ir(FIXTURES / "ir" / "bit_count.ll")


@pytest.fixture
def halve_pair():
    from intopt.ir import IrPair

    return IrPair(
        unopt=load_ir(FIXTURES / "ir" / "halve_unopt.ll"),
        opt=load_ir(FIXTURES / "ir" / "halve_divergent.ll"),
    )


def fuzz2bench_path() -> Path | None:
    local = Path(__file__).parent.parent / "benchtool" / "build" / "fuzz2bench"
    if local.is_file():
        return local
    found = shutil.which("fuzz2bench")
    return Path(found) if found else None


@pytest.fixture(scope="session")
def fuzz2bench():
    path = fuzz2bench_path()
    if path is None:
        pytest.skip("fuzz2bench binary not built (run cmake in benchtool/)")
    return path


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, after the run."""
    import sys

    lines = []
    for name, module in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance":
            lines = getattr(module, "CRITERION_LINES", [])
            if lines:
                break
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
