import numpy as np
import pytest

from fairtax.firm import FirmSpec, PriceGrid, default_firms
from fairtax.market import ConsumerGroup


@pytest.fixture
def firms():
    return default_firms()


@pytest.fixture
def firm_map(firms):
    return {f.id: f for f in firms}


@pytest.fixture
def grid():
    return PriceGrid()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def twin_firm():
    g = ConsumerGroup(-1.5, 6.0)
    return FirmSpec("T", g, g)


# -- acceptance ledger --------------------------------------------------------------

ACCEPTANCE: dict[str, list[tuple[str, bool, str]]] = {}


def record(criterion: str, check: str, ok: bool, detail: str = "") -> bool:
    """Log one acceptance sub-check; the summary prints one line per criterion."""
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(ok), detail))
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion} {check}: {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        checks = ACCEPTANCE[criterion]
        ok = all(c[1] for c in checks)
        failed = [f"{name} ({detail})" for name, good, detail in checks if not good]
        passed = "; ".join(f"{name} {detail}".strip() for name, good, detail in checks if good)
        line = f"{'PASS' if ok else 'FAIL'} {criterion}: {passed}"
        if failed:
            line += " | failed: " + "; ".join(failed)
        tr.write_line(line)
