from pathlib import Path

import pytest

from maqa.model import MABuilder

DATA = Path(__file__).parent / "data"


def two_mec_model():
    """Two-MEC example: S1 = {s1..s4}, S2 = {s5}, goal s2."""
    b = MABuilder()
    s = {f"s{i}": b.state(f"s{i}") for i in range(6)}
    b.add_rate(s["s0"], s["s1"], 2.0)
    b.add_probabilistic(s["s1"], "alpha", {s["s3"]: 0.6, s["s2"]: 0.4})
    b.add_probabilistic(s["s3"], "alpha", {s["s5"]: 1.0})
    b.add_probabilistic(s["s3"], "beta", {s["s4"]: 1.0})
    b.add_rate(s["s5"], s["s5"], 1.0)
    b.add_rate(s["s4"], s["s2"], 3.0)
    b.add_rate(s["s2"], s["s1"], 1.0)
    b.label("goal", s["s2"])
    return b.build()


@pytest.fixture
def two_mec():
    return two_mec_model()


@pytest.fixture
def confused_ma_text():
    return (DATA / "confused.ma").read_text()


@pytest.fixture
def confused_gspn_text():
    return (DATA / "confused.gspn").read_text()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line and return whether it passed."""

    def emit(criterion: str, what: str, got, want, tol: float, ok: bool | None = None) -> bool:
        if ok is None:
            ok = got is not None and abs(got - want) <= tol
        shown = f"{got:.6g}" if isinstance(got, float) else str(got)
        spread = f" +/- {tol:g}" if tol else ""
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {what} = {shown} (expected {want}{spread})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
