import pytest

# criterion number -> list of (part, passed, detail)
ACCEPTANCE = {}
ACCEPTANCE_TITLES = {
    1: "linesearch exactness on random starts",
    2: "residual monotonicity in the stepsize",
    3: "descent certificates, Methods 1 and 2",
    4: "Fejer / quasi-Fejer certificates",
    5: "1/k rate bound and o(1/k) proxy, Method 1",
    6: "accelerated rate bound, Method 3 beats Method 1",
    7: "linear contraction under strong convexity",
    8: "stepsize floors with known L",
    9: "p-power example (iterates, stepsizes, weak stepsize ratio bound, o(1/k) proxy)",
    10: "residual decay proxy on Method 1 traces",
    11: "oracle accounting in compare runs",
    12: "byte-identical traces for identical configs",
}


@pytest.fixture
def record_criterion():
    def record(number, part, passed, detail=""):
        ACCEPTANCE.setdefault(number, []).append((part, bool(passed), detail))
        print(f"criterion {number} [{part}]: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in ACCEPTANCE_TITLES.items():
        parts = ACCEPTANCE.get(number)
        if not parts:
            terminalreporter.write_line(f"criterion {number:2d}: FAIL  {title} (not run or did not complete)")
            continue
        ok = all(p for _, p, _ in parts)
        failed = [f"{name}: {detail}" for name, p, detail in parts if not p]
        tail = f" -- failed: {'; '.join(failed)}" if failed else ""
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}{tail}")
