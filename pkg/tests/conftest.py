import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def gl_quadrature(a, b, n_panels=32, nodes=48):
    """Composite Gauss-Legendre nodes and weights on [a, b] (test oracle)."""
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * xg).ravel()
    w = (half[:, None] * wg).ravel()
    return x, w


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when != "call" and report.passed:
        return
    n, title = marker.args
    entry = _ACCEPTANCE.setdefault(n, {"title": title, "checks": {}})
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
    # a failing setup or teardown overrides a passing call
    prev = entry["checks"].get(item.name)
    if prev is None or prev[0] == "PASS":
        entry["checks"][item.name] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[n]
        statuses = [s for s, _ in entry["checks"].values()]
        if "FAIL" in statuses:
            verdict = "FAIL"
        elif all(s == "SKIP" for s in statuses):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        ok = statuses.count("PASS")
        tr.write_line(f"[PRIMARY] criterion {n}: {verdict}  {entry['title']} "
                      f"({ok}/{len(statuses)} checks passed)")
        for name, (status, detail) in entry["checks"].items():
            tr.write_line(f"    {status:<4} {name}" + (f"  [{detail}]" if detail else ""))
