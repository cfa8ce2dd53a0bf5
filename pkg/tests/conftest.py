"""Shared instances for the test suite."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from fcl import metricfile
from fcl.kropina import KropinaMetric
from fcl.riemann import MetricField, OneFormField, RiemannianSpace

DATA = Path(metricfile.__file__).parent / "data"


def data_file(name: str) -> Path:
    return DATA / f"{name}.fcl"


def load_space(name: str):
    return metricfile.load(data_file(name)).space()


def flat_kropina(m: float, b=("1.2", "1.6"), n: int = 2) -> KropinaMetric:
    eye = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
    return KropinaMetric(MetricField.from_matrix(eye), OneFormField.from_strings(b), m)


def sphere(radius: float = 1.0) -> RiemannianSpace:
    r2 = repr(radius * radius)
    return RiemannianSpace(MetricField.diagonal([r2, f"{r2}*sin(x1)^2"]))


def random_fields(seed: int, n: int) -> tuple[MetricField, OneFormField]:
    """Smooth, diagonally dominant metric and a 1-form bounded away from 0."""
    rng = np.random.default_rng(seed)

    def c(lo, hi):
        return f"{rng.uniform(lo, hi):.4f}"

    rows = [["0"] * n for _ in range(n)]
    for i in range(n):
        j = (i + 1) % n
        rows[i][i] = f"{c(1.0, 1.5)} + {c(-0.3, 0.3)}*sin({c(0.5, 1.5)}*x{i + 1} + {c(-1, 1)}*x{j + 1})"
        for k in range(i + 1, n):
            rows[i][k] = rows[k][i] = f"{c(-0.1, 0.1)}*cos(x{i + 1} - {c(0, 1)}*x{k + 1})"
    b = [f"{c(0.8, 1.5)} + {c(-0.3, 0.3)}*cos({c(0.5, 1.5)}*x{(i + 1) % n + 1})" for i in range(n)]
    return MetricField.from_matrix(rows), OneFormField.from_strings(b)


def random_kropina(seed: int, n: int, m: float) -> KropinaMetric:
    M, b = random_fields(seed, n)
    return KropinaMetric(M, b, m)


def random_tangent(space: KropinaMetric, rng, box: float = 1.0, window=(0.2, 0.9)):
    """A point of ``[-box, box]^n`` and a direction with ``s / b`` inside ``window``."""
    n = space.n
    while True:
        x = rng.uniform(-box, box, size=n)
        y = rng.normal(size=n)
        y /= np.linalg.norm(y)
        alpha, beta, bsq = space.alpha_beta(x, y)
        if beta < 0:
            y, beta = -y, -beta
        ratio = beta / alpha / math.sqrt(bsq)
        denom = (beta / alpha) ** 2 * (1 - space.m) + space.m * bsq
        if window[0] < ratio < window[1] and abs(denom) > 0.1 * bsq:
            return x, y


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# -- acceptance reporting ------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        previous = _CRITERIA.get(number, ("PASS", title))[0]
        status = "PASS" if rep.passed and previous == "PASS" else "FAIL"
        _CRITERIA[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
