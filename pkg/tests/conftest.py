import csv
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ci", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def _write(path, X, y, names):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"])
        for row, label in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


@pytest.fixture(scope="session")
def uci_csv(tmp_path_factory):
    """CSV exports of the wine, breast-cancer and digits datasets."""
    datasets = pytest.importorskip("sklearn.datasets")
    out = tmp_path_factory.mktemp("uci")
    paths = {}
    for name, loader in (
        ("wine", datasets.load_wine),
        ("breast_cancer", datasets.load_breast_cancer),
        ("digits", datasets.load_digits),
    ):
        bunch = loader()
        p = out / f"{name}.csv"
        _write(p, bunch.data, bunch.target, [f"x{i}" for i in range(bunch.data.shape[1])])
        paths[name] = str(p)
    return paths


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def report(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
        print(line)
        _ACCEPTANCE.append((number, line))
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
