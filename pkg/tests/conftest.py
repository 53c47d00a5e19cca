from datetime import date

import pytest

from sesame import bundled_lines
from sesame.agd_db import Allowlist, build_index
from sesame.classifier import build_training_set, train
from sesame.config import PipelineConfig
from sesame.pipeline import Analyzer
from sesame.zoo import default_registry, families

INDEX_START = date(2025, 1, 1)
INDEX_END = date(2025, 12, 31)


@pytest.fixture(scope="session")
def benign_lines():
    return bundled_lines("benign_domains.txt")


@pytest.fixture(scope="session")
def training_set(benign_lines):
    return build_training_set(families(), benign_lines, per_class_target=2000, seed=0)


@pytest.fixture(scope="session")
def model(training_set):
    return train(training_set)


@pytest.fixture(scope="session")
def known_index():
    return build_index(families(), start=INDEX_START, end=INDEX_END)


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def allowlist():
    return Allowlist(bundled_lines("popular_domains.txt"))


@pytest.fixture(scope="session")
def analyzer(model, known_index, registry, allowlist):
    return Analyzer(model, known_index, registry, PipelineConfig(), allowlist)


# --- acceptance summary -----------------------------------------------------

_ACCEPTANCE: dict[str, list[str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _ACCEPTANCE.setdefault(mark.args[0], []).append("PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0])):
        verdict = "PASS" if all(v == "PASS" for v in _ACCEPTANCE[label]) else "FAIL"
        terminalreporter.write_line(f"{verdict}  {label}")
