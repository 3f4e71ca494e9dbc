import contextlib

import numpy as np
import pytest

from outlier_hst import hst as hst_mod
from outlier_hst import rounding


class HstRegistry:
    """Validates every HstEmbedding constructed during the run."""

    def __init__(self):
        self.count = 0
        self.failures = []
        self.exempt_depth = 0

    def check(self, e):
        if self.exempt_depth:
            return
        self.count += 1
        bad = hst_mod.validate_hst(e.tree)
        if bad:
            self.failures.append((repr(e), bad[0].kind))
            return
        pts = e.points
        if len(pts) > 2 and not hst_mod.is_ultrametric(e.distance_matrix(pts)):
            self.failures.append((repr(e), "not ultrametric"))

    @contextlib.contextmanager
    def exempt(self):
        self.exempt_depth += 1
        try:
            yield
        finally:
            self.exempt_depth -= 1


REGISTRY = HstRegistry()
OUTLIER_RUNS = []  # every OutlierResult built during the run
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session", autouse=True)
def _track_hsts():
    original = hst_mod.HstEmbedding.__init__

    def init(self, metric, tree):
        original(self, metric, tree)
        REGISTRY.check(self)

    hst_mod.HstEmbedding.__init__ = init
    result_init = rounding.OutlierResult.__init__

    def record(self, *args, **kwargs):
        result_init(self, *args, **kwargs)
        OUTLIER_RUNS.append(self)

    rounding.OutlierResult.__init__ = record
    yield REGISTRY
    hst_mod.HstEmbedding.__init__ = original
    rounding.OutlierResult.__init__ = result_init


@pytest.fixture
def registry():
    return REGISTRY


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_collection_modifyitems(session, config, items):
    # the acceptance suite goes last so the structural criterion sees every tree
    items.sort(key=lambda it: it.module.__name__.endswith("test_acceptance"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
