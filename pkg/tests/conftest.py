import os

import pytest
from hypothesis import HealthCheck, settings

from i2iaug.data import Dataset, Interaction, chronological_split
from i2iaug.synthetic import planted_clusters

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_dataset(rows, **kw):
    """rows: (user, item, timestamp) triples, all clicks."""
    return Dataset.from_interactions([Interaction(u, i, t, "click") for u, i, t in rows], **kw)


@pytest.fixture(scope="session")
def small_planted():
    return planted_clusters(n_users=300, n_items=60, n_clusters=3, min_history=4,
                            max_history=8, seed=3)


@pytest.fixture(scope="session")
def small_split(small_planted):
    return chronological_split(small_planted.dataset)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
