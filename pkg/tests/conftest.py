import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


class FakeNet:
    """Records what a ClusterAgent asks of the network; nothing is delivered."""

    def __init__(self, connectivity=None):
        self.now = 0.0
        self.floods = []
        self.unicasts = []
        self.timers = []
        self.role_changes = []
        self._conn = connectivity or {}

    def flood(self, node, msg):
        self.floods.append((node, msg))

    def unicast(self, node, dest, msg):
        self.unicasts.append((node, dest, msg))

    def set_timer(self, node, delay, kind, group, token):
        self.timers.append((self.now + delay, kind, token))

    def connectivity(self, node):
        return self._conn.get(node, 0)

    def role_changed(self, node, group, old, new):
        self.role_changes.append((self.now, node, old, new))

    def fire(self, agent, kind):
        """Fire the latest armed timer of ``kind`` at its due time."""
        due, _, token = [t for t in self.timers if t[1] == kind][-1]
        self.now = max(self.now, due)
        agent.on_timer(kind, token)


@pytest.fixture
def fake_net():
    return FakeNet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_sweep(tmp_path_factory):
    """The full default sweep, run once per session: (rows, output directory)."""
    from aamrp.cli import run_sweep
    from aamrp.scenario import ScenarioFile

    out = tmp_path_factory.mktemp("default_sweep")
    rows = run_sweep(ScenarioFile(), out, jobs=1)
    return rows, out


@pytest.fixture(scope="session")
def sweep_means(default_sweep):
    """Mean rows of the default sweep keyed by (protocol, n_nodes, group_size)."""
    from aamrp.metrics import aggregate

    rows, _ = default_sweep
    return {(r.protocol, r.n_nodes, r.group_size): r.mean() for r in aggregate(rows)}


_CRITERIA: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        mark = report.user_properties and dict(report.user_properties).get("criterion")
        if mark:
            num, title = mark
            ok = report.outcome == "passed"
            prev = _CRITERIA.get(num)
            _CRITERIA[num] = (title, ok and (prev is None or prev[1]))


def pytest_collection_modifyitems(items):
    for item in items:
        if {"default_sweep", "sweep_means"} & set(getattr(item, "fixturenames", ())):
            item.add_marker(pytest.mark.slow)
        m = item.get_closest_marker("criterion")
        if m:
            item.user_properties.append(("criterion", m.args))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}")
