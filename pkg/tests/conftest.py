import pytest

import synth
from roadcorpus.ingest import parse_extract
from roadcorpus.network import build_network


@pytest.fixture(scope="session")
def grid_osm(tmp_path_factory):
    path = tmp_path_factory.mktemp("osm") / "grid.osm"
    path.write_bytes(synth.grid_city_xml())
    return path


@pytest.fixture(scope="session")
def grid_parsed(grid_osm):
    return parse_extract(grid_osm)


@pytest.fixture(scope="session")
def grid_net(grid_parsed):
    nodes, ways, stats = grid_parsed
    return build_network(nodes, ways, stats.bounds, city="Gridton", source_sha256=stats.sha256)


# -- acceptance summary ---------------------------------------------------------

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call") or (rep.when == "setup" and rep.passed):
        return
    num, title = mark.args
    prev = _criteria.get(num, (title, True))
    _criteria[num] = (title, prev[1] and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, ok = _criteria[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {title}")
