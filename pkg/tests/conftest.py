from __future__ import annotations

from pathlib import Path

import pytest

from nlogflow.composer import load_workflow
from nlogflow.executor import load_manifest
from nlogflow.mockserv import load_mock_config, serve
from nlogflow.ontology import load_ontology
from nlogflow.semodel import parse_annotation

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

DS = "http://localhost/dataset-owl-lite.owl#"
DP = "http://localhost/data-processing-owl-lite.owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"
NS = "http://i3s.cnrs.fr/jigsaw"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def onto():
    return load_ontology(fixture_text("onto.nlg"), "onto.nlg")


@pytest.fixture
def pipeline():
    return load_workflow(FIXTURES / "pipeline.wf")


@pytest.fixture
def test1():
    return parse_annotation(fixture_text("test1.svc"), "test1.svc")


@pytest.fixture
def test2():
    return parse_annotation(fixture_text("test2.svc"), "test2.svc")


@pytest.fixture
def manifest():
    return load_manifest(fixture_text("manifest.txt"))


def start_mocks(**overrides_by_service):
    handles = {}
    for svc, name in (("ex001", "test1.mock"), ("ex002", "test2.mock")):
        cfg = load_mock_config(fixture_text(name), name, **overrides_by_service.get(svc, {}))
        handles[svc] = serve(cfg)
    return handles


@pytest.fixture
def mocks():
    handles = start_mocks()
    yield handles
    for h in handles.values():
        h.shutdown()


def write_endpoints(path: Path, handles) -> Path:
    path.write_text("".join(f"endpoint {svc} = {h.url}\n" for svc, h in handles.items()), encoding="utf-8")
    return path


# Acceptance criteria record one line each here; the summary hook prints them.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
