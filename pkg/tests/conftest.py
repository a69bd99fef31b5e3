import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spectralclone.features import generate_synthetic_program  # noqa: E402


@pytest.fixture(scope="session")
def small_program():
    return generate_synthetic_program(7, 40, 3.0)


@pytest.fixture
def minimal_doc():
    return {
        "schema_version": 1,
        "program_id": "tiny",
        "file_size_bytes": 10,
        "disasm_size_bytes": 20,
        "call_graph": {"nodes": [{"id": 0, "kind": "local"}], "edges": []},
        "functions": [{"node_id": 0, "cfg_edge_count": 0}],
    }


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
