import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clda.corpus import write_text_records  # noqa: E402
from clda.synthetic import planted_corpus  # noqa: E402


@pytest.fixture(scope="session")
def small_input(tmp_path_factory):
    """A small planted corpus written as text records: 3 segments, 3 topics."""
    pc = planted_corpus(num_topics=3, num_segments=3, num_docs=150, vocab_size=80,
                        doc_length=40, seed=1)
    path = tmp_path_factory.mktemp("small") / "docs.tsv"
    write_text_records(pc.corpus, path)
    return path


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
