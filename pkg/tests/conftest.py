import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shoe.wordnet import load_wordnet  # noqa: E402

DATA = Path(__file__).parent / "data"
FIXTURE_WN = DATA / "wordnet_fixture"
FULL_WN = Path(os.environ.get("SHOE_WORDNET_DIR", "/root/wordnet-3.0"))


@pytest.fixture(scope="session")
def wn_dir() -> Path:
    return FIXTURE_WN


@pytest.fixture(scope="session")
def wn(wn_dir):
    return load_wordnet(wn_dir)


@pytest.fixture(scope="session")
def full_wn():
    if not (FULL_WN / "data.noun").is_file():
        pytest.skip(f"full WordNet 3.0 not found at {FULL_WN} (set SHOE_WORDNET_DIR)")
    return load_wordnet(FULL_WN)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
