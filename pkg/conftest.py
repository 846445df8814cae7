"""Shared fixtures; the flat modules at the repository root are imported directly."""
import pathlib
import sys

import pytest

ROOT = pathlib.Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from config import reload_settings  # noqa: E402
from models import KripkeTree, TraceSet, trace  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch, tmp_path):
    """Each test sees config.yaml as shipped, with logs kept out of the checkout."""
    monkeypatch.delenv("HLK_STATE_CAP", raising=False)
    monkeypatch.setenv("HLK_CONFIG", str(ROOT / "config.yaml"))
    settings = reload_settings()
    settings.logging.file = str(tmp_path / "hlk.log")
    yield settings
    reload_settings()


@pytest.fixture
def write_file(tmp_path):
    """Write text to a file under tmp_path and return its path as a string."""
    def write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


@pytest.fixture
def two_traces():
    """{a}^ω and ∅{a}^ω."""
    return TraceSet(("a",), (trace([], [["a"]]), trace([[]], [["a"]])))


@pytest.fixture
def branching_tree():
    """Root with two successors: one loops on {a}, the other on ∅."""
    return KripkeTree.build({"r": set(), "x": {"a"}, "y": set()},
                            [("r", "x"), ("r", "y"), ("x", "x"), ("y", "y")], "r")
