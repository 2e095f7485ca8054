import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    # never touch the user's cache or the network-backed default location
    monkeypatch.setenv("TOWERLAB_CACHE_DIR", str(tmp_path / "cache"))


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    groups: dict[int, list[str]] = {}
    for key in RESULTS:
        groups.setdefault(int(key.rstrip("abcd")), []).append(key)
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(groups):
        keys = sorted(groups[num])
        ok = all(RESULTS[k][0] for k in keys)
        if len(keys) == 1:
            detail = RESULTS[keys[0]][1]
        else:
            detail = " | ".join(f"{k} {'PASS' if RESULTS[k][0] else 'FAIL'}: {RESULTS[k][1]}" for k in keys)
        tr.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
