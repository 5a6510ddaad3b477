import runpy
from pathlib import Path

import pytest

from ratebv import io

ROOT = Path(__file__).resolve().parents[1] / "tutorials"


@pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.json")), ids=lambda p: p.name)
def test_config_parses(path):
    cfg = io.parse_config(str(path))
    assert io.parse_config(io.dump_config(cfg)) == cfg


@pytest.mark.slow
@pytest.mark.parametrize("path", sorted(ROOT.glob("*.py")), ids=lambda p: p.name)
def test_tutorial_runs(path, capsys):
    runpy.run_path(str(path), run_name="__main__")
    out = capsys.readouterr().out
    # every tutorial ends by certifying the state it computed
    assert "passed: True" in out
