import glob
import json
import os

import pytest

from ccstab.config import RunConfig
from ccstab.workflows import Problem, load_problem

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def fixture_paths() -> list[str]:
    paths = sorted(glob.glob(os.path.join(FIXTURE_DIR, "**", "*.fcidump"),
                             recursive=True))
    assert paths, "bundled fixtures missing; run scripts/make_fixtures.py"
    return paths


def fixture_path(name: str) -> str:
    for path in fixture_paths():
        if os.path.basename(path) == f"{name}.fcidump":
            return path
    raise FileNotFoundError(name)


def fixture_metadata(path: str) -> dict:
    meta_path = os.path.splitext(path)[0] + ".json"
    with open(meta_path) as fh:
        return json.load(fh)


class ProblemCache:
    """Loads each fixture once per session; assembly dominates test time."""

    def __init__(self):
        self._problems: dict[tuple, Problem] = {}

    def get(self, path: str, **cfg_kwargs) -> Problem:
        cfg = RunConfig(**cfg_kwargs)
        key = (os.path.abspath(path), cfg.resolved_convention(), cfg.sector,
               tuple(cfg.occupation))
        if key not in self._problems:
            self._problems[key] = load_problem(path, cfg)
        return self._problems[key]


@pytest.fixture(scope="session")
def problems() -> ProblemCache:
    return ProblemCache()


@pytest.fixture(scope="session")
def h2_problem(problems) -> Problem:
    return problems.get(fixture_path("h2_sto6g_r0.7414"))


@pytest.fixture(scope="session")
def w4_problem(problems) -> Problem:
    return problems.get(fixture_path("model_w4"))


@pytest.fixture(scope="session")
def w6_problem(problems) -> Problem:
    return problems.get(fixture_path("model_w6"))
