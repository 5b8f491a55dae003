import json
import os

import pytest

from shiftdet import problem_config_from_json, solve_chi

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def load_config(name):
    with open(os.path.join(CONFIG_DIR, name), encoding="utf-8") as fh:
        return problem_config_from_json(json.load(fh))


@pytest.fixture(scope="session")
def standard_cfg():
    return load_config("standard.json")


@pytest.fixture(scope="session")
def nonintegrable_cfg():
    return load_config("nonintegrable.json")


@pytest.fixture(scope="session")
def trivial_cfg():
    return load_config("trivial.json")


@pytest.fixture(scope="session")
def general_cfg():
    return load_config("general.json")


@pytest.fixture(scope="session")
def standard_chi(standard_cfg):
    # shared across read-only tests; ChiSolution is immutable after solve
    return solve_chi(standard_cfg)


@pytest.fixture(scope="session")
def trivial_chi(trivial_cfg):
    return solve_chi(trivial_cfg)


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR
