"""
Shared fixtures: testing configuration, built-in losses and a CLI runner.
"""
import json

import pytest
from click.testing import CliRunner

from mixgeo import create_cli
from mixgeo.config.config import TestingConfig
from mixgeo.engine.losses import builtin, from_dsl


@pytest.fixture(autouse=True)
def testing_env(monkeypatch):
    """Pin every test to the testing configuration."""
    monkeypatch.setenv('MIXGEO_ENV', 'testing')
    monkeypatch.setenv('MIXGEO_THREADS', '1')


@pytest.fixture
def config():
    return TestingConfig()


@pytest.fixture
def log2():
    return builtin('log')


@pytest.fixture
def brier2():
    return builtin('brier')


@pytest.fixture
def spherical2():
    return builtin('spherical')


@pytest.fixture
def log3():
    return builtin('log', {'n': 3})


@pytest.fixture
def brier3():
    return builtin('brier', {'n': 3})


@pytest.fixture
def spherical3():
    return builtin('spherical', {'n': 3})


@pytest.fixture
def swapped_log():
    """The log loss with its partials exchanged: well defined but improper."""
    return from_dsl(["-ln(1-t1)", "-ln(t1)"], 2, name='swapped_log')


@pytest.fixture
def linear_loss():
    return from_dsl(["t1", "1-t1"], 2, name='linear')


@pytest.fixture
def cli():
    return create_cli()


@pytest.fixture
def cli_runner():
    return CliRunner(mix_stderr=False)


@pytest.fixture
def spec_file(tmp_path):
    """Write a loss specification to a temporary JSON file and return its path."""
    def write(spec, name='loss.json'):
        path = tmp_path / name
        path.write_text(json.dumps(spec))
        return str(path)
    return write
