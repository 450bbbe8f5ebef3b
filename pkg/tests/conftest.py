from dataclasses import replace
from importlib import resources
from pathlib import Path

import pytest

from tmrmodel.ingest import parse_config, parse_dfg, parse_library
from tmrmodel.model import RateParams
from tmrmodel.sweep import calibrate_lambda_bit, run_sweep


def bundled(name):
    return resources.files("tmrmodel").joinpath("data", name).read_text()


@pytest.fixture(scope="session")
def library():
    return parse_library(bundled("library.csv"))


@pytest.fixture(scope="session")
def fir8(library):
    return parse_dfg(bundled("fir8.json"), library)


@pytest.fixture(scope="session")
def fir64(library):
    return parse_dfg(bundled("fir64.json"), library)


@pytest.fixture(scope="session")
def fir_params():
    """Rate parameters of the FIR experiments before calibration."""
    return RateParams(alpha_scu=0.99, alpha_dcu=0.01, lambda_voter=0.0)


@pytest.fixture(scope="session")
def calibrated_params(fir64, library, fir_params):
    lb = calibrate_lambda_bit(fir64, library, fir_params, target=0.65, tau=900.0)
    return replace(fir_params, lambda_bit=lb)


CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="session")
def voter_free_config():
    return parse_config((CONFIG_DIR / "voter_free.yaml").read_text())


@pytest.fixture(scope="session")
def voter_free_rows(voter_free_config, fir64, library):
    return run_sweep(voter_free_config, fir64, library, jobs=4)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
