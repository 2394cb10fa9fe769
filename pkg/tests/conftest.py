import warnings
from pathlib import Path

import pytest

warnings.filterwarnings("ignore", category=RuntimeWarning, module="maassmoments")

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def dataset():
    from maassmoments.spectral_data import load_dataset, default_dataset_path
    return load_dataset(default_dataset_path(), validate=False)


@pytest.fixture(scope="session")
def fixture_dataset():
    from maassmoments.spectral_data import load_dataset
    return load_dataset(FIXTURES / "level1_t30.dat", validate=True)


@pytest.fixture(scope="session")
def win_16_4():
    from maassmoments.lvalue import TestFunction
    return TestFunction(16.0, 4.0)


@pytest.fixture(scope="session")
def win_12_3():
    from maassmoments.lvalue import TestFunction
    return TestFunction(12.0, 3.0)
