import warnings

import pytest

from bqaoa import data_path, device


@pytest.fixture(scope="session")
def fragment():
    return device.load_device(data_path("ehningen_fragment.json"))


@pytest.fixture(scope="session")
def ehningen():
    return device.load_device(data_path("ehningen.json"))


@pytest.fixture(scope="session")
def synthetic5():
    return device.load_device(data_path("synthetic5.json"))


@pytest.fixture(autouse=True)
def quiet_t2_clamp_warnings():
    # several shipped qubits genuinely have T2 > 2*T1; the clamp warning is
    # exercised explicitly in test_sim
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=r"qubit \d+: T2=.*")
        yield
