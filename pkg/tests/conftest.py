import numpy as np
import pytest

from delayq.behavior import reference_spec
from delayq.dcm import calibrate, gen_calibration_data
from delayq.env import EnvConfig


@pytest.fixture(scope="session")
def mnl_spec():
    return reference_spec("mnl")


@pytest.fixture(scope="session")
def env_config():
    return EnvConfig()


@pytest.fixture(scope="session")
def calib_data(mnl_spec, env_config):
    return gen_calibration_data(mnl_spec, env_config, 6000, seed=11)


@pytest.fixture(scope="session")
def fitted_model(calib_data):
    booking, shock = calib_data
    model, booking_report, shock_report = calibrate(booking, shock)
    assert booking_report.converged and shock_report.converged
    return model


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
