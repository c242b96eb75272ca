import pytest

from uwarelay.acoustics import AcousticEnv, GainProfile
from uwarelay.fading import FadingModel
from uwarelay.outage import SubbandGrid

P_B_DEFAULT = 1e10  # 100 dB re uPa


@pytest.fixture(scope="session")
def fading():
    return FadingModel.from_db(3.01)


@pytest.fixture(scope="session")
def env():
    return AcousticEnv()


@pytest.fixture(scope="session")
def grid(env):
    return SubbandGrid.build(env, 64)


def gain_env(a, b, **kw):
    return AcousticEnv(gain_SR=GainProfile.constant(a), gain_RD=GainProfile.constant(b), **kw)
