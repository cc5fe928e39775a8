import numpy as np
import pytest

from singlab import RawPmf, RngStream, standardize


@pytest.fixture(scope="session")
def ternary():
    return standardize(RawPmf.from_dict({0: "1/2", 1: "1/4", -1: "1/4"}, name="ternary"))


@pytest.fixture(scope="session")
def biased():
    # q0 = 0.7 with symmetric +-1 noise
    return standardize(RawPmf.from_dict({0: "7/10", 1: "3/20", -1: "3/20"}, name="biased"))


@pytest.fixture(scope="session")
def two_atom():
    return standardize(RawPmf.from_dict({0: "7/10", 1: "3/10"}, name="two-atom"))


@pytest.fixture(scope="session")
def sparse():
    return standardize(RawPmf.from_dict({0: "99/100", 1: "1/200", -1: "1/200"}, name="sparse"))


@pytest.fixture(scope="session")
def shifted():
    # nonzero mode: b = 2, scale 2, xi supported on +-1
    return standardize(RawPmf.from_dict({2: "4/5", 0: "1/10", 4: "1/10"}, name="shifted"))


@pytest.fixture
def write_law(tmp_path):
    def _write(text, name="test.law"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write


@pytest.fixture
def stream():
    def _mk(seed=1234, path=()):
        return RngStream(seed, tuple(path))

    return _mk


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
