import numpy as np
import pytest

from nsedge import fixtures as fx
from nsedge.realization import make_rng


@pytest.fixture(scope="session")
def example1():
    return fx.example1_assemblage()


@pytest.fixture(scope="session")
def example1_cert():
    from nsedge.witness import certify

    return certify(fx.example1_assemblage(), seed_id="example1")


@pytest.fixture()
def rng():
    return make_rng(20260810)


def assert_close(actual, expected, tol, label=""):
    actual = np.asarray(actual)
    expected = np.asarray(expected)
    dev = float(np.max(np.abs(actual - expected)))
    assert dev <= tol, f"{label} deviates by {dev:.3e} > {tol:.1e}"
