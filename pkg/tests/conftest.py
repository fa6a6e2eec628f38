import numpy as np
import pytest

from ncbloch.groups import cyclic_dual, d4_dual, s3_dual
from ncbloch.models import builtin_model


@pytest.fixture(scope="session")
def duals():
    return {"Z6": cyclic_dual(6), "D4": d4_dual(), "S3": s3_dual()}


@pytest.fixture(scope="session")
def s3_demo():
    return builtin_model("s3-demo", seed=7)


@pytest.fixture(scope="session")
def z2_demo():
    return builtin_model("z2-demo", seed=7)


def random_function(rng, n, vector_dim=None):
    shape = (n,) if vector_dim is None else (n, vector_dim)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def max_abs(a):
    return float(np.max(np.abs(a)))
