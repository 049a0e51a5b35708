import numpy as np
import pytest

from omniplex.rng import stream


@pytest.fixture
def rng():
    return stream(12345)


def random_rotation(d, rng):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))
