import functools

import numpy as np
import pytest

from bioseal import fixtures as fx
from bioseal.fingercode import extract_fingercode

MASTER_SEED = bytes(range(32))
PASSWORD = b"correct horse"

# Module-level caches instead of session fixtures: unit tests touch one or two
# carriers, the acceptance suite walks all twenty, and both should pay for a
# given index exactly once.


@functools.lru_cache(maxsize=32)
def carrier(index: int):
    return fx.make_carrier(index)


@functools.lru_cache(maxsize=128)
def fingercode(user_index: int, sample: int) -> np.ndarray:
    img = fx.make_fingerprint(user_index, sample)
    return extract_fingercode(img).features


OWNER = fx.N_USERS  # owner sits after the numbered users


@pytest.fixture
def master_seed():
    return MASTER_SEED


@pytest.fixture
def password():
    return PASSWORD


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(987654321))
