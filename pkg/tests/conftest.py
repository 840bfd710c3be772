import numpy as np
import pytest

import anneal_lab as al


@pytest.fixture(scope="session")
def n8():
    return al.build_signature_instance(8)


@pytest.fixture(scope="session")
def n4():
    return al.build_signature_instance(4)


@pytest.fixture(scope="session")
def schedule():
    return al.default_schedule()


@pytest.fixture(scope="session")
def dw2_schedule():
    return al.dw2_like_schedule()


def brute_force_energy(instance, config):
    """Independent Ising-energy oracle: explicit term-by-term sum."""
    e = 0.0
    for i in range(instance.n_spins):
        e -= instance.fields[i] * config[i]
    for (i, j), jij in instance.couplings.items():
        e -= jij * config[i] * config[j]
    return e


def enumerate_energies(instance):
    """Independent full-enumeration oracle over all 2^N configurations."""
    n = instance.n_spins
    out = np.empty(2**n)
    for idx in range(2**n):
        cfg = [1 - 2 * ((idx >> (n - 1 - q)) & 1) for q in range(n)]
        out[idx] = brute_force_energy(instance, cfg)
    return out
