import numpy as np
import pytest

from fiberpol import core


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_jones(rng):
    return rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))


def random_unitary(rng):
    q, r = np.linalg.qr(random_jones(rng))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_field(rng):
    return rng.normal(size=2) + 1j * rng.normal(size=2)


def random_pure_stokes(rng, n):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.hstack([np.ones((n, 1)), v])


def random_retarder(rng):
    return core.jones_to_mueller(random_unitary(rng))


def random_diattenuator(rng):
    """General (elliptical-axis) partial polarizer through the Jones route."""
    u = random_unitary(rng)
    p1 = rng.uniform(0.4, 1.0)
    p2 = p1 * rng.uniform(0.05, 1.0)
    return core.jones_to_mueller(u @ np.diag([p1, p2]) @ u.conj().T)


def random_depolarizer(rng):
    return core.depolarizer(*rng.uniform(0.05, 1.0, size=3))


def toy_joint_measurement_variance(n_observables, shots, rng):
    """Gaussian toy model of measuring ``n`` noncommuting observables at once.

    The signal mode is split into ``n`` equal ports by a unitary beam splitter;
    the other ``n - 1`` input ports carry vacuum. Rescaling one port back to
    the signal's amplitude gives signal noise plus the vacuum leaking in.
    Units: vacuum variance = 1.
    """
    signal = rng.standard_normal(shots)
    vacua = rng.standard_normal((n_observables - 1, shots))
    port = (signal + vacua.sum(axis=0)) / np.sqrt(n_observables)
    return float(np.var(np.sqrt(n_observables) * port))
