"""Synthetic measurement sets: the six-state protocol sent through a fiber model."""
import numpy as np

from ._random import substream
from .core import apply
from .errors import DomainError
from .fiber import fiber_mueller
from .psg import table1_states
from .retrieval import MeasurementRecord, MeasurementSet


def generate_fixture(model, l, lam, noise_sigma, repeats, seed):
    """Simulated polarimeter records with additive Gaussian Stokes noise.

    Each component of every output sample gets independent noise of standard
    deviation ``noise_sigma * s0_in``; the input states are exact.
    """
    if repeats < 2:
        raise DomainError(f"repeats must be >= 2, got {repeats}")
    if noise_sigma < 0:
        raise DomainError(f"noise sigma must be >= 0, got {noise_sigma}")
    m = fiber_mueller(model, l, lam)
    rng = substream(seed, "fixture-noise")
    records = []
    for label, _, _, s_in in table1_states():
        out = apply(m, s_in)
        noise = rng.standard_normal((repeats, 4)) * noise_sigma * s_in[0]
        records.append(MeasurementRecord(label, s_in, out + noise))
    return MeasurementSet(records, wavelength=lam, fiber_length=l)
