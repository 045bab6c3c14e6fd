"""Polarization state generator: fixed polarizer followed by two LCVRs.

The LCVRs are ideal linear retarders whose retardance is given in waves
(1.0 = full wave). Their fast axes sit at 45 and 22.5 degrees.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .core import STATES, apply, compose, linear_polarizer, linear_retarder
from .errors import DomainError

LCVR1_AXIS = np.pi / 4
LCVR2_AXIS = np.pi / 8

# label -> (LCVR-1 waves, LCVR-2 waves)
TABLE1_SETTINGS = {
    "H": (1.0, 1.0),
    "V": (0.5, 1.0),
    "D": (1.0, 0.5),
    "A": (0.5, 0.5),
    "+": (0.25, 1.0),
    "-": (0.75, 1.0),
}


@dataclass(frozen=True)
class LcvrSetting:
    axis_angle: float
    retardance: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.retardance) or self.retardance < 0:
            raise DomainError(f"LCVR retardance must be finite and >= 0 waves, got {self.retardance}")

    def mueller(self):
        return linear_retarder(self.axis_angle, 2 * np.pi * self.retardance)


@dataclass(frozen=True)
class PsgConfig:
    polarizer_angle: float = 0.0
    lcvr1: LcvrSetting = field(default_factory=lambda: LcvrSetting(LCVR1_AXIS))
    lcvr2: LcvrSetting = field(default_factory=lambda: LcvrSetting(LCVR2_AXIS))

    def with_retardances(self, ret1, ret2):
        return replace(self, lcvr1=replace(self.lcvr1, retardance=ret1),
                       lcvr2=replace(self.lcvr2, retardance=ret2))


def psg_mueller(cfg):
    return compose(cfg.lcvr2.mueller(),
                   compose(cfg.lcvr1.mueller(), linear_polarizer(cfg.polarizer_angle)))


def psg_state(cfg, ret1, ret2):
    """Generated state for unpolarized unit input, renormalized to ``s0 = 1``."""
    s = apply(psg_mueller(cfg.with_retardances(ret1, ret2)), [1.0, 0.0, 0.0, 0.0])
    return s / s[0]


def table1_states(cfg=None):
    """The six labeled settings as ``(label, ret1, ret2, stokes)`` tuples."""
    cfg = cfg or PsgConfig()
    return [(label, r1, r2, psg_state(cfg, r1, r2)) for label, (r1, r2) in TABLE1_SETTINGS.items()]


def table1_targets():
    return {label: STATES[label].copy() for label in TABLE1_SETTINGS}
