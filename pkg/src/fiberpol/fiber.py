"""Fiber channel models and polarization dynamics on the Poincare sphere.

Every model here is nondepolarizing, so a channel is a rotation of the
sphere. Birefringences are refractive-index differences (RIU); the retardance
accumulated over length ``z`` is ``2 pi dn z / lambda``.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr

from .core import (
    apply, circular_retarder, compose, linear_retarder, rotation_matrix,
    rotation_mueller, to_poincare,
)
from .decomposition import retardance_from_birefringence
from .errors import DomainError, SchemaError

__all__ = [
    "StandardRandom", "LinearPMF", "TwistedPCF", "Spun", "model_from_dict", "model_to_dict",
    "Trajectory", "AnalyzerPlan", "fiber_mueller", "propagate", "eigen_axis",
    "scrambling_ensemble", "EnsembleStats", "beat_length", "calibrate",
    "required_analyzer", "noise_budget",
]


def _nonneg(name, value):
    if not value >= 0:
        raise DomainError(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True)
class StandardRandom:
    """Standard fiber: a chain of random linear retarders, one per correlation length."""
    correlation_length: float = 1.0
    delta_rms: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.correlation_length > 0:
            raise DomainError(f"correlation_length must be positive, got {self.correlation_length}")
        _nonneg("delta_rms", self.delta_rms)


@dataclass(frozen=True)
class LinearPMF:
    delta_n_lb: float
    axis: float = 0.0

    def __post_init__(self):
        _nonneg("delta_n_lb", self.delta_n_lb)


@dataclass(frozen=True)
class TwistedPCF:
    """Circular birefringence with an optional lumped residual linear retarder."""
    delta_n_cb: float
    residual_delta_n_lb: float = 0.0
    residual_axis: float = 0.0

    def __post_init__(self):
        _nonneg("delta_n_cb", self.delta_n_cb)
        _nonneg("residual_delta_n_lb", self.residual_delta_n_lb)


@dataclass(frozen=True)
class Spun:
    """Distributed circular and linear birefringence acting together."""
    delta_n_cb: float
    delta_n_lb: float
    axis: float = 0.0

    def __post_init__(self):
        _nonneg("delta_n_cb", self.delta_n_cb)
        _nonneg("delta_n_lb", self.delta_n_lb)


_VARIANTS = {cls.__name__: cls for cls in (StandardRandom, LinearPMF, TwistedPCF, Spun)}


def model_from_dict(obj):
    """Build a model from ``{"variant": ..., "params": {...}}``."""
    try:
        cls = _VARIANTS[obj["variant"]]
        params = obj.get("params", {})
        return cls(**params)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"invalid fiber model {obj!r}: {exc}") from exc


def model_to_dict(model):
    return {"variant": type(model).__name__, "params": asdict(model)}


# -- channel matrices -----------------------------------------------------------------

def _check(l, lam):
    if not l > 0:
        raise DomainError(f"fiber length must be positive, got {l}")
    if not lam > 0:
        raise DomainError(f"wavelength must be positive, got {lam}")


def _random_segments(model, n):
    """Axis and retardance of the first ``n`` segments.

    Draws are taken row by row from one normal stream, so the first segments
    do not depend on ``n``.
    """
    rng = np.random.default_rng(model.seed)
    z = rng.standard_normal((n, 2))
    axes = np.pi * ndtr(z[:, 0])
    return axes, model.delta_rms * z[:, 1]


def _spun_generator(model, lam):
    """Rotation vector per metre for a spun fiber (right-handed convention)."""
    k_cb = 2 * np.pi * model.delta_n_cb / lam
    k_lb = 2 * np.pi * model.delta_n_lb / lam
    slow = -np.array([np.cos(2 * model.axis), np.sin(2 * model.axis), 0.0])
    return k_cb * np.array([0.0, 0.0, 1.0]) + k_lb * slow


def _segment_rotations(axes, deltas):
    """Batched 3x3 blocks of linear retarders."""
    c, s = np.cos(2 * axes), np.sin(2 * axes)
    cd, sd = np.cos(deltas), np.sin(deltas)
    r = np.empty(axes.shape + (3, 3))
    r[..., 0, 0] = c * c + s * s * cd
    r[..., 0, 1] = c * s * (1 - cd)
    r[..., 0, 2] = -s * sd
    r[..., 1, 0] = c * s * (1 - cd)
    r[..., 1, 1] = s * s + c * c * cd
    r[..., 1, 2] = c * sd
    r[..., 2, 0] = s * sd
    r[..., 2, 1] = -c * sd
    r[..., 2, 2] = cd
    return r


def _standard_mueller(model, l):
    n_full = math.floor(l / model.correlation_length + 1e-12)
    frac = l / model.correlation_length - n_full
    n = n_full + (1 if frac > 1e-12 else 0)
    axes, deltas = _random_segments(model, n)
    if n > n_full:
        deltas = deltas.copy()
        deltas[-1] *= frac
    r = np.eye(3)
    for seg in _segment_rotations(axes, deltas):
        r = seg @ r
    return rotation_mueller(r)


def fiber_mueller(model, l, lam):
    """Mueller matrix of ``l`` metres of fiber at wavelength ``lam``."""
    _check(l, lam)
    if isinstance(model, LinearPMF):
        return linear_retarder(model.axis, retardance_from_birefringence(model.delta_n_lb, lam, l))
    if isinstance(model, TwistedPCF):
        circ = circular_retarder(retardance_from_birefringence(model.delta_n_cb, lam, l))
        resid = linear_retarder(model.residual_axis,
                                retardance_from_birefringence(model.residual_delta_n_lb, lam, l))
        return compose(circ, resid)
    if isinstance(model, Spun):
        return spun_mueller(model, l, lam)
    if isinstance(model, StandardRandom):
        return _standard_mueller(model, l)
    raise DomainError(f"unknown fiber model {model!r}")


def spun_step(model, lam):
    """Largest step that resolves the spun-fiber rotation: lam / (100 max dn)."""
    dn = max(model.delta_n_cb, model.delta_n_lb)
    return np.inf if dn == 0 else lam / (100 * dn)


def spun_mueller(model, l, lam, step=None):
    """Spun fiber as a chain of short steps, each the exact joint rotation.

    Each step is the limit of alternating infinitesimal circular and linear
    increments, so the result does not depend on the step size.
    """
    _check(l, lam)
    step = spun_step(model, lam) if step is None else step
    n = max(1, math.ceil(l / step))
    omega = _spun_generator(model, lam)
    h = l / n
    seg = rotation_matrix(omega, np.linalg.norm(omega) * h)
    r = np.linalg.matrix_power(seg, n)
    return rotation_mueller(r)


# -- trajectories ---------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    z: np.ndarray
    states: np.ndarray  # (n, 4)
    wavelength: float

    def points(self):
        return np.array([to_poincare(s) for s in self.states])


def _z_grid(l, dz):
    if not 0 < dz <= l:
        raise DomainError(f"need 0 < dz <= l, got dz={dz}, l={l}")
    n = int(math.floor(l / dz + 1e-9))
    z = dz * np.arange(n + 1)
    if l - z[-1] > 1e-12 * l:
        z = np.append(z, l)
    else:
        z[-1] = l
    return z


def propagate(model, s_in, l, lam, dz):
    """Sample the state along the fiber at ``z = 0, dz, 2 dz, ..., l``."""
    _check(l, lam)
    s_in = np.asarray(s_in, dtype=float)
    z = _z_grid(l, dz)
    states = [s_in.copy()]
    for zi in z[1:]:
        states.append(apply(fiber_mueller(model, zi, lam), s_in))
    return Trajectory(z, np.array(states), lam)


# -- eigenaxis, calibration, measurement planning ---------------------------------------

def _channel_axis(model, lam):
    """Sphere axis about which the channel turns states by a positive angle."""
    if isinstance(model, LinearPMF):
        # right-handed about the slow-axis point
        return -np.array([np.cos(2 * model.axis), np.sin(2 * model.axis), 0.0])
    if isinstance(model, Spun):
        omega = _spun_generator(model, lam)
        norm = np.linalg.norm(omega)
        return np.array([0.0, 0.0, 1.0]) if norm == 0 else omega / norm
    if isinstance(model, TwistedPCF):
        if model.residual_delta_n_lb == 0:
            return np.array([0.0, 0.0, 1.0])
        return None
    raise DomainError(f"{type(model).__name__} has no eigenaxis")


def eigen_axis(model, l=1.0, lam=808e-9):
    """Unit vector S_E fixed by the fiber eigenmodes.

    LinearPMF returns the fast-axis point ``(cos 2a, sin 2a, 0)``; circular
    models are oriented with non-negative S3. For a TwistedPCF with residual
    linear birefringence the axis is that of the composite rotation over ``l``.
    """
    if isinstance(model, LinearPMF):
        return np.array([np.cos(2 * model.axis), np.sin(2 * model.axis), 0.0])
    if isinstance(model, StandardRandom):
        raise DomainError("a standard fiber has no eigenaxis")
    axis = _channel_axis(model, lam)
    if axis is None:
        from .core import axis_angle

        axis, _ = axis_angle(fiber_mueller(model, l, lam)[1:, 1:])
    return axis if axis[2] >= 0 else -axis


def _rotation_sense_axis(model, l, lam):
    axis = _channel_axis(model, lam)
    if axis is None:
        from .core import axis_angle

        axis, _ = axis_angle(fiber_mueller(model, l, lam)[1:, 1:])
        if axis[2] < 0:
            axis = -axis
    return axis


def _angle_about(axis, u, v):
    u = u - axis * (axis @ u)
    v = v - axis * (axis @ v)
    return math.atan2(axis @ np.cross(u, v), u @ v)


def calibrate(model, l, lam, bright_state):
    """Rotation phase of the channel about S_E, from one bright reference state.

    The angle is measured in the sense in which the fiber accumulates
    retardance and returned in [0, 2 pi).
    """
    axis = _rotation_sense_axis(model, l, lam)
    p_in = to_poincare(bright_state)
    if min(np.linalg.norm(p_in - axis), np.linalg.norm(p_in + axis)) < 1e-6:
        raise DomainError("bright state lies on the eigenaxis; calibration is degenerate")
    p_out = to_poincare(apply(fiber_mueller(model, l, lam), bright_state))
    return float(np.mod(_angle_about(axis, p_in, p_out), 2 * np.pi))


@dataclass(frozen=True)
class AnalyzerPlan:
    analyzer_axis: np.ndarray = None
    analyzer_kind: str = None
    extra_noise_units: int = 0
    note: str = ""


def _kind(axis):
    if abs(axis[2]) < 1e-9:
        return "linear"
    if np.hypot(axis[0], axis[1]) < 1e-9:
        return "circular"
    return "elliptical"


def _reference_on_circle(axis):
    """Fixed reference state on the great circle perpendicular to ``axis``."""
    trial = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    ref = trial - axis * (axis @ trial)
    return ref / np.linalg.norm(ref)


def required_analyzer(model, l, lam, signal_circle_axis=None, phi=None):
    """Analyzer needed to read out a state sent on the protected great circle.

    With a calibrated phase ``phi`` a single analyzer suffices (no extra noise).
    Without calibration the two Stokes parameters spanning the great circle
    are measured jointly (one extra unit); a channel without eigenaxis forces
    full polarimetry (two extra units).
    """
    if isinstance(model, StandardRandom):
        return AnalyzerPlan(None, None, noise_budget(3), "full Stokes polarimetry")
    axis = _rotation_sense_axis(model, l, lam)
    if signal_circle_axis is not None:
        given = np.asarray(signal_circle_axis, dtype=float)
        given = given / np.linalg.norm(given)
        # phi is measured in the channel's own sense; orient the given axis to match
        axis = given if given @ axis >= 0 else -given
    if phi is None:
        return AnalyzerPlan(None, None, noise_budget(2), "joint measurement on the great circle")
    ref = _reference_on_circle(axis)
    target = rotation_matrix(axis, phi) @ ref
    target = np.where(np.abs(target) < 1e-12, 0.0, target)
    return AnalyzerPlan(target, _kind(target), noise_budget(1), "single calibrated analyzer")


def noise_budget(n_observables):
    """Extra units of quantum noise for jointly measuring ``n`` Stokes parameters."""
    if n_observables not in (1, 2, 3):
        raise DomainError(f"number of observables must be 1, 2 or 3, got {n_observables}")
    return n_observables - 1


def beat_length(lam, b_m):
    if not b_m > 0:
        raise DomainError(f"effective index difference must be positive, got {b_m}")
    return lam / b_m


# -- ensembles ------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleStats:
    mean: np.ndarray
    resultant_length: float
    octant_counts: np.ndarray
    points: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "mean": [float(x) for x in self.mean],
            "resultant_length": float(self.resultant_length),
            "octant_counts": [int(x) for x in self.octant_counts],
            "n_fibers": int(len(self.points)),
        }


def fiber_seeds(seed, n_fibers):
    """Per-fiber seeds derived from a base seed."""
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(n_fibers)]


def scrambling_ensemble(model, l, lam, s_in, n_fibers, seed=None):
    """Output-state statistics over ``n_fibers`` independent random fibers.

    Fiber ``j`` is ``model`` with its seed replaced by the ``j``-th seed derived
    from ``seed`` (default: the model's own seed).
    """
    if not isinstance(model, StandardRandom):
        raise DomainError("scrambling ensembles are defined for StandardRandom fibers")
    if n_fibers < 100:
        raise DomainError(f"need at least 100 fibers for ensemble statistics, got {n_fibers}")
    _check(l, lam)
    base = model.seed if seed is None else seed
    seeds = fiber_seeds(base, n_fibers)
    p_in = to_poincare(s_in)

    n_full = math.floor(l / model.correlation_length + 1e-12)
    frac = l / model.correlation_length - n_full
    n_seg = n_full + (1 if frac > 1e-12 else 0)
    axes = np.empty((n_fibers, n_seg))
    deltas = np.empty((n_fibers, n_seg))
    for j, s in enumerate(seeds):
        axes[j], deltas[j] = _random_segments(StandardRandom(model.correlation_length,
                                                             model.delta_rms, s), n_seg)
    if n_seg > n_full:
        deltas[:, -1] *= frac
    rot = _segment_rotations(axes, deltas)
    pts = np.tile(p_in, (n_fibers, 1))
    for i in range(n_seg):
        pts = np.einsum("nij,nj->ni", rot[:, i], pts)
    mean = pts.mean(axis=0)
    octant = (pts[:, 0] < 0) * 4 + (pts[:, 1] < 0) * 2 + (pts[:, 2] < 0)
    counts = np.bincount(octant, minlength=8)
    return EnsembleStats(mean, float(np.linalg.norm(mean)), counts, pts)
