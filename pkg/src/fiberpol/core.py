"""Stokes, Jones and Mueller calculus.

Stokes vectors are ``numpy`` arrays of shape ``(4,)`` ordered ``(s0, s1, s2, s3)``
and Mueller matrices are ``(4, 4)`` arrays acting on column vectors.

Conventions
-----------
* ``s1 = I_H - I_V``, ``s2 = I_D - I_A``, ``s3 = I_+ - I_-``; the ``+`` state
  sits at ``s3 = +1``.
* All retardances are rotation angles on the Poincare sphere. A physical
  rotation of the polarization plane by ``phi`` is a sphere rotation by ``2 phi``.
* ``circular_retarder(delta)`` rotates S1 towards S2 (right-handed about +S3).
* ``linear_retarder(theta, delta)`` has its fast axis at ``theta``; it rotates the
  sphere by ``delta`` right-handed about the slow-axis point, i.e. H is sent to
  ``+`` by a quarter-wave plate at 45 degrees.
"""
from typing import NamedTuple

import numpy as np

from .errors import DomainError

__all__ = [
    "STATES", "IntensityProjections", "stokes", "stokes_from_intensities",
    "apply", "compose", "identity", "linear_retarder", "circular_retarder",
    "linear_polarizer", "diattenuator", "depolarizer", "rotation_mueller",
    "jones_to_mueller", "stokes_from_jones", "jones_linear_retarder",
    "jones_rotator", "jones_linear_polarizer", "jones_partial_polarizer",
    "dop", "to_poincare", "is_physical", "rotation_block", "axis_angle",
    "rotation_matrix", "stokes_to_json", "stokes_from_json",
    "mueller_to_json", "mueller_from_json",
]

# Pauli basis matching the Stokes definitions above: s_k = E^H sigma_k E.
_PAULI = np.array([
    [[1, 0], [0, 1]],
    [[1, 0], [0, -1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
], dtype=complex)

STATES = {
    "H": np.array([1.0, 1.0, 0.0, 0.0]),
    "V": np.array([1.0, -1.0, 0.0, 0.0]),
    "D": np.array([1.0, 0.0, 1.0, 0.0]),
    "A": np.array([1.0, 0.0, -1.0, 0.0]),
    "+": np.array([1.0, 0.0, 0.0, 1.0]),
    "-": np.array([1.0, 0.0, 0.0, -1.0]),
}

_DOP_EPS = 1e-9


class IntensityProjections(NamedTuple):
    i_h: float
    i_v: float
    i_d: float
    i_a: float
    i_plus: float
    i_minus: float


def stokes(s0, s1=0.0, s2=0.0, s3=0.0):
    return np.array([s0, s1, s2, s3], dtype=float)


def _as_stokes(s):
    s = np.asarray(s, dtype=float)
    if s.shape != (4,):
        raise DomainError(f"Stokes vector must have 4 components, got shape {s.shape}")
    return s


def _as_mueller(m):
    m = np.asarray(m, dtype=float)
    if m.shape != (4, 4):
        raise DomainError(f"Mueller matrix must be 4x4, got shape {m.shape}")
    return m


def stokes_from_intensities(p):
    """Stokes vector from the six projected intensities ``(I_H, I_V, I_D, I_A, I_+, I_-)``."""
    p = IntensityProjections(*(float(x) for x in p))
    if any(x < 0 for x in p):
        raise DomainError(f"intensities must be non-negative, got {tuple(p)}")
    return np.array([p.i_h + p.i_v, p.i_h - p.i_v, p.i_d - p.i_a, p.i_plus - p.i_minus])


def apply(m, s):
    return _as_mueller(m) @ _as_stokes(s)


def compose(m2, m1):
    """Cascade two elements; light passes ``m1`` first."""
    return _as_mueller(m2) @ _as_mueller(m1)


def identity():
    return np.eye(4)


def rotation_mueller(r):
    """Embed a 3x3 sphere rotation as a pure-retarder Mueller matrix."""
    m = np.eye(4)
    m[1:, 1:] = r
    return m


def rotation_matrix(axis, angle):
    """Right-handed rotation by ``angle`` about ``axis`` (Rodrigues)."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        return np.eye(3)
    x, y, z = axis / norm
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def linear_retarder(theta, delta):
    """Linear retarder with fast axis at ``theta`` (rad) and retardance ``delta`` (rad)."""
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    cd, sd = np.cos(delta), np.sin(delta)
    return np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c * c + s * s * cd, c * s * (1 - cd), -s * sd],
        [0.0, c * s * (1 - cd), s * s + c * c * cd, c * sd],
        [0.0, s * sd, -c * sd, cd],
    ])


def circular_retarder(delta):
    c, s = np.cos(delta), np.sin(delta)
    return np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c, -s, 0.0],
        [0.0, s, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def linear_polarizer(theta):
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return 0.5 * np.array([
        [1.0, c, s, 0.0],
        [c, c * c, c * s, 0.0],
        [s, c * s, s * s, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])


def diattenuator(d, theta=0.0, transmittance=1.0):
    """Linear partial polarizer with diattenuation ``d`` in [0, 1] along ``theta``.

    ``transmittance`` is the unpolarized transmittance ``m00``. Built through
    the Jones route so that it is physical by construction.
    """
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"diattenuation must lie in [0, 1], got {d}")
    j = jones_partial_polarizer(theta, np.sqrt(transmittance * (1 + d)),
                                np.sqrt(transmittance * (1 - d)))
    return jones_to_mueller(j)


def depolarizer(a, b, c):
    """Diagonal depolarizer ``diag(1, a, b, c)``."""
    return np.diag([1.0, a, b, c])


# -- Jones oracle -------------------------------------------------------------

def jones_to_mueller(j):
    """Mueller matrix of a Jones matrix, ``m_ik = tr(sigma_i J sigma_k J^H) / 2``."""
    j = np.asarray(j, dtype=complex)
    jh = j.conj().T
    m = np.einsum("iab,bc,kcd,da->ik", _PAULI, j, _PAULI, jh)
    return 0.5 * m.real


def stokes_from_jones(e):
    e = np.asarray(e, dtype=complex)
    return np.einsum("a,kab,b->k", e.conj(), _PAULI, e).real


def jones_rotator(phi):
    """Rotation of the polarization plane by ``phi`` (physical angle)."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]], dtype=complex)


def jones_linear_retarder(theta, delta):
    core = np.diag([np.exp(0.5j * delta), np.exp(-0.5j * delta)])
    return jones_rotator(theta) @ core @ jones_rotator(-theta)


def jones_linear_polarizer(theta):
    return jones_partial_polarizer(theta, 1.0, 0.0)


def jones_partial_polarizer(theta, p1, p2):
    """Amplitude transmissions ``p1`` along ``theta`` and ``p2`` perpendicular to it."""
    core = np.diag([p1, p2]).astype(complex)
    return jones_rotator(theta) @ core @ jones_rotator(-theta)


# -- degree of polarization and the sphere -------------------------------------

def dop(s):
    s = _as_stokes(s)
    if s[0] <= 0:
        raise DomainError(f"degree of polarization undefined for s0 = {s[0]}")
    return float(np.linalg.norm(s[1:]) / s[0])


def to_poincare(s):
    """Unit vector on the Poincare sphere for a (partially) polarized state."""
    s = _as_stokes(s)
    p = dop(s)
    if p == 0.0:
        raise DomainError("unpolarized state has no direction on the Poincare sphere")
    return s[1:] / (s[0] * p)


def is_physical(s, eps=_DOP_EPS):
    s = _as_stokes(s)
    return bool(s[0] >= 0 and s[0] ** 2 * (1 + eps) >= s[1:] @ s[1:])


def rotation_block(m, tol=1e-6):
    """3x3 sphere rotation of a pure retarder; raises if ``m`` is not one."""
    m = _as_mueller(m)
    r = m[1:, 1:]
    err = np.max(np.abs(r @ r.T - np.eye(3)))
    if err > tol or np.linalg.det(r) < 0:
        raise DomainError(f"not a pure retarder (orthogonality error {err:.3g})")
    return r


def axis_angle(r):
    """Rotation axis (unit) and angle in [0, pi] of a 3x3 rotation matrix."""
    from scipy.spatial.transform import Rotation

    rv = Rotation.from_matrix(r).as_rotvec()
    angle = float(np.linalg.norm(rv))
    if angle == 0.0:
        return np.array([0.0, 0.0, 1.0]), 0.0
    return rv / angle, angle


# -- serialization ----------------------------------------------------------------

def stokes_to_json(s):
    return [float(x) for x in _as_stokes(s)]


def stokes_from_json(obj):
    return _as_stokes(obj)


def mueller_to_json(m):
    return [float(x) for x in _as_mueller(m).ravel()]


def mueller_from_json(obj):
    a = np.asarray(obj, dtype=float)
    if a.shape == (16,):
        return a.reshape(4, 4)
    return _as_mueller(a)
