"""Lu-Chipman polar decomposition, retardance extraction and birefringence.

The decomposition order is ``M = M_depol @ M_retard @ M_diatten`` (the
diattenuator acts first along the propagation direction).

Retarders are parametrized as ``circular_retarder(delta_cb) @
linear_retarder(fast_axis, delta_lb)``: the linear part acts first and the
circular part second. The split is exact for any rotation and is computed from
the unit quaternion of the 3x3 rotation block.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .core import circular_retarder, compose, linear_retarder, rotation_block
from .errors import AmbiguityError, DomainError, FiberpolError, tag_stage
from .retrieval import estimate_mueller, resample_mueller, sample_std

TWO_PI = 2 * np.pi
_PHYS_TOL = 1e-9
_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class PolarDecomposition:
    m_diatten: np.ndarray
    m_retard: np.ndarray
    m_depol: np.ndarray
    degenerate: bool = False

    def product(self):
        return compose(self.m_depol, compose(self.m_retard, self.m_diatten))

    @property
    def diattenuation(self):
        return float(np.linalg.norm(self.m_diatten[0, 1:]) / self.m_diatten[0, 0])

    @property
    def depolarization_factor(self):
        """``|tr(m_depol[1:, 1:])| / 3``; 1 for a nondepolarizing element."""
        return float(abs(np.trace(self.m_depol[1:, 1:])) / 3)


@dataclass(frozen=True)
class RetardanceResult:
    delta_total: float
    delta_cb: float
    delta_lb: float
    fast_axis: float

    def retarder(self):
        return retarder_from_parameters(self.delta_cb, self.delta_lb, self.fast_axis)


@dataclass(frozen=True)
class Unwrapped:
    delta: float
    k: int
    reflected: bool


@dataclass(frozen=True)
class BirefringenceEstimate:
    delta_n: float
    sigma: float
    cycles_k: int
    kind: str
    delta_wrapped: float
    delta_unwrapped: float
    reflected: bool = False
    handedness: int = 1


# -- polar decomposition ------------------------------------------------------------

def _diattenuator_from_vector(m00, d):
    """Batched diattenuator Mueller matrices from transmittance and diattenuation vector."""
    dn = np.linalg.norm(d, axis=-1)
    root = np.sqrt(np.clip(1.0 - dn ** 2, 0.0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        dhat = np.where(dn[..., None] > 0, d / dn[..., None], 0.0)
    block = (root[..., None, None] * np.eye(3)
             + (1.0 - root)[..., None, None] * dhat[..., :, None] * dhat[..., None, :])
    md = np.zeros(d.shape[:-1] + (4, 4))
    md[..., 0, 0] = 1.0
    md[..., 0, 1:] = d
    md[..., 1:, 0] = d
    md[..., 1:, 1:] = block
    return m00[..., None, None] * md


def lu_chipman_batch(m):
    """Vectorized decomposition of a stack of Mueller matrices, shape (..., 4, 4).

    Returns ``(m_diatten, m_retard, m_depol, degenerate)``; ``degenerate`` flags
    full polarizers, for which the diattenuator is singular and the
    pseudoinverse is used.
    """
    m = np.asarray(m, dtype=float)
    m00 = m[..., 0, 0]
    if np.any(m00 <= 0):
        raise DomainError("non-physical Mueller matrix: m00 must be positive")
    d = m[..., 0, 1:] / m00[..., None]
    p = m[..., 1:, 0] / m00[..., None]
    dn = np.linalg.norm(d, axis=-1)
    pn = np.linalg.norm(p, axis=-1)
    if np.any(dn > 1 + _PHYS_TOL):
        raise DomainError(f"non-physical Mueller matrix: diattenuation {dn.max():.6g} > 1")
    if np.any(pn > 1 + _PHYS_TOL):
        raise DomainError(f"non-physical Mueller matrix: polarizance {pn.max():.6g} > 1")
    d = np.where(dn[..., None] > 1, d / np.maximum(dn, 1)[..., None], d)
    md = _diattenuator_from_vector(m00, d)

    degenerate = dn >= 1 - _DEGENERATE_TOL
    mdi = np.empty_like(md)
    if np.any(~degenerate):
        mdi[~degenerate] = np.linalg.inv(md[~degenerate])
    if np.any(degenerate):
        mdi[degenerate] = np.linalg.pinv(md[degenerate])
    mp = m @ mdi

    u, _, vt = np.linalg.svd(mp[..., 1:, 1:])
    sign = np.sign(np.linalg.det(u @ vt))
    mr3 = sign[..., None, None] * (u @ vt)
    mdep3 = mp[..., 1:, 1:] @ np.swapaxes(mr3, -1, -2)
    mdep3 = 0.5 * (mdep3 + np.swapaxes(mdep3, -1, -2))

    mr = np.zeros_like(m)
    mr[..., 0, 0] = 1.0
    mr[..., 1:, 1:] = mr3
    mdep = np.zeros_like(m)
    mdep[..., 0, 0] = 1.0
    mdep[..., 1:, 0] = mp[..., 1:, 0]
    mdep[..., 1:, 1:] = mdep3
    return md, mr, mdep, degenerate


def lu_chipman(m):
    """Polar decomposition ``M = M_depol @ M_retard @ M_diatten``.

    For a full polarizer (diattenuation 1) the diattenuator cannot be inverted;
    the pseudoinverse is used, the retarder is then not unique and the result
    is flagged ``degenerate``.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (4, 4):
        raise DomainError(f"Mueller matrix must be 4x4, got shape {m.shape}")
    md, mr, mdep, degenerate = lu_chipman_batch(m)
    return PolarDecomposition(md, mr, mdep, bool(degenerate))


# -- retardance ---------------------------------------------------------------------

def _split_rotation(r):
    """Split rotations into circular-after-linear parameters.

    Returns ``(delta_cb, delta_lb, fast_axis)`` arrays with ``delta_cb`` in
    (-pi, pi], ``delta_lb`` in [0, pi] and ``fast_axis`` in [0, pi).
    """
    q = Rotation.from_matrix(r).as_quat()  # (x, y, z, w)
    q = np.where(q[..., 3:4] < 0, -q, q)
    x, y, z, w = np.moveaxis(q, -1, 0)
    delta_cb = 2 * np.arctan2(z, w)
    delta_cb = np.where(delta_cb <= -np.pi, delta_cb + TWO_PI, delta_cb)
    # linear factor = Rz(-delta_cb) * R, quaternion product with (0, 0, -sin, cos)
    c, s = np.cos(delta_cb / 2), np.sin(delta_cb / 2)
    lw = c * w + s * z
    lx = c * x + s * y
    ly = c * y - s * x
    vec = np.hypot(lx, ly)
    delta_lb = 2 * np.arctan2(vec, np.abs(lw))
    sgn = np.where(lw < 0, -1.0, 1.0)
    # the linear retarder turns right-handed about the slow-axis point, opposite its fast axis
    azimuth = np.arctan2(-sgn * ly, -sgn * lx)
    fast_axis = np.mod(azimuth / 2, np.pi)
    fast_axis = np.where(vec < 1e-15, 0.0, fast_axis)
    return delta_cb, delta_lb, fast_axis


def extract_retardances(m_retard):
    """Total, circular and linear retardance of a pure retarder.

    ``delta_total`` is the arccos-branch rotation angle in [0, pi]. The
    circular part is signed (positive rotates S1 towards S2).
    """
    r = rotation_block(m_retard)
    delta_total = float(np.arccos(np.clip((np.trace(r) - 1) / 2, -1.0, 1.0)))
    delta_cb, delta_lb, fast_axis = (float(v) for v in _split_rotation(r))
    return RetardanceResult(delta_total, delta_cb, delta_lb, fast_axis)


def retarder_from_parameters(delta_cb, delta_lb, fast_axis):
    return compose(circular_retarder(delta_cb), linear_retarder(fast_axis, delta_lb))


# -- unwrapping ---------------------------------------------------------------------

def unwrap_retardance(delta_wrapped, k, reflected=False):
    """Full retardance from a wrapped value in [0, pi] and the cycle count ``k``.

    The two branches of cycle ``k`` are ``2 pi k + delta`` and, reflected,
    ``2 pi (k + 1) - delta``.
    """
    if k < 0:
        raise DomainError(f"cycle count must be >= 0, got {k}")
    if reflected:
        return TWO_PI * (k + 1) - delta_wrapped
    return TWO_PI * k + delta_wrapped


def _candidates(delta_wrapped, k_lo, k_hi, reflect):
    out = []
    for k in range(max(k_lo, 0), k_hi + 1):
        out.append(Unwrapped(unwrap_retardance(delta_wrapped, k), k, False))
        if reflect:
            out.append(Unwrapped(unwrap_retardance(delta_wrapped, k, True), k, True))
    return out


def unwrap_to_prior(delta_wrapped, l, lam, delta_n_prior, reflect=True):
    """Branch of the wrapped retardance closest to a prior birefringence.

    With ``reflect=True`` the wrapped value is taken from the arccos branch
    [0, pi] and both branches of each cycle are candidates; otherwise it is
    treated as lying in [0, 2 pi).

    Raises :class:`AmbiguityError` when the two best candidates both lie within
    10% of the prior and the prior sits within the central 10% band between
    them.
    """
    if delta_n_prior < 0:
        raise DomainError(f"prior birefringence must be >= 0, got {delta_n_prior}")
    target = retardance_from_birefringence(delta_n_prior, lam, l)
    k0 = int(target // TWO_PI)
    cands = _candidates(delta_wrapped, k0 - 1, k0 + 1, reflect)
    scored = sorted(cands, key=lambda c: (abs(birefringence(abs(c.delta), lam, l) - delta_n_prior),
                                          c.delta))
    best = scored[0]
    if len(scored) > 1 and delta_n_prior > 0:
        second = scored[1]
        n1 = birefringence(abs(best.delta), lam, l)
        n2 = birefringence(abs(second.delta), lam, l)
        d1, d2 = abs(n1 - delta_n_prior), abs(n2 - delta_n_prior)
        near = d2 <= 0.1 * delta_n_prior
        if near and (d2 - d1) < 0.1 * abs(n2 - n1):
            raise AmbiguityError(
                f"cycle count ambiguous: k={best.k} (dn={n1:.4g}) and k={second.k} "
                f"(dn={n2:.4g}) are equally consistent with prior {delta_n_prior:.4g}")
    return best


def infer_cycles(delta_wrapped, l, lam, delta_n_prior, reflect=True):
    """Number of full retardation cycles that best matches ``delta_n_prior``."""
    return unwrap_to_prior(delta_wrapped, l, lam, delta_n_prior, reflect).k


def _nearest_branch(delta_wrapped, nominal):
    """Elementwise branch of ``delta_wrapped`` (in [0, pi]) closest to ``nominal``."""
    k = np.floor(nominal / TWO_PI)
    best = np.full(np.shape(delta_wrapped), np.inf)
    out = np.zeros(np.shape(delta_wrapped))
    for dk in (-1, 0, 1):
        kk = k + dk
        for cand in (TWO_PI * kk + delta_wrapped, TWO_PI * (kk + 1) - delta_wrapped):
            err = np.abs(cand - nominal)
            out = np.where(err < best, cand, out)
            best = np.minimum(err, best)
    return out


# -- birefringence from retardance ----------------------------------------------------

def _check_geometry(lam, l):
    if not l > 0:
        raise DomainError(f"fiber length must be positive, got {l}")
    if not lam > 0:
        raise DomainError(f"wavelength must be positive, got {lam}")


def birefringence(delta, lam, l):
    """Refractive-index difference ``delta * lam / (2 pi l)`` for an unwrapped retardance."""
    _check_geometry(lam, l)
    if delta < 0:
        raise DomainError(f"retardance must be >= 0 (unwrapped), got {delta}")
    return delta * lam / (TWO_PI * l)


def retardance_from_birefringence(delta_n, lam, l):
    _check_geometry(lam, l)
    return TWO_PI * l * delta_n / lam


# -- full analysis ------------------------------------------------------------------

@dataclass(frozen=True)
class FiberAnalysis:
    estimate: object
    decomposition: PolarDecomposition
    retardance: RetardanceResult
    circular: BirefringenceEstimate
    linear: BirefringenceEstimate


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FiberpolError as exc:
        raise tag_stage(exc, name)


def _estimate(kind, delta_signed, prior, lam, l, draws):
    wrapped = abs(delta_signed)
    unw = unwrap_to_prior(wrapped, l, lam, prior)
    dn = birefringence(unw.delta, lam, l)
    sigma = 0.0
    if draws is not None:
        dn_draws = _nearest_branch(np.abs(draws), unw.delta) * lam / (TWO_PI * l)
        sigma = float(sample_std(dn_draws))
    hand = -1 if delta_signed < 0 else 1
    if unw.reflected:
        hand = -hand
    return BirefringenceEstimate(dn, sigma, unw.k, kind, wrapped, unw.delta, unw.reflected, hand)


def analyze_fiber(mset, delta_n_prior_cb, delta_n_prior_lb, wavelength=None, fiber_length=None,
                  n_resamples=200, seed=0):
    """Mueller estimate -> polar decomposition -> retardances -> birefringence.

    Sigmas come from pushing Monte Carlo resamples of the Mueller estimate
    through the whole chain; ``n_resamples=0`` skips them. Errors carry the
    name of the failing stage.
    """
    lam = mset.wavelength if wavelength is None else wavelength
    l = mset.fiber_length if fiber_length is None else fiber_length
    _stage("geometry", _check_geometry, lam, l)

    est = _stage("retrieval", estimate_mueller, mset)
    dec = _stage("decomposition", lu_chipman, est.m)
    ret = _stage("retardance", extract_retardances, dec.m_retard)

    cb_draws = lb_draws = None
    if n_resamples:
        draws = _stage("retrieval", resample_mueller, mset, n_resamples, seed)
        _, mr, _, _ = _stage("decomposition", lu_chipman_batch, draws)
        cb_draws, lb_draws, _ = _split_rotation(mr[:, 1:, 1:])
        sigma = sample_std(draws)
        est = type(est)(m=est.m, element_sigma=sigma, condition_number=est.condition_number)

    circ = _stage("unwrapping", _estimate, "circular", ret.delta_cb, delta_n_prior_cb, lam, l, cb_draws)
    lin = _stage("unwrapping", _estimate, "linear", ret.delta_lb, delta_n_prior_lb, lam, l, lb_draws)
    return FiberAnalysis(est, dec, ret, circ, lin)
