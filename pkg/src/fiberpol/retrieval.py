"""Mueller-matrix retrieval from paired input/output Stokes measurements."""
import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._random import substream
from .errors import IllPosedError, InsufficientDataError, SchemaError

CSV_FIELDS = ["label", "s0_in", "s1_in", "s2_in", "s3_in",
              "s0_out", "s1_out", "s2_out", "s3_out", "sample_idx"]

# Singular values below RCOND * largest count as zero.
RCOND = 1e-10


@dataclass(frozen=True)
class StokesStatistics:
    mean: np.ndarray
    covariance: np.ndarray
    n: int


@dataclass(frozen=True)
class MeasurementRecord:
    label: str
    s_in: np.ndarray
    samples_out: np.ndarray  # (n_repeats, 4)

    def __post_init__(self):
        s_in = np.asarray(self.s_in, dtype=float)
        out = np.atleast_2d(np.asarray(self.samples_out, dtype=float))
        if s_in.shape != (4,) or out.ndim != 2 or out.shape[1] != 4:
            raise SchemaError(f"record {self.label!r}: malformed Stokes data")
        if len(out) == 0:
            raise SchemaError(f"record {self.label!r} has no output samples")
        object.__setattr__(self, "s_in", s_in)
        object.__setattr__(self, "samples_out", out)

    def statistics(self):
        return stokes_statistics(self.samples_out)


@dataclass(frozen=True)
class MeasurementSet:
    records: tuple
    wavelength: float = None
    fiber_length: float = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def s_in(self):
        """Input states as columns, shape (4, N)."""
        return np.stack([r.s_in for r in self.records], axis=1)

    @property
    def mean_out(self):
        return np.stack([r.samples_out.mean(axis=0) for r in self.records], axis=1)

    def labels(self):
        return [r.label for r in self.records]

    def canonical(self):
        """Same set with records in a fixed order, so estimates ignore record order."""
        key = lambda r: (r.label, tuple(r.s_in), r.samples_out.shape[0], r.samples_out.tobytes())
        return MeasurementSet(sorted(self.records, key=key), self.wavelength, self.fiber_length)


@dataclass(frozen=True)
class MuellerEstimate:
    m: np.ndarray
    element_sigma: np.ndarray
    condition_number: float


def stokes_statistics(samples):
    """Sample mean and unbiased covariance of repeated Stokes measurements."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(x) < 2:
        raise InsufficientDataError(f"need at least 2 samples for statistics, got {len(x)}")
    # shifted data: exact zeros for constant samples
    d = x - x[0]
    dm = d.mean(axis=0)
    c = d - dm
    cov = c.T @ c / (len(x) - 1)
    return StokesStatistics(mean=x[0] + dm, covariance=0.5 * (cov + cov.T), n=len(x))


def _input_pinv(s_in):
    """Pseudoinverse of the (4, N) input matrix and its condition number.

    Raises :class:`IllPosedError` naming the unreachable Stokes directions if
    the inputs do not span all four dimensions.
    """
    if s_in.shape[1] < 4:
        raise IllPosedError(f"need at least 4 input states, got {s_in.shape[1]}")
    u, sv, vt = np.linalg.svd(s_in, full_matrices=True)
    deficient = sv < RCOND * sv[0]
    if deficient.any():
        null = u[:, len(sv) - deficient.sum():]
        names = [_describe(v) for v in null.T]
        raise IllPosedError(
            f"input states have rank {len(sv) - deficient.sum()} < 4; "
            f"unprobed Stokes subspace spanned by {', '.join(names)}")
    return np.linalg.pinv(s_in), float(sv[0] / sv[-1])


def _describe(v):
    v = np.where(np.abs(v) < 1e-12, 0.0, v)
    return "(" + ", ".join(f"{x:.3g}" for x in v) + ")"


def _gls(mset):
    """Generalized least squares weighting each record by its inverse mean covariance."""
    lhs = np.zeros((16, 16))
    rhs = np.zeros(16)
    for rec in mset.records:
        st = rec.statistics()
        cov = st.covariance / st.n
        if np.linalg.matrix_rank(cov) < 4:
            raise IllPosedError(f"record {rec.label!r}: singular covariance, cannot weight")
        w = np.linalg.inv(cov)
        a = np.kron(np.eye(4), rec.s_in)  # M s = a @ vec_rowmajor(M)
        lhs += a.T @ w @ a
        rhs += a.T @ w @ st.mean
    return np.linalg.solve(lhs, rhs).reshape(4, 4)


def estimate_mueller(mset, weighted=False, n_resamples=0, seed=None):
    """Least-squares Mueller matrix from the record means.

    ``M = S_out pinv(S_in)`` with states stacked as columns. With
    ``weighted=True`` each record is weighted by its inverse mean covariance.
    If ``n_resamples`` is positive, element sigmas come from Monte Carlo
    resampling; otherwise the first-order propagation is reported.
    """
    mset = mset.canonical()
    pinv, cond = _input_pinv(mset.s_in)
    m = _gls(mset) if weighted else mset.mean_out @ pinv
    if n_resamples:
        sigma = propagate_uncertainty(mset, n_resamples, seed=seed)
    else:
        sigma = linear_propagation_sigma(mset)
    return MuellerEstimate(m=m, element_sigma=sigma, condition_number=cond)


def _resample_means(mset, n_resamples, rng):
    """Draws of the output-mean matrix, shape (n_resamples, 4, N)."""
    out = np.empty((n_resamples, 4, len(mset.records)))
    for j, rec in enumerate(mset.records):
        st = rec.statistics()
        cov = st.covariance / st.n
        # eigh tolerates PSD (including all-zero) covariances, unlike cholesky
        w, v = np.linalg.eigh(cov)
        root = v * np.sqrt(np.clip(w, 0.0, None))
        z = rng.standard_normal((n_resamples, 4))
        out[:, :, j] = st.mean + z @ root.T
    return out


def resample_mueller(mset, n_resamples, seed):
    """Monte Carlo draws of the Mueller estimate, shape (n_resamples, 4, 4)."""
    mset = mset.canonical()
    pinv, _ = _input_pinv(mset.s_in)
    rng = substream(seed, "resampling")
    return _resample_means(mset, n_resamples, rng) @ pinv


def propagate_uncertainty(mset, n_resamples, seed=0):
    """Per-element standard deviation of the Mueller estimate by parametric resampling."""
    if n_resamples < 100:
        raise ValueError(f"n_resamples must be >= 100, got {n_resamples}")
    return sample_std(resample_mueller(mset, n_resamples, seed))


def sample_std(draws):
    """Unbiased standard deviation over axis 0, exactly zero for constant draws."""
    d = draws - draws[0]
    return np.sqrt(np.sum((d - d.mean(axis=0)) ** 2, axis=0) / (len(d) - 1))


def linear_propagation_sigma(mset):
    """First-order propagation of the output-mean variances.

    ``var(M_ij) = sum_r P_rj**2 var(mean_out_ir)`` with ``P = pinv(S_in)``,
    records being independent.
    """
    pinv, _ = _input_pinv(mset.s_in)  # (N, 4)
    var_out = np.stack([np.diag(r.statistics().covariance) / len(r.samples_out)
                        for r in mset.records], axis=1)  # (4, N)
    return np.sqrt(var_out @ pinv ** 2)


# -- ingestion ---------------------------------------------------------------------

def read_measurements(path, wavelength=None, fiber_length=None):
    """Load a measurement file (CSV or JSON, by extension)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        rows = _rows_from_json(text)
    else:
        rows = _rows_from_csv(text)
    return _group_rows(rows, wavelength, fiber_length)


def _rows_from_csv(text):
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CSV_FIELDS:
        raise SchemaError(f"measurement CSV header must be {','.join(CSV_FIELDS)}")
    return list(reader)


def _rows_from_json(text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    rows = obj.get("rows") if isinstance(obj, dict) else obj
    if not isinstance(rows, list):
        raise SchemaError("measurement JSON must be a list of rows or {\"rows\": [...]}")
    return rows


def _group_rows(rows, wavelength, fiber_length):
    groups = {}
    for i, row in enumerate(rows):
        try:
            label = str(row["label"])
            s_in = [float(row[f"s{k}_in"]) for k in range(4)]
            s_out = [float(row[f"s{k}_out"]) for k in range(4)]
            idx = int(row["sample_idx"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"row {i}: {exc!r}") from exc
        g = groups.setdefault(label, {"s_in": s_in, "samples": []})
        if not np.allclose(g["s_in"], s_in, rtol=0, atol=1e-12):
            raise SchemaError(f"row {i}: input state of {label!r} changes between samples")
        g["samples"].append((idx, s_out))
    records = []
    for label, g in groups.items():
        samples = [s for _, s in sorted(g["samples"], key=lambda t: t[0])]
        records.append(MeasurementRecord(label, g["s_in"], samples))
    if not records:
        raise SchemaError("measurement file contains no rows")
    return MeasurementSet(records, wavelength=wavelength, fiber_length=fiber_length)


def measurement_rows(mset):
    for rec in mset.records:
        for idx, s in enumerate(rec.samples_out):
            yield [rec.label, *rec.s_in, *s, idx]


def write_measurements_csv(mset, fh):
    """Write the ingestion CSV; floats use 17 significant digits."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in measurement_rows(mset):
        w.writerow([row[0], *(f"{x:.17g}" for x in row[1:9]), row[9]])
