"""Sample sources, synthetic generators and CSV ingestion.

Randomness comes from counter-based Philox generators keyed by a
``numpy.random.SeedSequence``. Seeds may be integers or tuples of integers,
so independent sub-streams are addressed as ``(base_seed, trial, tag)``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm
from sklearn.preprocessing import MinMaxScaler

from .core import LabeledSample, SurveyDataset
from .exceptions import InputError, ResourceError
from .utils.validation import check_positive_int, check_vector

logger = logging.getLogger(__name__)

#: Default noise variance of the synthetic setup (sd = sqrt(0.1)).
DEFAULT_NOISE_VARIANCE = 0.1


def make_rng(seed) -> np.random.Generator:
    """Philox generator for an integer or tuple-of-integers seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = list(seed) if isinstance(seed, (tuple, list)) else seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class GaussianLinearSpec:
    """Gaussian covariates with a linear response ``y = <beta, x> + noise``.

    ``cov`` is a scalar (isotropic variance), a vector (diagonal) or a full
    PSD matrix. With ``clip=True`` every covariate is clipped to ``[-1, 1]``
    after sampling (isotropic or diagonal covariance only); the response is
    computed from the clipped covariates.
    """

    beta: np.ndarray
    noise_sd: float = math.sqrt(DEFAULT_NOISE_VARIANCE)
    cov: object = 1.0
    clip: bool = False
    _chol: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        beta = check_vector(self.beta, "beta")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if not (self.noise_sd >= 0 and math.isfinite(self.noise_sd)):
            raise InputError("noise_sd must be a non-negative finite number")
        d = beta.size
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            if cov < 0:
                raise InputError("isotropic variance must be non-negative")
        elif cov.ndim == 1:
            if cov.size != d or np.any(cov < 0):
                raise InputError("diagonal covariance must be non-negative with length d")
        elif cov.ndim == 2:
            if cov.shape != (d, d) or not np.allclose(cov, cov.T, atol=1e-12):
                raise InputError("full covariance must be a symmetric d x d matrix")
            w, V = np.linalg.eigh(cov)
            if w.min() < -1e-10 * max(1.0, abs(w).max()):
                raise InputError("covariance is not positive semidefinite")
            if self.clip:
                raise InputError("clipping is only supported for independent covariates")
            object.__setattr__(self, "_chol", V * np.sqrt(np.clip(w, 0.0, None)))
        else:
            raise InputError("cov must be a scalar, vector or matrix")
        cov = cov.copy()
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)

    @property
    def d(self) -> int:
        return self.beta.size

    @property
    def noise_variance(self) -> float:
        return self.noise_sd ** 2

    def _variances(self):
        return np.broadcast_to(self.cov, (self.d,)) if self.cov.ndim < 2 else None

    def covariance(self) -> np.ndarray:
        """Covariance (= second moment, the mean is zero) of the emitted covariates."""
        var = self._variances()
        if var is None:
            return np.array(self.cov)
        var = np.asarray(var, dtype=float)
        if self.clip:
            sd = np.sqrt(var)
            out = np.ones_like(var)
            pos = sd > 0
            a = 1.0 / sd[pos]
            inner = var[pos] * ((2 * norm.cdf(a) - 1) - 2 * a * norm.pdf(a))
            out[pos] = inner + 2 * norm.sf(a)
            out[~pos] = 0.0
            var = out
        return np.diag(var)

    def sample_x(self, rng, n) -> np.ndarray:
        z = rng.standard_normal((n, self.d))
        var = self._variances()
        if var is None:
            X = z @ self._chol.T
        else:
            X = z * np.sqrt(var)
        if self.clip:
            np.clip(X, -1.0, 1.0, out=X)
        return X

    def sample(self, rng, n):
        X = self.sample_x(rng, n)
        y = X @ self.beta + self.noise_sd * rng.standard_normal(n)
        return X, y

    def with_beta(self, beta) -> "GaussianLinearSpec":
        return GaussianLinearSpec(beta, self.noise_sd, self.cov, self.clip)


class DistributionSource:
    """Single-consumer stream of labelled samples.

    Subclasses implement :meth:`draw_batch`; :meth:`draw` returns one sample.
    :meth:`with_seed` returns a fresh, independent copy of the source.
    """

    d: int

    def draw(self) -> LabeledSample:
        X, y = self.draw_batch(1)
        return LabeledSample(X[0], float(y[0]))

    def draw_batch(self, n):
        raise NotImplementedError

    def with_seed(self, seed) -> "DistributionSource":
        raise NotImplementedError


class SyntheticGaussianLinear(DistributionSource):
    def __init__(self, spec: GaussianLinearSpec, seed=0):
        self.spec = spec
        self.seed = seed
        self.d = spec.d
        self._rng = make_rng(seed)

    def draw_batch(self, n):
        return self.spec.sample(self._rng, n)

    def with_seed(self, seed):
        return SyntheticGaussianLinear(self.spec, seed)


class EmpiricalResample(DistributionSource):
    """Uniform resampling of the rows of a dataset.

    Without replacement the rows come out in a seeded random order and the
    source is exhausted after ``m`` draws.
    """

    def __init__(self, dataset: SurveyDataset, seed=0, with_replacement=True):
        dataset.require_nonempty("resampling dataset")
        self.dataset = dataset
        self.seed = seed
        self.with_replacement = with_replacement
        self.d = dataset.d
        self._rng = make_rng(seed)
        self._order = None if with_replacement else self._rng.permutation(dataset.m)
        self._pos = 0

    def draw_batch(self, n):
        if self.with_replacement:
            idx = self._rng.integers(0, self.dataset.m, size=n)
        else:
            if self._pos + n > self.dataset.m:
                raise ResourceError(
                    f"resampling without replacement exhausted after {self._pos} draws",
                    rounds_completed=self._pos)
            idx = self._order[self._pos:self._pos + n]
            self._pos += n
        return self.dataset.X[idx], self.dataset.y[idx]

    def with_seed(self, seed):
        return EmpiricalResample(self.dataset, seed, self.with_replacement)


class FiniteStream(DistributionSource):
    """Replays a fixed list of samples in order."""

    def __init__(self, samples):
        if isinstance(samples, SurveyDataset):
            self.dataset = samples
        else:
            self.dataset = SurveyDataset.from_samples(samples)
        self.d = self.dataset.d
        self._pos = 0

    def draw_batch(self, n):
        if self._pos + n > self.dataset.m:
            raise ResourceError(f"finite stream exhausted after {self._pos} draws",
                                rounds_completed=self._pos)
        sl = slice(self._pos, self._pos + n)
        self._pos += n
        return self.dataset.X[sl], self.dataset.y[sl]

    def with_seed(self, seed):
        return FiniteStream(self.dataset)


def gen_survey(spec: GaussianLinearSpec, m: int, seed=0) -> SurveyDataset:
    """``m`` i.i.d. draws from ``spec``."""
    m = check_positive_int(m, "m")
    X, y = spec.sample(make_rng(seed), m)
    return SurveyDataset(X, y)


@dataclass(frozen=True)
class NormalizationParams:
    """Per-column affine maps ``v * scale + offset`` onto ``[-1, 1]``."""

    x_scale: np.ndarray
    x_offset: np.ndarray
    y_scale: float
    y_offset: float

    @classmethod
    def fit(cls, dataset: SurveyDataset) -> "NormalizationParams":
        dataset.require_nonempty()
        xs = MinMaxScaler(feature_range=(-1, 1)).fit(dataset.X)
        ys = MinMaxScaler(feature_range=(-1, 1)).fit(dataset.y.reshape(-1, 1))
        return cls(xs.scale_.copy(), xs.min_.copy(), float(ys.scale_[0]), float(ys.min_[0]))

    def apply(self, dataset: SurveyDataset) -> SurveyDataset:
        return SurveyDataset(dataset.X * self.x_scale + self.x_offset,
                             dataset.y * self.y_scale + self.y_offset,
                             feature_names=dataset.feature_names)

    def invert(self, dataset: SurveyDataset) -> SurveyDataset:
        return SurveyDataset((dataset.X - self.x_offset) / self.x_scale,
                             (dataset.y - self.y_offset) / self.y_scale,
                             feature_names=dataset.feature_names)

    def drop(self, column_index: int) -> "NormalizationParams":
        """Parameters for the dataset with covariate ``column_index`` removed."""
        keep = [j for j in range(self.x_scale.size) if j != column_index]
        return NormalizationParams(self.x_scale[keep], self.x_offset[keep],
                                   self.y_scale, self.y_offset)

    def to_dict(self):
        return {"x_scale": self.x_scale.tolist(), "x_offset": self.x_offset.tolist(),
                "y_scale": self.y_scale, "y_offset": self.y_offset}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["x_scale"], float), np.asarray(d["x_offset"], float),
                   float(d["y_scale"]), float(d["y_offset"]))


def _parse(cell):
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def check_bounds(dataset: SurveyDataset, policy="warn"):
    """Apply the ``|x|_inf <= 1, |y| <= 1`` policy: ``"strict"``, ``"warn"`` or ``"off"``."""
    policy = str(policy).lower()
    if policy not in ("strict", "warn", "off"):
        raise InputError(f"unknown bounds policy {policy!r}")
    if policy == "off" or dataset.empty:
        return 0
    violations = int(np.sum(np.abs(dataset.X) > 1.0) + np.sum(np.abs(dataset.y) > 1.0))
    if violations and policy == "strict":
        rows = np.nonzero((np.abs(dataset.X) > 1.0).any(axis=1) | (np.abs(dataset.y) > 1.0))[0]
        raise InputError(f"{violations} values exceed 1 in absolute value "
                         f"(first offending data row {rows[0] + 1})")
    if violations:
        logger.warning("%d values exceed 1 in absolute value", violations)
    return violations


def load_csv(path, response_column, drop_non_numeric=False, normalize=False,
             enforce_bounds="warn"):
    """Read a headered CSV into a dataset.

    Numeric columns other than ``response_column`` become covariates in
    header order. Returns ``(dataset, params)`` where ``params`` is the
    fitted :class:`NormalizationParams` or ``None`` when ``normalize`` is off.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if response_column not in header:
        raise InputError(f"{path}: response column {response_column!r} not in header")
    if not body:
        raise InputError(f"{path}: no data rows")
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise InputError(f"{path}: line {i} has {len(r)} fields, expected {len(header)}")

    columns = {}
    for j, name in enumerate(header):
        values = [_parse(r[j]) for r in body]
        bad = [i for i, v in enumerate(values) if v is None]
        if bad:
            if drop_non_numeric and name != response_column:
                logger.info("dropping non-numeric column %r", name)
                continue
            i = bad[0]
            raise InputError(f"{path}: non-numeric value {body[i][j]!r} at line {i + 2}, "
                             f"column {name!r}")
        columns[name] = values

    names = tuple(n for n in header if n in columns and n != response_column)
    X = np.array([columns[n] for n in names], dtype=float).T.reshape(len(body), len(names))
    y = np.array(columns[response_column], dtype=float)
    dataset = SurveyDataset(X, y, feature_names=names)
    params = None
    if normalize:
        params = NormalizationParams.fit(dataset)
        dataset = params.apply(dataset)
    check_bounds(dataset, enforce_bounds)
    return dataset, params


def write_csv(dataset: SurveyDataset, path, response_column="y",
              feature_names: Optional[Sequence[str]] = None):
    """Write ``dataset`` with shortest round-trip float formatting."""
    names = feature_names or dataset.feature_names or [f"x{j}" for j in range(dataset.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [response_column])
        for x, y in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def split_by_column(dataset: SurveyDataset, column_index: int, value: float):
    """Partition rows on ``X[:, column_index] == value`` and drop that column.

    Returns ``(matching, rest)``; either side may be an empty dataset.
    """
    if not isinstance(column_index, (int, np.integer)) or not 0 <= column_index < dataset.d:
        raise InputError(f"column index {column_index!r} out of range for d={dataset.d}")
    mask = dataset.X[:, column_index] == value
    keep = [j for j in range(dataset.d) if j != column_index]
    names = None
    if dataset.feature_names is not None:
        names = tuple(dataset.feature_names[j] for j in keep)

    def part(rows):
        return SurveyDataset(dataset.X[rows][:, keep], dataset.y[rows], feature_names=names)

    return part(mask), part(~mask)
