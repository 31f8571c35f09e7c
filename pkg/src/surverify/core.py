"""Domain types: datasets, hypothesis classes, kernels and fitted models."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import InputError
from .utils.validation import check_matrix, check_positive, check_positive_int, check_vector

#: Slack allowed on norm constraints when validating fitted models.
NORM_TOL = 1e-9

_CLASS_ALIASES = {
    "l1": "l1", "lasso": "l1",
    "l2": "l2", "ridge": "l2",
    "sparse": "sparse_l1", "sparse_l1": "sparse_l1",
    "kernel": "kernel",
}


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class LabeledSample(NamedTuple):
    x: np.ndarray
    y: float


@dataclass(frozen=True, eq=False)
class SurveyDataset:
    """Covariates ``X`` (m x d) and responses ``y`` (m,).

    An empty dataset (``m == 0``) is representable so that subgroup splits can
    report an empty side; every operation that needs data rejects it.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise InputError(f"X must be 2-dimensional, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != X.shape[1]:
                raise InputError(f"{len(names)} feature names for {X.shape[1]} columns")
            object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))

    @classmethod
    def from_samples(cls, samples, d=None):
        samples = list(samples)
        if not samples:
            if d is None:
                raise InputError("cannot infer dimension of an empty sample list")
            return cls(np.empty((0, d)), np.empty(0))
        X = np.vstack([np.asarray(s.x, dtype=float) for s in samples])
        y = np.array([float(s.y) for s in samples])
        return cls(X, y)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def empty(self) -> bool:
        return self.m == 0

    def __len__(self):
        return self.m

    def __iter__(self) -> Iterator[LabeledSample]:
        for i in range(self.m):
            yield LabeledSample(self.X[i], float(self.y[i]))

    def __getitem__(self, i) -> LabeledSample:
        return LabeledSample(self.X[i], float(self.y[i]))

    def __eq__(self, other):
        if not isinstance(other, SurveyDataset):
            return NotImplemented
        return np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y)

    __hash__ = None

    def require_nonempty(self, what="dataset"):
        if self.empty:
            raise InputError(f"{what} is empty")
        return self


@dataclass(frozen=True)
class KernelSpec:
    """A positive semidefinite kernel.

    ``kind`` is ``"rbf"`` (``exp(-|x-x'|^2 / (2 bandwidth^2))``),
    ``"polynomial"`` (``(<x,x'> + offset)^degree``) or ``"linear"``.
    """

    kind: str = "rbf"
    bandwidth: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "polynomial", "linear"):
            raise InputError(f"unknown kernel kind {self.kind!r}")
        check_positive(self.bandwidth, "bandwidth")
        check_positive_int(self.degree, "degree")
        if not self.offset >= 0:
            raise InputError("offset must be non-negative")

    def r_squared(self, d: int) -> float:
        """Upper bound on ``K(x, x)`` over the cube ``|x|_inf <= 1`` in dimension ``d``."""
        if self.kind == "rbf":
            return 1.0
        if self.kind == "linear":
            return float(d)
        return float((d + self.offset) ** self.degree)

    def __call__(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        if self.kind == "rbf":
            return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * self.bandwidth ** 2))
        inner = A @ B.T
        if self.kind == "linear":
            return inner
        return (inner + self.offset) ** self.degree

    def to_dict(self):
        return {"kind": self.kind, "bandwidth": self.bandwidth,
                "degree": self.degree, "offset": self.offset}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], bandwidth=float(d["bandwidth"]),
                   degree=int(d["degree"]), offset=float(d["offset"]))


@dataclass(frozen=True)
class HypothesisClass:
    """A norm-bounded regression family.

    ``variant`` is one of ``"l1"``, ``"l2"``, ``"sparse_l1"`` or ``"kernel"``.
    Use the constructors :meth:`lasso`, :meth:`ridge`, :meth:`sparse` and
    :meth:`kernel_ball` rather than building instances by hand.
    """

    variant: str
    radius: float = 1.0
    sparsity: Optional[int] = None
    kernel: Optional[KernelSpec] = None

    def __post_init__(self):
        variant = _CLASS_ALIASES.get(self.variant)
        if variant is None:
            raise InputError(f"unknown hypothesis class {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        check_positive(self.radius, "radius")
        if variant == "sparse_l1":
            check_positive_int(self.sparsity, "sparsity")
        if variant == "kernel" and self.kernel is None:
            object.__setattr__(self, "kernel", KernelSpec())

    @classmethod
    def lasso(cls, radius=1.0):
        return cls("l1", radius)

    @classmethod
    def ridge(cls, radius=1.0):
        return cls("l2", radius)

    @classmethod
    def sparse(cls, s, radius=1.0):
        return cls("sparse_l1", radius, sparsity=s)

    @classmethod
    def kernel_ball(cls, kernel=None, radius=1.0):
        return cls("kernel", radius, kernel=kernel or KernelSpec())

    @classmethod
    def from_name(cls, name, radius=1.0, sparsity=None, kernel=None):
        variant = _CLASS_ALIASES.get(str(name).lower())
        if variant is None:
            raise InputError(f"unknown hypothesis class {name!r}; "
                             f"choose from {sorted(_CLASS_ALIASES)}")
        return cls(variant, radius, sparsity=sparsity, kernel=kernel)

    @property
    def is_kernel(self):
        return self.variant == "kernel"

    def check_dimension(self, d):
        if self.variant == "sparse_l1" and self.sparsity > d:
            raise InputError(f"sparsity {self.sparsity} exceeds dimension {d}")

    def to_dict(self):
        out = {"variant": self.variant, "radius": self.radius}
        if self.sparsity is not None:
            out["sparsity"] = self.sparsity
        if self.kernel is not None:
            out["kernel"] = self.kernel.to_dict()
        return out

    @classmethod
    def from_dict(cls, d):
        kernel = KernelSpec.from_dict(d["kernel"]) if d.get("kernel") else None
        return cls(d["variant"], float(d["radius"]), sparsity=d.get("sparsity"),
                   kernel=kernel)


@dataclass(frozen=True)
class FittedModel:
    """A learned predictor in primal (``coef``) or dual (``dual_coef`` + ``support``) form.

    ``converged`` and ``n_iter`` carry solver metadata; they do not affect
    predictions.
    """

    hypothesis: HypothesisClass
    coef: Optional[np.ndarray] = None
    dual_coef: Optional[np.ndarray] = None
    support: Optional[np.ndarray] = None
    converged: bool = True
    n_iter: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.hypothesis.is_kernel:
            if self.dual_coef is None or self.support is None:
                raise InputError("kernel models need dual_coef and support")
            alpha = check_vector(self.dual_coef, "dual_coef")
            support = check_matrix(self.support, "support")
            if support.shape[0] != alpha.shape[0]:
                raise InputError("dual_coef and support lengths differ")
            object.__setattr__(self, "dual_coef", _frozen(alpha))
            object.__setattr__(self, "support", _frozen(support))
        else:
            if self.coef is None:
                raise InputError("linear models need coef")
            object.__setattr__(self, "coef", _frozen(check_vector(self.coef, "coef")))

    @property
    def is_dual(self) -> bool:
        return self.hypothesis.is_kernel

    @property
    def d(self) -> int:
        return self.support.shape[1] if self.is_dual else self.coef.shape[0]

    def predict(self, X) -> np.ndarray:
        X = check_matrix(X, "X", n_features=self.d, allow_empty=True)
        if self.is_dual:
            return self.hypothesis.kernel(X, self.support) @ self.dual_coef
        return X @ self.coef

    def norm(self) -> float:
        """Norm of the model in its hypothesis class (``l1``, ``l2`` or RKHS)."""
        if self.is_dual:
            G = self.hypothesis.kernel(self.support, self.support)
            return float(np.sqrt(max(self.dual_coef @ G @ self.dual_coef, 0.0)))
        if self.hypothesis.variant == "l2":
            return float(np.linalg.norm(self.coef))
        return float(np.abs(self.coef).sum())

    def is_feasible(self, tol=NORM_TOL) -> bool:
        ok = self.norm() <= self.hypothesis.radius + tol
        if self.hypothesis.variant == "sparse_l1":
            ok = ok and np.count_nonzero(self.coef) <= self.hypothesis.sparsity
        return bool(ok)

    def scaled(self, c: float) -> "FittedModel":
        """Return the model with all coefficients multiplied by ``c`` (no feasibility check)."""
        if self.is_dual:
            return FittedModel(self.hypothesis, dual_coef=c * self.dual_coef,
                               support=self.support)
        return FittedModel(self.hypothesis, coef=c * self.coef)

    def to_dict(self):
        if self.is_dual:
            rep = {"kind": "dual", "alpha": self.dual_coef.tolist(),
                   "support": self.support.tolist()}
        else:
            rep = {"kind": "primal", "beta": self.coef.tolist()}
        return {"class": self.hypothesis.to_dict(), "representation": rep, "d": self.d,
                "converged": self.converged, "n_iter": self.n_iter}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        hyp = HypothesisClass.from_dict(d["class"])
        rep = d["representation"]
        if rep["kind"] == "dual":
            model = cls(hyp, dual_coef=np.array(rep["alpha"], dtype=float),
                        support=np.array(rep["support"], dtype=float),
                        converged=d.get("converged", True), n_iter=d.get("n_iter", 0))
        elif rep["kind"] == "primal":
            model = cls(hyp, coef=np.array(rep["beta"], dtype=float),
                        converged=d.get("converged", True), n_iter=d.get("n_iter", 0))
        else:
            raise InputError(f"unknown representation {rep['kind']!r}")
        if model.d != int(d["d"]):
            raise InputError(f"declared dimension {d['d']} does not match coefficients")
        return model

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        return cls.from_dict(json.loads(text))


def predict(model: FittedModel, x) -> float:
    """Prediction of ``model`` at a single covariate vector ``x``."""
    x = check_vector(x, "x", size=model.d)
    return float(model.predict(x.reshape(1, -1))[0])


def gram_matrix(kernel: KernelSpec, X) -> np.ndarray:
    """Symmetric Gram matrix ``G[i, j] = K(X[i], X[j])``."""
    X = check_matrix(X, "X")
    G = kernel(X, X)
    return 0.5 * (G + G.T)
