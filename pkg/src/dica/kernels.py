"""Kernel functions, pooled/cross Gram matrices and centering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import ConfigError, InputError

FAMILIES = ("gaussian-rbf", "linear", "delta")


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth.

    ``bandwidth`` is only used by ``gaussian-rbf``. Leaving it as ``None``
    defers the choice to :func:`median_heuristic` via :meth:`resolve`.
    """

    family: str = "gaussian-rbf"
    bandwidth: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "gaussian-rbf" and self.bandwidth is not None:
            if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
                raise ConfigError(f"rbf bandwidth must be positive, got {self.bandwidth}")

    def resolve(self, x) -> "KernelSpec":
        """Return a copy with the bandwidth fixed, using the median heuristic on ``x`` if unset."""
        if self.family != "gaussian-rbf" or self.bandwidth is not None:
            return self
        return KernelSpec(self.family, median_heuristic(x))

    def to_dict(self):
        return {"family": self.family, "bandwidth": self.bandwidth}

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], d.get("bandwidth"))


def median_heuristic(x) -> float:
    """Median pairwise Euclidean distance; 1.0 when it is zero or undefined."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(x)))
    return med if med > 0 else 1.0


def _as_rows(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InputError(f"expected a sample matrix, got array of shape {x.shape}")
    return x


def _check_labels(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 2 and a.shape[1] == 1:
        a = a[:, 0]
    if a.ndim != 1:
        raise ConfigError("delta kernel is only defined on scalar labels")
    if not np.all(np.isfinite(a)) or np.any(a != np.round(a)):
        raise ConfigError("delta kernel requires discrete (integer-valued) labels")
    return a


def _bandwidth(spec):
    if spec.bandwidth is None:
        raise ConfigError("rbf bandwidth is unset; call KernelSpec.resolve first")
    return float(spec.bandwidth)


def eval_kernel(spec: KernelSpec, x, z) -> float:
    if spec.family == "delta":
        a, b = np.asarray(x, dtype=float), np.asarray(z, dtype=float)
        if a.size != 1 or b.size != 1:
            raise ConfigError("delta kernel is only defined on scalar labels")
        _check_labels(a.reshape(1))
        _check_labels(b.reshape(1))
        return 1.0 if a.item() == b.item() else 0.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if x.shape != z.shape:
        raise InputError(f"dimension mismatch: {x.shape} vs {z.shape}")
    if spec.family == "linear":
        return float(np.dot(x, z))
    s = _bandwidth(spec)
    d2 = float(np.sum((x - z) ** 2))
    return float(np.exp(-d2 / (2.0 * s * s)))


def kernel_matrix(spec: KernelSpec, x, z) -> np.ndarray:
    """Dense matrix ``[k(x_a, z_b)]``. Inputs are sample matrices (or label vectors for delta)."""
    if spec.family == "delta":
        a, b = _check_labels(x), _check_labels(z)
        return (a[:, None] == b[None, :]).astype(float)
    x, z = _as_rows(x), _as_rows(z)
    if x.shape[1] != z.shape[1]:
        raise InputError(f"dimension mismatch: {x.shape[1]} vs {z.shape[1]}")
    if spec.family == "linear":
        return x @ z.T
    s = _bandwidth(spec)
    return np.exp(-cdist(x, z, "sqeuclidean") / (2.0 * s * s))


def symmetric_kernel_matrix(spec: KernelSpec, x) -> np.ndarray:
    """Kernel matrix of ``x`` against itself, made exactly symmetric from its upper triangle."""
    k = kernel_matrix(spec, x, x)
    upper = np.triu(k)
    return upper + np.triu(k, 1).T


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    domain_sizes: tuple
    centered: bool = False

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError(f"Gram matrix must be square, got {v.shape}")
        sizes = tuple(int(s) for s in self.domain_sizes)
        if sum(sizes) != v.shape[0] or any(s < 1 for s in sizes):
            raise InputError(f"domain sizes {sizes} do not partition n={v.shape[0]}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "domain_sizes", sizes)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CrossGram:
    values: np.ndarray
    train_sizes: tuple
    centered: bool = False

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise InputError("cross Gram must be a matrix")
        sizes = tuple(int(s) for s in self.train_sizes)
        if sum(sizes) != v.shape[1]:
            raise InputError(f"cross Gram width {v.shape[1]} != training size {sum(sizes)}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "train_sizes", sizes)


def pooled_gram(spec: KernelSpec, data, on_outputs: bool = False) -> GramMatrix:
    """Uncentered Gram matrix over the flattened (domain-major) sample."""
    x, y, _ = data.flatten()
    if on_outputs:
        if y is None:
            raise InputError("pooled_gram(on_outputs=True) requires outputs on every domain")
        x = y
    return GramMatrix(symmetric_kernel_matrix(spec, x), data.sizes, centered=False)


def center_matrix(k) -> np.ndarray:
    """``H K H`` with ``H = I - 11^T/n`` computed by mean subtraction."""
    k = np.asarray(k, dtype=float)
    col = k.mean(axis=0)
    row = k.mean(axis=1)
    c = k - col[None, :] - row[:, None] + k.mean()
    return 0.5 * (c + c.T)


def center_gram(g: GramMatrix) -> GramMatrix:
    return GramMatrix(center_matrix(g.values), g.domain_sizes, centered=True)


def cross_gram(spec: KernelSpec, test, train) -> CrossGram:
    x, _, _ = train.flatten()
    return CrossGram(kernel_matrix(spec, test, x), train.sizes, centered=False)


def center_cross_matrix(kt, col_means, grand_mean) -> np.ndarray:
    """Center test-vs-train kernel rows against training statistics.

    ``col_means`` are the column means of the uncentered training Gram and
    ``grand_mean`` its overall mean.
    """
    kt = np.asarray(kt, dtype=float)
    return kt - col_means[None, :] - kt.mean(axis=1)[:, None] + grand_mean


def center_cross_gram(cg: CrossGram, train_gram: GramMatrix) -> CrossGram:
    if train_gram.centered or cg.centered:
        raise InputError("center_cross_gram expects uncentered inputs")
    if cg.values.shape[1] != train_gram.n:
        raise InputError(f"cross Gram width {cg.values.shape[1]} != training size {train_gram.n}")
    k = train_gram.values
    values = center_cross_matrix(cg.values, k.mean(axis=0), k.mean())
    return CrossGram(values, cg.train_sizes, centered=True)
