"""Multi-domain datasets, the distributional-variance coefficient matrix and domain-level Grams."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, ParseError
from .kernels import GramMatrix, kernel_matrix


@dataclass(frozen=True)
class Domain:
    inputs: np.ndarray
    outputs: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.array(self.inputs, dtype=float, copy=True)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise InputError(f"domain inputs must be a nonempty n_i x d matrix, got {x.shape}")
        x.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        if self.outputs is not None:
            y = np.array(self.outputs, dtype=float, copy=True).reshape(-1)
            if y.shape[0] != x.shape[0]:
                raise InputError(f"{y.shape[0]} outputs for {x.shape[0]} inputs")
            y.flags.writeable = False
            object.__setattr__(self, "outputs", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class DomainDataset:
    """N domains in a fixed order; flattening is domain-major."""

    domains: tuple
    ids: Optional[tuple] = None

    def __post_init__(self):
        doms = tuple(d if isinstance(d, Domain) else Domain(*d) for d in self.domains)
        if len(doms) < 1:
            raise InputError("a dataset needs at least one domain")
        dims = {d.inputs.shape[1] for d in doms}
        if len(dims) != 1:
            raise InputError(f"domains disagree on input dimension: {sorted(dims)}")
        has_y = {d.outputs is not None for d in doms}
        if len(has_y) != 1:
            raise InputError("outputs must be present on all domains or on none")
        ids = tuple(range(len(doms))) if self.ids is None else tuple(int(i) for i in self.ids)
        if len(ids) != len(doms) or len(set(ids)) != len(ids):
            raise InputError("domain ids must be unique, one per domain")
        object.__setattr__(self, "domains", doms)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_arrays(cls, inputs: Sequence, outputs: Optional[Sequence] = None, ids=None):
        if outputs is None:
            outputs = [None] * len(inputs)
        return cls(tuple(Domain(x, y) for x, y in zip(inputs, outputs)), ids)

    @property
    def sizes(self) -> tuple:
        return tuple(d.n for d in self.domains)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def n_domains(self) -> int:
        return len(self.domains)

    @property
    def dim(self) -> int:
        return self.domains[0].inputs.shape[1]

    @property
    def has_outputs(self) -> bool:
        return self.domains[0].outputs is not None

    def flatten(self):
        return flatten(self)

    def subset(self, indices) -> "DomainDataset":
        """Dataset made of the domains at the given positions, in that order."""
        indices = list(indices)
        return DomainDataset(tuple(self.domains[i] for i in indices), tuple(self.ids[i] for i in indices))

    def concat(self, other: "DomainDataset") -> "DomainDataset":
        ids = self.ids + other.ids
        if len(set(ids)) != len(ids):
            ids = None
        return DomainDataset(self.domains + other.domains, ids)


def flatten(data: DomainDataset):
    """Stack domains in order.

    Returns
    -------
    inputs : (n, d) array
    outputs : (n,) array or None
    domain_ids : (n,) int array with the 0-based block index of each row
    """
    x = np.vstack([d.inputs for d in data.domains])
    y = np.concatenate([d.outputs for d in data.domains]) if data.has_outputs else None
    ids = np.repeat(np.arange(data.n_domains), data.sizes)
    return x, y, ids


def block_ids(sizes) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


# ---------------------------------------------------------------------------
# coefficient matrix and variance estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientMatrix:
    values: np.ndarray
    domain_sizes: tuple

    @property
    def block_weights(self) -> np.ndarray:
        """The N x N matrix of per-block constants."""
        return _block_weights(self.domain_sizes)


def _block_weights(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    big_n = len(sizes)
    w = -1.0 / (big_n**2 * np.outer(sizes, sizes))
    np.fill_diagonal(w, (big_n - 1) / (big_n**2 * sizes**2))
    return w


def coefficient_matrix(domain_sizes) -> CoefficientMatrix:
    sizes = tuple(int(s) for s in domain_sizes)
    if len(sizes) == 0:
        raise InputError("coefficient_matrix needs at least one domain size")
    if any(s < 1 for s in sizes):
        raise InputError(f"domain sizes must be >= 1, got {sizes}")
    ids = block_ids(sizes)
    values = _block_weights(sizes)[np.ix_(ids, ids)]
    values.flags.writeable = False
    return CoefficientMatrix(values, sizes)


def block_sums(k, row_sizes, col_sizes=None) -> np.ndarray:
    """Sum of every (i, j) block of ``k`` for the given row/column partitions."""
    k = np.asarray(k, dtype=float)
    col_sizes = row_sizes if col_sizes is None else col_sizes
    er = np.zeros((len(row_sizes), k.shape[0]))
    er[block_ids(row_sizes), np.arange(k.shape[0])] = 1.0
    ec = np.zeros((len(col_sizes), k.shape[1]))
    ec[block_ids(col_sizes), np.arange(k.shape[1])] = 1.0
    return er @ k @ ec.T


@dataclass(frozen=True)
class DomainGram:
    """N x N inner products between empirical mean embeddings."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError("domain Gram must be square")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n_domains(self) -> int:
        return self.values.shape[0]


def domain_gram_matrix(k, sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    g = block_sums(k, [int(s) for s in sizes]) / np.outer(sizes, sizes)
    return 0.5 * (g + g.T)


def domain_gram(g: GramMatrix) -> DomainGram:
    return DomainGram(domain_gram_matrix(g.values, g.domain_sizes))


def distributional_variance(g: GramMatrix, q: CoefficientMatrix) -> float:
    """Empirical distributional variance ``tr(K Q)``."""
    if tuple(g.domain_sizes) != tuple(q.domain_sizes):
        raise InputError(f"size mismatch: Gram {g.domain_sizes} vs Q {q.domain_sizes}")
    return float(np.einsum("ij,ji->", g.values, q.values))


def distributional_variance_gramform(dg: DomainGram) -> float:
    g = dg.values
    big_n = g.shape[0]
    return float(np.trace(g) / big_n - g.sum() / big_n**2)


def embedding_deviations(dg: DomainGram) -> np.ndarray:
    """Squared RKHS distances of each domain embedding from the mean embedding."""
    g = dg.values
    big_n = g.shape[0]
    return np.diag(g) - 2.0 * g.mean(axis=1) + g.sum() / big_n**2


def mmd_squared(dg: DomainGram, i: int, j: int) -> float:
    n_dom = dg.n_domains
    for idx in (i, j):
        if not 0 <= idx < n_dom:
            raise IndexError(f"domain index {idx} out of range for {n_dom} domains")
    g = dg.values
    return float(g[i, i] + g[j, j] - 2.0 * g[i, j])


def mmd_squared_matrix(dg: DomainGram) -> np.ndarray:
    g = dg.values
    d = np.diag(g)
    return d[:, None] + d[None, :] - 2.0 * g


def mean_pairwise_mmd(blocks, kernel) -> float:
    """Mean squared MMD over all pairs of sample blocks under ``kernel``.

    ``kernel`` is a resolved :class:`~dica.kernels.KernelSpec`; each block is
    an ``(n_i, d)`` array. Uses the biased (V-statistic) estimate.
    """
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if len(blocks) < 2:
        raise InputError("need at least two blocks")
    self_terms = [kernel_matrix(kernel, b, b).mean() for b in blocks]
    vals = []
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            cross = kernel_matrix(kernel, blocks[i], blocks[j]).mean()
            vals.append(self_terms[i] + self_terms[j] - 2.0 * cross)
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# CSV format: domain_id, [y], x1..xd
# ---------------------------------------------------------------------------

def write_dataset_csv(data: DomainDataset, path) -> Path:
    path = Path(path)
    d = data.dim
    header = ["domain_id"] + (["y"] if data.has_outputs else []) + [f"x{j + 1}" for j in range(d)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for did, dom in zip(data.ids, data.domains):
            for a in range(dom.n):
                row = [str(did)]
                if data.has_outputs:
                    row.append(f"{dom.outputs[a]:.17g}")
                row.extend(f"{v:.17g}" for v in dom.inputs[a])
                w.writerow(row)
    return path


def read_dataset_csv(path) -> DomainDataset:
    """Load the shared dataset CSV; rows are regrouped by ``domain_id`` (ascending)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=1) from None
        if "domain_id" not in header:
            raise ParseError(f"{path}: missing 'domain_id' column", row=1)
        xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
        xcols.sort(key=lambda i: int(header[i][1:]))
        if not xcols:
            raise ParseError(f"{path}: no x1..xd columns", row=1)
        did_col = header.index("domain_id")
        y_col = header.index("y") if "y" in header else None
        groups = {}
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}", row=rownum)
            try:
                did = int(row[did_col])
                x = [float(row[i]) for i in xcols]
                y = float(row[y_col]) if y_col is not None else None
            except ValueError as exc:
                raise ParseError(f"{path}: row {rownum}: {exc}", row=rownum) from None
            groups.setdefault(did, ([], []))
            groups[did][0].append(x)
            groups[did][1].append(y)
    if not groups:
        raise ParseError(f"{path}: no data rows", row=2)
    ids = sorted(groups)
    inputs = [np.array(groups[i][0]) for i in ids]
    outputs = [np.array(groups[i][1]) for i in ids] if y_col is not None else None
    return DomainDataset.from_arrays(inputs, outputs, ids)
