"""Domain-invariant component fits (DICA, UDICA) and the COIR/KPCA special cases.

All four modes solve a generalized eigenproblem ``A B = C B G`` on centered
kernel matrices and keep the leading ``m`` directions:

======  ==============================  ===================
mode    A                               C
======  ==============================  ===================
dica    S K^2 / n                       K Q K + K + lam I
udica   K^2 / n                         K Q K + K + lam I
coir    K S K / n                       K + lam I
kpca    K                               I
======  ==============================  ===================

with ``S = L (L + n eps I)^-1`` built from the centered output kernel ``L``.
For dica the matrix ``C^-1 A`` is not symmetric; its leading eigenvectors are
``C``-orthonormalized in order, which leaves their span (and hence the
projected kernel) unchanged and yields ``B^T C B = I``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from . import eigen
from .domains import DomainDataset, block_ids, coefficient_matrix, _block_weights
from .errors import ConfigError, InputError
from .kernels import (
    CrossGram,
    GramMatrix,
    KernelSpec,
    center_cross_matrix,
    center_matrix,
    kernel_matrix,
    symmetric_kernel_matrix,
)

MODES = ("dica", "udica", "coir", "kpca")
SUPERVISED = ("dica", "coir")


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters of a fit.

    ``epsilon=None`` picks 1e-4 for a delta output kernel and 1e-2 otherwise.
    ``solver="dense"`` forms ``C^-1 A`` explicitly and runs the dense
    nonsymmetric eigensolver for every mode; ``"auto"`` uses the exact
    symmetric or output-rank-reduced routes, which are much cheaper.
    """

    mode: str = "dica"
    m: int = 2
    epsilon: Optional[float] = None
    lam: float = 1e-4
    imag_tol: float = eigen.IMAG_TOL
    solver: str = "auto"
    rank_tol: float = 1e-13

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m must be a positive integer, got {self.m}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if self.mode != "kpca" and not self.lam > 0:
            raise ConfigError(f"mode {self.mode} needs lambda > 0 for a definite right-hand side")
        if self.solver not in ("auto", "dense"):
            raise ConfigError(f"unknown solver {self.solver!r}")

    def resolved_epsilon(self, ky: Optional[KernelSpec]) -> Optional[float]:
        if self.mode not in SUPERVISED:
            return self.epsilon
        if self.epsilon is not None:
            return self.epsilon
        return 1e-4 if ky is not None and ky.family == "delta" else 1e-2

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass(frozen=True)
class Transform:
    """A fitted transform.

    ``b`` holds the coefficient vectors as columns; training features are
    ``K b`` and test features ``K^t b`` with ``K^t`` centered against the
    training sample. ``rayleigh`` is ``b^T A b`` (upper triangular, with
    ``gamma`` on its diagonal).
    """

    b: np.ndarray
    gamma: np.ndarray
    train_gram: GramMatrix
    config: FitConfig
    domain_sizes: tuple
    kx: KernelSpec
    ky: Optional[KernelSpec]
    train_inputs: np.ndarray
    col_means: np.ndarray
    grand_mean: float
    rayleigh: np.ndarray
    max_imag: float = 0.0
    effective_rank: int = 0

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def n(self) -> int:
        return self.b.shape[0]

    def train_features(self) -> np.ndarray:
        return self.train_gram.values @ self.b

    def center_cross(self, x_test) -> CrossGram:
        kt = kernel_matrix(self.kx, x_test, self.train_inputs)
        return CrossGram(center_cross_matrix(kt, self.col_means, self.grand_mean), self.domain_sizes, centered=True)

    def features(self, x_test) -> np.ndarray:
        """Projections of new inputs onto the learned basis functions, shape (n_t, m)."""
        return self.center_cross(x_test).values @ self.b


@dataclass(frozen=True)
class ProjectedKernel:
    values: np.ndarray
    train: bool


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _indicator(sizes) -> np.ndarray:
    n = sum(sizes)
    e = np.zeros((n, len(sizes)))
    e[np.arange(n), block_ids(sizes)] = 1.0
    return e


def kqk(k, sizes) -> np.ndarray:
    """``K Q K`` via the block structure of ``Q``: ``(K E) W (K E)^T``."""
    ke = k @ _indicator(sizes)
    out = ke @ _block_weights(sizes) @ ke.T
    return 0.5 * (out + out.T)


def output_projector(l_raw, n_eps, rank_tol=1e-13, min_cols=0):
    """Thin eigendecomposition of ``S = L (L + n eps I)^-1`` for the centered ``L``.

    ``l_raw`` is the *uncentered* output Gram. A pivoted Cholesky factor
    ``l_raw ~ G G^T`` (pivots below ``rank_tol * max(diag)`` dropped) is
    column-centered, which centers ``L``; its SVD then gives ``S`` exactly on
    the retained range. Returns ``(v, s)`` with orthonormal ``v`` (at least
    ``min_cols`` columns, padded with ``s = 0`` directions) and ``s``
    descending.
    """
    l_raw = 0.5 * (l_raw + l_raw.T)
    n = l_raw.shape[0]
    tol = rank_tol * max(float(np.max(np.diag(l_raw))), np.finfo(float).tiny)
    c, piv, rank, info = lapack.dpstrf(l_raw, tol=tol, lower=1)
    if info < 0:
        raise InputError(f"invalid argument {-info} to dpstrf")
    g = np.zeros((n, rank))
    g[piv - 1] = np.tril(c)[:, :rank]
    g -= g.mean(axis=0)
    u, sv, _ = sla.svd(g, full_matrices=False)
    w = sv**2
    keep = w > 0
    u, w = u[:, keep], w[keep]
    s = w / (w + n_eps)
    if u.shape[1] < min_cols:
        extra, _ = eigen.orthonormalize_constraint(
            np.hstack([u, np.eye(n)[:, : min_cols + u.shape[1]]]), np.eye(n), min(n, min_cols)
        )
        u = np.hstack([u, extra[:, u.shape[1]:]])
        s = np.concatenate([s, np.zeros(u.shape[1] - s.size)])
    return u, s


def output_projector_dense(l, n_eps) -> np.ndarray:
    """``S`` by a linear solve, symmetrized to remove round-off asymmetry."""
    n = l.shape[0]
    s = eigen.solve_spd(l + n_eps * np.eye(n), l).T
    return 0.5 * (s + s.T)


def _lhs_operator(mode, k, s_factor):
    """Function ``B -> A B`` for the given mode without forming ``A``."""
    n = k.shape[0]
    if mode == "kpca":
        return lambda b: k @ b
    if mode == "udica":
        return lambda b: k @ (k @ b) / n
    if isinstance(s_factor, tuple):
        v, s = s_factor
        apply_s = lambda x: v @ (s[:, None] * (v.T @ x))
    else:
        apply_s = lambda x: s_factor @ x
    if mode == "dica":
        return lambda b: apply_s(k @ (k @ b)) / n
    return lambda b: k @ apply_s(k @ b) / n


def _solve_dense(a, c, m, imag_tol):
    mm = a if c is None else eigen.solve_spd(c, a)
    res = eigen.top_eig_nonsymmetric(mm, m, imag_tol)
    metric = np.eye(a.shape[0]) if c is None else c
    cands = np.hstack([res.vectors, np.eye(a.shape[0])])
    b, _ = eigen.orthonormalize_constraint(cands, metric, m)
    return b, res.values, res.max_imag


def fit(data: DomainDataset, kx: KernelSpec, ky: Optional[KernelSpec], config: FitConfig) -> Transform:
    """Fit a transform on the pooled training domains."""
    mode, m = config.mode, int(config.m)
    x, y, _ = data.flatten()
    n = x.shape[0]
    if m > n:
        raise InputError(f"m={m} exceeds the number of training points n={n}")
    sizes = data.sizes

    kx = kx.resolve(x)
    k_raw = symmetric_kernel_matrix(kx, x)
    k = center_matrix(k_raw)

    s_factor = None
    eps = None
    if mode in SUPERVISED:
        if y is None:
            raise InputError(f"mode {mode} requires outputs on every training domain")
        if ky is None:
            raise ConfigError(f"mode {mode} requires an output kernel")
        ky = ky.resolve(y)
        eps = config.resolved_epsilon(ky)
        l_raw = symmetric_kernel_matrix(ky, y)
        if config.solver == "dense":
            s_factor = output_projector_dense(center_matrix(l_raw), n * eps)
        else:
            s_factor = output_projector(l_raw, n * eps, config.rank_tol, min_cols=m)
    else:
        ky = None

    lam = config.lam
    if mode in ("dica", "udica"):
        c = kqk(k, sizes) + k + lam * np.eye(n)
    elif mode == "coir":
        c = k + lam * np.eye(n)
    else:
        c = None

    apply_a = _lhs_operator(mode, k, s_factor)
    max_imag = 0.0

    if config.solver == "dense":
        a = apply_a(np.eye(n))
        b, gamma, max_imag = _solve_dense(a, c, m, config.imag_tol)
    elif mode == "kpca":
        res = eigen.top_eig_symmetric(k, m)
        b, gamma = res.vectors, res.values
    elif mode == "udica":
        r = eigen.cholesky_pd(c)
        z = sla.solve_triangular(r, k, lower=True)
        res = eigen.top_eig_symmetric(z @ z.T / n, m)
        b = sla.solve_triangular(r.T, res.vectors, lower=False)
        gamma = res.values
    else:
        v_r, s_r = s_factor
        chol = eigen.cholesky_pd(c)
        if mode == "coir":
            p = sla.solve_triangular(chol, k @ (v_r * np.sqrt(s_r)[None, :]), lower=True)
            u, sv, _ = sla.svd(p, full_matrices=False)
            b = sla.solve_triangular(chol.T, u[:, :m], lower=False)
            gamma = sv[:m] ** 2 / n
        else:
            g = sla.cho_solve((chol, True), v_r)
            reduced = s_r[:, None] * (v_r.T @ (k @ (k @ g))) / n
            res = eigen.top_eig_nonsymmetric(reduced, m, config.imag_tol)
            cands = np.hstack([g @ res.vectors, g])
            b, _ = eigen.orthonormalize_constraint(cands, c, m)
            gamma, max_imag = res.values, res.max_imag

    b = eigen.fix_signs(b)
    rayleigh = b.T @ apply_a(b)
    top = gamma[0] if gamma.size else 0.0
    eff = int(np.sum(gamma > 1e-12 * top)) if top > 0 else 0

    return Transform(
        b=_ro(b),
        gamma=_ro(gamma),
        train_gram=GramMatrix(k, sizes, centered=True),
        config=replace(config, epsilon=eps) if eps is not None else config,
        domain_sizes=tuple(sizes),
        kx=kx,
        ky=ky,
        train_inputs=_ro(x),
        col_means=_ro(k_raw.mean(axis=0)),
        grand_mean=float(k_raw.mean()),
        rayleigh=_ro(rayleigh),
        max_imag=float(max_imag),
        effective_rank=eff,
    )


def _ro(a):
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


def constraint_matrix(t: Transform) -> np.ndarray:
    """Right-hand-side matrix ``C`` of the fit's eigenproblem."""
    k = t.train_gram.values
    n = k.shape[0]
    mode = t.config.mode
    if mode in ("dica", "udica"):
        return kqk(k, t.domain_sizes) + k + t.config.lam * np.eye(n)
    if mode == "coir":
        return k + t.config.lam * np.eye(n)
    return np.eye(n)


# ---------------------------------------------------------------------------
# projection and diagnostics
# ---------------------------------------------------------------------------

def project_train(t: Transform) -> ProjectedKernel:
    f = t.train_features()
    kt = f @ f.T
    return ProjectedKernel(0.5 * (kt + kt.T), train=True)


def project_test(t: Transform, cg: CrossGram) -> ProjectedKernel:
    if not cg.centered:
        raise InputError("project_test expects a cross Gram centered against training statistics")
    if cg.values.shape[1] != t.n:
        raise InputError(f"cross Gram width {cg.values.shape[1]} != training size {t.n}")
    return ProjectedKernel((cg.values @ t.b) @ t.train_features().T, train=False)


def bound_terms(t: Transform):
    """``(dist_term, complexity_term)`` = ``((1/N) tr(B^T K Q K B), tr(B^T K B))``."""
    k = t.train_gram.values
    big_n = len(t.domain_sizes)
    kb = k @ t.b
    ke = _indicator(t.domain_sizes).T @ kb
    dist = float(np.einsum("ij,ij->", ke, _block_weights(t.domain_sizes) @ ke)) / big_n
    complexity = float(np.einsum("ij,ij->", t.b, kb))
    return dist, complexity


def rayleigh_objective(t_or_b, k, sizes, a_apply, lam=0.0) -> float:
    """Trace ratio ``tr(B^T A B) / tr(B^T (KQK + K + lam I) B)``."""
    b = t_or_b.b if isinstance(t_or_b, Transform) else np.asarray(t_or_b)
    c_b = kqk(k, sizes) @ b + k @ b + lam * b
    return float(np.trace(b.T @ a_apply(b)) / np.trace(b.T @ c_b))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

FORMAT = "dica-transform/1"


def transform_to_dict(t: Transform) -> dict:
    return {
        "format": FORMAT,
        "config": t.config.to_dict(),
        "kx": t.kx.to_dict(),
        "ky": None if t.ky is None else t.ky.to_dict(),
        "domain_sizes": list(t.domain_sizes),
        "b": t.b.tolist(),
        "gamma": t.gamma.tolist(),
        "rayleigh": t.rayleigh.tolist(),
        "max_imag": t.max_imag,
        "effective_rank": t.effective_rank,
        "train_inputs": t.train_inputs.tolist(),
    }


def transform_from_dict(d: dict) -> Transform:
    if d.get("format") != FORMAT:
        raise InputError(f"unsupported transform format {d.get('format')!r}")
    kx = KernelSpec.from_dict(d["kx"])
    x = np.asarray(d["train_inputs"], dtype=float)
    k_raw = symmetric_kernel_matrix(kx, x)
    sizes = tuple(d["domain_sizes"])
    return Transform(
        b=_ro(d["b"]),
        gamma=_ro(d["gamma"]),
        train_gram=GramMatrix(center_matrix(k_raw), sizes, centered=True),
        config=FitConfig.from_dict(d["config"]),
        domain_sizes=sizes,
        kx=kx,
        ky=None if d["ky"] is None else KernelSpec.from_dict(d["ky"]),
        train_inputs=_ro(x),
        col_means=_ro(k_raw.mean(axis=0)),
        grand_mean=float(k_raw.mean()),
        rayleigh=_ro(d["rayleigh"]),
        max_imag=float(d["max_imag"]),
        effective_rank=int(d["effective_rank"]),
    )


def save_transform(t: Transform, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(transform_to_dict(t)))
    return path


def load_transform(path) -> Transform:
    return transform_from_dict(json.loads(Path(path).read_text()))
