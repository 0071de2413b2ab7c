"""Downstream learners on raw or projected kernels.

Kernel ridge regression/classification stands in for SVM and GP learners:
its predictor is the GP posterior mean. The distributional kernel multiplies
an inner kernel by a Gaussian kernel on the domains' mean embeddings.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .domains import DomainDataset, DomainGram, domain_gram_matrix, mean_pairwise_mmd, mmd_squared_matrix
from .errors import ConfigError, InputError
from .kernels import KernelSpec, center_cross_matrix, center_matrix, kernel_matrix, symmetric_kernel_matrix
from .transform import FitConfig, fit as fit_transform, bound_terms

TASKS = ("regression", "binary-classification")


@dataclass(frozen=True)
class DistributionalKernelSpec:
    sigma1: float
    base: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if not self.sigma1 > 0:
            raise ConfigError(f"sigma1 must be positive, got {self.sigma1}")


def distributional_gram(inner, dg: DomainGram, spec: DistributionalKernelSpec, domain_ids_rows, domain_ids_cols) -> np.ndarray:
    """``k1(P_a, P_b) * inner[a, b]`` with ``k1 = exp(-MMD^2 / (2 sigma1^2))``.

    ``sigma1 = inf`` gives the constant distribution kernel (pooling).
    """
    inner = np.asarray(inner, dtype=float)
    ra = np.asarray(domain_ids_rows, dtype=int)
    cb = np.asarray(domain_ids_cols, dtype=int)
    n_dom = dg.n_domains
    for ids in (ra, cb):
        if ids.size and (ids.min() < 0 or ids.max() >= n_dom):
            raise IndexError(f"domain id out of range for {n_dom} domains")
    if inner.shape != (ra.size, cb.size):
        raise InputError(f"inner kernel shape {inner.shape} does not match ids ({ra.size}, {cb.size})")
    if np.isinf(spec.sigma1):
        return inner.copy()
    d2 = np.clip(mmd_squared_matrix(dg), 0.0, None)
    k1 = np.exp(-d2 / (2.0 * spec.sigma1**2))
    return k1[np.ix_(ra, cb)] * inner


def median_mmd(dg: DomainGram, domains: Optional[Sequence[int]] = None) -> float:
    """Median embedding distance between distinct domains; 1.0 if undefined or zero."""
    d2 = np.clip(mmd_squared_matrix(dg), 0.0, None)
    idx = np.arange(dg.n_domains) if domains is None else np.asarray(domains)
    sub = d2[np.ix_(idx, idx)]
    iu = np.triu_indices(len(idx), 1)
    if iu[0].size == 0:
        return 1.0
    med = float(np.median(np.sqrt(sub[iu])))
    return med if med > 0 else 1.0


# ---------------------------------------------------------------------------
# kernel ridge
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RidgeModel:
    alpha: np.ndarray
    ridge: float
    task: str
    label_map: Optional[tuple] = None


def ridge_fit(gram, y, eta: float, task: str = "regression") -> RidgeModel:
    """Solve ``(gram + eta I) alpha = y``; classification targets are mapped to -1/+1."""
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    if not eta > 0:
        raise ConfigError(f"ridge parameter must be positive, got {eta}")
    g = np.asarray(gram, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] != y.shape[0]:
        raise InputError(f"gram {g.shape} incompatible with {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise InputError("targets must be finite")
    label_map = None
    if task == "binary-classification":
        classes = np.unique(y)
        if classes.size > 2:
            raise InputError(f"binary classification needs two labels, got {classes.size}")
        if classes.size == 1:
            classes = np.array([classes[0], classes[0]])
        label_map = (float(classes[0]), float(classes[1]))
        y = np.where(y == classes[1], 1.0, -1.0) if classes[0] != classes[1] else -np.ones_like(y)
    a = 0.5 * (g + g.T) + eta * np.eye(g.shape[0])
    try:
        alpha = sla.cho_solve(sla.cho_factor(a, lower=True), y)
    except np.linalg.LinAlgError:
        alpha = sla.solve(a, y, assume_a="sym")
    return RidgeModel(alpha, float(eta), task, label_map)


def ridge_scores(model: RidgeModel, cross) -> np.ndarray:
    cross = np.asarray(cross, dtype=float)
    if cross.ndim != 2 or cross.shape[1] != model.alpha.shape[0]:
        raise InputError(f"cross kernel width {cross.shape[-1]} != training size {model.alpha.shape[0]}")
    return cross @ model.alpha


def ridge_predict(model: RidgeModel, cross) -> np.ndarray:
    s = ridge_scores(model, cross)
    if model.task == "regression":
        return s
    neg, pos = model.label_map
    return np.where(s > 0, pos, neg)


def metrics(y_true, y_pred, task: str) -> float:
    """Accuracy for classification, RMSE for regression."""
    a = np.asarray(y_true, dtype=float).reshape(-1)
    b = np.asarray(y_pred, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.size} vs {b.size}")
    if task == "regression":
        return float(np.sqrt(np.mean((a - b) ** 2)))
    if task == "binary-classification":
        return float(np.mean(a == b))
    raise ConfigError(f"unknown task {task!r}")


def higher_is_better(task: str) -> bool:
    return task != "regression"


# ---------------------------------------------------------------------------
# pipelines: optional transform -> inner kernel -> (distributional) ridge
# ---------------------------------------------------------------------------

METHODS = ("input", "kpca", "coir", "udica", "dica")


@dataclass(frozen=True)
class PipelineConfig:
    """One downstream configuration.

    The inner kernel is rescaled to unit mean self-similarity on the training
    sample, so ``eta`` and ``bias`` are dimensionless. ``bias`` adds a constant
    to the inner kernel (an intercept); under the distributional kernel it
    becomes a per-domain offset. ``sigma1=None`` uses the median embedding
    distance between training domains.
    """

    method: str = "dica"
    kernel: str = "pooling"
    m: int = 2
    epsilon: Optional[float] = None
    lam: float = 1e-4
    sigma_x: Optional[float] = None
    sigma_y: Optional[float] = None
    sigma1: Optional[float] = None
    eta: float = 0.1
    bias: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.kernel not in ("pooling", "distributional"):
            raise ConfigError(f"unknown kernel setting {self.kernel!r}")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass
class PipelineResult:
    predictions: np.ndarray
    scores: np.ndarray
    sigma1: Optional[float]
    bound: Optional[tuple] = None
    transform: object = None


def _output_kernel(task, sigma_y):
    if task == "binary-classification":
        return KernelSpec("delta")
    return KernelSpec("gaussian-rbf", sigma_y)


def fit_method(train: DomainDataset, cfg: PipelineConfig, task: str):
    """The fitted transform for ``cfg.method`` (``None`` for raw inputs)."""
    if cfg.method == "input":
        return None
    xtr, _, _ = train.flatten()
    kx = KernelSpec("gaussian-rbf", cfg.sigma_x).resolve(xtr)
    fc = FitConfig(mode=cfg.method, m=cfg.m, epsilon=cfg.epsilon, lam=cfg.lam)
    return fit_transform(train, kx, _output_kernel(task, cfg.sigma_y), fc)


def _inner_kernels(train: DomainDataset, test: DomainDataset, cfg: PipelineConfig, task: str, t=None):
    """Centered inner kernel blocks (train-train, test-train, test-test) and the transform if any."""
    xtr, ytr, _ = train.flatten()
    xte, _, _ = test.flatten()
    kx = KernelSpec("gaussian-rbf", cfg.sigma_x).resolve(xtr)
    if cfg.method == "input":
        k_raw = symmetric_kernel_matrix(kx, xtr)
        col, grand = k_raw.mean(axis=0), k_raw.mean()
        cross_raw = kernel_matrix(kx, xte, xtr)
        kt = center_cross_matrix(cross_raw, col, grand)
        ktt_raw = kernel_matrix(kx, xte, xte)
        ktt = ktt_raw - cross_raw.mean(axis=1)[:, None] - cross_raw.mean(axis=1)[None, :] + grand
        return center_matrix(k_raw), kt, 0.5 * (ktt + ktt.T), None
    if t is None:
        t = fit_method(train, cfg, task)
    ftr = t.train_features()
    fte = t.features(xte)
    return ftr @ ftr.T, fte @ ftr.T, fte @ fte.T, t


def run_pipeline(train: DomainDataset, test: DomainDataset, cfg: PipelineConfig, task: str, transform=None) -> PipelineResult:
    """Fit on ``train`` and predict every point of ``test`` (flattened order).

    ``transform`` may carry a transform already fitted on ``train`` with the
    same settings (see :func:`fit_method`), which skips the refit.
    """
    if not train.has_outputs:
        raise InputError("training domains need outputs")
    _, ytr, ids_tr = train.flatten()
    _, _, ids_te = test.flatten()
    k_tr, k_te, k_tt, t = _inner_kernels(train, test, cfg, task, transform)

    scale = float(np.mean(np.diag(k_tr)))
    scale = scale if scale > 0 else 1.0
    k_tr, k_te, k_tt = k_tr / scale, k_te / scale, k_tt / scale

    sigma1 = None
    if cfg.kernel == "distributional":
        n_tr_dom = train.n_domains
        big = np.block([[k_tr, k_te.T], [k_te, k_tt]])
        sizes = list(train.sizes) + list(test.sizes)
        dg = DomainGram(domain_gram_matrix(big, sizes))
        sigma1 = cfg.sigma1 if cfg.sigma1 is not None else median_mmd(dg, range(n_tr_dom))
        spec = DistributionalKernelSpec(sigma1)
        gram = distributional_gram(k_tr + cfg.bias, dg, spec, ids_tr, ids_tr)
        cross = distributional_gram(k_te + cfg.bias, dg, spec, ids_te + n_tr_dom, ids_tr)
    else:
        gram = k_tr + cfg.bias
        cross = k_te + cfg.bias

    if task == "regression":
        offset = float(np.mean(ytr))
        model = ridge_fit(gram, ytr - offset, cfg.eta, task)
        scores = ridge_scores(model, cross) + offset
        preds = scores
    else:
        model = ridge_fit(gram, ytr, cfg.eta, task)
        scores = ridge_scores(model, cross)
        preds = ridge_predict(model, cross)
    bound = bound_terms(t) if t is not None else None
    return PipelineResult(preds, scores, sigma1, bound, t)


def evaluate_pipeline(train, test, cfg, task) -> float:
    _, yte, _ = test.flatten()
    return metrics(yte, run_pipeline(train, test, cfg, task).predictions, task)


def heldout_dispersion(t, test: DomainDataset, dims: int = 2, bandwidth: float = 1.0) -> float:
    """Spread of held-out domains in the leading ``dims`` projected coordinates.

    Each coordinate is standardized with the training features' mean and
    standard deviation; the result is the mean squared MMD (RBF kernel of the
    given bandwidth) over all pairs of held-out domains.
    """
    ftr = t.train_features()[:, :dims]
    mu, sd = ftr.mean(axis=0), ftr.std(axis=0)
    sd[sd == 0] = 1.0
    blocks = [(t.features(d.inputs)[:, :dims] - mu) / sd for d in test.domains]
    return mean_pairwise_mmd(blocks, KernelSpec("gaussian-rbf", bandwidth))


def linear_least_squares(train: DomainDataset, test: DomainDataset) -> np.ndarray:
    """Ordinary least squares with intercept on raw inputs; predictions for ``test``."""
    xtr, ytr, _ = train.flatten()
    xte, _, _ = test.flatten()
    a = np.hstack([xtr, np.ones((xtr.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(a, ytr, rcond=None)
    return np.hstack([xte, np.ones((xte.shape[0], 1))]) @ coef


# ---------------------------------------------------------------------------
# domain-wise cross-validation
# ---------------------------------------------------------------------------

def domain_folds(n_domains: int, n_folds: int = 10):
    """Held-out domain indices per fold, assigned round-robin."""
    if n_domains < 2:
        raise ConfigError("domain-wise cross-validation needs at least 2 domains")
    k = max(2, min(int(n_folds), n_domains))
    return [list(range(f, n_domains, k)) for f in range(k)]


def expand_grid(base: PipelineConfig, axes: dict):
    """All combinations of ``axes`` (name -> values) applied to ``base``, in row-major order."""
    names = list(axes)
    if not names:
        return [base]
    out = []
    for combo in itertools.product(*(axes[a] for a in names)):
        out.append(replace(base, **dict(zip(names, combo))))
    return out


@dataclass
class CVResult:
    best: object
    best_index: int
    mean_scores: np.ndarray
    fold_scores: np.ndarray
    folds: list


def cross_validate(data: DomainDataset, grid: Sequence, evaluate: Callable, n_folds: int = 10, maximize: bool = True) -> CVResult:
    """Pick the grid entry with the best mean score over domain-wise folds.

    ``evaluate(train, held_out, config) -> float``. Ties go to the smaller
    ``m`` (if the configs have one), then to the earlier grid entry.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("cross-validation grid is empty")
    folds = domain_folds(data.n_domains, n_folds)
    scores = np.empty((len(grid), len(folds)))
    for f, held in enumerate(folds):
        keep = [i for i in range(data.n_domains) if i not in held]
        tr, va = data.subset(keep), data.subset(held)
        for g, cfg in enumerate(grid):
            scores[g, f] = evaluate(tr, va, cfg)
    means = scores.mean(axis=1)
    sign = -1.0 if maximize else 1.0
    order = sorted(range(len(grid)), key=lambda g: (sign * means[g], getattr(grid[g], "m", 0), g))
    best = order[0]
    return CVResult(grid[best], best, means, scores, folds)
