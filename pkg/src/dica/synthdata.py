"""Seeded synthetic domain generators.

Randomness comes from numpy's ``Generator(PCG64(seed))``; the draw order is
fixed so the same config always yields bit-identical data on a given build.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domains import Domain, DomainDataset
from .errors import ConfigError


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_wishart(scale: float, df: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """``sum_{i<=df} v_i v_i^T`` with ``v_i ~ N(0, scale I)``."""
    if df < dim:
        raise ConfigError(f"Wishart needs df >= dim, got df={df}, dim={dim}")
    if scale < 0:
        raise ConfigError(f"Wishart scale must be nonnegative, got {scale}")
    v = rng.standard_normal((df, dim)) * np.sqrt(scale)
    w = v.T @ v
    return 0.5 * (w + w.T)


@dataclass(frozen=True)
class SynthToyConfig:
    n_domains: int = 10
    poisson_mean: float = 200.0
    dim: int = 5
    wishart_scale: float = 0.2
    wishart_df: int = 10
    b1: Optional[tuple] = None
    b2: Optional[tuple] = None
    c: Optional[float] = None
    seed: int = 0
    n_override: Optional[int] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.wishart_df < self.dim:
            raise ConfigError("wishart_df must be >= dim")
        if not self.poisson_mean > 0:
            raise ConfigError("poisson_mean must be positive")
        if self.n_domains < 1:
            raise ConfigError("n_domains must be >= 1")
        for name in ("b1", "b2"):
            v = getattr(self, name)
            if v is not None and len(v) != self.dim:
                raise ConfigError(f"{name} must have length dim={self.dim}")


def toy_parameters(config: SynthToyConfig):
    """The shared ``(b1, b2, c)`` and the generator positioned after drawing them."""
    rng = make_rng(config.seed)
    b1 = rng.standard_normal(config.dim)
    b2 = rng.standard_normal(config.dim)
    c = rng.standard_normal()
    if config.b1 is not None:
        b1 = np.asarray(config.b1, dtype=float)
    if config.b2 is not None:
        b2 = np.asarray(config.b2, dtype=float)
    if config.c is not None:
        c = float(config.c)
    return b1, b2, float(c), rng


def toy_output(x, b1, b2, c, rng) -> np.ndarray:
    """``sign(b1.x + e1) * log|b2.x + c + e2|`` with standard normal noise."""
    n = x.shape[0]
    e1 = rng.standard_normal(n)
    e2 = rng.standard_normal(n)
    arg = x @ b2 + c + e2
    bad = np.abs(arg) < 1e-12
    while np.any(bad):
        e2[bad] = rng.standard_normal(int(bad.sum()))
        arg = x @ b2 + c + e2
        bad = np.abs(arg) < 1e-12
    return np.sign(x @ b1 + e1) * np.log(np.abs(arg))


def make_toy(config: SynthToyConfig, return_covariances: bool = False):
    """Zero-mean Gaussian domains with Wishart covariances and a shared nonlinear output."""
    b1, b2, c, rng = toy_parameters(config)
    domains, covs = [], []
    for _ in range(config.n_domains):
        if config.n_override is not None:
            n_i = int(config.n_override)
        else:
            n_i = max(2, int(rng.poisson(config.poisson_mean)))
        cov = sample_wishart(config.wishart_scale, config.wishart_df, config.dim, rng)
        z = rng.standard_normal((n_i, config.dim))
        x = z @ _sqrt_psd(cov).T
        y = toy_output(x, b1, b2, c, rng)
        domains.append(Domain(x, y))
        covs.append(cov)
    data = DomainDataset(tuple(domains))
    return (data, covs) if return_covariances else data


def _sqrt_psd(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0, None))[None, :]


@dataclass(frozen=True)
class SynthClassConfig:
    """Two-class surrogate for the cell-population task.

    Every domain is a balanced two-component Gaussian mixture whose components
    sit at ``+-class_separation/2`` along a class direction ``w`` shared by all
    domains. Each domain then receives its own translation and a linear
    distortion of the directions orthogonal to ``w``, both scaled by
    ``domain_shift_scale``. The translation has standard deviation
    ``domain_shift_scale`` along ``w`` (a per-domain drift of the class
    boundary) and ``nuisance_ratio * domain_shift_scale`` orthogonal to it
    (nuisance variation that carries no label information).
    """

    n_domains: int = 10
    n_test_domains: int = 5
    per_domain_n: int = 200
    dim: int = 5
    class_separation: float = 3.0
    domain_shift_scale: float = 1.0
    nuisance_ratio: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if not self.class_separation > 0:
            raise ConfigError("class_separation must be positive")
        if self.domain_shift_scale < 0:
            raise ConfigError("domain_shift_scale must be nonnegative")
        if self.nuisance_ratio < 0:
            raise ConfigError("nuisance_ratio must be nonnegative")
        if self.per_domain_n < 2 or self.n_domains < 1 or self.n_test_domains < 0 or self.dim < 1:
            raise ConfigError("invalid classification generator sizes")


def make_classification(config: SynthClassConfig):
    """Return ``(train, test)`` datasets with labels in {0, 1}."""
    rng = make_rng(config.seed)
    d = config.dim
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    perp = np.eye(d) - np.outer(w, w)
    total = config.n_domains + config.n_test_domains
    domains = []
    for _ in range(total):
        z = rng.standard_normal(d)
        shift = config.domain_shift_scale * ((w @ z) * w + config.nuisance_ratio * (perp @ z))
        # distortion acts on the complement of w only, so w stays the class direction
        g = rng.standard_normal((d, d)) / np.sqrt(d)
        distort = np.eye(d) + 0.3 * config.domain_shift_scale * perp @ g @ perp
        n_i = config.per_domain_n
        y = np.zeros(n_i)
        y[: n_i // 2] = 1.0
        y = y[rng.permutation(n_i)]
        u = rng.standard_normal((n_i, d)) + np.outer(2.0 * y - 1.0, 0.5 * config.class_separation * w)
        x = u @ distort.T + shift
        domains.append(Domain(x, y))
    train = DomainDataset(tuple(domains[: config.n_domains]), tuple(range(config.n_domains)))
    test = DomainDataset(tuple(domains[config.n_domains:]), tuple(range(config.n_domains, total))) if config.n_test_domains else None
    return train, test
