"""Domain-invariant component analysis (DICA) and its unsupervised variant.

Submodules: ``kernels`` (Gram matrices and centering), ``domains`` (multi-domain
datasets, the coefficient matrix ``Q`` and distributional variance),
``eigen`` (dense eigensolvers), ``transform`` (the DICA/UDICA/COIR/KPCA fits),
``downstream`` (distributional kernels, kernel ridge learners and CV),
``synthdata`` (seeded generators) and ``cli``.
"""

from .domains import Domain, DomainDataset, coefficient_matrix, distributional_variance
from .errors import (
    ConfigError,
    DefinitenessError,
    DegenerateDirectionError,
    DicaError,
    InputError,
    ParseError,
    SpectrumError,
)
from .kernels import KernelSpec
from .transform import FitConfig, Transform, fit, load_transform, save_transform

__version__ = "0.1.0"
