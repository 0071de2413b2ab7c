"""Dense linear algebra used by the fits.

Factorizations and eigendecompositions are delegated to LAPACK through
scipy; this module adds the ordering, sign and tolerance contracts on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import DefinitenessError, DegenerateDirectionError, InputError, SpectrumError

IMAG_TOL = 1e-6


@dataclass(frozen=True)
class EigenResult:
    vectors: np.ndarray
    values: np.ndarray
    max_imag: float = 0.0


def fix_signs(v: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    v = np.array(v, dtype=float, copy=True)
    if v.size == 0:
        return v
    idx = np.argmax(np.abs(v), axis=0)
    s = np.sign(v[idx, np.arange(v.shape[1])])
    s[s == 0] = 1.0
    return v * s[None, :]


def _check_square(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"{name} must be square, got shape {a.shape}")
    return a


def cholesky_pd(a) -> np.ndarray:
    """Lower-triangular ``R`` with ``R R^T = a``.

    Raises :class:`DefinitenessError` naming the first failing pivot (0-based).
    """
    a = _check_square(a)
    scale = max(np.abs(a).max(), 1e-300)
    if np.abs(a - a.T).max() > 1e-10 * scale:
        raise InputError("cholesky_pd requires a symmetric matrix")
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise DefinitenessError(f"matrix is not positive definite (pivot {info - 1})", pivot=info - 1)
    if info < 0:
        raise InputError(f"invalid argument {-info} to dpotrf")
    return c


def solve_spd(a, b) -> np.ndarray:
    r = cholesky_pd(a)
    return sla.cho_solve((r, True), np.asarray(b, dtype=float))


def top_eig_nonsymmetric(m_matrix, m: int, imag_tol: float = IMAG_TOL) -> EigenResult:
    """The ``m`` eigenpairs of largest real part of a real, possibly nonsymmetric matrix.

    Eigenvalues whose imaginary part is at most ``imag_tol`` times the spectral
    radius are treated as real; larger imaginary parts among the selected
    pairs raise :class:`SpectrumError`. Vectors are unit-norm with the sign
    convention of :func:`fix_signs`.
    """
    a = _check_square(m_matrix)
    n = a.shape[0]
    if not 1 <= m <= n:
        raise InputError(f"need 1 <= m <= n, got m={m}, n={n}")
    w, v = sla.eig(a, check_finite=True)
    radius = float(np.abs(w).max())
    order = np.argsort(-w.real, kind="stable")[:m]
    w, v = w[order], v[:, order]
    max_imag = float(np.abs(w.imag).max())
    if max_imag > imag_tol * max(radius, np.finfo(float).tiny):
        raise SpectrumError(
            f"selected eigenvalues are complex: max |imag| = {max_imag:.3e} "
            f"(tolerance {imag_tol:.1e} x spectral radius {radius:.3e})",
            max_imag=max_imag,
        )
    vecs = v.real
    norms = np.linalg.norm(vecs, axis=0)
    norms[norms == 0] = 1.0
    return EigenResult(fix_signs(vecs / norms), w.real.copy(), max_imag)


def top_eig_symmetric(a, m: int) -> EigenResult:
    """Top-``m`` eigenpairs of a symmetric matrix, descending."""
    a = _check_square(a)
    n = a.shape[0]
    if not 1 <= m <= n:
        raise InputError(f"need 1 <= m <= n, got m={m}, n={n}")
    a = 0.5 * (a + a.T)
    w, v = sla.eigh(a, subset_by_index=[n - m, n - 1])
    return EigenResult(fix_signs(v[:, ::-1]), w[::-1].copy(), 0.0)


def normalize_constraint(vectors, c) -> np.ndarray:
    """Scale each column so that ``v^T c v = 1``."""
    v = np.asarray(vectors, dtype=float)
    q = np.einsum("ij,ij->j", v, np.asarray(c, dtype=float) @ v)
    if np.any(~(q > 0)):
        bad = int(np.flatnonzero(~(q > 0))[0])
        raise DegenerateDirectionError(f"column {bad} has nonpositive quadratic form {q[bad]:.3e}")
    return fix_signs(v / np.sqrt(q)[None, :])


def orthonormalize_constraint(candidates, c, m: int, drop_tol: float = 1e-8):
    """Gram-Schmidt in the ``c`` inner product over candidate columns, in order.

    A candidate whose component orthogonal to the columns already accepted
    has relative ``c``-norm below ``drop_tol`` is skipped. Stops after ``m``
    accepted columns. Returns ``(basis, accepted_indices)``; the basis is not
    sign-fixed so that column ``k`` keeps the orientation of its candidate.
    """
    v = np.asarray(candidates, dtype=float)
    c = np.asarray(c, dtype=float)
    basis, cbasis, kept = [], [], []
    for j in range(v.shape[1]):
        x = v[:, j].copy()
        cx = c @ x
        norm0 = np.sqrt(max(x @ cx, 0.0))
        if norm0 == 0:
            continue
        for _ in range(2):
            for b, cb in zip(basis, cbasis):
                x -= (cb @ x) * b
            cx = c @ x
        nrm = np.sqrt(max(x @ cx, 0.0))
        if nrm <= drop_tol * norm0:
            continue
        basis.append(x / nrm)
        cbasis.append(cx / nrm)
        kept.append(j)
        if len(basis) == m:
            break
    if len(basis) < m:
        raise DegenerateDirectionError(f"only {len(basis)} independent directions among {v.shape[1]} candidates, need {m}")
    return np.column_stack(basis), kept
