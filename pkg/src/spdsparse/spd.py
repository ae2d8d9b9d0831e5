"""
SPD matrix type and dense symmetric linear algebra.

Every matrix handled by the rest of the package goes through
:class:`SpdMatrix`, which symmetrises its input, checks positive
definiteness once via Cholesky, and lazily caches the factor, inverse and
log-determinant so that kernels and dictionary updates can reuse them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import (
    DimensionMismatch,
    EigFailure,
    NotPositiveDefinite,
    NotSymmetric,
    NumericalBreakdown,
)

SYM_TOL = 1e-10


def sym_part(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def _square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def _asymmetry_ok(a: np.ndarray, tol: float) -> bool:
    if a.size == 0:
        return True
    scale = max(1.0, float(np.linalg.norm(a)))
    return float(np.max(np.abs(a - a.T))) <= tol * scale


@dataclass(frozen=True, eq=False)
class CholFactor:
    lower: np.ndarray
    logdet: float


class SpdMatrix:
    """An immutable symmetric positive definite matrix.

    Parameters
    ----------
    data : array_like
        Square matrix. It is symmetrised; asymmetry beyond ``tol`` (relative
        to ``max(1, ||data||_F)``) raises :class:`NotSymmetric`.
    tol : float
        Symmetry tolerance.
    """

    def __init__(self, data, tol: float = SYM_TOL):
        a = _square(data)
        if not np.all(np.isfinite(a)):
            raise NotPositiveDefinite("matrix has non-finite entries")
        if not _asymmetry_ok(a, tol):
            raise NotSymmetric("matrix is not symmetric within tolerance")
        a = sym_part(a)
        a.flags.writeable = False
        self.data = a
        # fail fast; the factor is kept for later use
        try:
            self.__dict__["chol"] = _cholesky(a)
        except NumericalBreakdown as exc:
            raise NotPositiveDefinite(str(exc)) from None

    @classmethod
    def trusted(cls, data) -> "SpdMatrix":
        """Wrap a matrix known to be SPD up to rounding (symmetrised, not
        re-checked for symmetry)."""
        return cls(sym_part(data), tol=np.inf)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @cached_property
    def chol(self) -> CholFactor:
        return _cholesky(self.data)

    @property
    def logdet(self) -> float:
        return self.chol.logdet

    @cached_property
    def inv(self) -> np.ndarray:
        lower = self.chol.lower
        out = linalg.cho_solve((lower, True), np.eye(self.n))
        out = sym_part(out)
        out.flags.writeable = False
        return out

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        return _eigh(self.data)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.data, dtype=dtype, copy=True)

    def __repr__(self) -> str:
        return f"SpdMatrix(n={self.n})"


def _cholesky(a: np.ndarray) -> CholFactor:
    try:
        lower = linalg.cholesky(a, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"Cholesky failed: {exc}") from None
    diag = np.diag(lower)
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise NumericalBreakdown("non-positive pivot in Cholesky factor")
    lower.flags.writeable = False
    return CholFactor(lower=lower, logdet=2.0 * float(np.sum(np.log(diag))))


def _eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(str(exc)) from None
    return w, u


def as_spd(m) -> SpdMatrix:
    return m if isinstance(m, SpdMatrix) else SpdMatrix(m)


def validate_spd(a, tol: float = SYM_TOL) -> SpdMatrix:
    """Return ``a`` as an :class:`SpdMatrix` or raise.

    Raises :class:`NotSymmetric` or :class:`NotPositiveDefinite`.
    """
    return SpdMatrix(a, tol=tol)


def chol(m: SpdMatrix) -> CholFactor:
    return as_spd(m).chol


def inv(m: SpdMatrix) -> SpdMatrix:
    return SpdMatrix.trusted(as_spd(m).inv)


def spectral_fn(m, fn: str):
    """Apply a scalar function to the eigenvalues of a symmetric matrix.

    ``fn`` is one of ``"log"``, ``"exp"``, ``"sqrt"``, ``"inv_sqrt"``.
    ``exp`` accepts any symmetric matrix; the others require SPD input.
    ``log`` returns a symmetric ndarray, the rest return :class:`SpdMatrix`.
    """
    if fn == "exp":
        a = m.data if isinstance(m, SpdMatrix) else sym_part(_square(m))
        w, u = _eigh(a)
        return SpdMatrix.trusted((u * np.exp(w)) @ u.T)
    spd = as_spd(m)
    w, u = spd.eig
    if np.any(w <= 0):
        raise NotPositiveDefinite("eigendecomposition produced a non-positive eigenvalue")
    if fn == "log":
        return sym_part((u * np.log(w)) @ u.T)
    if fn == "sqrt":
        return SpdMatrix.trusted((u * np.sqrt(w)) @ u.T)
    if fn == "inv_sqrt":
        return SpdMatrix.trusted((u / np.sqrt(w)) @ u.T)
    raise ValueError(f"unknown spectral function {fn!r}")


def logm(m) -> np.ndarray:
    return spectral_fn(m, "log")


def expm(s) -> SpdMatrix:
    return spectral_fn(s, "exp")


def sqrtm(m) -> SpdMatrix:
    return spectral_fn(m, "sqrt")


def inv_sqrtm(m) -> SpdMatrix:
    return spectral_fn(m, "inv_sqrt")


def default_eps(w: np.ndarray) -> float:
    # mean |eigenvalue| equals trace/n on the PSD cone and stays positive off it
    scale = float(np.mean(np.abs(w))) if w.size else 0.0
    return 1e-8 * (scale if scale > 0 else 1.0)


def nearest_spd(a, eps: float | None = None) -> SpdMatrix:
    """Project a square matrix onto the SPD cone shifted by ``eps``.

    The symmetric part is eigendecomposed and eigenvalues below ``eps`` are
    raised to ``eps``. Input whose symmetric part already clears ``eps`` is
    returned unchanged. ``eps`` defaults to ``1e-8`` times the mean absolute eigenvalue
    (``trace / n`` for positive semidefinite input).
    """
    s = sym_part(_square(a))
    w, u = _eigh(s)
    if eps is None:
        eps = default_eps(w)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if w[0] > eps:
        return SpdMatrix.trusted(s)
    w = np.maximum(w, eps)
    return SpdMatrix.trusted((u * w) @ u.T)


def is_spd(a) -> bool:
    try:
        SpdMatrix(a)
    except (NotPositiveDefinite, NotSymmetric, DimensionMismatch):
        return False
    return True


def check_same_dim(*ms: SpdMatrix) -> int:
    dims = {m.n for m in ms}
    if len(dims) != 1:
        raise DimensionMismatch(f"matrix dimensions differ: {sorted(dims)}")
    return dims.pop()
