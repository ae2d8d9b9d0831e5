"""
Jeffrey and Stein kernels on SPD matrices.

Both are of the form ``exp(-beta * d(X, Y))``. The Stein kernel is
positive definite only for the beta values accepted by
:func:`validate_beta`; the Jeffrey kernel is used for any positive beta.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dictionary
from .divergences import j_div, s_div
from .errors import CoefficientsNotZeroSum, DimensionMismatch, InvalidBeta
from .spd import SpdMatrix, as_spd

HALF_INT_TOL = 1e-12


class KernelKind(str, enum.Enum):
    JEFFREY = "jeffrey"
    STEIN = "stein"

    @classmethod
    def parse(cls, value) -> "KernelKind":
        if isinstance(value, cls):
            return value
        aliases = {"j": cls.JEFFREY, "s": cls.STEIN}
        key = str(value).lower()
        return aliases.get(key) or cls(key)


def stein_beta_set(n: int) -> str:
    """Human-readable description of the valid Stein beta values for ``n``."""
    top = (n - 1) / 2
    if n <= 1:
        return "beta > 0"
    discrete = ", ".join(f"{k / 2:g}" for k in range(1, n))
    return f"beta in {{{discrete}}} or beta > {top:g}"


def validate_beta(kind, beta: float, dim: int) -> None:
    """Raise :class:`InvalidBeta` unless ``beta`` gives a valid kernel.

    Jeffrey: any ``beta > 0``. Stein: ``beta`` in ``{1/2, 1, ..., (n-1)/2}``
    or ``beta > (n-1)/2``.
    """
    kind = KernelKind.parse(kind)
    if not np.isfinite(beta) or beta <= 0:
        raise InvalidBeta(f"beta must be positive, got {beta}")
    if kind is KernelKind.JEFFREY:
        return
    top = 0.5 * (dim - 1)
    if beta > top:
        return
    twice = 2.0 * beta
    if abs(twice - round(twice)) <= HALF_INT_TOL and round(twice) >= 1:
        return
    raise InvalidBeta(
        f"Stein kernel is not positive definite for beta={beta} at n={dim}; "
        f"valid values: {stein_beta_set(dim)}"
    )


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    beta: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind.parse(self.kind))
        object.__setattr__(self, "beta", float(self.beta))
        validate_beta(self.kind, self.beta, self.dim)


def k_eval(x: SpdMatrix, y: SpdMatrix, spec: KernelSpec) -> float:
    x, y = as_spd(x), as_spd(y)
    if x.n != spec.dim or y.n != spec.dim:
        raise DimensionMismatch(f"kernel built for n={spec.dim}, got {x.n} and {y.n}")
    d = j_div(x, y) if spec.kind is KernelKind.JEFFREY else s_div(x, y)
    return float(np.exp(-spec.beta * d))


_STEIN_BLOCK = 64


def _div_to_atoms(x: SpdMatrix, d: Dictionary, kind: KernelKind) -> np.ndarray:
    n = x.n
    if kind is KernelKind.JEFFREY:
        # tr(A B) for symmetric A, B is the flat dot product of their entries
        fwd = d.stack.reshape(len(d), -1) @ x.inv.ravel()
        bwd = d.inv_stack.reshape(len(d), -1) @ x.data.ravel()
        div = 0.5 * fwd + 0.5 * bwd - n
    else:
        # Blocked so the batched factorisation stays cache-resident and the
        # cost per atom does not grow with N.
        ld_mid = np.empty(len(d))
        for lo in range(0, len(d), _STEIN_BLOCK):
            mid = 0.5 * (x.data[None] + d.stack[lo : lo + _STEIN_BLOCK])
            lower = np.linalg.cholesky(mid)
            diag = np.diagonal(lower, axis1=1, axis2=2)
            ld_mid[lo : lo + _STEIN_BLOCK] = 2.0 * np.sum(np.log(diag), axis=1)
        div = ld_mid - 0.5 * (x.logdet + d.logdets)
    return np.maximum(div, 0.0)


def cross_gram(x: SpdMatrix, d: Dictionary, spec: KernelSpec) -> np.ndarray:
    """Kernel values ``k(X, D_i)`` against every atom."""
    x = as_spd(x)
    if x.n != d.dim or d.dim != spec.dim:
        raise DimensionMismatch(
            f"query n={x.n}, dictionary n={d.dim}, kernel n={spec.dim}"
        )
    return np.exp(-spec.beta * _div_to_atoms(x, d, spec.kind))


@dataclass(frozen=True, eq=False)
class GramCache:
    """Atom-atom kernel matrix together with the dictionary it came from.

    Atom inverses and log-determinants live on the dictionary's
    :class:`~spdsparse.spd.SpdMatrix` atoms.
    """

    kdd: np.ndarray
    dictionary: Dictionary
    spec: KernelSpec

    def cross(self, x: SpdMatrix) -> np.ndarray:
        return cross_gram(x, self.dictionary, self.spec)

    def with_atom(self, r: int, atom: SpdMatrix) -> "GramCache":
        """Replace atom ``r`` and refresh only its row and column."""
        d = self.dictionary.with_atom(r, atom)
        row = cross_gram(d[r], d, self.spec)
        row[r] = 1.0
        kdd = self.kdd.copy()
        kdd[r, :] = row
        kdd[:, r] = row
        kdd.flags.writeable = False
        return GramCache(kdd, d, self.spec)


def gram(d: Dictionary, spec: KernelSpec) -> GramCache:
    if d.dim != spec.dim:
        raise DimensionMismatch(f"dictionary n={d.dim}, kernel n={spec.dim}")
    size = len(d)
    kdd = np.empty((size, size))
    for i in range(size):
        kdd[i] = cross_gram(d[i], d, spec)
    kdd = 0.5 * (kdd + kdd.T)
    np.fill_diagonal(kdd, 1.0)
    kdd.flags.writeable = False
    return GramCache(kdd, d, spec)


def cpd_form(k: np.ndarray, c: np.ndarray) -> float:
    """Quadratic form ``c^T K c`` for a zero-sum coefficient vector."""
    k = np.asarray(k, dtype=float)
    c = np.asarray(c, dtype=float)
    if k.shape != (c.size, c.size):
        raise DimensionMismatch(f"kernel {k.shape} vs coefficients {c.shape}")
    if abs(c.sum()) > 1e-12 * max(1.0, float(np.abs(c).sum())):
        raise CoefficientsNotZeroSum(f"coefficients sum to {c.sum():.3e}")
    return float(c @ k @ c)
