"""
Distances and divergences on the SPD cone.

Covers the affine-invariant geodesic distance, the Jeffrey (symmetric KL)
and Stein (Jensen-Bregman LogDet) divergences with their gradients, the
geometric mean of two matrices, the exponential and logarithm maps of the
affine-invariant metric, and the Karcher mean.
"""
from __future__ import annotations

import enum
import warnings
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (
    ConvergenceWarning,
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetric,
    RiccatiNotPD,
)
from .spd import SpdMatrix, as_spd, check_same_dim, expm, inv_sqrtm, logm, sqrtm, sym_part


class DivergenceKind(str, enum.Enum):
    AIRM = "airm"
    JEFFREY = "jeffrey"
    STEIN = "stein"


def airm_dist(x: SpdMatrix, y: SpdMatrix) -> float:
    """Affine-invariant geodesic distance ``||log(X^-1/2 Y X^-1/2)||_F``.

    Computed from the generalized eigenvalues of ``(Y, X)``, which are the
    eigenvalues of ``X^-1/2 Y X^-1/2``.
    """
    x, y = as_spd(x), as_spd(y)
    check_same_dim(x, y)
    w = linalg.eigh(y.data, x.data, eigvals_only=True)
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def j_div(x: SpdMatrix, y: SpdMatrix) -> float:
    x, y = as_spd(x), as_spd(y)
    n = check_same_dim(x, y)
    # tr(A^-1 B) == <A^-1, B>_F for symmetric A^-1
    val = 0.5 * float(np.vdot(x.inv, y.data)) + 0.5 * float(np.vdot(y.inv, x.data)) - n
    return max(val, 0.0)


def s_div(x: SpdMatrix, y: SpdMatrix) -> float:
    x, y = as_spd(x), as_spd(y)
    n = check_same_dim(x, y)
    mid = SpdMatrix.trusted(0.5 * (x.data + y.data))
    val = mid.logdet - 0.5 * (x.logdet + y.logdet)
    return max(val, 0.0) if n else 0.0


def divergence(kind: DivergenceKind | str, x: SpdMatrix, y: SpdMatrix) -> float:
    kind = DivergenceKind(kind)
    if kind is DivergenceKind.AIRM:
        return airm_dist(x, y)
    if kind is DivergenceKind.JEFFREY:
        return j_div(x, y)
    return s_div(x, y)


def grad_j(x: SpdMatrix, y: SpdMatrix) -> np.ndarray:
    """Gradient of ``j_div(X, Y)`` with respect to ``X``."""
    x, y = as_spd(x), as_spd(y)
    check_same_dim(x, y)
    xi = x.inv
    return sym_part(0.5 * (y.inv - xi @ y.data @ xi))


def grad_s(x: SpdMatrix, y: SpdMatrix) -> np.ndarray:
    """Gradient of ``s_div(X, Y)`` with respect to ``X``."""
    x, y = as_spd(x), as_spd(y)
    check_same_dim(x, y)
    total = SpdMatrix.trusted(x.data + y.data)
    return sym_part(total.inv - 0.5 * x.inv)


def _congruence(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return sym_part(a @ b @ a)


def geo_mean_airm(a: SpdMatrix, b: SpdMatrix) -> SpdMatrix:
    """Geodesic midpoint ``A^1/2 (A^-1/2 B A^-1/2)^1/2 A^1/2``."""
    a, b = as_spd(a), as_spd(b)
    check_same_dim(a, b)
    ah, aih = sqrtm(a).data, inv_sqrtm(a).data
    inner = sqrtm(SpdMatrix.trusted(_congruence(aih, b.data))).data
    return SpdMatrix.trusted(_congruence(ah, inner))


def riccati_solve(p, q) -> SpdMatrix:
    """Solve ``D^-1 Q D^-1 = P`` for the unique SPD ``D``.

    The root is ``Q^1/2 (Q^-1/2 P^-1 Q^-1/2)^1/2 Q^1/2``; both ``P`` and
    ``Q`` must be SPD, otherwise :class:`RiccatiNotPD` is raised.
    """
    try:
        p, q = as_spd(p), as_spd(q)
    except (NotPositiveDefinite, NotSymmetric) as exc:
        raise RiccatiNotPD(f"Riccati coefficients must be SPD: {exc}") from None
    check_same_dim(p, q)
    qh, qih = sqrtm(q).data, inv_sqrtm(q).data
    inner = sqrtm(SpdMatrix.trusted(_congruence(qih, p.inv))).data
    return SpdMatrix.trusted(_congruence(qh, inner))


def geo_mean_j(a: SpdMatrix, b: SpdMatrix) -> SpdMatrix:
    """Minimiser of ``J(X, A) + J(X, B)``: the SPD root of
    ``X (A^-1 + B^-1) X = A + B``."""
    a, b = as_spd(a), as_spd(b)
    check_same_dim(a, b)
    return riccati_solve(a.inv + b.inv, a.data + b.data)


def exp_map(p: SpdMatrix, delta) -> SpdMatrix:
    p = as_spd(p)
    delta = sym_part(delta)
    if delta.shape != p.data.shape:
        raise DimensionMismatch(f"tangent shape {delta.shape} != base shape {p.data.shape}")
    ph, pih = sqrtm(p).data, inv_sqrtm(p).data
    return SpdMatrix.trusted(_congruence(ph, expm(_congruence(pih, delta)).data))


def log_map(p: SpdMatrix, x: SpdMatrix) -> np.ndarray:
    p, x = as_spd(p), as_spd(x)
    check_same_dim(p, x)
    ph, pih = sqrtm(p).data, inv_sqrtm(p).data
    return _congruence(ph, logm(SpdMatrix.trusted(_congruence(pih, x.data))))


def airm_norm(p: SpdMatrix, delta) -> float:
    """Norm of a tangent vector at ``p``: ``sqrt(tr(P^-1 D P^-1 D))``."""
    p = as_spd(p)
    w = p.inv @ np.asarray(delta, dtype=float)
    return float(np.sqrt(max(np.trace(w @ w), 0.0)))


def karcher_mean(
    samples: Sequence[SpdMatrix], max_iters: int = 100, tol: float = 1e-9
) -> SpdMatrix:
    """Fréchet mean under the affine-invariant metric.

    Unit-step fixed-point iteration on the mean of the logarithm maps.
    Emits :class:`ConvergenceWarning` and returns the last iterate when
    ``max_iters`` is exhausted.
    """
    if len(samples) == 0:
        raise ValueError("karcher_mean needs at least one sample")
    samples = [as_spd(s) for s in samples]
    check_same_dim(*samples)
    if len(samples) == 1:
        return samples[0]
    # log-Euclidean mean as starting point
    m = expm(np.mean([logm(s) for s in samples], axis=0))
    for _ in range(max_iters):
        mh, mih = sqrtm(m).data, inv_sqrtm(m).data
        # tangent mean in whitened coordinates, where the metric is Frobenius
        step = np.mean(
            [logm(SpdMatrix.trusted(_congruence(mih, s.data))) for s in samples], axis=0
        )
        m = SpdMatrix.trusted(_congruence(mh, expm(step).data))
        if np.linalg.norm(step) < tol:
            return m
    warnings.warn(
        f"karcher_mean did not reach tol={tol} in {max_iters} iterations",
        ConvergenceWarning,
        stacklevel=2,
    )
    return m
