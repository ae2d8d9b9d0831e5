"""
Kernel sparse coding on the SPD cone.

A query ``X`` is coded against dictionary atoms ``D_j`` through their
kernel embeddings by minimising

    k(X, X) - 2 y^T k_X + y^T K y + lam * ||y||_1

where ``k_X[j] = k(X, D_j)`` and ``K[i, j] = k(D_i, D_j)``. The solver is a
feature-sign active-set search that only ever touches these kernel values.
"""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .data import Dictionary
from .errors import (
    ConfigError,
    DimensionMismatch,
    IndexOutOfRange,
    SingularActiveSet,
    TooLarge,
    UnknownLabel,
)
from .kernels import GramCache, KernelSpec, gram
from .spd import SpdMatrix

JITTER = 1e-10
ORACLE_MAX_ATOMS = 12


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.1
    max_steps: int | None = None
    zero_tol: float = 1e-12

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")

    def step_budget(self, n_atoms: int) -> int:
        return self.max_steps if self.max_steps is not None else 100 * max(n_atoms, 1)


@dataclass
class SparseCode:
    y: np.ndarray
    objective: float
    iterations: int
    truncated: bool = False
    trace: list[float] = field(default_factory=list)

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.y)

    def to_json(self) -> dict:
        return {
            "coefficients": [float(v) for v in self.y],
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "truncated": bool(self.truncated),
        }


def _kdd(kdd) -> np.ndarray:
    return kdd.kdd if isinstance(kdd, GramCache) else np.asarray(kdd, dtype=float)


def _inputs(kdd, kxd) -> tuple[np.ndarray, np.ndarray]:
    k = _kdd(kdd)
    kx = np.asarray(kxd, dtype=float).ravel()
    if k.shape != (kx.size, kx.size):
        raise DimensionMismatch(f"Gram {k.shape} does not match {kx.size} cross-kernel values")
    return k, kx


def objective(y, kdd, kxd, kxx: float, lam: float) -> float:
    k, kx = _inputs(kdd, kxd)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != kx.size:
        raise DimensionMismatch(f"{y.size} coefficients for {kx.size} atoms")
    return float(kxx - 2.0 * y @ kx + y @ k @ y + lam * np.abs(y).sum())


def smooth_grad(y, kdd, kxd) -> np.ndarray:
    """Gradient of the quadratic part, ``2 K y - 2 k_X``."""
    k, kx = _inputs(kdd, kxd)
    return 2.0 * (k @ np.asarray(y, dtype=float) - kx)


def grad_coeff(y, kdd, kxd, j: int) -> float:
    k, kx = _inputs(kdd, kxd)
    if not 0 <= j < kx.size:
        raise IndexOutOfRange(f"coefficient index {j} outside 0..{kx.size - 1}")
    return float(2.0 * (k[j] @ np.asarray(y, dtype=float) - kx[j]))


def active_qp_solve(kdd_hat, kxd_hat, theta_hat, lam: float) -> np.ndarray:
    """Minimiser of the fixed-sign quadratic on the active set:
    ``K^-1 (k - lam * theta / 2)``."""
    k = np.atleast_2d(np.asarray(kdd_hat, dtype=float))
    rhs = np.asarray(kxd_hat, dtype=float) - 0.5 * lam * np.asarray(theta_hat, dtype=float)
    try:
        return linalg.cho_solve(linalg.cho_factor(k, lower=True), rhs)
    except linalg.LinAlgError:
        pass
    try:
        return linalg.cho_solve(
            linalg.cho_factor(k + JITTER * np.eye(len(k)), lower=True), rhs
        )
    except linalg.LinAlgError:
        pass
    # indefinite but invertible active block (Jeffrey kernel is not always pd)
    try:
        out = linalg.solve(k, rhs, assume_a="sym")
    except linalg.LinAlgError:
        raise SingularActiveSet("active kernel block is singular") from None
    if not np.all(np.isfinite(out)):
        raise SingularActiveSet("active kernel block is singular")
    return out


def kfss(kdd, kxd, kxx: float = 1.0, cfg: SolverConfig = SolverConfig()) -> SparseCode:
    """Kernel feature-sign search.

    Alternates greedy activation of the zero coefficient with the steepest
    gradient and closed-form solves of the sign-fixed quadratic on the
    active set, with a discrete line search over sign changes. Every
    accepted step strictly lowers the objective.
    """
    k, kx = _inputs(kdd, kxd)
    lam = cfg.lam
    size = kx.size
    y = np.zeros(size)
    theta = np.zeros(size)
    f = float(kxx)
    trace = [f]
    budget = cfg.step_budget(size)
    steps = 0
    select = True
    truncated = False

    def full_obj(v):
        return float(kxx - 2.0 * v @ kx + v @ k @ v + lam * np.abs(v).sum())

    while True:
        g = 2.0 * (k @ y - kx)
        if select:
            zero = np.flatnonzero(y == 0)
            if zero.size == 0:
                break
            # np.argmax returns the lowest index among ties
            i = zero[np.argmax(np.abs(g[zero]))]
            if abs(g[i]) <= lam:
                break
            theta[i] = -np.sign(g[i])
        if steps >= budget:
            truncated = True
            break
        steps += 1

        idx = np.flatnonzero(theta)
        cur = y[idx]
        new = active_qp_solve(k[np.ix_(idx, idx)], kx[idx], theta[idx], lam)
        candidates = [new]
        if not np.array_equal(np.sign(new), theta[idx]):
            diff = cur - new
            for q in np.flatnonzero((cur != 0) & (np.sign(new) != np.sign(cur))):
                t = cur[q] / diff[q]
                pt = cur + t * (new - cur)
                pt[q] = 0.0
                candidates.append(pt)
        best_val, best = np.inf, None
        for pt in candidates:
            trial = np.zeros(size)
            trial[idx] = pt
            val = full_obj(trial)
            if val < best_val:
                best_val, best = val, trial
        if not best_val < f:
            # no strict decrease left at working precision
            break
        best[np.abs(best) <= cfg.zero_tol] = 0.0
        y = best
        f = full_obj(y)
        trace.append(f)
        theta = np.sign(y)

        g = 2.0 * (k @ y - kx)
        act = np.flatnonzero(y)
        scale = 1.0 + float(np.abs(k @ y).max(initial=0.0))
        select = bool(np.all(np.abs(g[act] + lam * theta[act]) <= 1e-10 * scale))

    return SparseCode(y=y, objective=f, iterations=steps, truncated=truncated, trace=trace)


def oracle_solve(kdd, kxd, kxx: float, lam: float) -> np.ndarray:
    """Global minimiser by enumerating every support and sign pattern.

    Independent check for :func:`kfss`; only for ``N <= 12`` atoms.
    """
    k, kx = _inputs(kdd, kxd)
    size = kx.size
    if size > ORACLE_MAX_ATOMS:
        raise TooLarge(f"oracle enumeration limited to {ORACLE_MAX_ATOMS} atoms, got {size}")
    best_y = np.zeros(size)
    best_f = float(kxx)
    for r in range(1, size + 1):
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=r))).T
        for support in itertools.combinations(range(size), r):
            s = list(support)
            rhs = kx[s][:, None] - 0.5 * lam * signs
            try:
                coef = np.linalg.solve(k[np.ix_(s, s)], rhs)
            except np.linalg.LinAlgError:
                continue
            ok = np.all(np.sign(coef) == signs, axis=0)
            if not ok.any():
                continue
            coef = coef[:, ok]
            ks = k[np.ix_(s, s)]
            vals = (
                kxx
                - 2.0 * kx[s] @ coef
                + np.einsum("ic,ij,jc->c", coef, ks, coef)
                + lam * np.abs(coef).sum(axis=0)
            )
            j = int(np.argmin(vals))
            if vals[j] < best_f:
                best_f = float(vals[j])
                best_y = np.zeros(size)
                best_y[s] = coef[:, j]
    return best_y


def residual_errors(code: SparseCode | np.ndarray, labels: Sequence, kdd, kxd) -> dict:
    """Class-wise reconstruction residuals ``-2 y_c^T k_X + y_c^T K y_c``,
    where ``y_c`` keeps only the coefficients of atoms labeled ``c``.
    The ``k(X, X)`` term is dropped since it is shared by all classes."""
    k, kx = _inputs(kdd, kxd)
    y = code.y if isinstance(code, SparseCode) else np.asarray(code, dtype=float)
    if labels is None or len(labels) != kx.size or any(lab is None for lab in labels):
        raise UnknownLabel("every atom needs a class label")
    labels = np.asarray([str(lab) for lab in labels])
    out = {}
    for c in sorted(set(labels)):
        yc = np.where(labels == c, y, 0.0)
        out[c] = float(-2.0 * yc @ kx + yc @ k @ yc)
    return out


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def code_batch(
    queries: Sequence[SpdMatrix],
    cache: GramCache,
    cfg: SolverConfig,
    workers: int | None = None,
) -> list[SparseCode]:
    """Sparse-code many queries against one Gram cache.

    Queries are independent; with more than one worker they run on a
    thread pool (results keep input order).
    """

    def one(x):
        return kfss(cache.kdd, cache.cross(x), 1.0, cfg)

    n_workers = min(worker_count(workers), max(len(queries), 1))
    if n_workers == 1:
        return [one(x) for x in queries]
    with ThreadPoolExecutor(n_workers) as pool:
        return list(pool.map(one, queries))


@dataclass
class Prediction:
    label: str
    residuals: dict
    code: SparseCode


def _predict(x: SpdMatrix, cache: GramCache, cfg: SolverConfig) -> Prediction:
    labels = cache.dictionary.labels
    if labels is None:
        raise UnknownLabel("classification needs a labeled dictionary")
    kx = cache.cross(x)
    code = kfss(cache.kdd, kx, 1.0, cfg)
    res = residual_errors(code, labels, cache.kdd, kx)
    # dict is in sorted class order, so min() keeps the smallest id on ties
    label = min(res, key=res.get)
    return Prediction(label, res, code)


def classify(
    x: SpdMatrix,
    dictionary: Dictionary,
    spec: KernelSpec,
    cfg: SolverConfig = SolverConfig(),
    cache: GramCache | None = None,
) -> str:
    """Label of the class whose atoms best reconstruct ``x``."""
    cache = cache if cache is not None else gram(dictionary, spec)
    return _predict(x, cache, cfg).label


def predict_batch(
    queries: Sequence[SpdMatrix],
    cache: GramCache,
    cfg: SolverConfig,
    workers: int | None = None,
) -> list[Prediction]:
    n_workers = min(worker_count(workers), max(len(queries), 1))
    if n_workers == 1:
        return [_predict(x, cache, cfg) for x in queries]
    with ThreadPoolExecutor(n_workers) as pool:
        return list(pool.map(lambda x: _predict(x, cache, cfg), queries))
