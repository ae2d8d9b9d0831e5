"""Timing of divergence evaluation and cross-Gram construction."""
from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .data import Dictionary
from .kernels import KernelKind, KernelSpec, cross_gram
from .spd import SpdMatrix
from .synth import random_direction
from .divergences import exp_map

CSV_HEADER = ("op", "n", "N", "kernel", "mean_ms", "std_ms", "median_ms")


@dataclass(frozen=True)
class BenchRow:
    op: str
    n: int
    atoms: int
    kernel: str
    mean_ms: float
    std_ms: float
    median_ms: float

    @classmethod
    def from_times(cls, op: str, n: int, atoms: int, kernel: str, t: np.ndarray) -> "BenchRow":
        return cls(op, n, atoms, kernel, float(t.mean()), float(t.std()), float(np.median(t)))

    def csv_fields(self) -> list[str]:
        return [
            self.op, str(self.n), str(self.atoms), self.kernel,
            f"{self.mean_ms:.6f}", f"{self.std_ms:.6f}", f"{self.median_ms:.6f}",
        ]


@contextlib.contextmanager
def single_thread():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=1):
        yield


def random_spd(rng: np.random.Generator, n: int, scale: float = 1.0) -> SpdMatrix:
    return exp_map(SpdMatrix(np.eye(n)), scale * random_direction(rng, n))


def _timed(fn, reps: int) -> np.ndarray:
    fn()  # warm-up
    out = np.empty(reps)
    for r in range(reps):
        t0 = time.perf_counter()
        fn()
        out[r] = (time.perf_counter() - t0) * 1e3
    return out


def _pair_j(x: np.ndarray, y: np.ndarray) -> float:
    cx = linalg.cho_factor(x)
    cy = linalg.cho_factor(y)
    return 0.5 * np.trace(linalg.cho_solve(cx, y)) + 0.5 * np.trace(linalg.cho_solve(cy, x)) - len(x)


def _logdet(a: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(linalg.cholesky(a, lower=True)))))


def _pair_s(x: np.ndarray, y: np.ndarray) -> float:
    return _logdet(0.5 * (x + y)) - 0.5 * (_logdet(x) + _logdet(y))


def time_pair(n: int, kind: KernelKind, reps: int, rng) -> np.ndarray:
    """Per-evaluation time (ms) of one divergence from scratch."""
    x, y = random_spd(rng, n).data, random_spd(rng, n).data
    fn = _pair_j if kind is KernelKind.JEFFREY else _pair_s
    return _timed(lambda: fn(x, y), reps)


def time_cross_gram(
    n: int, atoms: Sequence[int], kind: KernelKind, reps: int, rng, batch: int = 16
) -> dict[int, np.ndarray]:
    """Per-query time (ms) against dictionaries of each size in ``atoms``,
    with atom inverses and log-determinants cached.

    Sizes are interleaved within every repetition so that slow drift of the
    machine affects all sizes alike. Each repetition codes ``batch`` queries
    and reports their average, which keeps timer resolution out of the
    small-N measurements.
    """
    spec = KernelSpec(kind, max(0.5, (n - 1) / 2), n)
    dicts = {}
    for size in atoms:
        d = Dictionary([random_spd(rng, n) for _ in range(size)])
        d.stack, d.inv_stack, d.logdets  # populate caches outside the timing
        dicts[size] = d
    queries = [SpdMatrix.trusted(random_spd(rng, n).data) for _ in range(batch)]

    def run(d):
        for q in queries:
            q.__dict__.pop("inv", None)  # a fresh query pays for its own inverse
            cross_gram(q, d, spec)

    for d in dicts.values():
        run(d)  # warm-up
    out = {size: np.empty(reps) for size in atoms}
    for r in range(reps):
        for size, d in dicts.items():
            t0 = time.perf_counter()
            run(d)
            out[size][r] = (time.perf_counter() - t0) * 1e3 / batch
    return out


def run_bench(
    dims: Sequence[int],
    atoms: Sequence[int],
    kinds: Iterable[KernelKind],
    reps: int,
    seed: int = 0,
) -> list[BenchRow]:
    if reps < 1:
        raise ValueError("reps must be at least 1")
    rng = np.random.default_rng(seed)
    rows = []
    with single_thread():
        for kind in kinds:
            for n in dims:
                t = time_pair(n, kind, reps, rng)
                rows.append(BenchRow.from_times("divergence", n, 1, kind.value, t))
                for size, t in time_cross_gram(n, atoms, kind, reps, rng).items():
                    rows.append(BenchRow.from_times("cross_gram", n, size, kind.value, t))
    return rows


def linear_fit_r2(x, y) -> tuple[float, float, float]:
    """Least-squares line ``y = a x + b``; returns ``(a, b, R^2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def scaling_fit(rows: Sequence[BenchRow], kernel: str, n: int) -> tuple[float, float, float]:
    """Linear fit of median cross-Gram time against ``N`` at fixed ``n``."""
    pts = sorted((r.atoms, r.median_ms) for r in rows if r.op == "cross_gram" and r.kernel == kernel and r.n == n)
    if len(pts) < 2:
        raise ValueError(f"need at least two dictionary sizes for kernel={kernel} n={n}")
    return linear_fit_r2([p[0] for p in pts], [p[1] for p in pts])


def crossover(rows: Sequence[BenchRow], op: str = "divergence") -> int | None:
    """Smallest ``n`` at which the Stein timing drops below the Jeffrey one
    for the given operation (``None`` if it never does)."""
    by = {}
    for r in rows:
        if r.op == op:
            by.setdefault((r.n, r.atoms), {})[r.kernel] = r.median_ms
    for (n, _), t in sorted(by.items()):
        if "jeffrey" in t and "stein" in t and t["stein"] < t["jeffrey"]:
            return n
    return None
