"""
Dictionary learning for kernel sparse coding on the SPD cone.

Alternates a sparse-coding pass over all samples with a sweep of per-atom
updates. Kernel values involving the atom being updated are frozen at
their current values, which turns the stationarity condition into a
Riccati equation for the Jeffrey kernel and into a fixed-point step for
the Stein kernel.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .coding import SolverConfig, SparseCode, kfss, objective, worker_count
from .data import Dataset, Dictionary
from .divergences import airm_dist, karcher_mean, riccati_solve
from .errors import AtomUnused, ConfigError, DegenerateDenominator, RiccatiNotPD
from .kernels import GramCache, KernelKind, KernelSpec, cross_gram, gram
from .spd import SpdMatrix, is_spd, nearest_spd, sym_part

log = logging.getLogger(__name__)

INIT_METHODS = ("random_subset", "intrinsic_kmeans")


class AtomUpdate(NamedTuple):
    atom: SpdMatrix
    projected: bool


@dataclass(frozen=True)
class LearnConfig:
    n_atoms: int
    iters: int
    kernel: KernelSpec
    lam: float = 0.1
    init: str = "random_subset"
    seed: int = 0
    workers: int | None = 1
    max_steps: int | None = None

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ConfigError("n_atoms must be at least 1")
        if self.iters < 1:
            raise ConfigError("iters must be at least 1")
        if self.init not in INIT_METHODS:
            raise ConfigError(f"init must be one of {INIT_METHODS}, got {self.init!r}")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")


@dataclass
class LearnTrace:
    initial_energy: float
    energies: list[float] = field(default_factory=list)
    projected: list[list[bool]] = field(default_factory=list)
    skipped: list[list[int]] = field(default_factory=list)
    truncated: int = 0
    no_improvement: bool = False

    def to_json(self) -> dict:
        return {
            "initial_energy": self.initial_energy,
            "energies": self.energies,
            "projected": self.projected,
            "skipped": self.skipped,
            "truncated": self.truncated,
            "no_improvement": self.no_improvement,
        }


def _codes_matrix(codes: Sequence[SparseCode | np.ndarray]) -> np.ndarray:
    return np.stack([c.y if isinstance(c, SparseCode) else np.asarray(c, float) for c in codes])


def sample_kernels(data: Dataset | Sequence[SpdMatrix], d: Dictionary, spec: KernelSpec) -> np.ndarray:
    """``m x N`` matrix of ``k(X_i, D_j)``."""
    return np.stack([cross_gram(x, d, spec) for x in data])


def energy(
    data: Dataset,
    d: Dictionary,
    spec: KernelSpec,
    lam: float,
    codes: Sequence[SparseCode | np.ndarray],
    cache: GramCache | None = None,
) -> float:
    """Total sparse-coding loss of the samples under the given codes."""
    cache = cache if cache is not None else gram(d, spec)
    ys = _codes_matrix(codes)
    if len(ys) != len(data):
        raise ValueError(f"{len(ys)} codes for {len(data)} samples")
    return float(
        sum(objective(y, cache.kdd, cache.cross(x), 1.0, lam) for x, y in zip(data, ys))
    )


def _prepare(r, data, codes, d, spec, kdd, kxd):
    ys = _codes_matrix(codes)
    yr = ys[:, r]
    if not np.any(yr):
        raise AtomUnused(f"atom {r} has zero weight in every code")
    if kdd is None:
        kdd = gram(d, spec).kdd
    if kxd is None:
        kxd = sample_kernels(data, d, spec)
    # pair weights sum_i y_ir * y_ij * k(D_j, D_r)
    w_atoms = (yr @ ys) * kdd[:, r]
    w_samples = yr * kxd[:, r]
    return w_atoms, w_samples


def riccati_terms(r, data, codes, d, spec, kdd=None, kxd=None) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients ``P`` (inverses) and ``Q`` (matrices) of the Jeffrey
    atom update ``D^-1 Q D^-1 = P``."""
    w_atoms, w_samples = _prepare(r, data, codes, d, spec, kdd, kxd)
    xs = np.stack([x.data for x in data])
    xinv = np.stack([x.inv for x in data])
    p = np.tensordot(w_atoms, d.inv_stack, 1) - 2.0 * np.tensordot(w_samples, xinv, 1)
    q = np.tensordot(w_atoms, d.stack, 1) - 2.0 * np.tensordot(w_samples, xs, 1)
    return sym_part(p), sym_part(q)


def update_atom_j(r, data, codes, d, spec, kdd=None, kxd=None) -> AtomUpdate:
    """Closed-form Jeffrey update of atom ``r``.

    ``P`` and ``Q`` are negated together when both are negative definite;
    if their signs disagree both are projected onto the SPD cone first and
    the update is flagged as projected.
    """
    p, q = riccati_terms(r, data, codes, d, spec, kdd, kxd)
    if is_spd(p) and is_spd(q):
        return AtomUpdate(riccati_solve(p, q), False)
    if is_spd(-p) and is_spd(-q):
        return AtomUpdate(riccati_solve(-p, -q), False)
    sign = 1.0 if np.trace(q) >= 0 else -1.0
    try:
        atom = riccati_solve(nearest_spd(sign * p), nearest_spd(sign * q))
    except RiccatiNotPD:
        atom = nearest_spd(sign * q)
    return AtomUpdate(atom, True)


def stein_terms(r, data, codes, d, spec, kdd=None, kxd=None) -> tuple[np.ndarray, float]:
    """Matrix ``P`` and scalar normaliser of the Stein fixed-point update."""
    w_atoms, w_samples = _prepare(r, data, codes, d, spec, kdd, kxd)
    dr = d[r].data
    # (A + D_r)^-1 for every sample and atom, batched
    sample_inv = np.linalg.inv(np.stack([x.data for x in data]) + dr)
    atom_inv = np.linalg.inv(d.stack + dr)
    p = 2.0 * np.tensordot(w_samples, sample_inv, 1) - np.tensordot(w_atoms, atom_inv, 1)
    denom = 2.0 * w_samples.sum() - w_atoms.sum()
    return sym_part(p), float(denom)


def update_atom_s(r, data, codes, d, spec, kdd=None, kxd=None) -> AtomUpdate:
    """Fixed-point Stein update of atom ``r``: ``D = (denom / 2) P^-1``.

    Raises :class:`DegenerateDenominator` when the normaliser (or ``P``)
    vanishes; the result is projected onto the SPD cone if needed.
    """
    p, denom = stein_terms(r, data, codes, d, spec, kdd, kxd)
    if abs(denom) < 1e-12:
        raise DegenerateDenominator(f"atom {r}: normaliser {denom:.3e}")
    try:
        cand = 0.5 * denom * np.linalg.inv(p)
    except np.linalg.LinAlgError:
        raise DegenerateDenominator(f"atom {r}: singular update matrix") from None
    if not np.all(np.isfinite(cand)):
        raise DegenerateDenominator(f"atom {r}: non-finite update")
    if is_spd(sym_part(cand)):
        return AtomUpdate(SpdMatrix.trusted(cand), False)
    return AtomUpdate(nearest_spd(cand), True)


def kmeans_init(data: Dataset, n_atoms: int, seed: int = 0, max_iters: int = 20) -> Dictionary:
    """Intrinsic k-means: AIRM assignments, Karcher-mean centroids."""
    m = len(data)
    if n_atoms > m:
        raise ConfigError(f"cannot form {n_atoms} clusters from {m} samples")
    rng = np.random.default_rng(seed)
    centers = [data[i] for i in rng.choice(m, n_atoms, replace=False)]
    assign = None
    for _ in range(max_iters):
        dist = np.array([[airm_dist(c, x) for c in centers] for x in data])
        new_assign = np.argmin(dist, axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        nearest = dist[np.arange(m), assign]
        taken = set()
        for c in range(n_atoms):
            members = np.flatnonzero(assign == c)
            if members.size == 0:
                # reseed from the sample worst served by its centroid
                order = [i for i in np.argsort(-nearest, kind="stable") if i not in taken]
                far = order[0]
                taken.add(far)
                assign[far] = c
                centers[c] = data[far]
            else:
                centers[c] = karcher_mean([data[i] for i in members])
    return Dictionary(centers)


def init_dictionary(data: Dataset, cfg: LearnConfig) -> Dictionary:
    if cfg.n_atoms > len(data):
        raise ConfigError(f"n_atoms={cfg.n_atoms} exceeds the {len(data)} training samples")
    if cfg.init == "intrinsic_kmeans":
        return kmeans_init(data, cfg.n_atoms, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    pick = rng.choice(len(data), cfg.n_atoms, replace=False)
    return Dictionary([data[i] for i in pick])


def _code_all(kxd: np.ndarray, cache: GramCache, solver: SolverConfig, workers) -> list[SparseCode]:
    n_workers = min(worker_count(workers), len(kxd))
    if n_workers == 1:
        return [kfss(cache.kdd, row, 1.0, solver) for row in kxd]
    with ThreadPoolExecutor(n_workers) as pool:
        return list(pool.map(lambda row: kfss(cache.kdd, row, 1.0, solver), kxd))


def atom_loss(r, kdd_row: np.ndarray, kxd_col: np.ndarray, ys: np.ndarray) -> float:
    """Part of the total loss that depends on atom ``r`` with codes fixed."""
    yr = ys[:, r]
    pair = (yr @ ys) * kdd_row
    pair[r] = 0.0
    return float(-2.0 * yr @ kxd_col + 2.0 * pair.sum())


def _improves(r, atom, ys, cache, kxd, samples, spec) -> bool:
    new_row = cross_gram(atom, cache.dictionary, spec)
    new_col = cross_gram(atom, samples, spec)
    before = atom_loss(r, cache.kdd[r], kxd[:, r], ys)
    return atom_loss(r, new_row, new_col, ys) <= before


def _total(codes, cache, kxd, lam) -> float:
    return float(sum(objective(c.y, cache.kdd, row, 1.0, lam) for c, row in zip(codes, kxd)))


def learn(data: Dataset, cfg: LearnConfig, init: Dictionary | None = None):
    """Learn a dictionary; returns ``(Dictionary, LearnTrace)``.

    ``trace.energies[t]`` is the total loss after sweep ``t`` with codes
    recomputed for the updated dictionary.
    """
    if len(data) == 0:
        raise ConfigError("training data is empty")
    spec = cfg.kernel
    if data.dim != spec.dim:
        raise ConfigError(f"data n={data.dim} but kernel n={spec.dim}")
    solver = SolverConfig(cfg.lam, cfg.max_steps)
    update = update_atom_j if spec.kind is KernelKind.JEFFREY else update_atom_s
    samples = Dictionary(data.items)

    d = init if init is not None else init_dictionary(data, cfg)
    cache = gram(d, spec)
    kxd = sample_kernels(data, d, spec)
    codes = _code_all(kxd, cache, solver, cfg.workers)
    trace = LearnTrace(initial_energy=_total(codes, cache, kxd, cfg.lam))
    trace.truncated += sum(c.truncated for c in codes)

    for t in range(cfg.iters):
        ys = _codes_matrix(codes)
        flags, skipped = [], []
        for r in range(len(d)):
            try:
                upd = update(r, data, ys, cache.dictionary, spec, cache.kdd, kxd)
            except (AtomUnused, DegenerateDenominator) as exc:
                log.debug("iteration %d: %s", t, exc)
                flags.append(False)
                skipped.append(r)
                continue
            if upd.projected and not _improves(r, upd.atom, ys, cache, kxd, samples, spec):
                flags.append(True)
                skipped.append(r)
                continue
            flags.append(upd.projected)
            cache = cache.with_atom(r, upd.atom)
            kxd[:, r] = cross_gram(upd.atom, samples, spec)
        codes = _code_all(kxd, cache, solver, cfg.workers)
        trace.truncated += sum(c.truncated for c in codes)
        trace.energies.append(_total(codes, cache, kxd, cfg.lam))
        trace.projected.append(flags)
        trace.skipped.append(skipped)
        log.info("iteration %d: energy %.6g", t, trace.energies[-1])

    trace.no_improvement = not trace.energies[-1] < trace.initial_energy
    return cache.dictionary, trace
