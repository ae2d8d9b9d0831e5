import numpy as np
import pytest

from spdsparse.coding import SolverConfig, kfss
from spdsparse.data import Dataset, Dictionary
from spdsparse.divergences import airm_dist, karcher_mean
from spdsparse.errors import AtomUnused, ConfigError
from spdsparse.kernels import KernelSpec, gram
from spdsparse.learning import (
    LearnConfig,
    energy,
    init_dictionary,
    kmeans_init,
    learn,
    riccati_terms,
    sample_kernels,
    stein_terms,
    update_atom_j,
    update_atom_s,
)
from spdsparse.spd import is_spd
from spdsparse.synth import SynthSpec, gen_synth

from conftest import make_spd


@pytest.mark.parametrize("y", [0.3, 0.95, 1.7])
@pytest.mark.parametrize("update", [update_atom_j, update_atom_s])
def test_single_atom_fixed_point(rng, update, y):
    x = make_spd(rng, 4)
    data = Dataset([x])
    d = Dictionary([x])
    spec = KernelSpec(
        "j" if update is update_atom_j else "s", 0.5, 4
    )
    upd = update(0, data, [np.array([y])], d, spec)
    assert not upd.projected
    np.testing.assert_allclose(upd.atom.data, x.data, atol=1e-8 * np.linalg.norm(x.data))


def test_jeffrey_update_solves_its_riccati_equation():
    data = gen_synth(SynthSpec(classes=2, per_class=6, dim=3, seed=2))
    d = Dictionary([data[0], data[3], data[7], data[10]])
    spec = KernelSpec("j", 0.5, 3)
    cache = gram(d, spec)
    kxd = sample_kernels(data, d, spec)
    codes = np.stack([kfss(cache.kdd, row, 1.0, SolverConfig(0.05)).y for row in kxd])
    checked = 0
    for r in range(len(d)):
        upd = update_atom_j(r, data, codes, d, spec)
        if upd.projected:
            continue
        p, q = riccati_terms(r, data, codes, d, spec)
        if not is_spd(p):
            p, q = -p, -q
        dm = upd.atom.data
        np.testing.assert_allclose(dm @ p @ dm, q, atol=1e-7 * np.linalg.norm(q))
        checked += 1
    assert checked


def test_stein_update_satisfies_fixed_point_equation(rng):
    # D = (den/2) P^-1 where P depends on the previous atom
    data = Dataset([make_spd(rng, 3) for _ in range(6)])
    d = Dictionary([make_spd(rng, 3) for _ in range(2)])
    spec = KernelSpec("s", 1.0, 3)
    codes = np.full((6, 2), 0.4)
    upd = update_atom_s(0, data, codes, d, spec)
    p, den = stein_terms(0, data, codes, d, spec)
    if not upd.projected:
        np.testing.assert_allclose(upd.atom.data @ p, 0.5 * den * np.eye(3), atol=1e-9)


def test_unused_atom_raises(rng):
    data = Dataset([make_spd(rng, 2) for _ in range(3)])
    d = Dictionary([make_spd(rng, 2) for _ in range(2)])
    codes = np.array([[0.5, 0.0]] * 3)
    with pytest.raises(AtomUnused):
        update_atom_s(1, data, codes, d, KernelSpec("s", 0.5, 2))


def test_energy_equals_sum_of_objectives(rng):
    data = Dataset([make_spd(rng, 3) for _ in range(4)])
    d = Dictionary([make_spd(rng, 3) for _ in range(2)])
    spec = KernelSpec("s", 1.0, 3)
    codes = rng.standard_normal((4, 2))
    k = gram(d, spec).kdd
    kx = sample_kernels(data, d, spec)
    expected = sum(1 - 2 * y @ row + y @ k @ y + 0.1 * np.abs(y).sum() for y, row in zip(codes, kx))
    assert energy(data, d, spec, 0.1, codes) == pytest.approx(expected)


@pytest.fixture(scope="module")
def synth_train():
    ds = gen_synth(SynthSpec(classes=3, per_class=10, dim=4, seed=3))
    return ds


@pytest.mark.parametrize("kind, beta", [("j", 0.5), ("s", 1.5)])
def test_learning_reduces_energy(synth_train, kind, beta):
    cfg = LearnConfig(n_atoms=6, iters=4, kernel=KernelSpec(kind, beta, 4), lam=0.01, seed=1)
    d, trace = learn(synth_train, cfg)
    assert trace.energies[-1] < trace.initial_energy
    assert not trace.no_improvement
    assert len(trace.energies) == 4 and len(trace.projected[0]) == 6
    assert all(is_spd(a.data) for a in d)
    d2, trace2 = learn(synth_train, cfg)
    assert trace2.energies == trace.energies


def test_init_validation(synth_train):
    spec = KernelSpec("s", 0.5, 4)
    with pytest.raises(ConfigError):
        init_dictionary(synth_train, LearnConfig(n_atoms=31, iters=1, kernel=spec))
    with pytest.raises(ConfigError):
        LearnConfig(n_atoms=2, iters=1, kernel=spec, init="svd")
    with pytest.raises(ConfigError):
        LearnConfig(n_atoms=0, iters=1, kernel=spec)


def test_kmeans_recovers_two_clusters():
    ds = gen_synth(SynthSpec(classes=2, per_class=15, dim=3, spread=0.1, separation=3.0, seed=5))
    centres = kmeans_init(ds, 2, seed=0)
    for c in ("0", "1"):
        mean = karcher_mean([x for x, lab in zip(ds.items, ds.labels) if lab == c])
        assert min(airm_dist(a, mean) for a in centres) < 0.5
