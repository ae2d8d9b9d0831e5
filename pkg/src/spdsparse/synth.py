"""Synthetic labeled SPD data drawn around random class centres."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .divergences import exp_map
from .errors import ConfigError
from .spd import SpdMatrix


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 3
    per_class: int = 20
    dim: int = 5
    spread: float = 0.2
    separation: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if min(self.classes, self.per_class, self.dim) < 1:
            raise ConfigError("classes, per_class and dim must be at least 1")
        if self.spread < 0 or self.separation <= 0:
            raise ConfigError("spread must be >= 0 and separation > 0")


def random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random symmetric matrix of unit Frobenius norm."""
    a = rng.standard_normal((n, n))
    s = a + a.T
    return s / np.linalg.norm(s)


def gen_synth(spec: SynthSpec) -> Dataset:
    """Class ``c`` centre is ``exp_I(s * S_c)``; each sample is
    ``exp_centre(sigma * S)`` for fresh random unit-norm symmetric ``S``.

    Centres therefore sit at AIRM distance ``s`` from the identity and
    samples at AIRM distance ``sigma`` from their centre.

    Labels are the class indices as strings; samples are grouped by class.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.dim
    eye = SpdMatrix(np.eye(n))
    items, labels = [], []
    for c in range(spec.classes):
        center = exp_map(eye, spec.separation * random_direction(rng, n))
        for _ in range(spec.per_class):
            items.append(exp_map(center, spec.spread * random_direction(rng, n)))
            labels.append(str(c))
    prov = (
        f"synthetic classes={spec.classes} per_class={spec.per_class} dim={n} "
        f"spread={spec.spread} separation={spec.separation} seed={spec.seed}"
    )
    return Dataset(items, labels, prov)


def split_train_test(ds: Dataset, per_class_train: int) -> tuple[Dataset, Dataset]:
    """Split each class into its first ``per_class_train`` samples and the rest."""
    if ds.labels is None:
        raise ConfigError("split needs a labeled dataset")
    seen: dict[str, int] = {}
    train, test = [], []
    for x, lab in zip(ds.items, ds.labels):
        k = seen.get(lab, 0)
        (train if k < per_class_train else test).append((x, lab))
        seen[lab] = k + 1

    def pack(pairs):
        return Dataset([p[0] for p in pairs], [p[1] for p in pairs], ds.provenance)

    return pack(train), pack(test)
