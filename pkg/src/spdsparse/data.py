"""Labeled SPD collections and the SPD-JSON v1 file format."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, ParseError
from .spd import SpdMatrix, as_spd, check_same_dim

FORMAT_VERSION = 1


def _check_labels(labels, count: int) -> list[str] | None:
    if labels is None:
        return None
    labels = list(labels)
    if len(labels) != count:
        raise DimensionMismatch(f"{len(labels)} labels for {count} matrices")
    if not labels:
        return None
    if any(lab is None for lab in labels):
        if all(lab is None for lab in labels):
            return None
        raise ParseError("labels must be present on every item or on none")
    return [str(lab) for lab in labels]


@dataclass(frozen=True)
class Dataset:
    """A collection of same-size SPD matrices, optionally labeled."""

    items: tuple[SpdMatrix, ...]
    labels: tuple[str, ...] | None = None
    provenance: str = ""

    def __init__(self, items: Iterable, labels=None, provenance: str = ""):
        items = tuple(as_spd(x) for x in items)
        if items:
            check_same_dim(*items)
        labels = _check_labels(labels, len(items))
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "labels", None if labels is None else tuple(labels))
        object.__setattr__(self, "provenance", provenance)

    @property
    def dim(self) -> int:
        if not self.items:
            raise ValueError("empty dataset has no dimension")
        return self.items[0].n

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> SpdMatrix:
        return self.items[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset) or len(self) != len(other):
            return False
        return self.labels == other.labels and all(
            np.array_equal(a.data, b.data) for a, b in zip(self.items, other.items)
        )

    __hash__ = None


class Dictionary:
    """Ordered SPD atoms with optional class labels.

    Stacked atoms, inverses and log-determinants are cached for the
    vectorised kernel evaluations; :meth:`with_atom` returns a new
    dictionary so caches never go stale.
    """

    def __init__(self, atoms: Sequence, labels=None):
        atoms = tuple(as_spd(a) for a in atoms)
        if not atoms:
            raise ValueError("a dictionary needs at least one atom")
        check_same_dim(*atoms)
        self.atoms = atoms
        labels = _check_labels(labels, len(atoms))
        self.labels = None if labels is None else tuple(labels)

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "Dictionary":
        return cls(ds.items, ds.labels)

    def to_dataset(self, provenance: str = "") -> Dataset:
        return Dataset(self.atoms, self.labels, provenance)

    @property
    def dim(self) -> int:
        return self.atoms[0].n

    def __len__(self) -> int:
        return len(self.atoms)

    def __getitem__(self, i: int) -> SpdMatrix:
        return self.atoms[i]

    @cached_property
    def stack(self) -> np.ndarray:
        return np.stack([a.data for a in self.atoms])

    @cached_property
    def inv_stack(self) -> np.ndarray:
        return np.stack([a.inv for a in self.atoms])

    @cached_property
    def logdets(self) -> np.ndarray:
        return np.array([a.logdet for a in self.atoms])

    def with_atom(self, r: int, atom: SpdMatrix) -> "Dictionary":
        atoms = list(self.atoms)
        atoms[r] = as_spd(atom)
        return Dictionary(atoms, self.labels)

    def __repr__(self) -> str:
        return f"Dictionary(N={len(self)}, n={self.dim}, labeled={self.labels is not None})"


# -- SPD-JSON v1 ------------------------------------------------------------


def _to_json(matrices: Sequence[SpdMatrix], labels, extra: dict) -> dict:
    dim = matrices[0].n if matrices else 0
    labels = labels if labels is not None else [None] * len(matrices)
    doc = {"version": FORMAT_VERSION, "dim": dim}
    doc.update(extra)
    doc["items"] = [
        {"label": lab, "data": [float(v) for v in m.data.ravel()]}
        for m, lab in zip(matrices, labels)
    ]
    return doc


def _write(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def parse_spd_json(doc) -> tuple[list[SpdMatrix], list | None, dict]:
    """Validate a decoded SPD-JSON document.

    Returns the matrices, the labels (``None`` if unlabeled) and the
    remaining top-level fields.
    """
    if not isinstance(doc, dict):
        raise ParseError("SPD-JSON root must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported SPD-JSON version {doc.get('version')!r}")
    dim = doc.get("dim")
    items = doc.get("items")
    if not isinstance(items, list):
        raise ParseError("'items' must be a list")
    # an empty file is written with dim 0
    min_dim = 1 if items else 0
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < min_dim:
        raise ParseError(f"invalid dim {dim!r}")
    matrices, labels = [], []
    for k, item in enumerate(items):
        if not isinstance(item, dict) or "data" not in item:
            raise ParseError(f"item {k} lacks a 'data' field")
        label = item.get("label")
        if label is not None and not isinstance(label, (str, int)):
            raise ParseError(f"item {k}: label must be a string or null")
        data = item["data"]
        if not isinstance(data, list):
            raise ParseError(f"item {k}: 'data' must be a list")
        if len(data) != dim * dim:
            raise DimensionMismatch(
                f"item {k}: {len(data)} entries for a {dim}x{dim} matrix"
            )
        try:
            arr = np.array(data, dtype=float).reshape(dim, dim)
        except (TypeError, ValueError):
            raise ParseError(f"item {k}: non-numeric entries") from None
        matrices.append(SpdMatrix(arr))
        labels.append(label)
    extra = {k: v for k, v in doc.items() if k not in ("version", "dim", "items")}
    return matrices, _check_labels(labels, len(labels)), extra


def read_spd_json(path) -> tuple[list[SpdMatrix], list | None, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{os.fspath(path)}: invalid JSON ({exc})") from None
    return parse_spd_json(doc)


def save_dataset(ds: Dataset, path) -> None:
    extra = {"provenance": ds.provenance} if ds.provenance else {}
    _write(_to_json(ds.items, ds.labels, extra), path)


def load_dataset(path) -> Dataset:
    matrices, labels, extra = read_spd_json(path)
    return Dataset(matrices, labels, str(extra.get("provenance", "")))


def save_dictionary(d: Dictionary, path) -> None:
    _write(_to_json(d.atoms, d.labels, {"kind": "dictionary"}), path)


def load_dictionary(path) -> Dictionary:
    """Load a dictionary; any SPD-JSON dataset file is accepted as well."""
    matrices, labels, _ = read_spd_json(path)
    if not matrices:
        raise ParseError(f"{os.fspath(path)}: dictionary has no atoms")
    return Dictionary(matrices, labels)
