"""
Region covariance descriptors.

Per-location feature vectors are summarised by their covariance matrix,
regularised towards a multiple of the identity so that degenerate regions
(e.g. constant image blocks) still give SPD descriptors.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import ImageTooSmall, NotPositiveDefinite, ParseError, TooFewSamples
from .spd import SpdMatrix

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class FeatureGrid:
    values: np.ndarray  # (height, width, d)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def d(self) -> int:
        return self.values.shape[2]

    def block(self, top: int, left: int, h: int, w: int) -> np.ndarray:
        """Feature vectors of a rectangular region, one per row."""
        return self.values[top : top + h, left : left + w].reshape(-1, self.d)


def cov_descriptor(vectors, eps: float = DEFAULT_EPS) -> SpdMatrix:
    """Sample covariance (``m - 1`` denominator) plus ``eps * mean(diag) * I``.

    When every feature is constant the regulariser falls back to ``eps * I``.
    """
    f = np.asarray(vectors, dtype=float)
    if f.ndim != 2 or f.shape[0] < 2:
        raise TooFewSamples("a covariance descriptor needs at least two vectors")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    cov = np.cov(f, rowvar=False, ddof=1).reshape(f.shape[1], f.shape[1])
    scale = float(np.mean(np.diag(cov)))
    cov = cov + eps * (scale if scale > 0 else 1.0) * np.eye(f.shape[1])
    try:
        return SpdMatrix(cov, tol=1e-8)
    except NotPositiveDefinite:
        raise NotPositiveDefinite(
            "covariance is singular; raise eps to regularise degenerate features"
        ) from None


def texture_features(image) -> FeatureGrid:
    """Per-pixel ``(I, |dI/dx|, |dI/dy|, |d2I/dx2|, |d2I/dy2|)``.

    Central differences on an edge-replicated image; ``x`` runs along
    columns.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or min(img.shape) < 3:
        raise ImageTooSmall(f"texture features need at least a 3x3 image, got {img.shape}")
    p = np.pad(img, 1, mode="edge")
    c = p[1:-1, 1:-1]
    left, right = p[1:-1, :-2], p[1:-1, 2:]
    up, down = p[:-2, 1:-1], p[2:, 1:-1]
    feats = np.stack(
        [
            img,
            np.abs(right - left) / 2.0,
            np.abs(down - up) / 2.0,
            np.abs(right - 2.0 * c + left),
            np.abs(down - 2.0 * c + up),
        ],
        axis=-1,
    )
    return FeatureGrid(feats)


def block_descriptors(
    image, block: tuple[int, int], eps: float = DEFAULT_EPS
) -> list[SpdMatrix]:
    """Texture descriptors of non-overlapping blocks in row-major order.

    Features are computed on the whole image; partial blocks at the right
    and bottom edges are dropped.
    """
    bh, bw = block
    if bh < 1 or bw < 1:
        raise ValueError("block size must be positive")
    grid = texture_features(image)
    out = []
    for top in range(0, grid.height - bh + 1, bh):
        for left in range(0, grid.width - bw + 1, bw):
            out.append(cov_descriptor(grid.block(top, left, bh, bw), eps))
    return out


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (m, 3K)

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=float)
        if f.ndim != 2 or f.shape[1] % 3:
            raise ParseError("frames must have 3K columns (x, y, z per joint)")
        object.__setattr__(self, "frames", f)

    @property
    def joints(self) -> int:
        return self.frames.shape[1] // 3


def joint_covariance(seq: FrameSequence, eps: float = DEFAULT_EPS) -> SpdMatrix:
    if len(seq.frames) < 2:
        raise TooFewSamples("joint covariance needs at least two frames")
    return cov_descriptor(seq.frames, eps)


# -- input formats ----------------------------------------------------------


def read_pgm(path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            return np.asarray(im, dtype=float)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ParseError(f"{path}: cannot read PGM ({exc})") from None


def read_csv_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    if len({len(r) for r in rows}) != 1:
        raise ParseError(f"{path}: rows have differing lengths")
    return np.array(rows)


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv_matrix(path)
    return read_pgm(path)


def image_dataset(path, block: tuple[int, int], eps: float = DEFAULT_EPS) -> Dataset:
    descs = block_descriptors(read_image(path), block, eps)
    return Dataset(descs, None, f"texture blocks {block[0]}x{block[1]} of {Path(path).name}")


def skeleton_dataset(path, eps: float = DEFAULT_EPS) -> Dataset:
    seq = FrameSequence(read_csv_matrix(path))
    return Dataset([joint_covariance(seq, eps)], None, f"joint covariance of {Path(path).name}")
