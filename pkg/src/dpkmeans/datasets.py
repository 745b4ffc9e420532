"""Dataset ingestion and generators (Gaussian mixtures, coded hard instances)."""

from __future__ import annotations

import csv
import math

import numpy as np

from .core import Dataset, make_rng

__all__ = ["CsvFormatError", "ingest_csv", "gen_synthetic", "gen_hard_instance", "hard_instance_codewords"]


class CsvFormatError(ValueError):
    pass


def ingest_csv(path, diameter: float, *, skip_header: bool = False) -> Dataset:
    """Read comma-separated real rows of consistent width into a validated Dataset."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if skip_header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CsvFormatError(f"row {lineno}: expected {width} columns, found {len(row)}")
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise CsvFormatError(f"row {lineno}, column {col}: not a number: {cell!r}") from None
            rows.append(values)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return Dataset(np.array(rows), diameter)


def gen_synthetic(n: int = 5000, d: int = 20, n_components: int = 16, spread: float = 0.1,
                  seed: int = 0, box: float = 1.0) -> Dataset:
    """Gaussian mixture with means uniform in [-box, box]^d.

    Points are clipped to the ball circumscribing the box, whose diameter (the
    box diagonal) is the declared bound.
    """
    if n < 1 or d < 1 or n_components < 1 or n_components > n:
        raise ValueError("need n >= n_components >= 1 and d >= 1")
    if spread < 0 or box <= 0:
        raise ValueError("spread must be >= 0 and box > 0")
    rng = make_rng(seed)
    means = rng.uniform(-box, box, size=(n_components, d))
    labels = rng.integers(n_components, size=n)
    points = means[labels] + spread * rng.normal(size=(n, d))
    radius = box * math.sqrt(d)
    norms = np.linalg.norm(points, axis=1)
    far = norms > radius
    points[far] *= (radius / norms[far])[:, None]
    return Dataset(points, 2.0 * radius)


def hard_instance_codewords(k: int, d: int, rng, max_tries: int = 1000) -> np.ndarray:
    """k random +-1 codewords with pairwise Hamming distance >= d/4."""
    for _ in range(max_tries):
        words = rng.integers(0, 2, size=(k, d))
        ham = (words[:, None, :] != words[None, :, :]).sum(axis=2)
        np.fill_diagonal(ham, d)
        if ham.min() >= d / 4:
            return 2 * words - 1
    raise ValueError(f"no {k} codewords of length {d} with distance >= d/4 after {max_tries} tries")


def gen_hard_instance(k: int, d: int, multiplicity: int, seed: int = 0) -> Dataset:
    """L copies of each of k codewords, scaled into a cube of unit diagonal centered at 0.

    The optimal k-means cost is 0 (put one center on each codeword).
    """
    if k < 1 or d < 1 or multiplicity < 1:
        raise ValueError("k, d and multiplicity must be >= 1")
    rng = make_rng(seed)
    words = hard_instance_codewords(k, d, rng) / (2.0 * math.sqrt(d))
    return Dataset(np.repeat(words, multiplicity, axis=0), 1.0)
