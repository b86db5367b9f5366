"""Seeded two-Gaussian flow data for demos and tests."""

from __future__ import annotations

import numpy as np

from .dataset import LABEL, NUMERIC, Column, Dataset, FeatureSchema


def synthetic_schema(n_features: int = 6) -> FeatureSchema:
    cols = [Column(f"f{i}", NUMERIC) for i in range(n_features)] + [Column("label", LABEL)]
    return FeatureSchema("synthetic", tuple(cols), {"0": 0, "1": 1})


def make_blobs(
    n: int = 2000,
    n_features: int = 6,
    separation: float = 2.0,
    minority_fraction: float = 0.5,
    label_noise: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Class 0 ~ N(-separation, I), class 1 ~ N(+separation, I).

    ``round(n * minority_fraction)`` rows are class 1. With ``label_noise``,
    that fraction of rows (rounded) gets its label flipped after sampling.
    Rows come out shuffled.
    """
    if not 0 < minority_fraction < 1:
        raise ValueError("minority_fraction must lie in (0, 1)")
    if not 0 <= label_noise < 1:
        raise ValueError("label_noise must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    n1 = int(round(n * minority_fraction))
    y = np.r_[np.zeros(n - n1, dtype=np.int64), np.ones(n1, dtype=np.int64)]
    centre = np.where(y == 1, separation, -separation)[:, None]
    X = centre + rng.standard_normal((n, n_features))
    if label_noise:
        flip = rng.choice(n, size=int(round(n * label_noise)), replace=False)
        y[flip] = 1 - y[flip]
    order = rng.permutation(n)
    return Dataset(X[order], y[order], synthetic_schema(n_features), provenance=f"synthetic(seed={seed})")
