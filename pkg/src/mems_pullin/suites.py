"""Seeded random domains and data for the randomized comparison suites.

Every generator draws from the ``numpy.random.Generator`` it is handed, so a
suite built from ``SeedSequence(seed).spawn(n)`` is reproducible case by case
regardless of the order (or process) in which cases run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .domain import DomainSpec, GridFunction, make_mask


def random_mask(rng: np.random.Generator, h: float = 1 / 64, half_width: float = 1.0, min_cells: int = 64) -> DomainSpec:
    """Connected 2D mask: union of random disks and boxes in ``[-w, w]^2``.

    Only the largest connected component is kept, so the result is always
    connected and never smaller than ``min_cells`` (redrawn otherwise).
    """
    n = int(round(2 * half_width / h))
    x = -half_width + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    while True:
        bitmap = np.zeros((n, n), dtype=bool)
        for _ in range(rng.integers(1, 5)):
            cx, cy = rng.uniform(-0.5, 0.5, size=2) * half_width
            if rng.random() < 0.5:
                rad = rng.uniform(0.2, 0.5) * half_width
                bitmap |= (X - cx) ** 2 + (Y - cy) ** 2 < rad**2
            else:
                a, b = rng.uniform(0.15, 0.5, size=2) * half_width
                bitmap |= (np.abs(X - cx) < a) & (np.abs(Y - cy) < b)
        labels, count = ndimage.label(bitmap)
        if count == 0:
            continue
        sizes = np.bincount(labels.ravel())[1:]
        keep = labels == 1 + int(np.argmax(sizes))
        if keep.sum() >= min_cells:
            return make_mask(2, keep, h, origin=(-half_width, -half_width))


def random_density(rng: np.random.Generator, domain: DomainSpec, positive: bool = False) -> GridFunction:
    """Sum of random Gaussian bumps on ``domain``.

    With ``positive=False`` a random fraction of cells is zeroed, so the
    result is only nonnegative; with ``positive=True`` a floor of 0.2 keeps
    it strictly positive.
    """
    c = domain.coords
    if c.ndim == 1:
        c = c[:, None]
    lo, hi = c.min(axis=0), c.max(axis=0)
    vals = np.zeros(domain.n_cells)
    for _ in range(rng.integers(1, 4)):
        center = rng.uniform(lo, hi)
        width = rng.uniform(0.1, 0.6) * float(np.max(hi - lo) + domain.spacing)
        vals += rng.uniform(0.5, 2.0) * np.exp(-np.sum((c - center) ** 2, axis=1) / width**2)
    if positive:
        vals += 0.2
    else:
        vals[rng.random(domain.n_cells) < rng.uniform(0.0, 0.3)] = 0.0
    return GridFunction(domain, vals)


@dataclass(frozen=True)
class TalentiCase:
    index: int
    domain: DomainSpec
    f: GridFunction
    p: float


def talenti_cases(seed: int, count: int, h: float = 1 / 64, exponents=(1.5, 2.0, 3.0)):
    """``count`` seeded (mask, f >= 0, p) triples."""
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        yield talenti_case(i, child, h, exponents)


def talenti_case(index: int, seed_seq, h: float = 1 / 64, exponents=(1.5, 2.0, 3.0)) -> TalentiCase:
    rng = np.random.default_rng(seed_seq)
    dom = random_mask(rng, h)
    f = random_density(rng, dom)
    p = float(exponents[rng.integers(len(exponents))])
    return TalentiCase(index, dom, f, p)
