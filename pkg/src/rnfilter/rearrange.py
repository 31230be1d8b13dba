"""Quantization, decreasing rearrangement, and level-set reconstruction.

A gridded scalar field is reduced to a strictly decreasing list of levels and
a per-pixel index into that list.  The decreasing rearrangement is then the
piecewise-constant profile that carries each level together with the measure
(pixel count) of its level set.  Because pixels keep their level index, the
filtered field is recovered by substituting evolved level values back through
the index map; level sets of the output equal level sets of the input by
construction.

The math is dimension-free: any array shape is accepted, with each entry
counting as one unit of measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuantizedImage:
    """A field stored as per-pixel indices into a strictly decreasing level list.

    ``level_index`` holds, for every pixel, the 0-based position of its value
    inside ``levels``; ``levels`` is strictly decreasing and every level is
    referenced by at least one pixel.
    """

    shape: tuple[int, ...]
    level_index: np.ndarray
    levels: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.level_index)
        lev = np.asarray(self.levels, dtype=float)
        if lev.ndim != 1 or lev.size < 1:
            raise ValueError("levels must be a nonempty 1-d array")
        if np.any(np.diff(lev) >= 0.0):
            raise ValueError("levels must be strictly decreasing")
        if idx.shape != tuple(self.shape):
            raise ValueError("level_index shape does not match image shape")
        if idx.size == 0:
            raise ValueError("image must contain at least one pixel")
        if idx.min() < 0 or idx.max() >= lev.size:
            raise ValueError("level_index out of range")
        counts = np.bincount(idx.ravel(), minlength=lev.size)
        if np.any(counts == 0):
            raise ValueError("every level must be used by at least one pixel")
        object.__setattr__(self, "level_index", idx)
        object.__setattr__(self, "levels", lev)

    @property
    def q(self) -> int:
        return int(self.levels.size)

    @property
    def n_pixels(self) -> int:
        return int(self.level_index.size)

    @property
    def height(self) -> int:
        return int(self.shape[0])

    @property
    def width(self) -> int:
        return int(self.shape[-1]) if len(self.shape) > 1 else 1


@dataclass(frozen=True)
class RearrangedProfile:
    """Piecewise-constant decreasing rearrangement: levels, measures, breakpoints.

    ``measures`` are exact integer pixel counts; ``breakpoints`` are their
    cumulative sums with breakpoints[0] = 0 and breakpoints[-1] = total pixel
    count.  Level j occupies the interval [breakpoints[j], breakpoints[j+1]).
    Levels are nonincreasing (strictly decreasing when built from a
    QuantizedImage); evolved profiles may carry ties.
    """

    levels: np.ndarray
    measures: np.ndarray
    breakpoints: np.ndarray

    def __post_init__(self) -> None:
        lev = np.asarray(self.levels, dtype=float)
        mu = np.asarray(self.measures)
        a = np.asarray(self.breakpoints)
        if lev.ndim != 1 or lev.size < 1:
            raise ValueError("levels must be a nonempty 1-d array")
        if np.any(np.diff(lev) > 0.0):
            raise ValueError("levels must be nonincreasing")
        if mu.shape != lev.shape or np.any(mu <= 0):
            raise ValueError("measures must be positive and match levels")
        if a.shape != (lev.size + 1,) or a[0] != 0 or np.any(a[1:] - a[:-1] != mu):
            raise ValueError("breakpoints must be the cumulative sums of measures")
        object.__setattr__(self, "levels", lev)
        object.__setattr__(self, "measures", mu)
        object.__setattr__(self, "breakpoints", a)

    @property
    def q(self) -> int:
        return int(self.levels.size)

    @property
    def total_measure(self) -> int:
        return int(self.breakpoints[-1])


def quantize(field, max_levels: int | None = None) -> QuantizedImage:
    """Quantize a real-valued field into a strictly decreasing level list.

    Distinct values become the levels.  When ``max_levels`` is smaller than
    the number of distinct values, values are binned into ``max_levels``
    uniform-width bins over [min, max] and each nonempty bin is represented by
    the mean of the pixel values it contains (empty bins are dropped).  With
    no binning the exact values are preserved.
    """
    arr = np.asarray(field, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot quantize an empty field")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")
    if max_levels is not None and max_levels < 1:
        raise ValueError("max_levels must be >= 1")

    ascending, inverse = np.unique(arr.ravel(), return_inverse=True)
    n_distinct = ascending.size

    if max_levels is None or n_distinct <= max_levels:
        q = n_distinct
        level_index = (q - 1) - inverse
        levels = ascending[::-1].copy()
        return QuantizedImage(arr.shape, level_index.reshape(arr.shape), levels)

    lo, hi = ascending[0], ascending[-1]
    width = (hi - lo) / max_levels
    bins = np.minimum(((arr.ravel() - lo) / width).astype(np.int64), max_levels - 1)
    counts = np.bincount(bins, minlength=max_levels)
    sums = np.bincount(bins, weights=arr.ravel(), minlength=max_levels)
    occupied = counts > 0
    reps = sums[occupied] / counts[occupied]  # ascending across occupied bins
    # relabel occupied bins 0..Q-1 in ascending order, then flip to decreasing
    rank_of_bin = np.cumsum(occupied) - 1
    q = int(occupied.sum())
    level_index = (q - 1) - rank_of_bin[bins]
    levels = reps[::-1].copy()
    return QuantizedImage(arr.shape, level_index.reshape(arr.shape), levels)


def decreasing_rearrangement(img: QuantizedImage) -> RearrangedProfile:
    """Build the piecewise-constant decreasing rearrangement of ``img``.

    Measures are exact integer pixel counts, which keeps equi-measurability
    exact: for any f, sum over pixels of f(value) equals
    sum_j f(levels[j]) * measures[j].
    """
    counts = np.bincount(img.level_index.ravel(), minlength=img.q).astype(np.int64)
    breakpoints = np.concatenate(([0], np.cumsum(counts)))
    return RearrangedProfile(img.levels.copy(), counts, breakpoints)


def distribution_function(profile: RearrangedProfile, q: float) -> int:
    """Measure of the super-level set {u > q}: sum of measures of levels above q.

    Right-continuous and nonincreasing in q; returns 0 for q at or above the
    top level and the total measure for q below the bottom level.
    """
    ascending = profile.levels[::-1]
    n_above = profile.q - int(np.searchsorted(ascending, q, side="right"))
    return int(profile.breakpoints[n_above])


def reconstruct(img: QuantizedImage, evolved_levels) -> np.ndarray:
    """Substitute evolved level values back through the index map.

    Pixel x receives evolved_levels[j] where j is its level index, so the
    output's level sets equal the input's.
    """
    evolved = np.asarray(evolved_levels, dtype=float)
    if evolved.shape != (img.q,):
        raise ValueError(
            f"expected {img.q} evolved levels, got shape {evolved.shape}")
    return evolved[img.level_index]
