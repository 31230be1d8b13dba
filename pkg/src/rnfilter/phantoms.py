"""Synthetic two-disk cell phantoms with exact ground-truth masks.

A bright uniform background contains a darker cell disk which in turn
contains a dark nucleus disk; optional additive gaussian noise.  These stand
in for external microscopy datasets when scoring the segmentation pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CellPhantom:
    image: np.ndarray
    background_mask: np.ndarray
    nucleus_mask: np.ndarray
    cytoplasm_mask: np.ndarray


def make_cell_phantom(size: int = 128, background: float = 220.0,
                      cell: float = 120.0, nucleus: float = 40.0,
                      noise_sigma: float = 0.0, seed: int = 0,
                      cell_radius_frac: float = 0.32,
                      nucleus_radius_frac: float = 0.13) -> CellPhantom:
    """Build a size x size phantom; noise is clipped to [0, 255]."""
    if size < 8:
        raise ValueError("size must be at least 8")
    yy, xx = np.mgrid[0:size, 0:size]
    cy = cx = (size - 1) / 2.0
    r2 = (yy - cy) ** 2 + (xx - cx) ** 2
    cell_disk = r2 <= (cell_radius_frac * size) ** 2
    # nucleus sits off-center inside the cell, as in real cells
    ny, nx = cy - 0.08 * size, cx + 0.06 * size
    nucleus_disk = (yy - ny) ** 2 + (xx - nx) ** 2 <= (nucleus_radius_frac * size) ** 2

    image = np.full((size, size), background, dtype=float)
    image[cell_disk] = cell
    image[nucleus_disk] = nucleus
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        image = np.clip(image + rng.normal(0.0, noise_sigma, image.shape), 0.0, 255.0)

    return CellPhantom(image=image,
                       background_mask=~cell_disk & ~nucleus_disk,
                       nucleus_mask=nucleus_disk,
                       cytoplasm_mask=cell_disk & ~nucleus_disk)
