"""Seeded fractal value noise used for the cloud lighting textures."""
from __future__ import annotations

import numpy as np


def value_noise(height: int, width: int, cell: float, rng: np.random.Generator) -> np.ndarray:
    """Bilinearly interpolated random lattice with ``cell`` pixels per lattice step.

    Values lie in [0, 1].
    """
    cell = max(float(cell), 1.0)
    gh = int(np.ceil((height - 1) / cell)) + 2
    gw = int(np.ceil((width - 1) / cell)) + 2
    lattice = rng.random((gh, gw))
    ys = np.arange(height) / cell
    xs = np.arange(width) / cell
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    v00 = lattice[y0[:, None], x0[None, :]]
    v01 = lattice[y0[:, None], x0[None, :] + 1]
    v10 = lattice[y0[:, None] + 1, x0[None, :]]
    v11 = lattice[y0[:, None] + 1, x0[None, :] + 1]
    top = v00 + fx * (v01 - v00)
    bottom = v10 + fx * (v11 - v10)
    return top + fy * (bottom - top)


def fractal_noise(height: int, width: int, rng: np.random.Generator,
                  octaves: int = 5, base_cell: float | None = None) -> np.ndarray:
    """Sum of ``octaves`` value-noise layers; cell size and amplitude halve per octave.

    The result is not normalised.
    """
    if not 4 <= octaves <= 6:
        raise ValueError("octaves must be between 4 and 6")
    if base_cell is None:
        base_cell = max(height, width) / 4.0
    out = np.zeros((height, width))
    amp = 1.0
    cell = base_cell
    for _ in range(octaves):
        out += amp * value_noise(height, width, cell, rng)
        amp *= 0.5
        cell /= 2.0
    return out
