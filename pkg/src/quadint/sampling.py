"""Seeded random fields and quasi-random point sets used by the
falsification suites, the solver probes, and the sampled sup estimates."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm as _normal, qmc

from .model import VectorField
from .spectral import Grid, ScalarField


def band_limited_batch(grid: Grid, count: int, rng: np.random.Generator,
                       band: int | None = None, slope: float = 2.0) -> np.ndarray:
    """`count` real fields with spectrum restricted to |k_i| <= band and a
    (1 + |xi|^2)^(-slope/2) falloff.  Returns shape (count, n, ..., n)."""
    if band is None:
        band = grid.n // 4
    noise = rng.standard_normal((count,) + grid.shape)
    spec = np.fft.fftn(noise, axes=tuple(range(1, grid.d + 1)))
    mask = np.ones(grid.shape, dtype=bool)
    for ax_k in np.meshgrid(*([grid.freq_index] * grid.d), indexing="ij", sparse=True):
        mask = mask & (np.abs(ax_k) <= band)
    weight = mask * (1.0 + grid.xi_squared) ** (-slope / 2.0)
    out = np.fft.ifftn(spec * weight, axes=tuple(range(1, grid.d + 1))).real
    return out


def random_field(grid: Grid, rng: np.random.Generator,
                 band: int | None = None, slope: float = 2.0) -> ScalarField:
    return ScalarField(grid, band_limited_batch(grid, 1, rng, band, slope)[0])


def random_vector_in_ball(grid: Grid, n: int, rho: float,
                          rng: np.random.Generator) -> VectorField:
    """A random band-limited vector field scaled to a uniform radius in the
    Sobolev ball of radius rho."""
    comps = [random_field(grid, rng) for _ in range(n)]
    vf = VectorField(tuple(comps))
    norm = vf.h2_norm()
    if norm == 0.0:
        return VectorField.zero(grid, n)
    return vf * (rho * rng.uniform(0.0, 1.0) / norm)


def ball_points(n: int, radius: float, count: int, seed: int = 0,
                boundary: bool = False) -> np.ndarray:
    """Quasi-random (Halton) points in the closed ball of R^n, shape
    (count, n).  With boundary=True the points lie on the sphere."""
    sampler = qmc.Halton(d=n + 1, scramble=True, seed=seed)
    u = sampler.random(count)
    # first n coordinates give a direction via the inverse normal map
    z = _normal.ppf(np.clip(u[:, :n], 1e-12, 1 - 1e-12))
    lengths = np.linalg.norm(z, axis=1, keepdims=True)
    lengths[lengths == 0.0] = 1.0
    directions = z / lengths
    if boundary:
        r = np.full((count, 1), radius)
    else:
        r = radius * u[:, n:].copy() ** (1.0 / n)
    return directions * r
