"""Reproducible initial-data library.

Every generator is deterministic in its arguments (and seed, where one
applies), so runs can be reproduced from a manifest alone.
"""

from __future__ import annotations

import numpy as np

from . import grid as gr
from . import lp


def snap_drift(grid: gr.GridSpec, drift):
    """Round a drift vector to the frequency lattice so e^{i v.x} is
    periodic on the box."""
    v = np.asarray(drift, dtype=float)
    if v.shape != (grid.d,):
        raise gr.GridError(f"drift must have {grid.d} components")
    return np.rint(v / grid.xi_cell) * grid.xi_cell


def gaussian(grid: gr.GridSpec, amplitude: float = 1.0, width: float = 1.0,
             center=None, drift=None) -> gr.ComplexField:
    """A e^{-|x-c|^2 / (2 width^2)} e^{i v.x} with v snapped to the
    frequency lattice."""
    if center is None:
        center = np.zeros(grid.d)
    r2 = gr.periodic_distance_sq(grid, np.asarray(center, dtype=float))
    values = amplitude * np.exp(-r2 / (2.0 * width ** 2)).astype(complex)
    if drift is not None:
        v = snap_drift(grid, drift)
        phase = np.zeros(grid.shape)
        for k, ax in enumerate(grid.x_mesh()):
            phase = phase + v[k] * ax
        values = values * np.exp(1j * phase)
    return gr.field(grid, values)


def compact_bump(grid: gr.GridSpec, radius: float, amplitude: float = 1.0,
                 center=None) -> gr.ComplexField:
    """Smooth bump exp(1 - 1/(1 - (r/radius)^2)) inside r < radius and
    identically zero outside; amplitude is the peak value."""
    if center is None:
        center = np.zeros(grid.d)
    r2 = gr.periodic_distance_sq(grid, np.asarray(center, dtype=float))
    s = r2 / radius ** 2
    values = np.zeros(grid.shape)
    inside = s < 1.0
    values[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return gr.field(grid, values.astype(complex))


def band_random(grid: gr.GridSpec, N: float, seed: int,
                amplitude: float = 1.0) -> gr.ComplexField:
    """Random-phase data concentrated on the dyadic shell at N,
    normalized to the requested L^2 size."""
    rng = np.random.default_rng(seed)
    coeff = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    xi2 = gr.xi_squared(grid)
    coeff *= lp.band_multiplier(lp.shell(N), np.sqrt(xi2))
    f = gr.field(grid, gr._ifftn(coeff))
    norm = gr.lebesgue_norm(f, 2)
    if norm == 0.0:
        raise gr.GridError(f"band at N={N} is empty on this grid")
    return gr.field(grid, f.values * (amplitude / norm))


def two_bump(grid: gr.GridSpec, separation: float, width: float = 1.0,
             speed: float = 0.0, amplitude: float = 1.0) -> gr.ComplexField:
    """Two Gaussians at +-separation/2 along the first axis with opposite
    drifts +-speed (a collision when speed > 0)."""
    offset = np.zeros(grid.d)
    offset[0] = separation / 2.0
    v = np.zeros(grid.d)
    v[0] = speed
    left = gaussian(grid, amplitude, width, center=-offset, drift=v)
    right = gaussian(grid, amplitude, width, center=offset, drift=-v)
    return gr.field(grid, left.values + right.values)
