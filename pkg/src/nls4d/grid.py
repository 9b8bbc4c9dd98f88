"""Periodic grids and Fourier-multiplier machinery.

Fields live on the box [-L, L)^d sampled on a uniform n^d lattice
(row-major axis order).  The frequency lattice is (pi/L) * {-n/2, ...,
n/2 - 1} per axis, kept internally in FFT ordering.  All L^p norms carry
the volume element h^d, h = 2L/n, so that discrete and continuum
quantities are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

# Memory guard: refuse lattices beyond 2**26 points (a single complex
# field at that size is already 1 GiB).
MAX_POINTS = 2 ** 26


class GridError(ValueError):
    """Invalid grid parameters or mismatched grids."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic lattice on [-L, L)^d.

    Attributes:
        d: space dimension, 1 through 4.
        n: points per axis (power of two).
        L: half box length; the box is [-L, L) in every axis.
    """

    d: int
    n: int
    L: float

    @property
    def h(self) -> float:
        """Lattice spacing 2L/n."""
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def npoints(self) -> int:
        return self.n ** self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def xi_cell(self) -> float:
        """Frequency lattice spacing pi/L."""
        return np.pi / self.L

    def x_axis(self) -> np.ndarray:
        """Physical coordinates along one axis, -L + j*h."""
        return -self.L + self.h * np.arange(self.n)

    def xi_axis(self) -> np.ndarray:
        """Frequency coordinates along one axis in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def x_mesh(self):
        """Tuple of d sparse coordinate arrays (broadcast to shape)."""
        ax = self.x_axis()
        return np.meshgrid(*([ax] * self.d), indexing="ij", sparse=True)

    def xi_mesh(self):
        """Tuple of d sparse frequency arrays in FFT ordering."""
        ax = self.xi_axis()
        return np.meshgrid(*([ax] * self.d), indexing="ij", sparse=True)


def make_grid(d: int, n: int, L: float) -> GridSpec:
    """Validated GridSpec constructor.

    Args:
        d: dimension in 1..4.
        n: points per axis; power of two in [4, 256].
        L: half box length, positive.

    Raises:
        GridError: on any out-of-range parameter or if n**d exceeds the
            2**26 point memory guard.
    """
    if not isinstance(d, (int, np.integer)) or not 1 <= d <= 4:
        raise GridError(f"dimension must be an integer in 1..4, got {d!r}")
    if not isinstance(n, (int, np.integer)) or n < 4 or n > 256:
        raise GridError(f"n must be an integer in [4, 256], got {n!r}")
    if n & (n - 1) != 0:
        raise GridError(f"n must be a power of two, got {n}")
    if not np.isfinite(L) or L <= 0:
        raise GridError(f"L must be positive and finite, got {L!r}")
    if n ** d > MAX_POINTS:
        raise GridError(f"n**d = {n ** d} exceeds memory guard {MAX_POINTS}")
    return GridSpec(int(d), int(n), float(L))


@dataclass(frozen=True)
class ComplexField:
    """Complex-valued grid function at a single time.

    values is a read-only complex array of shape grid.shape (row-major,
    so .ravel() is the length-n^d layout used by the snapshot format).
    """

    grid: GridSpec
    t: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise GridError(
                f"field shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if not v.flags.owndata:
            v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Spectrum:
    """Fourier coefficients of a field, FFT-ordered, with the continuum
    normalization  u_hat(xi) = (2 pi)^{-d/2} h^d sum_x e^{-i x.xi} u(x),
    so that sum_xi |u_hat|^2 (pi/L)^d equals the squared L^2 norm.
    """

    grid: GridSpec
    t: float
    coefficients: np.ndarray


def field(grid: GridSpec, values: np.ndarray, t: float = 0.0) -> ComplexField:
    """Wrap an array as a ComplexField at time t."""
    return ComplexField(grid, float(t), values)


def zero_field(grid: GridSpec, t: float = 0.0) -> ComplexField:
    return field(grid, np.zeros(grid.shape, dtype=np.complex128), t)


def _fftn(a: np.ndarray) -> np.ndarray:
    return _fft.fftn(a, workers=-1)


def _ifftn(a: np.ndarray) -> np.ndarray:
    return _fft.ifftn(a, workers=-1)


@lru_cache(maxsize=8)
def _alternating_sign(n: int, d: int):
    """Sparse mesh of (-1)^(k_1 + ... + k_d) over FFT-ordered integers."""
    k = np.rint(np.fft.fftfreq(n) * n).astype(np.int64)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    return np.meshgrid(*([sign] * d), indexing="ij", sparse=True)


def spectrum(f: ComplexField) -> Spectrum:
    """Forward transform with the continuum normalization and the phase
    convention of the x grid starting at -L."""
    g = f.grid
    coeff = _fftn(f.values)
    for s in _alternating_sign(g.n, g.d):
        coeff *= s
    coeff *= (2.0 * np.pi) ** (-g.d / 2.0) * g.cell_volume
    return Spectrum(g, f.t, coeff)


def field_from_spectrum(s: Spectrum) -> ComplexField:
    """Inverse of spectrum()."""
    g = s.grid
    coeff = s.coefficients.astype(np.complex128, copy=True)
    for sg in _alternating_sign(g.n, g.d):
        coeff *= sg
    coeff /= (2.0 * np.pi) ** (-g.d / 2.0) * g.cell_volume
    return ComplexField(g, s.t, _ifftn(coeff))


def xi_squared(grid: GridSpec) -> np.ndarray:
    """|xi|^2 on the FFT-ordered lattice (dense array)."""
    return _xi_squared_cached(grid)


@lru_cache(maxsize=4)
def _xi_squared_cached(grid: GridSpec) -> np.ndarray:
    out = np.zeros(grid.shape)
    for ax in grid.xi_mesh():
        out = out + ax ** 2
    out.setflags(write=False)
    return out


def apply_multiplier(f: ComplexField, symbol) -> ComplexField:
    """Apply a Fourier multiplier.

    Args:
        f: input field.
        symbol: callable taking the d sparse FFT-ordered frequency
            component arrays and returning the multiplier values
            (broadcastable to grid.shape).

    Raises:
        GridError: if the symbol produces non-finite values.
    """
    g = f.grid
    m = np.asarray(symbol(*g.xi_mesh()))
    if not np.all(np.isfinite(m)):
        raise GridError("multiplier symbol produced non-finite values")
    out = _ifftn(np.broadcast_to(m, g.shape) * _fftn(f.values))
    return ComplexField(g, f.t, out)


def fractional_derivative(f: ComplexField, s: float) -> ComplexField:
    """|nabla|^s via the multiplier |xi|^s.

    The zero mode is sent to zero for every s != 0; for s < 0 this is
    the only finite choice and it is recorded in run manifests.  s below
    -2 is rejected (no consumer needs it and the zero-mode convention
    dominates the answer there).
    """
    if not -2.0 <= s < np.inf:
        raise GridError(f"fractional order must satisfy -2 <= s, got {s}")
    if s == 0.0:
        return ComplexField(f.grid, f.t, f.values.copy())
    xi2 = xi_squared(f.grid)
    with np.errstate(divide="ignore"):
        m = np.where(xi2 > 0.0, xi2 ** (s / 2.0), 0.0)
    out = _ifftn(m * _fftn(f.values))
    return ComplexField(f.grid, f.t, out)


def gradient(f: ComplexField):
    """Tuple of the d spectral partial derivatives of f."""
    g = f.grid
    coeff = _fftn(f.values)
    mesh = g.xi_mesh()
    return tuple(
        ComplexField(g, f.t, _ifftn(1j * np.broadcast_to(mesh[k], g.shape) * coeff))
        for k in range(g.d)
    )


def free_propagate(f: ComplexField, t: float) -> ComplexField:
    """Exact free Schrodinger step e^{i t Laplacian}: multiplier
    e^{-i t |xi|^2}.  The output timestamp is f.t + t."""
    if t == 0.0:
        return ComplexField(f.grid, f.t, f.values.copy())
    m = np.exp(-1j * t * xi_squared(f.grid))
    out = _ifftn(m * _fftn(f.values))
    return ComplexField(f.grid, f.t + t, out)


def lebesgue_norm(f, p: float, grid: GridSpec = None) -> float:
    """L^p norm with the h^d volume element; p = inf gives the grid max.

    Accepts a ComplexField or a raw array (grid required for arrays).
    """
    if isinstance(f, ComplexField):
        values, grid = f.values, f.grid
    else:
        if grid is None:
            raise GridError("grid required when passing a raw array")
        values = f
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max())
    if p <= 0:
        raise GridError(f"norm exponent must be positive, got {p}")
    return float((np.sum(a ** p) * grid.cell_volume) ** (1.0 / p))


def displacement_axes(grid: GridSpec):
    """Sparse mesh of displacement coordinates z = x - y in FFT layout:
    index k along an axis encodes the signed offset h * k with wraparound,
    so convolution kernels are sampled directly in this layout."""
    z = np.fft.fftfreq(grid.n, d=1.0 / (grid.n * grid.h))
    return np.meshgrid(*([z] * grid.d), indexing="ij", sparse=True)


def displacement_radius(grid: GridSpec, half_cell: bool = False) -> np.ndarray:
    """|z| over the displacement lattice.

    With half_cell=True the origin cell is assigned radius h/2 instead of
    0, the convention used to sample kernels with a point singularity.
    """
    r2 = np.zeros(grid.shape)
    for ax in displacement_axes(grid):
        r2 = r2 + ax ** 2
    r = np.sqrt(r2)
    if half_cell:
        r.flat[0] = grid.h / 2.0
    return r


def convolve_periodic(grid: GridSpec, rho: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Periodic convolution (kernel * rho)(x) = h^d sum_y kernel(x-y) rho(y).

    The kernel must be sampled on the displacement lattice (see
    displacement_axes).  Real inputs give a real output.
    """
    if rho.shape != grid.shape or kernel.shape != grid.shape:
        raise GridError("rho and kernel must have the grid's shape")
    real_in = not (np.iscomplexobj(rho) or np.iscomplexobj(kernel))
    out = _ifftn(_fftn(np.asarray(rho, dtype=np.complex128))
                 * _fftn(np.asarray(kernel, dtype=np.complex128)))
    out *= grid.cell_volume
    return out.real if real_in else out


def periodic_distance_sq(grid: GridSpec, center) -> np.ndarray:
    """Squared min-image distance from each grid point to center."""
    out = np.zeros(grid.shape)
    span = 2.0 * grid.L
    for k, ax in enumerate(grid.x_mesh()):
        dx = np.remainder(ax - center[k] + grid.L, span) - grid.L
        out = out + dx ** 2
    return out


def boundary_shell_mask(grid: GridSpec) -> np.ndarray:
    """Points in the outermost lattice layer of any axis (used by the
    wrap-around guards)."""
    idx = np.arange(grid.n)
    edge = (idx == 0) | (idx == grid.n - 1)
    mask = np.zeros(grid.shape, dtype=bool)
    for k in range(grid.d):
        shape = [1] * grid.d
        shape[k] = grid.n
        mask |= edge.reshape(shape)
    return mask
