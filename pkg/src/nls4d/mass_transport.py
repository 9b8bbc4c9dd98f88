"""Windowed ball-mass functionals and the Gaussian-sandwich kernel decay.

ball_mass_sup computes, per sample, the largest mass of u inside any ball
of a (possibly time-dependent) radius, by convolving |u|^2 with a ball
indicator and taking the grid maximum.  The sandwich functions measure the
L^1 -> L^inf norm of  exp(it Lap) . Gaussian multiply . exp(is Lap)  by
applying it to lattice deltas, which the paper-scale analysis bounds by
(s+t)^{-d/2} once the Gaussian is wide compared to the times involved.
"""

import math
from typing import Callable, NamedTuple, Sequence, Tuple, Union

import numpy as np

from . import grid as gr
from . import lp
from .evolve import WRAP_GUARD_TOL


class MassTransportError(RuntimeError):
    pass


ScaleLike = Union[float, Callable[[float], float]]


def _as_scale(lam: ScaleLike) -> Callable[[float], float]:
    if callable(lam):
        return lam
    value = float(lam)
    return lambda t: value


def ball_indicator(grid: gr.GridSpec, radius: float) -> np.ndarray:
    """Indicator of the min-image ball |z| <= radius as kernel values."""
    return (gr.displacement_radius(grid) <= radius).astype(float)


def ball_mass_sup(traj, lam: ScaleLike) -> Tuple[np.ndarray, float]:
    """(per-sample sup_x of mass in the radius-lam(t) ball, its t-integral)."""
    scale = _as_scale(lam)
    grid = traj.grid
    series = np.empty(len(traj.fields))
    for k, f in enumerate(traj.fields):
        radius = float(scale(f.t))
        if not (0.0 < radius < grid.L / 2.0):
            raise MassTransportError(
                f"ball radius {radius} at t={f.t} must lie in (0, L/2) "
                "to avoid wrap-around")
        density = np.abs(f.values) ** 2
        windowed = gr.convolve_periodic(grid, density,
                                        ball_indicator(grid, radius))
        series[k] = float(np.max(windowed))
    integral = float(np.trapezoid(series, x=np.asarray(traj.times)))
    return series, integral


def _source_indices(grid: gr.GridSpec, sources, seed: int, spread: float):
    """Origin plus random nearby points, or every grid point.

    The kernel modulus decays like exp(-|x + y0 t/s|^2 / (4 lam^2)), so
    sources must stay within a few cells of the center or the response
    loses its boundary margin.
    """
    if sources == "all":
        if grid.npoints > 4096:
            raise MassTransportError(
                "all-sources mode is for oracle grids (n^d <= 4096)")
        return list(np.ndindex(grid.shape))
    count = int(sources)
    if count < 1:
        raise MassTransportError("need at least one source point")
    origin = (grid.n // 2,) * grid.d
    cells = max(1, int(spread / grid.h))
    rng = np.random.default_rng(seed)
    picks = [tuple(rng.integers(grid.n // 2 - cells, grid.n // 2 + cells + 1,
                                grid.d))
             for _ in range(count - 1)]
    return [origin] + picks


def _free_gaussian_axis(x, center, s, sigma):
    """exp(is Lap) of the 1-d unit-mass Gaussian of width sigma, evaluated
    in closed form: the complex variance sigma^2 + 4is keeps the state
    band-limited, which a lattice delta is not."""
    var = sigma ** 2 + 4j * s
    pref = (math.sqrt(math.pi) * sigma) ** -1 / np.sqrt(1.0 + 4j * s / sigma ** 2)
    return pref * np.exp(-((x - center) ** 2) / var)


def sandwich_norm(grid: gr.GridSpec, lam: float, t: float, s: float,
                  sources=9, seed: int = 0, source_width: float = 0.0,
                  wrap_tol: float = WRAP_GUARD_TOL) -> float:
    """Sup over sampled sources of |e^{it Lap} G e^{is Lap} source|.

    G multiplies by exp(-|x|^2 / lam^2).  With source_width = 0 the source
    is a lattice delta (result divided by h^d); this is faithful to the
    continuum kernel only while the free chirp stays below the lattice
    Nyquist frequency, roughly h < 1.5 min(t,s)/lam.  A positive
    source_width uses a unit-mass Gaussian instead, whose s-propagation is
    sampled in closed form, so every lattice step is exact for band-limited
    data at any t, s.  Raises when the response leaks onto the boundary
    shell (wrap-around); sources='all' computes the full kernel matrix sup
    on oracle-sized grids, where wraparound affects both index orders
    identically, and therefore skips that guard.
    """
    if not (lam > 0 and t > 0 and s > 0):
        raise MassTransportError("lam, t, s must all be positive")
    if source_width < 0:
        raise MassTransportError("source_width must be >= 0")
    mesh = grid.x_mesh()
    r2 = np.zeros(grid.shape)
    for ax in mesh:
        r2 = r2 + ax ** 2
    gauss = np.exp(-r2 / lam ** 2)
    shell = gr.boundary_shell_mask(grid)
    guard = sources != "all"
    axis = grid.x_axis()
    worst = 0.0
    for idx in _source_indices(grid, sources, seed, spread=lam / 2.0):
        if source_width == 0.0:
            delta = np.zeros(grid.shape, dtype=np.complex128)
            delta[idx] = 1.0
            u = gr.free_propagate(gr.field(grid, delta), s)
            scale = 1.0 / grid.cell_volume
        else:
            vals = np.ones((1,) * grid.d, dtype=np.complex128)
            for k, ax in enumerate(mesh):
                vals = vals * _free_gaussian_axis(ax, axis[idx[k]], s,
                                                  source_width)
            u = gr.field(grid, vals, s)
            scale = 1.0
        u = gr.field(grid, gauss * u.values, u.t)
        u = gr.free_propagate(u, t)
        mag = np.abs(u.values)
        sup = float(np.max(mag))
        if guard and sup > 0 and float(np.max(mag[shell])) > wrap_tol * sup:
            raise MassTransportError(
                f"kernel response reached the boundary at (t,s)=({t},{s})")
        worst = max(worst, sup * scale)
    return worst


def gaussian_sandwich_exponent(grid: gr.GridSpec, lam: float,
                               pairs: Sequence[Tuple[float, float]],
                               sources=9, seed: int = 0,
                               source_width: float = 0.0,
                               wrap_tol: float = WRAP_GUARD_TOL) -> float:
    """Fitted slope of log kernel norm against log(s+t) over the pairs."""
    if len(pairs) < 3:
        raise MassTransportError("need at least three (t, s) pairs")
    sums = np.array([t + s for t, s in pairs], dtype=float)
    if np.max(sums) / np.min(sums) < 2.0:
        raise MassTransportError("pairs should span a factor of two in s+t")
    values = np.array([sandwich_norm(grid, lam, t, s, sources, seed,
                                     source_width, wrap_tol)
                       for t, s in pairs])
    return float(np.polyfit(np.log(sums), np.log(values), 1)[0])


def sandwich_norm_exact_1d(lam: float, t: float, s: float,
                           source_width: float = 0.0) -> float:
    """Closed-form sup of the 1-d sandwich kernel (oracle for tests).

    For a delta source the z-integral is a single complex Gaussian with
    a = 1/lam^2 - i(1/(4t) + 1/(4s)) and sup sqrt(pi/|a|)/sqrt(16 pi^2 ts).
    For a centered unit-mass Gaussian source of width sigma the chain of
    complex Gaussian transforms gives the prefactor product below; it
    reduces to the delta formula as sigma -> 0.
    """
    if source_width == 0.0:
        mod_a = math.hypot(1.0 / lam ** 2, (s + t) / (4.0 * t * s))
        return math.sqrt(math.pi / mod_a) / math.sqrt(
            16.0 * math.pi ** 2 * t * s)
    sigma = source_width
    alpha = 1.0 / lam ** 2 + 1.0 / (sigma ** 2 + 4j * s)
    pref = (math.sqrt(math.pi) * sigma) ** -1
    return float(pref * abs(1.0 + 4j * s / sigma ** 2) ** -0.5
                 * abs(1.0 + 4j * t * alpha) ** -0.5)


def sandwich_norm_exact(d: int, lam: float, t: float, s: float,
                        source_width: float = 0.0) -> float:
    """Tensor power of the 1-d closed form."""
    return sandwich_norm_exact_1d(lam, t, s, source_width) ** d


class CorMassReport(NamedTuple):
    lhs: float
    rhs: float
    integrals: list
    threshold: float


def cor_mass_report(traj, n_scale: Callable[[float], float], R: float,
                    J: int, K: float = None) -> CorMassReport:
    """Both sides of the windowed high-frequency mass bound.

    lhs = sup over j <= J of the ball_mass_sup integral of the
    high-frequency part at radius lambda_j(t) = R e^j / n(t); rhs = J*K.
    The comparison constant is solution-dependent, so this only reports.
    """
    if J < 1 or R <= 0:
        raise MassTransportError("need J >= 1 and R > 0")
    times = np.asarray(traj.times)
    if K is None:
        vals = np.array([float(n_scale(t)) for t in times])
        if np.any(vals <= 0):
            raise MassTransportError("scale must be positive on I")
        K = float(np.trapezoid(vals ** (-3.0), x=times))
    threshold = K ** (-0.2)
    hi_fields = [lp.highpass(f, threshold) for f in traj.fields]
    hi = type(traj)(traj.config, traj.times, hi_fields, traj.mass,
                    traj.energy, list(traj.warnings))
    integrals = []
    for j in range(J + 1):
        lam_j = lambda t, _j=j: R * math.exp(_j) / float(n_scale(t))
        integrals.append(ball_mass_sup(hi, lam_j)[1])
    return CorMassReport(max(integrals), J * K, integrals, threshold)
