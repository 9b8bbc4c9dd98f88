"""Space-time norm functionals on sampled trajectories.

Mixed Lebesgue norms use the trapezoid rule on the sample grid in time and
h^d-weighted sums in space; exponent infinity means a maximum in either
slot.  Dyadic sums run over the shell window that tiles the grid's nonzero
frequencies (see lp.grid_dyadic_window), so the zero mode never contributes
to a square sum.
"""

import dataclasses
import math
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import grid as gr
from . import lp


class NormError(ValueError):
    pass


_INF = float("inf")


@dataclasses.dataclass(frozen=True)
class MixedNormSpec:
    """Exponent pair (q, r) for L^q in time, L^r in space."""

    q: float
    r: float

    def __post_init__(self):
        for name, value in (("q", self.q), ("r", self.r)):
            if not (value >= 1.0):
                raise NormError(f"{name} must be >= 1, got {value}")

    @property
    def admissible(self) -> bool:
        """Whether 2/q + 4/r = 2 with q, r >= 2 (the d=4 scaling line)."""
        if self.q < 2.0 or self.r < 2.0:
            return False
        lhs = 2.0 / self.q + 4.0 / self.r
        return abs(lhs - 2.0) < 1e-12


def _require_samples(traj, k=2):
    if len(traj.times) < k:
        raise NormError(f"need at least {k} samples, got {len(traj.times)}")


def norm_series(traj, r: float) -> np.ndarray:
    """Spatial L^r norm at each sample time."""
    return np.array([gr.lebesgue_norm(f, r) for f in traj.fields])


def _time_compose(times, series, q: float) -> float:
    if q == _INF:
        return float(np.max(series))
    powered = np.asarray(series, dtype=float) ** q
    return float(np.trapezoid(powered, x=np.asarray(times)) ** (1.0 / q))


def mixed_norm(traj, spec: MixedNormSpec) -> float:
    _require_samples(traj)
    return _time_compose(traj.times, norm_series(traj, spec.r), spec.q)


def scattering_size(traj) -> float:
    """Unnormalized |u|^12 space-time integral."""
    return mixed_norm(traj, MixedNormSpec(12.0, 12.0)) ** 12


def _window_bands(grid) -> list:
    return [lp.shell(N) for N in lp.grid_dyadic_window(grid)]


def _band_series(traj, bands: Sequence, r: float, s: float = 0.0) -> np.ndarray:
    """Matrix of ||Lam^s P_N u(t)||_r over (band, sample).

    One forward transform per sample; each band reuses it.
    """
    grid = traj.grid
    xi_norm = np.sqrt(gr.xi_squared(grid))
    mults = [lp.band_multiplier(band, xi_norm) for band in bands]
    if s != 0.0:
        with np.errstate(divide="ignore"):
            lam = np.where(xi_norm > 0.0, xi_norm ** s, 0.0)
        mults = [m * lam for m in mults]
    out = np.empty((len(bands), len(traj.fields)))
    for j, f in enumerate(traj.fields):
        coeff = gr.spectrum(f).coefficients
        for i, m in enumerate(mults):
            piece = gr.field_from_spectrum(gr.Spectrum(grid, f.t, m * coeff))
            out[i, j] = gr.lebesgue_norm(piece, r)
    return out


def besov_strichartz_sum(traj, s: float, spec: MixedNormSpec) -> float:
    """Square-function sum (sum_N ||Lam^s u_N||_{q,r}^2)^{1/2} over the window."""
    _require_samples(traj)
    series = _band_series(traj, _window_bands(traj.grid), spec.r, s)
    terms = [_time_compose(traj.times, row, spec.q) for row in series]
    return math.sqrt(sum(t * t for t in terms))


def endpoint_ratio(traj) -> float:
    """L_t^4 L_x^inf norm over its interpolation-type upper bound.

    The bound is ||Lam^{3/2}u||_{L_t^inf L_x^2}^{1/2} times the (2,4)
    square sum of Lam^{3/2}u_N raised to the 1/4.
    """
    _require_samples(traj)
    lhs = mixed_norm(traj, MixedNormSpec(4.0, _INF))
    sup_l2 = max(
        gr.lebesgue_norm(gr.fractional_derivative(f, 1.5), 2)
        for f in traj.fields)
    square = besov_strichartz_sum(traj, 1.5, MixedNormSpec(2.0, 4.0))
    rhs = math.sqrt(sup_l2) * square ** 0.25
    if rhs == 0.0:
        raise NormError("bound side is zero")
    return lhs / rhs


def maximal_band_series(traj, N: float, q: float) -> np.ndarray:
    """Per-sample sup over bands M > N of M^{4/q-2} ||u_M(t)||_q."""
    if not q > 4.0:
        raise NormError("maximal exponent requires q > 4")
    scales = [M for M in lp.grid_dyadic_window(traj.grid) if M > N]
    if not scales:
        raise NormError(f"no dyadic bands above N={N} on this grid")
    series = _band_series(traj, [lp.shell(M) for M in scales], q)
    weights = np.array([M ** (4.0 / q - 2.0) for M in scales])
    return np.max(weights[:, None] * series, axis=0)


class LTSQuantities(NamedTuple):
    A: float
    B: float
    K: float


def lts_quantities(traj, N: float, q: float,
                   scale: Callable[[float], float]) -> LTSQuantities:
    """Long-time Strichartz triple (A(N), B_q(N), K).

    A(N) collects the (2,4) square sum of Lam^{3/2}u_M over M <= N,
    B_q(N) is N^{5/2} times the L_t^2 norm of the maximal band series
    above N, and K integrates scale(t)^{-3} by trapezoid over the
    sample times.
    """
    _require_samples(traj)
    low_scales = [M for M in lp.grid_dyadic_window(traj.grid) if M <= N]
    if not low_scales:
        raise NormError(f"no dyadic bands at or below N={N} on this grid")
    series = _band_series(traj, [lp.shell(M) for M in low_scales], 4.0, 1.5)
    a_sq = sum(_time_compose(traj.times, row, 2.0) ** 2 for row in series)

    sup_series = maximal_band_series(traj, N, q)
    b = N ** 2.5 * _time_compose(traj.times, sup_series, 2.0)

    times = np.asarray(traj.times)
    values = np.array([float(scale(t)) for t in times])
    if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        raise NormError("scale function must be positive and finite on I")
    k = float(np.trapezoid(values ** (-3.0), x=times))
    return LTSQuantities(math.sqrt(a_sq), b, k)


def maximal_functional(traj, q: float) -> float:
    """L_t^2 norm of sup_N N^{4/q-2} ||P_N u(t)||_q over the whole window."""
    if not q > 4.0:
        raise NormError("maximal exponent requires q > 4")
    _require_samples(traj)
    scales = list(lp.grid_dyadic_window(traj.grid))
    series = _band_series(traj, [lp.shell(M) for M in scales], q)
    weights = np.array([M ** (4.0 / q - 2.0) for M in scales])
    sup_series = np.max(weights[:, None] * series, axis=0)
    return _time_compose(traj.times, sup_series, 2.0)


class SBReport(NamedTuple):
    scale_integral: float
    besov_square: float


def sb_comparison(traj, scale: Callable[[float], float]) -> SBReport:
    """Two-sided report: integral of scale(t)^2 next to the (2,4) square sum.

    Emitted as numbers only; the comparison constant depends on the
    solution, so nothing is asserted here.
    """
    _require_samples(traj)
    times = np.asarray(traj.times)
    values = np.array([float(scale(t)) for t in times])
    lhs = float(np.trapezoid(values ** 2, x=times))
    rhs = besov_strichartz_sum(traj, 1.5, MixedNormSpec(2.0, 4.0)) ** 2
    return SBReport(lhs, rhs)


def _seeded_gaussian(grid, seed: int):
    """Grid-independent random Gaussian: parameters depend on seed only."""
    rng = np.random.default_rng(seed)
    width = 0.6 + 0.6 * rng.random()
    amplitude = 0.5 + rng.random()
    center = tuple((rng.random(grid.d) - 0.5) * grid.L * 0.5)
    drift = tuple(rng.integers(-2, 3, grid.d) * grid.xi_cell)
    from . import data
    return data.gaussian(grid, amplitude=amplitude, width=width,
                         center=center, drift=drift)


def strichartz_ratio_ensemble(seeds: int, spec: MixedNormSpec, grid,
                              t_end: float = 1.0, n_times: int = 9) -> float:
    """Max over seeds of ||e^{it Lap}f||_{q,r} / ||f||_2 on [0, t_end].

    Streams one field at a time, so no trajectory is stored.
    """
    if not spec.admissible:
        raise NormError(f"exponent pair ({spec.q}, {spec.r}) is not admissible")
    if seeds < 1:
        raise NormError("need at least one seed")
    times = np.linspace(0.0, t_end, n_times)
    worst = 0.0
    for seed in range(seeds):
        f = _seeded_gaussian(grid, seed)
        denom = gr.lebesgue_norm(f, 2)
        series = [gr.lebesgue_norm(gr.free_propagate(f, t), spec.r)
                  for t in times]
        ratio = _time_compose(times, series, spec.q) / denom
        worst = max(worst, ratio)
    return worst
