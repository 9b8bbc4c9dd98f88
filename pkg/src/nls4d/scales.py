"""Positive functions of time: frequency-scale extraction and smoothing.

The pipeline goes trajectory -> n0 (a reciprocal-square high-frequency
norm per sample) -> n1 (dyadic piecewise-linear resampling) -> n_m
(valley-filled).  Each stage only needs the previous one, so everything
here works on plain ScaleFunction values and is trajectory-agnostic past
n0_from_traj.
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import grid as gr
from . import lp


class ScaleError(ValueError):
    pass


@dataclass(frozen=True)
class ScaleFunction:
    """Positive piecewise function given by breakpoints and values.

    kind is "piecewise-linear" (value v_l at t_l, linear between) or
    "piecewise-constant" (value v_l on [t_l, t_{l+1})).  Evaluation is
    clamped to the end values outside the breakpoint range, so the
    function is defined on every t in its domain.
    """

    kind: str
    breakpoints: np.ndarray
    values: np.ndarray
    domain: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or bp.shape != vals.shape or bp.size == 0:
            raise ScaleError("breakpoints and values must be matching 1-d arrays")
        if self.kind not in ("piecewise-constant", "piecewise-linear"):
            raise ScaleError(f"unknown kind {self.kind!r}")
        if bp.size > 1 and np.any(np.diff(bp) <= 0):
            raise ScaleError("breakpoints must be strictly increasing")
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise ScaleError("values must be positive and finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if self.domain is None:
            object.__setattr__(self, "domain", (float(bp[0]), float(bp[-1])))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "piecewise-linear":
            out = np.interp(t, self.breakpoints, self.values)
        else:
            idx = np.searchsorted(self.breakpoints, t, side="right") - 1
            idx = np.clip(idx, 0, len(self.values) - 1)
            out = self.values[idx]
        return float(out) if out.ndim == 0 else out

    def window_extrema(self, lo: float, hi: float) -> Tuple[float, float]:
        """(min, max) of the function over [lo, hi] intersected with the
        breakpoint span; extrema live at window ends or breakpoints."""
        bp, vals = self.breakpoints, self.values
        lo = max(lo, bp[0])
        hi = min(hi, bp[-1])
        inside = vals[(bp >= lo) & (bp <= hi)]
        if self.kind == "piecewise-linear":
            cand = np.concatenate([inside, [self(lo), self(hi)]])
        else:
            i0 = max(np.searchsorted(bp, lo, side="right") - 1, 0)
            i1 = max(np.searchsorted(bp, hi, side="right") - 1, 0)
            cand = vals[i0:i1 + 1]
        return float(np.min(cand)), float(np.max(cand))

    def to_csv(self, path):
        header = self.kind
        data = np.column_stack([self.breakpoints, self.values])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header)


def scale_from_csv(path) -> ScaleFunction:
    with open(path) as fh:
        first = fh.readline().strip()
    kind = first.lstrip("# ").strip()
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return ScaleFunction(kind, data[:, 0], data[:, 1])


class Morphology(NamedTuple):
    """Index intervals (inclusive) into the breakpoints."""
    peaks: List[Tuple[int, int]]
    valleys: List[Tuple[int, int]]
    slopes: List[Tuple[int, int]]


class ConstancyReport(NamedTuple):
    worst_ratio: float
    ratios: np.ndarray


class ScalePack(NamedTuple):
    N: float
    x: np.ndarray
    C: float
    c: float


def _dyadic(k: int) -> float:
    return math.ldexp(1.0, k)


def extract_scales(f: gr.ComplexField, eta: float) -> ScalePack:
    """Frequency scale, spatial center and inner/outer dyadic radii.

    N is the smallest dyadic with frequency tail below (eta/2) of the
    total three-halves energy; C the smallest dyadic with both the
    space tail at radius C/N and the frequency tail at radius C N under
    eta; c the largest dyadic with the low band below sqrt(eta) in norm.
    """
    if not 0 < eta < 1:
        raise ScaleError("eta must lie in (0, 1)")
    g = f.grid
    spec = gr.spectrum(f)
    xi = g.xi_mesh()
    xi_norm = np.sqrt(sum(a ** 2 for a in xi))
    weight = xi_norm ** 3 * np.abs(spec.coefficients) ** 2 * g.xi_cell ** g.d
    total = float(np.sum(weight))
    if total == 0.0:
        raise ScaleError("field has no fractional-gradient mass")

    deriv = gr.fractional_derivative(f, 1.5)
    dens = np.abs(deriv.values) ** 2
    dens_total = float(np.sum(dens) * g.cell_volume)

    # circular centroid per axis, so wrap-around cannot bias the center
    center = np.empty(g.d)
    mesh = g.x_mesh()
    for ax in range(g.d):
        theta = (mesh[ax] + g.L) * math.pi / g.L
        sin_m = float(np.sum(dens * np.sin(theta)))
        cos_m = float(np.sum(dens * np.cos(theta)))
        mean = math.atan2(sin_m, cos_m) % (2 * math.pi)
        center[ax] = mean * g.L / math.pi - g.L

    def freq_tail(radius: float) -> float:
        return float(np.sum(weight[xi_norm > radius]))

    xi_max = float(np.max(xi_norm))
    k_lo = int(math.floor(math.log2(g.xi_cell))) - 2
    k_hi = int(math.ceil(math.log2(xi_max))) + 1
    N = None
    for k in range(k_lo, k_hi + 1):
        if freq_tail(_dyadic(k)) <= 0.5 * eta * total:
            N = _dyadic(k)
            break
    if N is None:
        raise ScaleError("no dyadic frequency scale found")

    # min-image distance from the centroid
    r2 = np.zeros(g.shape)
    for ax in range(g.d):
        off = np.abs(mesh[ax] - center[ax])
        off = np.minimum(off, 2 * g.L - off)
        r2 = r2 + off ** 2
    dist = np.sqrt(r2)

    def space_tail(radius: float) -> float:
        return float(np.sum(dens[dist > radius]) * g.cell_volume)

    C = None
    for j in range(-10, 60):
        cj = _dyadic(j)
        if (space_tail(cj / N) < eta * dens_total
                and freq_tail(cj * N) < eta * total):
            C = cj
            break
    if C is None:
        raise ScaleError("no dyadic tail radius found")

    c = None
    for j in range(20, -60, -1):
        cut = _dyadic(j) * N
        low = gr.apply_multiplier(
            f, lambda *xi: lp.bump(np.sqrt(sum(a ** 2 for a in xi)) / cut))
        low_mass = gr.lebesgue_norm(gr.fractional_derivative(low, 1.5), 2) ** 2
        if low_mass <= eta * dens_total:
            c = _dyadic(j)
            break
    if c is None:
        raise ScaleError("no dyadic low-frequency scale found")
    return ScalePack(N, center, C, c)


def local_constancy_check(scale: ScaleFunction, delta: float) -> ConstancyReport:
    """Worst max/min ratio of the scale over windows of half-width
    delta * v^{-2} around each breakpoint.  Diagnostic only."""
    if delta <= 0:
        raise ScaleError("delta must be positive")
    ratios = np.empty(len(scale.breakpoints))
    for i, (t0, v0) in enumerate(zip(scale.breakpoints, scale.values)):
        w = delta * v0 ** -2
        lo, hi = scale.window_extrema(t0 - w, t0 + w)
        ratios[i] = hi / lo
    return ConstancyReport(float(np.max(ratios)), ratios)


def n0_from_traj(traj, K: float) -> ScaleFunction:
    """Reciprocal-square L4 norm of the high-frequency part per sample.

    High means above K^{-1/5}; a vanishing high part anywhere makes the
    reciprocal meaningless and raises.
    """
    if K <= 0:
        raise ScaleError("K must be positive")
    cutoff = K ** -0.2
    vals = []
    for f in traj.fields:
        hi = lp.highpass(f, cutoff)
        norm = gr.lebesgue_norm(hi, 4)
        if norm == 0.0:
            raise ScaleError(
                f"high-frequency part vanishes at t={f.t:g}")
        vals.append(norm ** -2)
    return ScaleFunction("piecewise-linear", np.asarray(traj.times), vals)


def _interval_extrema(scale: ScaleFunction, lo: float, hi: float):
    return scale.window_extrema(lo, hi)


def build_n1(n0: ScaleFunction, delta: Optional[float] = None) -> ScaleFunction:
    """Dyadic piecewise-linear resampling of n0.

    Breakpoints follow t_{l+1} = t_l + delta n0(t_l)^{-2}; the value at
    t_l is the largest power of two at or below the infimum of n0 over
    the interval that starts there.  delta=None searches down from 1 for
    the largest power of two such that n0 varies by at most a factor of
    two on every interval.
    """
    if delta is None:
        d = 1.0
        for _ in range(60):
            try:
                return build_n1(n0, d)
            except ScaleError:
                d /= 2
        raise ScaleError("no dyadic delta passed the variation check")
    if delta <= 0:
        raise ScaleError("delta must be positive")
    t_lo, t_hi = n0.domain
    breakpoints = []
    ks = []
    t = t_lo
    guard = 0
    while t < t_hi:
        guard += 1
        if guard > 10 ** 7:
            raise ScaleError("delta produced too many intervals")
        step = delta * float(n0(t)) ** -2
        nxt = t + step
        lo, hi = _interval_extrema(n0, t, min(nxt, t_hi))
        if hi > 2.0 * lo:
            raise ScaleError(
                f"n0 varies by {hi / lo:.3g} > 2 on [{t:g}, {nxt:g}]; "
                "use a smaller delta")
        breakpoints.append(t)
        ks.append(math.floor(math.log2(lo)))
        t = nxt
    if not breakpoints:
        raise ScaleError("empty domain")
    breakpoints.append(min(t, t_hi))
    ks.append(ks[-1])
    vals = [_dyadic(k) for k in ks]
    return ScaleFunction("piecewise-linear", np.array(breakpoints),
                         np.array(vals), domain=n0.domain)


def _require_n1_type(values: np.ndarray):
    for v in values:
        mant, _ = math.frexp(v)
        if mant != 0.5:
            raise ScaleError(f"value {v!r} is not a power of two")
    ratios = values[1:] / values[:-1]
    bad = ~np.isin(ratios, (0.5, 1.0, 2.0))
    if np.any(bad):
        raise ScaleError("adjacent values must have ratio 1/2, 1 or 2")


def _runs(values: np.ndarray):
    """(value, first index, last index) for maximal equal runs."""
    out = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] != values[start]:
            out.append((values[start], start, i - 1))
            start = i
    return out


def classify(scale: ScaleFunction) -> Morphology:
    """Peaks, valleys and slopes of an n1-type scale.

    A valley is a maximal run of equal values whose first differing
    neighbor on each side is larger (the two-sided low-point condition);
    peaks are the mirror image.  Runs touching the boundary satisfy
    neither condition and are absorbed into the adjoining slope.
    """
    vals = scale.values
    _require_n1_type(vals)
    runs = _runs(vals)
    extrema = []  # (start, end, which)
    for r, (v, a, b) in enumerate(runs):
        if r == 0 or r == len(runs) - 1:
            continue
        left, right = runs[r - 1][0], runs[r + 1][0]
        if left > v and right > v:
            extrema.append((a, b, "valley"))
        elif left < v and right < v:
            extrema.append((a, b, "peak"))
    for (first, second) in zip(extrema, extrema[1:]):
        if first[2] == second[2]:
            raise ScaleError("peaks and valleys failed to alternate")
    valleys = [(a, b) for a, b, w in extrema if w == "valley"]
    peaks = [(a, b) for a, b, w in extrema if w == "peak"]
    last = len(vals) - 1
    slopes = []
    prev_end = 0
    for a, b, _ in extrema:
        slopes.append((prev_end, a))
        prev_end = b
    if prev_end < last or not extrema:
        slopes.append((prev_end, last))
    return Morphology(peaks, valleys, slopes)


def smooth(scale: ScaleFunction, m: int) -> ScaleFunction:
    """m-1 valley-filling passes.

    Each pass raises every valley to its flanking value (exactly a
    doubling, by the n1-type ratio property) and leaves everything else
    alone; once no valleys remain the function is a fixed point.
    """
    if m < 1:
        raise ScaleError("m must be a positive integer")
    vals = scale.values.copy()
    for _ in range(m - 1):
        morph = classify(ScaleFunction(scale.kind, scale.breakpoints, vals,
                                       domain=scale.domain))
        if not morph.valleys:
            break
        for a, b in morph.valleys:
            vals[a:b + 1] = vals[a - 1]
    return ScaleFunction(scale.kind, scale.breakpoints.copy(), vals,
                         domain=scale.domain)


def slope_integral(scale: ScaleFunction) -> float:
    """Integral of |n'| / n^6, segment-exact.

    Along a linear segment from p to v the substitution n -> value turns
    the integrand into dn/n^6, so each non-flat segment contributes
    |v^-5 - p^-5| / 5 independent of its length.
    """
    if scale.kind != "piecewise-linear":
        raise ScaleError("slope integral needs a piecewise-linear scale")
    v = scale.values
    return float(np.sum(np.abs(v[1:] ** -5 - v[:-1] ** -5)) / 5.0)
