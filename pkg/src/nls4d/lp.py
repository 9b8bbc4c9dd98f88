"""Smooth dyadic frequency localization.

The cutoff profile phi is 1 on [0, 1], 0 on [11/10, inf), and glued on
(1, 11/10) by the standard smooth step built from E(x) = exp(-1/x), so
every projector below is a radial Fourier multiplier with C^infinity
symbol.  Band edges run over the dyadic lattice 2^k restricted to
[2^-20, 2^20].

Band kinds and their multipliers (N dyadic):
    low   (<= N):       phi(|xi|/N)
    shell (= N):        phi(|xi|/N) - phi(2|xi|/N)
    high  (> N):        1 - phi(|xi|/N)
    range ((N1, N2]):   phi(|xi|/N2) - phi(|xi|/N1)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as gr

DYADIC_MIN = 2.0 ** -20
DYADIC_MAX = 2.0 ** 20

TRANSITION_LO = 1.0
TRANSITION_HI = 1.1


class BandError(ValueError):
    """Invalid band parameters."""


def smooth_step(x) -> np.ndarray:
    """The C^infinity step g(x) = E(x) / (E(x) + E(1-x)), E(x) = e^{-1/x},
    equal to 0 for x <= 0 and 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[x >= 1.0] = 1.0
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    e1 = np.exp(-1.0 / xm)
    e2 = np.exp(-1.0 / (1.0 - xm))
    out[mid] = e1 / (e1 + e2)
    return out


def bump(r) -> np.ndarray:
    """Radial cutoff profile: 1 for r <= 1, 0 for r >= 11/10, smooth and
    non-increasing in between."""
    r = np.asarray(r, dtype=float)
    width = TRANSITION_HI - TRANSITION_LO
    return smooth_step((TRANSITION_HI - r) / width)


def is_dyadic(N: float) -> bool:
    """True when N = 2^k for integer k within the supported window."""
    if not np.isfinite(N) or N <= 0:
        return False
    if not DYADIC_MIN <= N <= DYADIC_MAX:
        return False
    k = np.log2(N)
    return float(k) == np.rint(k)


def _check_dyadic(N: float) -> float:
    if not is_dyadic(N):
        raise BandError(
            f"band edge must be a power of two in [2^-20, 2^20], got {N!r}"
        )
    return float(N)


def dyadic_range(lo: float = DYADIC_MIN, hi: float = DYADIC_MAX):
    """Dyadic values 2^k with lo <= 2^k <= hi, ascending."""
    k_lo = int(np.ceil(np.log2(lo) - 1e-9))
    k_hi = int(np.floor(np.log2(hi) + 1e-9))
    return [2.0 ** k for k in range(k_lo, k_hi + 1)]


def grid_dyadic_window(grid: gr.GridSpec):
    """Dyadic band edges resolvable on a grid: from one step below the
    smallest nonzero |xi| to one step above the lattice diameter.  Bands
    outside this window annihilate every grid function."""
    xi_min = grid.xi_cell
    xi_max = grid.xi_cell * (grid.n / 2.0) * np.sqrt(grid.d)
    lo = 2.0 ** np.floor(np.log2(xi_min) - 1)
    hi = 2.0 ** np.ceil(np.log2(xi_max) + 1)
    return dyadic_range(max(lo, DYADIC_MIN), min(hi, DYADIC_MAX))


@dataclass(frozen=True)
class Band:
    """A dyadic frequency band.

    kind is one of 'low', 'shell', 'high', 'range'.  'range' carries two
    edges (N1, N2] with N1 < N2; the others carry a single edge N.
    """

    kind: str
    N: float = 0.0
    N2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("low", "shell", "high", "range"):
            raise BandError(f"unknown band kind {self.kind!r}")
        _check_dyadic(self.N)
        if self.kind == "range":
            _check_dyadic(self.N2)
            if not self.N < self.N2:
                raise BandError(
                    f"range band needs N1 < N2, got ({self.N}, {self.N2})"
                )


def low(N) -> Band:
    return Band("low", N)


def shell(N) -> Band:
    return Band("shell", N)


def high(N) -> Band:
    return Band("high", N)


def band_range(N1, N2) -> Band:
    return Band("range", N1, N2)


def band_multiplier(band: Band, xi_norm: np.ndarray) -> np.ndarray:
    """Multiplier values of a band on given |xi|."""
    if band.kind == "low":
        return bump(xi_norm / band.N)
    if band.kind == "shell":
        return bump(xi_norm / band.N) - bump(2.0 * xi_norm / band.N)
    if band.kind == "high":
        return 1.0 - bump(xi_norm / band.N)
    # range: telescoped sum of shells over N in (N1, N2]
    return bump(xi_norm / band.N2) - bump(xi_norm / band.N)


def lp_project(f: gr.ComplexField, band: Band) -> gr.ComplexField:
    """Apply the band's smooth projector to a field."""
    return gr.apply_multiplier(
        f, lambda *xi: band_multiplier(band, np.sqrt(sum(a ** 2 for a in xi)))
    )


def highpass(f: gr.ComplexField, threshold: float) -> gr.ComplexField:
    """P_{> threshold} for an arbitrary positive threshold (the high/low
    frequency split used by the scale diagnostics does not land on the
    dyadic lattice in general)."""
    if not np.isfinite(threshold) or threshold <= 0:
        raise BandError(f"threshold must be positive, got {threshold!r}")
    return gr.apply_multiplier(
        f,
        lambda *xi: 1.0 - bump(np.sqrt(sum(a ** 2 for a in xi)) / threshold),
    )


def bernstein_ratio(f: gr.ComplexField, band: Band, s: float, pair) -> float:
    """Ratio (left side)/(right side) of the Bernstein estimate matching
    the band kind and exponent pair (r, q), r <= q.

    For a low or shell band with r == q (s >= 0):
        || |nabla|^s P f ||_r  vs  N^s || P f ||_r
    For a high band:
        || P f ||_r  vs  N^{-s} || |nabla|^s P f ||_r
    For a low or shell band with r < q (s ignored):
        || P f ||_q  vs  N^{d/r - d/q} || P f ||_r

    Raises BandError when the denominator vanishes (empty band).
    """
    r, q = pair
    if not (1 <= r <= q):
        raise BandError(f"need 1 <= r <= q, got ({r}, {q})")
    g = f.grid
    pf = lp_project(f, band)
    if band.kind == "high":
        if s <= 0:
            raise BandError("high-band estimate needs s > 0")
        num = gr.lebesgue_norm(pf, r)
        den = band.N ** (-s) * gr.lebesgue_norm(gr.fractional_derivative(pf, s), r)
    elif r == q:
        if s < 0:
            raise BandError("low-band derivative estimate needs s >= 0")
        num = gr.lebesgue_norm(gr.fractional_derivative(pf, s), r)
        den = band.N ** s * gr.lebesgue_norm(pf, r)
    else:
        edge = band.N2 if band.kind == "range" else band.N
        num = gr.lebesgue_norm(pf, q)
        den = edge ** (g.d / r - g.d / q) * gr.lebesgue_norm(pf, r)
    if den == 0.0:
        raise BandError("band content is empty; ratio undefined")
    return num / den
