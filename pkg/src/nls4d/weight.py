"""Truncated radial weight with a logarithmic decay band.

The radial derivative profile equals 1 up to the inner radius R, decays
like 1 - log(r/R)/J across a band of J e-foldings, and vanishes beyond
R e^J.  The two transition gaps are filled with the unique quintic in
s = log(r/R) matching value, slope and curvature at both ends, so the
profile is C^2 and every derivative used below is analytic.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Tuple

import numpy as np

from .scales import ScaleFunction


class WeightError(ValueError):
    pass


def _phi(s):
    return s ** 3 * (6.0 - 8.0 * s + 3.0 * s ** 2)


def _phi1(s):
    return s ** 2 * (18.0 - 32.0 * s + 15.0 * s ** 2)


def _phi2(s):
    return s * (36.0 - 96.0 * s + 60.0 * s ** 2)


def _phi3(s):
    return 36.0 - 192.0 * s + 180.0 * s ** 2


# exponentially weighted antiderivatives of phi:
# d/ds [Q(s) e^s] = phi(s) e^s and d/ds [-S(s) e^-s] = phi(s) e^-s
def _Q(s):
    return ((((3.0 * s - 23.0) * s + 98.0) * s - 294.0) * s + 588.0) * s - 588.0


def _S(s):
    return ((((3.0 * s + 7.0) * s + 34.0) * s + 102.0) * s + 204.0) * s + 204.0


@dataclass(frozen=True)
class WeightProfile:
    """Radial profile of the weight; R is the inner radius, J >= 2 the
    number of e-foldings in the decay band."""

    R: float
    J: int

    def log_radius(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, np.log(np.maximum(r, 1e-300) / self.R),
                            -np.inf)

    def g_derivs(self, s):
        """(g, g', g'', g''') of the profile in the log variable."""
        s = np.asarray(s, dtype=float)
        J = float(self.J)
        g = np.ones_like(s)
        g1 = np.zeros_like(s)
        g2 = np.zeros_like(s)
        g3 = np.zeros_like(s)

        m = (s > 0) & (s < 1)
        g[m] = 1.0 - _phi(s[m]) / J
        g1[m] = -_phi1(s[m]) / J
        g2[m] = -_phi2(s[m]) / J
        g3[m] = -_phi3(s[m]) / J

        m = (s >= 1) & (s <= J - 1)
        g[m] = 1.0 - s[m] / J
        g1[m] = -1.0 / J

        m = (s > J - 1) & (s < J)
        tau = J - s[m]
        g[m] = _phi(tau) / J
        g1[m] = -_phi1(tau) / J
        g2[m] = _phi2(tau) / J
        g3[m] = -_phi3(tau) / J

        m = s >= J
        g[m] = 0.0
        return g, g1, g2, g3

    def w_r(self, r):
        out = self.g_derivs(self.log_radius(r))[0]
        return float(out) if out.ndim == 0 else out

    def w_r_deriv(self, r, k: int):
        """k-th r-derivative of w_r (k in 1..3) via d/dr = (1/r) d/ds."""
        r = np.asarray(r, dtype=float)
        _, g1, g2, g3 = self.g_derivs(self.log_radius(r))
        if k == 1:
            out = g1 / r
        elif k == 2:
            out = (g2 - g1) / r ** 2
        elif k == 3:
            out = (g3 - 3.0 * g2 + 2.0 * g1) / r ** 3
        else:
            raise WeightError("derivative order must be 1, 2 or 3")
        return float(out) if out.ndim == 0 else out

    def w(self, r):
        """Exact antiderivative of w_r from 0; piecewise closed form."""
        r = np.asarray(r, dtype=float)
        R, J = self.R, float(self.J)
        s = self.log_radius(r)
        e = math.e
        w_Re = R * e - (R / J) * (_Q(1.0) * e + 588.0)
        w_band_end = w_Re + R * ((math.exp(J - 1.0) - e)
                                 - (J - 2.0) * math.exp(J - 1.0) / J)
        w_top = w_band_end + (R / J) * (_S(0.0) * math.exp(J)
                                        - _S(1.0) * math.exp(J - 1.0))

        s = np.atleast_1d(s)
        out = np.array(np.broadcast_to(r, s.shape), dtype=float)  # s <= 0
        m = (s > 0) & (s <= 1)
        sv = s[m]
        out[m] = R * np.exp(sv) - (R / J) * (_Q(sv) * np.exp(sv) + 588.0)
        m = (s > 1) & (s <= J - 1)
        sv = s[m]
        out[m] = w_Re + R * ((np.exp(sv) - e) - (sv - 1.0) * np.exp(sv) / J)
        m = (s > J - 1) & (s <= J)
        sv = s[m]
        out[m] = w_band_end + (R / J) * (_S(J - sv) * np.exp(sv)
                                         - _S(1.0) * math.exp(J - 1.0))
        out[s > J] = w_top
        if np.ndim(r) == 0:
            return float(out[0])
        return out.reshape(np.shape(r))


class WeightAt(NamedTuple):
    a: float
    a_r: float
    a_rr: float
    lap: float
    bilap: float
    dt_a_r: float
    hessian_eigs: Tuple[float, float]
    distributional: bool


class PositivityReport(NamedTuple):
    passed: bool
    failures: List[Tuple[float, str]]
    lambda0: float


class ParameterChoice(NamedTuple):
    R: float
    J: int
    m: int
    lambda_j: Callable[[ScaleFunction, int], Callable]


def build_profile(R: float, J: int) -> WeightProfile:
    if not R > 0:
        raise WeightError("R must be positive")
    if int(J) != J or J < 2:
        raise WeightError("J must be an integer >= 2")
    return WeightProfile(float(R), int(J))


def certify_derivative_bounds(profile: WeightProfile, k: int,
                              samples: int = 10 ** 4) -> float:
    """sup of J r^k |d^k w_r / dr^k| over a log-uniform sample.

    The sup is attained inside the fill-in gaps, so the sample covers
    [R/4, R e^J] densely; values come from the analytic chain rule, not
    finite differences.
    """
    if k not in (1, 2, 3):
        raise WeightError("derivative order must be 1, 2 or 3")
    R, J = profile.R, profile.J
    r = np.geomspace(R / 4.0, R * math.exp(J), samples)
    vals = J * r ** k * np.abs(profile.w_r_deriv(r, k))
    return float(np.max(vals))


def weight_at(profile: WeightProfile, n_val: float, n_prime: float,
              r: float) -> WeightAt:
    """All derived quantities of a(t,x) = w(n|x|)/n at radius r.

    Laplacians are the four-dimensional radial forms; at r = 0 the cone
    region makes them distributional and the flag is set instead of a
    number.
    """
    if n_val <= 0:
        raise WeightError("n must be positive")
    if r < 0:
        raise WeightError("r must be nonnegative")
    if r == 0.0:
        return WeightAt(a=0.0, a_r=1.0, a_rr=0.0, lap=math.nan,
                        bilap=math.nan, dt_a_r=0.0,
                        hessian_eigs=(0.0, math.nan), distributional=True)
    rho = n_val * r
    s = math.log(rho / profile.R)
    g, g1, g2, g3 = (float(v) for v in profile.g_derivs(np.array(s)))
    a = profile.w(rho) / n_val
    a_r = g
    a_rr = g1 / r
    lap = a_rr + 3.0 * a_r / r
    bilap = (g3 + 3.0 * g2 - g1 - 3.0 * g) / r ** 3
    dt_a_r = g1 * n_prime / n_val
    return WeightAt(a=a, a_r=a_r, a_rr=a_rr, lap=lap, bilap=bilap,
                    dt_a_r=dt_a_r, hessian_eigs=(a_rr, a_r / r),
                    distributional=False)


def positivity_certificate(profile: WeightProfile, n_val: float,
                           samples: int = 4001) -> PositivityReport:
    """Sampled sign conditions: a_r >= 0 everywhere, psd Hessian and
    -bilap = 3/r^3 inside the cone radius, |a_rr| <= C_1/(J r) outside."""
    if n_val <= 0:
        raise WeightError("n must be positive")
    lam0 = profile.R / n_val
    top = profile.R * math.exp(profile.J) / n_val
    rs = np.geomspace(lam0 / 100.0, 2.0 * top, samples)
    failures = []
    c1 = 1.6  # just above the certified sup of J r |dw_r/dr|
    for r in rs:
        at = weight_at(profile, n_val, 0.0, float(r))
        if at.a_r < 0:
            failures.append((float(r), "a_r negative"))
        if r <= lam0:
            if min(at.hessian_eigs) < 0:
                failures.append((float(r), "hessian not psd"))
            if abs(-at.bilap - 3.0 / r ** 3) > 1e-12 * (3.0 / r ** 3):
                failures.append((float(r), "bilaplacian off 3/r^3"))
        else:
            if abs(at.a_rr) > c1 / (profile.J * r):
                failures.append((float(r), "a_rr exceeds 1/(J r) band"))
    return PositivityReport(not failures, failures, lam0)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def choose_parameters(K: float, alpha: float) -> ParameterChoice:
    """Inner radius, band length and smoothing depth from the budget K.

    R = K^alpha, J ~ alpha log R, 2^m ~ R^{4(1+alpha)/5}; the rounding
    (half-up, with floors 2 and 1) is our convention since only the
    asymptotic orders are prescribed.
    """
    if K <= 1:
        raise WeightError("K must exceed 1")
    if not 0 < alpha < 0.5:
        raise WeightError("alpha must lie in (0, 1/2)")
    R = K ** alpha
    J = max(2, _round_half_up(alpha * math.log(R)))
    m = max(1, _round_half_up(0.8 * (1.0 + alpha) * math.log2(R)))

    def lambda_j(scale: ScaleFunction, j: int) -> Callable:
        if not 0 <= j <= J:
            raise WeightError(f"j must lie in [0, {J}]")
        factor = R * math.exp(j)

        def lam(t):
            return factor / scale(t)

        return lam

    return ParameterChoice(R, J, m, lambda_j)


def profile_table(profile: WeightProfile, n_val: float,
                  rs: np.ndarray) -> np.ndarray:
    """Columns (r, w, w_r, a_rr, lap, bilap) at the sampled radii, for
    CSV dumps and plots."""
    rows = []
    for r in np.asarray(rs, dtype=float):
        at = weight_at(profile, n_val, 0.0, float(r))
        rows.append((r, at.a * n_val, at.a_r, at.a_rr, at.lap, at.bilap))
    return np.array(rows)
