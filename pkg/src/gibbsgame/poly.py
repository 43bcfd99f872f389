"""Bounded polynomial approximations of exp with grid certification.

Polynomials are stored as Chebyshev coefficients on [-1, 1] and evaluated
with Clenshaw's recurrence.  Certification is empirical: sup errors are
measured on dense Chebyshev-spaced grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft, special

from .errors import ConstructionError, ContractViolation

C_DEG = 6.0          # recorded bound: degree <= C_DEG * beta * ln(1/xi)
DEGREE_FACTOR = 3.0  # initial degree ceil(3 beta ln(6/xi))
MAX_RETRIES = 6
SUP_BOUND = 3.0
GRID_FACTOR = 10     # certification grid has >= 10 * degree points


@dataclass(frozen=True)
class BoundedExpPoly:
    beta: float
    xi: float
    degree: int
    coeffs: np.ndarray
    certified_err_left: float
    certified_sup: float
    attempts: int = 1


@dataclass(frozen=True)
class AcceptPoly:
    """P(u) = P_{B,xi}(u) / 6 used as the poly-mode acceptance amplitude."""

    B_scale: float
    ell: float
    c_shift: float
    delta_tv: float
    xi: float
    base: BoundedExpPoly
    C: float
    n: int

    @property
    def coeffs(self) -> np.ndarray:
        return self.base.coeffs / 6.0

    @property
    def degree(self) -> int:
        return self.base.degree

    @property
    def certified_sup(self) -> float:
        return self.base.certified_sup / 6.0


def _coeffs_of(P) -> np.ndarray:
    if isinstance(P, (BoundedExpPoly, AcceptPoly)):
        return P.coeffs
    return np.asarray(P, dtype=np.float64)


def clenshaw(coeffs: np.ndarray, x) -> np.ndarray:
    """Evaluate sum_k c_k T_k(x) by backward recurrence (no domain check)."""
    x = np.asarray(x, dtype=np.float64)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    x2 = 2.0 * x
    for c in coeffs[:0:-1]:
        b1, b2 = x2 * b1 - b2 + c, b1
    return x * b1 - b2 + coeffs[0]


def eval_poly(P, x):
    """Evaluate a Chebyshev-basis polynomial at x in [-1, 1]."""
    xa = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(xa) > 1.0 + 1e-12):
        raise ContractViolation("eval_poly requires |x| <= 1")
    out = clenshaw(_coeffs_of(P), xa)
    return float(out) if np.ndim(x) == 0 else out


def chebyshev_points(a: float, b: float, npts: int) -> np.ndarray:
    """First-kind Chebyshev nodes mapped to [a, b], plus both endpoints."""
    k = np.arange(npts)
    t = np.cos(np.pi * (k + 0.5) / npts)
    pts = 0.5 * (a + b) + 0.5 * (b - a) * t
    return np.concatenate(([a], pts[::-1], [b]))


def certify(P, target_fn, interval, grid_points: int | None = None) -> float:
    """max |P(x) - target(x)| over a Chebyshev-spaced grid on ``interval``."""
    coeffs = _coeffs_of(P)
    degree = max(len(coeffs) - 1, 1)
    if grid_points is None:
        grid_points = GRID_FACTOR * degree
    if grid_points < GRID_FACTOR * degree:
        raise ContractViolation(f"grid_points must be >= {GRID_FACTOR} * degree")
    a, b = interval
    x = chebyshev_points(a, b, grid_points)
    return float(np.max(np.abs(clenshaw(coeffs, x) - target_fn(x))))


def interpolate_chebyshev(fn, degree: int) -> np.ndarray:
    """Chebyshev coefficients of the degree-``degree`` interpolant at the extrema cos(pi k / degree)."""
    x = np.cos(np.pi * np.arange(degree + 1) / degree)
    c = fft.dct(fn(x), type=1) / degree
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def values_on_first_kind_grid(coeffs: np.ndarray, npts: int):
    """Evaluate at x_k = cos(pi (k + 1/2) / npts) in O(npts log npts) via DCT-III."""
    if npts < len(coeffs):
        raise ContractViolation("grid must have at least degree + 1 points")
    pad = np.zeros(npts)
    pad[:len(coeffs)] = coeffs
    vals = 0.5 * (fft.dct(pad, type=3) + coeffs[0])
    x = np.cos(np.pi * (np.arange(npts) + 0.5) / npts)
    return x, vals


def _exp_target(beta: float, xi: float):
    """Damped truncated Taylor expansion of exp(beta x) around x0 = -1.

    The Taylor sum sum_{l<=L} e^{-beta} beta^l (x+1)^l / l! equals
    e^{beta x} Q(L+1, beta (x+1)) with Q the regularized upper incomplete
    gamma function.  It is multiplied by a smooth step that is ~1 on
    [-1, 0] and decays right of x_c = 1/beta, which keeps |P| bounded on
    [0, 1].  Truncation and damping each cost at most xi/4 on [-1, 0].
    """
    L = int(math.ceil(beta))
    while special.gammainc(L + 1, beta) > xi / 4:
        L += 1
    x_c = 1.0 / beta
    sigma = x_c / special.erfcinv(xi / 2)

    def h(x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore"):
            log_q = np.log(special.gammaincc(L + 1, beta * (x + 1.0)))
        # 0.5 * erfc(z) = ndtr(-sqrt(2) z)
        log_w = special.log_ndtr(-math.sqrt(2.0) * (x - x_c) / sigma)
        return np.exp(beta * x + log_q + log_w)

    return h, L


def _measure(coeffs: np.ndarray, beta: float):
    degree = len(coeffs) - 1
    ends = clenshaw(coeffs, np.array([-1.0, 0.0, 1.0]))
    x, v = values_on_first_kind_grid(coeffs, GRID_FACTOR * (degree + 1))
    sup_all = max(float(np.max(np.abs(v))), float(np.max(np.abs(ends))))
    # a grid twice as fine, restricted to [-1, 0], has >= 10 (degree+1) points there
    x, v = values_on_first_kind_grid(coeffs, 2 * GRID_FACTOR * (degree + 1))
    left = x <= 0.0
    err_left = float(np.max(np.abs(v[left] - np.exp(beta * x[left]))))
    err_left = max(err_left, abs(ends[0] - math.exp(-beta)), abs(ends[1] - 1.0))
    return err_left, sup_all


@lru_cache(maxsize=32)
def _build_cached(beta: float, xi: float, max_retries: int) -> BoundedExpPoly:
    h, _ = _exp_target(beta, xi)
    degree = int(math.ceil(DEGREE_FACTOR * beta * math.log(6.0 / xi)))
    err_left = sup_all = float("nan")
    for attempt in range(1, max_retries + 2):
        coeffs = interpolate_chebyshev(h, degree)
        err_left, sup_all = _measure(coeffs, beta)
        if err_left <= xi and sup_all <= SUP_BOUND:
            coeffs.setflags(write=False)
            return BoundedExpPoly(beta, xi, degree, coeffs, err_left, sup_all, attempt)
        degree *= 2
    raise ConstructionError(
        f"certification failed for beta={beta}, xi={xi}: err_left={err_left:.3g}, sup={sup_all:.3g}",
        err_left=err_left, sup_all=sup_all, degree=degree // 2)


def build_bounded_exp(beta: float, xi: float, max_retries: int = MAX_RETRIES) -> BoundedExpPoly:
    """Polynomial P with |P - exp(beta x)| <= xi on [-1, 0] and |P| <= 3 on [-1, 1]."""
    if not beta >= 1.0:
        raise ContractViolation("beta must be >= 1")
    if not 0.0 < xi <= 0.1:
        raise ContractViolation("xi must lie in (0, 1/10]")
    return _build_cached(float(beta), float(xi), int(max_retries))


def accept_poly_params(beta: float, C: float, n: int, delta: float):
    """(B, ell, c, xi) for the acceptance polynomial."""
    B = 4.0 * (beta + math.log(C * n / delta))
    ell = delta / n
    c = math.log(C * n)
    xi = delta * ell / (6.0 * n * math.exp(c))
    return B, ell, c, xi


def build_accept_poly(beta: float, C: float, n: int, delta: float) -> AcceptPoly:
    if not beta >= 1.0 or not C >= 1.0 or n < 1 or not 0.0 < delta <= 0.5:
        raise ContractViolation("need beta >= 1, C >= 1, n >= 1, delta in (0, 1/2]")
    B, ell, c, xi = accept_poly_params(beta, C, n, delta)
    base = build_bounded_exp(B, min(xi, 0.1))
    ap = AcceptPoly(B, ell, c, delta, xi, base, float(C), int(n))
    if ap.certified_sup > 0.5:
        raise ConstructionError(f"acceptance polynomial sup {ap.certified_sup:.3g} > 1/2",
                                base.certified_err_left, base.certified_sup, base.degree)
    return ap


class PolyTable:
    """Fast approximate evaluation of a high-degree polynomial.

    Values of f(theta) = P(cos theta) are tabulated on a uniform theta grid
    of ``oversample * degree`` intervals (one DCT-I) and read back with
    cubic Lagrange interpolation in theta.  With oversample = 128 the
    interpolation error is about 1e-8 relative to sup |P|.
    """

    def __init__(self, P, oversample: int = 128):
        coeffs = _coeffs_of(P)
        degree = max(len(coeffs) - 1, 1)
        M = max(oversample * degree, 64)
        pad = np.zeros(M + 1)
        pad[:len(coeffs)] = coeffs
        # DCT-I gives c0 + (-1)^k cM + 2 sum c_j cos(pi j k / M); undo the doubling
        vals = 0.5 * (fft.dct(pad, type=1) + pad[0] + pad[-1] * (-1.0) ** np.arange(M + 1))
        # f is even and 2pi-periodic: reflect one sample past each end
        self.table = np.concatenate(([vals[1]], vals, [vals[-2]]))
        self.M = M
        self.h = np.pi / M

    def __call__(self, x) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
        t = np.arccos(x) / self.h
        i = np.minimum(np.floor(t).astype(np.int64), self.M - 1)
        s = t - i
        tb = self.table
        # table index offset by one for the reflected head sample
        f0, f1, f2, f3 = tb[i], tb[i + 1], tb[i + 2], tb[i + 3]
        return (-s * (s - 1) * (s - 2) / 6 * f0 + (s + 1) * (s - 1) * (s - 2) / 2 * f1
                - (s + 1) * s * (s - 2) / 2 * f2 + (s + 1) * s * (s - 1) / 6 * f3)
