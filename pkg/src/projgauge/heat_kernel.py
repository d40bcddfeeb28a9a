"""Heat kernels on U(1), SU(2), SU(3): representation series, Poisson (theta) forms,
small-beta asymptotics and integration against the class measures.

All kernels are densities with respect to the normalized Haar measure, so that
their class-measure integral is 1.  Dual forms:

* U1:  sum_n exp(2 pi i n theta - (2 pi n)^2 beta)
       = (4 pi beta)^-1/2 sum_n exp(-(theta + n)^2 / (4 beta))
* SU2: sum_j j exp(-(j^2 - 1) beta / 8) sin(j pi x) / sin(pi x)   (j = 2 lam + 1)
       = 2 (2 pi)^3/2 e^{beta/8} beta^-3/2 sum_n (x + 2n) exp(-2 pi^2 (x + 2n)^2 / beta) / sin(pi x)
* SU3: sum_{p,q} d_{pq} exp(-c_{pq} beta) chi_{pq}
       = sqrt(3) pi e^beta beta^-4 / s(t1, t2) * sum_{l,m} P(a, b) exp(-(a^2 + b^2 + a b) / beta)
       with a = t1 + 2 pi l, b = t2 + 2 pi m, P(a, b) = (a - b)(a + 2b)(2a + b) and
       s = 8 sin((t1 - t2)/2) sin((2 t1 + t2)/2) sin((t1 + 2 t2)/2).
"""
from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping

import mpmath
import numpy as np
from scipy.integrate import cumulative_trapezoid

from .group_core import (
    ClassCoordinates,
    GroupKind,
    GroupKindMismatch,
    RepLabel,
    character,
    dimension,
    laplacian_eigenvalue,
    su3_characters_from_h,
    su3_complete_homogeneous,
    su3_coordinates,
)

BETA_CROSS = 0.5
# log kernels use the image sums up to here; beyond it the series has no cancellation problem
LOG_THETA_MAX_BETA = 4.0
WALL_TOL = 1e-8
CALIBRATION_BETA = 0.5
# interior grids for dual-form comparisons (away from the zeros of sin(pi x) and s)
SU2_GRID_X = np.round(np.arange(0.1, 0.95, 0.1), 12)
SU2_GRID_BETA = (0.05, 0.1, 0.2, 0.5, 1.0)
SU3_GRID_T1 = np.linspace(0.5, 2.1, 5)
SU3_GRID_T2 = np.linspace(-1.9, -0.3, 5)
SU3_GRID_BETA = (0.3, 0.6)


class SeriesTruncationError(RuntimeError):
    """The representation series would need more terms than allowed."""


@dataclass(frozen=True)
class KernelParams:
    beta: float
    series_tol: float = 1e-14
    max_terms: int = 20000

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if not self.series_tol > 0:
            raise ValueError("series_tol must be positive")


def as_params(p: "KernelParams | float") -> KernelParams:
    return p if isinstance(p, KernelParams) else KernelParams(float(p))


# ---------------------------------------------------------------------------
# U(1)


def _u1_series_terms(p: KernelParams) -> int:
    n_max = math.ceil(math.sqrt(math.log(1.0 / p.series_tol) / p.beta) / (2 * math.pi)) + 1
    if n_max > p.max_terms:
        raise SeriesTruncationError(f"U1 series needs {n_max} terms at beta={p.beta}")
    return n_max


def _theta_images(beta: float, tol: float, scale: float) -> int:
    """Image count so that exp(-(distance)^2 / scale) < tol for all omitted terms."""
    return math.ceil(math.sqrt(scale * beta * (math.log(1.0 / tol) + 10.0))) + 2


def k1_series(theta, p: KernelParams | float) -> np.ndarray:
    p = as_params(p)
    theta = np.asarray(theta, dtype=float)
    total = np.ones_like(theta)
    for n in range(1, _u1_series_terms(p) + 1):
        total = total + 2.0 * np.cos(2 * np.pi * n * theta) * math.exp(-((2 * math.pi * n) ** 2) * p.beta)
    return total


def k1_theta(theta, p: KernelParams | float) -> np.ndarray:
    p = as_params(p)
    theta = np.asarray(theta, dtype=float)
    n_max = _theta_images(p.beta, p.series_tol, 4.0)
    n = np.arange(-n_max, n_max + 1)
    u = theta[..., None] + n
    return np.sum(np.exp(-(u**2) / (4 * p.beta)), axis=-1) / math.sqrt(4 * math.pi * p.beta)


def log_k1(theta, p: KernelParams | float) -> np.ndarray:
    p = as_params(p)
    theta = np.asarray(theta, dtype=float)
    if p.beta >= BETA_CROSS:
        return np.log(k1_series(theta, p))
    # fold so the n = 0 image dominates; every other image is then a factor <= 1
    n_max = _theta_images(p.beta, p.series_tol, 4.0)
    u0 = fold_u1(theta)
    rest = np.ones_like(u0)
    for n in range(1, n_max + 1):
        rest += np.exp(-(n * n + 2 * n * u0) / (4 * p.beta)) + np.exp(-(n * n - 2 * n * u0) / (4 * p.beta))
    return -(u0**2) / (4 * p.beta) + np.log(rest) - 0.5 * math.log(4 * math.pi * p.beta)


def fold_u1(theta) -> np.ndarray:
    """Map theta in [0, 1) to the representative in [-1/2, 1/2)."""
    return np.mod(np.asarray(theta, dtype=float) + 0.5, 1.0) - 0.5


# ---------------------------------------------------------------------------
# SU(2)


def _su2_series_terms(p: KernelParams, log_tol: float | None = None) -> int:
    # |j e^{-(j^2-1) beta/8} U_{j-1}| <= j^2 e^{-(j^2-1) beta/8}; stop past the peak once below tol
    if log_tol is None:
        log_tol = math.log(p.series_tol)
    j = 1
    while True:
        log_bound = 2 * math.log(j) - (j * j - 1) * p.beta / 8.0
        if j * j * p.beta > 16 and log_bound < log_tol - math.log(100.0):
            return j
        j += 1
        if j > p.max_terms:
            raise SeriesTruncationError(f"SU2 series needs more than {p.max_terms} terms at beta={p.beta}")


def k2_series(x, p: KernelParams | float) -> np.ndarray:
    p = as_params(p)
    x = np.asarray(x, dtype=float)
    c = np.cos(np.pi * x)
    u_prev = np.zeros_like(x)
    u_curr = np.ones_like(x)
    total = np.ones_like(x)
    for j in range(2, _su2_series_terms(p) + 1):
        u_prev, u_curr = u_curr, 2 * c * u_curr - u_prev
        total = total + j * math.exp(-(j * j - 1) * p.beta / 8.0) * u_curr
    return total


def k2_series_precise(x, p: KernelParams | float, dps: int | None = None) -> np.ndarray:
    """Representation series summed in extended precision.

    The double-precision sum loses everything below ~1e-16 of its largest
    term, while the kernel falls like exp(-2 pi^2 x^2 / beta); the default
    working precision covers that many digits plus 30.
    """
    p = as_params(p)
    x = np.asarray(x, dtype=float)
    if dps is None:
        dps = 30 + math.ceil(2 * math.pi**2 * float(np.max(x, initial=0.0)) ** 2 / (p.beta * math.log(10)))
    # keep terms down to 10^-(dps - 10) of unity
    j_max = _su2_series_terms(p, log_tol=(10 - dps) * math.log(10.0))
    out = np.empty(x.shape)
    with mpmath.workdps(dps):
        beta = mpmath.mpf(p.beta)
        for idx, xv in np.ndenumerate(x):
            xm = mpmath.mpf(xv)
            sin1 = mpmath.sin(mpmath.pi * xm)
            total = mpmath.mpf(0)
            for j in range(1, j_max + 1):
                if xv == 0.0 or xv == 1.0:
                    # U_{j-1}(+-1) = j (+-1)^(j-1); the sine ratio is 0/0 there
                    ratio = j if xv == 0.0 else j * (-1) ** (j - 1)
                else:
                    ratio = mpmath.sin(j * mpmath.pi * xm) / sin1
                total += j * mpmath.exp(-(j * j - 1) * beta / 8) * ratio
            out[idx] = float(total)
    return out


def _k2_log_prefactor(beta: float) -> float:
    return math.log(2.0) + 1.5 * math.log(2 * math.pi) + beta / 8.0 - 1.5 * math.log(beta)


def _one_minus_exp_over(z: np.ndarray) -> np.ndarray:
    """(1 - e^{-2z}) / z with the z -> 0 limit 2."""
    safe = np.where(z > 0, z, 1.0)
    return np.where(z > 0, -np.expm1(-2 * safe) / safe, 2.0)


def _x_over_sin(y: np.ndarray) -> np.ndarray:
    """y / sin(pi y) for y in [0, 1/2]."""
    return 1.0 / (np.pi * np.sinc(y))


def _k2_theta_log(x: np.ndarray, p: KernelParams) -> np.ndarray:
    """log of the Poisson form, with image pairs combined around the nearest wall.

    For x <= 1/2 images n and -n are paired, for x > 1/2 the odd images
    1 - x +- m; both leave a bracket that is O(1) and a factor y / sin(pi y)
    that is regular at the walls.
    """
    x = np.asarray(x, dtype=float)
    beta = p.beta
    a = 2 * math.pi**2 / beta
    n_max = math.ceil(math.sqrt((math.log(1.0 / p.series_tol) + 10.0) / (4 * a))) + 2
    low = x <= 0.5
    y = np.where(low, x, 1.0 - x)
    out = np.empty_like(x)

    yl = y[low]
    bracket = np.ones_like(yl)
    for n in range(1, n_max + 1):
        z = 4 * a * yl * n
        bracket += np.exp(-4 * a * n * (n - yl)) * (1 + np.exp(-2 * z) - 8 * a * n * n * _one_minus_exp_over(z))
    out[low] = np.log(_x_over_sin(yl)) - a * yl**2 + np.log(bracket)

    # the m = 1 exponent a (1 - 2y) is factored out so the bracket cannot underflow
    yh = y[~low]
    lead = a * (1 - 2 * yh)
    bracket = np.zeros_like(yh)
    for m in range(1, 2 * n_max + 2, 2):
        z = 2 * a * m * yh
        bracket += np.exp(lead - a * m * (m - 2 * yh)) * (2 * a * m * m * _one_minus_exp_over(z) - 1 - np.exp(-2 * z))
    out[~low] = np.log(_x_over_sin(yh)) - a * yh**2 - lead + np.log(bracket)
    return out + _k2_log_prefactor(beta)


def k2_theta(x, p: KernelParams | float) -> np.ndarray:
    """Poisson form of the SU2 kernel; the endpoints are the analytic limits."""
    p = as_params(p)
    return np.exp(_k2_theta_log(np.asarray(x, dtype=float), p))


def log_k2(x, p: KernelParams | float) -> np.ndarray:
    p = as_params(p)
    if p.beta >= LOG_THETA_MAX_BETA:
        return np.log(k2_series(x, p))
    return _k2_theta_log(np.asarray(x, dtype=float), p)


# ---------------------------------------------------------------------------
# SU(3)


def su3_weyl_s(t1, t2) -> np.ndarray:
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    return 8 * np.sin((t1 - t2) / 2) * np.sin((2 * t1 + t2) / 2) * np.sin((t1 + 2 * t2) / 2)


def su3_quadratic(a, b) -> np.ndarray:
    return a * a + b * b + a * b


def su3_cubic(a, b) -> np.ndarray:
    return (a - b) * (a + 2 * b) * (2 * a + b)


def _k3_log_prefactor(beta: float) -> float:
    return 0.5 * math.log(3.0) + math.log(math.pi) + beta - 4 * math.log(beta)


def _su3_images(p: KernelParams) -> int:
    return math.ceil(math.sqrt(2 * p.beta * (math.log(1.0 / p.series_tol) + 10.0)) / (2 * math.pi)) + 2


def _k3_theta_parts(t1: np.ndarray, t2: np.ndarray, p: KernelParams, exponent_beta: float):
    """(Q0, ratio) with sum = e^{-Q0/beta'} * ratio * s, ratio finite off the walls."""
    L = _su3_images(p)
    l = np.arange(-L, L + 1) * 2 * np.pi
    a = t1[..., None, None] + l[:, None]
    b = t2[..., None, None] + l[None, :]
    q = su3_quadratic(a, b)
    q0 = np.min(q, axis=(-2, -1))
    total = np.sum(su3_cubic(a, b) * np.exp(-(q - q0[..., None, None]) / exponent_beta), axis=(-2, -1))
    return q0, total


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def _su3_series_cutoff(p: KernelParams) -> int:
    """Largest p + q kept; the shell bound (R-1) R^6/64 e^{-(R^2/4 - 1) beta} dominates d^2 e^{-c beta}."""
    r = 2
    count = 0
    while True:
        bound = (r - 1) * r**6 / 64.0 * math.exp(-(r * r / 4.0 - 1.0) * p.beta)
        if r * r * p.beta > 14 and bound < p.series_tol * 1e-2:
            return r
        r += 1
        count += r - 1
        if count > p.max_terms:
            raise SeriesTruncationError(
                f"SU3 series needs more than {p.max_terms} terms at beta={p.beta}; use the theta form")


def su3_series_labels(p: KernelParams) -> list[tuple[int, int]]:
    r_max = _su3_series_cutoff(p)
    return [(pp, r - pp) for r in range(2, r_max + 1) for pp in range(1, r)]


def k3_series(t1, t2, p: KernelParams | float, chunk: int = 50000) -> np.ndarray:
    p = as_params(p)
    t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
    shape = t1.shape
    t1 = t1.ravel()
    t2 = t2.ravel()
    labels = su3_series_labels(p)
    pp = np.array([lab[0] for lab in labels])
    qq = np.array([lab[1] for lab in labels])
    weights = pp * qq * (pp + qq) / 2.0 * np.exp(-((pp**2 + qq**2 + pp * qq) / 3.0 - 1.0) * p.beta)
    r_max = int(np.max(pp + qq))
    out = np.empty(t1.shape)
    for sl in _chunks(t1.size, chunk):
        trace = np.exp(1j * t1[sl]) + np.exp(1j * t2[sl]) + np.exp(-1j * (t1[sl] + t2[sl]))
        h = su3_complete_homogeneous(trace, r_max)
        chars = su3_characters_from_h(h, pp, qq)
        out[sl] = np.real(chars @ weights)
    return out.reshape(shape)


def k3_theta_raw(t1, t2, p: KernelParams | float) -> np.ndarray:
    """Theta form without calibration; nan on the walls."""
    p = as_params(p)
    t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
    q0, total = _k3_theta_parts(t1, t2, p, p.beta)
    s = su3_weyl_s(t1, t2)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.exp(_k3_log_prefactor(p.beta) - q0 / p.beta) * total / s
    return np.where(np.abs(s) < WALL_TOL, np.nan, val)


def k3_literal_exponent(t1, t2, p: KernelParams | float) -> np.ndarray:
    """The theta sum with exp(-Q / (2 beta)) and no prefactor.

    Kept for diagnostics: it is proportional to the representation series at
    2 beta, not at beta.
    """
    p = as_params(p)
    t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
    doubled = KernelParams(2 * p.beta, p.series_tol, p.max_terms)
    q0, total = _k3_theta_parts(t1, t2, doubled, 2 * p.beta)
    return np.exp(-q0 / (2 * p.beta)) * total / su3_weyl_s(t1, t2)


WALL_DPS = 60
# transverse to all three wall families t1 = t2, 2 t1 + t2 = 0, t1 + 2 t2 = 0
_WALL_DIRECTION = (1.0, math.sqrt(2.0) - 1.0)


def _k3_theta_mp(t1: float, t2: float, p: KernelParams, offset: float) -> float:
    """Uncalibrated theta form in extended precision, averaged over +-offset along _WALL_DIRECTION."""
    L = _su3_images(p)
    with mpmath.workdps(WALL_DPS):
        beta = mpmath.mpf(p.beta)
        pref = mpmath.sqrt(3) * mpmath.pi * mpmath.exp(beta) / beta**4
        out = mpmath.mpf(0)
        for sign in (1, -1):
            t1m = mpmath.mpf(t1) + sign * mpmath.mpf(offset) * _WALL_DIRECTION[0]
            t2m = mpmath.mpf(t2) + sign * mpmath.mpf(offset) * _WALL_DIRECTION[1]
            total = mpmath.mpf(0)
            for i in range(-L, L + 1):
                a = t1m + 2 * mpmath.pi * i
                for j in range(-L, L + 1):
                    b = t2m + 2 * mpmath.pi * j
                    total += (a - b) * (a + 2 * b) * (2 * a + b) * mpmath.exp(-(a * a + b * b + a * b) / beta)
            s = 8 * mpmath.sin((t1m - t2m) / 2) * mpmath.sin((2 * t1m + t2m) / 2) * mpmath.sin((t1m + 2 * t2m) / 2)
            out += pref * total / s / 2
        return float(out)


def _near_center(t1: np.ndarray, t2: np.ndarray, tol: float = 1e-3) -> np.ndarray:
    """All three eigenphases within tol of each other mod 2 pi (close to a central element)."""
    d1 = np.abs(np.angle(np.exp(1j * (t1 - t2))))
    d2 = np.abs(np.angle(np.exp(1j * (2 * t1 + t2))))
    return (d1 < tol) & (d2 < tol)


def _k3_wall_log(t1: np.ndarray, t2: np.ndarray, p: KernelParams) -> np.ndarray:
    """Uncalibrated log theta form on the walls.

    Off the center the Weyl denominator has a simple zero, so the value is the
    ratio of directional derivatives of the image sum and of s (l'Hopital).  Near
    the three central elements s has a triple zero and the derivatives cancel, so
    there an extended-precision evaluation displaced symmetrically by 1e-8 is
    used instead (error O(1e-16 / beta)).
    """
    v1, v2 = _WALL_DIRECTION
    L = _su3_images(p)
    l = np.arange(-L, L + 1) * 2 * np.pi
    a = t1[..., None, None] + l[:, None]
    b = t2[..., None, None] + l[None, :]
    q = su3_quadratic(a, b)
    q0 = np.min(q, axis=(-2, -1))
    poly = su3_cubic(a, b)
    dpoly = (v1 - v2) * (a + 2 * b) * (2 * a + b) + (a - b) * (v1 + 2 * v2) * (2 * a + b) \
        + (a - b) * (a + 2 * b) * (2 * v1 + v2)
    dq = 2 * a * v1 + 2 * b * v2 + a * v2 + b * v1
    dnum = np.sum((dpoly - poly * dq / p.beta) * np.exp(-(q - q0[..., None, None]) / p.beta), axis=(-2, -1))
    ha, hb, hc = (t1 - t2) / 2, (2 * t1 + t2) / 2, (t1 + 2 * t2) / 2
    da, db, dc = (v1 - v2) / 2, (2 * v1 + v2) / 2, (v1 + 2 * v2) / 2
    ds = 8 * (da * np.cos(ha) * np.sin(hb) * np.sin(hc) + db * np.sin(ha) * np.cos(hb) * np.sin(hc)
              + dc * np.sin(ha) * np.sin(hb) * np.cos(hc))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _k3_log_prefactor(p.beta) - q0 / p.beta + np.log(dnum / ds)
    central = _near_center(t1, t2)
    for idx in zip(*np.nonzero(central)):
        out[idx] = math.log(_k3_theta_mp(float(t1[idx]), float(t2[idx]), p, 1e-8))
    return out


def k3(t1, t2, p: KernelParams | float) -> np.ndarray:
    """Calibrated theta form of the SU3 kernel, with the exact limit on the walls."""
    p = as_params(p)
    t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
    out = k3_theta_raw(t1, t2, p) / calibration_constant(GroupKind.SU3)
    wall = ~np.isfinite(out)
    if np.any(wall):
        out = np.array(out, dtype=float)
        out[wall] = np.exp(_k3_wall_log(t1[wall], t2[wall], p)) / calibration_constant(GroupKind.SU3)
    return out


def log_k3(t1, t2, p: KernelParams | float) -> np.ndarray:
    p = as_params(p)
    t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
    if p.beta >= LOG_THETA_MAX_BETA:
        return np.log(k3_series(t1, t2, p))
    q0, total = _k3_theta_parts(t1, t2, p, p.beta)
    s = su3_weyl_s(t1, t2)
    wall = np.abs(s) < WALL_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _k3_log_prefactor(p.beta) - q0 / p.beta + np.log(total / s)
    out = out - math.log(calibration_constant(GroupKind.SU3))
    if np.any(wall):
        out = np.array(out, dtype=float)
        out[wall] = _k3_wall_log(t1[wall], t2[wall], p) - math.log(calibration_constant(GroupKind.SU3))
    return out


# ---------------------------------------------------------------------------
# calibration and dispatch

_calibration_lock = threading.Lock()
_calibration: dict[GroupKind, float] = {}


def _measure_calibration(kind: GroupKind) -> float:
    p = KernelParams(CALIBRATION_BETA)
    if kind is GroupKind.U1:
        return float(k1_series(0.5, p) / k1_theta(0.5, p))
    if kind is GroupKind.SU2:
        x = float(np.median(SU2_GRID_X))
        return float(k2_theta(x, p) / k2_series(x, p))
    t1, t2 = float(np.median(SU3_GRID_T1)), float(np.median(SU3_GRID_T2))
    return float(k3_theta_raw(t1, t2, p) / k3_series(t1, t2, p))


def calibration_constant(kind: GroupKind | str) -> float:
    """theta form / series at the mid-grid point and beta = 0.5; measured once."""
    kind = GroupKind.parse(kind)
    with _calibration_lock:
        if kind not in _calibration:
            _calibration[kind] = _measure_calibration(kind)
        return _calibration[kind]


def _coords(kind: GroupKind, c) -> ClassCoordinates:
    if isinstance(c, ClassCoordinates):
        if c.kind is not kind:
            raise GroupKindMismatch(f"{kind.name} kernel with {c.kind.name} coordinates")
        return c
    return ClassCoordinates(kind, c)


def heat_kernel(kind: GroupKind | str, c, p: KernelParams | float, beta_cross: float = BETA_CROSS) -> np.ndarray:
    """Density of the heat kernel at the class point c (theta forms below beta_cross)."""
    kind = GroupKind.parse(kind)
    p = as_params(p)
    c = _coords(kind, c)
    v = c.values
    if kind is GroupKind.U1:
        return k1_theta(v, p) if p.beta < beta_cross else k1_series(v, p)
    if kind is GroupKind.SU2:
        return k2_theta(v, p) / calibration_constant(kind) if p.beta < beta_cross else k2_series(v, p)
    if p.beta < beta_cross:
        return k3(v[..., 0], v[..., 1], p)
    return k3_series(v[..., 0], v[..., 1], p)


def log_heat_kernel(kind: GroupKind | str, c, p: KernelParams | float) -> np.ndarray:
    kind = GroupKind.parse(kind)
    p = as_params(p)
    c = _coords(kind, c)
    v = c.values
    if kind is GroupKind.U1:
        return log_k1(v, p)
    if kind is GroupKind.SU2:
        out = log_k2(v, p)
        return out if p.beta >= LOG_THETA_MAX_BETA else out - math.log(calibration_constant(kind))
    return log_k3(v[..., 0], v[..., 1], p)


def gaussian_limit(kind: GroupKind | str, c, beta: float) -> np.ndarray:
    """Leading small-beta term.

    U1: (4 pi beta)^-1/2 exp(-theta^2 / (4 beta)) with theta folded to [-1/2, 1/2).
    SU2: the n = 0 image of the Poisson form.
    SU3: the l = m = 0 image, i.e. exp(-(t1^2 + t2^2 + t1 t2) / beta) times
    sqrt(3) pi e^beta / beta^4 and P(t1, t2) / s(t1, t2).
    """
    kind = GroupKind.parse(kind)
    c = _coords(kind, c)
    v = c.values
    if kind is GroupKind.U1:
        th = fold_u1(v)
        return np.exp(-(th**2) / (4 * beta)) / math.sqrt(4 * math.pi * beta)
    if kind is GroupKind.SU2:
        return np.exp(_k2_log_prefactor(beta) - 2 * math.pi**2 * v**2 / beta) * _x_over_sin_any(v)
    t1, t2 = v[..., 0], v[..., 1]
    u = np.stack([t1 - t2, 2 * t1 + t2, t1 + 2 * t2], axis=-1)
    poly_over_s = np.prod(1.0 / np.sinc(u / (2 * np.pi)), axis=-1)
    return np.exp(_k3_log_prefactor(beta) - su3_quadratic(t1, t2) / beta) * poly_over_s


def _x_over_sin_any(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(x) < 1e-12, 1 / np.pi, x / np.sin(np.pi * x))


# ---------------------------------------------------------------------------
# character series


@dataclass(frozen=True)
class CharacterSeries:
    """Finite map RepLabel -> coefficient, f = sum_L a_L chi_L."""

    kind: GroupKind
    coefficients: Mapping[RepLabel, complex] = field(default_factory=dict)

    def __post_init__(self):
        kind = GroupKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        coeffs = {}
        for rep, value in dict(self.coefficients).items():
            if rep.kind is not kind:
                raise GroupKindMismatch(f"{rep.kind.name} label in a {kind.name} series")
            if value != 0:
                coeffs[rep] = value
        object.__setattr__(self, "coefficients", coeffs)

    def _check(self, other: "CharacterSeries"):
        if other.kind is not self.kind:
            raise GroupKindMismatch(f"{self.kind.name} vs {other.kind.name}")

    def __add__(self, other: "CharacterSeries") -> "CharacterSeries":
        self._check(other)
        out = dict(self.coefficients)
        for rep, value in other.coefficients.items():
            out[rep] = out.get(rep, 0) + value
        return CharacterSeries(self.kind, out)

    def scale(self, factor) -> "CharacterSeries":
        return CharacterSeries(self.kind, {r: factor * v for r, v in self.coefficients.items()})

    def convolve(self, other: "CharacterSeries") -> "CharacterSeries":
        """Haar convolution, using chi_L * chi_M = delta_LM chi_L / d_L."""
        self._check(other)
        out = {}
        for rep, value in self.coefficients.items():
            if rep in other.coefficients:
                out[rep] = value * other.coefficients[rep] / dimension(rep)
        return CharacterSeries(self.kind, out)

    def evaluate(self, c: ClassCoordinates) -> np.ndarray:
        total = np.zeros(c.batch_shape, dtype=complex)
        for rep, value in self.coefficients.items():
            total = total + value * character(rep, c)
        return total

    def __len__(self) -> int:
        return len(self.coefficients)


def kernel_labels(kind: GroupKind | str, p: KernelParams | float) -> list[RepLabel]:
    """Labels kept by the representation-series truncation at p."""
    kind = GroupKind.parse(kind)
    p = as_params(p)
    if kind is GroupKind.U1:
        n = _u1_series_terms(p)
        return [RepLabel.u1(k) for k in range(-n, n + 1)]
    if kind is GroupKind.SU2:
        return [RepLabel(kind, (j - 1,)) for j in range(1, _su2_series_terms(p) + 1)]
    return [RepLabel.su3(a, b) for a, b in su3_series_labels(p)]


def kernel_coefficient(rep: RepLabel, beta: float) -> float:
    return dimension(rep) * math.exp(-laplacian_eigenvalue(rep) * beta)


def kernel_series(kind: GroupKind | str, p: KernelParams | float) -> CharacterSeries:
    """K_beta = sum_L d_L e^{-c_L beta} chi_L on the truncation labels."""
    kind = GroupKind.parse(kind)
    p = as_params(p)
    return CharacterSeries(kind, {rep: kernel_coefficient(rep, p.beta) for rep in kernel_labels(kind, p)})


# ---------------------------------------------------------------------------
# class measures and quadrature


def class_density(kind: GroupKind | str, values) -> np.ndarray:
    """Density of the class measure: 1 on [0,1) (U1), 2 sin^2(pi x) on [0,1] (SU2),
    s^2 / (24 pi^2) on the torus [-pi, pi)^2 (SU3)."""
    kind = GroupKind.parse(kind)
    v = np.asarray(values, dtype=float)
    if kind is GroupKind.U1:
        return np.ones_like(v)
    if kind is GroupKind.SU2:
        return 2 * np.sin(np.pi * v) ** 2
    return su3_weyl_s(v[..., 0], v[..., 1]) ** 2 / (24 * np.pi**2)


def su2_class_cdf(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - np.sin(2 * np.pi * x) / (2 * np.pi)


@functools.lru_cache(maxsize=16)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    t.flags.writeable = False
    w.flags.writeable = False
    return t, w


def class_quadrature(kind: GroupKind | str, n: int = 256) -> tuple[ClassCoordinates, np.ndarray]:
    """Nodes and weights integrating class functions against the class measure.

    U1 and SU3 use the periodic trapezoid rule (spectral for smooth periodic
    integrands); SU2 uses Gauss-Legendre on [0, 1].
    """
    kind = GroupKind.parse(kind)
    if kind is GroupKind.U1:
        nodes = np.arange(n) / n
        return ClassCoordinates(kind, nodes), np.full(n, 1.0 / n)
    if kind is GroupKind.SU2:
        t, w = _leggauss(n)
        x = 0.5 * (t + 1)
        return ClassCoordinates(kind, x), 0.5 * w * class_density(kind, x)
    ang = -np.pi + 2 * np.pi * np.arange(n) / n
    t1, t2 = np.meshgrid(ang, ang, indexing="ij")
    coords = su3_coordinates(t1.ravel(), t2.ravel())
    w = class_density(kind, coords.values) * (2 * np.pi / n) ** 2
    return coords, w


def class_integral(kind: GroupKind | str, func: Callable[[ClassCoordinates], np.ndarray], n: int = 256):
    coords, w = class_quadrature(kind, n)
    return np.sum(w * func(coords))


def kernel_normalization(kind: GroupKind | str, beta: float, n: int | None = None) -> float:
    """Class-measure integral of the heat kernel by deterministic quadrature."""
    kind = GroupKind.parse(kind)
    if n is None:
        width = math.sqrt(beta) if kind is not GroupKind.SU3 else math.sqrt(beta) / (2 * math.pi)
        n = int(min(4096, max(256, 40 / width)))
        if kind is GroupKind.SU3:
            n = min(n, 512)
    return float(np.real(class_integral(kind, lambda c: heat_kernel(kind, c, beta), n)))


class ClassAngleDistribution:
    """Tabulated one-dimensional law of a class angle (U1 folded angle or SU2 x).

    Built from an unnormalized density on a fine grid; provides the CDF and
    inverse-CDF sampling.
    """

    def __init__(self, grid: np.ndarray, density: np.ndarray):
        cdf = cumulative_trapezoid(density, grid, initial=0.0)
        self.total = float(cdf[-1])
        self.grid = grid
        self.cdf_values = cdf / self.total

    def cdf(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.cdf_values)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.interp(rng.random(size), self.cdf_values, self.grid)


def class_angle_law(kind: GroupKind | str, beta: float | None, points: int = 200001,
                    density: Callable[[np.ndarray], np.ndarray] | None = None) -> ClassAngleDistribution:
    """Law of the class angle under the single-plaquette measure at beta.

    ``beta=None`` gives the Haar (class-measure) law.  For U1 the angle is
    folded to [-1/2, 1/2).  ``density`` overrides the kernel (e.g. the
    Gaussian limit).
    """
    kind = GroupKind.parse(kind)
    if kind is GroupKind.U1:
        grid = np.linspace(-0.5, 0.5, points)
        base = np.ones_like(grid)
        coords = np.mod(grid, 1.0)
    elif kind is GroupKind.SU2:
        grid = np.linspace(0.0, 1.0, points)
        base = class_density(kind, grid)
        coords = grid
    else:
        raise ValueError("one-dimensional class-angle laws exist for U1 and SU2 only")
    if density is not None:
        weight = density(coords)
    elif beta is None:
        weight = np.ones_like(grid)
    else:
        log_k = log_heat_kernel(kind, ClassCoordinates(kind, coords), beta)
        weight = np.exp(log_k - np.max(log_k))
    return ClassAngleDistribution(grid, base * weight)


def sample_su3_class(beta: float | None, size: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection sampling of (t1, t2) on the torus from kernel x class density."""
    ang = np.linspace(-np.pi, np.pi, 257)
    t1, t2 = np.meshgrid(ang, ang, indexing="ij")
    pts = np.stack([t1.ravel(), t2.ravel()], axis=-1)

    def target(v):
        dens = class_density(GroupKind.SU3, v)
        if beta is None:
            return dens
        return dens * heat_kernel(GroupKind.SU3, ClassCoordinates(GroupKind.SU3, v), beta)

    bound = 1.5 * float(np.max(target(pts)))
    out = []
    have = 0
    while have < size:
        batch = rng.uniform(-np.pi, np.pi, size=(2 * size, 2))
        keep = batch[rng.random(2 * size) * bound < target(batch)]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:size]
