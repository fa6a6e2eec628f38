"""
Harmonic oscillator ``H = -d^2/dx^2 + omega^2 x^2 / 4``: heat kernel, eigenfunctions,
Green function and the parabolic cylinder functions it needs.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np

from .errors import DomainExceeded, NonPositiveTime, PoleProximity, QuadratureNotConverged

PCF_DOMAIN = 60.0
ASYMPTOTIC_SWITCH = 10.0
POLE_MARGIN = 1e-6


# -----------------------------------------------------------------------------
# parabolic cylinder functions
# -----------------------------------------------------------------------------

def _pcfd_kummer(nu, x, dps: int):
    """Confluent hypergeometric representation, evaluated at ``dps`` digits."""
    with mpmath.workdps(dps):
        nu = mpmath.mpmathify(nu)
        x = mpmath.mpf(x)
        a = x * x / 2
        even = mpmath.sqrt(mpmath.pi) * mpmath.rgamma((1 - nu) / 2) * mpmath.hyp1f1(-nu / 2, 0.5, a)
        odd = mpmath.sqrt(2 * mpmath.pi) * x * mpmath.rgamma(-nu / 2) * mpmath.hyp1f1((1 - nu) / 2, 1.5, a)
        return +(mpmath.power(2, nu / 2) * mpmath.exp(-a / 2) * (even - odd))


def _pcfd_asymptotic(nu, x):
    """``e^{-x^2/4} x^nu sum_k (-1)^k (nu)_{falling 2k} / (k! 2^k x^{2k})`` for large positive x.

    Summation stops at the smallest term; returns the value and the size of
    the last term used as an error estimate.
    """
    nu = mpmath.mpmathify(nu)
    x = mpmath.mpf(x)
    total = mpmath.mpf(1)
    term = mpmath.mpf(1)
    inv = 1 / (2 * x * x)
    last = mpmath.mpf(1)
    for k in range(1, 200):
        nxt = -term * (nu - 2 * k + 2) * (nu - 2 * k + 1) * inv / k
        if abs(nxt) > abs(term):
            break
        term = nxt
        total += term
        last = abs(term)
        if last < mpmath.mpf(10) ** (-mpmath.mp.dps - 2):
            break
    return mpmath.exp(-x * x / 4) * mpmath.power(x, nu) * total, last


def pcfd_mp(nu, x):
    """``D_nu(x)`` as an mpmath number (no overflow for large negative x)."""
    x = float(x)
    if not math.isfinite(x) or abs(x) > PCF_DOMAIN:
        raise DomainExceeded(f"|x| must not exceed {PCF_DOMAIN}, got {x}")
    if x > ASYMPTOTIC_SWITCH:
        with mpmath.workdps(30):
            val, err = _pcfd_asymptotic(nu, x)
            if err < mpmath.mpf(10) ** -20:
                return val
    # cancellation between the two Kummer terms grows like e^{x^2/2} for x > 0
    extra = int(x * x / (2 * math.log(10))) if x > 0 else 0
    return _pcfd_kummer(nu, x, 25 + extra)


def parabolic_cylinder_d(nu, x) -> complex:
    """Weber parabolic cylinder function ``D_nu(x)`` for real x, ``|x| <= 60``."""
    return complex(pcfd_mp(nu, x))


def pcfd_asymptotic_leading(nu, x: float) -> complex:
    """The leading behaviour ``e^{-x^2/4} x^nu``."""
    return complex(mpmath.exp(-mpmath.mpf(x) ** 2 / 4) * mpmath.power(mpmath.mpf(x), nu))


# -----------------------------------------------------------------------------
# heat kernel and eigenfunctions
# -----------------------------------------------------------------------------

def _log_sinh(a):
    a = np.asarray(a, dtype=float)
    small = a < 1.0
    safe = np.where(small, 1.0, a)
    return np.where(small, np.log(np.sinh(np.where(small, a, 1.0))),
                    safe + np.log1p(-np.exp(-2 * safe)) - math.log(2))


def mehler_heat_kernel(t, x1, x2, omega: float):
    """Kernel of ``exp(-t H)``, written so that no cancellation occurs:

    ``sqrt(w / (4 pi sinh(w t))) exp(-(w/8) [(x1-x2)^2 coth(w t/2) + (x1+x2)^2 tanh(w t/2)])``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise NonPositiveTime("heat kernel needs t > 0")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    diff2 = (x1 - x2) ** 2
    if omega == 0:
        return np.exp(-diff2 / (4 * t)) / np.sqrt(4 * np.pi * t)
    half = omega * t / 2
    sum2 = (x1 + x2) ** 2
    with np.errstate(over="ignore"):
        expo = -(omega / 8) * (diff2 / np.tanh(half) + sum2 * np.tanh(half))
        log_pref = 0.5 * (math.log(omega / (4 * math.pi)) - _log_sinh(omega * t))
    return np.exp(log_pref + expo)


def hermite_functions(lmax: int, x, omega: float) -> np.ndarray:
    """Normalized eigenfunctions ``phi_0..phi_lmax`` at x, shape ``(lmax + 1,) + x.shape``.

    ``phi_l`` has energy ``omega (l + 1/2)``; computed by the three-term
    recurrence in the scaled variable ``sqrt(omega/2) x``.
    """
    x = np.asarray(x, dtype=float)
    alpha = omega / 2
    xi = math.sqrt(alpha) * x
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = (alpha / math.pi) ** 0.25 * np.exp(-xi * xi / 2)
    if lmax >= 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for n in range(1, lmax):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def oscillator_levels(lmax: int, omega: float) -> np.ndarray:
    return omega * (np.arange(lmax + 1) + 0.5)


def heat_kernel_eigen_sum(t: float, x1, x2, omega: float, lmax: int = 60):
    phi1 = hermite_functions(lmax, x1, omega)
    phi2 = hermite_functions(lmax, x2, omega)
    weights = np.exp(-t * oscillator_levels(lmax, omega))
    return np.tensordot(weights, phi1 * phi2, axes=1)


def green_eigen_sum(z: complex, x1, x2, omega: float, lmax: int):
    """Truncated spectral sum; converges slowly on the diagonal (terms ~ l^-3/2)."""
    phi1 = hermite_functions(lmax, x1, omega)
    phi2 = hermite_functions(lmax, x2, omega)
    weights = 1.0 / (oscillator_levels(lmax, omega) - z)
    return np.tensordot(weights, phi1 * phi2, axes=1)


# -----------------------------------------------------------------------------
# Green function
# -----------------------------------------------------------------------------

def _laplace_nodes(z: complex, decay: float, step: float, tol_exp: float = 40.0):
    """Trapezoid nodes in ``u = ln t`` on ``[-75, ln t_max]``."""
    t_max = tol_exp / decay
    hi = math.log(t_max)
    if z.imag != 0:
        step = min(step, 0.25 / (abs(z.imag) * t_max))
    n = int(math.ceil((hi + 75.0) / step))
    return np.linspace(-75.0, hi, n + 1)


def _log_trapezoid(heat, z: complex, u: np.ndarray) -> np.ndarray:
    t = np.exp(u)
    du = u[1] - u[0]
    trap = np.full(len(u), du)
    trap[0] = trap[-1] = du / 2
    return heat(t) @ (np.exp(z * t) * t * trap)


def laplace_transform(heat, z: complex, decay: float, step: float = 1 / 16, rtol: float = 1e-10,
                      atol: float = 1e-16):
    """``int_0^inf e^{z t} p(t) dt`` by the trapezoid rule in ln t.

    ``heat(t)`` maps a 1-D array of times to an array ``(n_points, len(t))``;
    ``decay`` is a lower bound on the exponential decay rate of ``e^{z t} p(t)``.
    The integrand is analytic and decays exponentially in ln t at both ends,
    so the rule converges geometrically; the result is accepted once halving
    the step changes it by less than ``rtol`` (relative) or ``atol``.
    """
    z = complex(z)
    coarse = _log_trapezoid(heat, z, _laplace_nodes(z, decay, step))
    for _ in range(4):
        step /= 2
        fine = _log_trapezoid(heat, z, _laplace_nodes(z, decay, step))
        if np.all(np.abs(fine - coarse) <= rtol * np.abs(fine) + atol):
            return fine
        coarse = fine
    raise QuadratureNotConverged("Laplace quadrature of the heat kernel did not settle")


def ho_green_laplace(z: complex, x1, x2, omega: float, step: float = 1 / 16, rtol: float = 1e-10):
    """Laplace transform of the Mehler kernel, vectorized over broadcast (x1, x2)."""
    z = complex(z)
    if z.real >= 0:
        raise ValueError("the Laplace route needs Re z < 0")
    shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
    a1 = np.broadcast_to(np.asarray(x1, dtype=float), shape).reshape(-1, 1)
    a2 = np.broadcast_to(np.asarray(x2, dtype=float), shape).reshape(-1, 1)
    out = np.empty(a1.shape[0], dtype=complex)
    chunk = 1024
    for s in range(0, a1.shape[0], chunk):
        sl = slice(s, s + chunk)
        out[sl] = laplace_transform(lambda t: mehler_heat_kernel(t[None, :], a1[sl], a2[sl], omega),
                                    z, omega / 2 - z.real, step, rtol)
    return out.reshape(shape) if shape else out[0]


def ho_green_pcf(z: complex, x1: float, x2: float, omega: float) -> complex:
    """``Gamma(1/2 - z/w) D_nu(sqrt(w) x>) D_nu(-sqrt(w) x<) / sqrt(2 pi w)``, ``nu = z/w - 1/2``."""
    z = complex(z)
    arg = 0.5 - z / omega
    nearest = round(arg.real)
    if nearest <= 0 and abs(arg - nearest) < POLE_MARGIN:
        raise PoleProximity(f"z={z} is within {POLE_MARGIN} of the level {omega * (0.5 - nearest)}")
    nu = z / omega - 0.5
    nu_mp = mpmath.mpc(nu.real, nu.imag) if nu.imag else mpmath.mpf(nu.real)
    hi, lo = max(x1, x2), min(x1, x2)
    root = math.sqrt(omega)
    with mpmath.workdps(30):
        val = mpmath.gamma(mpmath.mpmathify(0.5) - mpmath.mpmathify(z) / omega) \
            * pcfd_mp(nu_mp, root * hi) * pcfd_mp(nu_mp, -root * lo) / mpmath.sqrt(2 * mpmath.pi * omega)
    return complex(val)


def ho_green(z: complex, x1, x2, omega: float, method: str = "laplace"):
    """Oscillator Green function, kernel of ``(H - z)^-1``."""
    if method == "laplace":
        return ho_green_laplace(z, x1, x2, omega)
    if method == "pcf":
        if np.ndim(x1) or np.ndim(x2):
            f = np.vectorize(lambda a, b: ho_green_pcf(z, float(a), float(b), omega), otypes=[complex])
            return f(x1, x2)
        return ho_green_pcf(z, float(x1), float(x2), omega)
    raise ValueError(f"unknown method {method!r}")
