"""
Charged particle on the flat torus ``(R / 2 pi Z)^2`` with integer flux N.

The covering operator is ``-d_x^2 - (d_y + i N x / (2 pi))^2`` on the plane
(Landau gauge).  A character ``(mu, nu)`` of the deck group ``(2 pi Z)^2``
selects sections with

    phi(x + 2 pi, y) = e^{2 pi i mu} e^{-i N y} phi(x, y),
    phi(x, y + 2 pi) = e^{2 pi i nu} phi(x, y).

Fourier transform in y reduces the plane operator to harmonic oscillators
of frequency ``omega = |N| / pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

from .errors import (
    GridTooCoarse,
    InvalidSpectralParameter,
    NonPositiveTime,
    QuadratureNotConverged,
    TruncationNotConverged,
)
from .oscillator import ho_green, laplace_transform

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LandauModel:
    flux_n: int
    mu: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if int(self.flux_n) != self.flux_n or self.flux_n == 0:
            raise ValueError(f"flux must be a nonzero integer, got {self.flux_n}")
        for name in ("mu", "nu"):
            val = getattr(self, name)
            if not 0.0 <= val < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {val}")

    @property
    def omega(self) -> float:
        return abs(self.flux_n) / math.pi

    @property
    def field_strength(self) -> float:
        """Cyclotron parameter of the plane heat kernel, ``|N| / (2 pi) = omega / 2``."""
        return abs(self.flux_n) / TWO_PI

    def with_character(self, mu: float, nu: float) -> "LandauModel":
        return LandauModel(self.flux_n, mu, nu)


def _require_negative(z: complex) -> complex:
    z = complex(z)
    if z.real >= 0:
        raise InvalidSpectralParameter(f"need Re z < 0, got {z}")
    return z


# -----------------------------------------------------------------------------
# plane
# -----------------------------------------------------------------------------

def plane_heat_kernel(model: LandauModel, t, x1, y1, x2, y2):
    """Heat kernel of the plane operator.

    ``b / (4 pi sinh(b t)) exp(-(b/4) coth(b t) |r1 - r2|^2)`` times the
    straight-line gauge phase ``exp(-i N (x1 + x2)(y1 - y2) / (4 pi))``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise NonPositiveTime("heat kernel needs t > 0")
    b = model.field_strength
    x1, y1, x2, y2 = (np.asarray(a, dtype=float) for a in (x1, y1, x2, y2))
    r2 = (x1 - x2) ** 2 + (y1 - y2) ** 2
    bt = b * t
    small = bt < 1.0
    log_sinh = np.where(small, np.log(np.sinh(np.where(small, bt, 1.0))),
                        np.where(small, 1.0, bt) + np.log1p(-np.exp(-2 * np.where(small, 1.0, bt))) - math.log(2))
    amp = np.exp(math.log(b / (4 * math.pi)) - log_sinh - (b / 4) * r2 / np.tanh(bt))
    phase = np.exp(-1j * model.flux_n * (x1 + x2) * (y1 - y2) / (4 * math.pi))
    return amp * phase


def plane_green_heat(model: LandauModel, z: complex, x1, y1, x2, y2, rtol: float = 1e-10):
    """Laplace transform of the plane heat kernel; vectorized over broadcast points."""
    z = _require_negative(z)
    shape = np.broadcast(*(np.asarray(a) for a in (x1, y1, x2, y2))).shape
    pts = [np.broadcast_to(np.asarray(a, dtype=float), shape).reshape(-1, 1) for a in (x1, y1, x2, y2)]
    if np.any((pts[0] - pts[2]) ** 2 + (pts[1] - pts[3]) ** 2 == 0):
        raise QuadratureNotConverged("the plane Green function is logarithmically singular on the diagonal")
    out = np.empty(pts[0].shape[0], dtype=complex)
    chunk = 1024
    for s in range(0, out.size, chunk):
        sl = slice(s, s + chunk)
        out[sl] = laplace_transform(
            lambda t: plane_heat_kernel(model, t[None, :], pts[0][sl], pts[1][sl], pts[2][sl], pts[3][sl]),
            z, model.field_strength - z.real, rtol=rtol)
    return out.reshape(shape) if shape else out[0]


def plane_green_kintegral(model: LandauModel, z: complex, x1: float, y1: float, x2: float, y2: float,
                          tol: float = 1e-10, envelope: float = 1e-12) -> complex:
    """Oscillator route: ``(|N| / 4 pi^2) int G_ho(x1 + s, x2 + s) e^{i N s (y1 - y2) / (2 pi)} ds``.

    For large |s| the oscillator Green function behaves like
    ``exp(-omega |s| |x1 - x2| / 2) / (omega |s|)``, so the integral is cut
    where that envelope drops below ``envelope``; trapezoid nodes are doubled
    until successive values differ by less than ``tol``.
    """
    z = _require_negative(z)
    w = model.omega
    dx = abs(x1 - x2)
    if dx < 1e-3:
        raise QuadratureNotConverged("the oscillator integrand decays too slowly when x1 is close to x2")
    centre = -(x1 + x2) / 2
    cut = 2.0 * math.log(1.0 / envelope) / (w * dx) + 10.0
    a, b = centre - cut, centre + cut
    freq = model.flux_n * (y1 - y2) / TWO_PI
    pref = abs(model.flux_n) / (4 * math.pi ** 2)

    def rule(n):
        s = np.linspace(a, b, n + 1)
        vals = ho_green(z, x1 + s, x2 + s, w) * np.exp(1j * freq * s)
        wts = np.full(n + 1, (b - a) / n)
        wts[0] = wts[-1] = (b - a) / (2 * n)
        return pref * np.dot(vals, wts)

    n = 512
    prev = rule(n)
    while n < 2 ** 15:
        n *= 2
        cur = rule(n)
        if abs(cur - prev) < tol:
            return complex(cur)
        prev = cur
    raise QuadratureNotConverged("k-integral did not converge")


def plane_magnetic_green(model: LandauModel, z: complex, x1, y1, x2, y2, method: str = "kintegral"):
    if method == "kintegral":
        return plane_green_kintegral(model, z, float(x1), float(y1), float(x2), float(y2))
    if method == "heat":
        return plane_green_heat(model, z, x1, y1, x2, y2)
    raise ValueError(f"unknown method {method!r}")


def magnetic_shift(model: LandauModel, a: float, b: float, x: float, y: float) -> tuple[float, float, complex]:
    """``(W_{a,b} phi)(x, y) = e^{-i N a y / (2 pi)} phi(x - a, y - b)``: returns shifted point and phase."""
    return x - a, y - b, np.exp(-1j * model.flux_n * a * y / TWO_PI)


# -----------------------------------------------------------------------------
# torus Green function
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class GreenValue:
    value: complex
    est_error: float
    truncation: int


def _direct_sum(model: LandauModel, z: complex, x1, y1, x2, y2, k: int) -> complex:
    m, n = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
    m, n = m.ravel(), n.ravel()
    phase = np.exp(TWO_PI * 1j * (model.mu * m + model.nu * n)) * np.exp(-1j * m * model.flux_n * y1)
    vals = plane_green_heat(model, z, x1 - TWO_PI * m, y1 - TWO_PI * n, x2, y2)
    return complex(np.sum(phase * vals))


def _poisson_sum(model: LandauModel, z: complex, x1, y1, x2, y2, k: int) -> complex:
    n_flux = model.flux_n
    k1, k2 = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
    k1, k2 = k1.ravel(), k2.ravel()
    total = 0j
    for s in range(abs(n_flux)):
        shift = TWO_PI * (s + model.nu) / n_flux
        vals = ho_green(z, x1 + TWO_PI * k1 + shift, x2 + TWO_PI * k2 + shift, model.omega)
        phase = np.exp(1j * k1 * (n_flux * y1 - TWO_PI * model.mu)
                       - 1j * k2 * (n_flux * y2 - TWO_PI * model.mu)
                       + 1j * (s + model.nu) * (y1 - y2))
        total += np.sum(vals * phase)
    return total / TWO_PI


def torus_green(model: LandauModel, z: complex, x1: float, y1: float, x2: float, y2: float,
                truncation: int = 6, variant: str = "poisson", tol: float | None = None) -> GreenValue:
    """Green function of the twisted torus operator.

    ``variant="direct"`` sums the plane Green function over the deck group,
    ``sum_{m,n} e^{2 pi i (mu m + nu n)} e^{-i m N y1} G(x1 - 2 pi m, y1 - 2 pi n; x2, y2)``;
    ``variant="poisson"`` uses the Poisson-resummed oscillator series.  Both
    use the square truncation ``|m|, |n| <= K``; the error estimate is the
    change from K to K + 2, and exceeding ``tol`` raises.
    """
    z = _require_negative(z)
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    fn = {"direct": _direct_sum, "poisson": _poisson_sum}.get(variant)
    if fn is None:
        raise ValueError(f"unknown variant {variant!r}")
    val = fn(model, z, x1, y1, x2, y2, truncation)
    est = abs(fn(model, z, x1, y1, x2, y2, truncation + 2) - val)
    if tol is not None and est > tol:
        raise TruncationNotConverged(f"{variant} sum changed by {est:.2e} from K={truncation} to K+2")
    return GreenValue(val, est, truncation)


def shifted_green(model: LandauModel, z: complex, x1, y1, x2, y2, truncation: int = 6,
                  variant: str = "poisson") -> complex:
    """Right-hand side of the shift identity, built from the untwisted (mu = nu = 0) Green function."""
    base = model.with_character(0.0, 0.0)
    dx = TWO_PI * model.nu / model.flux_n
    dy = TWO_PI * model.mu / model.flux_n
    g1 = torus_green(base, z, x1 + dx, y1 - dy, x2 + dx, y2 - dy, truncation, variant).value
    return np.exp(1j * model.nu * y1) * g1 * np.exp(-1j * model.nu * y2)


# -----------------------------------------------------------------------------
# spectrum and trace
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumReport:
    levels: list[tuple[float, int]]
    source: str
    comparison: list[float] = field(default_factory=list)


def landau_spectrum(model: LandauModel, lmax: int) -> SpectrumReport:
    if lmax < 0:
        raise ValueError("lmax must be >= 0")
    mult = abs(model.flux_n)
    return SpectrumReport([(model.omega * (ell + 0.5), mult) for ell in range(lmax + 1)], "analytic")


def analytic_levels(model: LandauModel, count: int) -> np.ndarray:
    """The first ``count`` eigenvalues with multiplicity."""
    mult = abs(model.flux_n)
    ells = np.arange(count) // mult
    return model.omega * (ells + 0.5)


@dataclass(frozen=True)
class DiscretizedOperator:
    grid_l: int
    matrix: sp.csr_matrix
    model: LandauModel

    @property
    def spacing(self) -> float:
        return TWO_PI / self.grid_l

    def coords(self) -> np.ndarray:
        return np.arange(self.grid_l) * self.spacing

    def index(self, j: int, l: int) -> int:
        return (j % self.grid_l) * self.grid_l + (l % self.grid_l)


def discretize_h_lambda(model: LandauModel, grid_l: int) -> DiscretizedOperator:
    """Five-point magnetic Laplacian on an L x L grid of the fundamental domain.

    Grid point ``(j, l)`` sits at ``(j h, l h)`` with ``h = 2 pi / L`` and
    index ``j L + l``.  The y-link from ``(j, l)`` to ``(j, l + 1)`` carries the
    Peierls factor ``e^{i N x_j h / (2 pi)}``; links that leave the domain pick
    up the boundary factors of the twisted sections.
    """
    if grid_l < 16:
        raise GridTooCoarse(f"grid must have at least 16 points per period, got {grid_l}")
    n = grid_l
    h = TWO_PI / n
    n_flux = model.flux_n
    j, l = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    j, l = j.ravel(), l.ravel()
    here = j * n + l

    up = j * n + (l + 1) % n
    y_coef = -np.exp(1j * n_flux * (j * h) * h / TWO_PI)
    y_coef = np.where(l == n - 1, y_coef * np.exp(TWO_PI * 1j * model.nu), y_coef)

    right = ((j + 1) % n) * n + l
    x_coef = np.where(j == n - 1,
                      -np.exp(TWO_PI * 1j * model.mu) * np.exp(-1j * n_flux * (l * h)),
                      -1.0 + 0j)

    # entry [here, nbr] is the coefficient of phi(nbr) in (H phi)(here)
    rows = np.concatenate([here, here, up, right, here])
    cols = np.concatenate([up, right, here, here, here])
    vals = np.concatenate([y_coef, x_coef, y_coef.conj(), x_coef.conj(), np.full(n * n, 4.0 + 0j)])
    mat = sp.csr_matrix((vals / h ** 2, (rows, cols)), shape=(n * n, n * n))
    return DiscretizedOperator(n, mat, model)


def hermiticity_defect(op: DiscretizedOperator) -> float:
    diff = op.matrix - op.matrix.conj().T
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def plaquette_fluxes(op: DiscretizedOperator) -> np.ndarray:
    """Phase of the ordered link product around each elementary plaquette.

    The link variable from site a to neighbour b is ``-H[a, b] h^2``; the
    product around ``(j,l) -> (j+1,l) -> (j+1,l+1) -> (j,l+1) -> (j,l)``
    is returned as an angle in ``(-pi, pi]``.
    """
    n = op.grid_l
    mat = op.matrix.tocsr() * op.spacing ** 2
    out = np.empty((n, n))
    for j in range(n):
        for l in range(n):
            a = op.index(j, l)
            b = op.index(j + 1, l)
            c = op.index(j + 1, l + 1)
            d = op.index(j, l + 1)
            prod = (-mat[a, b]) * (-mat[b, c]) * (-mat[c, d]) * (-mat[d, a])
            out[j, l] = np.angle(prod)
    return out


def discrete_eigenvalues(op: DiscretizedOperator, count: int, shift: float = -1.0) -> np.ndarray:
    """Lowest ``count`` eigenvalues by shift-invert Lanczos."""
    vals = eigsh(op.matrix, k=count, sigma=shift, which="LM", return_eigenvectors=False)
    return np.sort(vals.real)


def discrete_eigenpairs(op: DiscretizedOperator, count: int, shift: float = -1.0):
    vals, vecs = eigsh(op.matrix, k=count, sigma=shift, which="LM")
    order = np.argsort(vals.real)
    return vals.real[order], vecs[:, order]


def discrete_green(op: DiscretizedOperator, z: complex, source: tuple[int, int]) -> np.ndarray:
    """Grid resolvent applied to a unit-mass delta (height ``1 / h^2``) at the source site."""
    n = op.grid_l
    rhs = np.zeros(n * n, dtype=complex)
    rhs[op.index(*source)] = 1.0 / op.spacing ** 2
    lu = splu((op.matrix - complex(z) * sp.identity(n * n, format="csr")).tocsc())
    return lu.solve(rhs).reshape(n, n)


@dataclass(frozen=True)
class TraceReport:
    t: float
    eigen_sum: float
    quoted_closed_form: float
    discrete_trace: float | None
    tail_bound: float | None
    supported: str | None


def heat_trace(model: LandauModel, t: float, grid_l: int | None = None, count: int = 80) -> TraceReport:
    """Heat trace of the twisted operator.

    ``eigen_sum`` is the sum over Landau levels with multiplicity |N|;
    ``quoted_closed_form`` is ``2 |N| / sinh(t omega / 2)``.  With a grid,
    ``discrete_trace`` sums ``exp(-t lambda)`` over the lowest ``count``
    grid eigenvalues, ``tail_bound`` bounds the omitted levels geometrically,
    and ``supported`` names the closed form that lies nearer to it.
    """
    if t <= 0:
        raise NonPositiveTime("heat trace needs t > 0")
    w = model.omega
    mult = abs(model.flux_n)
    eigen_sum = mult / (2 * math.sinh(t * w / 2))
    closed = 2 * mult / math.sinh(t * w / 2)
    if grid_l is None:
        return TraceReport(t, eigen_sum, closed, None, None, None)
    vals = discrete_eigenvalues(discretize_h_lambda(model, grid_l), count)
    disc = float(np.sum(np.exp(-t * vals)))
    # beyond the computed window levels keep at least the Landau spacing per |N| states
    spacing = w / mult
    tail = float(np.exp(-t * vals[-1]) / (1 - np.exp(-t * spacing)))
    nearer = "eigen_sum" if abs(disc - eigen_sum) <= abs(disc - closed) else "quoted_closed_form"
    return TraceReport(t, eigen_sum, closed, disc, tail, nearer)


# -----------------------------------------------------------------------------
# unitary equivalence between characters
# -----------------------------------------------------------------------------

def _mode_numbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n).astype(int)


def t_lambda_map(model: LandauModel, phi: np.ndarray) -> np.ndarray:
    """``(T phi)(x, y) = e^{i nu y} phi(x + 2 pi nu / N, y - 2 pi mu / N)`` on the grid.

    ``phi`` is an L x L grid function of the untwisted sector.  Writing
    ``phi(x, y) = sum_k c_k(x) e^{i k y}``, the boundary condition gives
    ``c_k(x + 2 pi) = c_{k+N}(x)``; the modes ``k = r + q N`` of one residue
    class r therefore glue into a single function of ``x + 2 pi q``, which
    is shifted exactly by Fourier interpolation.  Requires ``|N|`` to divide L.
    """
    n = phi.shape[0]
    n_flux = model.flux_n
    mult = abs(n_flux)
    if phi.shape != (n, n) or n % mult:
        raise ValueError("grid must be square with |N| dividing L")
    h = TWO_PI / n
    coeffs = np.fft.fft(phi, axis=1) / n  # coeffs[j, idx] = c_k(x_j), k = modes[idx]
    modes = _mode_numbers(n)
    shifted = np.empty_like(coeffs)
    x_shift = TWO_PI * model.nu / n_flux
    for r in range(mult):
        idx = np.nonzero(np.mod(modes, mult) == r)[0]
        q = (modes[idx] - r) // n_flux
        order = np.argsort(q)
        idx = idx[order]
        line = coeffs[:, idx].T.reshape(-1)  # position (q - q_min) * L + j
        freqs = np.fft.fftfreq(line.size, d=h) * TWO_PI
        moved = np.fft.ifft(np.fft.fft(line) * np.exp(1j * freqs * x_shift))
        shifted[:, idx] = moved.reshape(len(idx), n).T
    y_shift = TWO_PI * model.mu / n_flux
    shifted *= np.exp(-1j * modes * y_shift)[None, :]
    out = np.fft.ifft(shifted * n, axis=1)
    y = np.arange(n) * h
    return out * np.exp(1j * model.nu * y)[None, :]


def intertwining_residual(model: LandauModel, grid_l: int, phi: np.ndarray) -> float:
    """``|H^L T phi - T H^1 phi| / |phi|`` for a grid function of the untwisted sector."""
    base = discretize_h_lambda(model.with_character(0.0, 0.0), grid_l)
    twisted = discretize_h_lambda(model, grid_l)
    flat = phi.reshape(-1)
    lhs = twisted.matrix @ t_lambda_map(model, phi).reshape(-1)
    rhs = t_lambda_map(model, (base.matrix @ flat).reshape(grid_l, grid_l)).reshape(-1)
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(flat))
