"""
Block decomposition of periodic operators and kernel reconstruction.

Functions of the periodic operator are evaluated through one Hermitian
eigendecomposition; the equivariant kernels for an irrep L are rebuilt from
the periodic kernel by the finite weighted sum

    K^L(y1, y2) = sum_g Psi_g(g^-1 y1) K(g^-1 y1, y2) (x) L(g),

which in matrix form is ``sum_g kron(W_g K, L(g))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.integrate import quad_vec

from .covering import (
    CoveringModel,
    bloch_matrix,
    build_h_lambda,
    equivariant_basis,
)
from .errors import (
    IncompleteDual,
    ModelError,
    InvalidSpectralParameter,
    NonPositiveTime,
    SpectralParameterInSpectrum,
)
from .groups import DualSpace, UnitaryIrrep, fourier, inverse_fourier

SPECTRUM_MARGIN = 1e-8

KernelKind = Literal["propagator", "semigroup", "green"]


@dataclass(frozen=True)
class Spectral:
    """Eigendecomposition ``h = V diag(w) V^*`` of a Hermitian matrix."""
    values: np.ndarray
    vectors: np.ndarray

    @classmethod
    def of(cls, h: np.ndarray) -> "Spectral":
        w, v = np.linalg.eigh(h)
        return cls(w, v)

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return (self.vectors * fn(self.values)) @ self.vectors.conj().T

    def diameter(self) -> float:
        return float(self.values[-1] - self.values[0])


def check_resolvent_point(values: np.ndarray, z: complex) -> None:
    diam = float(np.max(values) - np.min(values)) if len(values) else 0.0
    gap = float(np.min(np.abs(values - z)))
    if gap < SPECTRUM_MARGIN * max(1.0, diam):
        raise SpectralParameterInSpectrum(f"z={z} lies within {gap:.2e} of the spectrum")


def kernel_function(kind: KernelKind, param: complex) -> Callable[[np.ndarray], np.ndarray]:
    if kind == "propagator":
        t = float(np.real(param))
        return lambda w: np.exp(-1j * t * w)
    if kind == "semigroup":
        t = float(np.real(param))
        if t <= 0:
            raise NonPositiveTime(f"semigroup needs t > 0, got {t}")
        return lambda w: np.exp(-t * w).astype(complex)
    if kind == "green":
        z = complex(param)
        return lambda w: 1.0 / (w - z)
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class BlockDecomposition:
    model: CoveringModel
    dual: DualSpace
    phi: np.ndarray
    blocks: dict[str, np.ndarray]
    multiplicities: dict[str, int]
    spectral: Spectral = field(repr=False)
    block_spectra: dict[str, Spectral] = field(repr=False)

    def block_diagonal(self, fn: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
        """``(+)_L f(H^L) (x) 1_D`` in the row order of ``phi``."""
        parts = []
        for r in self.dual.irreps:
            sp = self.block_spectra[r.name]
            mat = sp.apply(fn) if fn is not None else self.blocks[r.name]
            parts.append(np.kron(mat, np.eye(r.dim)))
        n = sum(p.shape[0] for p in parts)
        out = np.zeros((n, n), dtype=complex)
        k = 0
        for p in parts:
            out[k:k + p.shape[0], k:k + p.shape[0]] = p
            k += p.shape[0]
        return out

    def conjugated(self, op: np.ndarray) -> np.ndarray:
        return self.phi @ op @ self.phi.conj().T

    def unitarity_defect(self) -> float:
        return float(np.max(np.abs(self.phi @ self.phi.conj().T - np.eye(len(self.phi)))))

    def block_defect(self) -> float:
        return float(np.max(np.abs(self.conjugated(self.model.h_tilde) - self.block_diagonal())))

    def union_spectrum(self) -> np.ndarray:
        vals = [np.repeat(self.block_spectra[r.name].values, r.dim) for r in self.dual.irreps]
        return np.sort(np.concatenate(vals))

    def spectrum_defect(self) -> float:
        return float(np.max(np.abs(self.spectral.values - self.union_spectrum())))


def decompose(m: CoveringModel, dual: DualSpace) -> BlockDecomposition:
    if dual.group.order != m.group.order or not np.array_equal(dual.group.table, m.group.table):
        raise IncompleteDual("dual belongs to a different group")
    if sum(r.dim ** 2 for r in dual.irreps) != m.group.order:
        raise IncompleteDual("sum of squared irrep dimensions differs from the group order")
    blocks = {r.name: build_h_lambda(m, r) for r in dual.irreps}
    return BlockDecomposition(
        model=m,
        dual=dual,
        phi=bloch_matrix(m, dual),
        blocks=blocks,
        multiplicities={r.name: r.dim for r in dual.irreps},
        spectral=Spectral.of(m.h_tilde),
        block_spectra={k: Spectral.of(v) for k, v in blocks.items()},
    )


def evolution_decompose(bd: BlockDecomposition, t: float, kind: str = "unitary") -> dict:
    """Per-irrep exponentials and the deviation from ``phi exp(..h) phi^*``.

    ``kind`` is "unitary" (``exp(-i t h)``) or "semigroup" (``exp(-t h)``).
    """
    fn = kernel_function("propagator" if kind == "unitary" else "semigroup", t)
    return _function_decompose(bd, fn)


def resolvent_decompose(bd: BlockDecomposition, z: complex) -> dict:
    check_resolvent_point(bd.spectral.values, z)
    return _function_decompose(bd, kernel_function("green", z))


def _function_decompose(bd: BlockDecomposition, fn) -> dict:
    full = bd.conjugated(bd.spectral.apply(fn))
    per_block = {r.name: bd.block_spectra[r.name].apply(fn) for r in bd.dual.irreps}
    deviation = float(np.max(np.abs(full - bd.block_diagonal(fn))))
    return {"blocks": per_block, "deviation": deviation}


# -----------------------------------------------------------------------------
# kernels
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelTable:
    """A kernel on the covering graph.

    ``matrix`` is indexed by ``(y, a)`` for periodic kernels and by
    ``(y, a, i)`` for equivariant kernels (irrep index fastest).
    """
    kind: KernelKind
    parameter: complex
    matrix: np.ndarray
    fiber_dim: int
    irrep_dim: int = 1
    irrep_name: str | None = None

    def block(self, y1: int, y2: int) -> np.ndarray:
        """The ``(d*D) x (d*D)`` block for the covering vertices y1, y2."""
        b = self.fiber_dim * self.irrep_dim
        return self.matrix[y1 * b:(y1 + 1) * b, y2 * b:(y2 + 1) * b]


def periodic_kernel(m: CoveringModel, kind: KernelKind, param, spectral: Spectral | None = None) -> KernelTable:
    sp = spectral or Spectral.of(m.h_tilde)
    if kind == "green":
        check_resolvent_point(sp.values, complex(param))
    return KernelTable(kind, complex(param), sp.apply(kernel_function(kind, param)), m.fiber_dim)


def reconstruct_kernel(m: CoveringModel, irrep: UnitaryIrrep, periodic: KernelTable) -> KernelTable:
    """``sum_g kron(W_g K, L(g))``."""
    mat = sum(np.kron(m.translations[g] @ periodic.matrix, irrep(g)) for g in range(m.group.order))
    return KernelTable(periodic.kind, periodic.parameter, mat, m.fiber_dim, irrep.dim, irrep.name)


def reconstruct_kernel_alternative(m: CoveringModel, irrep: UnitaryIrrep, periodic: KernelTable) -> KernelTable:
    """Second form, acting on the source argument:

    ``sum_g K(y1, g^-1 y2) Psi_g(g^-1 y2)^* (x) L(g^-1)``, i.e. ``sum_g kron(K W_g^*, L(g)^*)``.
    """
    mat = sum(np.kron(periodic.matrix @ m.translations[g].conj().T, irrep(g).conj().T)
              for g in range(m.group.order))
    return KernelTable(periodic.kind, periodic.parameter, mat, m.fiber_dim, irrep.dim, irrep.name)


def direct_equivariant_kernel(m: CoveringModel, irrep: UnitaryIrrep, kind: KernelKind, param) -> KernelTable:
    """The same kernel computed from ``f(H^L)`` alone.

    With E the identity-sheet embedding and R the restriction to the identity
    sheet, the kernel is ``E f(H^L) R A`` where ``A = sum_g kron(W_g, L(g))``.
    Since ``A R^* = E`` this is ``E f(H^L) E^*``.
    """
    h = build_h_lambda(m, irrep)
    sp = Spectral.of(h)
    if kind == "green":
        check_resolvent_point(sp.values, complex(param))
    emb = equivariant_basis(m, irrep)
    mat = emb @ sp.apply(kernel_function(kind, param)) @ emb.conj().T
    return KernelTable(kind, complex(param), mat, m.fiber_dim, irrep.dim, irrep.name)


def reconstruct_propagator(m: CoveringModel, irrep: UnitaryIrrep, t: float,
                           spectral: Spectral | None = None) -> KernelTable:
    return reconstruct_kernel(m, irrep, periodic_kernel(m, "propagator", t, spectral))


def reconstruct_green(m: CoveringModel, irrep: UnitaryIrrep, z: complex,
                      spectral: Spectral | None = None, alternative: bool = False) -> KernelTable:
    per = periodic_kernel(m, "green", z, spectral)
    if alternative:
        return reconstruct_kernel_alternative(m, irrep, per)
    return reconstruct_kernel(m, irrep, per)


def equivariance_defect(m: CoveringModel, irrep: UnitaryIrrep, kernel: KernelTable) -> float:
    """Max violation of the target and source transformation rules.

    Target: ``(W_g (x) 1) K = (1 (x) L(g^-1)) K``.
    Source: ``K (W_g (x) 1)^* = K (1 (x) L(g))``.
    """
    n = m.dim
    worst = 0.0
    for g in range(m.group.order):
        wg = np.kron(m.translations[g], np.eye(irrep.dim))
        lg = irrep(g)
        left = np.kron(np.eye(n), lg.conj().T)
        right = np.kron(np.eye(n), lg)
        worst = max(worst,
                    float(np.max(np.abs(wg @ kernel.matrix - left @ kernel.matrix))),
                    float(np.max(np.abs(kernel.matrix @ wg.conj().T - kernel.matrix @ right))))
    return worst


def invariance_defect(m: CoveringModel, kernel: KernelTable) -> float:
    """Max over g of ``|W_g K W_g^* - K|``."""
    return max(float(np.max(np.abs(w @ kernel.matrix @ w.conj().T - kernel.matrix)))
               for w in m.translations)


def fourier_round_trip(m: CoveringModel, dual: DualSpace, periodic: KernelTable,
                       phi1: np.ndarray, phi2: np.ndarray) -> dict:
    """Pair the periodic kernel against two test vectors on both sides of the Fourier transform.

    ``F(g) = <W_{g^-1} phi1, K phi2>`` on the group and
    ``G(L) = K^L(conj(phi1) (x) phi2)`` on the dual, evaluated from the
    reconstructed equivariant kernel.  Returns deviations of ``G - F[F]``
    and ``F - F^-1[G]``.
    """
    kphi = periodic.matrix @ phi2
    values = np.array([np.vdot(m.translations[m.group.inverses[g]] @ phi1, kphi)
                       for g in range(m.group.order)])
    paired = []
    for r in dual.irreps:
        big = reconstruct_kernel(m, r, periodic).matrix
        shaped = big.reshape(m.dim, r.dim, m.dim, r.dim)
        paired.append(np.einsum("x,xiyj,y->ij", phi1.conj(), shaped, phi2))
    forward = fourier(dual, values)
    back = inverse_fourier(dual, paired)
    return {
        "forward": max(float(np.max(np.abs(a - b))) for a, b in zip(forward, paired)),
        "inverse": float(np.max(np.abs(back - values))),
    }


def trivialized_green(m: CoveringModel, irrep: UnitaryIrrep, z: complex,
                      section_phases: np.ndarray | None = None,
                      spectral: Spectral | None = None) -> np.ndarray:
    """Green function of the twisted operator in the frame of a nowhere-vanishing section.

    Applies to models with trivial cocycle and a one-dimensional irrep.  The
    section ``eta(g, v) = L(g) exp(i theta_v)`` is equivariant, and between
    identity-sheet vertices the kernel reads

        G(y1, y2) = conj(eta(y1)) eta(y2) sum_g L(g) G~(g^-1 y1, y2).

    The sum runs over covering vertices directly rather than through the
    magnetic translation matrices.  With theta = 0 the section is constant on
    the identity sheet and the result must coincide with the sheet block of
    the reconstructed kernel.
    """
    if irrep.dim != 1:
        raise ModelError("the trivialized formula needs a one-dimensional irrep")
    if np.max(np.abs(m.cocycle - np.eye(m.fiber_dim))) > 0:
        raise ModelError("the trivialized formula needs a trivial cocycle")
    nf, d = m.n_vertices, m.fiber_dim
    theta = np.zeros(nf) if section_phases is None else np.asarray(section_phases, dtype=float)
    sp = spectral or Spectral.of(m.h_tilde)
    check_resolvent_point(sp.values, complex(z))
    per = sp.apply(kernel_function("green", z)).reshape(m.n_cover, d, m.n_cover, d)
    grp = m.group
    out = np.zeros((nf, d, nf, d), dtype=complex)
    for v1 in range(nf):
        for v2 in range(nf):
            y2 = m.sheet[v2]
            acc = np.zeros((d, d), dtype=complex)
            for g in range(grp.order):
                y1 = m.action[grp.inverses[g], m.sheet[v1]]
                acc += irrep(g)[0, 0] * per[y1, :, y2, :]
            eta1 = np.exp(1j * theta[v1])
            eta2 = np.exp(1j * theta[v2])
            out[v1, :, v2, :] = np.conj(eta1) * eta2 * acc
    return out.reshape(nf * d, nf * d)


def sheet_resolvent(m: CoveringModel, irrep: UnitaryIrrep, z: complex,
                    section_phases: np.ndarray | None = None) -> np.ndarray:
    """Oracle for ``trivialized_green``: the resolvent of ``D^* H^L D``, D = diag(exp(i theta))."""
    nf, d = m.n_vertices, m.fiber_dim
    theta = np.zeros(nf) if section_phases is None else np.asarray(section_phases, dtype=float)
    gauge = np.diag(np.repeat(np.exp(1j * theta), d * irrep.dim))
    h = gauge.conj().T @ build_h_lambda(m, irrep) @ gauge
    sp = Spectral.of(h)
    check_resolvent_point(sp.values, z)
    return sp.apply(kernel_function("green", z))


# -----------------------------------------------------------------------------
# abelian reduction on the integer lattice
# -----------------------------------------------------------------------------

def lattice_decay(z: complex) -> complex:
    """Root r of ``r^2 - (2 - z) r + 1 = 0`` with ``|r| < 1``."""
    b = 2.0 - complex(z)
    s = np.sqrt(b * b - 4.0)
    r1, r2 = (b - s) / 2.0, (b + s) / 2.0
    return r1 if abs(r1) < abs(r2) else r2


def lattice_green(z: complex, distance) -> np.ndarray:
    """Resolvent kernel of the discrete Laplacian on Z at separation ``distance``."""
    r = lattice_decay(z)
    return r ** np.abs(np.asarray(distance)) / (1.0 / r - r)


def cycle_laplacian(n: int) -> np.ndarray:
    h = 2.0 * np.eye(n)
    idx = np.arange(n)
    h[idx, (idx + 1) % n] -= 1.0
    h[idx, (idx - 1) % n] -= 1.0
    return h


def periodized_green(n: int, z: complex, truncation: int) -> np.ndarray:
    """``sum_{|k| <= K} G_Z(m + k n, m')`` for all m, m' in the cycle."""
    m = np.arange(n)
    sep = m[:, None] - m[None, :]
    k = np.arange(-truncation, truncation + 1)
    return lattice_green(z, sep[None, :, :] + n * k[:, None, None]).sum(axis=0)


@dataclass(frozen=True)
class AbelianReductionReport:
    n: int
    z: complex
    truncation: int
    decay: complex
    max_error: float
    tail_estimate: float
    error_curve: list[tuple[int, float]]
    fitted_rate: float | None
    predicted_rate: float
    l1_norm: float
    l1_bound: float
    heat_min: float
    heat_row_sum_max: float
    laplace_defect: float

    @property
    def passed(self) -> bool:
        return self.max_error <= 1e-10 and self.l1_norm <= self.l1_bound * (1 + 1e-12)


def abelian_reduction_green(n: int, z: complex, truncation: int, heat_time: float = 1.0) -> AbelianReductionReport:
    z = complex(z)
    if z.real >= 0:
        raise InvalidSpectralParameter(f"need Re z < 0, got {z}")
    if n < 3 or truncation < 1:
        raise ValueError("need n >= 3 and K >= 1")
    h = cycle_laplacian(n)
    direct = np.linalg.inv(h - z * np.eye(n))
    r = lattice_decay(z)
    a = abs(r)
    err = float(np.max(np.abs(periodized_green(n, z, truncation) - direct)))
    tail = 2.0 * a ** ((truncation + 1) * n - (n - 1)) / ((1.0 - a ** n) * abs(1.0 / r - r))

    curve = [(k, float(np.max(np.abs(periodized_green(n, z, k) - direct)))) for k in range(1, truncation + 1)]
    usable = [(k, e) for k, e in curve if e > 1e-13]
    fitted = None
    if len(usable) >= 2:
        slope = np.polyfit([k for k, _ in usable], np.log([e for _, e in usable]), 1)[0]
        fitted = float(np.exp(slope / n))

    l1 = float(np.max(np.sum(np.abs(direct), axis=0)))
    sp = Spectral.of(h)
    heat = sp.apply(lambda w: np.exp(-heat_time * w).astype(complex)).real
    laplace, _ = quad_vec(lambda t: np.exp(t * z) * sp.apply(lambda w: np.exp(-t * w).astype(complex)),
                          0.0, np.inf, epsabs=1e-13, epsrel=1e-11)
    return AbelianReductionReport(
        n=n, z=z, truncation=truncation, decay=r, max_error=err, tail_estimate=tail,
        error_curve=curve, fitted_rate=fitted, predicted_rate=a,
        l1_norm=l1, l1_bound=1.0 / abs(z.real),
        heat_min=float(heat.min()), heat_row_sum_max=float(heat.sum(axis=1).max()),
        laplace_defect=float(np.max(np.abs(laplace - direct))),
    )
