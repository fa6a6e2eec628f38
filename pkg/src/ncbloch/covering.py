"""
Finite covering models.

A quotient graph F with fibre C^d is lifted to the covering graph
Gamma x F.  Covering vertex ``y = (g, v)`` has index ``g * n_F + v`` and the
deck group acts from the left, ``r . (g, v) = (r g, v)``.  A quotient edge
``(u, v, hopping, lift)`` lifts to the edges ``(g, u) -- (g lift, v)`` for all g.

The fibre action is a unitary cocycle ``Psi[g, y]`` (d x d) with
``Psi_{g1}(g2 . y) Psi_{g2}(y) = Psi_{g1 g2}(y)``, and the magnetic
translations are ``(W_g phi)(y) = Psi_g(g^-1 . y) phi(g^-1 . y)``.

Vectors on the covering carry the index ``(y, a)`` with the fibre index a
fastest.  Sections twisted by an irrep of dimension D append the irrep index
i as the fastest index, so that ``kron(W_g, L(g))`` acts on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import CocycleViolation, DimensionMismatch, DisconnectedCover, ModelError
from .groups import DualSpace, FiniteGroup, UnitaryIrrep

TOL = 1e-12


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    hopping: np.ndarray
    lift: int


@dataclass(frozen=True)
class QuotientModel:
    group: FiniteGroup
    n_vertices: int
    fiber_dim: int
    edges: tuple[Edge, ...]
    potential: np.ndarray  # (n_vertices, d, d), Hermitian


def make_quotient(group: FiniteGroup, n_vertices: int, fiber_dim: int,
                  edges: Sequence, potential=None) -> QuotientModel:
    """Validate quotient data.  ``edges`` holds Edge objects or (u, v, hopping, lift) tuples."""
    d = int(fiber_dim)
    if n_vertices < 1 or d < 1:
        raise ModelError("need at least one vertex and fiber_dim >= 1")
    clean = []
    for k, e in enumerate(edges):
        if not isinstance(e, Edge):
            e = Edge(*e)
        h = np.asarray(e.hopping, dtype=complex)
        if h.ndim == 0:
            h = h * np.eye(d)
        if h.shape != (d, d):
            raise DimensionMismatch(f"edge {k}: hopping must be {d}x{d}, got {h.shape}")
        if not np.any(np.abs(h) > 0):
            raise ModelError(f"edge {k}: zero hopping is not allowed")
        if not (0 <= e.u < n_vertices and 0 <= e.v < n_vertices):
            raise ModelError(f"edge {k}: endpoint out of range")
        if not 0 <= e.lift < group.order:
            raise ModelError(f"edge {k}: lift {e.lift} is not a group element")
        h.setflags(write=False)
        clean.append(Edge(int(e.u), int(e.v), h, int(e.lift)))
    if potential is None:
        pot = np.zeros((n_vertices, d, d), dtype=complex)
    else:
        pot = np.asarray(potential, dtype=complex)
        if pot.ndim == 1:
            pot = pot[:, None, None] * np.eye(d)
        if pot.shape != (n_vertices, d, d):
            raise DimensionMismatch(f"potential must have shape {(n_vertices, d, d)}, got {pot.shape}")
    herm = np.max(np.abs(pot - pot.conj().transpose(0, 2, 1)), initial=0.0)
    if herm > TOL:
        raise ModelError(f"potential is not Hermitian (defect {herm:.2e})")
    pot.setflags(write=False)
    return QuotientModel(group, int(n_vertices), d, tuple(clean), pot)


# -----------------------------------------------------------------------------
# cocycles
# -----------------------------------------------------------------------------

def covering_action(group: FiniteGroup, n_vertices: int) -> np.ndarray:
    """``act[r, y]`` = index of ``r . y`` on Gamma x F."""
    g = np.arange(group.order)
    v = np.arange(n_vertices)
    return (group.table[:, g][:, :, None] * n_vertices + v[None, None, :]).reshape(group.order, -1)


def cocycle_defect(group: FiniteGroup, n_vertices: int, psi: np.ndarray) -> float:
    """Max violation of the composition rule and of ``Psi_e = 1``."""
    act = covering_action(group, n_vertices)
    d = psi.shape[-1]
    worst = float(np.max(np.abs(psi[group.identity_index] - np.eye(d))))
    for g1 in range(group.order):
        for g2 in range(group.order):
            lhs = psi[g1, act[g2]] @ psi[g2]
            worst = max(worst, float(np.max(np.abs(lhs - psi[group.table[g1, g2]]))))
    return worst


def cocycle_from_base(group: FiniteGroup, n_vertices: int, base) -> np.ndarray:
    """Extend ``base[g, v] = Psi_g((e, v))`` to the full table by the composition rule.

    ``Psi_g((h, v)) = Psi_{gh}((e, v)) Psi_h((e, v))^-1``.
    """
    b = np.asarray(base, dtype=complex)
    if b.ndim == 2:
        b = b[..., None, None]
    e = group.identity_index
    if np.max(np.abs(b[e] - np.eye(b.shape[-1]))) > TOL:
        raise CocycleViolation("Psi_e must be the identity on every vertex")
    order, nf, d = group.order, n_vertices, b.shape[-1]
    psi = np.empty((order, order * nf, d, d), dtype=complex)
    for g in range(order):
        for h in range(order):
            gh = group.table[g, h]
            for v in range(nf):
                psi[g, h * nf + v] = b[gh, v] @ b[h, v].conj().T
    return psi


def make_cocycle(group: FiniteGroup, n_vertices: int, fiber_dim: int, spec: Any = "trivial") -> np.ndarray:
    """Full cocycle table ``psi[g, y]`` (d x d unitaries) from a compact description.

    ``spec`` is ``"trivial"``, an array, or a dict ``{"kind": "u1", "phases": ...}``
    / ``{"kind": "unitary", "matrices": ...}``.  Tables indexed by quotient
    vertices are extended from the identity sheet; tables indexed by covering
    vertices are validated as given.
    """
    d = fiber_dim
    n_cov = group.order * n_vertices
    if isinstance(spec, str):
        if spec != "trivial":
            raise ModelError(f"unknown cocycle spec {spec!r}")
        return np.broadcast_to(np.eye(d, dtype=complex), (group.order, n_cov, d, d)).copy()
    if isinstance(spec, dict):
        kind = spec.get("kind", "trivial")
        if kind == "trivial":
            return make_cocycle(group, n_vertices, d, "trivial")
        if kind == "u1":
            table = np.exp(1j * np.asarray(spec["phases"], dtype=float))[..., None, None] * np.eye(d)
        elif kind == "unitary":
            table = np.asarray(spec["matrices"], dtype=complex)
        else:
            raise ModelError(f"unknown cocycle kind {kind!r}")
    else:
        table = np.asarray(spec, dtype=complex)
        if table.ndim == 2:
            table = table[..., None, None] * np.eye(d)
    if table.shape[0] != group.order or table.shape[-2:] != (d, d):
        raise DimensionMismatch(f"cocycle table has shape {table.shape}")
    unit = np.max(np.abs(np.einsum("...ba,...bc->...ac", table.conj(), table) - np.eye(d)))
    if unit > TOL:
        raise CocycleViolation(f"cocycle values are not unitary (defect {unit:.2e})")
    if table.shape[1] == n_vertices and n_vertices != n_cov:
        return cocycle_from_base(group, n_vertices, table)
    if table.shape[1] != n_cov:
        raise DimensionMismatch(f"cocycle table must cover {n_vertices} or {n_cov} vertices")
    err = cocycle_defect(group, n_vertices, table)
    if err > TOL:
        raise CocycleViolation(f"composition rule violated by {err:.2e}")
    return table


# -----------------------------------------------------------------------------
# covering model
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class CoveringModel:
    quotient: QuotientModel
    cocycle: np.ndarray  # (order, n_cov, d, d)
    h_tilde: np.ndarray  # (N, N)

    @property
    def group(self) -> FiniteGroup:
        return self.quotient.group

    @property
    def n_vertices(self) -> int:
        return self.quotient.n_vertices

    @property
    def fiber_dim(self) -> int:
        return self.quotient.fiber_dim

    @property
    def n_cover(self) -> int:
        return self.group.order * self.n_vertices

    @property
    def dim(self) -> int:
        return self.n_cover * self.fiber_dim

    def vertex(self, g: int, v: int) -> int:
        return g * self.n_vertices + v

    def split(self, y: int) -> tuple[int, int]:
        return divmod(y, self.n_vertices)

    @cached_property
    def action(self) -> np.ndarray:
        return covering_action(self.group, self.n_vertices)

    @cached_property
    def sheet(self) -> np.ndarray:
        """Covering vertices of the identity sheet, in quotient-vertex order."""
        e = self.group.identity_index
        return e * self.n_vertices + np.arange(self.n_vertices)

    @cached_property
    def translations(self) -> np.ndarray:
        """Stack of all magnetic translations, shape (order, N, N)."""
        return np.array([_translation(self, g) for g in range(self.group.order)])

    def fiber_rows(self, vertices) -> np.ndarray:
        d = self.fiber_dim
        return (np.asarray(vertices)[:, None] * d + np.arange(d)[None, :]).ravel()


def _translation(m: CoveringModel, g: int) -> np.ndarray:
    d = m.fiber_dim
    w = np.zeros((m.dim, m.dim), dtype=complex)
    for y in range(m.n_cover):
        gy = m.action[g, y]
        w[gy * d:(gy + 1) * d, y * d:(y + 1) * d] = m.cocycle[g, y]
    return w


def build_covering_model(q: QuotientModel, cocycle_spec: Any = "trivial") -> CoveringModel:
    """Assemble the periodic operator on Gamma x F.

    In the frame of the identity sheet the operator has diagonal blocks
    ``(sum of incident |hopping|) * 1 + V(v)`` and off-diagonal blocks
    ``-hopping`` along every lifted edge.  The cocycle enters through the
    gauge ``U(g, v) = Psi_g((e, v))``: blocks become ``U(y1) B U(y2)^*``.
    Using the spectral norm of the hopping as the degree weight keeps the
    kinetic part positive semidefinite.
    """
    grp = q.group
    nf, d = q.n_vertices, q.fiber_dim
    n_cov = grp.order * nf
    psi = make_cocycle(grp, nf, d, cocycle_spec)

    h0 = np.zeros((n_cov, n_cov, d, d), dtype=complex)
    weight = np.zeros(n_cov)
    rows, cols = [], []
    for e in q.edges:
        w = np.linalg.norm(e.hopping, 2)
        for g in range(grp.order):
            y1 = g * nf + e.u
            y2 = grp.table[g, e.lift] * nf + e.v
            h0[y1, y2] -= e.hopping
            h0[y2, y1] -= e.hopping.conj().T
            weight[y1] += w
            weight[y2] += w
            rows += [y1, y2]
            cols += [y2, y1]
    for y in range(n_cov):
        h0[y, y] += weight[y] * np.eye(d) + q.potential[y % nf]

    if n_cov > 1:
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_cov, n_cov))
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise DisconnectedCover(f"covering graph has {n_comp} components")

    e = grp.identity_index
    gauge = np.array([psi[g, e * nf + v] for g in range(grp.order) for v in range(nf)])
    h = np.einsum("xab,xybc,ydc->xayd", gauge, h0, gauge.conj())
    h = h.reshape(n_cov * d, n_cov * d)
    h = 0.5 * (h + h.conj().T)
    h.setflags(write=False)
    model = CoveringModel(q, psi, h)
    return model


def magnetic_translation(m: CoveringModel, g: int) -> np.ndarray:
    if not 0 <= g < m.group.order:
        raise IndexError(f"group element {g} out of range")
    return m.translations[g]


def periodicity_defect(m: CoveringModel, op: np.ndarray | None = None) -> float:
    """``max_g ||[W_g, op]||_max`` for op defaulting to h_tilde."""
    op = m.h_tilde if op is None else op
    return max(float(np.max(np.abs(w @ op - op @ w))) for w in m.translations)


def representation_defect(m: CoveringModel) -> float:
    """Deviation of ``g -> W_g`` from a unitary representation."""
    ws = m.translations
    eye = np.eye(m.dim)
    worst = max(float(np.max(np.abs(w.conj().T @ w - eye))) for w in ws)
    for a in range(m.group.order):
        for b in range(m.group.order):
            worst = max(worst, float(np.max(np.abs(ws[a] @ ws[b] - ws[m.group.table[a, b]]))))
    return worst


# -----------------------------------------------------------------------------
# equivariant sections and the averaging map
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class EquivariantSection:
    values: np.ndarray  # (n_cov, d * D)
    irrep: UnitaryIrrep

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def defect(self, m: CoveringModel) -> float:
        """Max violation of ``phi(g . y) = (Psi_g(y) (x) L(g)) phi(y)``."""
        worst = 0.0
        for g in range(m.group.order):
            lhs = self.values[m.action[g]]
            blocks = np.array([np.kron(m.cocycle[g, y], self.irrep(g)) for y in range(m.n_cover)])
            rhs = np.einsum("yab,yb->ya", blocks, self.values)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst


def twisted_translation(m: CoveringModel, irrep: UnitaryIrrep, g: int) -> np.ndarray:
    return np.kron(m.translations[g], irrep(g))


def averaging_operator(m: CoveringModel, irrep: UnitaryIrrep) -> np.ndarray:
    """Matrix of ``sigma -> sum_g (W_g (x) L(g)) sigma``."""
    return sum(twisted_translation(m, irrep, g) for g in range(m.group.order))


def averaging_phi_lambda(m: CoveringModel, irrep: UnitaryIrrep, sigma) -> EquivariantSection:
    s = np.asarray(sigma, dtype=complex).reshape(-1)
    size = m.dim * irrep.dim
    if s.size != size:
        raise DimensionMismatch(f"section must have {size} components, got {s.size}")
    out = np.zeros(size, dtype=complex)
    for g in range(m.group.order):
        out += twisted_translation(m, irrep, g) @ s
    return EquivariantSection(out.reshape(m.n_cover, -1), irrep)


def equivariant_basis(m: CoveringModel, irrep: UnitaryIrrep) -> np.ndarray:
    """Embedding of identity-sheet data into equivariant sections.

    Column ``(v, a, i)`` is the equivariant section whose value on the
    identity sheet is the unit vector at vertex v, fibre a, irrep index i;
    on sheet g it equals ``(Psi_g((e, v)) (x) L(g)) e_{a,i}``.
    """
    nf, d, dl = m.n_vertices, m.fiber_dim, irrep.dim
    e = m.group.identity_index
    block = d * dl
    emb = np.zeros((m.n_cover * block, nf * block), dtype=complex)
    for g in range(m.group.order):
        for v in range(nf):
            y = m.action[g, e * nf + v]
            emb[y * block:(y + 1) * block, v * block:(v + 1) * block] = np.kron(
                m.cocycle[g, e * nf + v], irrep(g))
    return emb


def sheet_rows(m: CoveringModel, irrep_dim: int) -> np.ndarray:
    block = m.fiber_dim * irrep_dim
    return (m.sheet[:, None] * block + np.arange(block)[None, :]).ravel()


def restrict_to_sheet(m: CoveringModel, section) -> np.ndarray:
    """Identity-sheet coordinates of an equivariant section."""
    if isinstance(section, EquivariantSection):
        vals, dl = section.values, section.irrep.dim
    else:
        vals = np.asarray(section).reshape(m.n_cover, -1)
        dl = vals.shape[1] // m.fiber_dim
    return vals.reshape(-1)[sheet_rows(m, dl)]


def equivariant_projector(m: CoveringModel, irrep: UnitaryIrrep) -> np.ndarray:
    """Orthogonal projector onto the equivariant subspace, ``averaging / |Gamma|``."""
    return averaging_operator(m, irrep) / m.group.order


def equivariant_dimension(m: CoveringModel, irrep: UnitaryIrrep) -> int:
    return int(round(np.trace(equivariant_projector(m, irrep)).real))


def build_h_lambda(m: CoveringModel, irrep: UnitaryIrrep) -> np.ndarray:
    """The reduced operator in identity-sheet coordinates, size ``n_F * d * D``.

    Equivariant sections are determined by their identity-sheet values and
    ``h_tilde (x) 1`` preserves equivariance, so the reduced operator is
    ``R (h_tilde (x) 1) E``; with ``E^* E = |Gamma|`` this equals the
    manifestly Hermitian ``E^* (h_tilde (x) 1) E / |Gamma|``.
    """
    emb = equivariant_basis(m, irrep)
    big = np.kron(m.h_tilde, np.eye(irrep.dim))
    h = emb.conj().T @ big @ emb / m.group.order
    return 0.5 * (h + h.conj().T)


# -----------------------------------------------------------------------------
# the Bloch map
# -----------------------------------------------------------------------------

def bloch_transform(m: CoveringModel, dual: DualSpace, f) -> list[np.ndarray]:
    """Components ``Phi[f](L)(y) = sum_g (W_g f)(y) (x) L(g)``, shape (n_cov, d, D, D) each."""
    vec = np.asarray(f, dtype=complex).reshape(-1)
    if vec.size != m.dim:
        raise DimensionMismatch(f"f must have {m.dim} components, got {vec.size}")
    moved = np.einsum("gxy,y->gx", m.translations, vec).reshape(m.group.order, m.n_cover, m.fiber_dim)
    return [np.einsum("gya,gij->yaij", moved, r.matrices) for r in dual.irreps]


def bloch_norm_sq(m: CoveringModel, dual: DualSpace, comps: Sequence[np.ndarray]) -> float:
    """Plancherel-weighted norm, integrating over one fundamental domain."""
    return float(sum(float(w) * np.sum(np.abs(c[m.sheet]) ** 2) for w, c in zip(dual.weights, comps)))


def bloch_matrix(m: CoveringModel, dual: DualSpace) -> np.ndarray:
    """The Bloch map as an N x N matrix.

    Rows are grouped by irrep; within an irrep block the row index is
    ``(v, a, i, j)`` with j (the multiplicity index) fastest, so that the
    block of ``Phi h Phi^*`` equals ``kron(H^L, 1_D)``.
    """
    d = m.fiber_dim
    rows = m.fiber_rows(m.sheet)
    ws = m.translations[:, rows, :]  # (order, n_F * d, N)
    blocks = []
    for w, r in zip(dual.weights, dual.irreps):
        blk = np.einsum("gpx,gij->pijx", ws, r.matrices).reshape(-1, m.dim)
        blocks.append(np.sqrt(float(w)) * blk)
    phi = np.vstack(blocks)
    assert phi.shape == (m.dim, m.dim), (phi.shape, d)
    return phi


# -----------------------------------------------------------------------------
# built-in demo models
# -----------------------------------------------------------------------------

def _random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (z + z.conj().T)


def random_model(dual: DualSpace, n_vertices: int, fiber_dim: int, seed: int,
                 generators: Sequence[int] | None = None, cocycle: str = "unitary") -> CoveringModel:
    """Seeded random periodic model: a ring plus one self-loop per generator.

    Ring edges carry random lifts; the self-loops at vertex 0 carry the given
    generators (default: every non-identity element), which keeps the cover
    connected.
    """
    rng = np.random.default_rng(seed)
    grp = dual.group
    d = fiber_dim
    if generators is None:
        generators = [g for g in range(grp.order) if g != grp.identity_index]
    edges = []
    for v in range(n_vertices - 1):
        edges.append((v, v + 1, rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)),
                      int(rng.integers(grp.order))))
    if n_vertices > 2:
        edges.append((n_vertices - 1, 0, rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)),
                      int(rng.integers(grp.order))))
    for g in generators:
        edges.append((0, 0, rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)), int(g)))
    pot = np.array([_random_hermitian(rng, d) for _ in range(n_vertices)])
    q = make_quotient(grp, n_vertices, d, edges, pot)
    if cocycle == "trivial":
        spec: Any = "trivial"
    else:
        base = np.array([[_random_unitary(rng, d) for _ in range(n_vertices)] for _ in range(grp.order)])
        base[grp.identity_index] = np.eye(d)
        if cocycle == "u1":
            base = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(grp.order, n_vertices)))[..., None, None] * np.eye(d)
            base[grp.identity_index] = np.eye(d)
        spec = base
    return build_covering_model(q, spec)


def two_sheet_model(c: float = 2.0) -> CoveringModel:
    """One vertex, one self-loop lifting to the generator of Z2.

    With hopping 1/2 the two lifted edges give ``h_tilde = [[c, -1], [-1, c]]``,
    where ``c = degree weight (1) + potential``.
    """
    from .groups import cyclic_group

    grp = cyclic_group(2)
    q = make_quotient(grp, 1, 1, [(0, 0, 0.5, 1)], [c - 1.0])
    return build_covering_model(q, "trivial")
