"""
Harmonic analysis on finite groups.

A finite group is stored as a Cayley table on element indices,
``table[i, j] = index of g_i * g_j``.  Irreducible unitary representations
are explicit stacks of matrices, one per element.  The dual space carries the
Plancherel weights ``dim / order`` which make the Fourier transform

    fhat(L) = sum_g f(g) (x) L(g)

unitary, with inversion

    f(s) = sum_L (dim L / order) Tr[L(s)^* fhat(L)].

Group functions are arrays of shape ``(order,)`` (scalar) or ``(order, d)``.
Dual fields are lists with one array per irrep, of shape ``(D, D)`` for scalar
functions and ``(d, D, D)`` otherwise.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EquivalentPair,
    GroupError,
    IncompleteSet,
    NoIdentity,
    NoInverse,
    NotAssociative,
    NotHomomorphism,
    NotIrreducible,
    NotLatinSquare,
    NotUnitary,
)

ALGEBRAIC_TOL = 1e-12
SUM_TOL = 1e-10


# -----------------------------------------------------------------------------
# groups
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteGroup:
    table: np.ndarray
    identity_index: int
    inverses: np.ndarray
    name: str = "group"
    labels: tuple = ()

    @property
    def order(self) -> int:
        return int(self.table.shape[0])

    def mul(self, i: int, j: int) -> int:
        return int(self.table[i, j])

    def inv(self, i: int) -> int:
        return int(self.inverses[i])

    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.table, self.table.T))

    def label(self, i: int) -> str:
        return str(self.labels[i]) if self.labels else str(i)


def validate_group(table, name: str = "group", labels: Sequence = ()) -> FiniteGroup:
    """Check the group axioms on a Cayley table and locate identity and inverses.

    Raises NotLatinSquare, NoIdentity, NoInverse or NotAssociative, each
    naming the offending indices.
    """
    t = np.asarray(table)
    if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] == 0:
        raise NotLatinSquare(f"table must be a non-empty square array, got shape {t.shape}")
    if not np.issubdtype(t.dtype, np.integer):
        if not np.all(np.equal(np.mod(t, 1), 0)):
            raise NotLatinSquare("table entries must be integers")
        t = t.astype(np.int64)
    t = t.astype(np.int64)
    n = t.shape[0]
    bad = np.argwhere((t < 0) | (t >= n))
    if bad.size:
        i, j = bad[0]
        raise NotLatinSquare(f"entry table[{i}][{j}]={t[i, j]} out of range 0..{n - 1}")

    full = np.arange(n)
    for i in range(n):
        if not np.array_equal(np.sort(t[i]), full):
            raise NotLatinSquare(f"row {i} is not a permutation of 0..{n - 1}")
        if not np.array_equal(np.sort(t[:, i]), full):
            raise NotLatinSquare(f"column {i} is not a permutation of 0..{n - 1}")

    ident = None
    for e in range(n):
        if np.array_equal(t[e], full) and np.array_equal(t[:, e], full):
            ident = e
            break
    if ident is None:
        raise NoIdentity("no element acts as a two-sided identity")

    inverses = np.empty(n, dtype=np.int64)
    for i in range(n):
        right = np.flatnonzero(t[i] == ident)
        left = np.flatnonzero(t[:, i] == ident)
        if right.size != 1 or left.size != 1 or right[0] != left[0]:
            raise NoInverse(f"element {i} has no two-sided inverse")
        inverses[i] = right[0]

    # (g_i g_j) g_k == g_i (g_j g_k), all triples at once
    lhs = t[t[:, :, None], full[None, None, :]]
    rhs = t[full[:, None, None], t[None, :, :]]
    bad = np.argwhere(lhs != rhs)
    if bad.size:
        i, j, k = bad[0]
        raise NotAssociative(f"(g{i} g{j}) g{k} != g{i} (g{j} g{k})")

    t.setflags(write=False)
    inverses.setflags(write=False)
    return FiniteGroup(t, int(ident), inverses, name=name, labels=tuple(labels))


def cyclic_group(n: int) -> FiniteGroup:
    if n < 1:
        raise GroupError("cyclic group order must be positive")
    k = np.arange(n)
    return validate_group((k[:, None] + k[None, :]) % n, name=f"Z{n}", labels=[f"{m}" for m in k])


def _perm_group(perms: list[tuple[int, ...]], name: str) -> FiniteGroup:
    index = {p: i for i, p in enumerate(perms)}
    n = len(perms)
    table = np.empty((n, n), dtype=np.int64)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            # (p q)(k) = p(q(k))
            table[i, j] = index[tuple(p[q[k]] for k in range(len(q)))]
    return validate_group(table, name=name, labels=["".join(map(str, p)) for p in perms])


def symmetric_group_s3() -> FiniteGroup:
    return _perm_group(list(itertools.permutations(range(3))), "S3")


def _d4_elements() -> list[tuple[int, int]]:
    # r^k s^e, k = 0..3, e = 0, 1
    return [(k, e) for e in (0, 1) for k in range(4)]


def dihedral_group_d4() -> FiniteGroup:
    elems = _d4_elements()
    index = {g: i for i, g in enumerate(elems)}
    table = np.empty((8, 8), dtype=np.int64)
    for i, (a, b) in enumerate(elems):
        for j, (c, d) in enumerate(elems):
            # s r = r^-1 s
            table[i, j] = index[((a + (-1) ** b * c) % 4, (b + d) % 2)]
    labels = [(f"r{k}" if k else "") + ("s" if e else "") or "e" for k, e in elems]
    return validate_group(table, name="D4", labels=labels)


# -----------------------------------------------------------------------------
# representations
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitaryIrrep:
    matrices: np.ndarray  # (order, dim, dim)
    name: str = ""

    @property
    def dim(self) -> int:
        return int(self.matrices.shape[1])

    def __call__(self, g: int) -> np.ndarray:
        return self.matrices[g]

    def character(self) -> np.ndarray:
        return np.trace(self.matrices, axis1=1, axis2=2)


def make_irrep(group: FiniteGroup, matrices, name: str = "") -> UnitaryIrrep:
    """Validate unitarity, the homomorphism property and irreducibility."""
    m = np.asarray(matrices, dtype=complex)
    if m.ndim == 1:
        m = m[:, None, None]
    if m.ndim != 3 or m.shape[0] != group.order or m.shape[1] != m.shape[2]:
        raise DimensionMismatch(
            f"irrep matrices must have shape (order={group.order}, D, D), got {m.shape}")
    d = m.shape[1]
    eye = np.eye(d)
    for g in range(group.order):
        err = np.max(np.abs(m[g].conj().T @ m[g] - eye))
        if err > ALGEBRAIC_TOL:
            raise NotUnitary(f"{name or 'irrep'}: matrix of element {g} is not unitary (err {err:.2e})")
    prod = np.einsum("iab,jbc->ijac", m, m)
    err = np.abs(prod - m[group.table])
    if err.max() > ALGEBRAIC_TOL:
        i, j = np.unravel_index(np.argmax(err.max(axis=(2, 3))), err.shape[:2])
        raise NotHomomorphism(f"{name or 'irrep'}: L(g{i}) L(g{j}) != L(g{i} g{j})")
    chi = np.trace(m, axis1=1, axis2=2)
    norm = float(np.sum(np.abs(chi) ** 2).real / group.order)
    if abs(norm - 1.0) > SUM_TOL:
        raise NotIrreducible(f"{name or 'irrep'}: character norm {norm:.6f} != 1")
    m.setflags(write=False)
    return UnitaryIrrep(m, name=name)


@dataclass(frozen=True)
class DualSpace:
    group: FiniteGroup
    irreps: tuple[UnitaryIrrep, ...]
    weights: tuple[Fraction, ...] = field(default=())

    @property
    def dims(self) -> list[int]:
        return [r.dim for r in self.irreps]

    def plancherel_mass(self) -> Fraction:
        """Total Plancherel measure of the dual, sum of dim/order (<= 1)."""
        return sum(self.weights, Fraction(0))

    def index(self, name: str) -> int:
        for i, r in enumerate(self.irreps):
            if r.name == name:
                return i
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.irreps)


def build_dual(group: FiniteGroup, irreps: Sequence[UnitaryIrrep]) -> DualSpace:
    irreps = tuple(irreps)
    chars = [r.character() for r in irreps]
    for a, b in itertools.combinations(range(len(irreps)), 2):
        overlap = abs(np.vdot(chars[a], chars[b])) / group.order
        if overlap > SUM_TOL:
            raise EquivalentPair(a, b, overlap)
    total = sum(r.dim ** 2 for r in irreps)
    if total != group.order:
        raise IncompleteSet(f"sum of dim^2 = {total} != |G| = {group.order}")
    weights = tuple(Fraction(r.dim, group.order) for r in irreps)
    assert sum(weights, Fraction(0)) <= 1
    assert sum((w * r.dim for w, r in zip(weights, irreps)), Fraction(0)) == 1
    return DualSpace(group, irreps, weights)


def cyclic_dual(n: int) -> DualSpace:
    g = cyclic_group(n)
    k = np.arange(n)
    irreps = [make_irrep(g, np.exp(2j * np.pi * q * k / n), name=f"chi{q}") for q in range(n)]
    return build_dual(g, irreps)


def s3_dual() -> DualSpace:
    g = symmetric_group_s3()
    perms = list(itertools.permutations(range(3)))
    sign = np.array([np.linalg.det(np.eye(3)[list(p)]) for p in perms]).round()
    # standard irrep: permutation action on the vertices of a triangle
    verts = np.array([[np.cos(2 * np.pi * k / 3), np.sin(2 * np.pi * k / 3)] for k in range(3)])
    basis_inv = np.linalg.inv(verts[:2].T)
    std = np.array([verts[list(p[:2])].T @ basis_inv for p in perms])
    irreps = [
        make_irrep(g, np.ones(6), name="trivial"),
        make_irrep(g, sign, name="sign"),
        make_irrep(g, std, name="standard"),
    ]
    return build_dual(g, irreps)


def d4_dual() -> DualSpace:
    g = dihedral_group_d4()
    elems = _d4_elements()
    irreps = []
    for a, b in [(1, 1), (1, -1), (-1, 1), (-1, -1)]:
        vals = np.array([a ** k * b ** e for k, e in elems], dtype=float)
        irreps.append(make_irrep(g, vals, name=f"chi({a:+d},{b:+d})"))
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    ref = np.diag([1.0, -1.0])
    two = [np.linalg.matrix_power(rot, k) @ np.linalg.matrix_power(ref, e) for k, e in elems]
    irreps.append(make_irrep(g, np.array(two), name="standard"))
    return build_dual(g, irreps)


def trivial_dual() -> DualSpace:
    return cyclic_dual(1)


def builtin_dual(name: str) -> DualSpace:
    """Dual space of a built-in group: ``Z1``..``Z12``, ``D4`` or ``S3``."""
    key = name.strip().upper()
    if key == "S3":
        return s3_dual()
    if key == "D4":
        return d4_dual()
    if key in ("TRIVIAL", "E"):
        return trivial_dual()
    if key.startswith("Z") and key[1:].isdigit() and 1 <= int(key[1:]) <= 12:
        return cyclic_dual(int(key[1:]))
    raise KeyError(f"unknown built-in group {name!r}")


def dual_from_json(doc) -> DualSpace:
    """Build a dual space from ``{"order", "table", "irreps": [{"dim", "matrices"}]}``.

    ``matrices[g][i][j]`` is a ``[re, im]`` pair.  ``doc`` may be a dict, a
    JSON string or a built-in group name.
    """
    if isinstance(doc, str):
        stripped = doc.strip()
        if not stripped.startswith("{"):
            return builtin_dual(stripped)
        doc = json.loads(stripped)
    table = np.asarray(doc["table"], dtype=np.int64)
    if "order" in doc and int(doc["order"]) != table.shape[0]:
        raise DimensionMismatch(f"order {doc['order']} does not match table size {table.shape[0]}")
    group = validate_group(table, name=doc.get("name", "group"))
    irreps = []
    for k, entry in enumerate(doc["irreps"]):
        raw = np.asarray(entry["matrices"], dtype=float)
        mats = raw[..., 0] + 1j * raw[..., 1]
        if mats.shape[1:] != (entry["dim"], entry["dim"]):
            raise DimensionMismatch(f"irrep {k}: matrices do not match declared dim {entry['dim']}")
        irreps.append(make_irrep(group, mats, name=entry.get("name", f"irrep{k}")))
    return build_dual(group, irreps)


def dual_to_json(dual: DualSpace) -> dict:
    out = {
        "name": dual.group.name,
        "order": dual.group.order,
        "table": dual.group.table.tolist(),
        "irreps": [],
    }
    for r in dual.irreps:
        m = r.matrices
        out["irreps"].append({
            "name": r.name,
            "dim": r.dim,
            "matrices": np.stack([m.real, m.imag], axis=-1).tolist(),
        })
    return out


# -----------------------------------------------------------------------------
# Fourier analysis
# -----------------------------------------------------------------------------

def _as_vector_function(dual: DualSpace, f) -> tuple[np.ndarray, bool]:
    arr = np.asarray(f, dtype=complex)
    scalar = arr.ndim == 1
    if scalar:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != dual.group.order:
        raise DimensionMismatch(
            f"group function must have leading dimension {dual.group.order}, got shape {np.shape(f)}")
    return arr, scalar


def fourier(dual: DualSpace, f) -> list[np.ndarray]:
    """Components ``fhat(L) = sum_g f(g) (x) L(g)``."""
    arr, scalar = _as_vector_function(dual, f)
    out = []
    for r in dual.irreps:
        comp = np.einsum("ga,gij->aij", arr, r.matrices)
        out.append(comp[0] if scalar else comp)
    return out


def inverse_fourier(dual: DualSpace, fhat: Sequence[np.ndarray]) -> np.ndarray:
    if len(fhat) != len(dual.irreps):
        raise DimensionMismatch(f"expected {len(dual.irreps)} components, got {len(fhat)}")
    scalar = None
    total = None
    for w, r, comp in zip(dual.weights, dual.irreps, fhat):
        c = np.asarray(comp, dtype=complex)
        is_scalar = c.ndim == 2
        if is_scalar:
            c = c[None]
        if c.ndim != 3 or c.shape[1:] != (r.dim, r.dim):
            raise DimensionMismatch(f"component for {r.name or 'irrep'} has shape {np.shape(comp)}")
        if scalar is None:
            scalar = is_scalar
        elif scalar != is_scalar or c.shape[0] != total.shape[1]:
            raise DimensionMismatch("components disagree on the value dimension")
        # Tr[L(s)^* c] = sum_ij conj(L(s)_ij) c_ij
        term = float(w) * np.einsum("sij,aij->sa", r.matrices.conj(), c)
        total = term if total is None else total + term
    return total[:, 0] if scalar else total


def convolve(group: FiniteGroup, g, h) -> np.ndarray:
    """``(g * h)(s) = sum_x g(x) h(x^-1 s)``, componentwise for vector values."""
    a = np.asarray(g, dtype=complex)
    b = np.asarray(h, dtype=complex)
    if a.shape != b.shape or a.shape[0] != group.order:
        raise DimensionMismatch(f"cannot convolve shapes {a.shape} and {b.shape}")
    out = np.zeros_like(a)
    for x in range(group.order):
        xinv = group.inv(x)
        # s -> index of x^-1 s
        out += a[x] * b[group.table[xinv]]
    return out


def translate(group: FiniteGroup, f, r: int) -> np.ndarray:
    """The function ``g -> f(r g)``."""
    return np.asarray(f)[group.table[r]]


def plancherel_norm_sq(dual: DualSpace, fhat: Sequence[np.ndarray]) -> float:
    return float(sum(float(w) * np.sum(np.abs(c) ** 2) for w, c in zip(dual.weights, fhat)))


def schur_defect(dual: DualSpace) -> float:
    """Max deviation from the Schur orthogonality relations."""
    n = dual.group.order
    worst = 0.0
    for a, ra in enumerate(dual.irreps):
        for b, rb in enumerate(dual.irreps):
            s = np.einsum("gij,gkl->ijkl", ra.matrices, rb.matrices.conj())
            if a == b:
                d = ra.dim
                expected = (n / d) * np.einsum("ik,jl->ijkl", np.eye(d), np.eye(d))
            else:
                expected = 0.0
            worst = max(worst, float(np.max(np.abs(s - expected))))
    return worst
