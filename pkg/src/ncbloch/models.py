"""
Built-in demo models and the JSON model format.

Model document::

    {"group": "S3" | {"table": ..., "irreps": ...},
     "vertices": 2,                      # or a list of vertex labels
     "fiber_dim": 1,
     "edges": [{"u": 0, "v": 1, "hopping": 1.0, "lift": "r1"}, ...],
     "potential": [0.0, 0.5],            # scalars or d x d matrices
     "cocycle": "trivial" | {"kind": "u1", "phases": [[...]]} | {"kind": "unitary", "matrices": ...}}

Complex numbers are written as ``[re, im]`` pairs.  Lifts are element
indices or element labels.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .covering import CoveringModel, build_covering_model, make_quotient, random_model, two_sheet_model
from .errors import BlochError, ModelLoadError
from .groups import DualSpace, builtin_dual, cyclic_dual, d4_dual, dual_from_json, s3_dual, trivial_dual

BUILTIN_MODELS = ("z2-demo", "s3-demo", "s3-small", "d4-demo", "z6-demo", "trivial-demo")


def builtin_model(name: str, seed: int = 7) -> tuple[CoveringModel, DualSpace]:
    """Seeded demo models.

    ``s3-demo`` has 4 quotient vertices and fibre dimension 2 (N = 48) with a
    random unitary cocycle; ``s3-small`` has 2 vertices and a scalar U(1)
    cocycle.
    """
    name = name.removeprefix("builtin:")
    if name == "z2-demo":
        return two_sheet_model(2.0), cyclic_dual(2)
    if name == "s3-demo":
        dual = s3_dual()
        return random_model(dual, 4, 2, seed), dual
    if name == "s3-small":
        dual = s3_dual()
        return random_model(dual, 2, 1, seed, cocycle="u1"), dual
    if name == "d4-demo":
        dual = d4_dual()
        return random_model(dual, 3, 2, seed, generators=[1, 4]), dual
    if name == "z6-demo":
        dual = cyclic_dual(6)
        return random_model(dual, 3, 1, seed, generators=[1], cocycle="u1"), dual
    if name == "trivial-demo":
        dual = trivial_dual()
        return random_model(dual, 5, 2, seed, generators=[]), dual
    raise ModelLoadError(f"unknown built-in model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")


def _complex_array(raw: Any) -> np.ndarray:
    """Real nested lists, with a trailing axis of length 2 when entries are [re, im]."""
    arr = np.asarray(raw, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1] if arr.ndim == 5 else arr.astype(complex)


def _parse_entry(raw: Any, d: int) -> np.ndarray:
    """Scalar, [re, im], d x d real matrix, or d x d matrix of [re, im]."""
    if isinstance(raw, (int, float)):
        return complex(raw) * np.eye(d)
    arr = np.asarray(raw, dtype=float)
    if arr.shape == (2,):
        return complex(arr[0], arr[1]) * np.eye(d)
    if arr.shape == (d, d):
        return arr.astype(complex)
    if arr.shape == (d, d, 2):
        return arr[..., 0] + 1j * arr[..., 1]
    raise ModelLoadError(f"cannot read a {d}x{d} matrix from shape {arr.shape}")


def model_from_json(doc: Any) -> tuple[CoveringModel, DualSpace]:
    if isinstance(doc, (str, Path)):
        path = Path(doc)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelLoadError(f"cannot read model file {path}: {exc}") from exc
    try:
        grp_doc = doc["group"]
        dual = builtin_dual(grp_doc) if isinstance(grp_doc, str) else dual_from_json(grp_doc)
        grp = dual.group
        verts = doc["vertices"]
        n_f = len(verts) if isinstance(verts, list) else int(verts)
        d = int(doc.get("fiber_dim", 1))
        labels = [grp.label(g) for g in range(grp.order)]
        edges = []
        for e in doc.get("edges", []):
            lift = e.get("lift", grp.identity_index)
            if isinstance(lift, str):
                lift = labels.index(lift)
            edges.append((int(e["u"]), int(e["v"]), _parse_entry(e["hopping"], d), int(lift)))
        pot_raw = doc.get("potential")
        pot = None if pot_raw is None else np.array([_parse_entry(p, d) for p in pot_raw])
        q = make_quotient(grp, n_f, d, edges, pot)
        coc = doc.get("cocycle", "trivial")
        if isinstance(coc, dict) and coc.get("kind") == "unitary":
            coc = {"kind": "unitary", "matrices": _complex_array(coc["matrices"])}
        return build_covering_model(q, coc), dual
    except BlochError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelLoadError(f"malformed model document: {exc}") from exc


def load_model(ref: str, seed: int = 7) -> tuple[CoveringModel, DualSpace]:
    """``builtin:<name>`` or a path to a JSON model file."""
    if ref.startswith("builtin:") or ref in BUILTIN_MODELS:
        return builtin_model(ref, seed)
    return model_from_json(ref)
