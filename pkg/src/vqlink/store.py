"""JSON container for the shared transmitter/receiver knowledge base.

One file carries the multi-level codebook, the reorder permutations (when
codebook reordering has been applied) and optionally the patch basis, so a
stored container fully describes both ends of a link. Floats are written
via repr and round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .feature_codec import PatchBasis
from .quantizer import OCTONARY, MultiLevelCodebook

__all__ = ["SCHEMA_VERSION", "Container", "save_container", "load_container"]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Container:
    mlc: MultiLevelCodebook
    cr_permutations: np.ndarray | None = None  # (D, P, N) old->new, if reordered
    basis: PatchBasis | None = None


def save_container(path, mlc: MultiLevelCodebook,
                   cr_permutations=None, basis: PatchBasis | None = None) -> None:
    if mlc.n != OCTONARY:
        raise ValueError(f"transmission codebooks must have {OCTONARY} entries, got {mlc.n}")
    doc = {
        "version": SCHEMA_VERSION,
        "D": mlc.depth,
        "P": mlc.p,
        "N": mlc.n,
        "n_q": mlc.n_q,
        "levels": mlc.to_array().tolist(),
    }
    if cr_permutations is not None:
        perms = np.asarray(cr_permutations, dtype=np.int64)
        if perms.shape != (mlc.depth, mlc.p, mlc.n):
            raise ValueError(
                f"cr_permutations must have shape {(mlc.depth, mlc.p, mlc.n)}, got {perms.shape}")
        doc["cr_permutations"] = perms.tolist()
    if basis is not None:
        if basis.n_q != mlc.n_q:
            raise ValueError(f"basis has n_q={basis.n_q}, codebook has n_q={mlc.n_q}")
        doc["basis"] = {"n_q": basis.n_q, "mean": basis.mean.tolist(), "rows": basis.rows.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def _fail(msg: str):
    raise ValueError(f"invalid codebook container: {msg}")


def load_container(path) -> Container:
    """Load and validate a container; rejects any invariant violation."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            _fail(f"not valid JSON ({exc})")
    if not isinstance(doc, dict):
        _fail("top level must be an object")
    if doc.get("version") != SCHEMA_VERSION:
        _fail(f"unsupported version {doc.get('version')!r}")
    try:
        depth, p, n, n_q = (int(doc[k]) for k in ("D", "P", "N", "n_q"))
    except (KeyError, TypeError, ValueError):
        _fail("missing or malformed D/P/N/n_q header")
    if n != OCTONARY:
        _fail(f"N must be {OCTONARY}, got {n}")
    if min(depth, p) < 1 or n_q < 1 or n_q % p != 0:
        _fail(f"inconsistent header D={depth} P={p} n_q={n_q}")

    levels = np.asarray(doc.get("levels"), dtype=np.float64)
    if levels.shape != (depth, p, n, n_q // p):
        _fail(f"levels must have shape {(depth, p, n, n_q // p)}, got {levels.shape}")
    if not np.all(np.isfinite(levels)):
        _fail("codebook entries must be finite")
    mlc = MultiLevelCodebook.from_array(levels)

    perms = None
    if "cr_permutations" in doc:
        perms = np.asarray(doc["cr_permutations"])
        if perms.shape != (depth, p, n) or not np.issubdtype(perms.dtype, np.integer):
            _fail(f"cr_permutations must be integer with shape {(depth, p, n)}")
        ident = np.arange(n)
        for d in range(depth):
            for head in range(p):
                if not np.array_equal(np.sort(perms[d, head]), ident):
                    _fail(f"cr_permutations[{d}][{head}] is not a permutation of 0..{n - 1}")
        perms = perms.astype(np.int64)

    basis = None
    if "basis" in doc:
        b = doc["basis"]
        if not isinstance(b, dict):
            _fail("basis must be an object")
        try:
            basis = PatchBasis(rows=np.asarray(b["rows"], dtype=np.float64),
                               mean=np.asarray(b["mean"], dtype=np.float64))
        except (KeyError, TypeError) as exc:
            _fail(f"malformed basis ({exc})")
        except ValueError as exc:
            _fail(str(exc))
        if int(b.get("n_q", basis.n_q)) != basis.n_q:
            _fail("basis n_q header disagrees with its rows")
        if basis.n_q != n_q:
            _fail(f"basis n_q={basis.n_q} does not match codebook n_q={n_q}")

    return Container(mlc=mlc, cr_permutations=perms, basis=basis)
