"""Linearized feature geometry over a query space.

A feature map assigns every query a row vector (the score gradient of a
linearized model at its base point).  The checks here are the two halves of
the structured-linear property: logical equivariance (negation flips the
feature, reversal preserves it) and linear independence of one representative
feature per logical family.  On maps with both properties, entity renamings
acting on query coordinates descend to well-defined linear operators on the
feature span; the lift is computed by minimum-norm least squares, which fixes
the operator to zero off the span.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numerics
from .queryspace import (GroupElementH, LogicalFamily, LogicalOp, Query,
                         apply_logical, apply_renaming, enumerate_queries)
from .relalg import EntitySet, Relation, RelationAlgebra, close_unary
from .reports import Report


class KernelNotInvariantError(RuntimeError):
    """Renaming does not preserve the kernel; no lifted operator exists."""


@dataclass(frozen=True)
class FeatureMap:
    """Rows of `matrix` are feature vectors, aligned with `queries`."""

    queries: tuple[Query, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != len(self.queries):
            raise ValueError("matrix shape does not match the query index")
        if m.shape[1] < 1:
            raise ValueError("feature dimension must be at least 1")
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite feature entries")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def index(self) -> dict[Query, int]:
        return {q: i for i, q in enumerate(self.queries)}

    def row(self, q: Query) -> np.ndarray:
        return self.matrix[self.index()[q]]


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal kernel vectors (rows) over the query coordinates."""

    basis: np.ndarray
    tol: float

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])


@dataclass(frozen=True)
class LiftedOperator:
    """Matrix acting on feature coordinates, zero off the feature span."""

    source: GroupElementH
    matrix: np.ndarray
    residual: float


def check_logical_equivariance(fmap: FeatureMap,
                               families: Sequence[LogicalFamily],
                               algebra: RelationAlgebra,
                               tol: float = 0.0) -> Report:
    """Negation flips features, reversal preserves them, family by family.

    `tol` defaults to exact zero, the right bound for maps built by
    construction; loaded or learned maps should pass a scaled tolerance.
    """
    idx = fmap.index()
    worst = 0.0
    failing = 0
    for fam in families:
        fam_dev = 0.0
        for q in fam.members:
            row = fmap.matrix[idx[q]]
            neg_row = fmap.matrix[idx[apply_logical(LogicalOp.NEG, q, algebra)]]
            rev_row = fmap.matrix[idx[apply_logical(LogicalOp.REV, q, algebra)]]
            neg_dev = float(np.max(np.abs(neg_row + row)))
            rev_dev = float(np.max(np.abs(rev_row - row)))
            fam_dev = max(fam_dev, neg_dev, rev_dev)
        if fam_dev > tol:
            failing += 1
        worst = max(worst, fam_dev)
    return Report(
        check="logical_equivariance",
        passed=worst <= tol,
        max_deviation=worst,
        details={"tol": tol, "n_families": len(families),
                 "families_failing": failing},
    )


def representative_matrix(fmap: FeatureMap,
                          families: Sequence[LogicalFamily]) -> np.ndarray:
    idx = fmap.index()
    return fmap.matrix[[idx[f.representative] for f in families]]


def check_slp(fmap: FeatureMap, families: Sequence[LogicalFamily],
              rel_tol: float = numerics.REL_TOL) -> Report:
    """Rank of the representative submatrix must equal the family count.

    Also reports the rank of the full orbit matrix (equal under equivariance)
    and the singular values bracketing the rank decision.
    """
    reps = representative_matrix(fmap, families)
    sv = numerics.singular_values(reps)
    threshold = numerics.rank_threshold(reps, rel_tol)
    rep_rank = int(np.sum(sv > threshold))
    full_rank = numerics.rank(fmap.matrix, rel_tol)
    n_fam = len(families)
    kept = float(sv[rep_rank - 1]) if rep_rank > 0 else 0.0
    rejected = float(sv[rep_rank]) if rep_rank < len(sv) else 0.0
    return Report(
        check="slp_rank",
        passed=rep_rank == n_fam,
        max_deviation=float(n_fam - rep_rank),
        details={"rep_rank": rep_rank, "n_families": n_fam,
                 "full_rank": full_rank, "threshold": threshold,
                 "smallest_kept_sv": kept, "largest_rejected_sv": rejected},
    )


def kernel(fmap: FeatureMap, rel_tol: float = numerics.REL_TOL) -> KernelBasis:
    """Null space of the map from query coordinates to feature space.

    The map sends the unit vector of q to row(q); its matrix is the transpose
    of the feature matrix, so kernel vectors are coefficient vectors over
    queries whose weighted feature sum vanishes.
    """
    basis = numerics.nullspace(fmap.matrix.T, rel_tol)
    tol = numerics.rank_threshold(fmap.matrix, rel_tol)
    for v in basis:
        if np.linalg.norm(fmap.matrix.T @ v) > tol:
            raise AssertionError("kernel basis vector fails the residual bound")
    return KernelBasis(basis, tol)


def check_family_kernel_decomposition(fmap: FeatureMap,
                                      families: Sequence[LogicalFamily],
                                      algebra: RelationAlgebra,
                                      rel_tol: float = numerics.REL_TOL) -> Report:
    """Each kernel vector's restriction to a single family must stay in the kernel."""
    idx = fmap.index()
    ker = kernel(fmap, rel_tol)
    tol = ker.tol
    worst = 0.0
    violations = 0
    for v in ker.basis:
        for fam in families:
            block = np.zeros_like(v)
            for q in fam.members:
                block[idx[q]] = v[idx[q]]
            if not np.any(block):
                continue
            dev = float(np.linalg.norm(fmap.matrix.T @ block))
            worst = max(worst, dev)
            if dev > tol:
                violations += 1
    return Report(
        check="family_kernel_decomposition",
        passed=violations == 0,
        max_deviation=worst,
        details={"kernel_dim": ker.dim, "violations": violations, "tol": tol},
    )


def _query_permutation(fmap: FeatureMap, g: GroupElementH,
                       algebra: RelationAlgebra) -> np.ndarray:
    """index array: position i (query q) maps to position of g applied to q."""
    idx = fmap.index()
    out = np.empty(len(fmap.queries), dtype=int)
    for i, q in enumerate(fmap.queries):
        out[i] = idx[apply_renaming(g, q, algebra)]
    return out


def lift_renaming(fmap: FeatureMap, g: GroupElementH,
                  algebra: RelationAlgebra,
                  rel_tol: float = numerics.REL_TOL) -> LiftedOperator:
    """Descend a renaming to feature space; min-norm, zero off the span.

    Requires the renaming to preserve the kernel of the coordinate-to-feature
    map; otherwise no linear operator can satisfy M row(q) = row(g q) and a
    KernelNotInvariantError is raised (the usual cause is a non-equivariant
    or rank-deficient map).
    """
    perm = _query_permutation(fmap, g, algebra)
    ker = kernel(fmap, rel_tol)
    for v in ker.basis:
        moved = np.zeros_like(v)
        moved[perm] = v
        if float(np.linalg.norm(fmap.matrix.T @ moved)) > ker.tol:
            raise KernelNotInvariantError(
                f"renaming {g} does not preserve the kernel")
    targets = fmap.matrix[perm]
    # min-norm solution of  matrix @ X = targets, lifted operator is X^T
    x = numerics.minnorm_lstsq(fmap.matrix, targets)
    residual = float(np.max(np.abs(fmap.matrix @ x - targets))) if targets.size else 0.0
    return LiftedOperator(source=g, matrix=x.T, residual=residual)


def propagation_audit(fmap: FeatureMap, families: Sequence[LogicalFamily],
                      algebra: RelationAlgebra, family_index: int,
                      eta: float) -> Report:
    """First-order score responses to a rank-one edit along one representative.

    The edit moves parameters by eta times the representative's feature; the
    first-order score change of any query is then eta times the inner product
    of its feature with the representative's.  Within the edited family the
    responses must follow the signs exactly; responses on other families are
    reported, along with the representative Gram rank certifying that edits
    can separate families.
    """
    fam = families[family_index]
    rep = fam.representative
    delta = eta * fmap.row(rep)
    responses = {}
    for op in LogicalOp:
        q = apply_logical(op, rep, algebra)
        responses[op.value] = float(np.dot(fmap.row(q), delta))
    base = responses["id"]
    neg_dev = abs(responses["neg"] + base)
    rev_dev = abs(responses["rev"] - base)
    negrev_dev = abs(responses["negrev"] + base)
    worst = max(neg_dev, rev_dev, negrev_dev)
    others = {}
    for i, other in enumerate(families):
        if i == family_index:
            continue
        others[str(list(other.representative))] = float(
            np.dot(fmap.row(other.representative), delta))
    reps = representative_matrix(fmap, families)
    gram_rank = numerics.rank(reps @ reps.T)
    return Report(
        check="propagation_audit",
        passed=worst == 0.0,
        max_deviation=worst,
        details={"edited_family": list(rep), "eta": eta,
                 "responses": responses, "other_family_responses": others,
                 "gram_rank": gram_rank, "n_families": len(families)},
    )


def save_feature_map(fmap: FeatureMap, algebra: RelationAlgebra,
                     path: str | Path, fmt: str = "json") -> None:
    """Persist matrix + query index; base relations travel in the sidecar.

    fmt="json" writes one file; fmt="csv" writes the matrix as CSV and the
    index as a sidecar <path>.index.json.  The index stores entity labels and
    base relation pairs so the deterministic closure can be rebuilt on load.
    """
    # base relations are an ordered list: closure order, and with it the
    # relation indices stored in the queries, must survive the round trip
    sidecar = {
        "entities": list(algebra.entity_set.labels),
        "base_relations": [
            {"name": r.name or f"r{i}", "pairs": [[h, t] for h, t in r.pairs()]}
            for i, r in enumerate(algebra.base)
        ],
        "queries": [[q.head, q.rel, q.tail] for q in fmap.queries],
    }
    path = Path(path)
    if fmt == "json":
        doc = dict(sidecar)
        doc["matrix"] = fmap.matrix.tolist()
        path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for row in fmap.matrix:
                # repr of a Python float is its shortest exact form
                writer.writerow([repr(float(x)) for x in row])
        Path(f"{path}.index.json").write_text(
            json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown feature-map format {fmt!r}")


def load_feature_map(path: str | Path,
                     fmt: str = "json") -> tuple[FeatureMap, RelationAlgebra]:
    path = Path(path)
    if fmt == "json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        matrix = np.asarray(doc["matrix"], dtype=float)
        sidecar = doc
    elif fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            matrix = np.asarray([[float(x) for x in row]
                                 for row in csv.reader(fh)], dtype=float)
        sidecar = json.loads(Path(f"{path}.index.json").read_text(encoding="utf-8"))
    else:
        raise ValueError(f"unknown feature-map format {fmt!r}")

    entity_set = EntitySet(tuple(sidecar["entities"]))
    base = [Relation.from_pairs(entity_set,
                                [(h, t) for h, t in rec["pairs"]], rec["name"])
            for rec in sidecar["base_relations"]]
    algebra = close_unary(base)
    queries = tuple(Query(*q) for q in sidecar["queries"])
    for q in queries:
        if not (0 <= q.rel < algebra.size):
            raise ValueError(f"query {q} indexes a relation outside the closure")
        if not (0 <= q.head < entity_set.n and 0 <= q.tail < entity_set.n):
            raise ValueError(f"query {q} indexes an entity outside the set")
    return FeatureMap(queries, matrix), algebra


def feature_span_basis(fmap: FeatureMap,
                       rel_tol: float = numerics.REL_TOL) -> np.ndarray:
    """Orthonormal basis (rows) of the feature span."""
    return numerics.row_space_basis(fmap.matrix, rel_tol)


def full_query_map(algebra: RelationAlgebra, matrix: np.ndarray) -> FeatureMap:
    return FeatureMap(enumerate_queries(algebra), matrix)
