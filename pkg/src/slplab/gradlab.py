"""Desk-scale gradient alignment experiments.

A synthetic knowledge base labels queries straight from relation bitsets;
each labeled fact is paired with its negation (complement relation, flipped
label).  Two scorers are compared:

* ``mlp``: one-hot head/tail/relation-class inputs plus an explicit negation
  flag bit, a linear embedding, one tanh hidden layer, scalar head.  The
  relation vocabulary is the closed relation set modulo complement, so
  converse relations stay encodable and the whole logical family of a query
  can be scored.  Gradients are analytic reverse-mode (no autodiff), exposed
  per parameter block (embedding, hidden, head) for restricted-gradient
  experiments.
* ``slp_linear``: score is a fixed equivariant feature row dotted with the
  parameters, so the score gradient IS the feature row, and negated queries
  have exactly opposite gradients (cosine exactly -1) while reversed queries
  match exactly (+1).

Training is deterministic full-batch gradient descent on the logistic loss;
runs abort on non-finite loss with the offending epoch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import numerics
from .factorize import BlockSpec, FactorizedMap, build_slp_map
from .queryspace import LogicalOp, Query, apply_logical
from .relalg import EntitySet, RelationAlgebra, close_unary, random_relation

BLOCK_NAMES = ("emb", "hidden", "head", "all")


@dataclass(frozen=True)
class SyntheticKB:
    """Labeled base-relation queries plus their negation partners."""

    algebra: RelationAlgebra
    facts: tuple[tuple[Query, int], ...]
    partners: tuple[tuple[Query, int], ...]

    def training_set(self) -> tuple[tuple[Query, int], ...]:
        return self.facts + self.partners

    def to_json(self) -> str:
        doc = {
            "entities": list(self.algebra.entity_set.labels),
            "base_relations": {
                (r.name or f"r{i}"): sorted(r.pairs())
                for i, r in enumerate(self.algebra.base)
            },
            "facts": [[list(q), label] for q, label in self.facts],
            "partners": [[list(q), label] for q, label in self.partners],
        }
        return json.dumps(doc, sort_keys=True) + "\n"


def generate_kb(entity_count: int, base_relations: int, density: float,
                seed: int) -> SyntheticKB:
    """Random bitset relations; degenerate draws get one redraw, then error."""
    if entity_count < 2:
        raise ValueError("need at least two entities")
    if base_relations < 1:
        raise ValueError("need at least one base relation")
    if not 0.0 < density < 1.0:
        raise ValueError("density must be strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    entity_set = EntitySet.of_size(entity_count)
    relations = []
    for i in range(base_relations):
        rel = random_relation(entity_set, rng, density, name=f"r{i}")
        if rel.is_empty() or rel.is_full():
            rel = random_relation(entity_set, rng, density, name=f"r{i}")
        if rel.is_empty() or rel.is_full():
            raise ValueError(f"relation r{i} degenerate after one redraw; "
                             "adjust density or entity count")
        relations.append(rel)
    algebra = close_unary(relations)
    facts = []
    partners = []
    for r_idx, rel in enumerate(relations):
        for h in range(entity_count):
            for t in range(entity_count):
                label = int(rel.contains(h, t))
                q = Query(h, r_idx, t)
                facts.append((q, label))
                partners.append((Query(h, algebra.neg(r_idx), t), 1 - label))
    return SyntheticKB(algebra, tuple(facts), tuple(partners))


def _relation_classes(algebra: RelationAlgebra) -> tuple[tuple[int, ...], dict[int, tuple[int, int]]]:
    """Complement-pair classes; each relation gets (class id, negation flag)."""
    reps = []
    coding: dict[int, tuple[int, int]] = {}
    for r in range(algebra.size):
        rep = min(r, algebra.neg(r))
        if rep not in reps:
            reps.append(rep)
        cls = reps.index(rep)
        coding[r] = (cls, 0 if r == rep else 1)
    return tuple(reps), coding


@dataclass(frozen=True)
class ScorerModel:
    """Immutable parameter bundle; training returns a new instance."""

    arch: str
    params: dict
    algebra: RelationAlgebra
    rel_coding: dict
    n_classes: int
    feature_map: FactorizedMap | None = None

    @property
    def input_dim(self) -> int:
        n = self.algebra.entity_set.n
        return 2 * n + self.n_classes + 1


def _init_mlp_params(input_dim: int, embed_dim: int, hidden: int,
                     rng) -> dict:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer."""
    def layer(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return {
        "emb": layer((embed_dim, input_dim), input_dim),
        "hidden_w": layer((hidden, embed_dim), embed_dim),
        "hidden_b": layer((hidden,), embed_dim),
        "head_w": layer((hidden,), hidden),
        "head_b": layer((1,), hidden),
    }


def make_mlp(kb: SyntheticKB, hidden: int, embed_dim: int, seed: int) -> ScorerModel:
    if hidden < 1:
        raise ValueError("hidden width must be at least 1")
    if embed_dim < 1:
        raise ValueError("embedding width must be at least 1")
    reps, coding = _relation_classes(kb.algebra)
    n = kb.algebra.entity_set.n
    input_dim = 2 * n + len(reps) + 1
    rng = np.random.default_rng(seed)
    params = _init_mlp_params(input_dim, embed_dim, hidden, rng)
    return ScorerModel("mlp", params, kb.algebra, coding, len(reps))


def make_slp_linear(kb: SyntheticKB, context_dim: int, seed: int,
                    terms: int = 1) -> ScorerModel:
    """Linear scorer over a seeded equivariant feature build."""
    fmap = build_slp_map(kb.algebra, [BlockSpec(context_dim, terms, None)], seed)
    rng = np.random.default_rng(seed + 1)
    d = fmap.feature_map.dim
    params = {"theta": rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=d)}
    reps, coding = _relation_classes(kb.algebra)
    return ScorerModel("slp_linear", params, kb.algebra, coding, len(reps),
                       feature_map=fmap)


def encode_queries(model: ScorerModel, queries: Sequence[Query]) -> np.ndarray:
    """One-hot (head, tail, relation class) plus the negation flag bit."""
    n = model.algebra.entity_set.n
    x = np.zeros((len(queries), model.input_dim))
    for i, q in enumerate(queries):
        cls, flag = model.rel_coding[q.rel]
        x[i, q.head] = 1.0
        x[i, n + q.tail] = 1.0
        x[i, 2 * n + cls] = 1.0
        x[i, 2 * n + model.n_classes] = float(flag)
    return x


def _mlp_forward(params: dict, x: np.ndarray):
    emb = x @ params["emb"].T
    z = emb @ params["hidden_w"].T + params["hidden_b"]
    a = np.tanh(z)
    s = a @ params["head_w"] + params["head_b"][0]
    return s, a, z, emb


def score(model: ScorerModel, q: Query) -> float:
    return float(scores(model, [q])[0])


def scores(model: ScorerModel, queries: Sequence[Query]) -> np.ndarray:
    if model.arch == "mlp":
        x = encode_queries(model, queries)
        s, _, _, _ = _mlp_forward(model.params, x)
        return s
    fm = model.feature_map.feature_map
    idx = fm.index()
    rows = fm.matrix[[idx[q] for q in queries]]
    return rows @ model.params["theta"]


def gradient(model: ScorerModel, q: Query, block: str = "head") -> np.ndarray:
    """Analytic score gradient restricted to one parameter block.

    mlp blocks: 'emb' is the flattened embedding matrix; 'hidden' is the
    flattened hidden weights followed by the hidden bias; 'head' is the head
    weights followed by the head bias; 'all' concatenates the three in that
    order.  slp_linear has a single parameter vector, returned for any block
    name: the gradient is the query's feature row.
    """
    if block not in BLOCK_NAMES:
        raise ValueError(f"unknown block {block!r}")
    if model.arch == "slp_linear":
        fm = model.feature_map.feature_map
        return fm.matrix[fm.index()[q]].copy()
    x = encode_queries(model, [q])[0]
    params = model.params
    emb = params["emb"] @ x
    z = params["hidden_w"] @ emb + params["hidden_b"]
    a = np.tanh(z)
    sech2 = 1.0 - a * a
    g_hidden_pre = params["head_w"] * sech2          # ds/dz
    parts = {}
    if block in ("head", "all"):
        parts["head"] = np.concatenate([a, [1.0]])
    if block in ("hidden", "all"):
        dw = np.outer(g_hidden_pre, emb)
        parts["hidden"] = np.concatenate([dw.ravel(), g_hidden_pre])
    if block in ("emb", "all"):
        de = np.outer(params["hidden_w"].T @ g_hidden_pre, x)
        parts["emb"] = de.ravel()
    if block == "all":
        return np.concatenate([parts["emb"], parts["hidden"], parts["head"]])
    return parts[block]


@dataclass(frozen=True)
class TrainResult:
    model: ScorerModel
    losses: tuple[float, ...]
    accuracy: float


def train(model: ScorerModel, kb: SyntheticKB, epochs: int, lr: float,
          seed: int | None = None) -> TrainResult:
    """Deterministic full-batch gradient descent on the logistic loss.

    `seed` re-initializes the parameters with the standard seeded scheme
    before training; omit it to continue from the model's current state.
    """
    if seed is not None:
        if model.arch == "mlp":
            rng = np.random.default_rng(seed)
            hidden = model.params["hidden_w"].shape[0]
            embed_dim = model.params["emb"].shape[0]
            model = replace(model, params=_init_mlp_params(
                model.input_dim, embed_dim, hidden, rng))
        else:
            rng = np.random.default_rng(seed)
            d = model.params["theta"].shape[0]
            model = replace(model, params={
                "theta": rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=d)})
    data = kb.training_set()
    queries = [q for q, _ in data]
    y = np.array([1.0 if label else -1.0 for _, label in data])

    if model.arch == "slp_linear":
        fm = model.feature_map.feature_map
        idx = fm.index()
        feats = fm.matrix[[idx[q] for q in queries]]
        theta = model.params["theta"].copy()
        losses = []
        for epoch in range(epochs):
            s = feats @ theta
            margin = y * s
            loss = float(np.mean(np.logaddexp(0.0, -margin)))
            if not np.isfinite(loss):
                raise RuntimeError(f"training diverged at epoch {epoch}")
            losses.append(loss)
            dloss_ds = -y / (1.0 + np.exp(margin)) / len(y)
            theta -= lr * (feats.T @ dloss_ds)
        final = replace(model, params={"theta": theta})
        acc = float(np.mean((feats @ theta > 0) == (y > 0)))
        return TrainResult(final, tuple(losses), acc)

    x = encode_queries(model, queries)
    params = {k: v.copy() for k, v in model.params.items()}
    losses = []
    for epoch in range(epochs):
        s, a, _, emb = _mlp_forward(params, x)
        margin = y * s
        loss = float(np.mean(np.logaddexp(0.0, -margin)))
        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged at epoch {epoch}")
        losses.append(loss)
        ds = -y / (1.0 + np.exp(margin)) / len(y)
        da = np.outer(ds, params["head_w"])
        dz = da * (1.0 - a * a)
        grads = {
            "head_w": a.T @ ds,
            "head_b": np.array([np.sum(ds)]),
            "hidden_w": dz.T @ emb,
            "hidden_b": dz.sum(axis=0),
            "emb": (dz @ params["hidden_w"]).T @ x,
        }
        for k in params:
            params[k] = params[k] - lr * grads[k]
    final = replace(model, params=params)
    s, _, _, _ = _mlp_forward(params, x)
    acc = float(np.mean((s > 0) == (y > 0)))
    return TrainResult(final, tuple(losses), acc)


@dataclass(frozen=True)
class AlignmentReport:
    """Per-pair negation-gradient cosines on one parameter block."""

    block: str
    arch: str
    cosines: tuple[float, ...]
    mean: float
    std: float
    excluded: int
    bin_edges: tuple[float, ...]
    bin_counts: tuple[int, ...]
    hyperparams: dict

    def histogram_csv(self) -> str:
        lines = ["bin_lo,bin_hi,count"]
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:],
                             self.bin_counts):
            lines.append(f"{lo!r},{hi!r},{c}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"block": self.block, "arch": self.arch,
                "mean": self.mean, "std": self.std,
                "excluded": self.excluded,
                "cosines": list(self.cosines),
                "bin_edges": list(self.bin_edges),
                "bin_counts": list(self.bin_counts),
                "hyperparams": self.hyperparams}


def alignment_experiment(model: ScorerModel, kb: SyntheticKB,
                         block: str = "head",
                         hyperparams: dict | None = None) -> AlignmentReport:
    """Cosine between each fact's gradient and its negation partner's.

    Zero-gradient pairs have no defined cosine; they are excluded from the
    mean and counted.  Bins are width 0.05 over [-1, 1].
    """
    cosines = []
    excluded = 0
    for (q, _), (p, _) in zip(kb.facts, kb.partners):
        g_q = gradient(model, q, block)
        g_p = gradient(model, p, block)
        c = numerics.cosine(g_q, g_p)
        if np.isnan(c):
            excluded += 1
        else:
            cosines.append(c)
    edges = np.linspace(-1.0, 1.0, 41)
    counts, _ = np.histogram(cosines, bins=edges)
    arr = np.array(cosines) if cosines else np.zeros(0)
    mean = float(arr.mean()) if arr.size else 0.0
    std = float(arr.std()) if arr.size else 0.0
    return AlignmentReport(
        block=block, arch=model.arch, cosines=tuple(float(c) for c in cosines),
        mean=mean, std=std, excluded=excluded,
        bin_edges=tuple(float(e) for e in edges),
        bin_counts=tuple(int(c) for c in counts),
        hyperparams=dict(hyperparams or {}),
    )


def _apply_block_update(model: ScorerModel, delta: np.ndarray,
                        block: str) -> ScorerModel:
    params = {k: v.copy() for k, v in model.params.items()}
    if model.arch == "slp_linear":
        params["theta"] = params["theta"] + delta
        return replace(model, params=params)
    sizes = {
        "emb": params["emb"].size,
        "hidden": params["hidden_w"].size + params["hidden_b"].size,
        "head": params["head_w"].size + 1,
    }
    def put_emb(d):
        params["emb"] = params["emb"] + d.reshape(params["emb"].shape)
    def put_hidden(d):
        wsize = params["hidden_w"].size
        params["hidden_w"] = params["hidden_w"] + d[:wsize].reshape(
            params["hidden_w"].shape)
        params["hidden_b"] = params["hidden_b"] + d[wsize:]
    def put_head(d):
        params["head_w"] = params["head_w"] + d[:-1]
        params["head_b"] = params["head_b"] + d[-1:]
    if block == "all":
        e, h = sizes["emb"], sizes["hidden"]
        put_emb(delta[:e])
        put_hidden(delta[e:e + h])
        put_head(delta[e + h:])
    elif block == "emb":
        put_emb(delta)
    elif block == "hidden":
        put_hidden(delta)
    elif block == "head":
        put_head(delta)
    else:
        raise ValueError(f"unknown block {block!r}")
    return replace(model, params=params)


@dataclass(frozen=True)
class EditStepReport:
    query: Query
    eta: float
    block: str
    family_queries: dict
    exact_delta: dict
    first_order_delta: dict


def edit_step(model: ScorerModel, q: Query, eta: float,
              block: str = "head") -> EditStepReport:
    """Move parameters by eta times the query's block gradient.

    Reports exact and first-order score changes across the query's logical
    family.  For slp_linear the two coincide and the negated deltas are exact
    sign flips; for the mlp the gap is second order in eta.
    """
    base_grad = gradient(model, q, block)
    delta = eta * base_grad
    edited = _apply_block_update(model, delta, block)
    family = {op.value: apply_logical(op, q, model.algebra) for op in LogicalOp}
    exact = {}
    first = {}
    for name, member in family.items():
        exact[name] = float(score(edited, member) - score(model, member))
        first[name] = float(np.dot(gradient(model, member, block), delta))
    return EditStepReport(
        query=q, eta=eta, block=block,
        family_queries={k: tuple(v) for k, v in family.items()},
        exact_delta=exact, first_order_delta=first,
    )


def finite_difference_gradient(model: ScorerModel, q: Query, block: str,
                               step: float = numerics.FD_STEP) -> np.ndarray:
    """Central-difference oracle over the block's flattened parameters."""
    g = gradient(model, q, block)
    out = np.zeros_like(g)
    unit = np.zeros_like(g)
    for i in range(g.size):
        unit[:] = 0.0
        unit[i] = 1.0
        plus = _apply_block_update(model, step * unit, block)
        minus = _apply_block_update(model, -step * unit, block)
        out[i] = (score(plus, q) - score(minus, q)) / (2.0 * step)
    return out
