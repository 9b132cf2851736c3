"""Command-line entry point: every check suite behind one seeded binary.

Every subcommand writes one fixed-schema report (check, pass, max_deviation,
details, provenance) to --out, or to stdout when --out is omitted.  Exit
status: 0 when the report passes, 1 when it fails, 2 on usage errors; usage
errors never produce a report file.  Randomness flows from --seed, falling
back to the SLPLAB_SEED environment variable, then to 0.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, numerics
from .conjunction import (check_kernel_stability, collapse_certificate,
                          fit_bilinear, possible_worlds_assignment)
from .factorize import (BlockSpec, ConverseInvarianceError, build_slp_map,
                        isotypic_decompose, negation_split, parity_decompose,
                        parity_involution, verify_factorized_form)
from .featspace import (check_family_kernel_decomposition,
                        check_logical_equivariance, check_slp,
                        load_feature_map, propagation_audit, save_feature_map)
from .gradlab import (alignment_experiment, edit_step, generate_kb, make_mlp,
                      make_slp_linear, train)
from .queryspace import compute_families, families_to_json
from .relalg import (EntitySet, all_relations, close_unary, compose, converse,
                     negate, random_relation)
from .reports import Report, emit_report, render_report


def _resolve_seed(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("SLPLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        parser.error(f"SLPLAB_SEED must be an integer, got {env!r}")


def _config_dict(args: argparse.Namespace) -> dict:
    skip = {"func", "out", "seed"}
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items()) if k not in skip}


def _finish(report: Report, args: argparse.Namespace, seed: int) -> int:
    config = _config_dict(args)
    digest = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()
    report.provenance = {"config_hash": digest, "seed": seed,
                         "version": __version__}
    if getattr(args, "out", None):
        emit_report(report, args.out)
    else:
        sys.stdout.write(render_report(report))
    return 0 if report.passed else 1


def _random_algebra(entities: int, relations: int, density: float, rng):
    """Seeded base relations, one redraw per degenerate draw, then closure."""
    entity_set = EntitySet.of_size(entities)
    base = []
    for i in range(relations):
        rel = random_relation(entity_set, rng, density, name=f"r{i}")
        if rel.is_empty() or rel.is_full():
            rel = random_relation(entity_set, rng, density, name=f"r{i}")
        if rel.is_empty() or rel.is_full():
            raise ValueError(f"relation r{i} degenerate after one redraw")
        base.append(rel)
    return close_unary(base)


def _build_from_args(args: argparse.Namespace, seed: int):
    rng = np.random.default_rng(seed)
    algebra = _random_algebra(args.entities, args.relations, args.density, rng)
    n_families = len(compute_families(algebra))
    context_dim = args.context_dim
    if context_dim is None:
        # smallest shape that can reach full representative rank
        context_dim = n_families
    terms = args.terms
    if terms is None:
        # one raw sample spans at most |E|^2 row directions
        terms = max(1, -(-n_families // args.entities ** 2))
    parity = None if args.parity == "both" else args.parity
    spec = BlockSpec(context_dim, terms, parity)
    built = build_slp_map(algebra, [spec], seed)
    return algebra, built


# ---------------------------------------------------------------- subcommands

def _cmd_relalg_laws(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    entity_set = EntitySet.of_size(args.entities)
    rng = np.random.default_rng(seed)
    failures = {"double_negation": 0, "double_converse": 0,
                "negate_converse_commute": 0, "converse_of_composition": 0,
                "associativity": 0}
    if args.exhaustive:
        unary_pool = list(all_relations(entity_set))
    else:
        unary_pool = [random_relation(entity_set, rng)
                      for _ in range(args.pairs)]
    for r in unary_pool:
        if negate(negate(r)) != r:
            failures["double_negation"] += 1
        if converse(converse(r)) != r:
            failures["double_converse"] += 1
        if negate(converse(r)) != converse(negate(r)):
            failures["negate_converse_commute"] += 1
    for _ in range(args.pairs):
        r = random_relation(entity_set, rng)
        s = random_relation(entity_set, rng)
        if converse(compose(r, s)) != compose(converse(s), converse(r)):
            failures["converse_of_composition"] += 1
    for _ in range(args.triples):
        r = random_relation(entity_set, rng)
        s = random_relation(entity_set, rng)
        t = random_relation(entity_set, rng)
        if compose(compose(r, s), t) != compose(r, compose(s, t)):
            failures["associativity"] += 1
    total = sum(failures.values())
    report = Report(
        check="relalg_laws", passed=total == 0, max_deviation=float(total),
        details={"entities": args.entities, "exhaustive": bool(args.exhaustive),
                 "unary_relations_checked": len(unary_pool),
                 "pairs": args.pairs, "triples": args.triples,
                 "failures": failures},
    )
    return _finish(report, args, seed)


def _cmd_families(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    rng = np.random.default_rng(seed)
    algebra = _random_algebra(args.entities, args.relations, args.density, rng)
    families = compute_families(algebra)
    partition = families_to_json(families)
    sizes = sorted({len(f.members) for f in families})
    n_queries = sum(len(f.members) for f in families)
    report = Report(
        check="families", passed=True, max_deviation=0.0,
        details={"n_families": len(families), "n_queries": n_queries,
                 "orbit_sizes": sizes, "families": partition},
    )
    if args.out:
        # the partition itself is the subcommand's stdout product
        sys.stdout.write(json.dumps(partition, sort_keys=True) + "\n")
    return _finish(report, args, seed)


def _cmd_build_slp(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    algebra, built = _build_from_args(args, seed)
    families = compute_families(algebra)
    equiv = check_logical_equivariance(built.feature_map, families, algebra)
    rank = check_slp(built.feature_map, families)
    if args.save:
        save_feature_map(built.feature_map, algebra, args.save, args.fmt)
    report = Report(
        check="build_slp", passed=equiv.passed and rank.passed,
        max_deviation=max(equiv.max_deviation, rank.max_deviation),
        details={"equivariance": equiv.to_dict(), "slp_rank": rank.to_dict(),
                 "redrawn": built.redrawn, "dim": built.dim,
                 "saved": str(args.save) if args.save else None},
    )
    return _finish(report, args, seed)


def _cmd_verify_slp(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    fmap, algebra = load_feature_map(args.load, args.fmt)
    families = compute_families(algebra)
    equiv = check_logical_equivariance(fmap, families, algebra, tol=args.tol)
    rank = check_slp(fmap, families)
    blocks = check_family_kernel_decomposition(fmap, families, algebra)
    report = Report(
        check="verify_slp",
        passed=equiv.passed and rank.passed and blocks.passed,
        max_deviation=max(equiv.max_deviation, rank.max_deviation,
                          blocks.max_deviation),
        details={"equivariance": equiv.to_dict(), "slp_rank": rank.to_dict(),
                 "kernel_decomposition": blocks.to_dict(),
                 "loaded": str(args.load)},
    )
    return _finish(report, args, seed)


def _cmd_factorize(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    algebra, built = _build_from_args(args, seed)
    form = verify_factorized_form(built)
    split = negation_split(built)
    passed = form.passed and split.plus_dim == 0
    report = Report(
        check="factorize", passed=passed, max_deviation=form.max_deviation,
        details={"form": form.to_dict(),
                 "negation_split": {"plus_dim": split.plus_dim,
                                    "minus_dim": split.minus_dim,
                                    "span_dim": split.span_dim},
                 "redrawn": built.redrawn},
    )
    return _finish(report, args, seed)


def _cmd_isotypic(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    if args.entities > 5:
        parser.error("isotypic decomposition materializes Sym(n); --entities <= 5")
    algebra, built = _build_from_args(args, seed)
    projectors, props = isotypic_decompose(built)
    worst = max(props["idempotence"], props["annihilation"],
                props["completeness_on_span"], props["commutation"])
    report = Report(
        check="isotypic", passed=worst <= args.tol, max_deviation=worst,
        details={"tol": args.tol, "properties": props,
                 "irreps": [{"partition": list(p.irrep), "dim": p.irrep_dim,
                             "image_dim": p.image_dim} for p in projectors]},
    )
    return _finish(report, args, seed)


def _cmd_parity(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    algebra, built = _build_from_args(args, seed)
    inv = parity_involution(algebra)
    try:
        decomp = parity_decompose(built, tol=args.tol)
    except ConverseInvarianceError as exc:
        report = Report(
            check="parity", passed=False, max_deviation=exc.deviation,
            details={"error": "converse invariance failed",
                     "query": list(exc.query), "tol": args.tol},
        )
        return _finish(report, args, seed)
    report = Report(
        check="parity", passed=decomp.max_cross_residual <= args.tol,
        max_deviation=decomp.max_cross_residual,
        details={"tol": args.tol,
                 "cross_residual": decomp.max_cross_residual,
                 "n_term_pairs": sum(len(b) for b in decomp.blocks),
                 "pair_space_dims": list(inv.pair_dims),
                 "relation_space_dims": list(inv.rel_dims)},
    )
    return _finish(report, args, seed)


def _cmd_kernel_stability(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    assignment, _ = possible_worlds_assignment(args.atoms, args.worlds, seed,
                                               args.depth)
    report = check_kernel_stability(assignment)
    report.details["atoms"] = args.atoms
    report.details["worlds"] = args.worlds
    report.details["depth"] = args.depth
    return _finish(report, args, seed)


def _cmd_fit_bilinear(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    assignment, _ = possible_worlds_assignment(args.atoms, args.worlds, seed,
                                               args.depth)
    fit = fit_bilinear(assignment)
    report = Report(
        check="fit_bilinear", passed=fit.max_residual <= args.tol,
        max_deviation=fit.max_residual,
        details={"tol": args.tol, "max_residual": fit.max_residual,
                 "uniqueness_gap": fit.uniqueness_gap,
                 "n_constraints": fit.n_constraints,
                 "n_pairs_skipped": fit.n_pairs_skipped,
                 "atoms": args.atoms, "worlds": args.worlds},
    )
    return _finish(report, args, seed)


def _cmd_collapse(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    rng = np.random.default_rng(seed)
    feats = rng.standard_normal((args.atoms, args.dim))
    feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    cert = collapse_certificate([f for f in feats],
                                enforce_neg_equiv=args.neg_equiv,
                                tolerance=args.tolerance)
    details = cert.to_dict()
    if args.neg_equiv:
        expected = 2.0 * sum(n * n for n in cert.feature_norms)
        deviation = abs(cert.residual_sq - expected)
        details["expected_residual_sq"] = expected
        passed = deviation <= 1e-6 and cert.verdict == "infeasible"
    else:
        deviation = cert.residual
        passed = cert.verdict == "feasible"
    report = Report(check="collapse_certificate", passed=passed,
                    max_deviation=deviation, details=details)
    return _finish(report, args, seed)


_GRADLAB_KEYS = {"entity_count", "relations", "density", "arch", "hidden",
                 "epochs", "lr", "eta", "seed", "block"}


def _cmd_gradlab(args, parser) -> int:
    try:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    unknown = set(config) - _GRADLAB_KEYS
    if unknown:
        parser.error(f"unknown config keys: {sorted(unknown)}")
    missing = _GRADLAB_KEYS - set(config) - {"seed"}
    if missing:
        parser.error(f"missing config keys: {sorted(missing)}")
    if config["arch"] not in ("mlp", "slp_linear"):
        parser.error(f"arch must be mlp or slp_linear, got {config['arch']!r}")
    if config["block"] not in ("emb", "hidden", "head", "all"):
        parser.error(f"unknown block {config['block']!r}")
    if config.get("seed") is not None and args.seed is not None:
        parser.error("seed given both in config and on the command line")
    seed = config.get("seed")
    if seed is None:
        seed = _resolve_seed(args, parser)

    try:
        kb = generate_kb(config["entity_count"], config["relations"],
                         config["density"], seed)
        if config["arch"] == "mlp":
            model = make_mlp(kb, hidden=config["hidden"],
                             embed_dim=config["hidden"], seed=seed)
        else:
            model = make_slp_linear(kb, context_dim=config["hidden"], seed=seed)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        result = train(model, kb, epochs=config["epochs"], lr=config["lr"])
    except RuntimeError as exc:
        report = Report(check="gradlab", passed=False, max_deviation=0.0,
                        details={"error": str(exc), "config": config})
        return _finish(report, args, seed)
    alignment = alignment_experiment(
        result.model, kb, config["block"],
        hyperparams={**config, "seed": seed})
    rep_query = kb.facts[0][0]
    edit = edit_step(result.model, rep_query, config["eta"], config["block"])
    neg_gap = abs(edit.exact_delta["neg"] + edit.exact_delta["id"])
    if config["arch"] == "slp_linear":
        exact = (all(c == -1.0 for c in alignment.cosines)
                 and alignment.excluded == 0 and neg_gap == 0.0)
        passed, deviation = exact, max(
            [abs(c + 1.0) for c in alignment.cosines] + [neg_gap], default=0.0)
    else:
        # measurement, not an assertion: magnitude is seed-dependent
        passed, deviation = True, 0.0
    if args.histogram:
        Path(args.histogram).write_text(alignment.histogram_csv(),
                                        encoding="utf-8")
    report = Report(
        check="gradlab", passed=passed, max_deviation=deviation,
        details={"alignment": alignment.to_dict(),
                 "final_loss": result.losses[-1] if result.losses else None,
                 "accuracy": result.accuracy,
                 "edit_step": {"query": list(rep_query),
                               "eta": config["eta"],
                               "exact": edit.exact_delta,
                               "first_order": edit.first_order_delta},
                 "histogram_csv": str(args.histogram) if args.histogram else None},
    )
    return _finish(report, args, seed)


def _cmd_audit(args, parser) -> int:
    seed = _resolve_seed(args, parser)
    algebra, built = _build_from_args(args, seed)
    families = compute_families(algebra)
    if not 0 <= args.family < len(families):
        parser.error(f"--family must be in [0, {len(families)})")
    report = propagation_audit(built.feature_map, families, algebra,
                               args.family, args.eta)
    return _finish(report, args, seed)


# -------------------------------------------------------------------- parser

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None,
                     help="RNG seed (default: SLPLAB_SEED env, then 0)")
    sub.add_argument("--out", type=Path, default=None,
                     help="report path (default: stdout)")


def _add_build_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--entities", type=int, default=3)
    sub.add_argument("--relations", type=int, default=2,
                     help="number of random base relations")
    sub.add_argument("--density", type=float, default=0.5)
    sub.add_argument("--context-dim", type=int, default=None,
                     help="feature width (default: one per family)")
    sub.add_argument("--terms", type=int, default=None,
                     help="raw samples per block (default: fewest that can "
                          "reach full representative rank)")
    sub.add_argument("--parity", choices=["+", "-", "both"], default="both")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slplab",
        description="verification suites for sign-linked-pair feature geometry")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("relalg-laws", help="negation/converse/composition laws")
    sub.add_argument("--entities", type=int, default=3)
    sub.add_argument("--exhaustive", action="store_true",
                     help="run unary laws over every relation")
    sub.add_argument("--pairs", type=int, default=10000)
    sub.add_argument("--triples", type=int, default=1000)
    _add_common(sub)
    sub.set_defaults(func=_cmd_relalg_laws)

    sub = subs.add_parser("families", help="logical family partition as JSON")
    sub.add_argument("--entities", type=int, default=3)
    sub.add_argument("--relations", type=int, default=2)
    sub.add_argument("--density", type=float, default=0.5)
    _add_common(sub)
    sub.set_defaults(func=_cmd_families)

    sub = subs.add_parser("build-slp", help="seeded equivariant feature build")
    _add_build_flags(sub)
    sub.add_argument("--save", type=Path, default=None,
                     help="persist the feature map")
    sub.add_argument("--fmt", choices=["json", "csv"], default="json")
    _add_common(sub)
    sub.set_defaults(func=_cmd_build_slp)

    sub = subs.add_parser("verify-slp", help="re-check a stored feature map")
    sub.add_argument("--load", type=Path, required=True)
    sub.add_argument("--fmt", choices=["json", "csv"], default="json")
    sub.add_argument("--tol", type=float, default=numerics.REL_TOL,
                     help="equivariance tolerance for loaded maps")
    _add_common(sub)
    sub.set_defaults(func=_cmd_verify_slp)

    sub = subs.add_parser("factorize", help="factorized-form audit + negation split")
    _add_build_flags(sub)
    _add_common(sub)
    sub.set_defaults(func=_cmd_factorize)

    sub = subs.add_parser("isotypic", help="isotypic projector properties")
    _add_build_flags(sub)
    sub.add_argument("--tol", type=float, default=numerics.PROJECTOR_TOL)
    _add_common(sub)
    sub.set_defaults(func=_cmd_isotypic)

    sub = subs.add_parser("parity", help="matched-parity decomposition audit")
    _add_build_flags(sub)
    sub.add_argument("--tol", type=float, default=0.0)
    _add_common(sub)
    sub.set_defaults(func=_cmd_parity)

    sub = subs.add_parser("kernel-stability",
                          help="conjunction kernel stability on a worlds model")
    sub.add_argument("--atoms", type=int, default=3)
    sub.add_argument("--worlds", type=int, default=8)
    sub.add_argument("--depth", type=int, default=2)
    _add_common(sub)
    sub.set_defaults(func=_cmd_kernel_stability)

    sub = subs.add_parser("fit-bilinear",
                          help="symmetric bilinear fit on a worlds model")
    sub.add_argument("--atoms", type=int, default=3)
    sub.add_argument("--worlds", type=int, default=8)
    sub.add_argument("--depth", type=int, default=2)
    sub.add_argument("--tol", type=float, default=1e-9)
    _add_common(sub)
    sub.set_defaults(func=_cmd_fit_bilinear)

    sub = subs.add_parser("collapse", help="idempotence-vs-sign-flip certificate")
    sub.add_argument("--atoms", type=int, default=1)
    sub.add_argument("--dim", type=int, default=4)
    sub.add_argument("--neg-equiv", action=argparse.BooleanOptionalAction,
                     default=True)
    sub.add_argument("--tolerance", type=float, default=1e-8)
    _add_common(sub)
    sub.set_defaults(func=_cmd_collapse)

    sub = subs.add_parser("gradlab", help="gradient alignment experiment")
    sub.add_argument("--config", type=Path, required=True,
                     help="JSON run config")
    sub.add_argument("--histogram", type=Path, default=None,
                     help="write the cosine histogram CSV here")
    _add_common(sub)
    sub.set_defaults(func=_cmd_gradlab)

    sub = subs.add_parser("audit", help="rank-one edit propagation audit")
    _add_build_flags(sub)
    sub.add_argument("--family", type=int, default=0)
    sub.add_argument("--eta", type=float, default=0.1)
    _add_common(sub)
    sub.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
