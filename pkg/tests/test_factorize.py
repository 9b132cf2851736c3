"""Tensor-factorized builds: form audits, splits, isotypic pieces, Hom law."""

import itertools

import numpy as np
import pytest

from conftest import random_proper_relation
from slplab.factorize import (BlockSpec, ConverseInvarianceError,
                              FactorizedMap, Term, TensorBlock,
                              assemble_rows, build_slp_map,
                              commutant_hom_dimension, group_average,
                              hom_dimension_check, involution_split,
                              isotypic_decompose, negation_split,
                              pair_space_representation, pair_swap_matrix,
                              parity_decompose, parity_involution,
                              relation_converse_matrix,
                              relation_sign_representation,
                              verify_factorized_form)
from slplab.featspace import FeatureMap, check_slp, lift_renaming
from slplab.numerics import PROJECTOR_TOL
from slplab.queryspace import (GroupElementH, Query, compute_families,
                               enumerate_queries, symmetric_group)
from slplab.relalg import EntitySet, Relation, close_unary


def build(algebra, dim, seed, terms=1, parity=None):
    return build_slp_map(algebra, [BlockSpec(dim, terms, parity)], seed)


# --------------------------------------------------------------- form audit

def test_verify_passes_on_builds(algebra_3):
    for seed in range(10):
        built = build(algebra_3, 9, seed)
        report = verify_factorized_form(built)
        assert report.passed and report.max_deviation == 0.0
        assert report.details["rows_exact"] is True
        assert report.details["sign_faults"] == []


def test_injected_sign_fault_located(algebra_3):
    built = build(algebra_3, 9, 0)
    block = built.blocks[0]
    term = block.terms[0]
    v_bad = term.v.copy()
    r = 0
    v_bad[algebra_3.neg(r)] = v_bad[r]  # break v(not r) = -v(r)
    bad_term = Term(term.u, v_bad, term.parity)
    bad_block = TensorBlock(block.context_dim,
                            (bad_term,) + block.terms[1:])
    rows = assemble_rows((bad_block,), built.feature_map.queries)
    broken = FactorizedMap(algebra_3, (bad_block,),
                           FeatureMap(built.feature_map.queries, rows))
    report = verify_factorized_form(broken)
    assert not report.passed
    faults = report.details["sign_faults"]
    assert faults, "fault must be reported"
    located = {(f["block"], f["term"], f["relation"]) for f in faults}
    # both members of the complement pair show the violation
    assert (0, 0, r) in located and (0, 0, algebra_3.neg(r)) in located
    expected = abs(2.0 * term.v[r])
    assert any(np.isclose(f["deviation"], expected) for f in faults)


def test_rows_recomputed_exactly_multi_block(algebra_3):
    built = build_slp_map(algebra_3, [BlockSpec(4, 2, None),
                                      BlockSpec(3, 1, "+")], seed=5)
    assert verify_factorized_form(built).passed
    rebuilt = assemble_rows(built.blocks, built.feature_map.queries)
    assert np.array_equal(rebuilt, built.feature_map.matrix)


def test_term_validation():
    with pytest.raises(ValueError):
        Term(np.zeros((2, 3, 4)), np.zeros(4))
    with pytest.raises(ValueError):
        Term(np.zeros((2, 2, 4)), np.zeros((4, 1)))
    with pytest.raises(ValueError):
        Term(np.zeros((2, 2, 4)), np.zeros(4), "x")
    with pytest.raises(ValueError):
        TensorBlock(3, (Term(np.zeros((2, 2, 4)), np.zeros(4)),))


# ------------------------------------------------------------ negation split

def test_negation_split_is_minus_identity_sector(algebra_3):
    families = compute_families(algebra_3)
    built = build(algebra_3, len(families), 1)
    split = negation_split(built)
    assert split.plus_dim == 0
    assert split.minus_dim == len(families)
    assert split.span_dim == len(families)
    # ambient projectors: minus projector acts as identity on every row
    rows = built.feature_map.matrix
    assert np.max(np.abs(rows @ split.minus_projector.T - rows)) <= 1e-9
    assert np.max(np.abs(rows @ split.plus_projector.T)) <= 1e-9


def test_involution_split_validates():
    with pytest.raises(ValueError):
        involution_split(np.array([[1.0, 1.0], [0.0, 1.0]]))
    plus, minus = involution_split(np.diag([1.0, -1.0, 1.0]))
    assert np.allclose(plus + minus, np.eye(3))
    assert np.allclose(plus @ minus, 0)


# ----------------------------------------------------------------- isotypic

@pytest.mark.parametrize("n", [2, 3, 4])
def test_isotypic_projector_properties(n):
    entity_set = EntitySet.of_size(n)
    rng = np.random.default_rng(n)
    base = random_proper_relation(entity_set, rng, name="r0")
    algebra = close_unary([base])
    families = compute_families(algebra)
    built = build(algebra, len(families), seed=n)
    projectors, props = isotypic_decompose(built)
    assert props["idempotence"] <= PROJECTOR_TOL
    assert props["annihilation"] <= PROJECTOR_TOL
    assert props["completeness_on_span"] <= PROJECTOR_TOL
    assert props["commutation"] <= PROJECTOR_TOL
    assert sum(p.image_dim for p in projectors) == props["span_dim"]


def test_trivial_isotypic_piece_matches_group_average(algebra_3):
    families = compute_families(algebra_3)
    built = build(algebra_3, len(families), 2)
    perms = symmetric_group(3)
    lifts = [lift_renaming(built.feature_map, GroupElementH(p, 1), algebra_3)
             for p in perms]
    avg = group_average([l.matrix for l in lifts])
    projectors, _ = isotypic_decompose(built)
    trivial = next(p for p in projectors if p.irrep == (3,))
    assert np.max(np.abs(trivial.matrix - avg)) <= 1e-9


def test_isotypic_rejects_large_groups():
    entity_set = EntitySet.of_size(6)
    base = Relation.from_pairs(entity_set, [(0, 1)], "r0")
    algebra = close_unary([base])
    built = build(algebra, 4, 0)
    with pytest.raises(ValueError):
        isotypic_decompose(built)


def test_pair_space_rep_is_permutation_homomorphism():
    for n in (2, 3):
        perms = symmetric_group(n)
        mats = pair_space_representation(n, perms)
        table = dict(zip(perms, mats))
        for p, q in itertools.product(perms, perms):
            composed = tuple(p[q[i]] for i in range(n))
            assert np.array_equal(table[p] @ table[q], table[composed])


# -------------------------------------------------------------- parity split

def test_pair_swap_split_dims_n2():
    algebra = close_unary([Relation.from_pairs(EntitySet.of_size(2),
                                               [(0, 1)], "r0")])
    inv = parity_involution(algebra)
    assert inv.pair_dims == (3, 1)


@pytest.mark.parametrize("n,expected", [(2, (3, 1)), (3, (6, 3)), (4, (10, 6))])
def test_pair_swap_split_dims_formula(n, expected):
    # (I +- swap)/2 project onto symmetric/antisymmetric pair combinations
    algebra = close_unary([Relation.from_pairs(EntitySet.of_size(n),
                                               [(0, 1)], "r0")])
    inv = parity_involution(algebra)
    assert inv.pair_dims == expected
    assert inv.pair_dims == (n * (n + 1) // 2, n * (n - 1) // 2)
    assert sum(inv.rel_dims) == algebra.size


def test_swap_and_converse_matrices_are_involutions():
    for n in (2, 3):
        swap = pair_swap_matrix(n)
        assert np.array_equal(swap @ swap, np.eye(n * n))
    algebra = close_unary([Relation.from_pairs(EntitySet.of_size(3),
                                               [(0, 1), (1, 2)], "r0")])
    conv = relation_converse_matrix(algebra)
    assert np.array_equal(conv @ conv, np.eye(algebra.size))


def test_parity_decompose_round_trip(algebra_3):
    built = build(algebra_3, 9, 3)
    decomp = parity_decompose(built)
    assert decomp.max_cross_residual == 0.0
    queries = built.feature_map.queries
    for original_block, pairs in zip(built.blocks, decomp.blocks):
        terms = tuple(t for pair in pairs for t in (pair.plus, pair.minus))
        rebuilt_block = TensorBlock(original_block.context_dim, terms)
        rebuilt = assemble_rows((rebuilt_block,), queries)
        original = assemble_rows((original_block,), queries)
        assert np.max(np.abs(rebuilt - original)) <= 1e-12
        for pair in pairs:
            assert np.array_equal(pair.plus.u, pair.plus.u.transpose(1, 0, 2))
            assert np.array_equal(pair.minus.u, -pair.minus.u.transpose(1, 0, 2))


def test_mismatched_parity_term_raises(algebra_3):
    rng = np.random.default_rng(7)
    n = 3
    raw = rng.uniform(-1.0, 1.0, size=(n, n, 4))
    u_antisym = (raw - raw.transpose(1, 0, 2)) / 2.0
    # v is converse-even: the mismatch (u odd, v even) breaks rev-invariance
    v = np.zeros(algebra_3.size)
    v[0] = 1.0
    v[algebra_3.neg(0)] = -1.0
    v[algebra_3.conv(0)] = 1.0
    v[algebra_3.neg(algebra_3.conv(0))] = -1.0
    term = Term(u_antisym, v)
    block = TensorBlock(4, (term,))
    queries = enumerate_queries(algebra_3)
    fmap = FeatureMap(queries, assemble_rows((block,), queries))
    mismatched = FactorizedMap(algebra_3, (block,), fmap)
    with pytest.raises(ConverseInvarianceError) as excinfo:
        parity_decompose(mismatched)
    assert excinfo.value.deviation > 0.0
    q = excinfo.value.query
    # the recorded worst query really deviates by the recorded amount
    idx = fmap.index()
    rev_q = Query(q.tail, algebra_3.conv(q.rel), q.head)
    dev = np.max(np.abs(fmap.matrix[idx[rev_q]] - fmap.matrix[idx[q]]))
    assert dev == excinfo.value.deviation


def test_single_parity_builds(algebra_3):
    families = compute_families(algebra_3)
    plus_only = build(algebra_3, 9, 4, parity="+")
    minus_only = build(algebra_3, 9, 5, parity="-")
    for built in (plus_only, minus_only):
        assert verify_factorized_form(built).passed
        assert parity_decompose(built).max_cross_residual == 0.0
    # pure-symmetric features identify (h,r,t) with (t,r,h): rank deficit
    assert not check_slp(plus_only.feature_map, families).passed


def test_converse_fixed_relation_forces_zero_odd_factor():
    entity_set = EntitySet.of_size(3)
    sym = Relation.from_pairs(entity_set, [(0, 1), (1, 0)], "sym")
    algebra = close_unary([sym])
    built = build(algebra, 6, 0, parity="-")
    for block in built.blocks:
        for term in block.terms:
            assert np.array_equal(term.v, np.zeros(algebra.size))


# ------------------------------------------------------------------ Hom law

def character_hom_dim(source_mats, target_mats):
    """Independent oracle: dim Hom = (1/|G|) sum of character products."""
    total = sum(float(np.trace(a)) * float(np.trace(b))
                for a, b in zip(source_mats, target_mats))
    value = total / len(source_mats)
    assert np.isclose(value, round(value))
    return round(value)


def _sign_rep_1d(order=2):
    return [np.eye(1), -np.eye(1)][:order]


def test_commutant_matches_character_oracle():
    for n in (2, 3):
        perms = symmetric_group(n)
        pair_rep = pair_space_representation(n, perms)
        trivial = [np.eye(1) for _ in perms]
        for source, target in [(pair_rep, pair_rep), (trivial, pair_rep),
                               (pair_rep, trivial)]:
            assert commutant_hom_dimension(source, target) == \
                character_hom_dim(source, target)


def test_standard_rep_self_hom_is_one():
    from slplab.characters import irrep_matrices
    perms = symmetric_group(3)
    std = irrep_matrices("standard", perms, 3)
    assert commutant_hom_dimension(std, std) == 1


def test_hom_dimension_product_law_three_configs(algebra_3):
    perms3 = symmetric_group(3)
    perms2 = symmetric_group(2)
    pair3 = pair_space_representation(3, perms3)
    pair2 = pair_space_representation(2, perms2)
    rel_reg = relation_sign_representation(algebra_3)
    sign1 = [np.eye(1), -np.eye(1)]
    triv1 = [np.eye(1), np.eye(1)]
    configs = [
        (pair3, pair3, rel_reg, rel_reg),
        (pair3, pair3, rel_reg, sign1),
        (pair2, pair2, sign1, sign1),
        (pair3, [np.eye(1) for _ in perms3], rel_reg, triv1),
    ]
    for ctx_rep, ctx_target, rel_rep, rel_target in configs:
        report = hom_dimension_check(ctx_rep, ctx_target, rel_rep, rel_target)
        assert report.passed, report.details
        d = report.details
        assert d["dim_hom_context"] * d["dim_hom_relation"] == \
            d["dim_hom_product"]
        # cross-check every factor against the character oracle
        assert d["dim_hom_context"] == character_hom_dim(ctx_rep, ctx_target)
        assert d["dim_hom_relation"] == character_hom_dim(rel_rep, rel_target)


def test_relation_sign_representation_is_z2_action(algebra_3):
    eye, neg = relation_sign_representation(algebra_3)
    assert np.array_equal(eye, np.eye(algebra_3.size))
    assert np.array_equal(neg @ neg, np.eye(algebra_3.size))
    assert not np.array_equal(neg, np.eye(algebra_3.size))
