"""Symmetric-group characters and small explicit irreducible representations.

Characters are computed by the Murnaghan-Nakayama rule in the beta-number
(abacus) encoding: removing a border strip of length k from a partition is
moving one bead from position b to the empty position b - k, with sign
(-1)^(number of beads strictly between them).  Everything here targets the
desk scale n <= 5, where conjugacy classes are cycle types and all complex
irreducibles are realizable over the reals, so the usual isotypic projector
formula applies verbatim to real representations.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np


def partitions(n: int) -> list[tuple[int, ...]]:
    """All partitions of n, weakly decreasing parts, lexicographic descending."""
    result: list[tuple[int, ...]] = []

    def rec(remaining: int, cap: int, acc: tuple[int, ...]) -> None:
        if remaining == 0:
            result.append(acc)
            return
        for part in range(min(cap, remaining), 0, -1):
            rec(remaining - part, part, acc + (part,))

    rec(n, n, ())
    return result


def cycle_type(perm: tuple[int, ...]) -> tuple[int, ...]:
    """Cycle lengths of a permutation, sorted descending."""
    n = len(perm)
    seen = [False] * n
    lengths = []
    for start in range(n):
        if seen[start]:
            continue
        length = 0
        i = start
        while not seen[i]:
            seen[i] = True
            i = perm[i]
            length += 1
        lengths.append(length)
    return tuple(sorted(lengths, reverse=True))


def class_size(mu: tuple[int, ...]) -> int:
    """Number of permutations with cycle type mu: n! / prod(i^m_i * m_i!)."""
    n = sum(mu)
    z = 1
    for length in set(mu):
        m = mu.count(length)
        z *= length ** m * math.factorial(m)
    return math.factorial(n) // z


def perm_sign(perm: tuple[int, ...]) -> int:
    """Sign of a permutation: (-1)^(n - number of cycles)."""
    return -1 if (len(perm) - len(cycle_type(perm))) % 2 else 1


def _beta(lam: tuple[int, ...], beads: int) -> tuple[int, ...]:
    padded = list(lam) + [0] * (beads - len(lam))
    return tuple(padded[i] + (beads - 1 - i) for i in range(beads))


def _beta_to_partition(beta: Iterable[int]) -> tuple[int, ...]:
    ordered = sorted(beta, reverse=True)
    lam = tuple(b - (len(ordered) - 1 - i) for i, b in enumerate(ordered))
    return tuple(p for p in lam if p > 0)


def _strip_removals(lam: tuple[int, ...],
                    k: int) -> Iterator[tuple[tuple[int, ...], int]]:
    """(partition after removing a k-strip, sign) for each removable strip."""
    beads = len(lam) if lam else 1
    beta = set(_beta(lam, beads))
    for b in sorted(beta):
        target = b - k
        if target < 0 or target in beta:
            continue
        crossed = sum(1 for c in beta if target < c < b)
        new_beta = (beta - {b}) | {target}
        yield _beta_to_partition(new_beta), -1 if crossed % 2 else 1


@lru_cache(maxsize=None)
def mn_character(lam: tuple[int, ...], mu: tuple[int, ...]) -> int:
    """Character of the irreducible labeled by lam at cycle type mu."""
    if sum(lam) != sum(mu):
        raise ValueError("partition sizes differ")
    if not mu:
        return 1
    k, rest = mu[0], mu[1:]
    total = 0
    for smaller, sign in _strip_removals(lam, k):
        total += sign * mn_character(smaller, rest)
    return total


def irrep_dimension(lam: tuple[int, ...]) -> int:
    return mn_character(lam, tuple([1] * sum(lam)))


def hook_length_dimension(lam: tuple[int, ...]) -> int:
    """Independent dimension oracle: n! over the product of hook lengths."""
    n = sum(lam)
    cols = [0] * (lam[0] if lam else 0)
    for row_len in lam:
        for j in range(row_len):
            cols[j] += 1
    prod = 1
    for i, row_len in enumerate(lam):
        for j in range(row_len):
            prod *= (row_len - j) + (cols[j] - i) - 1
    return math.factorial(n) // prod


def character_table(n: int) -> dict[tuple[int, ...], dict[tuple[int, ...], int]]:
    """table[lam][mu] over all partitions of n."""
    parts = partitions(n)
    return {lam: {mu: mn_character(lam, mu) for mu in parts} for lam in parts}


def permutation_matrix(perm: tuple[int, ...]) -> np.ndarray:
    n = len(perm)
    mat = np.zeros((n, n))
    for i, p in enumerate(perm):
        mat[p, i] = 1.0
    return mat


def trivial_rep(perms: Iterable[tuple[int, ...]]) -> list[np.ndarray]:
    return [np.ones((1, 1)) for _ in perms]


def sign_rep(perms: Iterable[tuple[int, ...]]) -> list[np.ndarray]:
    return [np.array([[float(perm_sign(p))]]) for p in perms]


def standard_rep(perms: Iterable[tuple[int, ...]], n: int) -> list[np.ndarray]:
    """The (n-1)-dimensional irreducible on the sum-zero subspace of R^n."""
    basis = _sum_zero_basis(n)
    return [basis.T @ permutation_matrix(p) @ basis for p in perms]


def _sum_zero_basis(n: int) -> np.ndarray:
    """Orthonormal columns spanning the sum-zero subspace (Helmert style)."""
    cols = []
    for k in range(1, n):
        v = np.zeros(n)
        v[:k] = 1.0
        v[k] = -k
        cols.append(v / np.linalg.norm(v))
    return np.stack(cols, axis=1)


def irrep_matrices(label: str, perms: list[tuple[int, ...]],
                   n: int) -> list[np.ndarray]:
    """Named small irreps ('trivial', 'sign', 'standard') as matrix lists."""
    if label == "trivial":
        return trivial_rep(perms)
    if label == "sign":
        return sign_rep(perms)
    if label == "standard":
        if n < 2:
            raise ValueError("standard irrep needs n >= 2")
        return standard_rep(perms, n)
    raise ValueError(f"unknown irrep label {label!r}")
