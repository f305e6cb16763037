"""Set partitions, subsets, Bell numbers and the connectedness test on (K, I) pairs.

Leg labels are pairs ``(s, q)``: leg ``s`` (1-based) of full vertex ``q``
(1-based).  Internally the enumerators work on flat integer positions
``0..n-1`` and map back to labels.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterator, Sequence

from .errors import LevyGraphError

SUBSET_CAP = 24
PARTITION_CAP = 14
BELL_CAP = 25


class CapExceeded(LevyGraphError, ValueError):
    category = "cap"


class MalformedPartition(LevyGraphError, ValueError):
    category = "model"


Label = tuple[int, int]


@dataclass(frozen=True)
class LabelSet:
    """Ω(p_1, …, p_m): the legs of m full vertices with p_j legs each."""

    leg_counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "leg_counts", tuple(int(p) for p in self.leg_counts))
        if any(p < 0 for p in self.leg_counts):
            raise ValueError("leg counts must be non-negative")

    @property
    def labels(self) -> tuple[Label, ...]:
        return tuple((s, q) for q, p in enumerate(self.leg_counts, 1) for s in range(1, p + 1))

    def __len__(self) -> int:
        return sum(self.leg_counts)

    def vertex_legs(self) -> tuple[frozenset[Label], ...]:
        """J_1, …, J_m."""
        return tuple(frozenset((s, q) for s in range(1, p + 1)) for q, p in enumerate(self.leg_counts, 1))


@dataclass(frozen=True)
class Partition:
    """Blocks in canonical order (each block sorted, blocks sorted by least element)."""

    blocks: tuple[tuple, ...]

    @classmethod
    def of(cls, blocks) -> "Partition":
        sorted_blocks = [tuple(sorted(b)) for b in blocks]
        if any(not b for b in sorted_blocks):
            raise MalformedPartition("empty block")
        return cls(tuple(sorted(sorted_blocks, key=lambda b: b[0])))

    @property
    def ground(self) -> frozenset:
        return frozenset(x for b in self.blocks for x in b)

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)


def enumerate_subsets(ground: Sequence[Hashable], cap: int = SUBSET_CAP) -> Iterator[tuple]:
    """All 2^n subsets in binary-counting order (bit i ↔ ground[i])."""
    items = tuple(ground)
    n = len(items)
    if n > cap:
        raise CapExceeded(f"{n} elements exceed the subset cap {cap}")
    for mask in range(1 << n):
        yield tuple(items[i] for i in range(n) if mask >> i & 1)


@lru_cache(maxsize=None)
def index_partitions(n: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All partitions of range(n) via restricted-growth strings, canonical order."""
    if n > PARTITION_CAP:
        raise CapExceeded(f"{n} elements exceed the partition cap {PARTITION_CAP}")
    if n == 0:
        return ((),)
    out = []
    rgs = [0] * n
    maxima = [0] * n  # maxima[i] = max(rgs[:i+1])
    while True:
        blocks: list[list[int]] = [[] for _ in range(maxima[-1] + 1)]
        for i, b in enumerate(rgs):
            blocks[b].append(i)
        out.append(tuple(tuple(b) for b in blocks))
        # next restricted-growth string in lexicographic order
        i = n - 1
        while i > 0 and rgs[i] > maxima[i - 1]:
            i -= 1
        if i == 0:
            break
        rgs[i] += 1
        maxima[i] = max(maxima[i - 1], rgs[i])
        for j in range(i + 1, n):
            rgs[j] = 0
            maxima[j] = maxima[i]
    return tuple(out)


def enumerate_partitions(ground: Sequence[Hashable], cap: int = PARTITION_CAP) -> Iterator[Partition]:
    items = tuple(ground)
    if len(items) > cap:
        raise CapExceeded(f"{len(items)} elements exceed the partition cap {cap}")
    for blocks in index_partitions(len(items)):
        yield Partition(tuple(tuple(items[i] for i in b) for b in blocks))


@lru_cache(maxsize=None)
def _bell_row(m: int) -> tuple[int, ...]:
    if m == 0:
        return (1,)
    prev = _bell_row(m - 1)
    row = [prev[-1]]
    for x in prev:
        row.append(row[-1] + x)
    return tuple(row)


def bell_number(m: int) -> int:
    """b_m from the Bell triangle."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if m > BELL_CAP:
        raise CapExceeded(f"Bell number index {m} exceeds cap {BELL_CAP}")
    return _bell_row(m)[0]


def lambert_level(m: float, tol: float = 1e-12) -> float:
    """Solve λ ln λ = m for λ > 1 by Newton iteration."""
    if m <= 0:
        raise ValueError("m must be positive")
    lam = max(1.5, m / math.log(m + 1.0) + 1.0)
    for _ in range(200):
        step = (lam * math.log(lam) - m) / (math.log(lam) + 1.0)
        lam -= step
        if abs(step) <= tol * lam:
            return lam
    raise ArithmeticError("Newton iteration for λ ln λ = m did not converge")


def bell_asymptotic(m: int) -> float:
    """b_m ≈ m^{-1/2} λ^{m+1/2} e^{λ-m-1} with λ ln λ = m."""
    if m < 1:
        raise ValueError("m must be at least 1")
    lam = lambert_level(m)
    return math.exp(-0.5 * math.log(m) + (m + 0.5) * math.log(lam) + lam - m - 1)


def borel_growth_constants(pbar: int = 2, n_max: int = 12) -> tuple[float, float]:
    """Constants (A', K) with b_{p̄N}/N! ≤ A' K^N N! for N ≤ n_max.

    A' is fixed by N = 0 and K is the smallest rate making every N ≤ n_max hold.
    """
    ratios = [bell_number(pbar * n) / math.factorial(n) ** 2 for n in range(n_max + 1)]
    a_prime = ratios[0]
    k = max((r / a_prime) ** (1.0 / n) for n, r in enumerate(ratios) if n)
    return a_prime, k


def h_factor(sizes: Sequence[int]) -> int:
    """Number of partitions of Σl objects into blocks of sizes l_1..l_q."""
    sizes = list(sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("block sizes must be a non-empty list of positive integers")
    total = math.factorial(sum(sizes))
    for s in sizes:
        total //= math.factorial(s)
    for mult in Counter(sizes).values():
        total //= math.factorial(mult)
    return total


@lru_cache(maxsize=None)
def integer_partitions(n: int, smallest: int = 1) -> tuple[tuple[int, ...], ...]:
    """Non-decreasing tuples of positive integers ≥ smallest summing to n."""
    if n == 0:
        return ((),)
    out = []
    for first in range(smallest, n + 1):
        for rest in integer_partitions(n - first, first):
            out.append((first,) + rest)
    return tuple(out)


def is_connected_pair(legs: Sequence[frozenset], K, I) -> bool:
    """Connectedness of (K, I): every full vertex reachable from every other
    through blocks of I.  ``legs`` are the per-vertex leg sets J_1..J_m."""
    m = len(legs)
    k_set = frozenset(K)
    owner = {}
    for j, J in enumerate(legs):
        for leg in J:
            owner[leg] = j
    covered = set()
    for block in I:
        if not block:
            raise MalformedPartition("empty block")
        for leg in block:
            if leg not in owner or leg in k_set or leg in covered:
                raise MalformedPartition(f"leg {leg!r} is unknown, in K, or repeated")
            covered.add(leg)
    if len(covered) + len(k_set) != len(owner):
        raise MalformedPartition("K and I do not cover all legs")
    if m <= 1:
        return True
    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for block in I:
        roots = {find(owner[leg]) for leg in block}
        first = roots.pop()
        for r in roots:
            parent[r] = first
    return len({find(j) for j in range(m)}) == 1
