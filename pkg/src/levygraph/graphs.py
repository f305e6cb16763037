"""Generalized amputated Feynman graphs stored as (K, I) pairs.

A graph of order m has full vertices 1..m with p_1..p_m legs.  Legs are
addressed by flat positions: leg s of vertex q sits at ``offset(q) + s - 1``.
K holds the positions wired to outer empty vertices, I partitions the rest
into inner empty vertices.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Sequence

from .combinatorics import (
    PARTITION_CAP,
    SUBSET_CAP,
    CapExceeded,
    Label,
    LabelSet,
    MalformedPartition,
    Partition,
    index_partitions,
    is_connected_pair,
)
from .errors import LevyGraphError

CANON_VERTEX_CAP = 16


class GraphError(LevyGraphError, ValueError):
    category = "model"


@dataclass(frozen=True)
class FeynmanGraph:
    leg_counts: tuple[int, ...]
    K: tuple[int, ...]
    I: tuple[tuple[int, ...], ...]

    @property
    def order(self) -> int:
        return len(self.leg_counts)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate((0,) + self.leg_counts[:-1])) if self.leg_counts else ()

    @cached_property
    def owner(self) -> tuple[int, ...]:
        """Full vertex (0-based) owning each leg position."""
        return tuple(q for q, p in enumerate(self.leg_counts) for _ in range(p))

    def label(self, pos: int) -> Label:
        q = self.owner[pos]
        return (pos - self.offsets[q] + 1, q + 1)

    @cached_property
    def connected(self) -> bool:
        if self.order == 0:
            return False
        legs = [frozenset(range(o, o + p)) for o, p in zip(self.offsets, self.leg_counts)]
        return is_connected_pair(legs, self.K, self.I)

    @property
    def n_legs(self) -> int:
        return sum(self.leg_counts)


def pair_to_graph(leg_counts: Sequence[int], K: Iterable[Label], I: Iterable[Iterable[Label]]) -> FeynmanGraph:
    """Build the graph of a (K, I) pair given in (s, q) labels."""
    omega = LabelSet(tuple(leg_counts))
    index = {lab: i for i, lab in enumerate(omega.labels)}
    try:
        k_pos = sorted(index[lab] for lab in K)
        blocks = [sorted(index[lab] for lab in block) for block in I]
    except KeyError as exc:
        raise GraphError(f"label {exc.args[0]!r} not in Ω{omega.leg_counts}") from None
    used = k_pos + [x for b in blocks for x in b]
    if len(set(used)) != len(used):
        raise GraphError("K and the blocks of I overlap")
    if len(used) != len(omega):
        raise GraphError("K and I do not cover Ω")
    if any(not b for b in blocks):
        raise MalformedPartition("empty block")
    canon = tuple(sorted((tuple(b) for b in blocks), key=lambda b: b[0]))
    return FeynmanGraph(omega.leg_counts, tuple(k_pos), canon)


def graph_to_pair(G: FeynmanGraph) -> tuple[frozenset[Label], Partition]:
    return frozenset(G.label(x) for x in G.K), Partition.of([[G.label(x) for x in b] for b in G.I])


def is_connected(G: FeynmanGraph) -> bool:
    """Connectedness; the order-0 empty graph is not counted as connected."""
    return G.connected


@lru_cache(maxsize=None)
def _allowed_partitions(n: int, pruned_sizes: frozenset[int]) -> tuple[tuple[tuple[int, ...], ...], ...]:
    parts = index_partitions(n)
    if not pruned_sizes:
        return parts
    return tuple(p for p in parts if not any(len(b) in pruned_sizes for b in p))


def graphs_for_legs(leg_counts: Sequence[int], pruned_sizes: frozenset[int] = frozenset()) -> Iterator[FeynmanGraph]:
    """All (K, I) pairs on Ω(leg_counts): K by binary counting, I by growth strings."""
    leg_counts = tuple(leg_counts)
    n = sum(leg_counts)
    if n > SUBSET_CAP:
        raise CapExceeded(f"{n} legs exceed the subset cap {SUBSET_CAP}")
    if n > PARTITION_CAP:
        raise CapExceeded(f"{n} legs exceed the partition cap {PARTITION_CAP}")
    for mask in range(1 << n):
        K = tuple(i for i in range(n) if mask >> i & 1)
        rest = tuple(i for i in range(n) if not mask >> i & 1)
        for blocks in _allowed_partitions(len(rest), pruned_sizes):
            yield FeynmanGraph(leg_counts, K, tuple(tuple(rest[i] for i in b) for b in blocks))


def _degrees_of(pot_or_degrees) -> tuple[int, ...]:
    if hasattr(pot_or_degrees, "nonzero_degrees"):
        return pot_or_degrees.nonzero_degrees()
    return tuple(sorted(set(int(p) for p in pot_or_degrees)))


def enumerate_graphs(m: int, pot, prune_zero_C: Iterable[int] = ()) -> Iterator[FeynmanGraph]:
    """Every element of F̄(m): all ordered leg-count tuples over the nonzero
    degrees of ``pot``, all K, all I.  Blocks whose size lies in
    ``prune_zero_C`` (orders with C^(n) ≡ 0) are skipped."""
    if m < 0:
        raise ValueError("order must be non-negative")
    degrees = _degrees_of(pot)
    pruned = frozenset(prune_zero_C)
    for legs in itertools.product(degrees, repeat=m):
        yield from graphs_for_legs(legs, pruned)


def count_graphs(m: int, pot, prune_zero_C: Iterable[int] = ()) -> int:
    return sum(1 for _ in enumerate_graphs(m, pot, prune_zero_C))


# --- topological classes ---------------------------------------------------


def canonical_key(G: FeynmanGraph) -> bytes:
    """Key invariant under relabelling inner empty vertices, outer empty
    vertices, legs within a full vertex and the full vertices themselves."""
    m = G.order
    if m > CANON_VERTEX_CAP:
        raise CapExceeded(f"{m} full vertices exceed the canonicalization cap")
    owner = G.owner
    outer = [0] * m
    for x in G.K:
        outer[owner[x]] += 1
    blocks = []
    for b in G.I:
        counts = [0] * m
        for x in b:
            counts[owner[x]] += 1
        blocks.append(counts)
    labels = [(G.leg_counts[j], outer[j]) for j in range(m)]
    # only orderings that sort the (legs, outer) sequence can be minimal
    groups: dict[tuple[int, int], list[int]] = {}
    for j in sorted(range(m), key=lambda j: labels[j]):
        groups.setdefault(labels[j], []).append(j)
    ordered_groups = [groups[k] for k in sorted(groups)]
    best = None
    for choice in itertools.product(*(itertools.permutations(g) for g in ordered_groups)):
        perm = [j for part in choice for j in part]
        cand = tuple(sorted(tuple(c[j] for j in perm) for c in blocks))
        if best is None or cand < best:
            best = cand
    seq = tuple(labels[j] for grp in ordered_groups for j in grp)
    return repr((seq, best)).encode()


@dataclass(frozen=True)
class TopoClass:
    canonical_key: bytes
    multiplicity: int
    representative: FeynmanGraph

    @property
    def connected(self) -> bool:
        return self.representative.connected


def _distinct_orderings(legs: Sequence[int]) -> int:
    n = math.factorial(len(legs))
    for c in Counter(legs).values():
        n //= math.factorial(c)
    return n


@lru_cache(maxsize=256)
def _classes_cached(m: int, degrees: tuple[int, ...], pruned: frozenset[int]) -> tuple[TopoClass, ...]:
    found: dict[bytes, list] = {}
    for legs in itertools.combinations_with_replacement(degrees, m):
        weight = _distinct_orderings(legs)
        for G in graphs_for_legs(legs, pruned):
            key = canonical_key(G)
            entry = found.get(key)
            if entry is None:
                found[key] = [weight, G]
            else:
                entry[0] += weight
    return tuple(TopoClass(k, found[k][0], found[k][1]) for k in sorted(found))


def topological_classes(m: int, pot, prune_zero_C: Iterable[int] = ()) -> tuple[TopoClass, ...]:
    """Topological graphs of F̄(m) with multiplicities, sorted by key."""
    return _classes_cached(m, _degrees_of(pot), frozenset(prune_zero_C))


def group_by_key(graphs: Iterable[FeynmanGraph]) -> dict[bytes, TopoClass]:
    """Multiplicity census of an explicit graph stream."""
    found: dict[bytes, list] = {}
    for G in graphs:
        key = canonical_key(G)
        if key in found:
            found[key][0] += 1
        else:
            found[key] = [1, G]
    return {k: TopoClass(k, n, G) for k, (n, G) in found.items()}


def merge_censuses(*parts: dict[bytes, TopoClass]) -> dict[bytes, TopoClass]:
    """Associative merge of per-worker multiplicity maps."""
    out: dict[bytes, TopoClass] = {}
    for part in parts:
        for k, c in part.items():
            if k in out:
                out[k] = TopoClass(k, out[k].multiplicity + c.multiplicity, out[k].representative)
            else:
                out[k] = c
    return out


# --- quadratic potentials: graphs with directed edges ----------------------

End = tuple[str, int]


@dataclass(frozen=True)
class QuadGraph:
    """m directed edges between inner empty and outer empty vertices."""

    edges: tuple[tuple[End, End], ...]
    n_inner: int
    n_outer: int

    def __post_init__(self):
        hits = Counter(e for edge in self.edges for e in edge if e[0] == "outer")
        if any(hits[("outer", k)] != 1 for k in range(self.n_outer)) or len(hits) != self.n_outer:
            raise GraphError("every outer empty vertex must be hit by exactly one edge")

    @property
    def order(self) -> int:
        return len(self.edges)

    def inner_ends(self) -> list[list[tuple[int, int]]]:
        """For each inner vertex the incident (edge, end) slots; a loop shows twice."""
        out: list[list[tuple[int, int]]] = [[] for _ in range(self.n_inner)]
        for a, edge in enumerate(self.edges):
            for side, (kind, idx) in enumerate(edge):
                if kind == "inner":
                    out[idx].append((a, side))
        return out

    @property
    def connected(self) -> bool:
        if not self.edges:
            return False
        parent = list(range(len(self.edges)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for slots in self.inner_ends():
            for (a, _), (b, _) in zip(slots, slots[1:]):
                parent[find(a)] = find(b)
        return len({find(a) for a in range(len(self.edges))}) == 1


def feynman_to_quad(G: FeynmanGraph) -> QuadGraph:
    if any(p != 2 for p in G.leg_counts):
        raise GraphError("quadratic correspondence needs two legs per full vertex")
    where: dict[int, End] = {}
    for k, x in enumerate(G.K):
        where[x] = ("outer", k)
    for b, block in enumerate(G.I):
        for x in block:
            where[x] = ("inner", b)
    edges = tuple((where[2 * q], where[2 * q + 1]) for q in range(G.order))
    return QuadGraph(edges, len(G.I), len(G.K))


def enumerate_quad_graphs(m: int, prune_zero_C: Iterable[int] = ()) -> Iterator[QuadGraph]:
    """Q̄(m), via the bijection with F̄(m) for V quadratic (vertex ↦ edge)."""
    if 2 * m > PARTITION_CAP:
        raise CapExceeded(f"order {m} exceeds the quadratic graph cap")
    for G in graphs_for_legs((2,) * m, frozenset(prune_zero_C)):
        yield feynman_to_quad(G)


def dump_graph(G: FeynmanGraph) -> str:
    """``p=(..) K={..} I=[{..},..] connected=0|1 key=<hex>`` debug line."""

    def fmt(labels):
        return "{" + ",".join(f"({s},{q})" for s, q in sorted(labels, key=lambda l: (l[1], l[0]))) + "}"

    K, I = graph_to_pair(G)
    p = "(" + ",".join(str(x) for x in G.leg_counts) + ")"
    blocks = "[" + ",".join(fmt(b) for b in I) + "]"
    return f"p={p} K={fmt(K)} I={blocks} connected={int(G.connected)} key={canonical_key(G).hex()}"
