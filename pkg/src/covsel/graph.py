"""Decomposable (chordal) graph machinery.

Graphs are immutable values on vertices ``0..p-1``; all file and CLI I/O uses
1-based labels. Internally every graph also carries a tuple of adjacency
bitmasks, which is what the hot loops (legal-flip tests, enumeration, the
counting chain) work on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Graph",
    "PerfectSequence",
    "FlipContext",
    "NotDecomposableError",
    "is_decomposable",
    "perfect_sequence",
    "legal_flip",
    "legal_flip_bruteforce",
    "can_delete",
    "can_add",
    "flip_context",
    "split_sequence",
    "is_perfect_sequence",
    "maximal_cliques",
    "enumerate_decomposable",
    "decomposable_size_counts",
]

#: Largest p that ``enumerate_decomposable`` accepts without ``long_running``.
MAX_ENUM_P = 7


class NotDecomposableError(ValueError):
    pass


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True)
class Graph:
    """Undirected labelled graph, stored as a set of pairs ``(i, j)``, ``i < j``."""

    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        clean = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if i > j:
                i, j = j, i
            if i < 0 or j >= self.p:
                raise ValueError(f"edge {(i, j)} out of range for p={self.p}")
            clean.add((i, j))
        object.__setattr__(self, "edges", frozenset(clean))

    # -- constructors -------------------------------------------------------
    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls(p)

    @classmethod
    def complete(cls, p: int) -> "Graph":
        return cls(p, frozenset(itertools.combinations(range(p), 2)))

    @classmethod
    def chain(cls, p: int) -> "Graph":
        return cls(p, frozenset((i, i + 1) for i in range(p - 1)))

    @classmethod
    def cycle(cls, p: int) -> "Graph":
        edges = {(i, i + 1) for i in range(p - 1)}
        if p >= 3:
            edges.add((0, p - 1))
        return cls(p, frozenset(edges))

    @classmethod
    def from_adjacency(cls, adj: Sequence[int]) -> "Graph":
        """Build from adjacency bitmasks (one int per vertex)."""
        p = len(adj)
        return cls(p, frozenset((i, j) for i in range(p) for j in _bits(adj[i]) if j > i))

    @classmethod
    def from_matrix(cls, mat, tol: float = 0.0) -> "Graph":
        """Graph of the off-diagonal entries with ``|a_ij| > tol``."""
        a = np.asarray(mat)
        p = a.shape[0]
        iu, ju = np.triu_indices(p, 1)
        sel = np.abs(a[iu, ju]) > tol
        return cls(p, frozenset(zip(iu[sel].tolist(), ju[sel].tolist())))

    # -- views --------------------------------------------------------------
    @cached_property
    def adj(self) -> tuple[int, ...]:
        masks = [0] * self.p
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return tuple(masks)

    @property
    def size(self) -> int:
        return len(self.edges)

    @property
    def max_size(self) -> int:
        return self.p * (self.p - 1) // 2

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbors(self, v: int) -> set[int]:
        return set(_bits(self.adj[v]))

    def flipped(self, i: int, j: int) -> "Graph":
        e = (min(i, j), max(i, j))
        return Graph(self.p, self.edges ^ {e})

    def is_complete(self, vertices: Iterable[int]) -> bool:
        vs = list(vertices)
        return all(self.has_edge(a, b) for a, b in itertools.combinations(vs, 2))

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.p, self.p), dtype=int)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1
        return a

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {"p": self.p, "edges": [[i + 1, j + 1] for i, j in sorted(self.edges)]}

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        return cls(int(d["p"]), frozenset((int(i) - 1, int(j) - 1) for i, j in d["edges"]))

    def bitstring(self) -> str:
        """Row-major strict upper triangle, ``'1'`` for an edge."""
        return "".join(
            "1" if (i, j) in self.edges else "0"
            for i in range(self.p)
            for j in range(i + 1, self.p)
        )

    @classmethod
    def from_bitstring(cls, p: int, bits: str) -> "Graph":
        pairs = list(itertools.combinations(range(p), 2))
        if len(bits) != len(pairs):
            raise ValueError(f"expected {len(pairs)} bits for p={p}, got {len(bits)}")
        return cls(p, frozenset(pr for pr, b in zip(pairs, bits) if b == "1"))

    def __repr__(self) -> str:
        return f"Graph(p={self.p}, edges={sorted(self.edges)})"


@dataclass(frozen=True)
class PerfectSequence:
    """Cliques ``C_1..C_k`` in perfect order; ``separators[j]`` is ``H_{j-1} & C_j``.

    ``separators[0]`` is always the empty tuple so the two lists align.
    """

    cliques: tuple[tuple[int, ...], ...]
    separators: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.cliques)


@dataclass(frozen=True)
class FlipContext:
    """Host clique bookkeeping for flipping edge ``(i, j)``.

    ``clique`` is the unique maximal clique containing both endpoints in the
    graph where the edge is present; ``separator`` is ``clique - {i, j}``.
    """

    i: int
    j: int
    clique: tuple[int, ...]
    separator: tuple[int, ...]
    index: int | None = None

    @property
    def clique1(self) -> tuple[int, ...]:
        return tuple(v for v in self.clique if v != self.j)

    @property
    def clique2(self) -> tuple[int, ...]:
        return tuple(v for v in self.clique if v != self.i)


# ---------------------------------------------------------------------------
# bitmask kernels
# ---------------------------------------------------------------------------


def _mcs(adj: Sequence[int]) -> tuple[list[int], list[int]]:
    """Maximum cardinality search; ties go to the smallest label.

    Returns the visit order and, per visited vertex, the bitmask of its
    previously visited neighbours.
    """
    p = len(adj)
    weight = [0] * p
    unvisited = (1 << p) - 1
    order, parents = [], []
    visited = 0
    for _ in range(p):
        best, best_w = -1, -1
        for v in _bits(unvisited):
            if weight[v] > best_w:
                best, best_w = v, weight[v]
        order.append(best)
        parents.append(adj[best] & visited)
        visited |= 1 << best
        unvisited &= ~(1 << best)
        for w in _bits(adj[best] & unvisited):
            weight[w] += 1
    return order, parents


def _mask_is_clique(adj: Sequence[int], mask: int) -> bool:
    for v in _bits(mask):
        rest = mask & ~(1 << v)
        if adj[v] & rest != rest:
            return False
    return True


def _adj_is_chordal(adj: Sequence[int]) -> bool:
    _, parents = _mcs(adj)
    return all(_mask_is_clique(adj, pa) for pa in parents)


def _can_delete(adj: Sequence[int], i: int, j: int) -> bool:
    # (i,j) lies in a single maximal clique iff the common neighbours are complete
    return _mask_is_clique(adj, adj[i] & adj[j])


def _can_add(adj: Sequence[int], i: int, j: int) -> bool:
    # adding (i,j) keeps chordality iff i and j are disconnected once their
    # common neighbours are removed
    allowed = ~(adj[i] & adj[j])
    target = 1 << j
    reach = frontier = 1 << i
    while frontier:
        nxt = 0
        for v in _bits(frontier):
            nxt |= adj[v]
        nxt &= allowed & ~reach
        if nxt & target:
            return False
        reach |= nxt
        frontier = nxt
    return True


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def is_decomposable(g: Graph) -> bool:
    """True iff ``g`` is chordal (MCS followed by a zero fill-in check)."""
    return _adj_is_chordal(g.adj)


def perfect_sequence(g: Graph) -> PerfectSequence:
    """Cliques of a decomposable graph in a perfect (running-intersection) order.

    Raises
    ------
    NotDecomposableError
        If ``g`` is not chordal.
    """
    adj = g.adj
    order, parents = _mcs(adj)
    if not all(_mask_is_clique(adj, pa) for pa in parents):
        raise NotDecomposableError(f"{g!r} is not decomposable")
    p = g.p
    cliques = []
    for t in range(p):
        ladder = t == p - 1 or _popcount(parents[t + 1]) < _popcount(parents[t]) + 1
        if ladder:
            cliques.append(parents[t] | (1 << order[t]))
    seps = []
    hist = 0
    for c in cliques:
        seps.append(hist & c)
        hist |= c
    return PerfectSequence(
        tuple(tuple(_bits(c)) for c in cliques),
        tuple(tuple(_bits(s)) for s in seps),
    )


def maximal_cliques(g: Graph) -> list[frozenset[int]]:
    """All maximal cliques by brute force over vertex subsets (small p only)."""
    adj = g.adj
    complete = [m for m in range(1, 1 << g.p) if _mask_is_clique(adj, m)]
    cset = set(complete)
    out = []
    for m in complete:
        if not any((m | (1 << v)) in cset for v in range(g.p) if not m >> v & 1):
            out.append(frozenset(_bits(m)))
    return out


def is_perfect_sequence(g: Graph, sets: Sequence[Iterable[int]]) -> bool:
    """Check that ``sets`` is a perfect sequence of complete sets of ``g``.

    Every set must be complete, every vertex and edge covered, and each
    separator ``H_{j-1} & C_j`` contained in some earlier set.
    """
    masks = [sum(1 << v for v in s) for s in sets]
    adj = g.adj
    if not all(_mask_is_clique(adj, m) for m in masks):
        return False
    for i, j in g.edges:
        e = (1 << i) | (1 << j)
        if not any(m & e == e for m in masks):
            return False
    hist = 0
    for idx, m in enumerate(masks):
        sep = hist & m
        if idx > 0 and not any(sep & prev == sep for prev in masks[:idx]):
            return False
        hist |= m
    return hist == (1 << g.p) - 1


def legal_flip_bruteforce(g: Graph, i: int, j: int) -> bool:
    """Reference version of :func:`legal_flip`: flip and run the MCS test."""
    return is_decomposable(g) and is_decomposable(g.flipped(i, j))


def can_delete(g: Graph, i: int, j: int) -> bool:
    i, j = int(i), int(j)
    return g.has_edge(i, j) and _can_delete(g.adj, i, j)


def can_add(g: Graph, i: int, j: int) -> bool:
    i, j = int(i), int(j)
    return not g.has_edge(i, j) and i != j and _can_add(g.adj, i, j)


def legal_flip(g: Graph, i: int, j: int) -> bool:
    """True iff ``g`` with ``e_ij`` set to 0 and to 1 are both decomposable.

    ``g`` itself is assumed decomposable; only the flipped variant is tested,
    using the structural single-clique test for deletions and the
    separation test for additions.
    """
    i, j = int(i), int(j)
    if i == j:
        return False
    if g.has_edge(i, j):
        return _can_delete(g.adj, i, j)
    return _can_add(g.adj, i, j)


def flip_context(
    g: Graph, seq: PerfectSequence | None, i: int, j: int
) -> FlipContext:
    """Locate the clique hosting edge ``(i, j)`` for a delete/add move.

    If the edge is absent from ``g`` the context describes the graph after
    adding it; ``seq`` is then ignored (pass ``None``) unless it already
    belongs to that graph.

    Raises
    ------
    ValueError
        If the edge sits in two or more cliques, or the addition is illegal.
    """
    i, j = int(min(i, j)), int(max(i, j))
    if g.has_edge(i, j):
        host = g
        if not _can_delete(g.adj, i, j):
            raise ValueError(f"edge ({i}, {j}) lies in more than one clique")
    else:
        if not _can_add(g.adj, i, j):
            raise ValueError(f"adding edge ({i}, {j}) breaks decomposability")
        host = g.flipped(i, j)
        seq = None
    sep = tuple(_bits(host.adj[i] & host.adj[j]))
    clique = tuple(sorted(sep + (i, j)))
    index = None
    if seq is not None:
        hits = [q for q, c in enumerate(seq.cliques) if i in c and j in c]
        if len(hits) != 1:
            raise ValueError(f"edge ({i}, {j}) lies in {len(hits)} cliques of the sequence")
        index = hits[0]
        if tuple(seq.cliques[index]) != clique:
            raise ValueError("perfect sequence does not match the graph")
    return FlipContext(i, j, clique, sep, index)


def split_sequence(seq: PerfectSequence, ctx: FlipContext) -> list[tuple[int, ...]]:
    """Replace the host clique by its two halves, giving complete sets of ``g - (i,j)``.

    The half that avoids the host clique's own separator goes first, which
    keeps the running-intersection property.
    """
    if ctx.index is None:
        raise ValueError("flip context has no clique index; build it with a sequence")
    q = ctx.index
    s_q = set(seq.separators[q])
    first, second = ctx.clique1, ctx.clique2
    if ctx.j in s_q:
        first, second = second, first
    out = list(seq.cliques[:q]) + [first, second] + list(seq.cliques[q + 1 :])
    return [tuple(c) for c in out]


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def _extend_ok(adj: Sequence[int], m: int, nbr: int) -> bool:
    """Is the chordal graph ``adj`` (on m vertices) plus a vertex joined to ``nbr`` chordal?

    A new chordless cycle must run through the new vertex, enter and leave
    through two non-adjacent members of ``nbr``, and otherwise avoid ``nbr``.
    So it suffices that, for every component K of ``adj - nbr``, the members
    of ``nbr`` touching K form a clique.
    """
    if _mask_is_clique(adj, nbr):
        return True
    rest = ((1 << m) - 1) & ~nbr
    while rest:
        start = rest & -rest
        comp = frontier = start
        while frontier:
            nxt = 0
            for v in _bits(frontier):
                nxt |= adj[v]
            nxt &= rest & ~comp
            comp |= nxt
            frontier = nxt
        rest &= ~comp
        touch = 0
        for v in _bits(comp):
            touch |= adj[v]
        if not _mask_is_clique(adj, touch & nbr):
            return False
    return True


def _enum_adj(p: int) -> Iterator[list[int]]:
    # every induced subgraph of a chordal graph is chordal, so grow vertex by vertex
    def rec(adj: list[int], m: int):
        if m == p:
            yield adj
            return
        for nbr in range(1 << m):
            if _extend_ok(adj, m, nbr):
                new = adj + [nbr]
                for v in _bits(nbr):
                    new[v] |= 1 << m
                yield from rec(new, m + 1)

    yield from rec([], 0)


def _check_enum_bound(p: int, long_running: bool) -> None:
    if p < 1:
        raise ValueError("p must be >= 1")
    limit = 8 if long_running else MAX_ENUM_P
    if p > limit:
        raise ValueError(
            f"exhaustive enumeration refused for p={p} (limit {limit};"
            " p=8 needs long_running=True)"
        )


def enumerate_decomposable(p: int, long_running: bool = False) -> Iterator[Graph]:
    """Yield every decomposable graph on ``p`` labelled vertices exactly once."""
    _check_enum_bound(p, long_running)
    for adj in _enum_adj(p):
        yield Graph.from_adjacency(adj)


def decomposable_size_counts(p: int, long_running: bool = False) -> list[int]:
    """Exact ``A_{p,k}`` for ``k = 0..r`` by exhaustive enumeration."""
    _check_enum_bound(p, long_running)
    r = p * (p - 1) // 2
    counts = [0] * (r + 1)

    def rec(adj: list[int], m: int, size: int):
        if m == p:
            counts[size] += 1
            return
        for nbr in range(1 << m):
            if _extend_ok(adj, m, nbr):
                new = adj + [nbr]
                for v in _bits(nbr):
                    new[v] |= 1 << m
                rec(new, m + 1, size + _popcount(nbr))

    rec([], 0, 0)
    return counts
