"""Automorphism groups and orbits of finite structures over fixed parameters.

The group Aut(S/A) is found by individualisation/refinement: colour
refinement (1-dimensional Weisfeiler-Leman over all relation and function
graph tuples) prunes a backtracking search over partial bijections, and a
stabiliser-chain style traversal collects one generator per new basic orbit
point.  The product of the basic orbit lengths is the group order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable

import numpy as np

from .finstruct import Structure


@dataclass(frozen=True)
class PermGenSet:
    degree: int
    generators: tuple[tuple[int, ...], ...]
    order: int
    fixed: frozenset = frozenset()

    def __post_init__(self):
        for g in self.generators:
            if sorted(g) != list(range(self.degree)):
                raise ValueError(f"not a permutation of {self.degree} points: {g}")
            for a in self.fixed:
                if g[a] != a:
                    raise ValueError(f"generator moves fixed point {a}")


@dataclass(frozen=True)
class OrbitPartition:
    blocks: tuple[tuple, ...]
    index: dict

    @property
    def degree(self) -> int:
        return len(self.index)

    def block_of(self, x) -> tuple:
        return self.blocks[self.index[x]]

    def __len__(self):
        return len(self.blocks)


class UnionFind:
    def __init__(self, items: Iterable[Hashable]):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        x, y = self.find(x), self.find(y)
        if x != y:
            # smaller representative wins, keeps roots canonical
            if y < x:
                x, y = y, x
            self.parent[y] = x

    def classes(self) -> list[tuple]:
        groups: dict = {}
        for x in self.parent:
            groups.setdefault(self.find(x), []).append(x)
        return sorted(tuple(sorted(g)) for g in groups.values())


def partition_from_classes(classes) -> OrbitPartition:
    blocks = tuple(sorted(tuple(sorted(c)) for c in classes))
    index = {x: i for i, b in enumerate(blocks) for x in b}
    return OrbitPartition(blocks, index)


def orbits_under(generators, points, action) -> OrbitPartition:
    uf = UnionFind(points)
    for g in generators:
        for x in points:
            uf.union(x, action(g, x))
    return partition_from_classes(uf.classes())


class _Engine:
    """Refinement and search machinery bound to one structure.

    Large structures with only unary and binary tables are refined with
    count matrices; everything else uses tuple signatures, which are faster
    at small sizes.
    """

    MATRIX_THRESHOLD = 24

    def __init__(self, S: Structure):
        self.n = n = S.size
        tables = [S.relations[name] for name, _ in S.signature.relations]
        tables += [S.function_graph(name) for name, _ in S.signature.functions]
        self.tables = tables
        self.wide = n <= self.MATRIX_THRESHOLD or any(len(t) > 2 for tuples in tables for t in tuples)
        if self.wide:
            self.incidence = [[] for _ in range(n)]
            for rid, tuples in enumerate(tables):
                for t in tuples:
                    for pos, e in enumerate(t):
                        self.incidence[e].append((rid, pos, t))
            return
        cols, self.adjacency = [], []
        for tuples in tables:
            arity = len(next(iter(tuples))) if tuples else 0
            if arity == 1:
                col = np.zeros(n, dtype=np.int64)
                for (x,) in tuples:
                    col[x] = 1
                cols.append(col)
            elif arity == 2:
                adj = np.zeros((n, n), dtype=np.int64)
                for x, y in tuples:
                    adj[x, y] = 1
                self.adjacency.append((adj, adj.T.copy()))
        self.unary = np.stack(cols, axis=1) if cols else np.zeros((n, 0), dtype=np.int64)

    def _relabel(self, colors):
        """New colours and a canonical descriptor of the refinement step."""
        if self.wide:
            inc = self.incidence
            sigs = []
            for x in range(self.n):
                contrib = sorted((rid, pos, tuple(colors[e] for e in t)) for rid, pos, t in inc[x])
                sigs.append((colors[x], tuple(contrib)))
            return self._canonical(sigs)
        col = np.asarray(colors, dtype=np.int64)
        onehot = np.zeros((self.n, int(col.max()) + 1), dtype=np.int64)
        onehot[np.arange(self.n), col] = 1
        parts = [col[:, None], self.unary]
        for adj, adj_t in self.adjacency:
            parts.append(adj @ onehot)
            parts.append(adj_t @ onehot)
        rows = [tuple(r) for r in np.hstack(parts).tolist()]
        return self._canonical(rows)

    @staticmethod
    def _canonical(sigs):
        uniq = sorted(set(sigs))
        idx = {s: i for i, s in enumerate(uniq)}
        new = [idx[s] for s in sigs]
        counts = [0] * len(uniq)
        for c in new:
            counts[c] += 1
        return new, (uniq, counts)

    def refine(self, colors):
        ncol = len(set(colors))
        while True:
            new, desc = self._relabel(colors)
            k = max(new) + 1
            if k == ncol:
                return new
            colors, ncol = new, k

    def refine_pair(self, left, right):
        """Refine two colourings in lockstep; None if they become incompatible."""
        ncol = len(set(left))
        while True:
            left, dl = self._relabel(left)
            right, dr = self._relabel(right)
            if dl != dr:
                return None
            k = max(left) + 1
            if k == ncol:
                return left, right
            ncol = k

    @staticmethod
    def individualize(colors, x):
        out = list(colors)
        out[x] = max(colors) + 1
        return out

    @staticmethod
    def target_cell(colors):
        counts: dict = {}
        for c in colors:
            counts[c] = counts.get(c, 0) + 1
        nontrivial = [c for c, k in counts.items() if k > 1]
        if not nontrivial:
            return None
        c = min(nontrivial, key=lambda c: (counts[c], c))
        return [x for x, cx in enumerate(colors) if cx == c]

    def is_automorphism(self, perm) -> bool:
        return all(tuple(perm[e] for e in t) in tuples for tuples in self.tables for t in tuples)

    def search(self, left, right):
        """An automorphism mapping the left colouring onto the right one, or None."""
        cell = self.target_cell(left)
        if cell is None:
            perm = [0] * self.n
            where = {c: y for y, c in enumerate(right)}
            for x, c in enumerate(left):
                perm[x] = where[c]
            return tuple(perm) if self.is_automorphism(perm) else None
        x = cell[0]
        col = left[x]
        for y in (y for y, c in enumerate(right) if c == col):
            pair = self.refine_pair(self.individualize(left, x), self.individualize(right, y))
            if pair is None:
                continue
            found = self.search(*pair)
            if found is not None:
                return found
        return None

    def generators(self, fixed) -> tuple[list, int]:
        colors = [0] * self.n
        for rank, a in enumerate(sorted(fixed), start=1):
            colors[a] = rank
        gens: list = []
        order = self._level(self.refine(colors), gens)
        return gens, order

    def _level(self, colors, gens) -> int:
        cell = self.target_cell(colors)
        if cell is None:
            return 1
        b = cell[0]
        order = self._level(self.refine(self.individualize(colors, b)), gens)
        base_left = self.individualize(colors, b)
        failed: set = set()
        orbit = orbits_under(gens, cell, lambda g, x: g[x])
        for y in cell[1:]:
            if orbit.index[y] == orbit.index[b] or any(orbit.index[y] == orbit.index[z] for z in failed):
                continue
            pair = self.refine_pair(base_left, self.individualize(colors, y))
            perm = self.search(*pair) if pair is not None else None
            if perm is None:
                failed.add(y)
            else:
                gens.append(perm)
                orbit = orbits_under(gens, cell, lambda g, x: g[x])
        return order * len(orbit.block_of(b))


def _check_fixed(S, fixed):
    fixed = frozenset(fixed)
    bad = [a for a in fixed if not 0 <= a < S.size]
    if bad:
        raise ValueError(f"parameters outside the universe: {sorted(bad)}")
    return fixed


def automorphisms(S: Structure, fixed=()) -> PermGenSet:
    """Generators of the group of automorphisms of S fixing ``fixed`` pointwise."""
    fixed = _check_fixed(S, fixed)
    if S.size == 0:
        return PermGenSet(0, (), 1, fixed)
    gens, order = _Engine(S).generators(fixed)
    return PermGenSet(S.size, tuple(sorted(set(gens))), order, fixed)


def element_orbits(S: Structure, fixed=(), group: PermGenSet | None = None) -> OrbitPartition:
    group = group or automorphisms(S, fixed)
    return orbits_under(group.generators, range(S.size), lambda g, x: g[x])


def pair_orbits(S: Structure, fixed=(), group: PermGenSet | None = None) -> OrbitPartition:
    """Orbits of Aut(S/A) on ordered pairs under the diagonal action."""
    group = group or automorphisms(S, fixed)
    pairs = [(x, y) for x in range(S.size) for y in range(S.size)]
    return orbits_under(group.generators, pairs, lambda g, p: (g[p[0]], g[p[1]]))


def multiplicity(S: Structure, fixed, a: int) -> int:
    """Number of realisations of the type of ``a`` over ``fixed``: its orbit size."""
    if not 0 <= a < S.size:
        raise ValueError(f"element {a} outside the universe")
    return len(element_orbits(S, fixed).block_of(a))
