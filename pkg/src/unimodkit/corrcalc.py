"""Finite correspondences: fibres, uniformity, ratios, composition and
orbit decomposition.

A correspondence is a nonempty relation ``C`` between explicit finite sets
``X`` and ``Y``.  Raw correspondences may have empty fibres; uniformity
requires every fibre on both sides to have the same positive size.  Ratios
are exact ``Fraction`` values.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable

from . import autgroup
from .errors import CorrespondenceError, InternalInconsistency, NonUniformError, ParseError
from .finstruct import Structure

Ratio = Fraction


def _sortkey(e):
    return (0, e, ()) if isinstance(e, int) else (1, 0, e)


@dataclass(frozen=True)
class Correspondence:
    domain: frozenset
    codomain: frozenset
    pairs: frozenset
    name: str = field(default="C", compare=False)
    structure: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "domain", frozenset(self.domain))
        object.__setattr__(self, "codomain", frozenset(self.codomain))
        object.__setattr__(self, "pairs", frozenset(tuple(p) for p in self.pairs))
        if not self.pairs:
            raise CorrespondenceError("a correspondence must be nonempty")
        for x, y in self.pairs:
            if x not in self.domain or y not in self.codomain:
                raise CorrespondenceError(f"pair {(x, y)} lies outside domain x codomain")

    def __len__(self):
        return len(self.pairs)

    def sorted_pairs(self):
        return sorted(self.pairs, key=lambda p: (_sortkey(p[0]), _sortkey(p[1])))


def identity(elements, name="id") -> Correspondence:
    elements = frozenset(elements)
    return Correspondence(elements, elements, {(x, x) for x in elements}, name)


def relation_corr(S: Structure, rel: str, domain=None, codomain=None) -> Correspondence:
    """A binary relation (or unary function graph) of ``S`` restricted to domain x codomain."""
    domain = frozenset(S.universe if domain is None else domain)
    codomain = frozenset(S.universe if codomain is None else codomain)
    if rel in S.relations:
        tuples = S.relations[rel]
    elif rel in S.functions:
        tuples = S.function_graph(rel)
    else:
        raise KeyError(f"no symbol {rel!r} in structure {S.name!r}")
    if any(len(t) != 2 for t in tuples):
        raise CorrespondenceError(f"{rel!r} is not binary")
    pairs = {(x, y) for x, y in tuples if x in domain and y in codomain}
    return Correspondence(domain, codomain, pairs, rel, S.name)


# -- fibres -------------------------------------------------------------------


@dataclass(frozen=True)
class FibreSummary:
    left: dict
    right: dict

    @property
    def left_histogram(self) -> dict:
        return dict(sorted(Counter(self.left.values()).items()))

    @property
    def right_histogram(self) -> dict:
        return dict(sorted(Counter(self.right.values()).items()))


def fibres(C: Correspondence) -> FibreSummary:
    left = dict.fromkeys(sorted(C.domain, key=_sortkey), 0)
    right = dict.fromkeys(sorted(C.codomain, key=_sortkey), 0)
    for x, y in C.pairs:
        left[x] += 1
        right[y] += 1
    return FibreSummary(left, right)


def is_uniform(C: Correspondence) -> tuple[int, int] | None:
    """``(k, l)`` if every left fibre has size k > 0 and every right fibre size l > 0."""
    fs = fibres(C)
    ks, ls = set(fs.left.values()), set(fs.right.values())
    if len(ks) == 1 and len(ls) == 1:
        (k,), (l,) = ks, ls
        if k > 0 and l > 0:
            return k, l
    return None


def _uniform_or_raise(C: Correspondence) -> tuple[int, int]:
    kl = is_uniform(C)
    if kl is None:
        fs = fibres(C)
        for side, table in (("left", fs.left), ("right", fs.right)):
            first = next(iter(table.values()))
            for e, size in table.items():
                if size == 0 or size != first:
                    raise NonUniformError(f"{C.name}: {side} fibre of {e!r} has size {size}", e)
        raise NonUniformError(f"{C.name} is not uniform")  # pragma: no cover
    return kl


def ratio(C: Correspondence) -> Ratio:
    k, l = _uniform_or_raise(C)
    return Fraction(k, l)


def is_balanced(C: Correspondence) -> bool:
    kl = is_uniform(C)
    return kl is not None and kl[0] == kl[1]


def inverse(C: Correspondence) -> Correspondence:
    return Correspondence(C.codomain, C.domain, {(y, x) for x, y in C.pairs}, f"{C.name}^-1", C.structure)


def compose(C: Correspondence, D: Correspondence) -> Correspondence:
    """``D o C``: pairs (a, c) with a middle witness b, (a, b) in C and (b, c) in D."""
    if C.codomain != D.domain:
        raise CorrespondenceError("domain mismatch: codomain of the first factor differs from domain of the second")
    succ: dict = {}
    for b, c in D.pairs:
        succ.setdefault(b, []).append(c)
    pairs = {(a, c) for a, b in C.pairs for c in succ.get(b, ())}
    if not pairs:
        raise CorrespondenceError("empty composite")
    return Correspondence(C.domain, D.codomain, pairs, f"{D.name}.{C.name}", C.structure)


def witness_counts(C: Correspondence, D: Correspondence) -> Counter:
    """Number of middle witnesses for each pair of ``D o C``."""
    succ: dict = {}
    for b, c in D.pairs:
        succ.setdefault(b, []).append(c)
    return Counter((a, c) for a, b in C.pairs for c in succ.get(b, ()))


@dataclass(frozen=True)
class LedgerComponent:
    corr: Correspondence
    witnesses: int
    k: int
    l: int


@dataclass(frozen=True)
class CompositionLedger:
    components: tuple[LedgerComponent, ...]
    k_first: int
    l_first: int
    k_second: int
    l_second: int

    @property
    def k_sum(self) -> int:
        return sum(c.witnesses * c.k for c in self.components)

    @property
    def l_sum(self) -> int:
        return sum(c.witnesses * c.l for c in self.components)

    @property
    def holds(self) -> bool:
        return self.k_first * self.k_second == self.k_sum and self.l_first * self.l_second == self.l_sum


def compose_ledger(C: Correspondence, D: Correspondence, partition: autgroup.OrbitPartition) -> CompositionLedger:
    """Split ``D o C`` along an orbit partition of pairs and record witness counts.

    Each block meeting the composite becomes one component.  The witness
    count must be constant on a block; a varying count means the partition
    is not fine enough to be an orbit partition for C and D.
    """
    k1, l1 = _uniform_or_raise(C)
    k2, l2 = _uniform_or_raise(D)
    comp = compose(C, D)
    counts = witness_counts(C, D)
    by_block: dict = {}
    for p in comp.pairs:
        by_block.setdefault(partition.index[p], set()).add(p)
    components = []
    for bid in sorted(by_block):
        block = by_block[bid]
        rs = {counts[p] for p in block}
        if len(rs) != 1:
            raise CorrespondenceError(f"witness count varies on block {bid}: {sorted(rs)}")
        Di = Correspondence(comp.domain, comp.codomain, block, f"D{len(components)}", C.structure)
        kl = is_uniform(Di)
        if kl is None:
            raise CorrespondenceError(f"component D{len(components)} is not uniform; domain or codomain is not a single orbit")
        components.append(LedgerComponent(Di, rs.pop(), *kl))
    ledger = CompositionLedger(tuple(components), k1, l1, k2, l2)
    if not ledger.holds:
        raise InternalInconsistency(
            f"composition ledger fails: {k1}*{k2} vs {ledger.k_sum}, {l1}*{l2} vs {ledger.l_sum}"
        )
    return ledger


def _check_invariant(pairs, group):
    for g in group.generators:
        for x, y in pairs:
            if (g[x], g[y]) not in pairs:
                return (x, y), g
    return None


def decompose_complete(C: Correspondence, S: Structure, fixed=(), group=None, pair_partition=None) -> list[Correspondence]:
    """The pair-orbit components of an invariant correspondence out of one orbit.

    Each component runs from ``C.domain`` to its own image, which is a single
    orbit, so it is uniform.
    """
    group = group or autgroup.automorphisms(S, fixed)
    bad = _check_invariant(C.pairs, group)
    if bad:
        raise CorrespondenceError(f"{C.name} is not invariant: {bad[0]} moves outside under {bad[1]}")
    orbits = autgroup.element_orbits(S, group=group)
    x0 = next(iter(C.domain))
    if set(orbits.block_of(x0)) != set(C.domain):
        raise CorrespondenceError(f"domain of {C.name} is not a single orbit")
    pair_part = pair_partition or autgroup.pair_orbits(S, group=group)
    blocks: dict = {}
    for p in C.pairs:
        blocks.setdefault(pair_part.index[p], []).append(p)
    out = []
    for i, bid in enumerate(sorted(blocks)):
        pairs = blocks[bid]
        image = {y for _, y in pairs}
        out.append(Correspondence(C.domain, image, pairs, f"{C.name}.{i}", C.structure))
    return out


def decomposition_sums(C: Correspondence, components) -> bool:
    """Check fibre additivity of a disjoint decomposition, element by element."""
    total = set()
    for D in components:
        if total & D.pairs:
            return False
        total |= D.pairs
    if total != C.pairs:
        return False
    fs = fibres(C)
    left, right = Counter(), Counter()
    for D in components:
        f = fibres(D)
        left.update(f.left)
        right.update(f.right)
    return all(left[x] == n for x, n in fs.left.items()) and all(right[y] == n for y, n in fs.right.items())


# -- constructions ---------------------------------------------------------------


def product(C1: Correspondence, C2: Correspondence) -> Correspondence:
    """The correspondence (a1, b1) ~ (a2, b2) iff a1 C1 b2 and a2 C2 b1.

    It runs from ``X1 x Y2`` to ``X2 x Y1`` and has fibre sizes
    ``k1*l2`` (left) and ``k2*l1`` (right).
    """
    _uniform_or_raise(C1)
    _uniform_or_raise(C2)
    dom = {(a1, b1) for a1 in C1.domain for b1 in C2.codomain}
    cod = {(a2, b2) for a2 in C2.domain for b2 in C1.codomain}
    pairs = {((a1, b1), (a2, b2)) for a1, b2 in C1.pairs for a2, b1 in C2.pairs}
    return Correspondence(dom, cod, pairs, f"{C1.name}x{C2.name}", C1.structure)


def graph_corr(f: dict, g: dict) -> Correspondence:
    """``a ~ a'`` iff ``f(a) = g(a')`` for functions given as tables."""
    by_value: dict = {}
    for a2, v in g.items():
        by_value.setdefault(v, []).append(a2)
    pairs = {(a, a2) for a, v in f.items() for a2 in by_value.get(v, ())}
    if not pairs:
        raise CorrespondenceError("f and g have disjoint images")
    return Correspondence(f.keys(), g.keys(), pairs, "graph")


def projections(C: Correspondence) -> tuple[dict, dict]:
    """Coordinate projections of the pair set, as tables."""
    pairs = C.sorted_pairs()
    return {p: p[0] for p in pairs}, {p: p[1] for p in pairs}


def preimage_sizes(table: dict, codomain=None) -> dict:
    sizes = Counter(table.values())
    if codomain is not None:
        return {y: sizes.get(y, 0) for y in sorted(codomain, key=_sortkey)}
    return dict(sizes)


def table_graph(table: dict, codomain) -> Correspondence:
    return Correspondence(table.keys(), codomain, table.items(), "graph")


@dataclass(frozen=True)
class DoubleCount:
    pairs: int
    left_total: int
    right_total: int


def double_count_check(C: Correspondence) -> DoubleCount:
    k, l = _uniform_or_raise(C)
    dc = DoubleCount(len(C.pairs), len(C.domain) * k, len(C.codomain) * l)
    if not dc.pairs == dc.left_total == dc.right_total:
        raise InternalInconsistency(f"double counting fails for {C.name}: {dc}")
    return dc


# -- file format -------------------------------------------------------------------


def _parse_elem(tok: str, lineno) -> Hashable:
    try:
        parts = tuple(int(t) for t in tok.split(","))
    except ValueError:
        raise ParseError(f"bad element {tok!r}", lineno) from None
    return parts[0] if len(parts) == 1 else parts


def _render_elem(e) -> str:
    return ",".join(map(str, e)) if isinstance(e, tuple) else str(e)


def parse_correspondence(text: str) -> Correspondence:
    """Parse ``corr <name> <structure>`` / ``dom`` / ``cod`` / ``pair`` / ``end``.

    Elements are integers; product elements are written ``a,b``.
    """
    header = None
    dom, cod, pairs = set(), set(), set()
    ended = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        toks = line.split()
        if not toks or toks[0].startswith("#"):
            continue
        if ended:
            raise ParseError("content after 'end'", lineno)
        if header is None:
            if toks[0] != "corr" or len(toks) != 3:
                raise ParseError("expected 'corr <name> <structure>'", lineno)
            header = toks[1:]
        elif toks[0] == "dom":
            dom.update(_parse_elem(t, lineno) for t in toks[1:])
        elif toks[0] == "cod":
            cod.update(_parse_elem(t, lineno) for t in toks[1:])
        elif toks[0] == "pair":
            if len(toks) != 3:
                raise ParseError("expected 'pair <x> <y>'", lineno)
            x, y = (_parse_elem(t, lineno) for t in toks[1:])
            if x not in dom or y not in cod:
                raise ParseError(f"pair ({toks[1]}, {toks[2]}) outside dom x cod", lineno)
            pairs.add((x, y))
        elif toks == ["end"]:
            ended = True
        else:
            raise ParseError(f"unknown directive {toks[0]!r}", lineno)
    if header is None or not ended:
        raise ParseError("incomplete correspondence file")
    if not pairs:
        raise ParseError("correspondence has no pairs")
    return Correspondence(dom, cod, pairs, header[0], header[1])


def render_correspondence(C: Correspondence) -> str:
    out = [f"corr {C.name} {C.structure or '-'}"]
    out.append("dom " + " ".join(_render_elem(e) for e in sorted(C.domain, key=_sortkey)))
    out.append("cod " + " ".join(_render_elem(e) for e in sorted(C.codomain, key=_sortkey)))
    out.extend(f"pair {_render_elem(x)} {_render_elem(y)}" for x, y in C.sorted_pairs())
    out.append("end")
    return "\n".join(out) + "\n"
