"""Measurability, commensurability and unimodularity checks over orbit semantics.

A complete type over A is an orbit of Aut(S/A); a complete correspondence
is an orbit on ordered pairs.  On a finite structure interalgebraicity is
automatic, so no side condition is imposed on pairs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from . import autgroup
from .corrcalc import Correspondence, _check_invariant, is_uniform
from .errors import CorrespondenceError, InternalInconsistency
from .finstruct import Structure


def multiplicities(S: Structure, fixed, a: int, b: int) -> tuple[int, int]:
    """``(m(a/Ab), m(b/Aa))``."""
    fixed = set(fixed)
    return (
        autgroup.multiplicity(S, fixed | {b}, a),
        autgroup.multiplicity(S, fixed | {a}, b),
    )


class _OrbitCache:
    """Orbit partitions keyed by parameter set; a trivial group stays trivial on supersets."""

    def __init__(self, S):
        self.S = S
        self.groups: dict = {}
        self.trivial: list = []

    def group(self, fixed) -> autgroup.PermGenSet:
        fixed = frozenset(fixed)
        if fixed not in self.groups:
            if any(t <= fixed for t in self.trivial):
                g = autgroup.PermGenSet(self.S.size, (), 1, fixed)
            else:
                g = autgroup.automorphisms(self.S, fixed)
                if not g.generators:
                    self.trivial.append(fixed)
            self.groups[fixed] = (g, None, None)
        return self.groups[fixed][0]

    def orbits(self, fixed) -> autgroup.OrbitPartition:
        fixed = frozenset(fixed)
        g = self.group(fixed)
        _, el, pr = self.groups[fixed]
        if el is None:
            el = autgroup.element_orbits(self.S, group=g)
            self.groups[fixed] = (g, el, pr)
        return el

    def pair_orbits(self, fixed) -> autgroup.OrbitPartition:
        fixed = frozenset(fixed)
        g = self.group(fixed)
        _, el, pr = self.groups[fixed]
        if pr is None:
            pr = autgroup.pair_orbits(self.S, group=g)
            self.groups[fixed] = (g, el, pr)
        return pr


@dataclass(frozen=True)
class OrbitEntry:
    params: tuple
    pairs: tuple
    k: int
    l: int

    @property
    def balanced(self) -> bool:
        return self.k == self.l


@dataclass(frozen=True)
class UnimodReport:
    structure: str
    max_params: int
    entries: tuple[OrbitEntry, ...]
    counterexample: tuple | None = None

    @property
    def verdict(self) -> bool:
        return self.counterexample is None


def _orbit_kl(O, a, b):
    k = sum(1 for x, _ in O if x == a)
    l = sum(1 for _, y in O if y == b)
    return k, l


def check_unimodular(S: Structure, max_params: int) -> UnimodReport:
    """Check m(a/Ab) = m(b/Aa) over every parameter set of size <= max_params.

    For each pair orbit O inside p x p (p an element orbit) the fibre sizes
    are read off O and cross-checked against the two orbit multiplicities.
    """
    cache = _OrbitCache(S)
    entries = []
    counterexample = None
    for size in range(max_params + 1):
        for A in itertools.combinations(range(S.size), size):
            orbits = cache.orbits(A)
            for O in cache.pair_orbits(A).blocks:
                a, b = O[0]
                if orbits.index[a] != orbits.index[b]:
                    continue
                k, l = _orbit_kl(O, a, b)
                m_ba = len(cache.orbits(set(A) | {a}).block_of(b))
                m_ab = len(cache.orbits(set(A) | {b}).block_of(a))
                if (k, l) != (m_ba, m_ab):
                    raise InternalInconsistency(
                        f"orbit fibres {(k, l)} disagree with multiplicities {(m_ba, m_ab)} at {(a, b)} over {A}"
                    )
                entries.append(OrbitEntry(A, O, k, l))
                if k != l and counterexample is None:
                    counterexample = (A, a, b, m_ab, m_ba)
    return UnimodReport(S.name, max_params, tuple(entries), counterexample)


def _as_orbit(S, part, p):
    p = tuple(sorted(set(p)))
    if not p or part.block_of(p[0]) != p:
        raise CorrespondenceError(f"{list(p)} is not an orbit of Aut({S.name}/A)")
    return p


def orbit_corrs(S: Structure, fixed, p, q, group=None) -> list[Correspondence]:
    """The complete correspondences between orbits p and q."""
    group = group or autgroup.automorphisms(S, fixed)
    part = autgroup.element_orbits(S, group=group)
    p, q = _as_orbit(S, part, p), _as_orbit(S, part, q)
    pairs = autgroup.pair_orbits(S, group=group)
    sp, sq = set(p), set(q)
    return [
        Correspondence(p, q, O, f"O{i}", S.name)
        for i, O in enumerate(pairs.blocks)
        if O[0][0] in sp and O[0][1] in sq
    ]


@dataclass(frozen=True)
class MeasurableReport:
    orbit: tuple
    entries: tuple  # (pairs, k, l)

    @property
    def verdict(self) -> bool:
        return all(k == l for _, k, l in self.entries)


def measurable(S: Structure, fixed, p, group=None) -> MeasurableReport:
    entries = []
    for C in orbit_corrs(S, fixed, p, p, group):
        k, l = is_uniform(C) or (None, None)
        if k is None:
            raise InternalInconsistency(f"complete correspondence {C.name} is not uniform")
        entries.append((tuple(sorted(C.pairs)), k, l))
    return MeasurableReport(tuple(sorted(set(p))), tuple(entries))


def commensurability(S: Structure, fixed, p, q, group=None) -> Fraction:
    """The common ratio of all complete correspondences from p to q."""
    ratios = set()
    for C in orbit_corrs(S, fixed, p, q, group):
        kl = is_uniform(C)
        if kl is None:
            raise InternalInconsistency(f"complete correspondence {C.name} is not uniform")
        ratios.add(Fraction(*kl))
    if len(ratios) != 1:
        raise InternalInconsistency(f"complete correspondences disagree on their ratio: {sorted(ratios)}")
    return ratios.pop()


@dataclass(frozen=True)
class TransitivityVerdict:
    pq: Fraction
    qr: Fraction
    pr: Fraction

    @property
    def holds(self) -> bool:
        return self.pq * self.qr == self.pr


def transitivity_check(S: Structure, fixed, p, q, r, group=None) -> TransitivityVerdict:
    group = group or autgroup.automorphisms(S, fixed)
    v = TransitivityVerdict(
        commensurability(S, fixed, p, q, group),
        commensurability(S, fixed, q, r, group),
        commensurability(S, fixed, p, r, group),
    )
    if not v.holds:
        raise InternalInconsistency(f"m_pq * m_qr != m_pr: {v}")
    return v


@dataclass(frozen=True)
class BlockLedger:
    orbits: tuple[tuple, ...]
    weights: tuple[Fraction, ...]
    blocks: dict = field(repr=False)
    k: int = 0
    l: int = 0

    @property
    def mu(self) -> Fraction:
        return sum(self.weights, Fraction(0))


def block_ledger(S: Structure, fixed, C: Correspondence, group=None) -> BlockLedger:
    """Split a uniform invariant correspondence on a union of orbits into
    orbit blocks and verify the bookkeeping forcing k_C = l_C.

    Blocks are ``C_ij = C & (p_i x p_j)``; weights are ``m_i = |p_i|/|p_1|``
    (the commensurability constant from the first orbit).  Checked exactly:
    row sums of k and column sums of l, the cross identities
    ``m_j * l_ij = m_i * k_ij``, and ``mu*k_C = mu*l_C``.
    """
    kl = is_uniform(C)
    if kl is None:
        raise CorrespondenceError(f"{C.name} is not uniform")
    if C.domain != C.codomain:
        raise CorrespondenceError("block ledger needs a correspondence on a single set")
    k, l = kl
    group = group or autgroup.automorphisms(S, fixed)
    bad = _check_invariant(C.pairs, group)
    if bad:
        raise CorrespondenceError(f"{C.name} is not invariant: {bad[0]} moves outside under {bad[1]}")
    part = autgroup.element_orbits(S, group=group)
    orbits = sorted({part.block_of(x) for x in C.domain})
    if set().union(*orbits) != set(C.domain):
        raise CorrespondenceError("domain is not a union of orbits")
    where = {x: i for i, O in enumerate(orbits) for x in O}
    blocks = {}
    for i, pi in enumerate(orbits):
        for j, pj in enumerate(orbits):
            a, b = pi[0], pj[0]
            kij = sum(1 for x, y in C.pairs if x == a and where[y] == j)
            lij = sum(1 for x, y in C.pairs if y == b and where[x] == i)
            blocks[i, j] = (kij, lij)
    weights = tuple(Fraction(len(O), len(orbits[0])) for O in orbits)
    ledger = BlockLedger(tuple(orbits), weights, blocks, k, l)
    _verify_block_ledger(ledger)
    return ledger


def _verify_block_ledger(led: BlockLedger):
    idx = range(len(led.orbits))
    for i in idx:
        if sum(led.blocks[i, j][0] for j in idx) != led.k:
            raise InternalInconsistency(f"row {i}: k-sum differs from k_C = {led.k}")
        if sum(led.blocks[j, i][1] for j in idx) != led.l:
            raise InternalInconsistency(f"column {i}: l-sum differs from l_C = {led.l}")
    m = led.weights
    for i in idx:
        for j in idx:
            kij, lij = led.blocks[i, j]
            if m[j] * lij != m[i] * kij:
                raise InternalInconsistency(f"cross identity fails at block {(i, j)}")
    lhs = sum(m[i] * sum(led.blocks[i, j][0] for j in idx) for i in idx)
    rhs = sum(m[j] * sum(led.blocks[i, j][1] for i in idx) for j in idx)
    if not (lhs == led.mu * led.k and rhs == led.mu * led.l and lhs == rhs):
        raise InternalInconsistency("mu * k_C and mu * l_C disagree")
    if led.k != led.l:
        raise InternalInconsistency(f"k_C = {led.k} differs from l_C = {led.l}")
