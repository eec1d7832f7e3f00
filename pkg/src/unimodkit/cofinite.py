"""Finitely presented countable sets and eventually uniform maps.

A ``SymbolicSet`` is a disjoint union of rays (copies of the natural
numbers) and isolated points.  Elements are ``(label, index)`` for ray
elements and ``(label, None)`` for points; in text they are written
``r:<label>:<index>`` and ``p:<label>``.

A ``SymbolicMap`` sends index ``i >= prefix`` of a source ray to
``offset + (i - prefix) // block`` on a target ray, and everything else
through a finite exception table.  Tree-shaped sets use breadth-first
indexing, so ray index ``i`` is the binary string at BFS position ``i``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import InternalInconsistency, ParseError, SymbolicError

Loc = tuple  # (label, index) or (label, None)


def loc_key(loc: Loc):
    label, idx = loc
    return (label, -1 if idx is None else idx)


def format_loc(loc: Loc) -> str:
    label, idx = loc
    return f"p:{label}" if idx is None else f"r:{label}:{idx}"


def parse_loc(text: str, lineno=None) -> Loc:
    parts = text.split(":")
    try:
        if parts[0] == "p" and len(parts) == 2 and parts[1]:
            return (parts[1], None)
        if parts[0] == "r" and len(parts) == 3 and parts[1]:
            idx = int(parts[2])
            if idx >= 0:
                return (parts[1], idx)
    except ValueError:
        pass
    raise ParseError(f"bad location {text!r}", lineno)


@dataclass(frozen=True)
class SymbolicSet:
    rays: tuple[str, ...] = ()
    points: tuple[str, ...] = ()
    name: str = field(default="X", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rays", tuple(self.rays))
        object.__setattr__(self, "points", tuple(self.points))
        labels = self.rays + self.points
        if not labels:
            raise SymbolicError("a symbolic set needs at least one ray or point")
        if len(set(labels)) != len(labels):
            raise SymbolicError(f"duplicate labels in symbolic set {self.name!r}")
        for lab in labels:
            if not lab or any(c in lab for c in ": \t"):
                raise SymbolicError(f"bad label {lab!r}")

    def __contains__(self, loc) -> bool:
        try:
            label, idx = loc
        except (TypeError, ValueError):
            return False
        if idx is None:
            return label in self.points
        return label in self.rays and isinstance(idx, int) and idx >= 0

    @property
    def is_finite(self) -> bool:
        return not self.rays

    def slice(self, depth: int) -> list[Loc]:
        """The first ``depth`` indices of every ray, then all points."""
        out = [(r, i) for r in self.rays for i in range(depth)]
        out += [(p, None) for p in self.points]
        return out


@dataclass(frozen=True)
class Rule:
    target: str
    block: int
    prefix: int
    offset: int

    def __post_init__(self):
        if self.block < 1 or self.prefix < 0 or self.offset < 0:
            raise SymbolicError(f"bad rule {self}")

    def image(self, i: int) -> int:
        return self.offset + (i - self.prefix) // self.block

    def preimage(self, j: int) -> range:
        if j < self.offset:
            return range(0)
        start = self.prefix + (j - self.offset) * self.block
        return range(start, start + self.block)


@dataclass(frozen=True)
class SymbolicMap:
    source: SymbolicSet
    target: SymbolicSet
    rules: dict
    exceptions: dict
    name: str = field(default="f", compare=False)

    def __post_init__(self):
        for ray, rule in self.rules.items():
            if ray not in self.source.rays:
                raise SymbolicError(f"{self.name}: rule for unknown source ray {ray!r}")
            if rule.target not in self.target.rays:
                raise SymbolicError(f"{self.name}: rule targets unknown ray {rule.target!r}")
        for x, y in self.exceptions.items():
            if x not in self.source:
                raise SymbolicError(f"{self.name}: exception at {format_loc(x)} outside the source")
            if y not in self.target:
                raise SymbolicError(f"{self.name}: exception value {format_loc(y)} outside the target")
            label, idx = x
            if idx is not None and label in self.rules and idx >= self.rules[label].prefix:
                raise SymbolicError(f"{self.name}: exception at {format_loc(x)} overlaps a rule")

    def missing(self) -> list[Loc]:
        """Source elements with no image."""
        out = []
        for ray in self.source.rays:
            rule = self.rules.get(ray)
            if rule is None:
                out.append((ray, 0))
                continue
            out += [(ray, i) for i in range(rule.prefix) if (ray, i) not in self.exceptions]
        out += [(p, None) for p in self.source.points if (p, None) not in self.exceptions]
        return out

    def validate(self) -> "SymbolicMap":
        missing = self.missing()
        if missing:
            raise SymbolicError(f"{self.name} is not total: no image for {format_loc(missing[0])}")
        return self

    def __call__(self, loc: Loc) -> Loc:
        if loc in self.exceptions:
            return self.exceptions[loc]
        label, idx = loc
        rule = self.rules.get(label)
        if idx is None or rule is None or idx < rule.prefix:
            raise SymbolicError(f"{self.name} has no image for {format_loc(loc)}")
        return (rule.target, rule.image(idx))

    def preimage(self, loc: Loc) -> list[Loc]:
        label, idx = loc
        out = [x for x, y in self.exceptions.items() if y == loc]
        if idx is not None:
            for ray, rule in self.rules.items():
                if rule.target == label:
                    out += [(ray, i) for i in rule.preimage(idx)]
        return sorted(out, key=loc_key)

    @property
    def stability_bound(self) -> int:
        """Depth from which every rule has a full block inside the slice."""
        return max((r.prefix + r.block for r in self.rules.values()), default=0)

    def complete_cutoff(self, depth: int) -> dict:
        """Per target ray, the largest index whose whole fibre lies in the depth-``depth`` slice."""
        cut = {}
        for ray in self.target.rays:
            into = [r for r in self.rules.values() if r.target == ray]
            cut[ray] = min((r.offset + (depth - r.prefix) // r.block - 1 for r in into), default=depth - 1)
        return cut


# -- fibre analysis ------------------------------------------------------------


@dataclass(frozen=True)
class EventualFibres:
    per_ray: dict
    exceptional: tuple
    k: Optional[int]

    @property
    def uniform(self) -> bool:
        return self.k is not None and self.k > 0 and not self.exceptional


def eventual_fibres(m: SymbolicMap) -> EventualFibres:
    """Eventual fibre size on each target ray and every exceptional fibre.

    Fibre of ``(r, j)`` = sum of the blocks of rules into r whose offset is
    at most j, plus exception entries landing there.
    """
    per_ray = {r: 0 for r in m.target.rays}
    for rule in m.rules.values():
        per_ray[rule.target] += rule.block
    sizes = set(per_ray.values())
    k = sizes.pop() if len(sizes) == 1 else None
    exc_hits = Counter(m.exceptions.values())
    candidates = set(exc_hits)
    candidates |= {(p, None) for p in m.target.points}
    for rule in m.rules.values():
        candidates |= {(rule.target, j) for j in range(rule.offset)}
    exceptional = []
    for loc in sorted(candidates, key=loc_key):
        label, idx = loc
        size = exc_hits[loc]
        if idx is None:
            if size != k:
                exceptional.append((loc, size))
            continue
        size += sum(r.block for r in m.rules.values() if r.target == label and r.offset <= idx)
        if size != per_ray[label]:
            exceptional.append((loc, size))
    return EventualFibres(per_ray, tuple(exceptional), k)


# -- materialisation -----------------------------------------------------------


@dataclass(frozen=True)
class MapSlice:
    elements: tuple
    table: dict
    outside: frozenset


def materialize(x, depth: int):
    """Finite slice of a symbolic set (list of elements) or map (``MapSlice``)."""
    if depth < 1:
        raise ValueError("depth must be positive")
    if isinstance(x, SymbolicSet):
        return x.slice(depth)
    x.validate()
    elems = x.source.slice(depth)
    table = {e: x(e) for e in elems}
    tgt = set(x.target.slice(depth))
    outside = frozenset(e for e, y in table.items() if y not in tgt)
    return MapSlice(tuple(elems), table, outside)


# -- construction helpers ----------------------------------------------------------


def compile_map(
    source: SymbolicSet,
    target: SymbolicSet,
    fn: Callable[[Loc], Loc],
    asymptotics: dict,
    start: int,
    name: str = "f",
) -> SymbolicMap:
    """Turn a total function into rules plus a finite exception table.

    ``asymptotics`` gives, per source ray, ``(target ray, block)`` such that
    from index ``start`` on ``fn`` moves along the target ray one step per
    block.  The prefix of each rule is the first block boundary after
    ``start``; everything before it becomes an exception.
    """
    rules, exceptions = {}, {}
    for ray in source.rays:
        tray, block = asymptotics[ray]
        j = start + 1
        while fn((ray, j)) == fn((ray, j - 1)):
            j += 1
        label, offset = fn((ray, j))
        rule = Rule(tray, block, j, offset)
        for t in range(j, j + 3 * block):
            if fn((ray, t)) != (tray, rule.image(t)):
                raise InternalInconsistency(f"{name}: ray {ray} is not block-affine from index {j}")
        rules[ray] = rule
        for i in range(j):
            exceptions[(ray, i)] = fn((ray, i))
    for p in source.points:
        exceptions[(p, None)] = fn((p, None))
    return SymbolicMap(source, target, rules, exceptions, name)


def max_index(locs) -> int:
    return max((idx for _, idx in locs if idx is not None), default=-1)


def with_overrides(m: SymbolicMap, overrides: dict, name: str | None = None) -> SymbolicMap:
    """The map ``m`` changed on finitely many source elements."""
    start = max([max_index(overrides)] + [r.prefix for r in m.rules.values()]) + 1
    asym = {ray: (r.target, r.block) for ray, r in m.rules.items()}
    return compile_map(m.source, m.target, lambda x: overrides[x] if x in overrides else m(x), asym, start, name or m.name)


def compose_maps(f: SymbolicMap, g: SymbolicMap, name: str | None = None) -> SymbolicMap:
    """``g o f``."""
    if f.target != g.source:
        raise SymbolicError("cannot compose: target of the first map is not the source of the second")
    asym, start = {}, 0
    for ray, rf in f.rules.items():
        rg = g.rules[rf.target]
        asym[ray] = (rg.target, rf.block * rg.block)
        start = max(start, rf.prefix + rf.block * (rg.prefix + 1))
    start = max([start, max_index(f.exceptions)]) + 1
    return compile_map(f.source, g.target, lambda x: g(f(x)), asym, start, name or f"{g.name}.{f.name}")


# -- builders ---------------------------------------------------------------------


def identity_map(X: SymbolicSet, name="id") -> SymbolicMap:
    rules = {r: Rule(r, 1, 0, 0) for r in X.rays}
    exceptions = {(p, None): (p, None) for p in X.points}
    return SymbolicMap(X, X, rules, exceptions, name)


def sym_tree() -> tuple[SymbolicSet, SymbolicMap]:
    """The predecessor map on the binary tree, fixing the root."""
    T = SymbolicSet(("t",), (), "T")
    f = SymbolicMap(T, T, {"t": Rule("t", 2, 1, 0)}, {("t", 0): ("t", 0)}, "pred")
    return T, f


def sym_tree_infty() -> tuple[SymbolicSet, SymbolicMap]:
    """Predecessor map on the tree plus a point ``inf``; the root and ``inf`` go to ``inf``."""
    T = SymbolicSet(("t",), ("inf",), "Tinf")
    inf = ("inf", None)
    f = SymbolicMap(T, T, {"t": Rule("t", 2, 1, 0)}, {("t", 0): inf, inf: inf}, "pred_inf")
    return T, f


def sym_halving() -> tuple[SymbolicSet, SymbolicMap]:
    N = SymbolicSet(("n",), (), "N")
    return N, SymbolicMap(N, N, {"n": Rule("n", 2, 0, 0)}, {}, "half")


# -- symbolic correspondences -----------------------------------------------------------


@dataclass(frozen=True)
class SymbolicCorr:
    """``a ~ a'`` iff ``f(a) = g(a')``.

    ``k`` is the eventual left fibre size (the eventual fibre of g) and
    ``l`` the eventual right fibre size (the eventual fibre of f).
    """

    f: SymbolicMap
    g: SymbolicMap
    k: int
    l: int
    left_exceptions: tuple
    right_exceptions: tuple

    def contains(self, a: Loc, b: Loc) -> bool:
        return self.f(a) == self.g(b)

    def left_fibre(self, a: Loc) -> list[Loc]:
        return self.g.preimage(self.f(a))

    def right_fibre(self, b: Loc) -> list[Loc]:
        return self.f.preimage(self.g(b))


def sym_graph_corr(f: SymbolicMap, g: SymbolicMap) -> SymbolicCorr:
    if f.target != g.target:
        raise SymbolicError("f and g must share their target set")
    ef, eg = eventual_fibres(f), eventual_fibres(g)
    if ef.k is None or eg.k is None:
        raise SymbolicError("both maps need one eventual fibre size")
    left = sorted(
        ((a, len(g.preimage(y))) for y, _ in eg.exceptional for a in f.preimage(y)),
        key=lambda e: loc_key(e[0]),
    )
    right = sorted(
        ((b, len(f.preimage(y))) for y, _ in ef.exceptional for b in g.preimage(y)),
        key=lambda e: loc_key(e[0]),
    )
    return SymbolicCorr(f, g, eg.k, ef.k, tuple(left), tuple(right))


# -- file format -------------------------------------------------------------------------


def render_set(X: SymbolicSet) -> list[str]:
    out = [f"symset {X.name}"]
    out += [f"ray {r}" for r in X.rays]
    out += [f"point {p}" for p in X.points]
    out.append("end")
    return out


def render_map(m: SymbolicMap) -> list[str]:
    out = [f"symmap {m.name} {m.source.name} {m.target.name}"]
    for ray in m.source.rays:
        if ray in m.rules:
            r = m.rules[ray]
            out.append(f"rule {ray} -> {r.target} block {r.block} prefix {r.prefix} offset {r.offset}")
    for x in sorted(m.exceptions, key=loc_key):
        out.append(f"except {format_loc(x)} -> {format_loc(m.exceptions[x])}")
    out.append("end")
    return out


def render_spec(objects) -> str:
    """Render sets and maps; sets a map refers to are emitted before it."""
    lines, done = [], set()
    for obj in objects:
        sets = [obj] if isinstance(obj, SymbolicSet) else [obj.source, obj.target]
        for X in sets:
            if X.name not in done:
                lines += render_set(X)
                done.add(X.name)
        if isinstance(obj, SymbolicMap):
            lines += render_map(obj)
    return "\n".join(lines) + "\n"


def parse_spec(text: str, lines=None) -> dict:
    """Parse symsets and symmaps; returns ``{name: object}`` in file order."""
    if lines is None:
        lines = [
            (i, ln.split()) for i, ln in enumerate(text.splitlines(), start=1)
            if ln.strip() and not ln.lstrip().startswith("#")
        ]
    objs: dict = {}
    pos = 0
    while pos < len(lines):
        lineno, toks = lines[pos]
        pos += 1
        if toks[0] == "symset" and len(toks) == 2:
            rays, points = [], []
            while True:
                if pos >= len(lines):
                    raise ParseError(f"missing 'end' for symset {toks[1]}", lineno)
                ln, body = lines[pos]
                pos += 1
                if body == ["end"]:
                    break
                if len(body) != 2 or body[0] not in ("ray", "point"):
                    raise ParseError("expected 'ray <label>' or 'point <label>'", ln)
                (rays if body[0] == "ray" else points).append(body[1])
            if toks[1] in objs:
                raise ParseError(f"duplicate name {toks[1]!r}", lineno)
            try:
                objs[toks[1]] = SymbolicSet(tuple(rays), tuple(points), toks[1])
            except SymbolicError as e:
                raise ParseError(str(e), lineno) from None
        elif toks[0] == "symmap" and len(toks) == 4:
            name, src, dst = toks[1:]
            for s in (src, dst):
                if not isinstance(objs.get(s), SymbolicSet):
                    raise ParseError(f"unknown symset {s!r}", lineno)
            rules, exceptions = {}, {}
            while True:
                if pos >= len(lines):
                    raise ParseError(f"missing 'end' for symmap {name}", lineno)
                ln, body = lines[pos]
                pos += 1
                if body == ["end"]:
                    break
                if body[0] == "rule" and len(body) == 10 and body[2] == "->" and body[4::2] == ["block", "prefix", "offset"]:
                    try:
                        block, prefix, offset = int(body[5]), int(body[7]), int(body[9])
                        rules[body[1]] = Rule(body[3], block, prefix, offset)
                    except (ValueError, SymbolicError):
                        raise ParseError("bad rule numbers", ln) from None
                elif body[0] == "except" and len(body) == 4 and body[2] == "->":
                    exceptions[parse_loc(body[1], ln)] = parse_loc(body[3], ln)
                else:
                    raise ParseError(f"unexpected line in symmap: {' '.join(body)!r}", ln)
            if name in objs:
                raise ParseError(f"duplicate name {name!r}", lineno)
            try:
                objs[name] = SymbolicMap(objs[src], objs[dst], rules, exceptions, name).validate()
            except SymbolicError as e:
                raise ParseError(str(e), lineno) from None
        else:
            raise ParseError(f"unexpected line: {' '.join(toks)!r}", lineno)
    return objs


def single_map(objs: dict) -> SymbolicMap:
    maps = [o for o in objs.values() if isinstance(o, SymbolicMap)]
    if len(maps) != 1:
        raise ParseError(f"expected exactly one symmap, found {len(maps)}")
    return maps[0]
