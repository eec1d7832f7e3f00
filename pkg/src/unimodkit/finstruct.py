"""Finite relational/functional structures: model, file format, generators.

Elements of a structure are the integers ``0..n-1``.  Tree-shaped
structures use breadth-first indexing: index 0 is the empty string and the
children of node ``i`` are ``2i+1`` (append 0) and ``2i+2`` (append 1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import ParseError


@dataclass(frozen=True)
class Signature:
    relations: tuple[tuple[str, int], ...] = ()
    functions: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        names = [name for name, _ in self.relations + self.functions]
        if len(set(names)) != len(names):
            raise ValueError("duplicate symbol name in signature")
        for name, arity in self.relations + self.functions:
            if arity < 1:
                raise ValueError(f"symbol {name!r} has arity {arity} < 1")

    def arity(self, name: str) -> int:
        for sym, arity in self.relations + self.functions:
            if sym == name:
                return arity
        raise KeyError(name)


@dataclass(frozen=True, eq=True)
class Structure:
    """A finite structure with universe ``range(size)``.

    ``relations`` maps a name to a frozenset of tuples, ``functions`` maps a
    name to a total table ``{argument tuple: value}``.  Symbols keep their
    declaration order, which is also the rendering order.
    """

    name: str
    size: int
    signature: Signature
    relations: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.size < 0:
            raise ValueError("universe size must be non-negative")
        if [n for n, _ in self.signature.relations] != list(self.relations):
            raise ValueError("relation tables do not match the signature")
        if [n for n, _ in self.signature.functions] != list(self.functions):
            raise ValueError("function tables do not match the signature")
        rels = {}
        for name, arity in self.signature.relations:
            tuples = frozenset(tuple(t) for t in self.relations[name])
            for t in tuples:
                self._check_tuple(name, arity, t)
            rels[name] = tuples
        funs = {}
        for name, arity in self.signature.functions:
            table = {tuple(k): v for k, v in self.functions[name].items()}
            for args, value in table.items():
                self._check_tuple(name, arity, args)
                self._check_tuple(name, 1, (value,))
            if len(table) != self.size**arity:
                raise ValueError(f"function {name!r} is not total")
            funs[name] = table
        object.__setattr__(self, "relations", rels)
        object.__setattr__(self, "functions", funs)

    def _check_tuple(self, name, arity, t):
        if len(t) != arity:
            raise ValueError(f"{name}: arity mismatch in {t}")
        for e in t:
            if not 0 <= e < self.size:
                raise ValueError(f"{name}: element out of range: {e}")

    @property
    def universe(self) -> range:
        return range(self.size)

    def function_graph(self, name: str) -> frozenset:
        """The graph of a function as a relation of arity ``arity + 1``."""
        return frozenset(args + (v,) for args, v in self.functions[name].items())


def make_structure(name, size, relations=None, functions=None) -> Structure:
    """Build a structure, inferring the signature from the tables.

    ``relations`` maps names to ``(arity, tuples)``; ``functions`` maps names
    to ``(arity, table)``.
    """
    relations = relations or {}
    functions = functions or {}
    sig = Signature(
        tuple((n, a) for n, (a, _) in relations.items()),
        tuple((n, a) for n, (a, _) in functions.items()),
    )
    return Structure(
        name,
        size,
        sig,
        {n: t for n, (_, t) in relations.items()},
        {n: t for n, (_, t) in functions.items()},
    )


# -- file format ----------------------------------------------------------


def _ints(tokens, lineno):
    try:
        return tuple(int(t) for t in tokens)
    except ValueError:
        raise ParseError(f"expected integers, got {' '.join(tokens)!r}", lineno) from None


def parse_structure(text: str) -> Structure:
    lines = [
        (i, line.split())
        for i, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    pos = 0

    def expect(keyword, nargs):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"unexpected end of file, expected {keyword!r}")
        lineno, toks = lines[pos]
        if toks[0] != keyword or len(toks) != nargs + 1:
            raise ParseError(f"expected '{keyword}' with {nargs} argument(s)", lineno)
        pos += 1
        return lineno, toks[1:]

    _, (name,) = expect("structure", 1)
    lineno, (n_tok,) = expect("universe", 1)
    (n,) = _ints([n_tok], lineno)
    if n < 0:
        raise ParseError("universe size must be non-negative", lineno)

    seen = set()
    rels, funs = {}, {}
    while pos < len(lines):
        lineno, toks = lines[pos]
        pos += 1
        if toks[0] not in ("rel", "fun") or len(toks) != 3:
            raise ParseError(f"expected 'rel' or 'fun' declaration, got {toks[0]!r}", lineno)
        kind, sym = toks[0], toks[1]
        (arity,) = _ints(toks[2:], lineno)
        if arity < 1:
            raise ParseError(f"arity must be positive for {sym!r}", lineno)
        if sym in seen:
            raise ParseError(f"duplicate symbol name {sym!r}", lineno)
        seen.add(sym)
        decl_line = lineno
        body = {} if kind == "fun" else set()
        while True:
            if pos >= len(lines):
                raise ParseError(f"missing 'end' for {sym!r}", decl_line)
            lineno, toks = lines[pos]
            pos += 1
            if toks == ["end"]:
                break
            if kind == "fun":
                if "->" not in toks or toks.count("->") != 1 or toks.index("->") != len(toks) - 2:
                    raise ParseError("function entry must read '<args> -> <value>'", lineno)
                args = _ints(toks[:-2], lineno)
                values = _ints(toks[-1:], lineno)
                tup = args
            else:
                tup = _ints(toks, lineno)
                values = ()
            if len(tup) != arity:
                raise ParseError(f"arity mismatch for {sym!r}: expected {arity}, got {len(tup)}", lineno)
            for e in tup + values:
                if not 0 <= e < n:
                    raise ParseError(f"element out of range: {e}", lineno)
            if kind == "fun":
                if tup in body and body[tup] != values[0]:
                    raise ParseError(f"conflicting values for {sym}{tup}", lineno)
                body[tup] = values[0]
            else:
                body.add(tup)
        if kind == "fun":
            if len(body) != n**arity:
                missing = next(a for a in itertools.product(range(n), repeat=arity) if a not in body)
                raise ParseError(f"partial function table for {sym!r}: no value at {missing}", lineno)
            funs[sym] = (arity, body)
        else:
            rels[sym] = (arity, body)
    return make_structure(name, n, rels, funs)


def render_structure(S: Structure) -> str:
    out = [f"structure {S.name}", f"universe {S.size}"]
    for name, arity in S.signature.relations:
        out.append(f"rel {name} {arity}")
        out.extend(" ".join(map(str, t)) for t in sorted(S.relations[name]))
        out.append("end")
    for name, arity in S.signature.functions:
        out.append(f"fun {name} {arity}")
        table = S.functions[name]
        out.extend(f"{' '.join(map(str, a))} -> {table[a]}" for a in sorted(table))
        out.append("end")
    return "\n".join(out) + "\n"


# -- generators -----------------------------------------------------------


def _depth(i: int) -> int:
    """Length of the binary string at BFS index ``i``."""
    return (i + 1).bit_length() - 1


def gen_tree(depth: int) -> Structure:
    """Binary strings of length < depth with the successor relation S."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    n = 2**depth - 1
    succ = {(i, c) for i in range(n) for c in (2 * i + 1, 2 * i + 2) if c < n}
    return make_structure(f"tree{depth}", n, {"S": (2, succ)})


def gen_levels(n: int) -> Structure:
    """The finite level structure on binary strings of length < n.

    ``R{i}`` holds the strings of length ``n - i`` (i = 1..n) and ``f`` maps a
    string to its parent, fixing the empty string.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    size = 2**n - 1
    rels = {
        f"R{i}": (1, {(x,) for x in range(size) if _depth(x) == n - i})
        for i in range(1, n + 1)
    }
    parent = {(x,): (x - 1) // 2 if x else 0 for x in range(size)}
    return make_structure(f"levels{n}", size, rels, {"f": (1, parent)})


def shift_index(z: int, bits: tuple, d: int) -> int:
    """Element index of ``(z, bits)`` in ``gen_shift(m, d)``; bits[0] is most significant."""
    v = 0
    for b in bits:
        v = 2 * v + b
    return z * 2**d + v


def gen_shift(m: int, d: int) -> Structure:
    """Finite torus version of the shift structure on Z x 2^omega.

    The universe is Z_m x {0,1}^d.  ``E{k}`` (for each 2^k dividing m)
    relates elements whose first coordinates agree mod 2^k.  The infinite
    structure's map (z, eta) -> (z+1, eta o S) is surjective with fibres of
    size two; no total function on a finite set can do that, so here it is
    replaced by the relation ``F`` linking (z, b0..b_{d-1}) to
    (z+1, b1..b_{d-1}c) for both values of c.  Every element then has exactly
    two F-successors and two F-predecessors.
    """
    if m < 2 or m & (m - 1):
        raise ValueError(f"m must be a power of 2 and at least 2, got {m}")
    if d < 1:
        raise ValueError("d must be at least 1")
    width = 2**d
    size = m * width
    points = [(z, bits) for z in range(m) for bits in itertools.product((0, 1), repeat=d)]
    rels = {}
    for k in range(m.bit_length()):
        mod = 2**k
        rels[f"E{k}"] = (
            2,
            {(x, y) for x in range(size) for y in range(size) if (x // width) % mod == (y // width) % mod},
        )
    F = set()
    for z, bits in points:
        src = shift_index(z, bits, d)
        for c in (0, 1):
            F.add((src, shift_index((z + 1) % m, bits[1:] + (c,), d)))
    rels["F"] = (2, F)
    return make_structure(f"shift{m}x{d}", size, rels)
