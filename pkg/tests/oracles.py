"""Brute-force reference implementations used to check the library.

Nothing here imports the code under test except the plain data types.
"""

import itertools
import random
from collections import Counter

from unimodkit.finstruct import make_structure


def brute_automorphisms(S):
    """All automorphisms of S, by trying every permutation."""
    tables = [S.relations[n] for n, _ in S.signature.relations]
    tables += [frozenset(a + (v,) for a, v in S.functions[n].items()) for n, _ in S.signature.functions]
    out = []
    for perm in itertools.permutations(range(S.size)):
        if all(tuple(perm[e] for e in t) in tab for tab in tables for t in tab):
            out.append(perm)
    return out


def stabilizer(perms, fixed):
    return [p for p in perms if all(p[a] == a for a in fixed)]


def brute_orbits(perms, n):
    seen, out = set(), []
    for x in range(n):
        if x in seen:
            continue
        orb = sorted({p[x] for p in perms})
        seen.update(orb)
        out.append(tuple(orb))
    return sorted(out)


def brute_pair_orbits(perms, n):
    seen, out = set(), []
    for x in range(n):
        for y in range(n):
            if (x, y) in seen:
                continue
            orb = sorted({(p[x], p[y]) for p in perms})
            seen.update(orb)
            out.append(tuple(orb))
    return sorted(out)


def random_structure(rng, max_n=10, name="rand"):
    """Universe <= max_n, up to 3 relations of arity <= 2, at most one unary function.

    Densities and symmetric seeds vary so that some draws have large groups.
    """
    n = rng.randint(1, max_n)
    rels = {}
    for i in range(rng.randint(0, 3)):
        arity = rng.choice((1, 2))
        p = rng.choice((0.1, 0.3, 0.5))
        if arity == 1:
            tuples = {(x,) for x in range(n) if rng.random() < p}
        elif rng.random() < 0.3:
            # a union of disjoint cycles: lots of automorphisms
            perm = list(range(n))
            rng.shuffle(perm)
            length = rng.randint(1, n)
            tuples = {(perm[j], perm[(j + 1) % length]) for j in range(length)}
        else:
            tuples = {(x, y) for x in range(n) for y in range(n) if rng.random() < p}
        rels[f"R{i}"] = (arity, tuples)
    funs = {}
    if rng.random() < 0.5:
        if rng.random() < 0.5:
            funs["f"] = (1, {(x,): x for x in range(n)} if rng.random() < 0.5 else {(x,): 0 for x in range(n)})
        else:
            funs["f"] = (1, {(x,): rng.randrange(n) for x in range(n)})
    return make_structure(name, n, rels, funs)


def uniform_family(orbit_pairs, max_union=2):
    """Unions of at most ``max_union`` pair orbits, as frozensets of pairs."""
    for r in range(1, max_union + 1):
        for combo in itertools.combinations(orbit_pairs, r):
            yield frozenset().union(*combo)


def fibre_sizes(pairs, X, Y):
    left = Counter(x for x, _ in pairs)
    right = Counter(y for _, y in pairs)
    return {left[x] for x in X}, {right[y] for y in Y}


# -- symbolic maps ------------------------------------------------------------------


def sym_eval(m, loc):
    """Evaluate a symbolic map straight from its rule and exception tables."""
    if loc in m.exceptions:
        return m.exceptions[loc]
    label, i = loc
    r = m.rules[label]
    assert i >= r.prefix
    return (r.target, r.offset + (i - r.prefix) // r.block)


def brute_fibres(m, targets, depth_big):
    """Fibre sizes of ``targets`` counted over the slice of depth ``depth_big``."""
    src = [(r, i) for r in m.source.rays for i in range(depth_big)] + [(p, None) for p in m.source.points]
    counts = Counter(sym_eval(m, x) for x in src)
    return {y: counts[y] for y in targets}


def safe_depth(m, n):
    """A depth by which every fibre of a target index < n is fully counted."""
    rules = list(m.rules.values())
    exc = max((i for _, i in m.exceptions if i is not None), default=0)
    return max([exc + 1] + [r.prefix + (n + 1) * r.block for r in rules])


def random_symmap(rng, name="m"):
    """Arbitrary maps: per-ray sums may differ and target rays may be missed."""
    from unimodkit.cofinite import Rule, SymbolicMap, SymbolicSet

    X = SymbolicSet(tuple(f"x{i}" for i in range(rng.randint(1, 3))), tuple(f"a{i}" for i in range(rng.randint(0, 2))), "X")
    Y = SymbolicSet(tuple(f"y{i}" for i in range(rng.randint(1, 2))), tuple(f"b{i}" for i in range(rng.randint(0, 2))), "Y")
    targets = [(r, i) for r in Y.rays for i in range(6)] + [(p, None) for p in Y.points]
    rules, exc = {}, {}
    for ray in X.rays:
        rules[ray] = Rule(rng.choice(Y.rays), rng.randint(1, 3), rng.randint(0, 5), rng.randint(0, 4))
        for i in range(rules[ray].prefix):
            exc[(ray, i)] = rng.choice(targets)
    for p in X.points:
        exc[(p, None)] = rng.choice(targets)
    return SymbolicMap(X, Y, rules, exc, name)


def seeded(seed):
    return random.Random(seed)


def biregular(rng, k, l, scale=1, name="B"):
    """A randomly relabelled (k, l)-correspondence: x ~ (x*k + t) mod |Y|."""
    from unimodkit.corrcalc import Correspondence

    nx, ny = l * scale, k * scale
    xs, ys = list(range(nx)), list(range(ny))
    rng.shuffle(xs)
    rng.shuffle(ys)
    pairs = {(xs[x], ys[(x * k + t) % ny]) for x in range(nx) for t in range(k)}
    return Correspondence(range(nx), range(ny), pairs, name)
