"""Random eventually uniform maps for property tests."""

import random

from unimodkit.cofinite import Rule, SymbolicMap, SymbolicSet


def _split(rng, total, parts):
    cuts = sorted(rng.sample(range(1, total), parts - 1))
    return [b - a for a, b in zip([0] + cuts, cuts + [total])]


def random_sets(rng, t=None, c=1, src_points=None, tgt_points=None):
    t = t or rng.randint(1, 2)
    src_points = rng.randint(0, 2) if src_points is None else src_points
    tgt_points = rng.randint(0, 2) if tgt_points is None else tgt_points
    X = SymbolicSet(tuple(f"x{i}" for i in range(t * c)), tuple(f"a{i}" for i in range(src_points)), "X")
    Y = SymbolicSet(tuple(f"y{i}" for i in range(t)), tuple(f"b{i}" for i in range(tgt_points)), "Y")
    return X, Y


def random_map(rng, X, Y, k, name="f", max_prefix=6, max_offset=3):
    """Each target ray receives len(X.rays)//len(Y.rays) source rays whose blocks add to k."""
    c = len(X.rays) // len(Y.rays)
    rays = list(X.rays)
    rng.shuffle(rays)
    rules, exceptions = {}, {}
    for ti, tray in enumerate(Y.rays):
        blocks = _split(rng, k, c)
        for ray, b in zip(rays[ti * c:(ti + 1) * c], blocks):
            rules[ray] = Rule(tray, b, rng.randint(0, max_prefix), rng.randint(0, max_offset))
    targets = [(r, i) for r in Y.rays for i in range(5)] + [(p, None) for p in Y.points]
    for ray, rule in rules.items():
        for i in range(rule.prefix):
            exceptions[(ray, i)] = rng.choice(targets)
    for p in X.points:
        exceptions[(p, None)] = rng.choice(targets)
    return SymbolicMap(X, Y, rules, exceptions, name)


def random_pair(rng, k=None, l=None):
    """f, g with eventual fibre sizes k != l on shared random sets."""
    if k is None:
        k, l = rng.sample(range(1, 5), 2)
    c = rng.randint(1, min(k, l))
    X, Y = random_sets(rng, c=c)
    return random_map(rng, X, Y, k, "f"), random_map(rng, X, Y, l, "g")
