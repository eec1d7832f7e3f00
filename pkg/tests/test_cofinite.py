import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_fibres, random_symmap, safe_depth, seeded, sym_eval
from unimodkit import cofinite as cf
from unimodkit.cofinite import Rule, SymbolicMap, SymbolicSet
from unimodkit.errors import ParseError, SymbolicError


def test_locations():
    assert cf.format_loc(("t", 3)) == "r:t:3" and cf.format_loc(("inf", None)) == "p:inf"
    for text in ("r:t:3", "p:inf"):
        assert cf.format_loc(cf.parse_loc(text)) == text
    for bad in ("r:t", "r:t:-1", "q:x", "p:", "r:t:x"):
        with pytest.raises(ParseError):
            cf.parse_loc(bad)


def test_slice():
    X = SymbolicSet(("r",), (), "X")
    assert cf.materialize(X, 3) == [("r", 0), ("r", 1), ("r", 2)]
    assert cf.materialize(X, 3) == cf.materialize(X, 3)


def test_tree_materialized_is_parent_table():
    _, f = cf.sym_tree()
    sl = cf.materialize(f, 7)
    assert {x[1]: y[1] for x, y in sl.table.items()} == {i: max(i - 1, 0) // 2 for i in range(7)}
    assert not sl.outside


def test_eventual_fibres_examples():
    T, f = cf.sym_tree()
    ev = cf.eventual_fibres(cf.identity_map(T))
    assert ev.k == 1 and not ev.exceptional
    ev = cf.eventual_fibres(f)
    assert ev.k == 2 and ev.exceptional == ((("t", 0), 3),)
    assert f.preimage(("t", 0)) == [("t", 0), ("t", 1), ("t", 2)]
    _, h = cf.sym_halving()
    ev = cf.eventual_fibres(h)
    assert ev.k == 2 and ev.uniform
    assert h.preimage(("n", 5)) == [("n", 10), ("n", 11)]


def test_tree_with_point_is_two_to_one():
    T, f = cf.sym_tree_infty()
    ev = cf.eventual_fibres(f)
    assert ev.k == 2 and ev.exceptional == () and ev.uniform
    assert f.preimage(("inf", None)) == [("inf", None), ("t", 0)]


def test_graph_corr():
    T, f = cf.sym_tree()
    I = cf.identity_map(T)
    C = cf.sym_graph_corr(I, I)
    assert (C.k, C.l) == (1, 1) and C.contains(("t", 4), ("t", 4))
    C = cf.sym_graph_corr(I, f)
    assert (C.k, C.l) == (2, 1)
    assert C.left_fibre(("t", 1)) == [("t", 3), ("t", 4)]
    assert C.right_fibre(("t", 4)) == [("t", 1)]
    assert C.left_exceptions == ((("t", 0), 3),)
    N, h = cf.sym_halving()
    C = cf.sym_graph_corr(h, h)
    assert (C.k, C.l) == (2, 2) and C.left_fibre(("n", 6)) == [("n", 6), ("n", 7)]


def test_map_validation():
    X = SymbolicSet(("r",), ("p",), "X")
    with pytest.raises(SymbolicError):
        SymbolicMap(X, X, {"r": Rule("zz", 1, 0, 0)}, {}, "m")
    with pytest.raises(SymbolicError):
        SymbolicMap(X, X, {"r": Rule("r", 1, 0, 0)}, {("r", 0): ("r", 1)}, "m")
    m = SymbolicMap(X, X, {"r": Rule("r", 1, 2, 0)}, {("r", 0): ("r", 0)}, "m")
    assert m.missing() == [("r", 1), ("p", None)]
    with pytest.raises(SymbolicError):
        m.validate()
    with pytest.raises(SymbolicError):
        SymbolicSet((), (), "E")
    with pytest.raises(SymbolicError):
        SymbolicSet(("a",), ("a",), "D")


def test_overrides_and_compile():
    T, f = cf.sym_tree()
    g = cf.with_overrides(f, {("t", 5): ("t", 0)})
    assert g(("t", 5)) == ("t", 0) and g(("t", 6)) == ("t", 2) and g(("t", 100)) == f(("t", 100))
    ev = cf.eventual_fibres(g)
    assert dict(ev.exceptional) == {("t", 0): 4, ("t", 2): 1}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_compose_matches_tables(seed):
    rng = seeded(seed)
    f = random_symmap(rng, "f")
    Y = f.target
    rules, exc = {}, {}
    for ray in Y.rays:
        rules[ray] = Rule(rng.choice(f.source.rays), rng.randint(1, 3), rng.randint(0, 3), rng.randint(0, 3))
        exc.update({(ray, i): (f.source.rays[0], rng.randint(0, 4)) for i in range(rules[ray].prefix)})
    exc.update({(p, None): (f.source.rays[0], 0) for p in Y.points})
    g = SymbolicMap(Y, f.source, rules, exc, "g")
    gf = cf.compose_maps(f, g)
    for x in f.source.slice(40):
        assert gf(x) == sym_eval(g, sym_eval(f, x))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 30))
def test_eventual_fibres_against_brute_force(seed, n):
    m = random_symmap(seeded(seed))
    ev = cf.eventual_fibres(m)
    targets = m.target.slice(n)
    counts = brute_fibres(m, targets, safe_depth(m, n))
    exc = dict(ev.exceptional)
    for y in targets:
        if y in exc:
            want = exc[y]
        else:
            want = ev.k if y[1] is None else ev.per_ray[y[0]]
        assert counts[y] == want, y


def test_complete_cutoff_is_sound():
    for seed in range(100):
        m = random_symmap(seeded(seed))
        for depth in (m.stability_bound, m.stability_bound + 7):
            if depth < 1:
                continue
            sl = cf.materialize(m, depth)
            cut = m.complete_cutoff(depth)
            big = brute_fibres(m, m.target.slice(depth), safe_depth(m, depth))
            for y in m.target.slice(depth):
                if y[1] is not None and y[1] > cut[y[0]]:
                    continue
                assert sum(1 for v in sl.table.values() if v == y) == big[y]


def test_spec_round_trip():
    T, f = cf.sym_tree_infty()
    text = cf.render_spec([f])
    objs = cf.parse_spec(text)
    assert list(objs) == ["Tinf", "pred_inf"]
    assert cf.render_spec([cf.single_map(objs)]) == text
    assert cf.single_map(objs) == f


@pytest.mark.parametrize(
    "text",
    [
        "symset X\nray r\n",
        "symset X\nray r\nend\nsymmap m X Y\nend\n",
        "symset X\nray r\nend\nsymmap m X X\nrule r -> r block 0 prefix 0 offset 0\nend\n",
        "symset X\nray r\nend\nsymmap m X X\nrule r -> r block 1 prefix 2 offset 0\nend\n",
        "symset X\nray r\nend\nsymset X\nray s\nend\n",
        "bogus\n",
    ],
)
def test_spec_errors(text):
    with pytest.raises(ParseError):
        cf.parse_spec(text)
