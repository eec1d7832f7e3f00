import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from oracles import seeded
from symgen import random_pair
from unimodkit import cofinite as cf
from unimodkit import repair as rp
from unimodkit.cofinite import Rule, SymbolicMap, SymbolicSet
from unimodkit.errors import ParseError, RepairError, VerificationError

N = SymbolicSet(("n",), (), "N")


def three_to_one_short():
    """3-to-1 on a ray except a size-2 fibre at 0."""
    return SymbolicMap(N, N, {"n": Rule("n", 3, 2, 1)}, {("n", 0): ("n", 0), ("n", 1): ("n", 0)}, "f")


def one_to_one_heavy():
    """Injective except a size-3 fibre at 0."""
    return SymbolicMap(N, N, {"n": Rule("n", 1, 3, 1)}, {("n", i): ("n", 0) for i in range(3)}, "g")


def flagship():
    T, g = cf.sym_tree()
    return rp.repair(cf.identity_map(T), g)


def test_classify_tree():
    T, g = cf.sym_tree()
    an = rp.classify(cf.identity_map(T), g)
    assert (an.k, an.l) == (1, 2)
    assert an.Y0 == (("t", 0),) and an.F == (("t", 0),)
    assert an.G == (("t", 0), ("t", 1), ("t", 2))
    assert an.G_prime == (("t", 1), ("t", 2)) and an.n == 2
    assert an.normalized and not an.swapped


def test_classify_identity_has_no_exceptions():
    T, _ = cf.sym_tree()
    an = rp.classify(cf.identity_map(T), cf.identity_map(T))
    assert an.Y0 == () and an.n == 0


def test_classify_exchanges_when_preimage_is_larger():
    an = rp.classify(three_to_one_short(), cf.identity_map(N))
    assert an.Y0 == (("n", 0),) and an.swapped
    assert (an.k, an.l) == (1, 3)
    assert an.normalized


def test_classify_moves_points_into_g_preimage():
    # F = {0, 1} is not inside G = {0, 2, 3}: one point of F must be redirected
    f = SymbolicMap(N, N, {"n": Rule("n", 2, 2, 1)}, {("n", 0): ("n", 0), ("n", 1): ("n", 0)}, "f")
    g = SymbolicMap(N, N, {"n": Rule("n", 1, 4, 2)}, {("n", 0): ("n", 0), ("n", 1): ("n", 1), ("n", 2): ("n", 0), ("n", 3): ("n", 0)}, "g")
    an = rp.classify(f, g)
    assert not an.swapped and an.modifications
    assert set(an.F) <= set(an.G)
    assert cf.eventual_fibres(an.f_work).exceptional == cf.eventual_fibres(f).exceptional
    cert = rp.repair(f, g)
    assert rp.verify(cert, 500).accepted


def test_flagship_certificate():
    cert = flagship()
    assert (cert.case, cert.n_prime, len(cert.P), len(cert.Q)) == (1, 1, 2, 2)
    assert (cert.k, cert.l) == (1, 2)
    v = rp.verify(cert, 1000)
    assert v.accepted and v.depth == 1000
    for label, (lhs, rhs) in cert.bookkeeping().items():
        assert lhs == rhs, label


def test_case_two():
    cert = rp.repair(three_to_one_short(), one_to_one_heavy())
    assert cert.case == 2 and not cert.swapped
    assert (cert.k, cert.l, cert.n, cert.n_prime) == (3, 1, 1, 1)
    assert len(cert.P) == 3 and len(cert.Q) == 1
    assert not set(cert.P) & set(cert.analysis.G_prime)
    assert rp.verify(cert, 1000).accepted


def test_three_to_one_against_identity():
    cert = rp.repair(three_to_one_short(), cf.identity_map(N))
    assert (cert.k, cert.l) == (3, 1) and cert.swapped
    assert rp.verify(cert, 1000).accepted


def test_equal_sizes_rejected():
    T, g = cf.sym_tree()
    with pytest.raises(RepairError, match="already uniform ratio"):
        rp.repair(g, g)


def test_finite_source_rejected():
    P = SymbolicSet((), ("a", "b"), "P")
    m = SymbolicMap(P, P, {}, {("a", None): ("a", None), ("b", None): ("a", None)}, "m")
    with pytest.raises(RepairError, match="finite"):
        rp.repair(m, cf.identity_map(P))


def test_not_eventually_uniform_rejected():
    X = SymbolicSet(("r", "s"), (), "X")
    f = SymbolicMap(X, X, {"r": Rule("r", 1, 0, 0), "s": Rule("r", 1, 0, 0)}, {}, "f")
    with pytest.raises(RepairError):
        rp.repair(f, cf.identity_map(X))


def test_certificate_round_trip_and_determinism():
    cert = flagship()
    text = rp.render_certificate(cert)
    assert rp.render_certificate(flagship()) == text
    back = rp.parse_certificate(text)
    assert rp.render_certificate(back) == text
    assert rp.verify(back, 1000).accepted


def test_tampered_certificate_rejected():
    cert = flagship()
    exc = dict(cert.g.exceptions)
    x = next(x for x, y in sorted(exc.items(), key=lambda t: cf.loc_key(t[0])) if y == ("Q#0", None) and x[1] is not None)
    exc[x] = ("Q#1", None)
    bad = dataclasses.replace(cert, g=SymbolicMap(cert.X, cert.Y, cert.g.rules, exc, "gp"))
    with pytest.raises(VerificationError) as e:
        rp.verify(bad, 1000)
    assert e.value.target == ("Q#0", None)


def test_deleted_image_rejected():
    cert = flagship()
    exc = dict(cert.f.exceptions)
    del exc[("P#0", None)]
    bad = dataclasses.replace(cert, f=SymbolicMap(cert.X, cert.Y, cert.f.rules, exc, "fp"))
    with pytest.raises(VerificationError, match="no image"):
        rp.verify(bad, 1000)


def test_bookkeeping_checked():
    bad = dataclasses.replace(flagship(), n_prime=2)
    with pytest.raises(VerificationError, match="bookkeeping"):
        rp.verify(bad, 1000)


def test_depth_below_stability_bound():
    cert = flagship()
    with pytest.raises(VerificationError, match="stability bound"):
        rp.verify(cert, 3)


def test_certificate_parse_errors():
    text = rp.render_certificate(flagship())
    with pytest.raises(ParseError):
        rp.parse_certificate(text.replace("provenance\n", ""))
    with pytest.raises(ParseError):
        rp.parse_certificate("certificate case 1\n")
    with pytest.raises(ParseError):
        rp.parse_certificate(text.replace("aux P#0 P", "aux"))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_random_repairs_verify(seed):
    f, g = random_pair(seeded(seed))
    cert = rp.repair(f, g)
    depth = max(cert.f.stability_bound, cert.g.stability_bound) + 30
    assert rp.verify(cert, depth).accepted
    assert rp.render_certificate(rp.repair(f, g)) == rp.render_certificate(cert)
