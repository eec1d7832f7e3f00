"""Turning two eventually uniform maps into maps with exactly constant fibres.

Given ``f, g: X -> Y`` with eventual fibre sizes ``k != l`` and finitely
many exceptional (finite) fibres, build ``f', g': X' -> Y'`` whose fibres
have constant sizes k and l.  Every choice the construction leaves open is
made by sorting the candidates by ``(label, index)`` and assigning
round-robin, so the result is a pure function of the input.

Bookkeeping notation used in names below:

* ``Y0``  targets where f or g has an exceptional fibre,
* ``F``, ``G``  the f- and g-preimages of Y0,
* ``G'`` = G - F, ``n = |G'|``,
* ``X''`` = X - F and ``Y''`` = Y - Y0.

Case 1 (k < l) works on ``n' = l - k`` copies of X'' and Y'' plus fresh
points P (``k*n``) and Q (``n``).  Case 2 (l < k) works on ``n' + 1``
copies with ``n' = k - l - 1`` and removes a selected Q (``n`` points of
Y'') and its f-preimage P from the top copy.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from . import cofinite
from .cofinite import Loc, SymbolicMap, SymbolicSet, format_loc, loc_key, parse_loc
from .errors import InternalInconsistency, ParseError, RepairError, SymbolicError, VerificationError


@dataclass(frozen=True)
class ExceptionAnalysis:
    """Exceptional data of the working pair after normalisation.

    If the input had ``|F| > |G|`` the roles of f and g are exchanged
    (``swapped``); ``f_work``/``g_work``, ``k``/``l``, ``F``/``G`` then
    refer to the exchanged pair.  ``modifications`` lists the finitely many
    points where ``f_work`` was redefined so that ``F`` lies inside ``G``.
    """

    k: int
    l: int
    Y0: tuple
    F: tuple
    G: tuple
    swapped: bool
    modifications: tuple
    f_work: SymbolicMap = field(repr=False)
    g_work: SymbolicMap = field(repr=False)

    @property
    def G_prime(self) -> tuple:
        F = set(self.F)
        return tuple(x for x in self.G if x not in F)

    @property
    def n(self) -> int:
        return len(self.G_prime)

    @property
    def normalized(self) -> bool:
        return len(self.F) <= len(self.G) and set(self.F) <= set(self.G)


def _preimages(m: SymbolicMap, targets) -> tuple:
    out = set()
    for y in targets:
        out.update(m.preimage(y))
    return tuple(sorted(out, key=loc_key))


def classify(f: SymbolicMap, g: SymbolicMap) -> ExceptionAnalysis:
    if f.source != g.source or f.target != g.target:
        raise RepairError("f and g must share source and target")
    try:
        f.validate()
        g.validate()
    except SymbolicError as e:
        raise RepairError(str(e)) from None
    ef, eg = cofinite.eventual_fibres(f), cofinite.eventual_fibres(g)
    for m, e in ((f, ef), (g, eg)):
        if e.k is None or e.k == 0:
            raise RepairError(f"{m.name} has no constant positive eventual fibre size: {e.per_ray}")
    k, l = ef.k, eg.k
    Y0 = tuple(sorted({y for y, _ in ef.exceptional} | {y for y, _ in eg.exceptional}, key=loc_key))
    F, G = _preimages(f, Y0), _preimages(g, Y0)
    swapped = len(F) > len(G)
    if swapped:
        f, g, k, l, F, G = g, f, l, k, G, F
    # Swap the images of F - G with the same number of points of G - F: the
    # fibre sizes of f are unchanged and afterwards f^-1(Y0) lies in G.
    Gs = set(G)
    out_of_G = [x for x in F if x not in Gs]
    spare = [x for x in G if x not in set(F)][: len(out_of_G)]
    mods = []
    if out_of_G:
        overrides = {}
        for x, z in zip(out_of_G, spare):
            overrides[x], overrides[z] = f(z), f(x)
            mods += [(x, f(x), f(z)), (z, f(z), f(x))]
        f = cofinite.with_overrides(f, overrides)
        F = _preimages(f, Y0)
        if not set(F) <= Gs:
            raise InternalInconsistency("normalisation failed to place F inside G")
    return ExceptionAnalysis(k, l, Y0, F, G, swapped, tuple(sorted(mods, key=lambda t: loc_key(t[0]))), f, g)


# -- layered copies --------------------------------------------------------------------


class _Layout:
    """Copies ``0..levels-1`` of a base set with finitely many elements removed
    per copy, plus fresh auxiliary points.

    Copy c of ray ``r`` is the ray ``r/c``, re-indexed to skip removed
    indices; copy c of point ``p`` is the point ``p/c``.
    """

    def __init__(self, base: SymbolicSet, removed: list, aux=(), name="X"):
        self.base = base
        self.removed = []
        rays, points = [], []
        for c, rem in enumerate(removed):
            rem = set(rem)
            by_ray = {r: sorted(i for lab, i in rem if lab == r and i is not None) for r in base.rays}
            self.removed.append((rem, by_ray))
            rays += [f"{r}/{c}" for r in base.rays]
            points += [f"{p}/{c}" for p in base.points if (p, None) not in rem]
        self.aux = tuple(aux)
        self.set = SymbolicSet(tuple(rays), tuple(points) + self.aux, name)

    def enc(self, c: int, loc: Loc) -> Loc:
        rem, by_ray = self.removed[c]
        if loc in rem:
            raise InternalInconsistency(f"{format_loc(loc)} was removed from copy {c}")
        label, idx = loc
        if idx is None:
            return (f"{label}/{c}", None)
        return (f"{label}/{c}", idx - sum(1 for d in by_ray[label] if d < idx))

    def dec(self, loc: Loc):
        """``(copy, base element)``, or ``(None, loc)`` for an auxiliary point."""
        label, idx = loc
        if label in self.aux:
            return None, loc
        base_label, c = label.rsplit("/", 1)
        c = int(c)
        if idx is None:
            return c, (base_label, None)
        old = idx
        for d in self.removed[c][1][base_label]:
            if d <= old:
                old += 1
        return c, (base_label, old)

    def provenance(self) -> list:
        out = []
        for c, (rem, by_ray) in enumerate(self.removed):
            for r in self.base.rays:
                out.append(("ray", f"{r}/{c}", r, c, tuple(by_ray[r])))
            for p in self.base.points:
                if (p, None) not in rem:
                    out.append(("point", f"{p}/{c}", p, c, ()))
        out += [("aux", a, a.split("#")[0], 0, ()) for a in self.aux]
        return out


def _round_robin(sources, targets) -> dict:
    sources = sorted(sources, key=loc_key)
    targets = sorted(targets, key=loc_key)
    return {x: targets[i % len(targets)] for i, x in enumerate(sources)}


def _start_bound(an: ExceptionAnalysis, extra=()) -> int:
    finite = list(an.Y0) + list(an.F) + list(an.G) + list(extra)
    finite += [x for x, _, _ in an.modifications]
    s0 = cofinite.max_index(finite) + 1
    for m in (an.f_work, an.g_work):
        s0 = max(s0, cofinite.max_index(m.exceptions) + 1)
    rules = list(an.f_work.rules.values()) + list(an.g_work.rules.values())
    return max((r.prefix + r.block * (s0 + 1) for r in rules), default=0) + s0


# -- the certificate ---------------------------------------------------------------------


@dataclass(frozen=True)
class RepairCertificate:
    case: int
    swapped: bool
    k: int
    l: int
    n: int
    n_prime: int
    P: tuple
    Q: tuple
    X: SymbolicSet
    Y: SymbolicSet
    f: SymbolicMap
    g: SymbolicMap
    provenance: tuple
    analysis: ExceptionAnalysis | None = field(default=None, compare=False, repr=False)

    def bookkeeping(self) -> dict:
        """The cardinality identities of the construction, as (lhs, rhs) pairs."""
        # k and l of the pair the construction actually ran on
        kw, lw = (self.l, self.k) if self.swapped else (self.k, self.l)
        n, n1 = self.n, self.n_prime
        if self.case == 1:
            return {
                "|P| = k*n": (len(self.P), kw * n),
                "|Q| = n": (len(self.Q), n),
                "n' = l - k": (n1, lw - kw),
                "|G' x n'| + |P| = l*|Q|": (n * n1 + len(self.P), lw * len(self.Q)),
            }
        return {
            "|P| = k*n": (len(self.P), kw * n),
            "|Q| = n": (len(self.Q), n),
            "n' = k - l - 1": (n1, kw - lw - 1),
            "|P| - |G' x (n'+1)| = l*n": (len(self.P) - n * (n1 + 1), lw * n),
        }


def repair(f: SymbolicMap, g: SymbolicMap) -> RepairCertificate:
    if f.source.is_finite:
        raise RepairError(
            "the source is finite: maps onto one finite set with constant fibres k and l "
            "would give k*|Y'| = |X'| = l*|Y'|, impossible for k != l"
        )
    an = classify(f, g)
    if an.k == an.l:
        raise RepairError(f"already uniform ratio: both eventual fibre sizes are {an.k}")
    build = _case1 if an.k < an.l else _case2
    case, n1, P, Q, Xl, Yl, fp, gp = build(an)
    if an.swapped:
        fp, gp = gp, fp
    fp = SymbolicMap(fp.source, fp.target, fp.rules, fp.exceptions, "fp")
    gp = SymbolicMap(gp.source, gp.target, gp.rules, gp.exceptions, "gp")
    k, l = (an.l, an.k) if an.swapped else (an.k, an.l)
    prov = tuple(Xl.provenance() + Yl.provenance())
    return RepairCertificate(case, an.swapped, k, l, an.n, n1, P, Q, Xl.set, Yl.set, fp, gp, prov, an)


def _case1(an: ExceptionAnalysis):
    k, l, n = an.k, an.l, an.n
    n1 = l - k
    fw, gw = an.f_work, an.g_work
    Gp = set(an.G_prime)
    P = tuple((f"P#{j}", None) for j in range(k * n))
    Q = tuple((f"Q#{j}", None) for j in range(n))
    Xl = _Layout(fw.source, [an.F] * n1, [p for p, _ in P], "Xp")
    Yl = _Layout(fw.target, [an.Y0] * n1, [q for q, _ in Q], "Yp")

    f_aux = _round_robin(P, Q)
    g_aux = _round_robin([Xl.enc(c, x) for c in range(n1) for x in an.G_prime] + list(P), Q)

    def fprime(loc):
        c, x = Xl.dec(loc)
        return f_aux[loc] if c is None else Yl.enc(c, fw(x))

    def gprime(loc):
        if loc in g_aux:
            return g_aux[loc]
        c, x = Xl.dec(loc)
        if x in Gp:
            raise InternalInconsistency(f"{format_loc(x)} should have been reassigned")
        return Yl.enc(c, gw(x))

    start = _start_bound(an)
    fa = {f"{r}/{c}": (f"{fw.rules[r].target}/{c}", fw.rules[r].block) for r in fw.source.rays for c in range(n1)}
    ga = {f"{r}/{c}": (f"{gw.rules[r].target}/{c}", gw.rules[r].block) for r in gw.source.rays for c in range(n1)}
    fp = cofinite.compile_map(Xl.set, Yl.set, fprime, fa, start, "fp")
    gp = cofinite.compile_map(Xl.set, Yl.set, gprime, ga, start, "gp")
    return 1, n1, P, Q, Xl, Yl, fp, gp


def _select_Q(an: ExceptionAnalysis, n: int) -> list:
    """First n targets outside Y0, in (label, index) order, whose f-fibre avoids G'."""
    if n == 0:
        return []
    fw, Y = an.f_work, an.f_work.target
    Y0, Gp = set(an.Y0), set(an.G_prime)
    window = cofinite.max_index(an.Y0 + an.G) + n + 2
    while True:
        cands = [(p, None) for p in Y.points] + [(r, i) for r in Y.rays for i in range(window)]
        chosen = []
        for y in sorted(cands, key=loc_key):
            if y in Y0 or Gp.intersection(fw.preimage(y)):
                continue
            chosen.append(y)
            if len(chosen) == n:
                return chosen
        if not Y.rays:
            raise RepairError("no set Q of the required size avoids G' in a finite target")
        window *= 2


def _case2(an: ExceptionAnalysis):
    k, l, n = an.k, an.l, an.n
    n1 = k - l - 1
    fw, gw = an.f_work, an.g_work
    Gp = set(an.G_prime)
    Q = _select_Q(an, n)
    Qs = set(Q)
    P = _preimages(fw, Q)
    if len(P) != k * n or Gp.intersection(P):
        raise InternalInconsistency("selected Q does not have a clean f-preimage of size k*n")
    top = n1
    Xl = _Layout(fw.source, [an.F] * n1 + [set(an.F) | set(P)], (), "Xp")
    Yl = _Layout(fw.target, [an.Y0] * n1 + [set(an.Y0) | Qs], (), "Yp")

    # g'' restricted to X' loses the sources P x {top} and the targets
    # Q x {top}; the freed sources and the holes are matched one to one.
    unassigned = [Xl.enc(c, x) for c in range(n1 + 1) for x in an.G_prime]
    for y in Q:
        unassigned += [Xl.enc(top, x) for x in gw.preimage(y) if x not in set(P)]
    holes = [Yl.enc(top, gw(x)) for x in P if gw(x) not in Qs]
    if len(unassigned) != len(holes):
        raise InternalInconsistency(f"case 2 count mismatch: {len(unassigned)} sources, {len(holes)} holes")
    fix = dict(zip(sorted(unassigned, key=loc_key), sorted(holes, key=loc_key)))

    def fprime(loc):
        c, x = Xl.dec(loc)
        return Yl.enc(c, fw(x))

    def gprime(loc):
        if loc in fix:
            return fix[loc]
        c, x = Xl.dec(loc)
        return Yl.enc(c, gw(x))

    start = _start_bound(an, list(P) + list(Q))
    fa = {f"{r}/{c}": (f"{fw.rules[r].target}/{c}", fw.rules[r].block) for r in fw.source.rays for c in range(n1 + 1)}
    ga = {f"{r}/{c}": (f"{gw.rules[r].target}/{c}", gw.rules[r].block) for r in gw.source.rays for c in range(n1 + 1)}
    fp = cofinite.compile_map(Xl.set, Yl.set, fprime, fa, start, "fp")
    gp = cofinite.compile_map(Xl.set, Yl.set, gprime, ga, start, "gp")
    return 2, n1, tuple(P), tuple(Q), Xl, Yl, fp, gp


# -- verification ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    depth: int
    checked: dict


def verify(cert: RepairCertificate, depth: int) -> Verdict:
    """Materialise f' and g' to ``depth`` and count every complete fibre.

    Raises ``VerificationError`` naming the first offending element.
    """
    for label, (lhs, rhs) in cert.bookkeeping().items():
        if lhs != rhs:
            raise VerificationError(f"bookkeeping fails: {label}: {lhs} != {rhs}")
    if cert.k == cert.l:
        raise VerificationError("k equals l")
    bound = max(cert.f.stability_bound, cert.g.stability_bound)
    if depth < bound:
        raise VerificationError(f"depth {depth} is below the stability bound {bound}")
    checked = {}
    for m, want in ((cert.f, cert.k), (cert.g, cert.l)):
        if m.source != cert.X or m.target != cert.Y:
            raise VerificationError(f"{m.name} does not run from X' to Y'")
        missing = m.missing()
        if missing:
            raise VerificationError(f"{m.name} has no image for {format_loc(missing[0])}", missing[0])
        counts: Counter = Counter()
        for x in cert.X.slice(depth):
            y = m(x)
            if y not in cert.Y:
                raise VerificationError(f"{m.name} sends {format_loc(x)} outside Y'", x)
            counts[y] += 1
        cutoff = m.complete_cutoff(depth)
        n_checked = 0
        for y in cert.Y.slice(depth):
            label, idx = y
            if idx is not None and idx > cutoff[label]:
                continue
            if counts[y] != want:
                raise VerificationError(
                    f"fibre of {format_loc(y)} under {m.name} has size {counts[y]}, expected {want}", y
                )
            n_checked += 1
        checked[m.name] = n_checked
    return Verdict(True, depth, checked)


# -- certificate file ------------------------------------------------------------------------


def render_certificate(cert: RepairCertificate) -> str:
    head = (
        f"certificate case {cert.case} swapped {int(cert.swapped)} k {cert.k} l {cert.l} "
        f"n {cert.n} nprime {cert.n_prime}"
    )
    body = cofinite.render_spec([cert.X, cert.Y, cert.f, cert.g])
    prov = ["provenance"]
    for kind, label, origin, copy, removed in cert.provenance:
        if kind == "aux":
            prov.append(f"aux {label} {origin}")
        else:
            rem = ",".join(map(str, removed)) or "-"
            prov.append(f"{kind} {label} {origin} copy {copy} minus {rem}")
    prov += [f"select P {format_loc(x)}" for x in cert.P]
    prov += [f"select Q {format_loc(y)}" for y in cert.Q]
    prov.append("end")
    return head + "\n" + body + "\n".join(prov) + "\n"


def parse_certificate(text: str) -> RepairCertificate:
    lines = [
        (i, ln.split()) for i, ln in enumerate(text.splitlines(), start=1)
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not lines or lines[0][1][0] != "certificate" or len(lines[0][1]) != 13:
        raise ParseError("expected a 'certificate' header line", lines[0][0] if lines else None)
    head = lines[0][1]
    try:
        vals = {head[i]: int(head[i + 1]) for i in range(1, 13, 2)}
    except ValueError:
        raise ParseError("bad certificate header", lines[0][0]) from None
    try:
        split = next(i for i, (_, t) in enumerate(lines) if t == ["provenance"])
    except StopIteration:
        raise ParseError("missing provenance section") from None
    objs = cofinite.parse_spec("", lines[1:split])
    try:
        X, Y, f, g = objs["Xp"], objs["Yp"], objs["fp"], objs["gp"]
    except KeyError as e:
        raise ParseError(f"certificate lacks {e.args[0]!r}") from None
    prov, P, Q = [], [], []
    for ln, toks in lines[split + 1:]:
        if toks == ["end"]:
            break
        if toks[0] == "aux" and len(toks) == 3:
            prov.append(("aux", toks[1], toks[2], 0, ()))
        elif toks[0] in ("ray", "point") and len(toks) == 7:
            rem = () if toks[6] == "-" else tuple(int(t) for t in toks[6].split(","))
            prov.append((toks[0], toks[1], toks[2], int(toks[4]), rem))
        elif toks[0] == "select" and len(toks) == 3 and toks[1] in ("P", "Q"):
            (P if toks[1] == "P" else Q).append(parse_loc(toks[2], ln))
        else:
            raise ParseError(f"bad provenance line {' '.join(toks)!r}", ln)
    else:
        raise ParseError("missing 'end' after provenance")
    return RepairCertificate(
        vals["case"], bool(vals["swapped"]), vals["k"], vals["l"], vals["n"], vals["nprime"],
        tuple(P), tuple(Q), X, Y, f, g, tuple(prov),
    )
