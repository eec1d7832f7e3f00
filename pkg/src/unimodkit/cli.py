"""Command line front end.

Every subcommand wraps one library call and prints either a fixed-width
text report or, with ``--json``, a versioned JSON report.  Exit codes:
0 ok, 1 parse or usage error, 2 internal inconsistency, 3 counterexample
or rejected certificate.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction

from . import autgroup, cofinite, corrcalc, finstruct, repair, unimodlab
from .errors import InternalInconsistency, UnimodError, VerificationError

SCHEMA_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_INTERNAL, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Run:
    """Per-invocation state: which files were read, for the inputs digest."""

    def __init__(self):
        self.inputs: list[tuple[str, bytes]] = []

    def read(self, path: str) -> str:
        with open(path, "rb") as fh:
            data = fh.read()
        self.inputs.append((path, data))
        return data.decode()

    def digest(self) -> str:
        h = hashlib.sha256()
        for path, data in self.inputs:
            h.update(path.encode() + b"\0" + hashlib.sha256(data).digest())
        return h.hexdigest()


# -- formatting -------------------------------------------------------------------


def _table(headers, rows) -> list[str]:
    rows = [[str(c) for c in r] for r in rows]
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(headers)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    return [fmt(headers), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows]


def _elem(e) -> str:
    if isinstance(e, tuple) and len(e) == 2 and isinstance(e[0], str):
        return cofinite.format_loc(e)
    return ",".join(map(str, e)) if isinstance(e, tuple) else str(e)


def _frac(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _fix(text) -> tuple:
    if not text:
        return ()
    try:
        return tuple(sorted({int(t) for t in text.split(",") if t.strip()}))
    except ValueError:
        raise UsageError(f"--fix expects a comma separated list of elements, got {text!r}") from None


# -- loaders --------------------------------------------------------------------------


def _structure(run, path) -> finstruct.Structure:
    return finstruct.parse_structure(run.read(path))


def _corr(run, arg) -> tuple[corrcalc.Correspondence, finstruct.Structure | None]:
    """A correspondence file, or ``STRUCTFILE#REL`` for a binary symbol of a structure."""
    if "#" in arg:
        path, rel = arg.rsplit("#", 1)
        S = _structure(run, path)
        if rel not in S.relations and rel not in S.functions:
            raise UsageError(f"structure {S.name!r} has no symbol {rel!r}")
        return corrcalc.relation_corr(S, rel), S
    return corrcalc.parse_correspondence(run.read(arg)), None


def _corr_structure(run, args, found):
    if args.struct:
        return _structure(run, args.struct)
    found = [S for S in found if S is not None]
    if not found:
        raise UsageError("this operation needs a structure: pass --struct FILE or use FILE#REL")
    return found[0]


def _symspec(run, path) -> dict:
    return cofinite.parse_spec(run.read(path))


# -- gen / aut / orbits -------------------------------------------------------------


def cmd_gen(run, args):
    if args.kind == "tree":
        S = finstruct.gen_tree(args.depth)
    elif args.kind == "levels":
        S = finstruct.gen_levels(args.n)
    else:
        S = finstruct.gen_shift(args.m, args.d)
    text = finstruct.render_structure(S)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        lines = [f"wrote {S.name} ({S.size} elements) to {args.out}"]
    else:
        lines = text.rstrip("\n").splitlines()
    return {"name": S.name, "size": S.size, "text": text}, lines, EXIT_OK


def cmd_aut(run, args):
    S = _structure(run, args.file)
    G = autgroup.automorphisms(S, _fix(args.fix))
    lines = [f"structure {S.name}", f"fixed {' '.join(map(str, sorted(G.fixed))) or '-'}", f"order {G.order}"]
    lines += _table(["#", "generator"], [(i, " ".join(map(str, g))) for i, g in enumerate(G.generators)])
    payload = {"structure": S.name, "fixed": sorted(G.fixed), "order": G.order, "generators": [list(g) for g in G.generators]}
    return payload, lines, EXIT_OK


def cmd_orbits(run, args):
    S = _structure(run, args.file)
    G = autgroup.automorphisms(S, _fix(args.fix))
    part = autgroup.pair_orbits(S, group=G) if args.pairs else autgroup.element_orbits(S, group=G)
    rows = [(i, len(b), " ".join(_elem(x) for x in b)) for i, b in enumerate(part.blocks)]
    lines = [f"structure {S.name}", f"{'pair' if args.pairs else 'element'} orbits {len(part)}"]
    lines += _table(["orbit", "size", "members"], rows)
    payload = {
        "structure": S.name,
        "fixed": sorted(G.fixed),
        "kind": "pairs" if args.pairs else "elements",
        "orbits": [[list(x) if isinstance(x, tuple) else x for x in b] for b in part.blocks],
    }
    return payload, lines, EXIT_OK


# -- corr ------------------------------------------------------------------------------------


def _fibre_rows(C):
    fs = corrcalc.fibres(C)
    rows = [("left", _elem(x), n) for x, n in sorted(fs.left.items(), key=lambda t: corrcalc._sortkey(t[0]))]
    rows += [("right", _elem(y), n) for y, n in sorted(fs.right.items(), key=lambda t: corrcalc._sortkey(t[0]))]
    return rows


def cmd_corr(run, args):
    op = args.op
    C, S1 = _corr(run, args.corr[0])
    if op == "fibres":
        rows = _fibre_rows(C)
        payload = {"corr": C.name, "fibres": [{"side": s, "element": e, "size": n} for s, e, n in rows]}
        return payload, [f"corr {C.name}"] + _table(["side", "element", "size"], rows), EXIT_OK
    if op == "uniform":
        kl = corrcalc.is_uniform(C)
        payload = {"corr": C.name, "uniform": kl is not None, "k": kl and kl[0], "l": kl and kl[1]}
        line = f"corr {C.name} uniform k={kl[0]} l={kl[1]}" if kl else f"corr {C.name} not uniform"
        return payload, [line], EXIT_OK
    if op == "ratio":
        q = corrcalc.ratio(C)
        return {"corr": C.name, "ratio": _frac(q)}, [f"corr {C.name} ratio {_frac(q)}"], EXIT_OK
    if op == "doublecount":
        dc = corrcalc.double_count_check(C)
        lines = [f"corr {C.name}", f"|C| {dc.pairs}", f"|X|*k {dc.left_total}", f"|Y|*l {dc.right_total}"]
        return {"corr": C.name, "pairs": dc.pairs, "left_total": dc.left_total, "right_total": dc.right_total}, lines, EXIT_OK
    if op == "decompose":
        S = _corr_structure(run, args, [S1])
        comps = corrcalc.decompose_complete(C, S, _fix(args.fix))
        ok = corrcalc.decomposition_sums(C, comps)
        if not ok:
            raise InternalInconsistency("decomposition fibre sums fail")
        rows = []
        for D in comps:
            k, l = corrcalc.is_uniform(D)
            rows.append((D.name, len(D.pairs), k, l))
        min_fibre = min(corrcalc.fibres(C).left.values())
        payload = {
            "corr": C.name,
            "components": [{"name": n, "pairs": p, "k": k, "l": l} for n, p, k, l in rows],
            "min_left_fibre": min_fibre,
            "sums_hold": ok,
        }
        lines = [f"corr {C.name} components {len(comps)} (min |C_x| = {min_fibre})"]
        return payload, lines + _table(["component", "pairs", "k", "l"], rows), EXIT_OK
    if len(args.corr) != 2:
        raise UsageError(f"corr {op} needs two correspondences")
    D, S2 = _corr(run, args.corr[1])
    if op == "product":
        P = corrcalc.product(C, D)
        k, l = corrcalc.is_uniform(P)
        text = corrcalc.render_correspondence(P)
        payload = {"corr": P.name, "k": k, "l": l, "pairs": len(P.pairs), "text": text}
        lines = [f"corr {P.name} k={k} l={l} pairs {len(P.pairs)}"]
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        return payload, lines, EXIT_OK
    # compose: the composite D o C, with the witness ledger when a structure is known
    comp = corrcalc.compose(C, D)
    payload = {"composite": sorted([_elem(x), _elem(y)] for x, y in comp.sorted_pairs())}
    lines = [f"compose {C.name} then {D.name}: {len(comp.pairs)} pairs"]
    try:
        S = _corr_structure(run, args, [S1, S2])
    except UsageError:
        S = None
    if S is None:
        counts = corrcalc.witness_counts(C, D)
        rows = [(_elem(x), _elem(y), counts[x, y]) for x, y in comp.sorted_pairs()]
        payload["witnesses"] = [list(r) for r in rows]
        return payload, lines + _table(["x", "z", "witnesses"], rows), EXIT_OK
    part = autgroup.pair_orbits(S, _fix(args.fix))
    led = corrcalc.compose_ledger(C, D, part)
    rows = [(c.corr.name, c.witnesses, c.k, c.l) for c in led.components]
    q = corrcalc.ratio(comp) if corrcalc.is_uniform(comp) else None
    payload.update(
        components=[{"name": n, "r": r, "k": k, "l": l} for n, r, k, l in rows],
        k_product=led.k_first * led.k_second,
        k_sum=led.k_sum,
        l_product=led.l_first * led.l_second,
        l_sum=led.l_sum,
        ratio=_frac(q) if q is not None else None,
    )
    lines += _table(["component", "r", "k", "l"], rows)
    lines.append(f"k: {led.k_first}*{led.k_second} = {led.k_sum}")
    lines.append(f"l: {led.l_first}*{led.l_second} = {led.l_sum}")
    return payload, lines, EXIT_OK


# -- unimod ----------------------------------------------------------------------------------


def _orbit_of(S, fixed, rep):
    if not 0 <= rep < S.size:
        raise UsageError(f"element {rep} outside the universe")
    return autgroup.element_orbits(S, fixed).block_of(rep)


def cmd_unimod(run, args):
    S = _structure(run, args.file)
    fixed = _fix(args.fix)
    if args.op == "check":
        rep = unimodlab.check_unimodular(S, args.max_params)
        rows = [(" ".join(map(str, e.params)) or "-", f"{e.pairs[0][0]},{e.pairs[0][1]}", len(e.pairs), e.k, e.l) for e in rep.entries]
        payload = {
            "structure": S.name,
            "max_params": args.max_params,
            "orbits_checked": len(rep.entries),
            "verdict": rep.verdict,
            "counterexample": list(rep.counterexample) if rep.counterexample else None,
        }
        lines = [f"structure {S.name} max_params {args.max_params}", f"orbits checked {len(rep.entries)}"]
        if args.verbose:
            lines += _table(["A", "(a,b)", "pairs", "k", "l"], rows)
        lines.append(f"verdict {'unimodular' if rep.verdict else 'counterexample'}")
        if not rep.verdict:
            A, a, b, mab, mba = rep.counterexample
            lines.append(f"counterexample A={list(A)} a={a} b={b} m(a/Ab)={mab} m(b/Aa)={mba}")
        return payload, lines, EXIT_OK if rep.verdict else EXIT_COUNTEREXAMPLE
    if args.op == "measurable":
        p = _orbit_of(S, fixed, args.p)
        rep = unimodlab.measurable(S, fixed, p)
        rows = [(f"{pairs[0][0]},{pairs[0][1]}", len(pairs), k, l) for pairs, k, l in rep.entries]
        payload = {"structure": S.name, "orbit": list(p), "verdict": rep.verdict,
                   "entries": [{"pairs": len(pr), "k": k, "l": l} for pr, k, l in rep.entries]}
        lines = [f"orbit {' '.join(map(str, p))}"] + _table(["(a,b)", "pairs", "k", "l"], rows)
        lines.append(f"verdict {'measurable' if rep.verdict else 'not measurable'}")
        return payload, lines, EXIT_OK if rep.verdict else EXIT_COUNTEREXAMPLE
    if args.op == "commensurable":
        p, q = _orbit_of(S, fixed, args.p), _orbit_of(S, fixed, args.q)
        m = unimodlab.commensurability(S, fixed, p, q)
        payload = {"structure": S.name, "p": list(p), "q": list(q), "ratio": _frac(m)}
        return payload, [f"p {' '.join(map(str, p))}", f"q {' '.join(map(str, q))}", f"ratio {_frac(m)}"], EXIT_OK
    # ledger
    if not args.corr:
        raise UsageError("unimod ledger needs --corr")
    C, _ = _corr(run, args.corr)
    led = unimodlab.block_ledger(S, fixed, C)
    idx = range(len(led.orbits))
    rows = [(i, j, *led.blocks[i, j]) for i in idx for j in idx]
    payload = {
        "structure": S.name,
        "orbits": [list(o) for o in led.orbits],
        "weights": [_frac(w) for w in led.weights],
        "blocks": [{"i": i, "j": j, "k": k, "l": l} for i, j, k, l in rows],
        "k": led.k, "l": led.l, "mu": _frac(led.mu),
    }
    lines = _table(["orbit", "weight", "members"], [(i, _frac(led.weights[i]), " ".join(map(str, led.orbits[i]))) for i in idx])
    lines += _table(["i", "j", "k_ij", "l_ij"], rows)
    lines.append(f"mu*k = {_frac(led.mu * led.k)}  mu*l = {_frac(led.mu * led.l)}")
    return payload, lines, EXIT_OK


# -- sym ------------------------------------------------------------------------------------


def _pick_map(objs, name):
    if name is None:
        return cofinite.single_map(objs)
    m = objs.get(name)
    if not isinstance(m, cofinite.SymbolicMap):
        raise UsageError(f"no symmap named {name!r}")
    return m


def cmd_sym(run, args):
    objs = _symspec(run, args.spec)
    if args.depth < 1:
        raise UsageError("--depth must be positive")
    m = _pick_map(objs, args.map)
    if args.op == "materialize":
        sl = cofinite.materialize(m, args.depth)
        rows = [(_elem(x), _elem(sl.table[x]), "*" if x in sl.outside else "") for x in sl.elements]
        payload = {"map": m.name, "depth": args.depth, "table": [[a, b] for a, b, _ in rows],
                   "outside": sorted(_elem(x) for x in sl.outside)}
        return payload, [f"symmap {m.name} depth {args.depth}"] + _table(["x", "image", "outside"], rows), EXIT_OK
    ev = cofinite.eventual_fibres(m)
    sl = cofinite.materialize(m, args.depth)
    counts: dict = {}
    for y in sl.table.values():
        counts[y] = counts.get(y, 0) + 1
    cut = m.complete_cutoff(args.depth)
    complete = [y for y in m.target.slice(args.depth) if y[1] is None or y[1] <= cut[y[0]]]
    rows = [(_elem(y), counts.get(y, 0)) for y in complete]
    payload = {
        "map": m.name,
        "k": ev.k,
        "per_ray": ev.per_ray,
        "exceptional": [[_elem(y), n] for y, n in ev.exceptional],
        "depth": args.depth,
        "slice_fibres": [list(r) for r in rows],
    }
    lines = [f"symmap {m.name}", f"eventual k {ev.k if ev.k is not None else '-'}"]
    lines += _table(["ray", "eventual"], sorted(ev.per_ray.items()))
    lines += _table(["exceptional", "size"], [(_elem(y), n) for y, n in ev.exceptional])
    if args.verbose:
        lines += _table(["target", f"fibre@{args.depth}"], rows)
    return payload, lines, EXIT_OK


# -- repair ------------------------------------------------------------------------------------


def cmd_repair(run, args):
    if args.op == "run":
        f = _pick_map(_symspec(run, args.f), None)
        g = _pick_map(_symspec(run, args.g), None)
        cert = repair.repair(f, g)
        text = repair.render_certificate(cert)
        with open(args.out, "w") as fh:
            fh.write(text)
        payload = {
            "case": cert.case, "swapped": cert.swapped, "k": cert.k, "l": cert.l,
            "n": cert.n, "nprime": cert.n_prime, "P": len(cert.P), "Q": len(cert.Q),
            "certificate_sha256": hashlib.sha256(text.encode()).hexdigest(),
        }
        lines = [
            f"case {cert.case}{' (f and g exchanged)' if cert.swapped else ''}",
            f"k {cert.k} l {cert.l} n {cert.n} n' {cert.n_prime} |P| {len(cert.P)} |Q| {len(cert.Q)}",
            f"wrote {args.out}",
        ]
        return payload, lines, EXIT_OK
    cert = repair.parse_certificate(run.read(args.cert))
    try:
        v = repair.verify(cert, args.depth)
    except VerificationError as e:
        payload = {"accepted": False, "depth": args.depth, "reason": str(e),
                   "target": _elem(e.target) if e.target is not None else None}
        return payload, [f"reject: {e}"], EXIT_COUNTEREXAMPLE
    payload = {"accepted": True, "depth": v.depth, "k": cert.k, "l": cert.l, "checked": v.checked}
    lines = [f"accept at depth {v.depth}: fibres ({cert.k}, {cert.l})"]
    lines += _table(["map", "complete fibres"], sorted(v.checked.items()))
    return payload, lines, EXIT_OK


# -- parser ----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    p = _Parser(prog="unimodkit", description="Fibre-counting and unimodularity checks.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a structure")
    gsub = gen.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    g = gsub.add_parser("tree", parents=[common])
    g.add_argument("--depth", type=int, required=True)
    g = gsub.add_parser("levels", parents=[common])
    g.add_argument("--n", type=int, required=True)
    g = gsub.add_parser("shift", parents=[common])
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    for g in gsub.choices.values():
        g.add_argument("--out")
        g.set_defaults(func=cmd_gen)

    a = sub.add_parser("aut", parents=[common], help="automorphism group generators")
    a.add_argument("file")
    a.add_argument("--fix")
    a.set_defaults(func=cmd_aut)

    o = sub.add_parser("orbits", parents=[common], help="element or pair orbits")
    o.add_argument("file")
    o.add_argument("--fix")
    o.add_argument("--pairs", action="store_true")
    o.set_defaults(func=cmd_orbits)

    c = sub.add_parser("corr", parents=[common], help="correspondence calculus (CORR is a file or STRUCTFILE#REL)")
    c.add_argument("op", choices=["fibres", "uniform", "ratio", "compose", "decompose", "product", "doublecount"])
    c.add_argument("corr", nargs="+")
    c.add_argument("--struct")
    c.add_argument("--fix")
    c.add_argument("--out")
    c.set_defaults(func=cmd_corr)

    u = sub.add_parser("unimod", parents=[common], help="unimodularity and measurability checks")
    u.add_argument("op", choices=["check", "measurable", "commensurable", "ledger"])
    u.add_argument("file")
    u.add_argument("--max-params", type=int, default=1)
    u.add_argument("--fix")
    u.add_argument("--p", type=int, help="representative of the first orbit")
    u.add_argument("--q", type=int, help="representative of the second orbit")
    u.add_argument("--corr")
    u.add_argument("--verbose", action="store_true")
    u.set_defaults(func=cmd_unimod)

    s = sub.add_parser("sym", parents=[common], help="symbolic maps")
    s.add_argument("op", choices=["materialize", "fibres"])
    s.add_argument("spec")
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--map")
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_sym)

    r = sub.add_parser("repair", help="repair exceptional fibres")
    rsub = r.add_subparsers(dest="op", required=True, parser_class=_Parser)
    rr = rsub.add_parser("run", parents=[common])
    rr.add_argument("--f", required=True)
    rr.add_argument("--g", required=True)
    rr.add_argument("--out", required=True)
    rv = rsub.add_parser("verify", parents=[common])
    rv.add_argument("cert")
    rv.add_argument("--depth", type=int, required=True)
    for x in (rr, rv):
        x.set_defaults(func=cmd_repair)
    return p


def _check_selectors(args):
    if getattr(args, "cmd", None) == "unimod":
        if args.op in ("measurable", "commensurable") and args.p is None:
            raise UsageError(f"unimod {args.op} needs --p")
        if args.op == "commensurable" and args.q is None:
            raise UsageError("unimod commensurable needs --q")


def run(argv, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(argv)
    want_json = "--json" in argv
    session = _Run()
    payload, lines, status, error = None, [], EXIT_OK, None
    try:
        args = build_parser().parse_args(argv)
        _check_selectors(args)
        payload, lines, status = args.func(session, args)
    except InternalInconsistency as e:
        status, error = EXIT_INTERNAL, f"internal inconsistency: {e}"
    except VerificationError as e:
        status, error = EXIT_COUNTEREXAMPLE, str(e)
    except (UsageError, UnimodError, ValueError, KeyError, OSError) as e:
        status, error = EXIT_USAGE, str(e) if not isinstance(e, KeyError) else str(e.args[0])
    if want_json:
        report = {
            "schema": SCHEMA_VERSION,
            "command": argv,
            "inputs_sha256": session.digest(),
            "result": payload,
            "status": status,
        }
        if error is not None:
            report["error"] = error
        stdout.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    else:
        if lines:
            stdout.write("\n".join(lines) + "\n")
        if error is not None:
            stderr.write(f"error: {error}\n")
    return status


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)
