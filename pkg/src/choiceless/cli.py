"""Command-line front end: ``choiceless <subcommand> ...``.

Exit codes: 0 success, 1 logical false / odd / non-isomorphic (only with
``--exit-code``), 2 usage error, 3 error marker or failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import hfset as hf
from .structure import GRAPH, StructureError, parse_structure, render_structure
from .parser import ParseError, parse_program
from .evaluator import ChoicePolicy, Evaluator, format_result
from .syntax import WSC

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_FAIL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e


def _emit(out, fmt: str, human: list[str], records: dict[str, object]) -> None:
    if fmt == "records":
        for k, v in records.items():
            out.write(f"{k}={v}\n")
    else:
        for line in human:
            out.write(line + "\n")


def _show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return hf.render(v)


def _policy(args) -> ChoicePolicy:
    return ChoicePolicy() if args.seed is None else ChoicePolicy.random(args.seed)


# --- subcommands ---------------------------------------------------------------------------------

def cmd_eval(args, out) -> int:
    prog = parse_program(_read(args.program))
    A = parse_structure(_read(args.structure))
    if prog.signature and tuple(prog.signature) != A.signature.relations:
        raise UsageError("program and structure signatures differ")
    params = {}
    for item in args.arg or []:
        name, _, text = item.partition("=")
        if not _:
            raise UsageError(f"--arg expects name=value, got {item!r}")
        params[name] = hf.parse_value(text)
    ev = Evaluator(A, prog, _policy(args), trace=args.trace)
    if args.exhaustive:
        b = prog.binding(prog.entry)
        if not isinstance(b.body, WSC) or params:
            raise UsageError("--exhaustive needs a parameterless entry whose body is a WSC operator")
        res = ev.wsc_exhaustive(b.body, {}, b.bound or prog.default_bound)
        if res.dagger:
            _emit(out, args.format, ["†", f"reason: {res.dagger}"],
                  {"result": "dagger", "reason": res.dagger})
            return EXIT_FAIL
        human = []
        for i, (path, ok) in enumerate(zip(res.paths, res.verdicts)):
            human.append(f"path {i}: stages={len(path) - 1} witnessed={'yes' if ok else 'no'}")
        bound = b.bound or prog.default_bound
        outs = sorted({_show(ev.wsc_output(b.body, path[-1], {}, bound)) for path in res.paths})
        den = None if res.denotation is None else outs
        shown = "†" if den is None else " | ".join(outs)
        human.append(f"paths: {len(res.paths)}")
        human.append(f"all-or-none: {'yes' if res.all_or_none else 'no'}")
        human.append(f"result: {shown}")
        _emit(out, args.format, human, {"paths": len(res.paths),
                                        "witnessed": sum(res.verdicts),
                                        "all_or_none": str(res.all_or_none).lower(),
                                        "result": shown})
        if den is None:
            return EXIT_FAIL
        return EXIT_FALSE if args.exit_code and den == ["false"] else EXIT_OK
    res = ev.run_entry(params)
    text = format_result(res)
    human = [text]
    if args.trace:
        for ev_ in res.trace:
            human.append("# " + " ".join(f"{k}={v}" for k, v in ev_.items()))
    if res.is_dagger and res.reason:
        human.append(f"# reason: {res.reason}")
    records = {"result": "dagger" if res.is_dagger else text}
    if res.is_dagger:
        records["reason"] = res.reason
    _emit(out, args.format, human, records)
    if res.is_dagger:
        return EXIT_FAIL
    return EXIT_FALSE if args.exit_code and res.value is False else EXIT_OK


def _chooser(name: str):
    from .canonize import BruteForceChooser, InvariantChooser, LexChooser
    return {"lex": LexChooser, "brute": BruteForceChooser, "invariant": InvariantChooser}[name]()


def cmd_canon(args, out) -> int:
    from .canonize import canonical_form, generate_canon_program, gurevich_canon
    if args.emit_bgs:
        sig = parse_structure(_read(args.structure)).signature if args.structure else GRAPH
        out.write(generate_canon_program(sig))
        return EXIT_OK
    if not args.structure:
        raise UsageError("canon needs a structure file")
    A = parse_structure(_read(args.structure))
    if args.chooser == "lex" and not args.witnesses:
        C, order = canonical_form(A)
        rounds = None
    else:
        res = gurevich_canon(A, _chooser(args.chooser), _policy(args), witnesses=args.witnesses)
        C, order, rounds = res.canon, res.order, res.rounds
    text = render_structure(C).rstrip("\n")
    perm = " ".join(str(a) for a in order)
    human = [text, f"order: {perm}"]
    if rounds is not None and args.trace:
        for r in rounds:
            human.append(f"# round prefix=({' '.join(map(str, r.prefix))}) orbit="
                         f"{{{' '.join(map(str, r.orbit))}}} chosen={r.chosen} maps={len(r.witnesses)}")
    _emit(out, args.format, human, {"canon": text.replace("\n", " "), "order": perm})
    return EXIT_OK


def cmd_iso(args, out) -> int:
    from .canonize import iso_by_canon
    A = parse_structure(_read(args.a))
    B = parse_structure(_read(args.b))
    same = iso_by_canon(A, B)
    word = "isomorphic" if same else "non-isomorphic"
    _emit(out, args.format, [word], {"iso": str(same).lower()})
    return EXIT_FALSE if args.exit_code and not same else EXIT_OK


def cmd_sketch(args, out) -> int:
    from .coherent import sketch
    s = sketch(parse_structure(_read(args.structure)))
    if args.format == "records":
        out.write(f"tau={' '.join(s.tau)}\nsigma={s.sigma}\n")
        out.write("subset=" + " ".join(f"({x},{r})" for x, r in sorted(s.subset)) + "\n")
        out.write("q=" + " ".join(f"({r},{a},{t})={m}" for (r, a, t), m in s.q) + "\n")
    else:
        out.write(s.render())
    return EXIT_OK


def _parse_flips(text: str | None) -> list[tuple[int, int]]:
    if not text:
        return []
    flips = []
    for item in text.split(","):
        parts = item.replace(":", "-").split("-")
        if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
            raise UsageError(f"bad edge {item!r}; use u-v")
        flips.append((int(parts[0]), int(parts[1])))
    return flips


def cmd_cfi(args, out) -> int:
    from . import cfi
    if args.cfi_cmd == "gen":
        base_arg = args.base
        text = _read(base_arg) if os.path.exists(base_arg) else base_arg
        try:
            G = cfi.parse_base(text)
            C = cfi.build_cfi(cfi.CFISpec.make(G, _parse_flips(args.flips)))
        except (cfi.CFIError, StructureError) as e:
            raise UsageError(str(e)) from e
        out.write(cfi.render_cfi(C))
        return EXIT_OK
    try:
        C = cfi.parse_cfi(_read(args.file))
    except (cfi.CFIError, StructureError) as e:
        raise UsageError(str(e)) from e
    verdict = cfi.cfi_query(C, witnesses=not args.no_witnesses)
    _emit(out, args.format, [verdict], {"parity": verdict})
    return EXIT_FALSE if args.exit_code and verdict == "odd" else EXIT_OK


def cmd_selftest(args, out) -> int:
    from .battery import CHECKS, run_check
    names = args.only or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise UsageError(f"unknown checks: {', '.join(unknown)}")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_check, names))
    else:
        results = [run_check(n) for n in names]
    width = max(len(n) for n in names)
    failed = 0
    for name, ok, detail, secs in results:
        failed += not ok
        if args.format == "records":
            out.write(f"check={name} pass={str(ok).lower()} detail={detail!r}\n")
        else:
            out.write(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}\n")
    if args.format != "records":
        out.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    return EXIT_OK if failed == 0 else EXIT_FAIL


# --- argument parsing --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="choiceless", description=(
        "Choiceless Polynomial Time with witnessed symmetric choice: evaluation, "
        "canonization, coherent configurations and CFI graphs."))
    def common(parser, defaults: bool):
        d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
        parser.add_argument("--oracle-cap", type=int, default=d(None),
                            help="size limit of brute-force oracles")
        parser.add_argument("--format", choices=["human", "records"], default=d("human"))
        parser.add_argument("--seed", type=int, default=d(None),
                            help="random choice policy with this seed")
        parser.add_argument("--exit-code", action="store_true", default=d(False),
                            help="exit with 1 on false / non-isomorphic / odd")

    common(p, True)
    shared = argparse.ArgumentParser(add_help=False)
    common(shared, False)
    sub = p.add_subparsers(dest="cmd", required=True)

    e = sub.add_parser("eval", parents=[shared], help="evaluate a program's entry on a structure")
    e.add_argument("program")
    e.add_argument("structure")
    e.add_argument("--arg", action="append", help="entry parameter name=value (HF syntax)")
    e.add_argument("--exhaustive", action="store_true", help="explore every choice path")
    e.add_argument("--trace", action="store_true", help="print the choice and witness log")

    c = sub.add_parser("canon", parents=[shared], help="canonize a structure")
    c.add_argument("structure", nargs="?")
    c.add_argument("--emit-bgs", action="store_true", help="print the generated canonization program")
    c.add_argument("--chooser", choices=["lex", "brute", "invariant"], default="lex")
    c.add_argument("--witnesses", action="store_true", help="produce and verify witnessing maps")
    c.add_argument("--trace", action="store_true", help="print the rounds (needs --witnesses or a chooser)")

    i = sub.add_parser("iso", parents=[shared], help="isomorphism test by canon equality")
    i.add_argument("a")
    i.add_argument("b")

    s = sub.add_parser("sketch", parents=[shared], help="algebraic sketch of a structure")
    s.add_argument("structure")

    f = sub.add_parser("cfi", help="CFI graphs")
    fsub = f.add_subparsers(dest="cfi_cmd", required=True)
    g = fsub.add_parser("gen", parents=[shared], help="generate CFI(G, g)")
    g.add_argument("--base", required=True,
                   help="cycle:n, complete:n, ring:n, k4, paw, or a structure file")
    g.add_argument("--flips", help="comma-separated base edges u-v with label 1")
    q = fsub.add_parser("query", parents=[shared], help="decide whether a CFI graph is even")
    q.add_argument("file")
    q.add_argument("--no-witnesses", action="store_true", help="skip witness verification")

    t = sub.add_parser("selftest", parents=[shared], help="run the oracle cross-check batteries")
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--only", nargs="*", help="run only these checks")
    return p


COMMANDS = {"eval": cmd_eval, "canon": cmd_canon, "iso": cmd_iso, "sketch": cmd_sketch,
            "cfi": cmd_cfi, "selftest": cmd_selftest}


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    if args.oracle_cap is not None:
        if args.oracle_cap < 1:
            err.write("choiceless: --oracle-cap must be positive\n")
            return EXIT_USAGE
        os.environ["CHOICELESS_ORACLE_CAP"] = str(args.oracle_cap)
    if getattr(args, "jobs", 1) < 1:
        err.write("choiceless: --jobs must be positive\n")
        return EXIT_USAGE
    try:
        return COMMANDS[args.cmd](args, out)
    except UsageError as e:
        err.write(f"choiceless: {e}\n")
        return EXIT_USAGE
    except (ParseError, StructureError) as e:
        err.write(f"choiceless: {e}\n")
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - every other failure maps to exit code 3
        err.write(f"choiceless: failure: {type(e).__name__}: {e}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
