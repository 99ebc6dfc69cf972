"""Command-line front end: ``autstruct <command> ...``.

Exit codes: 0 success / verified, 2 not verified (or a negative answer),
3 budget exceeded, 64 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .alphabet import OrderedAlphabet, PresentationError, load_presentation
from .fsa import (AlphabetMismatch, BudgetExceeded, FsaFormatError, and_, concat, equal_languages,
                  format_fsa, minimize, not_, or_, parse_fsa)
from .fsa2 import PairAlphabet, compose, exists
from .pipeline import (AutomaticStructure, Diagnosis, PipelineConfig, WitnessFailure,
                       _mult_name, axiom_check, check_multipliers, load_structure, make_multipliers,
                       make_word_acceptor, run_pipeline)
from .rewrite import KbLimits, KnuthBendix, format_rules
from .worddiff import D1Reducer, format_wd, harvest_d1, parse_wd

EXIT_OK, EXIT_NOT_VERIFIED, EXIT_BUDGET, EXIT_USAGE = 0, 2, 3, 64

log = logging.getLogger("autstruct")


class UsageError(Exception):
    pass


# -- helpers -----------------------------------------------------------------


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _alphabet_from_names(names) -> object:
    """Rebuild a one- or two-variable alphabet from letter names alone.

    Pair names look like ``x/y``; the base letters then get the identity
    inversion, which is all the automaton operations need.
    """
    names = list(names)
    if names and all(nm.count("/") == 1 for nm in names):
        firsts = []
        for nm in names:
            x = nm.split("/")[0]
            if x != "$" and x not in firsts:
                firsts.append(x)
        base = OrderedAlphabet(tuple(firsts), tuple(range(len(firsts))))
        pa = PairAlphabet(base)
        if list(pa.letter_names) == names:
            return pa
    return None


def load_fsa(path, group=None):
    """Read an automaton; with ``group`` the letters are checked against it."""
    text = _read(path)
    try:
        if group is not None:
            a = load_presentation(group).alphabet
            first = parse_fsa(text)
            alph = a if len(first.alphabet.letter_names) == a.size else PairAlphabet(a)
            return parse_fsa(text, alph)
        x = parse_fsa(text)
    except FsaFormatError as e:
        raise UsageError(f"{path}: {e}") from None
    alph = _alphabet_from_names(x.alphabet.letter_names)
    return parse_fsa(text, alph) if alph is not None else x


def _fmt_word(alphabet, w) -> str:
    if isinstance(alphabet, OrderedAlphabet):
        return alphabet.format_word(w)
    names = alphabet.letter_names
    if not w:
        return "IdWord"
    sep = "*" if any(len(names[c]) > 1 for c in w) else ""
    return sep.join(names[c] for c in w)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _kb_limits(args) -> KbLimits:
    return KbLimits(max_rule_length=args.max_rule_length, max_rule_count=args.max_rules,
                    max_overlap_length=args.max_overlap_length,
                    checkpoint_interval=args.checkpoint_interval,
                    stability_threshold=args.stability)


def _interactive_callback():
    def ask(nrules, d1):
        sys.stderr.write(f"{nrules} rules, D1 has {d1.num_states} states. Stop Knuth-Bendix? [y/N/auto] ")
        sys.stderr.flush()
        ans = sys.stdin.readline().strip().lower()
        if ans.startswith("y"):
            return True
        if ans.startswith("a"):
            return None
        return False
    return ask


def complete_count(x) -> int:
    """States of the minimal complete automaton: the trimmed count plus one
    failure state unless every letter is defined everywhere."""
    full = x.num_transitions == x.num_states * x.alphabet_size
    return x.num_states + (0 if full and x.num_states else 1)


def summary(s: AutomaticStructure, seconds: float) -> str:
    r = s.report
    w = s.word_acceptor
    sizes = [z.num_states for z in s.multipliers.values()]
    full = [complete_count(z) for z in s.multipliers.values()]
    lines = [
        f"verified: {'yes' if s.verified else 'no'}",
        f"word-acceptor has {w.num_states} states ({complete_count(w)} with failure state)",
        f"multipliers range from {min(sizes)}-{max(sizes)} states "
        f"({min(full)}-{max(full)} with failure state)",
        f"word differences: {len(s.d2.labels) if s.d2 else 0} in D2",
        f"first loop (Steps 1-4): {r.loop1_count}; second loop (Steps 3-6): {r.loop2_count}",
        f"time: {seconds:.1f} s",
    ]
    return "\n".join(lines) + "\n"


# -- commands ----------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        p = load_presentation(args.file)
    except PresentationError as e:
        raise UsageError(f"{args.file}: {e}") from None
    cfg = PipelineConfig(kb=_kb_limits(args), max_loop1=args.max_loop1, max_loop2=args.max_loop2,
                         budget_states=args.budget_states, use_d2_for_d1=args.use_d2_for_d1,
                         witness_samples=args.witnesses, storage=args.storage,
                         insert_witness=args.insert_witness, recompute_d1_only=args.recompute_d1,
                         stop_callback=_interactive_callback() if args.interactive else None)
    out = args.resume or args.out or (Path(args.file).stem + ".aut")
    t0 = time.perf_counter()
    try:
        s = run_pipeline(p, cfg, checkpoint_dir=out, resume=bool(args.resume))
    except Diagnosis as e:
        text = e.report.format(p.alphabet)
        Path(out, "report.txt").write_text(text, encoding="utf-8")
        if args.report:
            Path(args.report).write_text(text, encoding="utf-8")
        print(f"not verified: {e}", file=sys.stderr)
        print(text, end="")
        return EXIT_NOT_VERIFIED
    if args.report:
        Path(args.report).write_text(s.report.format(p.alphabet), encoding="utf-8")
    print(summary(s, time.perf_counter() - t0), end="")
    print(f"output: {out}")
    return EXIT_OK


def cmd_kb(args) -> int:
    try:
        p = load_presentation(args.file)
    except PresentationError as e:
        raise UsageError(f"{args.file}: {e}") from None
    kb = KnuthBendix(p, _kb_limits(args))
    ask = _interactive_callback() if args.interactive else None
    res = kb.run((lambda rs: bool(ask(len(rs), harvest_d1(rs)))) if ask else None)
    _emit(format_rules(res.rules), args.out)
    print(f"# {len(res.rules)} rules, {res.reason}", file=sys.stderr)
    if args.d1:
        Path(args.d1).write_text(format_wd(harvest_d1(res.rules)), encoding="utf-8")
    return EXIT_OK


def cmd_wa(args) -> int:
    a = load_presentation(args.group).alphabet
    d1 = parse_wd(_read(args.d1), a)
    w = make_word_acceptor(d1, args.budget_states)
    _emit(format_fsa(w, ["word-acceptor"]), args.out)
    print(f"# word-acceptor has {w.num_states} states", file=sys.stderr)
    return EXIT_OK


def cmd_mult(args) -> int:
    a = load_presentation(args.group).alphabet
    w = parse_fsa(_read(args.wa), a)
    d2 = parse_wd(_read(args.d2), a)
    d1 = parse_wd(_read(args.d1), a) if args.d1 else d2
    res = make_multipliers(w, d2, args.budget_states, reducer=D1Reducer(d1))
    if isinstance(res, WitnessFailure):
        print(f"word-acceptor accepts {a.format_word(res.u)} and {a.format_word(res.v)}, "
              "which are equal", file=sys.stderr)
        return EXIT_NOT_VERIFIED
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for g, z in res.items():
        (out / _mult_name(a, g)).write_text(format_fsa(z), encoding="utf-8")
    print(" ".join(f"{'$' if g is None else a.names[g]}:{z.num_states}" for g, z in res.items()))
    return EXIT_OK


def cmd_check(args) -> int:
    s = load_structure(args.dir)
    mults = dict(s.multipliers)
    mults[None] = s.equality_multiplier
    if s.d2 is None:
        raise UsageError("structure has no d2.wd")
    miss = check_multipliers(s.word_acceptor, mults, s.d2, s.reducer())
    if miss is not None:
        print(f"Step 5 fails: {len(miss.words)} missing word differences")
        return EXIT_NOT_VERIFIED
    bad = axiom_check(mults, s.presentation, args.budget_states)
    if bad is not None:
        print(f"Step 6 fails on relator {s.alphabet.format_word(bad.relator)}")
        return EXIT_NOT_VERIFIED
    print("structure verified")
    return EXIT_OK


def cmd_enum(args) -> int:
    from .analysis import enumerate_words
    x = load_fsa(args.fsa, args.group)
    for w in enumerate_words(x, args.maxlen):
        print(_fmt_word(x.alphabet, w))
    return EXIT_OK


def cmd_order(args) -> int:
    from .analysis import language_size
    print(language_size(load_fsa(args.fsa, args.group)))
    return EXIT_OK


def cmd_growth(args) -> int:
    from .analysis import growth_series
    print(growth_series(load_fsa(args.fsa, args.group)))
    return EXIT_OK


def cmd_geodesic(args) -> int:
    from .analysis import GeodesicConfig, GeodesicResult, geodesic_search
    s = load_structure(args.dir)
    cfg = GeodesicConfig(sample_count=args.samples, max_sample_length=args.maxlen,
                         rng_seed=args.seed, max_iterations=args.max_iterations)
    res = geodesic_search(s, cfg)
    if not isinstance(res, GeodesicResult):
        print(f"not converged: |WDG| = {len(res.wdg)}, trajectory {res.trajectory}", file=sys.stderr)
        return EXIT_NOT_VERIFIED
    out = args.out or str(Path(args.dir) / "geo.fsa")
    Path(out).write_text(format_fsa(res.acceptor, ["geodesic word-acceptor", f"seed {args.seed}"]),
                         encoding="utf-8")
    print(f"geodesic word-acceptor has {res.acceptor.num_states} states "
          f"({complete_count(res.acceptor)} with failure state); |WDG| = {len(res.wdg)}; "
          f"{res.iterations} iterations; written to {out}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    s = load_structure(args.dir)
    if not s.verified:
        print("structure is not verified", file=sys.stderr)
        return EXIT_NOT_VERIFIED
    try:
        w = s.alphabet.parse_word(args.word)
    except (PresentationError, ValueError) as e:
        raise UsageError(str(e)) from None
    print(s.alphabet.format_word(s.reduce(w)))
    return EXIT_OK


_FSA_ARITY = {"and": 2, "or": 2, "not": 1, "concat": 2, "exists": 1, "compose": 2, "min": 1, "eq": 2}


def cmd_fsa(args) -> int:
    need = _FSA_ARITY[args.op]
    if len(args.files) != need:
        raise UsageError(f"fsa {args.op} takes {need} file(s)")
    xs = [load_fsa(f, args.group) for f in args.files]
    op = args.op
    try:
        if op == "eq":
            same = equal_languages(*xs)
            print("equal" if same else "different")
            return EXIT_OK if same else EXIT_NOT_VERIFIED
        if op in ("exists", "compose") and not isinstance(xs[0].alphabet, PairAlphabet):
            raise UsageError(f"fsa {op} needs two-variable automata")
        result = {
            "and": lambda: and_(*xs, args.budget_states),
            "or": lambda: or_(*xs, args.budget_states),
            "not": lambda: not_(xs[0]),
            "concat": lambda: concat(*xs, args.budget_states),
            "exists": lambda: exists(xs[0], args.budget_states),
            "compose": lambda: compose(*xs, args.budget_states),
            "min": lambda: minimize(xs[0]),
        }[op]()
    except AlphabetMismatch as e:
        raise UsageError(f"alphabet mismatch: {e}") from None
    _emit(format_fsa(minimize(result)), args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_kb_flags(p) -> None:
    d = KbLimits()
    p.add_argument("--max-rules", type=int, default=d.max_rule_count)
    p.add_argument("--max-rule-length", type=int, default=d.max_rule_length)
    p.add_argument("--max-overlap-length", type=int, default=d.max_overlap_length)
    p.add_argument("--checkpoint-interval", type=int, default=d.checkpoint_interval,
                   help="overlaps between D1 stability checks")
    p.add_argument("--stability", type=int, default=d.stability_threshold,
                   help="consecutive unchanged checks before stopping")
    p.add_argument("--interactive", action="store_true", help="ask whether to stop at each check")


def build_parser() -> argparse.ArgumentParser:
    cfg = PipelineConfig()
    ap = argparse.ArgumentParser(prog="autstruct", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--threads", type=int, default=1, help="accepted for compatibility; work is sequential")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="compute and verify the automatic structure")
    p.add_argument("file")
    p.add_argument("-o", "--out", help="output directory (default <name>.aut)")
    p.add_argument("--max-loop1", type=int, default=cfg.max_loop1)
    p.add_argument("--max-loop2", type=int, default=cfg.max_loop2)
    p.add_argument("--budget-states", type=int, default=cfg.budget_states)
    p.add_argument("--use-d2-for-d1", action="store_true")
    p.add_argument("--resume", metavar="DIR", help="continue from the artifacts in DIR")
    p.add_argument("--report", metavar="FILE")
    p.add_argument("--storage", choices=("dense", "sparse"))
    p.add_argument("--witnesses", type=int, default=cfg.witness_samples,
                   help="Step 5 witnesses per generator per round")
    p.add_argument("--insert-witness", action="store_true",
                   help="experimental: add the Step 4 witness equation to the rules")
    p.add_argument("--recompute-d1", action="store_true",
                   help="experimental: re-harvest D1 after adding the witness, without more completion")
    _add_kb_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("kb", help="Knuth-Bendix completion only")
    p.add_argument("file")
    p.add_argument("-o", "--out")
    p.add_argument("--d1", metavar="FILE", help="also write the harvested D1")
    _add_kb_flags(p)
    p.set_defaults(func=cmd_kb)

    p = sub.add_parser("wa", help="word-acceptor from a saved D1")
    p.add_argument("group")
    p.add_argument("d1")
    p.add_argument("-o", "--out")
    p.add_argument("--budget-states", type=int, default=cfg.budget_states)
    p.set_defaults(func=cmd_wa)

    p = sub.add_parser("mult", help="multipliers from a word-acceptor and D2")
    p.add_argument("group")
    p.add_argument("wa")
    p.add_argument("d2")
    p.add_argument("--d1", help="D1 used for reductions (default: D2)")
    p.add_argument("-o", "--out", default=".")
    p.add_argument("--budget-states", type=int, default=cfg.budget_states)
    p.set_defaults(func=cmd_mult)

    p = sub.add_parser("check", help="Steps 5 and 6 on a saved structure")
    p.add_argument("dir")
    p.add_argument("--budget-states", type=int, default=cfg.budget_states)
    p.set_defaults(func=cmd_check)

    for name, fn, hlp in (("enum", cmd_enum, "list accepted words"),
                          ("order", cmd_order, "size of the language"),
                          ("growth", cmd_growth, "growth series as a rational function")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("fsa")
        p.add_argument("--group", help="presentation supplying letter names")
        if name == "enum":
            p.add_argument("--maxlen", type=int, required=True)
        p.set_defaults(func=fn)

    p = sub.add_parser("geodesic", help="geodesic word-acceptor of a saved structure")
    p.add_argument("dir")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--maxlen", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--max-iterations", type=int, default=30)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("reduce", help="normal form of a word")
    p.add_argument("dir")
    p.add_argument("word")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("fsa", help="automaton operations")
    p.add_argument("op", choices=sorted(_FSA_ARITY))
    p.add_argument("files", nargs="+")
    p.add_argument("-o", "--out")
    p.add_argument("--group", help="presentation supplying the alphabet")
    p.add_argument("--budget-states", type=int, default=cfg.budget_states)
    p.set_defaults(func=cmd_fsa)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"autstruct: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PresentationError, FsaFormatError, ValueError) as e:
        print(f"autstruct: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"autstruct: {e.filename or ''}: {e.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as e:
        print(f"autstruct: {e}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
