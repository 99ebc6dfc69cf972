"""Acceptance criteria.

Each test records one PASS/FAIL line (shown in the terminal summary under
"acceptance criteria") and then asserts the same condition.  State counts
of the form "N complete" include the failure state of the minimal complete
automaton; the trimmed count is printed alongside.
"""

import random
import time
from functools import lru_cache

import pytest

from autstruct.analysis import GeodesicResult, geodesic_search
from autstruct.cli import EXIT_OK, complete_count, main
from autstruct.fsa import and_, concat, format_fsa, minimize, not_, or_
from autstruct.fsa2 import compose, exists
from autstruct.pipeline import Diagnosis, PipelineConfig, run_pipeline, save_structure, used_differences
from autstruct.rewrite import kb_run

from oracles import (
    DATA, all_words, compose_oracle, concrete, exists_oracle, group_order, language, pair_accepts,
    presentation, random_fsa, random_pair_fsa, relabel, self_inverse_alphabet,
)
from postconditions import check_all
from structures import structure

pytestmark = pytest.mark.slow

G1_GROWTH = "(1 + 3*t + 3*t^2 + t^3)/(1 - 9*t + 9*t^2 - t^3)"


@lru_cache(maxsize=None)
def timed(name: str, storage=None):
    t = time.perf_counter()
    s = run_pipeline(presentation(name), PipelineConfig(storage=storage))
    return s, time.perf_counter() - t


def mult_counts(s):
    return sorted(complete_count(m) for m in s.multipliers.values())


def test_c1_g1(criterion):
    s, secs = timed("g1")
    w = complete_count(s.word_acceptor)
    m = mult_counts(s)
    ok = s.verified and w == 48 and 145 <= m[0] and m[-1] <= 175 and secs < 120
    criterion("C1 G1", ok,
              f"verified={s.verified}; W {w} complete ({s.word_acceptor.num_states} trimmed); "
              f"multipliers {m[0]}-{m[-1]} complete; {secs:.1f}s")
    assert ok


def test_c2_growth(criterion, tmp_path, capsys):
    lines = []
    for name in ("free2", "g1"):
        save_structure(structure(name), tmp_path / name)
        assert main(["growth", str(tmp_path / name / "wa.fsa")]) == EXIT_OK
        lines.append(capsys.readouterr().out.strip())
    ok = lines == ["(1 + t)/(1 - 3*t)", G1_GROWTH]
    criterion("C2 growth", ok, f"F2 {lines[0]}; G1 {lines[1]}")
    assert ok


def geodesic(s):
    res = geodesic_search(s)
    assert isinstance(res, GeodesicResult), res
    return res


def test_c3_geodesics(criterion):
    g1 = structure("g1")
    r1 = geodesic(g1)
    g2 = timed("g2", "sparse")[0]
    r2 = geodesic(g2)
    wd2 = len(used_differences(g2.word_acceptor, g2.d2, g2.reducer()))
    c1, c2 = complete_count(r1.acceptor), complete_count(r2.acceptor)
    ok1 = c1 == 64 and abs(len(r1.wdg) - 103) <= 10.3
    ok2 = c2 == 156 and len(r2.wdg) == wd2 and abs(len(r2.wdg) - 99) <= 9.9
    criterion("C3 G1 geodesic", ok1,
              f"{c1} complete ({r1.acceptor.num_states} trimmed); |WDG| = {len(r1.wdg)} "
              f"(target 103 +/- 10%); {r1.iterations} iteration(s)")
    criterion("C3 G2 geodesic", ok2,
              f"{c2} complete ({r2.acceptor.num_states} trimmed); |WDG| = {len(r2.wdg)}, "
              f"|WD| = {wd2} (target 99)")
    assert ok1 and ok2


def test_c4_g2(criterion):
    s, secs = timed("g2", "sparse")
    w = complete_count(s.word_acceptor)
    m = mult_counts(s)
    sparse = all(x.storage == "sparse" for x in s.multipliers.values())
    ok = (s.verified and sparse and w == 131 and 132 <= m[0] and m[-1] <= 232 and secs < 300)
    criterion("C4 G2", ok,
              f"verified={s.verified}, sparse={sparse}; W {w} complete "
              f"({s.word_acceptor.num_states} trimmed, target 131); multipliers {m[0]}-{m[-1]} "
              f"complete (target 132-232); {secs:.1f}s")
    assert ok


def test_c5_fibonacci(criterion):
    s, secs = timed("f26")
    failures = check_all(s)
    ok = s.verified and not any(failures.values())
    criterion("C5 F(2,6)", ok,
              f"verified={s.verified}; W {complete_count(s.word_acceptor)} complete; "
              f"postconditions {'hold' if ok else failures}; {secs:.1f}s")
    assert ok


def test_c5_stretch_f28(criterion):
    """Non-gating: the line is recorded but never fails the run."""
    p = presentation("f28")
    t = time.perf_counter()
    try:
        run_pipeline(p)
        default = "default settings verify"
    except Diagnosis as e:
        default = f"default settings stop with a diagnosis at {e.stage}"
    default += f" ({time.perf_counter() - t:.0f}s)"
    t = time.perf_counter()
    try:
        s = run_pipeline(p, PipelineConfig(insert_witness=True))
    except Diagnosis as e:
        criterion("C5 stretch F(2,8) [non-gating]", False, f"insert_witness: {e}; {default}")
        return
    w = complete_count(s.word_acceptor)
    m = mult_counts(s)
    ok = s.verified and w == 212 and m[0] == m[-1] == 1861
    criterion("C5 stretch F(2,8) [non-gating]", ok,
              f"with insert_witness: W {w} complete, multipliers {m[0]}-{m[-1]} complete, "
              f"{time.perf_counter() - t:.0f}s; {default}")


def kb_order(name):
    """Irreducible words of length <= 8 under the confluent rewriting system."""
    p = presentation(name)
    rs = kb_run(p).rules
    return sum(1 for w in all_words(p.alphabet.size, 8) if rs.reduce(w) == w)


def test_c6_finite_groups(criterion, tmp_path, capsys):
    got = {}
    for name in ("s3", "d4", "q8", "c4"):
        out = tmp_path / name
        assert main(["run", str(DATA / f"{name}.pres"), "-o", str(out)]) == EXIT_OK
        capsys.readouterr()
        assert main(["order", str(out / "wa.fsa")]) == EXIT_OK
        got[name] = (int(capsys.readouterr().out), group_order(concrete(name)[1]), kb_order(name))
    ok = all(a == b == c for a, b, c in got.values())
    criterion("C6 finite groups", ok,
              "; ".join(f"{k} order {a} (table {b}, rewriting {c})" for k, (a, b, c) in got.items()))
    assert ok


@pytest.mark.parametrize("name", ["c4", "s3", "s3c", "d4", "q8", "free2", "z2", "f26", "g1"])
def test_c7_postconditions(criterion, name):
    failures = check_all(structure(name), max_len=6)
    ok = not any(failures.values())
    criterion(f"C7 postconditions {name}", ok,
              "(a)-(d) hold, |u| <= 6" if ok else str(failures))
    assert ok


def test_c7_postconditions_g2(criterion):
    # 161,156,459 W words of length <= 6 over 24 letters: (b) is run to length 3
    s = timed("g2", "sparse")[0]
    failures = check_all(s, max_len=3)
    held = not any(failures.values())
    detail = (f"(a), (c), (d) {'hold' if held else failures}; (b) checked only for |u| <= 3, "
              f"the |u| <= 6 sweep (161M words) is out of reach")
    criterion("C7 postconditions g2", False, detail)
    pytest.fail(detail)


def fsa_algebra_case(seed):
    """Mismatches for one seeded case; empty when every operation agrees."""
    rng = random.Random(seed)
    k = rng.randint(1, 4)
    x, y = random_fsa(rng, k, 8), random_fsa(rng, k, 8)
    lx, ly = language(x, 6), language(y, 6)
    words = set(all_words(k, 6))
    bad = []
    checks = {
        "and": (and_(x, y), lx & ly),
        "or": (or_(x, y), lx | ly),
        "not": (not_(x), words - lx),
        "concat": (concat(x, y), {u + v for u in lx for v in ly
                                  if len(u) + len(v) <= 6}),
        "minimize": (minimize(x), lx),
    }
    for op, (z, expected) in checks.items():
        if language(z, 6) != expected:
            bad.append(op)
    m = minimize(x)
    if format_fsa(minimize(relabel(x, rng))) != format_fsa(m):
        bad.append("canonical")
    # pair operations over a one-letter base (three pair letters)
    base = self_inverse_alphabet(1)
    z1, z2 = random_pair_fsa(rng, base, 8), random_pair_fsa(rng, base, 8)
    if language(exists(z1), 6) != {u for u in all_words(1, 6) if exists_oracle(z1, u)}:
        bad.append("exists")
    zc = compose(z1, z2)
    for u in all_words(1, 6):
        for v in all_words(1, 6):
            if pair_accepts(zc, u, v) != compose_oracle(z1, z2, u, v):
                bad.append("compose")
                break
        else:
            continue
        break
    return bad


def test_c8_fsa_algebra(criterion):
    t = time.perf_counter()
    bad = {seed: b for seed in range(200) if (b := fsa_algebra_case(seed))}
    secs = time.perf_counter() - t
    ok = not bad and secs < 60
    criterion("C8 fsa algebra", ok,
              f"200 seeded cases, {len(bad)} mismatching {dict(list(bad.items())[:3])}; {secs:.1f}s")
    assert ok


def test_c9_extended_benchmarks_documented(criterion):
    readme = (DATA.parent.parent / "README.md").read_text()
    names = ["F(2,9)", "F(2,10)", "Picard"]
    ok = all(n in readme for n in names)
    criterion("C9 extended benchmarks", ok, "documented in README, not run")
    assert ok
