import pytest

from autstruct.alphabet import Presentation, parse_presentation
from autstruct.fsa import all_words as universal, equal_languages, is_empty, not_, and_
from autstruct.fsa2 import compose, exists, exists_second
from autstruct.pipeline import (
    AxiomFailure, CompositeCache, Diagnosis, MissingDifferences, PipelineConfig, WitnessFailure,
    axiom_check, build_d2, check_multipliers, load_structure, make_multipliers,
    make_word_acceptor, prefix_differences, run_pipeline, save_structure, used_differences,
)
from autstruct.rewrite import RuleSystem, kb_run
from autstruct.worddiff import D1Reducer, harvest_d1

from oracles import (
    ConcreteGroup, all_words, concrete, free_reduce, language, pair_accepts, presentation,
    z2_element,
)
from structures import structure

FINITE = ["s3", "d4", "q8", "c4"]
SMALL = FINITE + ["s3c", "free2", "z2"]


def z2_group(p):
    images = [z2_element((x,), p.alphabet) for x in range(p.alphabet.size)]
    return ConcreteGroup("Z2", images, lambda g, h: (g[0] + h[0], g[1] + h[1]), (0, 0))


def free_normal_forms(p, max_len):
    inv = p.alphabet.inverse
    return {w for w in all_words(p.alphabet.size, max_len) if free_reduce(w, inv) == w}


class TestWordAcceptor:
    def test_free_rank1_from_d1(self):
        rank1 = parse_presentation("generators: a")
        w = make_word_acceptor(harvest_d1(kb_run(rank1).rules))
        assert w.num_states == 3
        assert language(w, 8) == free_normal_forms(rank1, 8)

    def test_trivial_d1_gives_all_words(self):
        p = presentation("free2")
        w = make_word_acceptor(harvest_d1(RuleSystem(p.alphabet)))
        assert equal_languages(w, universal(4))

    @pytest.mark.parametrize("name", FINITE)
    def test_finite_languages(self, name):
        p, g = concrete(name)
        s = structure(name)
        nf = g.shortlex_normal_forms(16)
        assert language(s.word_acceptor, 8) == set(nf.values())

    def test_free2(self):
        s = structure("free2")
        assert s.verified
        assert s.report.loop1_count == 1 and s.report.loop2_count == 1
        assert s.word_acceptor.num_states == 5
        assert language(s.word_acceptor, 5) == free_normal_forms(presentation("free2"), 5)

    def test_z2(self):
        p = presentation("z2")
        nf = z2_group(p).shortlex_normal_forms(6)
        got = language(structure("z2").word_acceptor, 6)
        assert got == {w for w in nf.values() if len(w) <= 6}


class TestMultipliers:
    @pytest.mark.parametrize("name", FINITE)
    def test_exact_on_finite_groups(self, name):
        # M_x accepts (u, v) iff u, v are normal forms and u x = v
        p, g = concrete(name)
        s = structure(name)
        nfs = list(g.shortlex_normal_forms(16).values())
        for x in [None] + list(range(p.alphabet.size)):
            m = s.multiplier(x)
            gx = g.identity if x is None else g.images[x]
            for u in nfs:
                for v in nfs:
                    expected = g.mul(g.evaluate(u), gx) == g.evaluate(v)
                    assert pair_accepts(m, u, v) == expected

    @pytest.mark.parametrize("name", ["free2", "z2"])
    def test_infinite_groups(self, name):
        s = structure(name)
        p = presentation(name)
        words = language(s.word_acceptor, 4)
        for u in words:
            for x in range(p.alphabet.size):
                v = s.reduce(u + (x,))
                assert pair_accepts(s.multiplier(x), u, v)
                for other in words:
                    if other != v and abs(len(other) - len(u)) <= 1:
                        assert not pair_accepts(s.multiplier(x), u, other)

    @pytest.mark.parametrize("name", SMALL)
    def test_projections_equal_word_acceptor(self, name):
        s = structure(name)
        w = s.word_acceptor
        assert equal_languages(exists(s.equality_multiplier), w)
        assert equal_languages(exists_second(s.equality_multiplier), w)
        for x, m in s.multipliers.items():
            assert is_empty(and_(w, not_(exists(m))))

    @pytest.mark.parametrize("name", ["free2", "d4", "z2"])
    def test_inverse_composites(self, name):
        s = structure(name)
        inv = s.alphabet.inverse
        for x in range(s.alphabet.size):
            z = compose(s.multiplier(x), s.multiplier(inv[x]))
            assert equal_languages(z, s.equality_multiplier)

    def test_free2_example(self):
        s = structure("free2")
        a = s.alphabet
        assert pair_accepts(s.multiplier(a.index("a")), a.parse_word("A"), ())
        assert pair_accepts(s.multiplier(a.index("a")), a.parse_word("b"), a.parse_word("ba"))
        assert not pair_accepts(s.multiplier(a.index("a")), a.parse_word("a"), ())


class TestFailureDetection:
    def test_witness_failure(self):
        p, g = concrete("c4")
        s = structure("c4")
        res = make_multipliers(universal(p.alphabet.size, p.alphabet), s.d2, reducer=s.reducer())
        assert isinstance(res, WitnessFailure)
        assert res.u != res.v
        assert g.evaluate(res.u) == g.evaluate(res.v)

    def test_truncated_d2(self):
        s = structure("z2")
        a = s.alphabet
        red = s.reducer()
        labels = used_differences(s.word_acceptor, s.d2, red)
        generators = {red((x,)) for x in range(a.size)} | {()}
        dropped = next(d for d in reversed(labels) if d not in generators)
        keep = [d for d in labels if d != dropped and d != red(a.invert(dropped))]
        d2 = build_d2(keep, red, a)
        assert dropped not in d2.label_set()
        mults = make_multipliers(s.word_acceptor, d2, reducer=red)
        res = check_multipliers(s.word_acceptor, mults, d2, red)
        assert isinstance(res, MissingDifferences)
        assert dropped in res.words

    @pytest.mark.parametrize("name", ["free2", "d4"])
    def test_swapped_multipliers(self, name):
        s = structure(name)
        p = s.presentation
        a = p.alphabet
        ia, ib = a.index("a"), a.index("b")
        mults = {None: s.equality_multiplier, **s.multipliers}
        mults[ia], mults[ib] = mults[ib], mults[ia]
        res = axiom_check(mults, p)
        assert isinstance(res, AxiomFailure)
        # the oracle: the first relator that is no longer trivial after the swap
        swap = {ia: ib, ib: ia}
        if name == "d4":
            _, g = concrete("d4")
            trivial = lambda r: g.evaluate(r) == g.identity  # noqa: E731
        else:
            trivial = lambda r: free_reduce(r, a.inverse) == ()  # noqa: E731
        first = next(r for r in p.monoid_relators if not trivial(tuple(swap.get(x, x) for x in r)))
        assert res.relator == first

    @pytest.mark.parametrize("name", SMALL)
    def test_axioms_hold(self, name):
        s = structure(name)
        mults = {None: s.equality_multiplier, **s.multipliers}
        cache = CompositeCache(mults)
        assert axiom_check(mults, s.presentation, cache=cache) is None
        assert cache.compositions > 0 or not s.presentation.relators


class TestHelpers:
    def test_prefix_differences(self):
        s = structure("z2")
        a = s.alphabet
        u, v = a.parse_word("ab"), a.parse_word("ba")
        d = prefix_differences(u, v, s.reducer(), a)
        assert d[0] == () and d[-1] == ()
        assert d[1] == s.reduce(a.parse_word("Ab"))

    def test_used_differences_subset_of_d2(self):
        s = structure("d4")
        used = used_differences(s.word_acceptor, s.d2, s.reducer())
        assert set(used) <= s.d2.label_set()
        assert () in used


class TestDriver:
    def test_cyclic_order(self):
        from autstruct.analysis import Finite, language_size
        assert language_size(structure("c4").word_acceptor) == Finite(4)

    def test_loop2_cap(self):
        with pytest.raises(Diagnosis) as e:
            run_pipeline(presentation("f26"), PipelineConfig(max_loop2=1))
        assert e.value.stage == "step5"
        assert e.value.report.loop2_count == 2

    def test_sparse_storage(self):
        s = run_pipeline(presentation("d4"), PipelineConfig(storage="sparse"))
        assert all(m.storage == "sparse" for m in s.multipliers.values())
        assert equal_languages(s.word_acceptor, structure("d4").word_acceptor)

    def test_checkpoint_and_resume(self, tmp_path):
        p = presentation("f26")
        first = run_pipeline(p, checkpoint_dir=tmp_path / "a")
        files = sorted(f.name for f in (tmp_path / "a").iterdir())
        assert {"wa.fsa", "mult_eq.fsa", "mult_a.fsa", "d1.wd", "d2.wd", "report.txt",
                "manifest.txt", "group.pres"} <= set(files)
        before = {f: (tmp_path / "a" / f).read_bytes() for f in files if f.endswith(".fsa")}
        again = run_pipeline(p, checkpoint_dir=tmp_path / "a", resume=True)
        after = {f: (tmp_path / "a" / f).read_bytes() for f in before}
        assert before == after
        assert again.verified and first.verified
        assert again.report.loop2_count == 1  # resumed from the final D1 and D2

    def test_save_and_load(self, tmp_path):
        s = structure("d4")
        save_structure(s, tmp_path)
        back = load_structure(tmp_path)
        assert back.verified
        assert equal_languages(back.word_acceptor, s.word_acceptor)
        for g in s.multipliers:
            assert equal_languages(back.multipliers[g], s.multipliers[g])

    def test_rejected_d1_is_not_reused(self, tmp_path):
        # a manifest rejection of the saved D1 forces a fresh Step 1
        p = presentation("d4")
        run_pipeline(p, checkpoint_dir=tmp_path)
        from autstruct.pipeline import Checkpoint, _Step1
        from autstruct.worddiff import parse_wd
        d1 = parse_wd((tmp_path / "d1.wd").read_text(), p.alphabet)
        Checkpoint(tmp_path).record("step4", "rejected", _Step1.signature(d1))
        s = run_pipeline(p, checkpoint_dir=tmp_path, resume=True)
        assert any("from Step 1" in e for e in s.report.events)

    def test_experimental_flags_still_verify(self):
        for cfg in (PipelineConfig(insert_witness=True), PipelineConfig(recompute_d1_only=True),
                    PipelineConfig(use_d2_for_d1=True)):
            assert run_pipeline(presentation("z2"), cfg).verified

    def test_stop_callback(self):
        # the callback overrides the stability rule: never stop early, so
        # Knuth-Bendix runs to completion on a finite group
        seen = []

        def cb(nrules, d1):
            seen.append(nrules)
            return False

        s = run_pipeline(presentation("d4"), PipelineConfig(stop_callback=cb))
        assert s.verified
        assert any("confluent" in e for e in s.report.events)

    def test_trivial_group(self):
        p = Presentation(presentation("c4").alphabet, ((0,),))
        s = run_pipeline(p)
        assert s.verified
        assert language(s.word_acceptor, 3) == {()}

    @pytest.mark.parametrize("field", ["max_loop1", "max_loop2", "budget_states",
                                       "witness_samples", "max_restarts"])
    def test_config_validation(self, field):
        with pytest.raises(ValueError):
            PipelineConfig(**{field: 0})

    def test_reducer(self):
        d1 = harvest_d1(kb_run(presentation("c4")).rules)
        assert D1Reducer(d1)((0, 0, 0, 0, 0)) == (0,)


class TestPostconditions:
    @pytest.mark.parametrize("name", SMALL)
    def test_hold(self, name):
        from postconditions import check_all
        assert not any(check_all(structure(name), max_len=5).values())

    def test_detects_swapped_multipliers(self):
        from dataclasses import replace
        from postconditions import check_partners, check_relators
        s = structure("d4")
        a = s.alphabet
        ia, ib = a.index("a"), a.index("b")
        mults = dict(s.multipliers)
        mults[ia], mults[ib] = mults[ib], mults[ia]
        broken = replace(s, multipliers=mults)
        assert check_partners(broken, 3)
        assert check_relators(broken)
