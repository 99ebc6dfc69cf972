import pytest
from hypothesis import given, settings, strategies as st

from autstruct.alphabet import parse_presentation
from autstruct.rewrite import KbLimits, KnuthBendix, format_rules, kb_run, seed_rules

from oracles import all_words, concrete, perm_group, presentation

FINITE = ["s3", "d4", "q8", "c4"]


def rules_of(rs):
    a = rs.alphabet
    return {(a.format_word(r.lhs), a.format_word(r.rhs)) for r in rs.rules}


def coxeter_s3():
    p = presentation("s3c")
    return p, perm_group("s3c", p.alphabet, {"a": (1, 0, 2), "b": (0, 2, 1)})


class TestSmallSystems:
    def test_free_rank1(self):
        p = parse_presentation("generators: a")
        res = kb_run(p)
        assert res.confluent
        assert rules_of(res.rules) == {("aA", "IdWord"), ("Aa", "IdWord")}
        a = p.alphabet
        assert res.rules.reduce(a.parse_word("aAa")) == a.parse_word("a")
        assert res.rules.reduce(()) == ()

    def test_free_rank2(self):
        res = kb_run(presentation("free2"))
        assert res.confluent
        assert rules_of(res.rules) == {(x + x.swapcase(), "IdWord") for x in "aAbB"}
        assert res.rules.stats.rules_added == 4

    def test_seed_orientation(self):
        p = parse_presentation("generators: a\nrelators: a^4")
        assert rules_of(seed_rules(p)) == {("aA", "IdWord"), ("Aa", "IdWord"), ("AA", "aa")}

    def test_no_relators_seed(self):
        assert rules_of(seed_rules(presentation("free2"))) == {
            (x + x.swapcase(), "IdWord") for x in "aAbB"}

    def test_cyclic_four(self):
        p = presentation("c4")
        res = kb_run(p)
        assert res.confluent
        irreducible = [w for w in all_words(2, 6) if res.rules.reduce(w) == w]
        assert [p.alphabet.format_word(w) for w in irreducible] == ["IdWord", "a", "A", "aa"]

    def test_coxeter_s3(self):
        p, g = coxeter_s3()
        res = kb_run(p)
        assert res.confluent
        a = p.alphabet
        assert a.format_word(res.rules.reduce(a.parse_word("bab"))) == "aba"
        nf = g.shortlex_normal_forms(6)
        assert nf[g.evaluate(a.parse_word("bab"))] == a.parse_word("aba")
        assert sum(1 for w in all_words(2, 6) if res.rules.reduce(w) == w) == 6

    def test_format_rules(self):
        text = format_rules(kb_run(parse_presentation("generators: a")).rules)
        assert "aA -> IdWord" in text


@pytest.mark.parametrize("name", FINITE)
def test_finite_groups_against_multiplication_table(name):
    p, g = concrete(name)
    res = kb_run(p)
    assert res.confluent
    nf = g.shortlex_normal_forms(16)
    k = p.alphabet.size
    for w in all_words(k, 5):
        assert res.rules.reduce(w) == nf[g.evaluate(w)]
    irreducible = [w for w in all_words(k, 8) if res.rules.reduce(w) == w]
    assert len(irreducible) == len(nf)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(FINITE), st.lists(st.integers(0, 3), max_size=14))
def test_reduction_invariants(name, letters):
    p, g = concrete(name)
    rs = _confluent(name)
    w = tuple(x % p.alphabet.size for x in letters)
    r = rs.reduce(w)
    assert g.evaluate(r) == g.evaluate(w)
    assert rs.reduce(r) == r
    assert (len(r), r) <= (len(w), w)


_cache = {}


def _confluent(name):
    if name not in _cache:
        _cache[name] = kb_run(presentation(name)).rules
    return _cache[name]


class TestEngine:
    def test_resumable(self):
        p = presentation("d4")
        whole = kb_run(p)
        kb = KnuthBendix(p, KbLimits(checkpoint_interval=1))
        calls = []

        def observer(snapshot):
            calls.append(len(snapshot))
            return True

        while True:
            res = kb.run(observer)
            if res.reason != "stopped":
                break
        assert len(calls) > 1
        assert res.confluent
        assert rules_of(res.rules) == rules_of(whole.rules)

    def test_snapshot_is_independent(self):
        p = presentation("d4")
        kb = KnuthBendix(p, KbLimits(checkpoint_interval=1))
        snaps = []
        kb.run(lambda s: snaps.append(s) or True)
        before = rules_of(snaps[0])
        kb.run()
        assert rules_of(snaps[0]) == before

    def test_rule_length_limit(self):
        res = kb_run(presentation("g1"), KbLimits(max_rule_length=3, max_overlap_length=8))
        assert res.reason == "limit"
        assert res.rules.stats.rules_discarded > 0

    def test_rule_count_limit(self):
        res = kb_run(presentation("g1"), KbLimits(max_rule_count=50))
        assert res.reason == "limit"

    @pytest.mark.parametrize("field", ["max_rule_length", "max_rule_count", "max_overlap_length",
                                       "checkpoint_interval", "stability_threshold"])
    def test_limits_validated(self, field):
        with pytest.raises(ValueError):
            KbLimits(**{field: 0})
