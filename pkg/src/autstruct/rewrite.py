"""Knuth-Bendix completion for group presentations under short-lex.

Internally a word is a ``str`` holding one character per generator
(``chr(index)``), so that rule matching and overlap search run on
native string operations.  The public functions take and return tuples
of generator indices.

Overlaps are scheduled given-clause style: the shortest unprocessed rule
(by ``|lhs| + |rhs|``, ties by creation order) is overlapped with every
processed rule, then becomes processed itself.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from typing import Callable, Optional

from .alphabet import Presentation, Word

log = logging.getLogger(__name__)

_END = -1  # trie key marking a rule end


def to_str(w) -> str:
    return "".join(map(chr, w))


def to_word(s: str) -> Word:
    return tuple(map(ord, s))


def slex_less(a: str, b: str) -> bool:
    return len(a) < len(b) or (len(a) == len(b) and a < b)


@dataclass(frozen=True)
class Rule:
    lhs: Word
    rhs: Word


@dataclass
class KbLimits:
    max_rule_length: int = 30
    max_rule_count: int = 200_000
    max_overlap_length: int = 60
    checkpoint_interval: int = 2000
    stability_threshold: int = 2

    def __post_init__(self):
        for k, v in vars(self).items():
            if v <= 0:
                raise ValueError(f"KbLimits.{k} must be positive")


@dataclass
class KbStats:
    rules_added: int = 0
    rules_removed: int = 0
    rules_discarded: int = 0
    overlaps: int = 0
    checkpoints: int = 0


class RuleSystem:
    """Active rewriting rules plus a reversed-lhs trie for suffix matching."""

    def __init__(self, alphabet):
        self.alphabet = alphabet
        self._inv_table = {i: chr(alphabet.inverse[i]) for i in range(alphabet.size)}
        self._lhs: list = []
        self._rhs: list = []
        self._active: list = []
        self._by_lhs: dict = {}
        self._trie: dict = {}
        self.stats = KbStats()

    # -- basic access --------------------------------------------------------

    def __len__(self):
        return len(self._by_lhs)

    @property
    def rules(self) -> list:
        return [Rule(to_word(self._lhs[i]), to_word(self._rhs[i]))
                for i in range(len(self._lhs)) if self._active[i]]

    def rule_strings(self):
        """Active rules as ``(lhs, rhs)`` internal strings in creation order."""
        return [(self._lhs[i], self._rhs[i]) for i in range(len(self._lhs)) if self._active[i]]

    def inverse_str(self, s: str) -> str:
        return s[::-1].translate(self._inv_table)

    def snapshot(self) -> "RuleSystem":
        """Independent copy holding the active rules only."""
        out = RuleSystem(self.alphabet)
        for lhs, rhs in self.rule_strings():
            out._insert(lhs, rhs)
        out.stats = KbStats(**vars(self.stats))
        return out

    # -- trie ----------------------------------------------------------------

    def _insert(self, lhs: str, rhs: str) -> int:
        rid = len(self._lhs)
        self._lhs.append(lhs)
        self._rhs.append(rhs)
        self._active.append(True)
        self._by_lhs[lhs] = rid
        node = self._trie
        for c in reversed(lhs):
            node = node.setdefault(c, {})
        node[_END] = rid
        return rid

    def _deactivate(self, rid: int) -> None:
        self._active[rid] = False
        lhs = self._lhs[rid]
        del self._by_lhs[lhs]
        node = self._trie
        for c in reversed(lhs):
            node = node[c]
        del node[_END]

    # -- reduction -----------------------------------------------------------

    def reduce_str(self, w: str) -> str:
        """Leftmost reduction to a word containing no active lhs."""
        trie = self._trie
        rhs_of = self._rhs
        out: list = []
        todo = list(w)
        todo.reverse()
        while todo:
            c = todo.pop()
            out.append(c)
            node = trie
            j = len(out) - 1
            while j >= 0:
                node = node.get(out[j])
                if node is None:
                    break
                rid = node.get(_END)
                if rid is not None:
                    del out[j:]
                    todo.extend(reversed(rhs_of[rid]))
                    break
                j -= 1
        return "".join(out)

    def reduce(self, w) -> Word:
        return to_word(self.reduce_str(to_str(w)))

    def is_reduced_str(self, w: str) -> bool:
        trie = self._trie
        for end in range(len(w)):
            node = trie
            j = end
            while j >= 0:
                node = node.get(w[j])
                if node is None:
                    break
                if _END in node:
                    return False
                j -= 1
        return True


def reduce(rules: RuleSystem, w) -> Word:
    return rules.reduce(w)


def seed_rules(p: Presentation) -> RuleSystem:
    """Rule system holding one balanced, oriented rule per monoid relator
    (no completion, no inter-reduction)."""
    rs = RuleSystem(p.alphabet)
    for lhs, rhs in _seed_equations(p, rs):
        if lhs != rhs:
            if slex_less(lhs, rhs):
                lhs, rhs = rhs, lhs
            if lhs not in rs._by_lhs:
                rs._insert(lhs, rhs)
    return rs


def _seed_equations(p: Presentation, rs: RuleSystem):
    # inverse relators first, then the given relators
    # inverse relators whole (a balanced split of xX is the trivial x = x)
    for r in p.monoid_relators[len(p.relators):]:
        yield to_str(r), ""
    for r in p.relators:
        s = to_str(r)
        k = (len(s) + 1) // 2
        yield s[:k], rs.inverse_str(s[k:])


class KbResult:
    """Outcome of a completion run: the rule system plus why it stopped."""

    def __init__(self, rules: RuleSystem, reason: str):
        self.rules = rules
        self.reason = reason  # "confluent" | "stopped" | "limit"

    @property
    def confluent(self) -> bool:
        return self.reason == "confluent"

    def __repr__(self):
        return f"KbResult({len(self.rules)} rules, {self.reason})"


class KnuthBendix:
    """Resumable completion engine.

    ``run`` processes overlaps until confluence, a limit, or the observer
    asks to stop; it may be called again to continue from the same point.
    """

    def __init__(self, p: Presentation, limits: Optional[KbLimits] = None):
        self.presentation = p
        self.limits = limits or KbLimits()
        self.rs = RuleSystem(p.alphabet)
        self._pending: list = []  # heap of (weight, rid)
        self._processed: list = []
        self._prefix_index: dict = {}  # proper prefix -> processed rids
        self._suffix_index: dict = {}  # proper suffix -> processed rids
        self._since_checkpoint = 0
        self.reason = None
        for lhs, rhs in _seed_equations(p, self.rs):
            self._add_equation(lhs, rhs)

    # -- rule insertion with inter-reduction ---------------------------------

    def _add_equation(self, a: str, b: str) -> None:
        rs = self.rs
        work = [(a, b)]
        while work:
            a, b = work.pop()
            a = rs.reduce_str(a)
            b = rs.reduce_str(b)
            if a == b:
                continue
            if slex_less(a, b):
                a, b = b, a
            if len(a) > self.limits.max_rule_length:
                rs.stats.rules_discarded += 1
                continue
            # existing rules made reducible by the new one
            hit_lhs = []
            hit_rhs = []
            for rid in list(rs._by_lhs.values()):
                if a in rs._lhs[rid]:
                    hit_lhs.append(rid)
                elif a in rs._rhs[rid]:
                    hit_rhs.append(rid)
            rid = rs._insert(a, b)
            rs.stats.rules_added += 1
            heapq.heappush(self._pending, (len(a) + len(b), rid))
            for old in hit_lhs:
                rs._deactivate(old)
                rs.stats.rules_removed += 1
                work.append((rs._lhs[old], rs._rhs[old]))
            for old in hit_rhs:
                rs._rhs[old] = rs.reduce_str(rs._rhs[old])

    # -- overlaps ------------------------------------------------------------

    def _index(self, rid: int) -> None:
        lhs = self.rs._lhs[rid]
        for k in range(1, len(lhs)):
            self._prefix_index.setdefault(lhs[:k], []).append(rid)
            self._suffix_index.setdefault(lhs[-k:], []).append(rid)

    def _overlap(self, r1: int, r2: int, k: int) -> None:
        """Critical pair of ``lhs1 = x s``, ``lhs2 = s z`` with ``|s| = k``."""
        rs = self.rs
        u1, v1 = rs._lhs[r1], rs._rhs[r1]
        u2, v2 = rs._lhs[r2], rs._rhs[r2]
        if len(u1) + len(u2) - k > self.limits.max_overlap_length:
            return
        self._since_checkpoint += 1
        rs.stats.overlaps += 1
        self._add_equation(v1 + u2[k:], u1[:-k] + v2)

    def _process_given(self, g: int) -> None:
        rs = self.rs
        active = rs._active
        self._index(g)
        self._processed.append(g)
        ug = rs._lhs[g]
        # g on the left: suffix of ug is a prefix of some processed lhs
        for k in range(1, len(ug)):
            for r in list(self._prefix_index.get(ug[-k:], ())):
                if not active[g]:
                    return
                if active[r]:
                    self._overlap(g, r, k)
        # g on the right: prefix of ug is a suffix of some processed lhs
        for k in range(1, len(ug)):
            for r in list(self._suffix_index.get(ug[:k], ())):
                if not active[g]:
                    return
                if active[r] and r != g:
                    self._overlap(r, g, k)

    def run(self, observer: Optional[Callable[[RuleSystem], bool]] = None) -> KbResult:
        """Continue completion; ``observer`` is called with a snapshot every
        ``checkpoint_interval`` overlaps and returns True to stop."""
        lim = self.limits
        rs = self.rs
        while self._pending:
            if len(rs) > lim.max_rule_count:
                self.reason = "limit"
                return KbResult(rs, "limit")
            _, g = heapq.heappop(self._pending)
            if not rs._active[g]:
                continue
            self._process_given(g)
            if observer is not None and self._since_checkpoint >= lim.checkpoint_interval:
                self._since_checkpoint = 0
                rs.stats.checkpoints += 1
                if observer(rs.snapshot()):
                    self.reason = "stopped"
                    return KbResult(rs, "stopped")
        self.reason = "confluent"
        if rs.stats.rules_discarded:
            # completion of the stored rules only; long rules were dropped
            self.reason = "limit"
        return KbResult(rs, self.reason)


def kb_run(p: Presentation, limits: Optional[KbLimits] = None,
           observer: Optional[Callable[[RuleSystem], bool]] = None) -> KbResult:
    return KnuthBendix(p, limits).run(observer)


def format_rules(rs: RuleSystem) -> str:
    a = rs.alphabet
    return "".join(f"{a.format_word(r.lhs)} -> {a.format_word(r.rhs)}\n" for r in rs.rules)
