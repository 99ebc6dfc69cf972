"""Word-difference machines.

A state carries a label: the least word currently known to represent its
group element.  Reading the pair ``(x, y)`` from a state labelled ``d``
leads to the state labelled by the reduction of ``x^-1 d y``.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

from .alphabet import OrderedAlphabet, Word, shortlex_key
from .fsa import Fsa, format_fsa, parse_fsa, trim
from .fsa2 import PairAlphabet
from .rewrite import RuleSystem, to_word


class WordDiffMachine:
    """Labels are reduced words (index 0 is the empty word); ``trans[i]``
    maps pair letters to state indices."""

    def __init__(self, alphabet: OrderedAlphabet, labels: Sequence[Word], trans: Sequence[dict],
                 accepting: Iterable[int] = (0,)):
        self.alphabet = alphabet
        self.labels = [tuple(w) for w in labels]
        self.trans = [dict(t) for t in trans]
        self.accepting = frozenset(accepting)
        self.index = {w: i for i, w in enumerate(self.labels)}
        self._by_x = None

    @property
    def num_states(self) -> int:
        return len(self.labels)

    @property
    def pairs(self) -> PairAlphabet:
        return PairAlphabet(self.alphabet)

    @property
    def num_transitions(self) -> int:
        return sum(len(t) for t in self.trans)

    def label_set(self) -> set:
        return set(self.labels)

    def moves_by_first(self):
        """Per state: dict first-track letter -> sorted list of (y, target)."""
        if self._by_x is None:
            m = self.alphabet.size + 1
            out = []
            for t in self.trans:
                d: dict = {}
                for c, s in sorted(t.items()):
                    x, y = divmod(c, m)
                    d.setdefault(x, []).append((y, s))
                out.append(d)
            self._by_x = out
        return self._by_x

    def to_fsa(self, accept_label: Word = ()) -> Fsa:
        return to_two_var_fsa(self, accept_label)

    def accepts_pair(self, u: Sequence[int], v: Sequence[int], accept_label: Word = ()) -> bool:
        s = 0
        for c in self.pairs.encode(u, v):
            s = self.trans[s].get(c)
            if s is None:
                return False
        return self.labels[s] == tuple(accept_label)

    def signature(self):
        """Hashable description of the labelled machine."""
        return (tuple(self.labels), tuple(tuple(sorted(t.items())) for t in self.trans))

    def __repr__(self):
        return f"WordDiffMachine(states={self.num_states}, transitions={self.num_transitions})"


def to_two_var_fsa(m: WordDiffMachine, accept_label: Word = ()) -> Fsa:
    accept_label = tuple(accept_label)
    if accept_label not in m.index:
        raise ValueError(f"no state labelled {m.alphabet.format_word(accept_label)}")
    pa = m.pairs
    rows = [{}] + [{c: t + 1 for c, t in tr.items()} for tr in m.trans]
    return trim(Fsa(pa.size, m.num_states, 1, (m.index[accept_label] + 1,), rows, pa))


class _Builder:
    """Mutable machine with union-find amalgamation."""

    def __init__(self, alphabet: OrderedAlphabet):
        self.alphabet = alphabet
        self.labels: list = [()]
        self.trans: list = [{}]
        self.parent: list = [0]
        self.index: dict = {(): 0}

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def state(self, label: Word) -> int:
        i = self.index.get(label)
        if i is None:
            i = self.index[label] = len(self.labels)
            self.labels.append(label)
            self.trans.append({})
            self.parent.append(i)
            return i
        return self.find(i)

    def add(self, s: int, c: int, t: int) -> None:
        s, t = self.find(s), self.find(t)
        old = self.trans[s].get(c)
        if old is None:
            self.trans[s][c] = t
        elif self.find(old) != t:
            self.merge(old, t)

    def merge(self, i: int, j: int) -> None:
        pending = [(i, j)]
        while pending:
            a, b = pending.pop()
            a, b = self.find(a), self.find(b)
            if a == b:
                continue
            if shortlex_key(self.labels[b]) < shortlex_key(self.labels[a]):
                a, b = b, a
            # keep a (smaller label), fold b into it
            self.parent[b] = a
            ta, tb = self.trans[a], self.trans[b]
            for c, t in tb.items():
                old = ta.get(c)
                if old is None:
                    ta[c] = t
                elif self.find(old) != self.find(t):
                    pending.append((old, t))
            self.trans[b] = {}

    def finish(self, accept_labels=((),)) -> WordDiffMachine:
        # accessible representatives in breadth-first order from the identity
        root = self.find(0)
        order = [root]
        seen = {root: 0}
        head = 0
        while head < len(order):
            s = order[head]
            head += 1
            for c in sorted(self.trans[s]):
                t = self.find(self.trans[s][c])
                if t not in seen:
                    seen[t] = len(order)
                    order.append(t)
        labels = [self.labels[s] for s in order]
        trans = [{c: seen[self.find(t)] for c, t in self.trans[s].items()} for s in order]
        acc = {seen[self.find(self.index[w])] for w in accept_labels
               if w in self.index and self.find(self.index[w]) in seen}
        return WordDiffMachine(self.alphabet, labels, trans, acc)


def harvest_d1(rules: RuleSystem) -> WordDiffMachine:
    """Collect the word differences along every rule.

    For a rule ``x1..xm -> y1..yn`` (``y`` padded), ``d0 = e`` and
    ``di = reduce(xi^-1 d(i-1) yi)``.  The final difference is the identity
    in the group, so if the rules cannot show it, the two states are
    amalgamated.
    """
    alphabet = rules.alphabet
    n = alphabet.size
    m = n + 1
    inv = alphabet.inverse
    b = _Builder(alphabet)
    cache: dict = {}
    reduce_str = rules.reduce_str
    for lhs, rhs in rules.rule_strings():
        s = 0
        d = ""
        for i, xc in enumerate(lhs):
            x = ord(xc)
            y = ord(rhs[i]) if i < len(rhs) else n
            key = (x, d, y)
            nd = cache.get(key)
            if nd is None:
                nd = cache[key] = reduce_str(chr(inv[x]) + d + (chr(y) if y != n else ""))
            t = b.state(to_word(nd))
            b.add(s, x * m + y, t)
            s = b.find(t)
            d = nd
        if b.find(s) != b.find(0):
            b.merge(s, 0)
    return b.finish()


def amalgamate(machine: WordDiffMachine, i: int, j: int) -> WordDiffMachine:
    """Merge states ``i`` and ``j`` (known equal in the group), cascading
    through colliding transitions."""
    b = _Builder(machine.alphabet)
    b.labels = list(machine.labels)
    b.trans = [dict(t) for t in machine.trans]
    b.parent = list(range(machine.num_states))
    b.index = dict(machine.index)
    b.merge(i, j)
    return b.finish([machine.labels[a] for a in machine.accepting])


Reducer = Callable[[Word], Word]


def build_d2(labels: Iterable[Word], reducer: Reducer, alphabet: OrderedAlphabet,
             equal_length_only: bool = False) -> WordDiffMachine:
    """Machine on a fixed label set.

    The label set is closed under inversion and completed with the
    generators and the identity; ``(x, y)`` leads from ``d`` to the label
    of ``reduce(x^-1 d y)`` when that label is in the set.
    ``equal_length_only`` drops pairs involving the padding symbol.
    """
    n = alphabet.size
    m = n + 1
    inv = alphabet.inverse
    base = {reducer(tuple(w)) for w in labels}
    base |= {alphabet.invert(w) for w in base}
    base = {reducer(w) for w in base}
    base |= {(x,) for x in range(n)}
    base = {reducer(w) for w in base}
    base.add(())
    labels_sorted = sorted(base, key=shortlex_key)
    index = {w: i for i, w in enumerate(labels_sorted)}
    ys = list(range(n)) if equal_length_only else list(range(n + 1))
    xs = ys
    trans = []
    for d in labels_sorted:
        row = {}
        right = {}
        for y in ys:
            right[y] = reducer(d + (y,)) if y != n else d
        for x in xs:
            xi = (inv[x],) if x != n else ()
            for y in ys:
                if x == n and y == n:
                    continue
                t = index.get(reducer(xi + right[y]) if xi else right[y])
                if t is not None:
                    row[x * m + y] = t
        trans.append(row)
    # keep the part accessible from the identity, numbered breadth-first
    b = _Builder(alphabet)
    b.labels = labels_sorted
    b.trans = trans
    b.parent = list(range(len(labels_sorted)))
    b.index = index
    return b.finish()


def reduce_via_d1(d1: WordDiffMachine, w: Sequence[int]) -> Word:
    """Rewrite ``w`` by repeatedly replacing the first factor ``s`` (by end
    position) for which ``d1`` accepts ``(s, t)`` with ``t`` short-lex
    below ``s``; ``t`` is chosen least letter first."""
    n = d1.alphabet.size
    by_x = d1.moves_by_first()
    w = list(w)
    # per position: {(state, flag): (start, t)}; flag 0 equal so far,
    # 1 t lexicographically smaller, 2 t larger, 3 t ended (padding)
    hist: list = [{}]
    i = 0
    while i < len(w):
        x = w[i]
        nxt: dict = {}
        found = None
        cur = hist[i]
        for (st, fl), (start, t) in list(cur.items()) + [((0, 0), (i, ()))]:
            moves = by_x[st].get(x)
            if not moves:
                continue
            for y, ns in moves:
                if y == n:
                    nf, nt = 3, t
                elif fl == 3:
                    continue
                else:
                    nf = fl if fl else (0 if y == x else (1 if y < x else 2))
                    nt = t + (y,)
                if ns == 0:
                    if nf == 1 or nf == 3:
                        found = (start, nt)
                        break
                    continue
                key = (ns, nf)
                if key not in nxt:
                    nxt[key] = (start, nt)
            if found:
                break
        if found:
            start, t = found
            w[start:i + 1] = t
            del hist[start + 1:]
            i = start
            continue
        hist.append(nxt)
        i += 1
    return tuple(w)


class D1Reducer:
    """Memoizing word reducer backed by a word-difference machine."""

    def __init__(self, d1: WordDiffMachine):
        self.d1 = d1
        self._cache: dict = {}

    def __call__(self, w) -> Word:
        w = tuple(w)
        r = self._cache.get(w)
        if r is None:
            r = self._cache[w] = reduce_via_d1(self.d1, w)
        return r


# -- serialization -----------------------------------------------------------


def format_wd(m: WordDiffMachine) -> str:
    pa = m.pairs
    rows = [{}] + [{c: t + 1 for c, t in tr.items()} for tr in m.trans]
    fsa = Fsa(pa.size, m.num_states, 1, sorted(a + 1 for a in m.accepting), rows, pa,
              storage="sparse")
    text = format_fsa(fsa, header=["word-difference machine"])
    label_lines = ["labels:"] + [f"{i + 1} {m.alphabet.format_word(w)}" for i, w in enumerate(m.labels)]
    return text.replace("transitions:\n", "\n".join(label_lines) + "\ntransitions:\n", 1)


def parse_wd(text: str, alphabet: OrderedAlphabet) -> WordDiffMachine:
    lines = text.splitlines()
    try:
        a = lines.index("labels:")
        b = lines.index("transitions:")
    except ValueError:
        raise ValueError("word-difference file needs labels: and transitions: sections") from None
    labels = {}
    for ln in lines[a + 1:b]:
        k, _, w = ln.strip().partition(" ")
        labels[int(k)] = alphabet.parse_word(w)
    fsa = parse_fsa("\n".join(lines[:a] + lines[b:]), PairAlphabet(alphabet))
    if sorted(labels) != list(range(1, fsa.num_states + 1)):
        raise ValueError("labels do not cover all states")
    if fsa.initial != 1:
        raise ValueError("word-difference machines start at state 1")
    trans = [{c: t - 1 for c, t in fsa.rows[s].items()} for s in range(1, fsa.num_states + 1)]
    return WordDiffMachine(alphabet, [labels[i] for i in range(1, fsa.num_states + 1)], trans,
                           [s - 1 for s in fsa.accepting])
