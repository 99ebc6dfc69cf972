"""Two-variable automata over padded letter pairs.

A pair ``(x, y)`` with ``x, y`` in ``0..n`` (``n`` is the padding symbol)
is the single letter ``x * (n + 1) + y``.  The pair ``($, $)`` is the
largest code and is not part of the alphabet, so two-variable automata
are ordinary :class:`~autstruct.fsa.Fsa` objects over
``(n + 1) ** 2 - 1`` letters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .alphabet import OrderedAlphabet, pad
from .fsa import (DEFAULT_BUDGET, AlphabetMismatch, Fsa, all_words, and_, check_same_alphabet,
                  empty_fsa, minimize, subset_construction)

TwoVarFsa = Fsa


@dataclass(frozen=True)
class PairAlphabet:
    base: OrderedAlphabet

    @property
    def n(self) -> int:
        return self.base.size

    @property
    def size(self) -> int:
        return (self.base.size + 1) ** 2 - 1

    @property
    def pad(self) -> int:
        return self.base.size

    def letter(self, x: int, y: int) -> int:
        return x * (self.base.size + 1) + y

    def split(self, letter: int):
        return divmod(letter, self.base.size + 1)

    @property
    def letter_names(self):
        names = list(self.base.names) + ["$"]
        m = len(names)
        return tuple(f"{names[i // m]}/{names[i % m]}" for i in range(m * m - 1))

    def encode(self, u: Sequence[int], v: Sequence[int]) -> list:
        """Letters of the padded pair ``(u, v)``."""
        m = self.base.size + 1
        return [x * m + y for x, y in pad(u, v, self.base.size)]


def pair_alphabet(z: Fsa) -> PairAlphabet:
    if not isinstance(z.alphabet, PairAlphabet):
        raise AlphabetMismatch("expected a two-variable automaton")
    return z.alphabet


def accepts_pair(z: Fsa, u: Sequence[int], v: Sequence[int]) -> bool:
    from .fsa import accepts
    return accepts(z, pair_alphabet(z).encode(u, v))


def padding_filter(alphabet: OrderedAlphabet) -> Fsa:
    """Accepts exactly the padded words."""
    pa = PairAlphabet(alphabet)
    n = alphabet.size
    both, u_done, v_done = {}, {}, {}
    for x in range(n + 1):
        for y in range(n + 1):
            if x == n and y == n:
                continue
            c = pa.letter(x, y)
            if x == n:
                both[c] = 2
                u_done[c] = 2
            elif y == n:
                both[c] = 3
                v_done[c] = 3
            else:
                both[c] = 1
    return minimize(Fsa(pa.size, 3, 1, (1, 2, 3), [{}, both, u_done, v_done], pa))


def enforce_padding(z: Fsa) -> Fsa:
    return and_(z, padding_filter(pair_alphabet(z).base))


def gt_automaton(alphabet: OrderedAlphabet) -> Fsa:
    """Accepts ``pad(u, v)`` iff ``u`` is short-lex greater than ``v``."""
    pa = PairAlphabet(alphabet)
    n = alphabet.size
    EQ, GT, LT, ULONG = 1, 2, 3, 4
    rows = [{}, {}, {}, {}, {}]
    for x in range(n + 1):
        for y in range(n + 1):
            if x == n and y == n:
                continue
            c = pa.letter(x, y)
            if x == n:
                continue  # v longer: never greater
            if y == n:
                for s in (EQ, GT, LT, ULONG):
                    rows[s][c] = ULONG
                continue
            rows[EQ][c] = EQ if x == y else (GT if x > y else LT)
            rows[GT][c] = GT
            rows[LT][c] = LT
    return minimize(Fsa(pa.size, 4, EQ, (GT, ULONG), rows, pa))


def _project(z: Fsa, track: int, budget: int, op: str) -> Fsa:
    pa = pair_alphabet(z)
    n = pa.n
    m = n + 1
    base = pa.base
    if z.num_states == 0:
        return empty_fsa(n, base)
    rows = z.rows
    fin = _pad_closure(z, track)

    def successors(s):
        out: dict = {}
        for c, t in rows[s].items():
            x, y = divmod(c, m)
            a = x if track == 0 else y
            if a != n:
                out.setdefault(a, []).append(t)
        return out

    d = subset_construction([z.initial], successors, fin.__contains__, n, base, budget, op)
    return minimize(d)


def _pad_closure(z: Fsa, track: int) -> set:
    """Accept states plus the states that reach one reading only padding
    in ``track``."""
    m = pair_alphabet(z).n + 1
    n = m - 1
    back: dict = {}
    for s in range(1, z.num_states + 1):
        for c, t in z.rows[s].items():
            if divmod(c, m)[track] == n:
                back.setdefault(t, []).append(s)
    fin = set(z.accepting)
    stack = list(fin)
    while stack:
        for s in back.get(stack.pop(), ()):
            if s not in fin:
                fin.add(s)
                stack.append(s)
    return fin


def exists_factor(z: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    """Words with a factor in ``exists(z)``: the language ``A* E(z) A*``.

    One subset construction over the nondeterministic projection, with a
    loop state supplying the ``A*`` prefix; any subset meeting acceptance
    collapses into one absorbing state.  The projection itself is never
    determinized, which matters because its minimal automaton can be far
    larger than the result.
    """
    pa = pair_alphabet(z)
    n = pa.n
    m = n + 1
    base = pa.base
    if z.num_states == 0:
        return empty_fsa(n, base)
    fin = _pad_closure(z, 0)
    if z.initial in fin:
        return all_words(n, base)
    rows = z.rows
    proj: list = [None] * (z.num_states + 1)
    for s in range(1, z.num_states + 1):
        d: dict = {}
        for c, t in rows[s].items():
            x = c // m
            if x != n:
                d.setdefault(x, []).append(t)
        proj[s] = d
    start = proj[z.initial]

    def successors(s):
        if s == 0:  # the A* loop
            return {a: [0] + start.get(a, []) for a in range(n)}
        return proj[s]

    d = subset_construction([0], successors, fin.__contains__, n, base, budget,
                            "exists_factor", absorbing=frozenset(fin))
    return minimize(d)


def exists(z: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    """One-variable automaton for ``{u : pad(u, v) in L(z) for some v}``."""
    return _project(z, 0, budget, "exists")


def exists_second(z: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    """One-variable automaton for ``{v : pad(u, v) in L(z) for some u}``."""
    return _project(z, 1, budget, "exists_second")


def diagonal(x: Fsa, alphabet: OrderedAlphabet | None = None) -> Fsa:
    base = alphabet or x.alphabet
    pa = PairAlphabet(base)
    if x.num_states == 0:
        return empty_fsa(pa.size, pa)
    rows = [{}] + [{pa.letter(a, a): t for a, t in r.items()} for r in x.rows[1:]]
    out = Fsa(pa.size, x.num_states, x.initial, x.accepting, rows, pa)
    return minimize(out)


def swap(z: Fsa) -> Fsa:
    pa = pair_alphabet(z)
    m = pa.n + 1
    rows = [{}] + [{(c % m) * m + c // m: t for c, t in r.items()} for r in z.rows[1:]]
    return minimize(Fsa(z.alphabet_size, z.num_states, z.initial, z.accepting, rows, pa))


def pair_and(z: Fsa, x: Fsa, track: str = "first", budget: int = DEFAULT_BUDGET) -> Fsa:
    """Pairs accepted by ``z`` whose selected track (unpadded) is in L(x)."""
    pa = pair_alphabet(z)
    if x.alphabet_size != pa.n:
        raise AlphabetMismatch("one-variable automaton does not match the pair alphabet")
    if z.num_states == 0 or x.num_states == 0:
        return empty_fsa(pa.size, pa)
    n = pa.n
    m = n + 1
    sel = 0 if track == "first" else 1
    rz, rx = z.rows, x.rows
    index = {(z.initial, x.initial): 1}
    states = [(z.initial, x.initial)]
    rows: list = [{}]
    acc = []
    head = 0
    while head < len(states):
        p, s = states[head]
        head += 1
        if p in z.accepting and s in x.accepting:
            acc.append(head)
        row = {}
        rxs = rx[s]
        for c, t in rz[p].items():
            a = divmod(c, m)[sel]
            if a == n:
                s2 = s
            else:
                s2 = rxs.get(a)
                if s2 is None:
                    continue
            key = (t, s2)
            sid = index.get(key)
            if sid is None:
                sid = index[key] = len(states) + 1
                states.append(key)
                if len(states) > budget:
                    from .fsa import BudgetExceeded
                    raise BudgetExceeded("pair_and", budget)
            row[c] = sid
        rows.append(row)
    return minimize(Fsa(pa.size, len(states), 1, acc, rows, pa))


def compose(z1: Fsa, z2: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    """Composite: ``(u, v)`` such that ``(u, w) in L(z1)`` and
    ``(w, v) in L(z2)`` for some word ``w``.

    Both inputs must accept only padded words.  A machine whose input has
    ended reads ``($, $)`` as a no-op.  When the outer words are exhausted
    but ``w`` is longer, ``z1`` reads ``($, y)`` while ``z2`` reads
    ``(y, $)``; the pairs from which such moves reach joint acceptance
    are precomputed and made accepting.
    """
    check_same_alphabet(z1, z2)
    pa = pair_alphabet(z1)
    if z1.num_states == 0 or z2.num_states == 0:
        return empty_fsa(pa.size, pa)
    n = pa.n
    m = n + 1
    r1, r2 = z1.rows, z2.rows
    w2 = z2.num_states + 1

    # z2 moves indexed by the first (middle-word) track
    by_first: list = [None] * (z2.num_states + 1)
    for q in range(1, z2.num_states + 1):
        d: dict = {}
        for c, t in r2[q].items():
            w, y = divmod(c, m)
            d.setdefault(w, []).append((y, t))
        by_first[q] = d

    # overhang closure: (p, q) --(p reads ($,w), q reads (w,$))--> (p', q')
    fin = _overhang_closure(z1, z2, n)

    def successors(code):
        p, q = divmod(code, w2)
        out: dict = {}
        bq = by_first[q]
        for c, p2 in r1[p].items():
            x, w = divmod(c, m)
            if w == n:
                # z2 either reads ($, y) or has finished
                for y, q2 in bq.get(n, ()):
                    out.setdefault(x * m + y, []).append(p2 * w2 + q2)
                if x != n:
                    out.setdefault(x * m + n, []).append(p2 * w2 + q)
            else:
                for y, q2 in bq.get(w, ()):
                    if x == n and y == n:
                        continue  # overhang, handled by the closure
                    out.setdefault(x * m + y, []).append(p2 * w2 + q2)
        # z1 finished: it stays while z2 reads ($, y)
        for y, q2 in bq.get(n, ()):
            if y != n:
                out.setdefault(n * m + y, []).append(p * w2 + q2)
        return out

    d = subset_construction([z1.initial * w2 + z2.initial], successors, fin.__contains__,
                            pa.size, pa, budget, "compose")
    # interleaved endings such as (x, $)($, y) are not padded words
    return and_(d, padding_filter(pa.base), budget)


def _overhang_closure(z1: Fsa, z2: Fsa, n: int) -> set:
    m = n + 1
    w2 = z2.num_states + 1
    # p -> list of (w, p') for ($, w) moves; q -> {w: q'} for (w, $) moves
    left: dict = {}
    for p in range(1, z1.num_states + 1):
        for c, t in z1.rows[p].items():
            x, w = divmod(c, m)
            if x == n and w != n:
                left.setdefault(p, []).append((w, t))
    right: dict = {}
    for q in range(1, z2.num_states + 1):
        for c, t in z2.rows[q].items():
            w, y = divmod(c, m)
            if y == n and w != n:
                right.setdefault(q, {})[w] = t
    fin = {p * w2 + q for p in z1.accepting for q in z2.accepting}
    if not left or not right:
        return fin
    rev: dict = {}
    for p, lm in left.items():
        for q, rm in right.items():
            for w, p2 in lm:
                q2 = rm.get(w)
                if q2 is not None:
                    rev.setdefault(p2 * w2 + q2, []).append(p * w2 + q)
    stack = list(fin)
    while stack:
        s = stack.pop()
        for r in rev.get(s, ()):
            if r not in fin:
                fin.add(r)
                stack.append(r)
    return fin


def pair_language(z: Fsa, max_len: int):
    """All accepted ``(u, v)`` with ``max(|u|, |v|) <= max_len`` (test helper)."""
    from .fsa import words_up_to
    pa = pair_alphabet(z)
    out = []
    m = pa.n + 1
    for w in words_up_to(z, max_len):
        u = tuple(c // m for c in w if c // m != pa.n)
        v = tuple(c % m for c in w if c % m != pa.n)
        out.append((u, v))
    return out
