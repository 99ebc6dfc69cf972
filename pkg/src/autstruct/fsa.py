"""Partial deterministic finite automata.

States are numbered ``1..num_states``; ``0`` means "no transition".  The
transition table is held either dense (a numpy array with a zero row 0) or
sparse (one dict per state), chosen from the table size.  Every public
operation returns a trimmed automaton; the regular-algebra operations
also minimize and renumber canonically, so two automata accept the same
language iff their canonical forms are identical.
"""

from __future__ import annotations

import logging
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

log = logging.getLogger(__name__)

DENSE_LIMIT = 4_000_000
DEFAULT_BUDGET = 2_000_000


class AlphabetMismatch(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """A subset construction produced more states than allowed."""

    def __init__(self, operation: str, budget: int):
        super().__init__(f"{operation}: state budget of {budget} exceeded")
        self.operation = operation
        self.budget = budget


class Fsa:
    """Partial DFA over letters ``0..alphabet_size-1``.

    ``transitions`` is either an int array of shape
    ``(num_states + 1, alphabet_size)`` or a list of ``num_states + 1``
    dicts mapping letter -> target (entry 0 ignored).  ``alphabet`` is an
    optional object with ``letter_names``, used for printing and for
    compatibility checks.
    """

    __slots__ = ("alphabet_size", "num_states", "initial", "accepting", "alphabet",
                 "_dense", "_rows", "_edges", "_accept_mask", "_canon")

    def __init__(self, alphabet_size: int, num_states: int, initial: int,
                 accepting: Iterable[int], transitions, alphabet=None,
                 storage: str | None = None):
        self.alphabet_size = int(alphabet_size)
        self.num_states = int(num_states)
        self.initial = int(initial) if num_states else 0
        self.accepting = frozenset(int(s) for s in accepting)
        self.alphabet = alphabet
        self._dense = None
        self._rows = None
        self._edges = None
        self._accept_mask = None
        self._canon = False
        if isinstance(transitions, np.ndarray):
            self._dense = transitions
        else:
            self._rows = transitions
        if storage is None:
            storage = "dense" if (self.num_states + 1) * self.alphabet_size <= DENSE_LIMIT else "sparse"
        if storage == "dense" and self._dense is None:
            self._dense = _rows_to_dense(self._rows, self.num_states, self.alphabet_size)
            self._rows = None
        elif storage == "sparse" and self._rows is None:
            self._rows = _dense_to_rows(self._dense)
            self._dense = None

    # -- storage views -------------------------------------------------------

    @property
    def storage(self) -> str:
        return "dense" if self._dense is not None else "sparse"

    def with_storage(self, storage: str) -> "Fsa":
        if storage == self.storage:
            return self
        out = Fsa(self.alphabet_size, self.num_states, self.initial, self.accepting,
                  self.dense if storage == "dense" else self.rows, self.alphabet, storage=storage)
        out._canon = self._canon
        return out

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            return _rows_to_dense(self._rows, self.num_states, self.alphabet_size)
        return self._dense

    @property
    def rows(self) -> list:
        """Per-state dict view (computed once and cached)."""
        if self._rows is None:
            self._rows = _dense_to_rows(self._dense)
        return self._rows

    def edge_arrays(self):
        """``(src, letter, dst)`` int64 arrays of all defined transitions,
        sorted by source then letter."""
        if self._edges is None:
            if self._dense is not None:
                src, lab = np.nonzero(self._dense)
                dst = self._dense[src, lab]
            else:
                cnt = sum(len(r) for r in self._rows)
                src = np.empty(cnt, np.int64)
                lab = np.empty(cnt, np.int64)
                dst = np.empty(cnt, np.int64)
                k = 0
                for s in range(1, self.num_states + 1):
                    r = self._rows[s]
                    if not r:
                        continue
                    m = len(r)
                    items = sorted(r.items())
                    src[k:k + m] = s
                    lab[k:k + m] = [a for a, _ in items]
                    dst[k:k + m] = [t for _, t in items]
                    k += m
            self._edges = (src.astype(np.int64), lab.astype(np.int64), dst.astype(np.int64))
        return self._edges

    @property
    def accept_mask(self) -> np.ndarray:
        if self._accept_mask is None:
            m = np.zeros(self.num_states + 1, bool)
            if self.accepting:
                m[list(self.accepting)] = True
            self._accept_mask = m
        return self._accept_mask

    @property
    def num_transitions(self) -> int:
        return len(self.edge_arrays()[0])

    def target(self, s: int, a: int) -> int:
        if s == 0:
            return 0
        if self._dense is not None:
            return int(self._dense[s, a])
        return self._rows[s].get(a, 0)

    def __repr__(self):
        return (f"Fsa(states={self.num_states}, letters={self.alphabet_size}, "
                f"accepting={len(self.accepting)}, storage={self.storage})")

    def same_as(self, other: "Fsa") -> bool:
        """Bit-for-bit equality of the stored machine (not of languages)."""
        if (self.alphabet_size, self.num_states, self.initial, self.accepting) != \
                (other.alphabet_size, other.num_states, other.initial, other.accepting):
            return False
        a, b = self.edge_arrays(), other.edge_arrays()
        return all(np.array_equal(x, y) for x, y in zip(a, b))


def _rows_to_dense(rows, n, k):
    d = np.zeros((n + 1, k), np.int32)
    for s in range(1, n + 1):
        r = rows[s]
        if r:
            d[s, list(r.keys())] = list(r.values())
    return d


def _dense_to_rows(d):
    rows = [dict() for _ in range(d.shape[0])]
    src, lab = np.nonzero(d)
    if len(src):
        dst = d[src, lab]
        # group by source
        bounds = np.flatnonzero(np.diff(src)) + 1
        starts = np.concatenate(([0], bounds))
        ends = np.concatenate((bounds, [len(src)]))
        sl, ll, dl = src.tolist(), lab.tolist(), dst.tolist()
        for b, e in zip(starts.tolist(), ends.tolist()):
            rows[sl[b]] = dict(zip(ll[b:e], dl[b:e]))
    return rows


# -- basic constructors ------------------------------------------------------


def check_same_alphabet(x: Fsa, y: Fsa) -> None:
    if x.alphabet_size != y.alphabet_size:
        raise AlphabetMismatch(f"alphabet sizes differ: {x.alphabet_size} vs {y.alphabet_size}")
    if x.alphabet is not None and y.alphabet is not None and x.alphabet != y.alphabet:
        raise AlphabetMismatch("automata are over different alphabets")


def empty_fsa(alphabet_size: int, alphabet=None) -> Fsa:
    out = Fsa(alphabet_size, 0, 0, (), [{}], alphabet)
    out._canon = True
    return out


def all_words(alphabet_size: int, alphabet=None) -> Fsa:
    row = {a: 1 for a in range(alphabet_size)}
    out = Fsa(alphabet_size, 1, 1, (1,), [{}, row], alphabet)
    out._canon = True
    return out


def single_word(word: Sequence[int], alphabet_size: int, alphabet=None) -> Fsa:
    n = len(word) + 1
    rows = [{}] + [{word[i]: i + 2} if i < len(word) else {} for i in range(n)]
    out = Fsa(alphabet_size, n, 1, (n,), rows, alphabet)
    out._canon = True
    return out


def from_words(words: Iterable[Sequence[int]], alphabet_size: int, alphabet=None) -> Fsa:
    """Minimal automaton accepting exactly a finite set of words (a trie,
    then minimized)."""
    rows = [{}, {}]
    acc = set()
    for w in words:
        s = 1
        for a in w:
            t = rows[s].get(a)
            if t is None:
                rows.append({})
                t = len(rows) - 1
                rows[s][a] = t
            s = t
        acc.add(s)
    return minimize(Fsa(alphabet_size, len(rows) - 1, 1, acc, rows, alphabet))


# -- evaluation --------------------------------------------------------------


def delta_star(x: Fsa, s: int, word: Iterable[int]) -> int:
    """Iterated transition; 0 if undefined at any point."""
    if x.num_states == 0:
        return 0
    if x._dense is not None:
        d = x._dense
        for a in word:
            if s == 0:
                return 0
            s = int(d[s, a])
        return s
    rows = x.rows
    for a in word:
        if s == 0:
            return 0
        s = rows[s].get(a, 0)
    return s


def accepts(x: Fsa, word: Iterable[int]) -> bool:
    if x.num_states == 0:
        return False
    return delta_star(x, x.initial, word) in x.accepting


# -- structural operations ---------------------------------------------------


def _reach(n: int, src: np.ndarray, dst: np.ndarray, starts: Sequence[int]) -> np.ndarray:
    """Boolean mask over 0..n of vertices reachable from ``starts``
    (vertex 0 is used as the super-source and never reported)."""
    mask = np.zeros(n + 1, bool)
    if not len(starts):
        return mask
    keep = (src > 0) & (dst > 0)
    s_all = np.concatenate((src[keep], np.zeros(len(starts), np.int64)))
    d_all = np.concatenate((dst[keep], np.asarray(starts, np.int64)))
    g = csr_matrix((np.ones(len(s_all), np.int8), (s_all, d_all)), shape=(n + 1, n + 1))
    order = breadth_first_order(g, 0, directed=True, return_predecessors=False)
    mask[order] = True
    mask[0] = False
    return mask


def trim(x: Fsa) -> Fsa:
    """Restrict to states both accessible and co-accessible; states keep
    their relative order."""
    n = x.num_states
    if n == 0:
        return x
    if not x.accepting:
        return empty_fsa(x.alphabet_size, x.alphabet)
    src, lab, dst = x.edge_arrays()
    fwd = _reach(n, src, dst, [x.initial])
    bwd = _reach(n, dst, src, sorted(x.accepting))
    keep = fwd & bwd
    if not keep[x.initial]:
        return empty_fsa(x.alphabet_size, x.alphabet)
    if keep[1:].all():
        return x
    return _restrict(x, keep)


def _restrict(x: Fsa, keep: np.ndarray) -> Fsa:
    new_id = np.zeros(x.num_states + 1, np.int64)
    kept = np.flatnonzero(keep)
    new_id[kept] = np.arange(1, len(kept) + 1)
    src, lab, dst = x.edge_arrays()
    sel = keep[src] & keep[dst]
    s2, l2, d2 = new_id[src[sel]], lab[sel], new_id[dst[sel]]
    m = len(kept)
    acc = [int(new_id[s]) for s in x.accepting if keep[s]]
    return _from_edges(x.alphabet_size, m, int(new_id[x.initial]), acc, s2, l2, d2, x.alphabet)


def _from_edges(k, n, initial, accepting, src, lab, dst, alphabet, storage=None) -> Fsa:
    if storage is None:
        storage = "dense" if (n + 1) * k <= DENSE_LIMIT else "sparse"
    if storage == "dense":
        d = np.zeros((n + 1, k), np.int32)
        d[src, lab] = dst
        out = Fsa(k, n, initial, accepting, d, alphabet, storage="dense")
    else:
        rows = [dict() for _ in range(n + 1)]
        for s, a, t in zip(src.tolist(), lab.tolist(), dst.tolist()):
            rows[s][a] = t
        out = Fsa(k, n, initial, accepting, rows, alphabet, storage="sparse")
    out._edges = (np.asarray(src, np.int64), np.asarray(lab, np.int64), np.asarray(dst, np.int64))
    return out


def validate(x: Fsa) -> None:
    """Raise AssertionError unless ``x`` satisfies the automaton invariants
    (ids in range, trimmed)."""
    n = x.num_states
    if n == 0:
        assert not x.accepting
        return
    assert 1 <= x.initial <= n
    assert all(1 <= s <= n for s in x.accepting)
    src, lab, dst = x.edge_arrays()
    assert ((src >= 1) & (src <= n)).all() and ((dst >= 1) & (dst <= n)).all()
    assert ((lab >= 0) & (lab < x.alphabet_size)).all()
    fwd = _reach(n, src, dst, [x.initial])
    bwd = _reach(n, dst, src, sorted(x.accepting))
    assert fwd[1:].all(), "inaccessible state"
    assert bwd[1:].all(), "state cannot reach acceptance"


# -- minimization ------------------------------------------------------------

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # splitmix64-style finalizer over a combined key
    with np.errstate(over="ignore"):
        z = a.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15) + b.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        z ^= z >> np.uint64(30)
        z *= np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def _refine(n, src, lab, dst, acc_mask):
    """Coarsest congruence on states 1..n refining accept/non-accept.

    Returns class ids (index 0 unused).  Signatures are hashed; the final
    partition is checked to be a congruence, which together with the fact
    that hashing can only merge makes it exact.  On a failed check the
    refinement is redone with exact signatures.
    """
    cls = acc_mask.astype(np.int64)
    count = len(np.unique(cls[1:]))
    order = np.argsort(src, kind="stable")
    src, lab, dst = src[order], lab[order], dst[order]
    starts = np.searchsorted(src, np.arange(n + 2))
    has_edges = starts[1:-1] < starts[2:]  # for states 1..n
    nz_states = np.flatnonzero(has_edges) + 1
    nz_starts = starts[nz_states]
    labh = _mix(lab, np.full(len(lab), 7, np.int64))
    while True:
        with np.errstate(over="ignore"):
            eh = _mix(labh, cls[dst])
            sig = np.zeros(n + 1, np.uint64)
            if len(eh):
                sig[nz_states] = np.add.reduceat(eh, nz_starts)
            key = _mix(sig, cls)
        key[0] = 0
        _, new = np.unique(key[1:], return_inverse=True)
        new_cls = np.zeros(n + 1, np.int64)
        new_cls[1:] = new.reshape(-1)
        new_count = int(new.max()) + 1 if n else 0
        cls = new_cls
        if new_count == count:
            break
        count = new_count
    if _is_congruence(cls, src, lab, dst, acc_mask, n):
        return cls
    log.warning("hash collision during minimization; using exact refinement")
    return _refine_exact(n, src, lab, dst, acc_mask)


def _is_congruence(cls, src, lab, dst, acc_mask, n) -> bool:
    # acceptance must be constant on classes
    ncls = int(cls[1:].max()) + 1
    acc_by_cls = np.full(ncls, -1, np.int64)
    acc_by_cls[cls[1:]] = acc_mask[1:]
    if (acc_by_cls[cls[1:]] != acc_mask[1:]).any():
        return False
    if not len(src):
        return True
    cs, ct = cls[src], cls[dst]
    # each (class, letter) must have a single target class ...
    k = int(lab.max()) + 1
    key_cl = cs * k + lab
    key_full = np.stack([key_cl, ct])
    uniq_cl = np.unique(key_cl)
    uniq_full = np.unique(key_full, axis=1)
    if uniq_full.shape[1] != len(uniq_cl):
        return False
    # ... and every member of a class must define the same letters
    deg = np.bincount(src, minlength=n + 1)
    qdeg = np.bincount(uniq_cl // k, minlength=ncls)
    return bool((deg[1:] == qdeg[cls[1:]]).all())


def _refine_exact(n, src, lab, dst, acc_mask):
    rows = [[] for _ in range(n + 1)]
    for s, a, t in zip(src.tolist(), lab.tolist(), dst.tolist()):
        rows[s].append((a, t))
    cls = [int(v) for v in acc_mask]
    count = len(set(cls[1:]))
    while True:
        sigs = {}
        new = [0] * (n + 1)
        for s in range(1, n + 1):
            sg = (cls[s], tuple((a, cls[t]) for a, t in rows[s]))
            new[s] = sigs.setdefault(sg, len(sigs))
        cls = new
        if len(sigs) == count:
            break
        count = len(sigs)
    return np.asarray(cls, np.int64)


def minimize(x: Fsa, storage: str | None = None) -> Fsa:
    """Minimal trimmed partial DFA for L(x), numbered breadth-first from
    the initial state with letters in increasing order."""
    if x._canon and (storage is None or storage == x.storage):
        return x
    x = trim(x)
    n = x.num_states
    if n == 0:
        return empty_fsa(x.alphabet_size, x.alphabet)
    src, lab, dst = x.edge_arrays()
    cls = _refine(n, src, lab, dst, x.accept_mask)
    out = _canonical_quotient(x, cls, storage)
    out._canon = True
    return out


def _canonical_quotient(x: Fsa, cls: np.ndarray, storage=None) -> Fsa:
    n = x.num_states
    src, lab, dst = x.edge_arrays()
    ncls = int(cls[1:].max()) + 1
    # quotient transitions from one representative per class
    _, first = np.unique(cls[1:], return_index=True)
    rep = first + 1  # lowest state id per class
    is_rep = np.zeros(n + 1, bool)
    is_rep[rep] = True
    sel = is_rep[src]
    qs, ql, qt = cls[src[sel]], lab[sel], cls[dst[sel]]
    order = np.lexsort((ql, qs))
    qs, ql, qt = qs[order], ql[order], qt[order]
    bounds = np.searchsorted(qs, np.arange(ncls + 1))
    qtl = qt.tolist()
    bl = bounds.tolist()
    # breadth-first renumbering
    new_id = [0] * ncls
    start = int(cls[x.initial])
    new_id[start] = 1
    queue = [start]
    head = 0
    while head < len(queue):
        c = queue[head]
        head += 1
        for i in range(bl[c], bl[c + 1]):
            t = qtl[i]
            if not new_id[t]:
                new_id[t] = len(queue) + 1
                queue.append(t)
    nid = np.asarray(new_id, np.int64)
    s2, t2 = nid[qs], nid[qt]
    order = np.lexsort((ql, s2))
    acc = sorted({new_id[int(cls[s])] for s in x.accepting})
    return _from_edges(x.alphabet_size, ncls, 1, acc, s2[order], ql[order], t2[order], x.alphabet, storage)


def equal_languages(x: Fsa, y: Fsa) -> bool:
    check_same_alphabet(x, y)
    return minimize(x).same_as(minimize(y))


def is_empty(x: Fsa) -> bool:
    return trim(x).num_states == 0


# -- boolean algebra ---------------------------------------------------------


def _product(x: Fsa, y: Fsa, mode: str, budget: int) -> Fsa:
    """Accessible product; ``mode`` 'and' keeps only jointly defined moves,
    'or' lets either side be undefined (0)."""
    check_same_alphabet(x, y)
    rx, ry = x.rows, y.rows
    ax, ay = x.accepting, y.accepting
    ix = x.initial if x.num_states else 0
    iy = y.initial if y.num_states else 0
    index = {(ix, iy): 1}
    pairs = [(ix, iy)]
    rows: list = [{}]
    acc = []
    head = 0
    while head < len(pairs):
        p, q = pairs[head]
        head += 1
        if (p in ax and q in ay) if mode == "and" else (p in ax or q in ay):
            acc.append(head)
        row = {}
        r1 = rx[p] if p else {}
        r2 = ry[q] if q else {}
        if mode == "and":
            if len(r1) > len(r2):
                items = ((a, r1.get(a), t2) for a, t2 in r2.items())
            else:
                items = ((a, t1, r2.get(a)) for a, t1 in r1.items())
            for a, t1, t2 in items:
                if t1 and t2:
                    key = (t1, t2)
                    sid = index.get(key)
                    if sid is None:
                        sid = index[key] = len(pairs) + 1
                        pairs.append(key)
                        if len(pairs) > budget:
                            raise BudgetExceeded("and", budget)
                    row[a] = sid
        else:
            for a in r1.keys() | r2.keys():
                key = (r1.get(a, 0), r2.get(a, 0))
                sid = index.get(key)
                if sid is None:
                    sid = index[key] = len(pairs) + 1
                    pairs.append(key)
                    if len(pairs) > budget:
                        raise BudgetExceeded("or", budget)
                row[a] = sid
        rows.append(row)
    return Fsa(x.alphabet_size, len(pairs), 1, acc, rows, x.alphabet)


def and_(x: Fsa, y: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    return minimize(_product(x, y, "and", budget))


def or_(x: Fsa, y: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    return minimize(_product(x, y, "or", budget))


def complete(x: Fsa) -> Fsa:
    """Total DFA for L(x): undefined moves go to an added sink state."""
    n, k = x.num_states, x.alphabet_size
    sink = n + 1
    d = np.full((n + 2, k), sink, np.int64)
    d[0, :] = 0
    if n:
        src, lab, dst = x.edge_arrays()
        d[src, lab] = dst
        init = x.initial
    else:
        init = sink
    return Fsa(k, n + 1, init, x.accepting, d.astype(np.int32), x.alphabet,
               storage="dense" if (n + 2) * k <= DENSE_LIMIT else "sparse")


def not_(x: Fsa) -> Fsa:
    c = complete(x)
    acc = set(range(1, c.num_states + 1)) - set(c.accepting)
    return minimize(Fsa(c.alphabet_size, c.num_states, c.initial, acc,
                        c._dense if c._dense is not None else c.rows, c.alphabet))


def difference(x: Fsa, y: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    """L(x) minus L(y), without building the complement of y separately."""
    check_same_alphabet(x, y)
    rx, ry = x.rows, y.rows
    index = {(x.initial, y.initial if y.num_states else 0): 1}
    pairs = list(index)
    if x.num_states == 0:
        return empty_fsa(x.alphabet_size, x.alphabet)
    rows: list = [{}]
    acc = []
    head = 0
    while head < len(pairs):
        p, q = pairs[head]
        head += 1
        if p in x.accepting and q not in y.accepting:
            acc.append(head)
        row = {}
        r2 = ry[q] if q else {}
        for a, t1 in rx[p].items():
            key = (t1, r2.get(a, 0))
            sid = index.get(key)
            if sid is None:
                sid = index[key] = len(pairs) + 1
                pairs.append(key)
                if len(pairs) > budget:
                    raise BudgetExceeded("difference", budget)
            row[a] = sid
        rows.append(row)
    return minimize(Fsa(x.alphabet_size, len(pairs), 1, acc, rows, x.alphabet))


# -- nondeterminism ----------------------------------------------------------


class Nfa:
    """Epsilon-free NFA: ``rows[s]`` maps letter -> tuple of targets.

    States are ``0..num_states-1`` here (internal carrier only).
    """

    __slots__ = ("alphabet_size", "rows", "initial", "accepting", "alphabet")

    def __init__(self, alphabet_size, rows, initial, accepting, alphabet=None):
        self.alphabet_size = alphabet_size
        self.rows = rows
        self.initial = frozenset(initial)
        self.accepting = frozenset(accepting)
        self.alphabet = alphabet

    @property
    def num_states(self):
        return len(self.rows)


def determinize(nfa: Nfa, budget: int = DEFAULT_BUDGET, operation: str = "determinize",
                absorbing: frozenset | None = None) -> Fsa:
    """Subset construction over reachable subsets.

    ``absorbing``: NFA states whose presence makes a subset equivalent to
    "accept everything from here"; such subsets are collapsed into one
    universally accepting state (used for ``A* L A*`` style languages).
    """
    rows = nfa.rows
    acc = nfa.accepting
    return subset_construction(nfa.initial, rows.__getitem__, acc.__contains__,
                               nfa.alphabet_size, nfa.alphabet, budget, operation, absorbing)


def subset_construction(initial, successors, is_accepting, alphabet_size, alphabet=None,
                        budget: int = DEFAULT_BUDGET, operation: str = "determinize",
                        absorbing=None) -> Fsa:
    """Determinize an NFA given implicitly.

    ``successors(s)`` returns a dict letter -> iterable of NFA states;
    it is called at most once per NFA state.  ``is_accepting(s)`` decides
    acceptance of single NFA states.
    """
    k = alphabet_size
    start = frozenset(initial)
    if not start:
        return empty_fsa(k, alphabet)
    succ_cache: dict = {}
    acc_cache: dict = {}
    index = {start: 1}
    subsets: list = [start]
    out_rows: list = [{}]
    out_acc = []
    universal = None
    head = 0
    while head < len(subsets):
        cur = subsets[head]
        head += 1
        if cur is None:
            out_acc.append(head)
            out_rows.append({a: head for a in range(k)})
            continue
        moves: dict = {}
        accepting = False
        for s in cur:
            sc = succ_cache.get(s)
            if sc is None:
                sc = succ_cache[s] = successors(s)
                acc_cache[s] = is_accepting(s)
            if acc_cache[s]:
                accepting = True
            for a, ts in sc.items():
                m = moves.get(a)
                if m is None:
                    moves[a] = set(ts)
                else:
                    m.update(ts)
        if accepting:
            out_acc.append(head)
        row = {}
        for a in sorted(moves):
            tgt = moves[a]
            if not tgt:
                continue
            if absorbing is not None and not absorbing.isdisjoint(tgt):
                if universal is None:
                    universal = len(subsets) + 1
                    subsets.append(None)
                row[a] = universal
                continue
            key = frozenset(tgt)
            sid = index.get(key)
            if sid is None:
                sid = index[key] = len(subsets) + 1
                subsets.append(key)
                if len(subsets) > budget:
                    raise BudgetExceeded(operation, budget)
            row[a] = sid
        out_rows.append(row)
    return Fsa(k, len(subsets), 1, out_acc, out_rows, alphabet)


def fsa_to_nfa(x: Fsa) -> Nfa:
    rows = [{a: (t - 1,) for a, t in r.items()} for r in x.rows[1:]]
    return Nfa(x.alphabet_size, rows, [x.initial - 1] if x.num_states else [],
               [s - 1 for s in x.accepting], x.alphabet)


def concat(x: Fsa, y: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    """Automaton for L(x)L(y)."""
    check_same_alphabet(x, y)
    if x.num_states == 0 or y.num_states == 0:
        return empty_fsa(x.alphabet_size, x.alphabet)
    n = x.num_states
    yinit = y.initial - 1 + n
    rows = []
    for s in range(1, n + 1):
        r = {a: [t - 1] for a, t in x.rows[s].items()}
        if s in x.accepting:
            for a, t in y.rows[y.initial].items():
                r.setdefault(a, []).append(t - 1 + n)
        rows.append({a: tuple(v) for a, v in r.items()})
    for s in range(1, y.num_states + 1):
        rows.append({a: (t - 1 + n,) for a, t in y.rows[s].items()})
    init = [x.initial - 1]
    if x.initial in x.accepting:
        init.append(yinit)
    acc = [s - 1 + n for s in y.accepting]
    if y.initial in y.accepting:
        acc += [s - 1 for s in x.accepting]
    nfa = Nfa(x.alphabet_size, rows, init, acc, x.alphabet)
    return minimize(determinize(nfa, budget, "concat"))


def contains_substring_of(x: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    """Automaton for A* L(x) A* (words having a factor in L(x))."""
    k = x.alphabet_size
    if x.num_states == 0:
        return empty_fsa(k, x.alphabet)
    n = x.num_states
    # state n: the A* prefix loop; x states 0..n-1; accepted factor -> absorbing
    rows = [{a: (t - 1,) for a, t in x.rows[s].items()} for s in range(1, n + 1)]
    loop = {a: [n] for a in range(k)}
    for a, t in x.rows[x.initial].items():
        loop[a].append(t - 1)
    rows.append({a: tuple(v) for a, v in loop.items()})
    acc = frozenset(s - 1 for s in x.accepting)
    init = [n, x.initial - 1]
    nfa = Nfa(k, rows, init, acc, x.alphabet)
    if x.initial in x.accepting:
        return all_words(k, x.alphabet)
    return minimize(determinize(nfa, budget, "contains_substring_of", absorbing=acc))


def reverse(x: Fsa, budget: int = DEFAULT_BUDGET) -> Fsa:
    if x.num_states == 0:
        return x
    rows = [dict() for _ in range(x.num_states)]
    for s in range(1, x.num_states + 1):
        for a, t in x.rows[s].items():
            rows[t - 1].setdefault(a, []).append(s - 1)
    rows = [{a: tuple(v) for a, v in r.items()} for r in rows]
    nfa = Nfa(x.alphabet_size, rows, [s - 1 for s in x.accepting], [x.initial - 1], x.alphabet)
    return minimize(determinize(nfa, budget, "reverse"))


# -- serialization -----------------------------------------------------------


def _letter_names(alphabet, k):
    if alphabet is not None:
        return list(alphabet.letter_names)
    return [str(i) for i in range(k)]


def format_fsa(x: Fsa, header: Sequence[str] = ()) -> str:
    names = _letter_names(x.alphabet, x.alphabet_size)
    lines = ["fsa"]
    lines.extend(f"# {h}" for h in header)
    lines.append("alphabet: " + " ".join(names))
    lines.append(f"states: {x.num_states}")
    lines.append(f"initial: {x.initial}")
    lines.append("accepting: " + " ".join(str(s) for s in sorted(x.accepting)))
    lines.append("transitions:")
    src, lab, dst = x.edge_arrays()
    order = np.lexsort((lab, src))
    for s, a, t in zip(src[order].tolist(), lab[order].tolist(), dst[order].tolist()):
        lines.append(f"{s} {names[a]} {t}")
    lines.append("end")
    return "\n".join(lines) + "\n"


class FsaFormatError(ValueError):
    pass


def parse_fsa(text: str, alphabet=None) -> Fsa:
    """Parse the text format.  If ``alphabet`` is given its letter names must
    match the file's; otherwise a plain named alphabet is attached."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != "fsa":
        raise FsaFormatError("missing 'fsa' header")
    fields = {}
    i = 1
    while i < len(lines) and lines[i] != "transitions:":
        key, sep, rest = lines[i].partition(":")
        if not sep:
            raise FsaFormatError(f"bad line {lines[i]!r}")
        fields[key.strip()] = rest.strip()
        i += 1
    try:
        names = fields["alphabet"].split()
        n = int(fields["states"])
        init = int(fields["initial"])
        acc = [int(t) for t in fields.get("accepting", "").split()]
    except (KeyError, ValueError) as e:
        raise FsaFormatError(f"bad header: {e}") from None
    if alphabet is None:
        alphabet = NamedLetters(tuple(names))
    elif list(alphabet.letter_names) != names:
        raise FsaFormatError("alphabet in file does not match the expected alphabet")
    pos = {nm: j for j, nm in enumerate(names)}
    rows = [dict() for _ in range(n + 1)]
    i += 1
    while i < len(lines) and lines[i] != "end":
        parts = lines[i].split()
        if len(parts) != 3:
            raise FsaFormatError(f"bad transition {lines[i]!r}")
        s, a, t = parts
        try:
            s, t = int(s), int(t)
            rows[s][pos[a]] = t
        except (ValueError, KeyError, IndexError):
            raise FsaFormatError(f"bad transition {lines[i]!r}") from None
        if not (1 <= s <= n and 1 <= t <= n):
            raise FsaFormatError(f"state out of range in {lines[i]!r}")
        i += 1
    if i >= len(lines):
        raise FsaFormatError("missing 'end'")
    if n and not 1 <= init <= n:
        raise FsaFormatError("initial state out of range")
    return Fsa(len(names), n, init, acc, rows, alphabet)


class NamedLetters:
    """Minimal alphabet carrier for automata read from files."""

    def __init__(self, names):
        self.letter_names = tuple(names)

    def __eq__(self, other):
        return list(getattr(other, "letter_names", ())) == list(self.letter_names)

    def __hash__(self):
        return hash(self.letter_names)


def iter_words(x: Fsa, max_len: int | None = None):
    """Accepted words in short-lex order, lazily.

    ``can[r]`` is the set of states with an accepted continuation of length
    exactly ``r``; the depth-first walk of each length stays inside these
    sets, so no branch is abandoned.  Stops at ``max_len`` or when no longer
    word can be accepted.
    """
    x = trim(x)
    if x.num_states == 0:
        return
    rows = [sorted(r.items()) for r in x.rows]
    states = range(1, x.num_states + 1)
    can = [set(x.accepting)]
    frontier = {x.initial}
    length = 0
    while frontier and (max_len is None or length <= max_len):
        while len(can) <= length:
            prev = can[-1]
            can.append({s for s in states if any(t in prev for _, t in rows[s])})
        if x.initial in can[length]:
            stack = [(x.initial, ())]
            while stack:
                s, wd = stack.pop()
                r = length - len(wd)
                if r == 0:
                    yield wd
                    continue
                nxt = can[r - 1]
                for a, t in reversed(rows[s]):
                    if t in nxt:
                        stack.append((t, wd + (a,)))
        frontier = {t for s in frontier for _, t in rows[s]}
        length += 1


def words_up_to(x: Fsa, max_len: int) -> list:
    """All accepted words of length <= max_len in short-lex order."""
    return list(iter_words(x, max_len))
