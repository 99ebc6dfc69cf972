"""Independent reference implementations used by the tests.

Nothing here calls the package's automaton algorithms: languages are
computed by direct simulation, and groups come from concrete permutation
or matrix representations.  Only the random input generators touch
package operations (to enforce padding on pair automata).
"""

from __future__ import annotations

import itertools
import random
from pathlib import Path

import numpy as np

from autstruct.alphabet import OrderedAlphabet, load_presentation
from autstruct.fsa import Fsa
from autstruct.fsa2 import PairAlphabet, enforce_padding

DATA = Path(__file__).resolve().parent.parent / "data" / "groups"


def presentation(name):
    return load_presentation(DATA / f"{name}.pres")


# -- words and languages -----------------------------------------------------


def all_words(k, max_len):
    for n in range(max_len + 1):
        yield from itertools.product(range(k), repeat=n)


def run(x: Fsa, w) -> bool:
    """Direct simulation on the stored transitions."""
    if x.num_states == 0:
        return False
    s = x.initial
    for a in w:
        s = x.rows[s].get(a, 0)
        if not s:
            return False
    return s in x.accepting


def language(x: Fsa, max_len: int) -> set:
    return {w for w in all_words(x.alphabet_size, max_len) if run(x, w)}


def random_fsa(rng: random.Random, k: int, max_states: int = 8, alphabet=None, density=0.6) -> Fsa:
    n = rng.randint(1, max_states)
    rows = [{}]
    for _ in range(n):
        rows.append({a: rng.randint(1, n) for a in range(k) if rng.random() < density})
    acc = [s for s in range(1, n + 1) if rng.random() < 0.4]
    return Fsa(k, n, 1, acc, rows, alphabet)


def relabel(x: Fsa, rng: random.Random) -> Fsa:
    perm = list(range(1, x.num_states + 1))
    rng.shuffle(perm)
    new = {old: new for old, new in zip(range(1, x.num_states + 1), perm)}
    rows = [dict() for _ in range(x.num_states + 1)]
    for s in range(1, x.num_states + 1):
        rows[new[s]] = {a: new[t] for a, t in x.rows[s].items()}
    return Fsa(x.alphabet_size, x.num_states, new[x.initial], [new[s] for s in x.accepting], rows,
               x.alphabet)


# -- padded pairs ------------------------------------------------------------


def random_pair_fsa(rng: random.Random, base, max_states: int = 6) -> Fsa:
    pa = PairAlphabet(base)
    return enforce_padding(random_fsa(rng, pa.size, max_states, pa, density=0.5))


def pad_pair(u, v, n):
    m = max(len(u), len(v))
    return [(u[i] if i < len(u) else n) * (n + 1) + (v[i] if i < len(v) else n) for i in range(m)]


def pair_words(n, max_len):
    """All padded pairs (u, v) with max(|u|, |v|) <= max_len."""
    words = list(all_words(n, max_len))
    return [(u, v) for u in words for v in words]


def pair_accepts(z: Fsa, u, v) -> bool:
    return run(z, pad_pair(u, v, z.alphabet.n))


def exists_oracle(z: Fsa, u) -> bool:
    """Is there ``v`` (of any length) with ``pad(u, v)`` accepted?

    Search over (state, position, v ended); past the end of ``u`` only
    ``($, y)`` letters are read, so the reachable space is finite.
    """
    n = z.alphabet.n
    m = n + 1
    L = len(u)
    start = (z.initial, 0, False)
    seen = {start}
    stack = [start]
    while stack:
        s, i, ended = stack.pop()
        if i == L and s in z.accepting:
            return True
        for c, t in z.rows[s].items():
            x, y = divmod(c, m)
            if i < L:
                if x != u[i] or (ended and y != n):
                    continue
                nxt = (t, i + 1, ended or y == n)
            elif x != n or y == n or ended:
                continue
            else:
                nxt = (t, L, False)
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def compose_oracle(z1: Fsa, z2: Fsa, u, v) -> bool:
    """Is there ``w`` with ``pad(u, w)`` in L(z1) and ``pad(w, v)`` in L(z2)?

    Both machines are run in lockstep on the letters of ``w`` chosen one at
    a time; a machine whose two tracks have both ended stays put.
    """
    n = z1.alphabet.n
    m = n + 1
    L = max(len(u), len(v))
    start = (z1.initial, z2.initial, 0, False)
    seen = {start}
    stack = [start]
    while stack:
        p, q, i, wend = stack.pop()
        if i >= L and p in z1.accepting and q in z2.accepting:
            return True
        a = u[i] if i < len(u) else n
        b = v[i] if i < len(v) else n
        for w in ([n] if wend else range(n + 1)):
            if i >= L and w == n:
                continue
            p2 = p if a == n and w == n else z1.rows[p].get(a * m + w)
            q2 = q if w == n and b == n else z2.rows[q].get(w * m + b)
            if not p2 or not q2:
                continue
            nxt = (p2, q2, min(i + 1, L), wend or w == n)
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def is_padded(letters, n) -> bool:
    m = n + 1
    ended_u = ended_v = False
    for c in letters:
        x, y = divmod(c, m)
        if ended_u and x != n or ended_v and y != n:
            return False
        ended_u |= x == n
        ended_v |= y == n
    return True


def self_inverse_alphabet(n: int) -> OrderedAlphabet:
    return OrderedAlphabet(tuple("abcd"[:n]), tuple(range(n)))


# -- concrete groups ---------------------------------------------------------


class ConcreteGroup:
    """A group given by images of the monoid generators; elements are
    hashable (permutation tuples or matrix bytes)."""

    def __init__(self, name, images, mul, identity):
        self.name = name
        self.images = images
        self.mul = mul
        self.identity = identity

    def evaluate(self, w):
        g = self.identity
        for x in w:
            g = self.mul(g, self.images[x])
        return g

    def shortlex_normal_forms(self, max_len: int) -> dict:
        """Element -> least word, for elements of length <= max_len."""
        out = {self.identity: ()}
        level = [((), self.identity)]
        for _ in range(max_len):
            nxt = []
            for w, g in level:
                for x, img in enumerate(self.images):
                    h = self.mul(g, img)
                    if h not in out:
                        out[h] = w + (x,)
                        nxt.append((w + (x,), h))
            level = nxt
        return out


def _perm_mul(p, q):
    return tuple(q[i] for i in p)


def _perm_inv(p):
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


def perm_group(name, alphabet, gens: dict):
    """``gens`` maps generator names to permutations; inverses computed."""
    images = []
    for nm in alphabet.names:
        if nm in gens:
            images.append(tuple(gens[nm]))
        else:
            partner = alphabet.names[alphabet.inverse[alphabet.index(nm)]]
            images.append(_perm_inv(tuple(gens[partner])))
    ident = tuple(range(len(images[0])))
    return ConcreteGroup(name, images, _perm_mul, ident)


def _quaternion_group(alphabet):
    i = np.array([[1j, 0], [0, -1j]])
    j = np.array([[0, 1], [-1, 0]], dtype=complex)
    key = lambda mat: tuple(np.round(mat, 6).flatten().tolist())  # noqa: E731
    mats = {"a": i, "A": np.linalg.inv(i), "b": j, "B": np.linalg.inv(j)}
    store = {}

    def elt(mat):
        k = key(mat)
        store[k] = mat
        return k

    images = [elt(mats[nm]) for nm in alphabet.names]
    ident = elt(np.eye(2, dtype=complex))
    return ConcreteGroup("Q8", images, lambda g, h: elt(store[g] @ store[h]), ident)


def concrete(name):
    """Presentation and concrete group for the finite test groups."""
    p = presentation(name)
    a = p.alphabet
    if name == "s3":
        g = perm_group(name, a, {"a": (1, 2, 0), "b": (1, 0, 2)})
    elif name == "d4":
        g = perm_group(name, a, {"a": (1, 2, 3, 0), "b": (0, 3, 2, 1)})
    elif name == "c4":
        g = perm_group(name, a, {"a": (1, 2, 3, 0)})
    elif name == "q8":
        g = _quaternion_group(a)
    else:
        raise KeyError(name)
    for r in p.relators:
        assert g.evaluate(r) == g.identity, f"bad representation for {name}"
    return p, g


def group_order(g: ConcreteGroup) -> int:
    return len(g.shortlex_normal_forms(64))


def free_reduce(w, inverse):
    out = []
    for x in w:
        if out and out[-1] == inverse[x]:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def z2_element(w, alphabet):
    v = [0, 0]
    for x in w:
        nm = alphabet.names[x]
        v["ab".index(nm.lower())] += 1 if nm.islower() else -1
    return tuple(v)
