"""Analyses of automata and verified structures: enumeration, language
size (group order), exact growth series, and the geodesic word-acceptor.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from graphlib import CycleError, TopologicalSorter
from math import gcd, lcm
from typing import Iterator, Optional

from .alphabet import Word, shortlex_key
from .fsa import Fsa, equal_languages, iter_words, minimize, trim
from .fsa2 import exists, pair_and
from .pipeline import AutomaticStructure, prefix_differences, used_differences
from .worddiff import build_d2, to_two_var_fsa

log = logging.getLogger(__name__)


# -- enumeration and order ---------------------------------------------------


def enumerate_words(x: Fsa, max_len: int) -> Iterator[Word]:
    """Accepted words of length <= ``max_len``, lazily, in short-lex order."""
    if max_len < 0:
        raise ValueError("max_len must be nonnegative")
    return iter_words(x, max_len)


@dataclass(frozen=True)
class Finite:
    n: int

    def __str__(self):
        return str(self.n)


class _Infinite:
    def __repr__(self):
        return "Infinite"

    __str__ = __repr__


Infinite = _Infinite()


def language_size(x: Fsa):
    """``Finite(n)`` with the number of accepted words, or ``Infinite``."""
    x = trim(x)
    if x.num_states == 0:
        return Finite(0)
    rows = x.rows
    graph = {s: set(rows[s].values()) for s in range(1, x.num_states + 1)}
    try:
        # predecessors-first order of the reversed graph = successors first
        order = list(TopologicalSorter(graph).static_order())
    except CycleError:
        return Infinite
    paths = {}
    for s in order:
        paths[s] = (1 if s in x.accepting else 0) + sum(paths[t] for t in rows[s].values())
    return Finite(paths[x.initial])


# -- growth series -----------------------------------------------------------


def _trim_poly(p: list) -> list:
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _poly_mul(p: list, q: list) -> list:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def _poly_divmod(p: list, q: list):
    p = [Fraction(c) for c in p]
    q = _trim_poly([Fraction(c) for c in q])
    if len(p) < len(q):
        return [Fraction(0)], p
    quot = [Fraction(0)] * (len(p) - len(q) + 1)
    for i in range(len(p) - len(q), -1, -1):
        c = p[i + len(q) - 1] / q[-1]
        quot[i] = c
        for j, b in enumerate(q):
            p[i + j] -= c * b
    return quot, _trim_poly(p[:len(q) - 1] or [Fraction(0)])


def _poly_gcd(p: list, q: list) -> list:
    a = _trim_poly([Fraction(c) for c in p])
    b = _trim_poly([Fraction(c) for c in q])
    while any(b):
        a, b = b, _poly_divmod(a, b)[1]
    return a


def _berlekamp_massey(seq: list) -> list:
    """Connection polynomial ``C`` (``C[0] = 1``) of the shortest linear
    recurrence generating ``seq``, over the rationals."""
    c = [Fraction(1)]
    b = [Fraction(1)]
    ell, m, bd = 0, 1, Fraction(1)
    for k, s in enumerate(seq):
        d = Fraction(s) + sum(c[i] * seq[k - i] for i in range(1, ell + 1))
        if d == 0:
            m += 1
            continue
        coef = d / bd
        t = list(c)
        c = c + [Fraction(0)] * max(0, len(b) + m - len(c))
        for i, bi in enumerate(b):
            c[i + m] -= coef * bi
        if 2 * ell <= k:
            ell, b, bd, m = k + 1 - ell, t, d, 1
        else:
            m += 1
    return c[:ell + 1] + [Fraction(0)] * max(0, ell + 1 - len(c))


def _fmt_poly(p: list, var: str = "t") -> str:
    terms = []
    for i, c in enumerate(p):
        if c == 0:
            continue
        mag = abs(c)
        if i == 0:
            body = str(mag)
        else:
            mono = var if i == 1 else f"{var}^{i}"
            body = mono if mag == 1 else f"{mag}*{mono}"
        terms.append(("-" if c < 0 else "+", body))
    if not terms:
        return "0"
    sign, body = terms[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in terms[1:]:
        out += f" {sign} {body}"
    return out


@dataclass(frozen=True)
class RationalSeries:
    """``numerator / denominator`` with integer coefficients (lowest degree
    first), denominator constant term 1, content 1, coprime."""
    numerator: tuple
    denominator: tuple

    def coefficients(self, count: int) -> list:
        """First ``count`` Taylor coefficients, exactly."""
        num, den = self.numerator, self.denominator
        out: list = []
        for i in range(count):
            v = num[i] if i < len(num) else 0
            v -= sum(den[j] * out[i - j] for j in range(1, min(i, len(den) - 1) + 1))
            out.append(v)  # den[0] == 1
        return out

    def __str__(self):
        def wrap(p):
            s = _fmt_poly(list(p))
            return f"({s})" if sum(1 for c in p if c) > 1 else s
        return f"{wrap(self.numerator)}/{wrap(self.denominator)}"


def _normalize(num: list, den: list) -> RationalSeries:
    g = _poly_gcd(num, den)
    if len(g) > 1:
        num = _poly_divmod(num, g)[0]
        den = _poly_divmod(den, g)[0]
    num = _trim_poly([Fraction(c) for c in num])
    den = _trim_poly([Fraction(c) for c in den])
    c0 = den[0]
    num = [c / c0 for c in num]
    den = [c / c0 for c in den]
    scale = lcm(*(c.denominator for c in num + den))
    num_i = [int(c * scale) for c in num]
    den_i = [int(c * scale) for c in den]
    content = gcd(*num_i, *den_i)
    if content > 1:
        num_i = [c // content for c in num_i]
        den_i = [c // content for c in den_i]
    return RationalSeries(tuple(num_i), tuple(den_i))


def word_counts(x: Fsa, count: int) -> list:
    """Number of accepted words of each length ``0 .. count-1``."""
    x = trim(x)
    if x.num_states == 0:
        return [0] * count
    rows = x.rows
    vec = {x.initial: 1}
    out = []
    for _ in range(count):
        out.append(sum(v for s, v in vec.items() if s in x.accepting))
        nxt: dict = {}
        for s, v in vec.items():
            for t in rows[s].values():
                nxt[t] = nxt.get(t, 0) + v
        vec = nxt
    return out


def growth_series(x: Fsa) -> RationalSeries:
    """Exact generating function of the accepted words counted by length.

    The counts obey a linear recurrence of order at most the number of
    states ``n`` (the series is ``e (I - tM)^-1 f``), so ``2n + 2`` terms
    determine it; Berlekamp-Massey recovers the least such recurrence, i.e.
    the denominator in lowest terms.
    """
    x = minimize(x)
    n = x.num_states
    if n == 0:
        return RationalSeries((0,), (1,))
    seq = word_counts(x, 2 * n + 2)
    conn = _berlekamp_massey(seq)
    order = len(conn) - 1
    num = _poly_mul([Fraction(s) for s in seq[:order + 1]], conn)[:order + 1]
    # the numerator may have degree up to ``order``; higher terms vanish
    return _normalize(_trim_poly(num), conn)


# -- geodesics ---------------------------------------------------------------


@dataclass
class GeodesicConfig:
    sample_count: int = 2000
    max_sample_length: int = 50
    rng_seed: int = 1
    max_iterations: int = 30
    max_rounds: int = 6

    def __post_init__(self):
        for k in ("sample_count", "max_sample_length", "max_iterations", "max_rounds"):
            if getattr(self, k) <= 0:
                raise ValueError(f"GeodesicConfig.{k} must be positive")


@dataclass
class GeodesicResult:
    acceptor: Fsa
    wdg: list
    iterations: int
    trajectory: list = field(default_factory=list)


@dataclass
class NotConverged:
    """The iteration did not reach a fixed point; not an error."""
    wdg: list
    trajectory: list


def build_wdg(s: AutomaticStructure, labels) -> Fsa:
    """Pairs ``(u, v)`` of equal length with ``u = v`` whose word
    differences all lie in ``labels`` (closed under inverses first)."""
    a = s.alphabet
    red = s.reduce
    base = {red(w) for w in labels} | {()}
    base |= {red(a.invert(w)) for w in base}
    m = build_d2(sorted(base, key=shortlex_key), red, a, equal_length_only=True)
    return to_two_var_fsa(m, ())


def sample_geodesic_differences(s: AutomaticStructure, count: int, max_len: int,
                                rng: random.Random) -> set:
    """Word differences of ``(u, reduce(u))`` for random geodesics ``u``.

    Each sample grows letter by letter, keeping an extension ``u x`` only
    when ``|reduce(u x)| = |u| + 1`` (so ``u x`` is geodesic).
    """
    a = s.alphabet
    red = s.reducer()
    letters = list(range(a.size))
    out: set = set()
    for _ in range(count):
        target = rng.randint(1, max_len)
        u: tuple = ()
        while len(u) < target:
            rng.shuffle(letters)
            for x in letters:
                if len(red(u + (x,))) == len(u) + 1:
                    u = u + (x,)
                    break
            else:
                break  # dead end: no geodesic extension
        v = red(u)
        for d in prefix_differences(u, v, red, a):
            out.add(d)
            out.add(red(a.invert(d)))
    return out


def geodesic_search(s: AutomaticStructure, cfg: Optional[GeodesicConfig] = None):
    """Geodesic word-acceptor by fixed-point iteration.

    ``W_{i+1}`` = words ``u`` with ``(u, v)`` accepted by the WDG machine for
    some ``v`` in ``L(W_i)``, from ``W_0 = W``.  The label set starts at the
    structure's word differences and grows by sampling.
    """
    if not s.verified:
        raise ValueError("structure is not verified")
    cfg = cfg or GeodesicConfig()
    rng = random.Random(cfg.rng_seed)
    labels = set(used_differences(s.word_acceptor, s.d2, s.reducer()))
    trajectory = []
    for rnd in range(cfg.max_rounds):
        new = sample_geodesic_differences(s, cfg.sample_count, cfg.max_sample_length, rng)
        added = new - labels
        labels |= new
        if rnd > 0 and not added:
            return NotConverged(sorted(labels, key=shortlex_key), trajectory)
        wdg = build_wdg(s, labels)
        w = s.word_acceptor
        for it in range(1, cfg.max_iterations + 1):
            w_next = minimize(exists(pair_and(wdg, w, "second")))
            trajectory.append((len(labels), w_next.num_states))
            log.info("geodesic round %d iteration %d: |WDG| = %d, %d states",
                     rnd, it, len(labels), w_next.num_states)
            if equal_languages(w_next, w):
                return GeodesicResult(w, sorted(labels, key=shortlex_key), it, trajectory)
            w = w_next
    return NotConverged(sorted(labels, key=shortlex_key), trajectory)


def geodesic_word_acceptor(s: AutomaticStructure, cfg: Optional[GeodesicConfig] = None):
    """The geodesic word-acceptor Fsa, or :class:`NotConverged`."""
    res = geodesic_search(s, cfg)
    return res.acceptor if isinstance(res, GeodesicResult) else res
