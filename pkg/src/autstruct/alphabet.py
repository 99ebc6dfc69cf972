"""Ordered generating sets, words, short-lex order and presentations.

A word is a plain tuple of generator indices.  Index order is the generator
order, so short-lex comparison of two words is a comparison of
``(len(w), w)`` keys.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Word = tuple  # tuple[int, ...]

RESERVED = set("^()*=#$,")
PAD = "$"


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


class PresentationError(ValueError):
    """Malformed presentation file or word."""


def shortlex_key(w: Sequence[int]):
    return (len(w), tuple(w))


@dataclass(frozen=True)
class OrderedAlphabet:
    """Ordered, inversion-closed generating set.

    ``inverse[i]`` is the index of the inverse of generator ``i``; a
    generator may be its own inverse.  The padding symbol is never a
    member; in pair contexts it is represented by the index ``size``.
    """

    names: tuple
    inverse: tuple

    def __post_init__(self):
        names = tuple(self.names)
        inverse = tuple(self.inverse)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "inverse", inverse)
        if len(set(names)) != len(names):
            raise PresentationError(f"duplicate generator names in {names}")
        for nm in names:
            if not nm or any(c.isspace() or c in RESERVED for c in nm):
                raise PresentationError(f"invalid generator name {nm!r}")
            if nm[0].isdigit():
                raise PresentationError(f"generator name {nm!r} starts with a digit")
        if len(inverse) != len(names):
            raise PresentationError("inverse map has the wrong length")
        for i, j in enumerate(inverse):
            if not 0 <= j < len(names) or inverse[j] != i:
                raise PresentationError("inverse map is not an involution")

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def pad(self) -> int:
        """Sentinel index of the padding symbol."""
        return len(self.names)

    @property
    def letter_names(self):
        return self.names

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise PresentationError(f"unknown generator {name!r}") from None

    def check_word(self, w: Sequence[int]) -> None:
        n = len(self.names)
        for x in w:
            if not (isinstance(x, int) and 0 <= x < n):
                raise ValueError(f"letter {x!r} is not a generator index of {self.names}")

    def shortlex_cmp(self, u: Sequence[int], v: Sequence[int]) -> Ordering:
        self.check_word(u)
        self.check_word(v)
        ku, kv = shortlex_key(u), shortlex_key(v)
        if ku < kv:
            return Ordering.LESS
        if ku > kv:
            return Ordering.GREATER
        return Ordering.EQUAL

    def invert(self, w: Sequence[int]) -> Word:
        inv = self.inverse
        return tuple(inv[x] for x in reversed(w))

    def format_word(self, w: Sequence[int]) -> str:
        """Print a word; single-character names are juxtaposed, longer
        names are joined with ``*``.  The empty word prints as ``IdWord``."""
        if not w:
            return "IdWord"
        if all(len(self.names[x]) == 1 for x in w):
            return "".join(self.names[x] for x in w)
        return "*".join(self.names[x] for x in w)

    def parse_word(self, text: str) -> Word:
        return parse_word(text, self)

    @classmethod
    def from_names(cls, names: Iterable[str], inverse_names: dict | None = None) -> "OrderedAlphabet":
        """Build from explicit names; ``inverse_names`` maps name -> inverse
        name, defaulting to the case-change convention."""
        names = list(names)
        pos = {nm: i for i, nm in enumerate(names)}
        inv = []
        for nm in names:
            partner = inverse_names.get(nm) if inverse_names else None
            if partner is None:
                partner = nm.swapcase()
            if partner not in pos:
                raise PresentationError(f"no inverse for generator {nm!r}")
            inv.append(pos[partner])
        return cls(tuple(names), tuple(inv))


def invert_word(w: Sequence[int], alphabet: OrderedAlphabet) -> Word:
    return alphabet.invert(w)


def shortlex_cmp(u: Sequence[int], v: Sequence[int], alphabet: OrderedAlphabet) -> Ordering:
    return alphabet.shortlex_cmp(u, v)


def pad(u: Sequence[int], v: Sequence[int], pad_index: int) -> list:
    """Padded pair ``(u, v)`` as a list of letter pairs; the padding symbol
    is ``pad_index``."""
    m = max(len(u), len(v))
    return [
        (u[i] if i < len(u) else pad_index, v[i] if i < len(v) else pad_index)
        for i in range(m)
    ]


def unpad(pairs: Iterable[tuple], pad_index: int) -> tuple:
    u = tuple(x for x, _ in pairs if x != pad_index)
    v = tuple(y for _, y in pairs if y != pad_index)
    return u, v


def is_padded(pairs: Sequence[tuple], pad_index: int) -> bool:
    """True iff the pad symbol appears only as a suffix of one track."""
    end_u = end_v = False
    for x, y in pairs:
        if x == pad_index and y == pad_index:
            return False
        if x == pad_index:
            end_u = True
        elif end_u:
            return False
        if y == pad_index:
            end_v = True
        elif end_v:
            return False
    return True


# --- word grammar -----------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\()|(\))|(\^)\s*(-?\d+)|(\*)|([^\s^()*=#$,]+))")


def _tokenize(text: str):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PresentationError(f"malformed word {text!r} at column {pos}")
        pos = m.end()
        if m.group(1):
            out.append(("(", None))
        elif m.group(2):
            out.append((")", None))
        elif m.group(3):
            out.append(("^", int(m.group(4))))
        elif m.group(5):
            continue
        else:
            out.append(("name", m.group(6)))
    return out


def _split_names(chunk: str, alphabet: OrderedAlphabet) -> list:
    # greedy longest match against the generator names
    names = sorted(alphabet.names, key=len, reverse=True)
    out = []
    i = 0
    while i < len(chunk):
        for nm in names:
            if chunk.startswith(nm, i):
                out.append(alphabet.names.index(nm))
                i += len(nm)
                break
        else:
            raise PresentationError(f"unknown generator at {chunk[i:]!r}")
    return out


def parse_word(text: str, alphabet: OrderedAlphabet) -> Word:
    """Parse ``word := term+ ; term := atom ('^' int)? ; atom := name | '(' word ')'``.

    Negative exponents invert formally; ``IdWord``, ``1`` and the empty
    string denote the empty word.
    """
    stripped = text.strip()
    if stripped in ("", "1", "IdWord"):
        return ()
    toks = _tokenize(stripped)
    pos = 0

    def parse_seq(depth):
        nonlocal pos
        terms = []
        while pos < len(toks):
            kind, val = toks[pos]
            if kind == ")":
                if depth == 0:
                    raise PresentationError(f"unbalanced ')' in {text!r}")
                break
            if kind == "^":
                raise PresentationError(f"exponent without operand in {text!r}")
            pos += 1
            if kind == "(":
                atom = parse_seq(depth + 1)
                if pos >= len(toks) or toks[pos][0] != ")":
                    raise PresentationError(f"unbalanced '(' in {text!r}")
                pos += 1
                atoms = [atom]
            else:
                letters = _split_names(val, alphabet)
                # an exponent binds to the last generator of a juxtaposed run
                atoms = [(x,) for x in letters]
            if pos < len(toks) and toks[pos][0] == "^":
                e = toks[pos][1]
                pos += 1
                last = atoms[-1]
                if e < 0:
                    last = alphabet.invert(last)
                    e = -e
                atoms[-1] = last * e
            for a in atoms:
                terms.extend(a)
        if not terms and depth > 0:
            raise PresentationError(f"empty parentheses in {text!r}")
        return tuple(terms)

    w = parse_seq(0)
    if pos != len(toks):
        raise PresentationError(f"trailing input in {text!r}")
    return w


# --- presentations ----------------------------------------------------------


@dataclass(frozen=True)
class Presentation:
    alphabet: OrderedAlphabet
    relators: tuple = ()
    monoid_relators: tuple = field(init=False)
    name: str = ""

    def __post_init__(self):
        rels = tuple(tuple(r) for r in self.relators)
        for r in rels:
            self.alphabet.check_word(r)
        object.__setattr__(self, "relators", rels)
        inv = self.alphabet.inverse
        invrels = tuple((x, inv[x]) for x in range(self.alphabet.size))
        object.__setattr__(self, "monoid_relators", rels + invrels)

    def format(self) -> str:
        a = self.alphabet
        lines = []
        if self.name:
            lines.append(f"# {self.name}")
        lines.append("generators: " + " ".join(a.names))
        lines.append("inverses: " + "  ".join(f"{a.names[i]} {a.names[a.inverse[i]]}"
                                               for i in range(a.size) if i <= a.inverse[i]))
        lines.append("relators:")
        lines.extend(a.format_word(r) for r in self.relators)
        return "\n".join(lines) + "\n"


def _auto_alphabet(gens: list, inverse_pairs: list | None) -> OrderedAlphabet:
    names = list(gens)
    partner: dict = {}
    if inverse_pairs is not None:
        for x, y in inverse_pairs:
            if partner.get(x, y) != y or partner.get(y, x) != x:
                raise PresentationError(f"conflicting inverse declarations for {x} {y}")
            partner[x] = y
            partner[y] = x
    ordered: list = []
    for g in names:
        if g in ordered:
            continue
        ordered.append(g)
        if g in partner:
            p = partner[g]
        elif inverse_pairs is None or g.swapcase() != g:
            p = g.swapcase()
            if p == g:
                raise PresentationError(f"cannot infer an inverse for {g!r}; declare it under inverses:")
            partner[g] = p
            partner[p] = g
        else:
            raise PresentationError(f"no inverse declared for {g!r}")
        if p not in ordered and p not in names:
            ordered.append(p)
    for g in list(partner):
        if g not in ordered:
            raise PresentationError(f"inverse declaration names unknown generator {g!r}")
    pos = {g: i for i, g in enumerate(ordered)}
    return OrderedAlphabet(tuple(ordered), tuple(pos[partner[g]] for g in ordered))


def parse_presentation(text: str, name: str = "") -> Presentation:
    """Parse the line-oriented presentation format.

    Sections: ``generators:``, optional ``inverses:``, then ``relators:``
    (one word per line, or comma separated) and/or ``equations:`` (lines
    ``u = v``, each turned into the relator ``u v^-1``).
    """
    gens = None
    inverse_pairs = None
    rel_texts: list = []
    eq_texts: list = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        key = key.strip().lower()
        if sep and key in ("generators", "inverses", "relators", "equations", "name"):
            rest = rest.strip()
            if key == "generators":
                gens = rest.replace(",", " ").split()
                section = None
            elif key == "inverses":
                toks = rest.replace(",", " ").split()
                if len(toks) % 2:
                    raise PresentationError(f"line {lineno}: inverses must come in pairs")
                inverse_pairs = list(zip(toks[::2], toks[1::2]))
                section = None
            elif key == "name":
                name = name or rest
                section = None
            else:
                section = key
                if rest:
                    (rel_texts if key == "relators" else eq_texts).extend(
                        (lineno, t) for t in rest.split(",") if t.strip())
            continue
        if section == "relators":
            rel_texts.extend((lineno, t) for t in line.split(",") if t.strip())
        elif section == "equations":
            eq_texts.extend((lineno, t) for t in line.split(",") if t.strip())
        else:
            raise PresentationError(f"line {lineno}: unexpected text {line!r}")
    if not gens:
        raise PresentationError("missing generators: line")
    alphabet = _auto_alphabet(gens, inverse_pairs)
    relators = []
    for lineno, t in rel_texts:
        try:
            relators.append(parse_word(t, alphabet))
        except PresentationError as e:
            raise PresentationError(f"line {lineno}: {e}") from None
    for lineno, t in eq_texts:
        sides = t.split("=")
        if len(sides) < 2:
            raise PresentationError(f"line {lineno}: equation needs '='")
        try:
            words = [parse_word(s, alphabet) for s in sides]
        except PresentationError as e:
            raise PresentationError(f"line {lineno}: {e}") from None
        # a chain u = v = w gives u v^-1, v w^-1, ...
        for u, v in zip(words, words[1:]):
            relators.append(u + alphabet.invert(v))
    return Presentation(alphabet, tuple(relators), name=name)


def load_presentation(path) -> Presentation:
    with open(path, encoding="utf-8") as fh:
        return parse_presentation(fh.read(), name=str(path))
