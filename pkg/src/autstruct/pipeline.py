"""Computation and verification of short-lex automatic structures.

Step 1 runs Knuth-Bendix and harvests a word-difference machine D1 until
it stops changing.  Step 2 builds the word-acceptor W from D1 and the
equality multiplier.  Step 3 builds the closure machine D2 on a candidate
set of word differences.  Step 4 builds all multipliers as one product
W x W x D2.  Step 5 checks that every multiplier is total on L(W), adding
the missing differences otherwise.  Step 6 checks every monoid relator
through composites of multipliers.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

from .alphabet import OrderedAlphabet, Presentation, Word, load_presentation, shortlex_key
from .fsa import (DEFAULT_BUDGET, BudgetExceeded, Fsa, accepts, difference,
                  equal_languages, format_fsa, iter_words, minimize, not_, parse_fsa, and_)
from .fsa2 import PairAlphabet, compose, exists, exists_factor, gt_automaton
from .rewrite import KbLimits, KnuthBendix, RuleSystem, to_str
from .worddiff import (D1Reducer, WordDiffMachine, build_d2, format_wd, harvest_d1, parse_wd,
                       to_two_var_fsa)

log = logging.getLogger(__name__)


# -- results -----------------------------------------------------------------


@dataclass
class WitnessFailure:
    """Two distinct accepted words found equal in the group."""
    u: Word
    v: Word


@dataclass
class MissingDifferences:
    words: set
    witnesses: list = field(default_factory=list)


@dataclass
class AxiomFailure:
    relator: Word


@dataclass
class PipelineReport:
    loop1_count: int = 0
    loop2_count: int = 0
    d1_sizes: list = field(default_factory=list)
    d2_sizes: list = field(default_factory=list)
    kb_rules: list = field(default_factory=list)
    d1_trajectory: list = field(default_factory=list)
    wa_states: Optional[int] = None
    wa_states_raw: Optional[int] = None
    multiplier_states: dict = field(default_factory=dict)
    product_states: Optional[int] = None
    timings: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    stop_reason: str = ""

    def log(self, msg: str) -> None:
        self.events.append(msg)
        log.info(msg)

    def time(self, stage: str, seconds: float) -> None:
        self.timings[stage] = self.timings.get(stage, 0.0) + seconds

    def format(self, alphabet: Optional[OrderedAlphabet] = None) -> str:
        lines = [f"stop reason: {self.stop_reason}",
                 f"loop1 (returns to Step 1 + 1): {self.loop1_count}",
                 f"loop2 (passes through Steps 3-5): {self.loop2_count}",
                 f"D1 sizes: {self.d1_sizes}",
                 f"D2 sizes: {self.d2_sizes}",
                 f"KB rules at stop: {self.kb_rules}",
                 f"word-acceptor states: {self.wa_states}"]
        if self.multiplier_states:
            names = alphabet.names if alphabet else None
            parts = []
            for g, c in self.multiplier_states.items():
                nm = "$" if g is None else (names[g] if names else str(g))
                parts.append(f"{nm}:{c}")
            lines.append("multiplier states: " + " ".join(parts))
            sizes = [c for g, c in self.multiplier_states.items() if g is not None]
            if sizes:
                lines.append(f"multiplier range: {min(sizes)}-{max(sizes)}")
        if self.product_states is not None:
            lines.append(f"multiplier product states before minimization: {self.product_states}")
        for k, v in self.timings.items():
            lines.append(f"time {k}: {v:.2f}s")
        lines.append("events:")
        lines.extend("  " + e for e in self.events)
        return "\n".join(lines) + "\n"


class Diagnosis(Exception):
    """The pipeline gave up; carries the stage, counts and report."""

    def __init__(self, stage: str, message: str, report: PipelineReport):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.report = report


@dataclass
class AutomaticStructure:
    alphabet: OrderedAlphabet
    word_acceptor: Fsa
    equality_multiplier: Fsa
    multipliers: dict  # generator index -> Fsa
    verified: bool
    report: PipelineReport
    d1: Optional[WordDiffMachine] = None
    d2: Optional[WordDiffMachine] = None
    presentation: Optional[Presentation] = None
    _reducer: Optional[D1Reducer] = None

    def reducer(self) -> D1Reducer:
        if self._reducer is None:
            self._reducer = D1Reducer(self.d1)
        return self._reducer

    def reduce(self, w) -> Word:
        """Normal form of ``w``: the unique accepted word equal to it."""
        r = self.reducer()(tuple(w))
        if not accepts(self.word_acceptor, r):
            raise AssertionError(f"reduction {self.alphabet.format_word(r)} is not accepted")
        return r

    def multiplier(self, g) -> Fsa:
        return self.equality_multiplier if g is None else self.multipliers[g]

    @property
    def word_differences(self) -> list:
        return list(self.d2.labels) if self.d2 is not None else []


@dataclass
class PipelineConfig:
    kb: KbLimits = field(default_factory=KbLimits)
    max_loop1: int = 8
    max_loop2: int = 40
    budget_states: int = DEFAULT_BUDGET
    use_d2_for_d1: bool = False
    witness_samples: int = 16
    storage: Optional[str] = None  # force "dense" or "sparse" for outputs
    max_restarts: int = 5
    insert_witness: bool = False  # experimental: add u = v as a rule on loop-back
    recompute_d1_only: bool = False  # experimental: adjoin u = v and re-harvest, no more KB
    stop_callback: Optional[Callable[[int, WordDiffMachine], Optional[bool]]] = None

    def __post_init__(self):
        for k in ("max_loop1", "max_loop2", "budget_states", "witness_samples", "max_restarts"):
            if getattr(self, k) <= 0:
                raise ValueError(f"PipelineConfig.{k} must be positive")
        if self.storage not in (None, "dense", "sparse"):
            raise ValueError("PipelineConfig.storage must be 'dense' or 'sparse'")


# -- Step 2 ------------------------------------------------------------------


def make_word_acceptor(d1: WordDiffMachine, budget: int = DEFAULT_BUDGET) -> Fsa:
    """Words with no factor ``s`` such that ``(s, t)`` is accepted by D1 for
    some ``t`` short-lex below ``s``."""
    alphabet = d1.alphabet
    zd = to_two_var_fsa(d1, ())
    return not_(exists_factor(and_(zd, gt_automaton(alphabet), budget), budget))


# -- Step 4 ------------------------------------------------------------------


def _standard_product(w: Fsa, d2: WordDiffMachine, budget: int):
    """Accessible part of W x W x D2 with an "equal so far" bit, as
    ``(states, rows)``, or a :class:`WitnessFailure`."""
    alphabet = d2.alphabet
    n = alphabet.size
    m = n + 1
    pa = PairAlphabet(alphabet)
    wacc = w.accepting
    by_x = d2.moves_by_first()
    # state 0 means "track ended": entered on the padding symbol from an
    # accept state, after which only padding may follow
    wnext = [dict(r) for r in w.rows]
    wnext[0] = {n: 0}
    for s in wacc:
        wnext[s][n] = 0
    wacc = set(wacc) | {0}
    ident = d2.index[()]
    start = (w.initial, w.initial, ident, True)
    index = {start: 1}
    states = [start]
    parent = [None]
    rows: list = [{}]
    head = 0
    while head < len(states):
        s1, s2, d, eq = states[head]
        head += 1
        row = {}
        n1 = wnext[s1]
        n2 = wnext[s2]
        for x, moves in by_x[d].items():
            t1 = n1.get(x)
            if t1 is None:
                continue
            for y, dd in moves:
                t2 = n2.get(y)
                if t2 is None:
                    continue
                e2 = eq and x == y
                key = (t1, t2, dd, e2)
                sid = index.get(key)
                if sid is None:
                    if dd == ident and not e2 and t1 in wacc and t2 in wacc:
                        u, v = _trace(states, parent, head, x * m + y, pa)
                        return WitnessFailure(u, v)
                    sid = index[key] = len(states) + 1
                    states.append(key)
                    parent.append((head, x * m + y))
                    if len(states) > budget:
                        raise BudgetExceeded("multipliers", budget)
                row[x * m + y] = sid
        rows.append(row)
    return states, rows, wacc


def _targets(d2: WordDiffMachine, reducer) -> list:
    if reducer is None:
        reducer = D1Reducer(d2)
    return [(None, ())] + [(g, reducer((g,))) for g in range(d2.alphabet.size)]


def make_multipliers(w: Fsa, d2: WordDiffMachine, budget: int = DEFAULT_BUDGET,
                     storage: Optional[str] = None, report: Optional[PipelineReport] = None,
                     reducer=None):
    """All multipliers from one product of two copies of W with D2.

    ``M_x`` accepts at states labeled by the normal form of ``x``, obtained
    from ``reducer`` (defaults to reduction through D2 itself).

    Returns a dict (generator index or None for the equality multiplier)
    -> minimized Fsa, or a :class:`WitnessFailure`.
    """
    res = _standard_product(w, d2, budget)
    if isinstance(res, WitnessFailure):
        return res
    states, rows, wacc = res
    if report is not None:
        report.product_states = len(states)
    pa = PairAlphabet(d2.alphabet)
    acc_by_label: dict = {}
    for i, (s1, s2, d, eq) in enumerate(states, 1):
        if s1 in wacc and s2 in wacc:
            acc_by_label.setdefault(d, []).append(i)
    out = {}
    for g, lab in _targets(d2, reducer):
        idx = d2.index.get(lab)
        acc = acc_by_label.get(idx, []) if idx is not None else []
        out[g] = minimize(Fsa(pa.size, len(states), 1, acc, rows, pa), storage)
    return out


def used_differences(w: Fsa, d2: WordDiffMachine, reducer=None,
                     budget: int = DEFAULT_BUDGET) -> list:
    """Labels of D2 met on accepted paths of some multiplier: the word
    differences of the structure, in short-lex order."""
    res = _standard_product(w, d2, budget)
    if isinstance(res, WitnessFailure):
        raise ValueError("word-acceptor accepts two equal words")
    states, rows, wacc = res
    finals = {d2.index[lab] for _, lab in _targets(d2, reducer) if lab in d2.index}
    back: list = [[] for _ in range(len(states) + 1)]
    for i in range(1, len(states) + 1):
        for t in rows[i].values():
            back[t].append(i)
    live = {i for i, (s1, s2, d, _) in enumerate(states, 1)
            if s1 in wacc and s2 in wacc and d in finals}
    stack = list(live)
    while stack:
        for p in back[stack.pop()]:
            if p not in live:
                live.add(p)
                stack.append(p)
    labs = {d2.labels[states[i - 1][2]] for i in live}
    return sorted(labs, key=shortlex_key)


def _trace(states, parent, last, letter, pa: PairAlphabet):
    path = [letter]
    i = last
    while parent[i - 1] is not None:
        i, c = parent[i - 1]
        path.append(c)
    path.reverse()
    u = tuple(c // (pa.n + 1) for c in path if c // (pa.n + 1) != pa.n)
    v = tuple(c % (pa.n + 1) for c in path if c % (pa.n + 1) != pa.n)
    return u, v


# -- Step 5 ------------------------------------------------------------------


def shortest_words(x: Fsa, limit: int) -> list:
    """Up to ``limit`` accepted words, short-lex least first."""
    return list(itertools.islice(iter_words(x), limit))


def prefix_differences(u: Sequence[int], v: Sequence[int], reducer, alphabet: OrderedAlphabet) -> list:
    """Reduced ``u[:i]^-1 v[:i]`` for every ``i``, each from the previous
    one, so only short words are reduced."""
    inv = alphabet.inverse
    d: Word = ()
    out = [d]
    for i in range(max(len(u), len(v))):
        left = (inv[u[i]],) if i < len(u) else ()
        right = (v[i],) if i < len(v) else ()
        d = reducer(left + d + right)
        out.append(d)
    return out


def check_multipliers(w: Fsa, multipliers: dict, d2: WordDiffMachine, reducer,
                      samples: int = 16, budget: int = DEFAULT_BUDGET):
    """Return None if every ``M_x`` accepts some ``(u, v)`` for each ``u`` in
    L(W); otherwise the differences missing from D2."""
    alphabet = d2.alphabet
    known = d2.label_set()
    missing: set = set()
    witnesses = []
    failed = False
    for g in range(alphabet.size):
        bad = difference(w, exists(multipliers[g], budget), budget)
        if bad.num_states == 0:
            continue
        failed = True
        for u in shortest_words(bad, samples):
            v = reducer(tuple(u) + (g,))
            witnesses.append((g, u, v))
            for dword in prefix_differences(u, v, reducer, alphabet):
                if dword not in known:
                    missing.add(dword)
                    missing.add(reducer(alphabet.invert(dword)))
    if not failed:
        return None
    return MissingDifferences(missing, witnesses)


# -- Step 6 ------------------------------------------------------------------


class CompositeCache:
    """Multipliers ``M_w`` for words ``w``, built by balanced composition."""

    def __init__(self, structure_mults: dict, budget: int = DEFAULT_BUDGET,
                 storage: Optional[str] = None):
        self.m = {(): structure_mults[None]}
        for g, z in structure_mults.items():
            if g is not None:
                self.m[(g,)] = z
        self.budget = budget
        self.storage = storage
        self.compositions = 0

    def get(self, w: Word) -> Fsa:
        w = tuple(w)
        z = self.m.get(w)
        if z is None:
            k = (len(w) + 1) // 2
            try:
                z = compose(self.get(w[:k]), self.get(w[k:]), self.budget)
            except BudgetExceeded as e:
                raise BudgetExceeded(f"{e.operation} for subword of length {len(w)}", e.budget) from None
            if self.storage:
                z = z.with_storage(self.storage)
            self.compositions += 1
            self.m[w] = z
        return z


def axiom_check(mults: dict, presentation: Presentation, budget: int = DEFAULT_BUDGET,
                storage: Optional[str] = None, cache: Optional[CompositeCache] = None):
    """None if ``M_r`` has the language of ``M_$`` for every monoid relator
    ``r``; otherwise an :class:`AxiomFailure`."""
    cache = cache or CompositeCache(mults, budget, storage)
    meq = mults[None]
    for r in presentation.monoid_relators:
        if not r:
            continue
        z = cache.get(r)
        if not equal_languages(z, meq):
            return AxiomFailure(tuple(r))
    return None


# -- driver ------------------------------------------------------------------


class _Step1:
    """Knuth-Bendix driver stopping when the harvested D1 is stable."""

    def __init__(self, presentation: Presentation, config: PipelineConfig, report: PipelineReport):
        self.kb = KnuthBendix(presentation, config.kb)
        self.config = config
        self.report = report
        self.rejected: set = set()
        self.last_result = None
        self._last_sig = ""

    @staticmethod
    def signature(d1: WordDiffMachine) -> str:
        text = format_fsa(minimize(d1.to_fsa()))
        return hashlib.sha256(text.encode()).hexdigest()

    def adopt(self, d1: WordDiffMachine) -> None:
        self._last_sig = self.signature(d1)

    def harvest_now(self) -> WordDiffMachine:
        d1 = harvest_d1(self.kb.rs)
        self.adopt(d1)
        self.report.log(f"Step 1: re-harvested D1 from {len(self.kb.rs)} rules; "
                        f"D1 has {d1.num_states} states")
        return d1

    def next_d1(self) -> WordDiffMachine:
        cfg = self.config
        state = {"last": None, "run": 0}
        chosen = {}

        def observer(snapshot: RuleSystem) -> bool:
            d1 = harvest_d1(snapshot)
            sig = self.signature(d1)
            self.report.d1_trajectory.append(d1.num_states)
            if sig == state["last"]:
                state["run"] += 1
            else:
                state["run"] = 1
                state["last"] = sig
            log.info("checkpoint: %d rules, D1 has %d states (stable for %d)",
                     len(snapshot), d1.num_states, state["run"])
            stop = state["run"] >= cfg.kb.stability_threshold and sig not in self.rejected
            if cfg.stop_callback is not None:
                answer = cfg.stop_callback(len(snapshot), d1)
                if answer is not None:
                    stop = bool(answer)
            if stop:
                chosen["d1"] = d1
                chosen["sig"] = sig
            return stop

        result = self.kb.run(observer)
        self.last_result = result
        self.report.kb_rules.append(len(result.rules))
        if "d1" in chosen:
            d1 = chosen["d1"]
            self._last_sig = chosen["sig"]
        else:
            d1 = harvest_d1(result.rules)
            self._last_sig = self.signature(d1)
        self.report.log(f"Step 1: KB {result.reason} with {len(result.rules)} rules; "
                        f"D1 has {d1.num_states} states")
        return d1

    def reject_current(self) -> str:
        self.rejected.add(self._last_sig)
        return self._last_sig

    def add_identity(self, u: Word, v: Word) -> None:
        self.kb._add_equation(to_str(u), to_str(v))

    @property
    def exhausted(self) -> bool:
        return self.kb.reason in ("confluent", "limit")


# -- artifacts on disk -------------------------------------------------------


def _mult_name(alphabet: OrderedAlphabet, g) -> str:
    return "mult_eq.fsa" if g is None else f"mult_{alphabet.names[g]}.fsa"


class Checkpoint:
    """Stage outputs in a directory plus an append-only ``manifest.txt``.

    Manifest lines are ``<utc time> <stage> <status> [detail]``.
    """

    def __init__(self, directory, config: Optional[PipelineConfig] = None):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest = self.dir / "manifest.txt"
        if config is not None and not self.manifest.exists():
            self.record("config", "set", _config_line(config))

    def record(self, stage: str, status: str, detail: str = "") -> None:
        stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        with open(self.manifest, "a", encoding="utf-8") as fh:
            fh.write(f"{stamp} {stage} {status} {detail}".rstrip() + "\n")

    def write(self, name: str, text: str, stage: str) -> None:
        tmp = self.dir / (name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(self.dir / name)
        self.record(stage, "wrote", name)

    def entries(self) -> list:
        if not self.manifest.exists():
            return []
        out = []
        for line in self.manifest.read_text(encoding="utf-8").splitlines():
            parts = line.split(" ", 3)
            if len(parts) >= 3:
                out.append((parts[1], parts[2], parts[3] if len(parts) > 3 else ""))
        return out

    def rejected(self) -> set:
        return {d for st, status, d in self.entries() if status == "rejected"}


def _config_line(cfg: PipelineConfig) -> str:
    keys = ("max_loop1", "max_loop2", "budget_states", "use_d2_for_d1", "witness_samples",
            "storage", "max_restarts", "insert_witness", "recompute_d1_only")
    kb = " ".join(f"kb.{k}={v}" for k, v in vars(cfg.kb).items())
    return " ".join(f"{k}={getattr(cfg, k)}" for k in keys) + " " + kb


def save_structure(s: AutomaticStructure, directory) -> Path:
    """Write ``group.pres``, ``wa.fsa``, ``mult_eq.fsa``, ``mult_<gen>.fsa``,
    ``d1.wd``, ``d2.wd`` and ``report.txt``; log them in the manifest."""
    ck = Checkpoint(directory)
    a = s.alphabet
    if s.presentation is not None:
        ck.write("group.pres", s.presentation.format(), "save")
    ck.write("wa.fsa", format_fsa(s.word_acceptor, ["word-acceptor"]), "save")
    ck.write("mult_eq.fsa", format_fsa(s.equality_multiplier, ["equality multiplier"]), "save")
    for g, z in sorted(s.multipliers.items()):
        ck.write(_mult_name(a, g), format_fsa(z, [f"multiplier {a.names[g]}"]), "save")
    if s.d1 is not None:
        ck.write("d1.wd", format_wd(s.d1), "save")
    if s.d2 is not None:
        ck.write("d2.wd", format_wd(s.d2), "save")
    ck.write("report.txt", s.report.format(a), "save")
    ck.record("verdict", "verified" if s.verified else "unverified")
    return ck.dir


def load_structure(directory) -> AutomaticStructure:
    d = Path(directory)
    p = load_presentation(d / "group.pres")
    a = p.alphabet
    pa = PairAlphabet(a)
    read = lambda name: (d / name).read_text(encoding="utf-8")  # noqa: E731
    w = parse_fsa(read("wa.fsa"), a)
    meq = parse_fsa(read("mult_eq.fsa"), pa)
    mults = {g: parse_fsa(read(_mult_name(a, g)), pa) for g in range(a.size)}
    d1 = parse_wd(read("d1.wd"), a)
    d2 = parse_wd(read("d2.wd"), a) if (d / "d2.wd").exists() else None
    verdicts = [status for st, status, _ in Checkpoint(d).entries() if st == "verdict"]
    verified = bool(verdicts) and verdicts[-1] == "verified"
    report = PipelineReport(stop_reason="loaded")
    return AutomaticStructure(a, w, meq, mults, verified, report, d1, d2, p)


# -- driver ------------------------------------------------------------------


def run_pipeline(presentation: Presentation, config: Optional[PipelineConfig] = None,
                 checkpoint_dir=None, resume: bool = False) -> AutomaticStructure:
    """Steps 1-6 with both correction loops; raises :class:`Diagnosis` on
    failure (and lets :class:`BudgetExceeded` propagate).

    With ``checkpoint_dir`` every stage output is written there as it is
    produced.  ``resume`` restarts from the D1 and D2 found there; since
    every stage is deterministic the final artifacts are the same as those
    of an uninterrupted run.
    """
    cfg = config or PipelineConfig()
    report = PipelineReport()
    alphabet = presentation.alphabet
    budget = cfg.budget_states
    step1 = _Step1(presentation, cfg, report)
    ck = Checkpoint(checkpoint_dir, cfg) if checkpoint_dir is not None else None
    resume_d1 = resume_labels = None
    if ck is not None:
        ck.write("group.pres", presentation.format(), "input")
        if resume:
            step1.rejected |= ck.rejected()
            if (ck.dir / "d1.wd").exists():
                resume_d1 = parse_wd((ck.dir / "d1.wd").read_text(encoding="utf-8"), alphabet)
                if _Step1.signature(resume_d1) in step1.rejected:
                    resume_d1 = None
            if resume_d1 is not None and (ck.dir / "d2.wd").exists():
                resume_labels = parse_wd((ck.dir / "d2.wd").read_text(encoding="utf-8"), alphabet).labels
            report.log("resume: " + ("from saved D1" if resume_d1 is not None else "from Step 1"))
    prev_d2 = None
    pending_harvest = False
    restarts = 0
    while True:
        report.loop1_count += 1
        if report.loop1_count > cfg.max_loop1 or restarts > cfg.max_restarts:
            report.stop_reason = "loop1 cap"
            raise Diagnosis("step1", "too many returns to Step 1", report)
        t0 = time.perf_counter()
        if resume_d1 is not None:
            d1, resume_d1 = resume_d1, None
            step1.adopt(d1)
            report.log(f"Step 1: resumed D1 with {d1.num_states} states")
        elif cfg.use_d2_for_d1 and prev_d2 is not None:
            d1 = prev_d2
            step1.adopt(d1)
            report.log(f"Step 1: using previous D2 ({d1.num_states} states) in place of D1")
        elif pending_harvest:
            d1 = step1.harvest_now()
        else:
            d1 = step1.next_d1()
        pending_harvest = False
        report.d1_sizes.append(d1.num_states)
        report.time("step1", time.perf_counter() - t0)
        if ck is not None:
            ck.write("d1.wd", format_wd(d1), "step1")

        t0 = time.perf_counter()
        w = make_word_acceptor(d1, budget)
        if cfg.storage:
            w = w.with_storage(cfg.storage)
        report.wa_states = w.num_states
        report.log(f"Step 2: word-acceptor has {w.num_states} states")
        report.time("step2", time.perf_counter() - t0)
        if ck is not None:
            ck.write("wa.fsa", format_fsa(w, ["word-acceptor"]), "step2")
        reducer = D1Reducer(d1)

        labels = list(resume_labels) if resume_labels is not None else list(d1.labels)
        resume_labels = None
        back_to_step1 = False
        loop2 = 0
        while True:
            loop2 += 1
            report.loop2_count += 1
            if loop2 > cfg.max_loop2:
                report.stop_reason = "loop2 cap"
                raise Diagnosis("step5", "too many passes through Steps 3-5", report)
            t0 = time.perf_counter()
            d2 = build_d2(labels, reducer, alphabet)
            report.d2_sizes.append(d2.num_states)
            report.log(f"Step 3: D2 has {d2.num_states} states")
            report.time("step3", time.perf_counter() - t0)
            if ck is not None:
                ck.write("d2.wd", format_wd(d2), "step3")

            t0 = time.perf_counter()
            mults = make_multipliers(w, d2, budget, cfg.storage, report, reducer)
            report.time("step4", time.perf_counter() - t0)
            if isinstance(mults, WitnessFailure):
                fu, fv = alphabet.format_word(mults.u), alphabet.format_word(mults.v)
                report.log(f"Step 4: W accepts {fu} and {fv}, equal in the group; back to Step 1")
                sig = step1.reject_current()
                if ck is not None:
                    ck.record("step4", "rejected", sig)
                prev_d2 = d2
                if cfg.insert_witness or cfg.recompute_d1_only:
                    step1.add_identity(mults.u, mults.v)
                    pending_harvest = cfg.recompute_d1_only
                back_to_step1 = True
                break
            report.multiplier_states = {g: z.num_states for g, z in mults.items()}
            report.log("Step 4: multipliers " + ", ".join(
                f"{'$' if g is None else alphabet.names[g]}={z.num_states}" for g, z in mults.items()))

            t0 = time.perf_counter()
            chk = check_multipliers(w, mults, d2, reducer, cfg.witness_samples, budget)
            report.time("step5", time.perf_counter() - t0)
            if chk is not None:
                new = chk.words - d2.label_set()
                report.log(f"Step 5: {len(new)} missing word differences")
                if not new:
                    report.log("Step 5: no new differences found; back to Step 1")
                    sig = step1.reject_current()
                    if ck is not None:
                        ck.record("step5", "rejected", sig)
                    back_to_step1 = True
                    break
                labels = list(d2.labels) + sorted(new, key=shortlex_key)
                continue

            t0 = time.perf_counter()
            cache = CompositeCache(mults, budget, cfg.storage)
            ax = axiom_check(mults, presentation, budget, cfg.storage, cache)
            report.time("step6", time.perf_counter() - t0)
            if ax is not None:
                report.log(f"Step 6: relator {alphabet.format_word(ax.relator)} fails; back to Step 1")
                sig = step1.reject_current()
                if ck is not None:
                    ck.record("step6", "rejected", sig)
                restarts += 1
                back_to_step1 = True
                break
            report.log(f"Step 6: all {len(presentation.monoid_relators)} relators verified "
                       f"({cache.compositions} compositions)")
            report.stop_reason = "verified"
            s = AutomaticStructure(alphabet, w, mults[None],
                                   {g: z for g, z in mults.items() if g is not None},
                                   True, report, d1, d2, presentation)
            if ck is not None:
                save_structure(s, ck.dir)
            return s
        if back_to_step1 and step1.exhausted and not (
                cfg.use_d2_for_d1 or cfg.insert_witness or pending_harvest):
            report.stop_reason = "kb exhausted"
            raise Diagnosis("step1", "Knuth-Bendix finished but the structure did not verify", report)
