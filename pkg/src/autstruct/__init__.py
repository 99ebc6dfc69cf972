"""Short-lex automatic structures for finitely presented groups."""

from .alphabet import OrderedAlphabet, Presentation, parse_presentation, parse_word, load_presentation
from .fsa import Fsa, BudgetExceeded, minimize, accepts, equal_languages
from .rewrite import KbLimits, KnuthBendix, kb_run
from .worddiff import WordDiffMachine, harvest_d1, build_d2, reduce_via_d1
from .pipeline import AutomaticStructure, PipelineConfig, Diagnosis, run_pipeline

__all__ = [
    "OrderedAlphabet", "Presentation", "parse_presentation", "parse_word", "load_presentation",
    "Fsa", "BudgetExceeded", "minimize", "accepts", "equal_languages",
    "KbLimits", "KnuthBendix", "kb_run",
    "WordDiffMachine", "harvest_d1", "build_d2", "reduce_via_d1",
    "AutomaticStructure", "PipelineConfig", "Diagnosis", "run_pipeline",
]
