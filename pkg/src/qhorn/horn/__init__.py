"""Decorated Horn-clause language over quantum registers."""

from pathlib import Path

from .builtins import BUILTINS, stratum
from .engine import ProofTrace, TraceStep, compact, normalize_clause, solve, uncompact
from .parser import ParseError, parse_goal, parse_program
from .registry import DEFAULT_SEED, Registry, World
from .terms import Atom, Clause, Compound, HornError, Ket, Num, Pred, Val, Var
from .unify import kets_equal, unify

FIXTURES = Path(__file__).parent / "fixtures"

# reference query sequences per fixture; each sequence shares one world
FIXTURE_QUERIES = {
    "herald.qh": ["herald(nv1,nv2,p1,p2)"],
    "noclone.qh": ["clone(a|0⟩+b|1⟩, a|0⟩+b|1⟩)", "~clone(a|0⟩+b|1⟩, a|0⟩+b|1⟩)"],
    "probe.qh": ["probe(sz,pa)", "same_stats(sz,s,pa)", "probe(sx,pb)", "same_stats(sz,s,pa)"],
    "walk.qh": ["dist(3,D)", "preserved(1/2)", "~walk(1,w0)"],
}


def fixture_path(name: str) -> Path:
    return FIXTURES / name


__all__ = [
    "Atom", "BUILTINS", "Clause", "Compound", "DEFAULT_SEED", "FIXTURES", "FIXTURE_QUERIES", "HornError", "Ket", "Num",
    "ParseError", "Pred", "ProofTrace", "Registry", "TraceStep", "Val", "Var", "World", "compact",
    "fixture_path", "kets_equal", "normalize_clause", "parse_goal", "parse_program", "solve",
    "stratum", "uncompact", "unify",
]
