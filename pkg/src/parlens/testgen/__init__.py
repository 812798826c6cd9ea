"""Positive and negative packet generation from format paths."""

from .corpus import load_corpus, write_corpus
from .formula import Conjunct, PathFormula, path_to_formula
from .generate import (
    Corpus,
    Skip,
    TestCase,
    generate_corpus,
    generate_positive,
    mutate_field_level,
    mutate_structural,
)
from .serialize import decode_path, serialize_packet
from .smt import to_smtlib
from .solver import SolveResult, solve

__all__ = [
    "Conjunct",
    "Corpus",
    "PathFormula",
    "Skip",
    "SolveResult",
    "TestCase",
    "decode_path",
    "generate_corpus",
    "generate_positive",
    "load_corpus",
    "mutate_field_level",
    "mutate_structural",
    "path_to_formula",
    "serialize_packet",
    "solve",
    "to_smtlib",
    "write_corpus",
]
