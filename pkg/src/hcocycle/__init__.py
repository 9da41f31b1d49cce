"""Sp-invariant abelianization of the symplectic derivation Lie algebra
h_{g,1}: Lie spiders, multiple contractions, exact linear algebra and the
weight-12 cocycle."""

__version__ = "0.1.0"

from .symplectic import Letter, SymplecticSpace, TensorElement, mu
from .freelie import LieWord, bracket_map, lie_dim
from .spiders import Spider, SpiderSum, derivation_commutator_oracle, spider_bracket, spider_expand
from .matchings import Matching, MuPolynomial, chord_classes, contract, symbolic_contract
from .coordinates import CoordinateSystem, SamplingConfig, select_coordinates
from .linalg import SparseMatrixQ, integer_kernel, nullspace, rank_exact, rank_mod

__all__ = [
    "Letter", "SymplecticSpace", "TensorElement", "mu",
    "LieWord", "bracket_map", "lie_dim",
    "Spider", "SpiderSum", "derivation_commutator_oracle", "spider_bracket", "spider_expand",
    "Matching", "MuPolynomial", "chord_classes", "contract", "symbolic_contract",
    "CoordinateSystem", "SamplingConfig", "select_coordinates",
    "SparseMatrixQ", "integer_kernel", "nullspace", "rank_exact", "rank_mod",
]
