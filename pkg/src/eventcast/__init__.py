"""Complex event forecasting over symbolic automata and variable-order Markov models."""
from .algebra import Event, MintermSet, build_minterms, eval_predicate, register_predicate
from .automata import Dsfa, compile_sfa, determinize, recognize
from .config import PatternConfig, compile_pattern
from .kernels import BACKEND
from .pattern import parse_sre, skip_till_any, sre_membership, to_streaming

__version__ = "0.1.0"
