"""Institutional governance reasoning: compliance in multi-level
governance, legality of temporal rule changes, and minimal revision search.
"""

from .parser import parse, parse_trace
from .grounding import ground
from .printer import print_spec

__all__ = ["parse", "parse_trace", "ground", "print_spec"]

__version__ = "0.1.0"
