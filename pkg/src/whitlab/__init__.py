"""Finite-data laboratory for Whitney-type extension conditions, jet fields and
the quantitative estimates behind smooth-extension counterexamples."""

from .errors import DomainError, InapplicableBound, SchemaError, SearchExhausted
from .jets import Jet, JetField, Polynomial, jets_from_function
from .moduli import Capped, InfiniteBeyond, Linear, Modulus, PowerLaw, Table, Zero
from .whitney import Wk, Wkom, Wkplus, check_whitney, minimal_whitney_modulus

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "InapplicableBound",
    "SchemaError",
    "SearchExhausted",
    "Jet",
    "JetField",
    "Polynomial",
    "jets_from_function",
    "Modulus",
    "Zero",
    "Linear",
    "PowerLaw",
    "Capped",
    "Table",
    "InfiniteBeyond",
    "Wkom",
    "Wkplus",
    "Wk",
    "check_whitney",
    "minimal_whitney_modulus",
]
