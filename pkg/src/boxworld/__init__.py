"""Higher-order boxworld: labeled tensors, process validators, causal-inequality constructions and LPs."""

from .boxes import is_box, is_nonsignaling_box, ns_bit_vertices, pr_box
from .constructions import NamedConstruction, get as get_construction, realize_causal
from .inequalities import Correlation, gyni, is_causal, lgyni, ocb, signaling_profile, two_way_signaling_bound
from .operations import Instrument, OpDims, is_nonsignaling_instrument, validate_instrument
from .processes import (
    ProcessDims,
    ProcessTensor,
    affine_decompose,
    born_rule,
    causal_class,
    is_boxworld_process,
    satisfies_nsp,
    validate_process_tensor,
)
from .tensor_core import AxisSpec, LabeledTensor, RrExpr, contract, reduce_and_replace

__version__ = "0.1.0"

__all__ = [
    "AxisSpec", "Correlation", "Instrument", "LabeledTensor", "NamedConstruction", "OpDims", "ProcessDims",
    "ProcessTensor", "RrExpr", "affine_decompose", "born_rule", "causal_class", "contract", "get_construction",
    "gyni", "is_box", "is_boxworld_process", "is_causal", "is_nonsignaling_box", "is_nonsignaling_instrument",
    "lgyni", "ns_bit_vertices", "ocb", "pr_box", "realize_causal", "reduce_and_replace", "satisfies_nsp",
    "signaling_profile", "two_way_signaling_bound", "validate_instrument", "validate_process_tensor",
]
