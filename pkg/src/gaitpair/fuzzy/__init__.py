from .bch import BCHCode, CodeError, CodeParams, DecodeFailure, bch_decode, bch_encode, get_code
from .commitment import DEFAULT_CODE, WIDE_CODE, DecommitFailure, FuzzySketch, commit, decommit
from .probability import Probability, adversary_success, pake_stub

__all__ = [
    "BCHCode", "CodeError", "CodeParams", "DEFAULT_CODE", "DecodeFailure", "DecommitFailure",
    "FuzzySketch", "Probability", "WIDE_CODE", "adversary_success", "bch_decode", "bch_encode",
    "commit", "decommit", "get_code", "pake_stub",
]
