from .bandana import (
    BandanaParams,
    bandana_from_cycles,
    bandana_quantize,
    bandana_select,
    map_pairs,
    rejection_table_from_histogram,
    segment_bits,
)
from .base import BitSequence, QuantizerError
from .ipi import IpiParams, gray, gray_bits, ipi_bits, ipi_quantize
from .saphe import SapheParams, saphe_commit, saphe_quantize, saphe_thresholds
from .walkie_talkie import (
    ReconciliationAbort,
    WalkieTalkieParams,
    wt_preprocess,
    wt_privacy_amplify,
    wt_quantize,
    wt_quantize_values,
    wt_reconcile,
)

__all__ = [
    "BandanaParams", "BitSequence", "IpiParams", "QuantizerError", "ReconciliationAbort",
    "SapheParams", "WalkieTalkieParams", "bandana_from_cycles", "bandana_quantize",
    "bandana_select", "gray", "gray_bits", "ipi_bits", "ipi_quantize", "map_pairs",
    "rejection_table_from_histogram", "saphe_commit", "saphe_quantize", "saphe_thresholds",
    "segment_bits", "wt_preprocess", "wt_privacy_amplify", "wt_quantize", "wt_quantize_values",
    "wt_reconcile",
]
