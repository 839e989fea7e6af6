from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..bits import as_bits, bits_to_str


class QuantizerError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BitSequence:
    """Quantizer output plus the reconciliation record the scheme publishes."""

    bits: np.ndarray
    scheme: str
    params: Any = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "bits", as_bits(self.bits))

    def __len__(self):
        return self.bits.size

    def __str__(self):
        return bits_to_str(self.bits)
