"""Gray-coded inter-pulse-interval quantization."""

from dataclasses import dataclass

import numpy as np

from ..signal import HeelStrikes
from .base import BitSequence, QuantizerError


@dataclass(frozen=True)
class IpiParams:
    m: float = 1.0
    q: int = 4
    k: int = 4
    f_s: float = 50.0

    def __post_init__(self):
        if self.q < 1 or not 1 <= self.k <= self.q:
            raise QuantizerError("need q >= 1 and 1 <= k <= q")
        if not self.f_s > 0 or not self.m > 0:
            raise QuantizerError("f_s and m must be positive")

    @property
    def step_ms(self) -> float:
        return self.m * 1000.0 / self.f_s


def gray(v):
    v = np.asarray(v, dtype=np.int64)
    return v ^ (v >> 1)


def gray_bits(v, q: int) -> np.ndarray:
    """``(len(v), q)`` array of gray-coded words, most significant bit first."""
    g = np.atleast_1d(gray(v))
    shifts = np.arange(q - 1, -1, -1)
    return ((g[:, None] >> shifts) & 1).astype(np.uint8)


def ipi_values(ipi_ms, params: IpiParams) -> np.ndarray:
    # the tiny offset absorbs float error when IPIs sit exactly on the grid
    scaled = np.asarray(ipi_ms, dtype=float) / params.step_ms
    return np.floor(scaled + 1e-9).astype(np.int64) % (1 << params.q)


def ipi_bits(ipi_ms, params: IpiParams = IpiParams()) -> BitSequence:
    """Quantize intervals given in milliseconds: first ``k`` gray bits each."""
    ipi_ms = np.atleast_1d(np.asarray(ipi_ms, dtype=float))
    if ipi_ms.size == 0:
        raise QuantizerError("no intervals to quantize")
    words = gray_bits(ipi_values(ipi_ms, params), params.q)[:, : params.k]
    return BitSequence(words.ravel(), "ipi", params, {"ipi_ms": ipi_ms})


def ipi_quantize(strikes: HeelStrikes, params: IpiParams = IpiParams()) -> BitSequence:
    if len(strikes) < 2:
        raise QuantizerError("fewer than 2 heel strikes")
    ipi_ms = np.diff(np.asarray(strikes.indices, dtype=float)) * 1000.0 / params.f_s
    seq = ipi_bits(ipi_ms, params)
    seq.meta["strikes"] = np.asarray(strikes.indices)
    return seq
