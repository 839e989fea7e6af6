"""Candidate-key quantization with random acceleration/time thresholds."""

from dataclasses import dataclass

import numpy as np

from ..bits import digest
from ..ingest import GRAVITY, AccelSeries
from .base import BitSequence, QuantizerError


@dataclass(frozen=True)
class SapheParams:
    n_thresholds: int = 16
    range_g: float = 1.0
    seed: int = 0
    dynamic_range: bool = False

    def __post_init__(self):
        if self.n_thresholds < 1:
            raise QuantizerError("n_thresholds must be >= 1")
        if not self.range_g > 0:
            raise QuantizerError("range_g must be positive")


def saphe_thresholds(params: SapheParams, duration_s: float, value_range=None) -> np.ndarray:
    """``(n_thresholds, 2)`` array of (time_s, accel) points sorted by time.

    Values are uniform over +-range_g * g, or over ``value_range`` (the
    signal's observed min/max) when ``params.dynamic_range`` is set.
    """
    if not duration_s > 0:
        raise QuantizerError("duration must be positive")
    rng = np.random.default_rng(params.seed)
    times = rng.uniform(0.0, duration_s, params.n_thresholds)
    if params.dynamic_range:
        if value_range is None:
            raise QuantizerError("dynamic range needs the signal's value range")
        lo, hi = map(float, value_range)
    else:
        lo, hi = -params.range_g * GRAVITY, params.range_g * GRAVITY
    values = rng.uniform(lo, hi, params.n_thresholds)
    order = np.argsort(times, kind="stable")
    return np.column_stack([times[order], values[order]])


def saphe_quantize(series: AccelSeries, thresholds) -> BitSequence:
    """Bit 1 where the z value at a threshold's time lies above the threshold.

    Times are relative to the first sample and read at the nearest sample.
    """
    th = np.asarray(thresholds, dtype=float).reshape(-1, 2)
    rel = series.t - series.t[0]
    span = rel[-1] + 1.0 / series.rate_hz
    if np.any(th[:, 0] < 0) or np.any(th[:, 0] >= span):
        raise QuantizerError("threshold time outside the series span")
    if len(rel) == 1:
        idx = np.zeros(len(th), dtype=int)
    else:
        right = np.clip(np.searchsorted(rel, th[:, 0]), 1, len(rel) - 1)
        left = right - 1
        idx = np.where(rel[right] - th[:, 0] < th[:, 0] - rel[left], right, left)
    bits = (series.z[idx] > th[:, 1]).astype(np.uint8)
    return BitSequence(bits, "saphe", None, {"sample_indices": idx})


def saphe_commit(seed: int) -> bytes:
    return digest(int(seed).to_bytes(8, "big", signed=int(seed) < 0))
