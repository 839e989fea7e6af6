"""Mean-gait difference quantization (BANDANA) with the mapping and
normalization fixes."""

from dataclasses import dataclass, field, replace

import numpy as np

from ..ingest import AccelSeries
from ..signal import CYCLE_SAMPLES, mean_gait, z_cycles
from .base import BitSequence, QuantizerError

VARIANTS = ("original", "mapping", "normalized")


@dataclass(frozen=True)
class BandanaParams:
    bits_per_cycle: int = 4
    n_cycles: int = 12
    fingerprint_bits: int = 32
    discard_bits: int = 16
    variant: str = "original"
    rejection_table: dict | None = field(default=None, hash=False)
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise QuantizerError(f"unknown BANDANA variant {self.variant!r}")
        if self.bits_per_cycle * self.n_cycles != self.fingerprint_bits + self.discard_bits:
            raise QuantizerError("bits_per_cycle * n_cycles must equal fingerprint_bits + discard_bits")
        if CYCLE_SAMPLES % self.bits_per_cycle:
            raise QuantizerError(f"bits_per_cycle must divide {CYCLE_SAMPLES}")
        if self.variant == "mapping" and (self.bits_per_cycle % 2 or self.discard_bits % 2):
            raise QuantizerError("mapping variant needs even bit counts")

    @property
    def selection(self) -> tuple[int, int]:
        """(fingerprint bits, discarded bits) after any pair mapping."""
        if self.variant == "mapping":
            return self.fingerprint_bits // 2, self.discard_bits // 2
        return self.fingerprint_bits, self.discard_bits


def segment_bits(cycles, mean, bits_per_cycle: int = 4, normalize: bool = False):
    """Bits and reliabilities from cycle-minus-mean segment sums.

    ``cycles`` is ``(n, 40)``. A bit is 1 iff its segment sum is > 0 (an exact
    zero gives 0); reliability is the absolute sum.
    """
    cycles = np.atleast_2d(np.asarray(cycles, dtype=float))
    mean = np.asarray(mean, dtype=float)
    if normalize:
        cycles = cycles / _peak(cycles)[:, None]
        mean = mean / _peak(mean[None, :])[0]
    sums = (cycles - mean).reshape(len(cycles), bits_per_cycle, -1).sum(axis=2).ravel()
    return (sums > 0).astype(np.uint8), np.abs(sums)


def _peak(rows):
    p = np.abs(rows).max(axis=1)
    return np.where(p > 0, p, 1.0)


def map_pairs(bits, reliability=None):
    """01,11 -> 1 and 10,00 -> 0, i.e. keep the second bit of each pair;
    a pair's reliability is the sum of its members'."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 2:
        raise QuantizerError("pair mapping needs an even number of bits")
    mapped = bits.reshape(-1, 2)[:, 1].copy()
    if reliability is None:
        return mapped
    return mapped, np.asarray(reliability, dtype=float).reshape(-1, 2).sum(axis=1)


def rejection_table_from_histogram(hist) -> dict:
    """Discard probabilities flattening a pattern histogram: a pattern of
    frequency f survives with probability min_f / f."""
    freq = {k: v for k, v in hist.items() if v > 0}
    if not freq:
        raise QuantizerError("empty histogram")
    fmin = min(freq.values())
    return {k: 1.0 - fmin / v for k, v in freq.items()}


def _choose_cycles(bits, params: BandanaParams, n_avail: int):
    if params.rejection_table is None:
        return np.arange(params.n_cycles)
    rng = np.random.default_rng(params.seed)
    chosen = []
    per = params.bits_per_cycle
    for c in range(n_avail):
        pattern = "".join(map(str, bits[c * per:(c + 1) * per]))
        if rng.random() >= params.rejection_table.get(pattern, 0.0):
            chosen.append(c)
            if len(chosen) == params.n_cycles:
                break
    return np.array(chosen, dtype=int)


def bandana_from_cycles(cycles, mean, params: BandanaParams = BandanaParams(), keep_cycles=None) -> BitSequence:
    """Quantize resampled cycles against a mean gait.

    With a rejection table (normalized variant) cycles whose pattern is
    rejected are skipped; ``keep_cycles`` replays the partner's choice.
    """
    cycles = np.atleast_2d(np.asarray(cycles, dtype=float))
    normalize = params.variant == "normalized"
    raw_bits, raw_rel = segment_bits(cycles, mean, params.bits_per_cycle, normalize)
    if keep_cycles is None:
        keep_cycles = _choose_cycles(raw_bits, params, len(cycles))
    keep_cycles = np.asarray(keep_cycles, dtype=int)
    if len(keep_cycles) < params.n_cycles or keep_cycles.max(initial=-1) >= len(cycles):
        raise QuantizerError(
            f"insufficient cycles: need {params.n_cycles}, have {len(cycles)} "
            f"({len(keep_cycles)} usable)"
        )
    keep_cycles = keep_cycles[: params.n_cycles]
    per = params.bits_per_cycle
    pos = (keep_cycles[:, None] * per + np.arange(per)).ravel()
    bits, rel = raw_bits[pos], raw_rel[pos]
    if params.variant == "mapping":
        bits, rel = map_pairs(bits, rel)
    order = np.argsort(-rel, kind="stable")
    discarded = np.setdiff1d(np.arange(len(cycles)), keep_cycles)
    return BitSequence(bits, "bandana", params, {
        "reliability": rel,
        "order": order,
        "cycles": keep_cycles,
        "discarded_cycles": discarded,
        "raw_patterns": raw_bits.reshape(-1, per),
    })


def bandana_quantize(series: AccelSeries, params: BandanaParams = BandanaParams(), keep_cycles=None,
                     prefilter=None) -> BitSequence:
    """z axis -> gravity alignment -> 0.5-12 Hz band-pass -> 40-sample
    cycles -> mean gait -> segment-sum bits."""
    cycles, strikes = z_cycles(series, prefilter=prefilter)
    stack = np.vstack([c.values for c in cycles])
    seq = bandana_from_cycles(stack, mean_gait(cycles).values, params, keep_cycles)
    seq.meta["strikes"] = strikes.indices
    return seq


def _ranks(order):
    r = np.empty(len(order), dtype=int)
    r[np.asarray(order)] = np.arange(len(order))
    return r


def bandana_select(a: BitSequence, b: BitSequence, params: BandanaParams = BandanaParams()):
    """Drop the positions with the worst combined reliability rank from both.

    Combined rank is the sum of the position's rank in each ordering; on ties
    the lower position index is dropped first.
    """
    if len(a) != len(b):
        raise QuantizerError(f"length mismatch: {len(a)} vs {len(b)}")
    n_fp, n_drop = params.selection
    if len(a) != n_fp + n_drop:
        raise QuantizerError(f"expected {n_fp + n_drop} bits, got {len(a)}")
    combined = _ranks(a.meta["order"]) + _ranks(b.meta["order"])
    positions = np.arange(len(a))
    worst_first = np.lexsort((positions, -combined))
    keep = np.sort(worst_first[n_drop:])
    meta = {"kept_positions": keep}
    return (
        replace(a, bits=a.bits[keep], meta={**a.meta, **meta}),
        replace(b, bits=b.bits[keep], meta={**b.meta, **meta}),
    )
