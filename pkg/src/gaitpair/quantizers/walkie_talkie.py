"""Guard-band quantization (Walkie-Talkie) and its four-level Gait-Key variant."""

from dataclasses import dataclass, replace

import numpy as np

from ..ingest import AccelSeries
from ..signal import body_frame, lowpass
from .base import BitSequence, QuantizerError

# Gray-ordered 2-bit labels for the four Gait-Key bands, lowest band first.
GAITKEY_SYMBOLS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)


class ReconciliationAbort(Exception):
    """Too few shared positions: the pairing is aborted (possible impersonation)."""

    def __init__(self, overlap: float, limit: float):
        super().__init__(f"reconciliation overlap {overlap:.3f} <= {limit:.3f}; aborting")
        self.overlap = overlap
        self.limit = limit


@dataclass(frozen=True)
class WalkieTalkieParams:
    alpha: float = 0.8
    window: int = 10
    epsilon: float = 0.1
    pa_window: int = 30
    levels: int = 2

    def __post_init__(self):
        if not self.alpha > 0:
            raise QuantizerError("alpha must be positive")
        if self.window < 2:
            raise QuantizerError("window must hold at least 2 samples")
        if self.levels not in (2, 4):
            raise QuantizerError("levels must be 2 or 4")
        if self.pa_window < 1:
            raise QuantizerError("pa_window must be >= 1")

    @classmethod
    def gait_key(cls, **kw) -> "WalkieTalkieParams":
        kw = {"alpha": 0.9, "window": 50, "levels": 4, **kw}
        return cls(**kw)


def wt_preprocess(series: AccelSeries, cutoff_hz: float = 10.0) -> AccelSeries:
    """Body frame, 10 Hz low-pass, then each axis shifted to zero mean and
    scaled to unit Euclidean length over the whole recording."""
    s = lowpass(body_frame(series), cutoff_hz)
    acc = s.acc - s.acc.mean(axis=0)
    norms = np.linalg.norm(acc, axis=0)
    norms[norms == 0] = 1.0
    return s.with_acc(acc / norms)


def _quantize_axis(values, p: WalkieTalkieParams):
    n_win = len(values) // p.window
    idx_out, sym_out = [], []
    for w in range(n_win):
        seg = values[w * p.window:(w + 1) * p.window]
        mu, sd = seg.mean(), seg.std()
        if sd <= 1e-12 * max(1.0, abs(mu)):
            continue
        hi, lo = mu + p.alpha * sd, mu - p.alpha * sd
        base = w * p.window
        if p.levels == 2:
            keep = (seg > hi) | (seg < lo)
            idx_out.append(base + np.flatnonzero(keep))
            sym_out.append((seg[keep] > hi).astype(np.uint8)[:, None])
        else:
            band = np.searchsorted([lo, mu, hi], seg, side="right")
            idx_out.append(base + np.arange(len(seg)))
            sym_out.append(GAITKEY_SYMBOLS[band])
    width = 1 if p.levels == 2 else 2
    if not idx_out:
        return np.zeros(0, dtype=int), np.zeros((0, width), dtype=np.uint8)
    return np.concatenate(idx_out), np.concatenate(sym_out)


def interleave(axis_symbols) -> np.ndarray:
    """Round-robin over axes, one symbol at a time, skipping exhausted axes."""
    out = []
    longest = max((len(s) for s in axis_symbols), default=0)
    for i in range(longest):
        for s in axis_symbols:
            if i < len(s):
                out.append(s[i])
    if not out:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate(out).astype(np.uint8)


def wt_quantize(series: AccelSeries, params: WalkieTalkieParams = WalkieTalkieParams()) -> BitSequence:
    """Quantize every axis of an already preprocessed series.

    ``meta["retained"]`` holds each axis' kept sample indices, which the
    protocol sends in the clear during reconciliation.
    """
    retained, symbols = [], []
    for axis in range(series.acc.shape[1]):
        idx, sym = _quantize_axis(series.acc[:, axis], params)
        retained.append(idx)
        symbols.append(sym)
    scheme = "walkie-talkie" if params.levels == 2 else "gait-key"
    return BitSequence(
        interleave(symbols), scheme, params,
        {"retained": retained, "symbols": symbols, "n_samples": len(series)},
    )


def wt_quantize_values(values, params: WalkieTalkieParams = WalkieTalkieParams()) -> BitSequence:
    """Single-axis form, handy for inspecting one window by hand."""
    idx, sym = _quantize_axis(np.asarray(values, dtype=float), params)
    return BitSequence(sym.ravel(), "walkie-talkie", params, {"retained": [idx], "symbols": [sym]})


def wt_reconcile(a: BitSequence, b: BitSequence, params: WalkieTalkieParams = WalkieTalkieParams(),
                 abort: bool = True):
    """Keep only the positions both devices retained.

    Raises ``ReconciliationAbort`` when shared positions make up no more than
    ``0.5 + epsilon`` of the longer retained set (unless ``abort`` is False,
    in which case the overlap is only recorded in ``meta``).
    """
    ra, rb = a.meta["retained"], b.meta["retained"]
    if len(ra) != len(rb):
        raise QuantizerError("axis count mismatch")
    out_a, out_b, shared = [], [], []
    for ia, ib, sa, sb in zip(ra, rb, a.meta["symbols"], b.meta["symbols"]):
        common, pa, pb = np.intersect1d(ia, ib, assume_unique=True, return_indices=True)
        shared.append(common)
        out_a.append(sa[pa])
        out_b.append(sb[pb])
    n_shared = sum(len(c) for c in shared)
    denom = max(sum(len(i) for i in ra), sum(len(i) for i in rb))
    overlap = n_shared / denom if denom else 0.0
    limit = 0.5 + params.epsilon
    if abort and overlap <= limit:
        raise ReconciliationAbort(overlap, limit)
    meta = {"retained": shared, "overlap": overlap}
    return (
        replace(a, bits=interleave(out_a), meta={**meta, "symbols": out_a}),
        replace(b, bits=interleave(out_b), meta={**meta, "symbols": out_b}),
    )


def wt_privacy_amplify(bits, pa_window: int = 30) -> BitSequence:
    """XOR each ``pa_window``-bit window with the next; a partial tail is dropped."""
    seq = bits if isinstance(bits, BitSequence) else BitSequence(bits, "walkie-talkie")
    n_win = len(seq) // pa_window
    if n_win < 2:
        raise QuantizerError(f"privacy amplification needs >= {2 * pa_window} bits, got {len(seq)}")
    w = seq.bits[: n_win * pa_window].reshape(n_win, pa_window)
    out = (w[:-1] ^ w[1:]).ravel()
    return BitSequence(out, seq.scheme, seq.params, {**seq.meta, "amplified": True})
