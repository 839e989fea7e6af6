"""Preprocessing shared by the quantizers.

Orientation correction, zero-phase Butterworth filtering, heel-strike
detection, per-cycle resampling and the mean-gait template.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import signal as sps

from .ingest import AccelSeries

CYCLE_SAMPLES = 40
FILTER_ORDER = 2
STRIKE_LOWPASS_HZ = 3.0
STRIKE_SD_FACTOR = 0.5
STRIKE_REFRACTORY_S = 0.25


class SignalError(ValueError):
    pass


class InsufficientGait(SignalError):
    pass


@dataclass(frozen=True)
class GaitCycle:
    values: np.ndarray
    start_t: float
    end_t: float

    def __post_init__(self):
        if np.asarray(self.values).shape != (CYCLE_SAMPLES,):
            raise SignalError(f"a gait cycle holds exactly {CYCLE_SAMPLES} values")
        if not self.end_t > self.start_t:
            raise SignalError("cycle end must follow its start")


@dataclass(frozen=True)
class MeanGait:
    values: np.ndarray
    n_cycles: int


@dataclass(frozen=True)
class HeelStrikes:
    indices: np.ndarray
    kinds: tuple
    rate_hz: float

    def __len__(self):
        return len(self.indices)

    @property
    def intervals_ms(self) -> np.ndarray:
        return np.diff(self.indices) * 1000.0 / self.rate_hz


def _rotation_to_z(v) -> np.ndarray:
    """Rotation matrix taking unit vector ``v`` onto +z (Rodrigues)."""
    ez = np.array([0.0, 0.0, 1.0])
    axis = np.cross(v, ez)
    s = np.linalg.norm(axis)
    c = float(np.dot(v, ez))
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + k + k @ k * ((1 - c) / s**2)


def gravity_align(series: AccelSeries) -> AccelSeries:
    """Rotate so the mean acceleration vector points along +z."""
    m = series.acc.mean(axis=0)
    norm = np.linalg.norm(m)
    if norm < 1e-9:
        raise SignalError("zero mean acceleration (free fall): gravity direction undefined")
    r = _rotation_to_z(m / norm)
    return series.with_acc(series.acc @ r.T)


def body_frame(series: AccelSeries) -> AccelSeries:
    """Gravity alignment followed by a yaw turn putting the dominant
    horizontal motion on +y (walking direction).

    The sign is fixed by the first sample whose forward magnitude reaches half
    the maximum: it is made positive.
    """
    g = gravity_align(series)
    h = g.acc[:, :2]
    hc = h - h.mean(axis=0)
    cov = hc.T @ hc / max(len(hc), 1)
    if np.trace(cov) <= 1e-12:
        raise SignalError("no horizontal variance: walking direction undefined")
    _, vecs = np.linalg.eigh(cov)
    e = vecs[:, -1]
    fwd = h @ e
    mag = np.abs(fwd - fwd.mean())
    first = int(np.argmax(mag >= 0.5 * mag.max()))
    if fwd[first] - fwd.mean() < 0:
        e = -e
    rot = np.array([[e[1], -e[0]], [e[0], e[1]]])
    acc = g.acc.copy()
    acc[:, :2] = h @ rot.T
    return g.with_acc(acc)


def _filtfilt(series: AccelSeries, sos) -> AccelSeries:
    n = len(series)
    padlen = min(3 * (2 * len(sos) + 1), n - 1)
    if n < 2:
        raise SignalError("series too short to filter")
    out = sps.sosfiltfilt(sos, series.acc, axis=0, padlen=padlen)
    return series.with_acc(out)


def bandpass(series: AccelSeries, lo_hz: float = 0.5, hi_hz: float = 12.0) -> AccelSeries:
    """Zero-phase 2nd-order Butterworth band-pass on every axis."""
    nyq = series.rate_hz / 2
    if not 0 < lo_hz < hi_hz < nyq:
        raise SignalError(f"invalid band {lo_hz}-{hi_hz} Hz for rate {series.rate_hz} Hz")
    sos = sps.butter(FILTER_ORDER, [lo_hz, hi_hz], btype="bandpass", fs=series.rate_hz, output="sos")
    return _filtfilt(series, sos)


def lowpass(series: AccelSeries, cutoff_hz: float) -> AccelSeries:
    nyq = series.rate_hz / 2
    if not 0 < cutoff_hz < nyq:
        raise SignalError(f"invalid cutoff {cutoff_hz} Hz for rate {series.rate_hz} Hz")
    sos = sps.butter(FILTER_ORDER, cutoff_hz, btype="lowpass", fs=series.rate_hz, output="sos")
    return _filtfilt(series, sos)


def detect_heel_strikes(series: AccelSeries) -> HeelStrikes:
    """Local maxima of the 3 Hz low-passed z axis above mean + 0.5 sd,
    at least 0.25 s apart."""
    if series.duration < 2.0 - 1e-9:
        raise InsufficientGait("insufficient gait: need at least 2 s of data")
    z = lowpass(series, STRIKE_LOWPASS_HZ).z
    sd = z.std()
    if sd < 1e-9:
        raise InsufficientGait("insufficient gait: flat signal")
    thr = z.mean() + STRIKE_SD_FACTOR * sd
    dist = max(1, math.ceil(STRIKE_REFRACTORY_S * series.rate_hz))
    peaks, _ = sps.find_peaks(z, height=thr, distance=dist)
    if len(peaks) < 2:
        raise InsufficientGait("insufficient gait: fewer than 2 heel strikes")
    kinds = ("unknown",) + tuple("left" if i % 2 else "right" for i in range(1, len(peaks)))
    return HeelStrikes(peaks.astype(int), kinds, series.rate_hz)


def resample_cycle(raw, n: int = CYCLE_SAMPLES) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw.size < 2:
        raise SignalError("a cycle needs at least 2 raw samples")
    return np.interp(np.linspace(0, raw.size - 1, n), np.arange(raw.size), raw)


def segment_cycles(series: AccelSeries, strikes: HeelStrikes, axis: int = 2) -> list[GaitCycle]:
    """One 40-value cycle per consecutive strike pair (endpoints inclusive)."""
    idx = np.asarray(strikes.indices)
    if idx.size < 2:
        raise InsufficientGait("insufficient gait: fewer than 2 heel strikes")
    vals = series.acc[:, axis]
    return [
        GaitCycle(resample_cycle(vals[a:b + 1]), float(series.t[a]), float(series.t[b]))
        for a, b in zip(idx[:-1], idx[1:])
    ]


def mean_gait(cycles) -> MeanGait:
    cycles = list(cycles)
    if not cycles:
        raise SignalError("mean gait of zero cycles")
    stack = np.vstack([c.values for c in cycles])
    return MeanGait(stack.mean(axis=0), len(cycles))


Prefilter = Optional[Callable[[AccelSeries], AccelSeries]]


def z_cycles(series: AccelSeries, lo_hz: float = 0.5, hi_hz: float = 12.0, prefilter: Prefilter = None):
    """Gravity-aligned, band-passed vertical cycles and their strikes.

    ``prefilter`` runs first; it is the hook for source separation (e.g. ICA
    arm-swing removal), which is not shipped here.
    """
    if prefilter is not None:
        series = prefilter(series)
    aligned = gravity_align(series)
    strikes = detect_heel_strikes(aligned)
    filtered = bandpass(aligned, lo_hz, hi_hz)
    return segment_cycles(filtered, strikes), strikes
