"""End-to-end pairing pipelines: two devices, one quantization scheme.

Each scheme turns a pair of recordings into the two fingerprints the
devices end up with and whether they agree on a key. Device A initiates:
it publishes its SAPHE seed, BANDANA cycle choice and so on.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .bits import derive_seed
from .fuzzy import DEFAULT_CODE, CodeParams, DecommitFailure, commit, decommit
from .ingest import AccelSeries
from .quantizers import (
    BandanaParams,
    IpiParams,
    QuantizerError,
    SapheParams,
    WalkieTalkieParams,
    bandana_quantize,
    bandana_select,
    ipi_quantize,
    saphe_quantize,
    saphe_thresholds,
    wt_preprocess,
    wt_privacy_amplify,
    wt_quantize,
    wt_reconcile,
)
from .signal import SignalError, bandpass, detect_heel_strikes, gravity_align

SCHEME_NAMES = ("saphe", "walkie-talkie", "gait-key", "bandana", "bandana-mapping",
                "bandana-normalized", "ipi")

# the mapping variant halves the fingerprint to 16 bits, too short for (31,16,3)
SHORT_CODE = CodeParams(15, 5, 3)


@dataclass
class Pairing:
    fingerprint_a: np.ndarray
    fingerprint_b: np.ndarray
    success: bool
    aborted: bool = False
    detail: str = ""

    @property
    def similarity(self) -> float:
        n = min(len(self.fingerprint_a), len(self.fingerprint_b))
        if n == 0:
            return float("nan")
        return float(np.mean(self.fingerprint_a[:n] == self.fingerprint_b[:n]))


def _empty(detail):
    z = np.zeros(0, dtype=np.uint8)
    return Pairing(z, z, False, True, detail)


def _common(a: AccelSeries, b: AccelSeries):
    n = min(len(a), len(b))
    if n < len(a):
        a = replace(a, t=a.t[:n], acc=a.acc[:n])
    if n < len(b):
        b = replace(b, t=b.t[:n], acc=b.acc[:n])
    return a, b


class Scheme:
    name = "scheme"
    fuzzy = False

    def pair(self, a: AccelSeries, b: AccelSeries, seed: int = 0) -> Pairing:
        raise NotImplementedError

    def stream(self, series: AccelSeries, seed: int = 0) -> np.ndarray:
        """Key material one device derives from a recording on its own."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"scheme": self.name}


def saphe_signal(series: AccelSeries) -> AccelSeries:
    return bandpass(gravity_align(series))


class SapheScheme(Scheme):
    name = "saphe"

    def __init__(self, params: SapheParams = SapheParams()):
        self.params = params

    def describe(self):
        return {"scheme": self.name, "n_thresholds": self.params.n_thresholds,
                "range_g": self.params.range_g, "dynamic_range": self.params.dynamic_range}

    def _thresholds(self, sig, seed, label, duration):
        p = replace(self.params, seed=derive_seed(seed, "saphe", label))
        return saphe_thresholds(p, duration, (sig.z.min(), sig.z.max()))

    def pair(self, a, b, seed=0):
        a, b = _common(a, b)
        sa, sb = saphe_signal(a), saphe_signal(b)
        duration = min(sa.duration, sb.duration)
        ta = self._thresholds(sa, seed, "A", duration)
        tb = self._thresholds(sb, seed, "B", duration)
        # key = challenges on A's thresholds followed by those on B's
        fa = np.concatenate([saphe_quantize(sa, ta).bits, saphe_quantize(sa, tb).bits])
        fb = np.concatenate([saphe_quantize(sb, ta).bits, saphe_quantize(sb, tb).bits])
        return Pairing(fa, fb, bool(np.array_equal(fa, fb)))

    def stream(self, series, seed=0):
        sig = saphe_signal(series)
        return saphe_quantize(sig, self._thresholds(sig, seed, "A", sig.duration)).bits


class WalkieTalkieScheme(Scheme):
    name = "walkie-talkie"

    def __init__(self, params: WalkieTalkieParams = WalkieTalkieParams()):
        self.params = params
        if params.levels == 4:
            self.name = "gait-key"

    def describe(self):
        p = self.params
        return {"scheme": self.name, "alpha": p.alpha, "window": p.window, "epsilon": p.epsilon,
                "pa_window": p.pa_window, "levels": p.levels}

    def pair(self, a, b, seed=0):
        a, b = _common(a, b)
        try:
            qa = wt_quantize(wt_preprocess(a), self.params)
            qb = wt_quantize(wt_preprocess(b), self.params)
        except SignalError as exc:
            return _empty(str(exc))
        ra, rb = wt_reconcile(qa, qb, self.params, abort=False)
        overlap = ra.meta["overlap"]
        aborted = overlap <= 0.5 + self.params.epsilon
        success = False
        if not aborted and len(ra) >= 2 * self.params.pa_window:
            ka = wt_privacy_amplify(ra, self.params.pa_window).bits
            kb = wt_privacy_amplify(rb, self.params.pa_window).bits
            success = bool(np.array_equal(ka, kb))
        detail = f"overlap {overlap:.3f}" + (" (aborted)" if aborted else "")
        return Pairing(ra.bits, rb.bits, success, aborted, detail)

    def stream(self, series, seed=0):
        q = wt_quantize(wt_preprocess(series), self.params)
        if len(q) < 2 * self.params.pa_window:
            return q.bits
        return wt_privacy_amplify(q, self.params.pa_window).bits


class BandanaScheme(Scheme):
    name = "bandana"
    fuzzy = True

    def __init__(self, params: BandanaParams = BandanaParams(), code: CodeParams | None = None):
        self.params = params
        if code is None:
            code = DEFAULT_CODE if params.selection[0] >= DEFAULT_CODE.n else SHORT_CODE
        if code.n > params.selection[0]:
            raise ValueError(f"code length {code.n} exceeds the {params.selection[0]}-bit fingerprint")
        self.code = code
        if params.variant != "original":
            self.name = f"bandana-{params.variant}"

    def describe(self):
        return {"scheme": self.name, "variant": self.params.variant,
                "n_cycles": self.params.n_cycles, "code": [self.code.n, self.code.k, self.code.t]}

    def pair(self, a, b, seed=0):
        a, b = _common(a, b)
        p = replace(self.params, seed=derive_seed(seed, "bandana", "A"))
        try:
            qa = bandana_quantize(a, p)
            qb = bandana_quantize(b, p, keep_cycles=qa.meta["cycles"])
        except (SignalError, QuantizerError) as exc:
            return _empty(str(exc))
        fa, fb = bandana_select(qa, qb, p)
        return Pairing(fa.bits, fb.bits, _fuzzy_agree(fa.bits, fb.bits, self.code, seed))

    def stream(self, series, seed=0):
        """Fingerprints of consecutive blocks of n_cycles cycles, concatenated."""
        from .quantizers.bandana import bandana_from_cycles
        from .signal import mean_gait, z_cycles

        cycles, _ = z_cycles(series)
        stack = np.vstack([c.values for c in cycles])
        mean = mean_gait(cycles).values
        n = self.params.n_cycles
        out = []
        for i, start in enumerate(range(0, len(stack) - n + 1, n)):
            p = replace(self.params, seed=derive_seed(seed, "bandana", i))
            try:
                q = bandana_from_cycles(stack[start:], mean, p)
            except QuantizerError:
                break
            out.append(bandana_select(q, q, p)[0].bits)
        return np.concatenate(out) if out else np.zeros(0, dtype=np.uint8)


def ipi_strikes(series: AccelSeries):
    return detect_heel_strikes(bandpass(gravity_align(series)))


class IpiScheme(Scheme):
    name = "ipi"
    fuzzy = True

    def __init__(self, params: IpiParams = IpiParams(), code: CodeParams = DEFAULT_CODE,
                 fingerprint_bits: int = 32):
        self.params = params
        self.code = code
        self.fingerprint_bits = max(fingerprint_bits, code.n)

    def describe(self):
        p = self.params
        return {"scheme": self.name, "m": p.m, "q": p.q, "k": p.k, "f_s": p.f_s,
                "fingerprint_bits": self.fingerprint_bits,
                "code": [self.code.n, self.code.k, self.code.t]}

    def _fingerprint(self, series):
        p = replace(self.params, f_s=series.rate_hz)
        bits = ipi_quantize(ipi_strikes(series), p).bits
        if len(bits) < self.fingerprint_bits:
            n_int = math.ceil(self.fingerprint_bits / p.k)
            raise QuantizerError(f"need {n_int + 1} heel strikes for a {self.fingerprint_bits}-bit fingerprint")
        return bits[: self.fingerprint_bits]

    def pair(self, a, b, seed=0):
        a, b = _common(a, b)
        try:
            fa, fb = self._fingerprint(a), self._fingerprint(b)
        except (SignalError, QuantizerError) as exc:
            return _empty(str(exc))
        return Pairing(fa, fb, _fuzzy_agree(fa, fb, self.code, seed))

    def stream(self, series, seed=0):
        return ipi_quantize(ipi_strikes(series), replace(self.params, f_s=series.rate_hz)).bits


def _fuzzy_agree(fa, fb, code: CodeParams, seed: int) -> bool:
    if len(fa) < code.n:
        return False
    sketch, key = commit(fa[: code.n], code, derive_seed(seed, "commit"))
    try:
        return bool(np.array_equal(decommit(sketch, fb[: code.n]), key))
    except DecommitFailure:
        return False


def make_scheme(name: str, *, alpha=None, window=None, epsilon=None, levels=None,
                ipi_q=None, ipi_m=None, code: CodeParams | None = None,
                n_thresholds=None, dynamic_range=False) -> Scheme:
    """Build a scheme by name with optional parameter overrides."""
    if name == "saphe":
        kw = {"dynamic_range": dynamic_range}
        if n_thresholds:
            kw["n_thresholds"] = n_thresholds
        return SapheScheme(SapheParams(**kw))
    if name in ("walkie-talkie", "gait-key"):
        base = WalkieTalkieParams.gait_key() if name == "gait-key" else WalkieTalkieParams()
        over = {k: v for k, v in {"alpha": alpha, "window": window, "epsilon": epsilon,
                                  "levels": levels}.items() if v is not None}
        return WalkieTalkieScheme(replace(base, **over))
    if name.startswith("bandana"):
        variant = {"bandana": "original", "bandana-mapping": "mapping",
                   "bandana-normalized": "normalized"}.get(name)
        if variant is None:
            raise ValueError(f"unknown scheme {name!r}")
        return BandanaScheme(BandanaParams(variant=variant), code)
    if name == "ipi":
        over = {k: v for k, v in {"q": ipi_q, "m": ipi_m}.items() if v is not None}
        if "q" in over:
            over["k"] = over["q"]
        return IpiScheme(IpiParams(**over), code or DEFAULT_CODE)
    raise ValueError(f"unknown scheme {name!r}")
