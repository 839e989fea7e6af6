"""Adversaries: one-shot guessing odds, quantizer-specific boosts and
noise-modelled video impersonation."""

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .analysis import SCHEMA_VERSION
from .bits import derive_seed, trial_rng
from .fuzzy import Probability, adversary_success
from .ingest import STEP_NOISE_FRAC, TEMPO_RENEWAL, AccelSeries, NoiseModel, add_noise, cycle_periods
from .quantizers import BitSequence, IpiParams, WalkieTalkieParams, wt_privacy_amplify
from .quantizers.ipi import gray, ipi_values
from .quantizers.walkie_talkie import interleave
from .schemes import Scheme

EXACT_MATCH_SCHEMES = ("saphe", "walkie-talkie", "gait-key")
FUZZY_SCHEMES = ("bandana", "bandana-mapping", "bandana-normalized", "ipi")
BATCH = 1 << 15


class AttackError(ValueError):
    pass


def _describe(values) -> dict:
    v = np.asarray([x for x in values if x == x], dtype=float)  # drop NaN
    if v.size == 0:
        return {"n": 0, "mean": None, "sd": None, "median": None, "min": None, "max": None}
    return {"n": int(v.size), "mean": float(v.mean()), "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "median": float(np.median(v)), "min": float(v.min()), "max": float(v.max())}


@dataclass
class AttackOutcome:
    scheme: str
    attack: str
    trials: int
    success_rate: float
    similarity_distribution: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise AttackError("trials must be >= 1")
        if not 0.0 <= self.success_rate <= 1.0:
            raise AttackError("success_rate must lie in [0, 1]")

    @property
    def std_error(self) -> float:
        p = self.success_rate
        return float(np.sqrt(p * (1 - p) / self.trials))

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "report": "AttackOutcome", **asdict(self)}


def one_shot(scheme: str, key_bits: int, corrected_bits: int = 0) -> Probability:
    """Success odds of one uniform guess against an ``key_bits`` fingerprint
    that tolerates ``corrected_bits`` errors."""
    if scheme not in EXACT_MATCH_SCHEMES + FUZZY_SCHEMES:
        raise AttackError(f"unknown scheme {scheme!r}")
    if key_bits < 1 or not 0 <= corrected_bits <= key_bits:
        raise AttackError(f"invalid parameters: key_bits={key_bits}, corrected_bits={corrected_bits}")
    return adversary_success(key_bits, corrected_bits)


# --- Walkie-Talkie reconciliation leak --------------------------------------

def runs(indices) -> list:
    """Split sorted indices into maximal runs of consecutive values."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) != 1) + 1
    return np.split(idx, breaks)


def run_guess(indices, phase: int = 1) -> np.ndarray:
    """One bit per run of consecutive retained indices, alternating from ``phase``."""
    out = [np.full(len(r), (phase + i) % 2, dtype=np.uint8) for i, r in enumerate(runs(indices))]
    return np.concatenate(out) if out else np.zeros(0, dtype=np.uint8)


def wt_attack_once(victim: BitSequence, pa_window: int = 30) -> dict:
    """Guess the victim's key from its public retained indices alone.

    Every per-axis phase combination is tried and the best match kept.
    Without privacy amplification (fewer than ``2*pa_window`` bits) the guess is
    compared to the raw bits.
    """
    retained = victim.meta.get("retained") if victim.meta else None
    if not retained or sum(len(r) for r in retained) == 0:
        raise AttackError("victim carries no retained indices")
    n_axes = len(retained)
    amplify = len(victim) >= 2 * pa_window
    target = wt_privacy_amplify(victim, pa_window).bits if amplify else victim.bits
    best, best_guess = -1.0, None
    for mask in range(1 << n_axes):
        phases = [(mask >> a) & 1 for a in range(n_axes)]
        guess = interleave([run_guess(r, p)[:, None] for r, p in zip(retained, phases)])
        key = wt_privacy_amplify(guess, pa_window).bits if amplify else guess
        sim = float(np.mean(key == target))
        if sim > best:
            best, best_guess = sim, key
    return {"similarity": best, "success": bool(np.array_equal(best_guess, target))}


def wt_reconciliation_attack(victims, params: WalkieTalkieParams = WalkieTalkieParams(),
                             trials: int | None = None, seed: int = 0) -> AttackOutcome:
    """Run the leak against one or more quantized victims.

    ``victims`` is a ``BitSequence`` (from ``wt_quantize`` or ``wt_reconcile``),
    a list of them, or a callable ``f(rng) -> BitSequence`` invoked ``trials``
    times with per-trial generators.
    """
    if callable(victims):
        n = trials or 1
        seqs = [victims(trial_rng(seed, i)) for i in range(n)]
    else:
        seqs = [victims] if isinstance(victims, BitSequence) else list(victims)
        if trials is not None:
            seqs = seqs[:trials]
    if not seqs:
        raise AttackError("no victims")
    res = [wt_attack_once(v, params.pa_window) for v in seqs]
    sims = [r["similarity"] for r in res]
    return AttackOutcome(
        "walkie-talkie" if params.levels == 2 else "gait-key", "reconciliation-leak", len(res),
        sum(r["success"] for r in res) / len(res), _describe(sims),
        {"window": params.window, "alpha": params.alpha},
    )


def wt_window_sweep(victim_fn, windows, params: WalkieTalkieParams = WalkieTalkieParams(),
                    trials: int = 10, seed: int = 0) -> dict:
    """Mean attacker similarity per window size; ``victim_fn(rng, params)`` builds a victim."""
    out = {}
    for w in windows:
        p = replace(params, window=int(w))
        o = wt_reconciliation_attack(lambda rng: victim_fn(rng, p), p, trials, derive_seed(seed, "window", w))
        out[int(w)] = o.similarity_distribution["mean"]
    return out


# --- BANDANA pattern bias ----------------------------------------------------

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def popcount(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        out += _POPCOUNT[x & 0xFF]
        x = x >> 8
    return out


def _check_hist(hist) -> tuple:
    if isinstance(hist, dict):
        width = {len(k) for k in hist}
        if len(width) != 1:
            raise AttackError("histogram keys must share one width")
        w = width.pop()
        p = np.zeros(1 << w)
        for k, v in hist.items():
            p[int(k, 2)] = v
    else:
        p = np.asarray(hist, dtype=float)
        w = int(np.log2(p.size))
        if 1 << w != p.size:
            raise AttackError("histogram size must be a power of two")
    if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-9):
        raise AttackError("histogram must be non-negative and sum to 1")
    return p / p.sum(), w


def bandana_pattern_attack(hist, code=(32, 8), trials: int = 100_000, seed: int = 0) -> AttackOutcome:
    """Attacker and victim both draw fingerprints as independent chunks from
    ``hist``; success when they lie within ``u`` bit errors."""
    p, width = _check_hist(hist)
    n_bits, u = code
    if n_bits % width:
        raise AttackError(f"fingerprint length {n_bits} is not a multiple of chunk width {width}")
    if trials < 1:
        raise AttackError("trials must be >= 1")
    per = n_bits // width
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    hits = 0
    for b, start in enumerate(range(0, trials, BATCH)):
        m = min(BATCH, trials - start)
        rng = trial_rng(seed, b)
        a = np.searchsorted(cdf, rng.random((m, per)), side="right")
        v = np.searchsorted(cdf, rng.random((m, per)), side="right")
        dist = popcount(a ^ v).sum(axis=1)
        hits += int(np.count_nonzero(dist <= u))
    rate = hits / trials
    baseline = adversary_success(n_bits, u).value
    return AttackOutcome("bandana", "pattern-bias", trials, rate, {},
                         {"baseline": baseline, "ratio": rate / baseline, "code": [n_bits, u]})


# --- IPI tempo bias ----------------------------------------------------------

def synth_ipis(mean_ms, sd_ms, n, rng, renewal=TEMPO_RENEWAL, step_noise_frac=STEP_NOISE_FRAC):
    """Inter-pulse intervals in ms with marginal ``N(mean_ms, sd_ms**2)`` and
    the same tempo persistence as the synthetic gait generator."""
    return cycle_periods(mean_ms, sd_ms, n, rng, renewal, step_noise_frac)


def ipi_chunk_changes(ipi_ms, params: IpiParams = IpiParams()) -> np.ndarray:
    """Counts of 0..k bit changes between consecutive k-bit words."""
    words = gray(ipi_values(ipi_ms, params)) >> (params.q - params.k)
    diff = popcount(words[1:] ^ words[:-1])
    return np.bincount(diff, minlength=params.k + 1)


def ipi_bias_attack(mean_ipi_ms: float, sd_ipi_ms: float, params: IpiParams = IpiParams(),
                    trials: int = 10_000, seed: int = 0, code=(32, 8),
                    renewal: float = TEMPO_RENEWAL, step_noise_frac: float = STEP_NOISE_FRAC) -> AttackOutcome:
    """Attacker draws IPI fingerprints from her own population model and
    compares them with independent victim draws from the same population."""
    if not sd_ipi_ms > 0 or not mean_ipi_ms > 0:
        raise AttackError("mean and sd must be positive")
    n_bits, u = code
    if n_bits % params.k or not 0 <= u <= n_bits or trials < 1:
        raise AttackError("invalid code or trial count")
    n_int = n_bits // params.k
    hits = 0
    sims = np.empty(trials)
    changes = np.zeros(params.k + 1, dtype=np.int64)
    chunk_match = 0
    for t in range(trials):
        rng = trial_rng(seed, t)
        v = synth_ipis(mean_ipi_ms, sd_ipi_ms, n_int, rng, renewal, step_noise_frac)
        a = synth_ipis(mean_ipi_ms, sd_ipi_ms, n_int, rng, renewal, step_noise_frac)
        wv = gray(ipi_values(v, params)) >> (params.q - params.k)
        wa = gray(ipi_values(a, params)) >> (params.q - params.k)
        dist = int(popcount(wv ^ wa).sum())
        sims[t] = 1 - dist / n_bits
        hits += dist <= u
        chunk_match += int(np.count_nonzero(wv == wa))
        changes += ipi_chunk_changes(v, params)
    frac = changes / changes.sum()
    baseline = adversary_success(n_bits, u).value
    rate = hits / trials
    return AttackOutcome(
        "ipi", "tempo-bias", trials, rate, _describe(sims),
        {"chunk_change_fractions": {str(i): float(f) for i, f in enumerate(frac)},
         "identical_chunk_fraction": float(frac[0]),
         "chunk_match_rate": chunk_match / (trials * n_int),
         "baseline": baseline, "ratio": rate / baseline, "code": [n_bits, u]},
    )


# --- video impersonation -----------------------------------------------------

def video_impersonation(victim, model: NoiseModel, scheme: Scheme, trials: int = 100,
                        seed: int = 0, map_fn=map) -> AttackOutcome:
    """Attacker signal = victim + noise from ``model``; pair it against the victim.

    ``victim`` is one series or a list of series cycled over trials.
    Aborted pairings count as failures.
    """
    if trials < 1:
        raise AttackError("trials must be >= 1")
    victims = [victim] if isinstance(victim, AccelSeries) else list(victim)
    if not victims:
        raise AttackError("no victim recordings")
    jobs = [(victims[t % len(victims)], model, scheme, derive_seed(seed, "video", t)) for t in range(trials)]
    results = list(map_fn(_video_trial, jobs))
    sims = [r[0] for r in results]
    return AttackOutcome(
        scheme.name, "video", trials, sum(r[1] for r in results) / trials, _describe(sims),
        {"noise": {"family": model.family, "mu": model.mu, "sigma": model.sigma, "level": model.level},
         "aborted": int(sum(r[2] for r in results))},
    )


def _video_trial(job):
    victim, model, scheme, s = job
    attacker = add_noise(victim, model, derive_seed(s, "noise"))
    result = scheme.pair(victim, attacker, derive_seed(s, "pair"))
    return result.similarity, bool(result.success and not result.aborted), result.aborted


def spearman(a, b) -> float:
    """Rank correlation with average ranks for ties."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if a.size < 3:
        raise ValueError("need at least 3 values")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("constant input has undefined ranks")
    ra, rb = rankdata(a), rankdata(b)
    return float(np.corrcoef(ra, rb)[0, 1])
