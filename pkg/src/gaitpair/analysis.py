"""Key-quality measurements: similarity, random walks, positional bias and
ENT-style statistics, plus raw bit export for external test batteries."""

import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bits import as_bits, derive_seed, pack_bits
from .schemes import Scheme

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PI_COORD_BITS = 24


def hamming_similarity(a, b) -> float:
    """Fraction of positions where ``a`` and ``b`` agree."""
    a, b = as_bits(a), as_bits(b)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty bit sequences")
    return float(np.count_nonzero(a == b)) / a.size


# --- similarity study -------------------------------------------------------

@dataclass
class PairRecord:
    subject_a: str
    location_a: str
    subject_b: str
    location_b: str
    similarity: float | None
    kind: str
    aborted: bool = False
    success: bool = False


def _summary(values) -> dict:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return {"n": 0, "mean": None, "median": None, "q1": None, "q3": None, "min": None, "max": None}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"n": int(v.size), "mean": float(v.mean()), "median": float(med), "q1": float(q1),
            "q3": float(q3), "min": float(v.min()), "max": float(v.max())}


@dataclass
class SimilarityReport:
    pairs: list
    scheme: dict = field(default_factory=dict)
    seed: int = 0

    def _select(self, kind, location=None):
        return [p for p in self.pairs if p.kind == kind and not p.aborted
                and p.similarity is not None and (location is None or p.location_a == location)]

    @property
    def intra(self) -> dict:
        return _summary(p.similarity for p in self._select("intra"))

    @property
    def inter(self) -> dict:
        locations = sorted({p.location_a for p in self.pairs if p.kind == "inter"})
        return {loc: _summary(p.similarity for p in self._select("inter", loc)) for loc in locations}

    @property
    def inter_all(self) -> dict:
        return _summary(p.similarity for p in self._select("inter"))

    @property
    def aborted(self) -> dict:
        return {k: sum(p.aborted for p in self.pairs if p.kind == k) for k in ("intra", "inter")}

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "report": "SimilarityReport",
            "scheme": self.scheme,
            "seed": self.seed,
            "intra": self.intra,
            "inter": self.inter,
            "inter_all": self.inter_all,
            "aborted": self.aborted,
            "pairs": [asdict(p) for p in self.pairs],
        }


def _pair_job(job):
    scheme, kind, (sa, la, a), (sb, lb, b), seed = job
    result = scheme.pair(a, b, seed)
    sim = result.similarity
    return PairRecord(sa, la, sb, lb, None if math.isnan(sim) else sim, kind,
                      result.aborted, result.success)


def pair_jobs(dataset: dict, scheme: Scheme, seed: int = 0) -> list:
    """Every intra pair (same subject, two locations) and inter pair
    (same location, two subjects) as picklable work items."""
    subjects = sorted(dataset)
    if len(subjects) < 2:
        raise ValueError("need at least 2 subjects")
    for s in subjects:
        if len(dataset[s]) < 2:
            raise ValueError(f"subject {s!r} needs at least 2 locations")
    jobs = []
    for s in subjects:
        for la, lb in itertools.combinations(sorted(dataset[s]), 2):
            jobs.append((scheme, "intra", (s, la, dataset[s][la]), (s, lb, dataset[s][lb]),
                         derive_seed(seed, "pair", s, la, s, lb)))
    locations = sorted(set.intersection(*(set(dataset[s]) for s in subjects)))
    for loc in locations:
        for sa, sb in itertools.combinations(subjects, 2):
            jobs.append((scheme, "inter", (sa, loc, dataset[sa][loc]), (sb, loc, dataset[sb][loc]),
                         derive_seed(seed, "pair", sa, loc, sb, loc)))
    return jobs


def similarity_matrix(dataset: dict, scheme: Scheme, seed: int = 0, map_fn=map) -> SimilarityReport:
    """Pairwise fingerprint similarity over a ``{subject: {location: series}}`` corpus.

    ``map_fn`` may be an executor's ``map``; results are order-preserving so the
    report does not depend on how the pairs were distributed.
    """
    records = list(map_fn(_pair_job, pair_jobs(dataset, scheme, seed)))
    return SimilarityReport(records, scheme.describe(), seed)


# --- random walks and positional bias ---------------------------------------

def random_walk(bits) -> np.ndarray:
    """Displacement after each bit: 1 steps right, 0 steps left."""
    b = as_bits(bits)
    if b.size == 0:
        raise ValueError("empty bit sequence")
    return np.cumsum(2 * b.astype(np.int64) - 1)


def _key_matrix(keys) -> np.ndarray:
    rows = [as_bits(k) for k in keys]
    if not rows:
        raise ValueError("need at least one key")
    if len({r.size for r in rows}) != 1:
        raise ValueError("keys must have equal length")
    return np.vstack(rows)


def walk_heatmap(keys):
    """Count matrix ``(length, 2*length+1)``: row i counts keys whose walk sits
    at displacement ``d`` after bit i, column ``d + length``."""
    m = _key_matrix(keys)
    n_keys, length = m.shape
    paths = np.cumsum(2 * m.astype(np.int64) - 1, axis=1)
    heat = np.zeros((length, 2 * length + 1), dtype=np.int64)
    rows = np.broadcast_to(np.arange(length), paths.shape)
    np.add.at(heat, (rows.ravel(), (paths + length).ravel()), 1)
    return heat


def markov_profile(keys) -> np.ndarray:
    """Per-position fraction of keys holding a 1."""
    return _key_matrix(keys).mean(axis=0)


# --- ENT-style statistics ---------------------------------------------------

def _serial_correlation(x) -> float:
    # circular lag-1 correlation as computed by ENT; undefined for constant input
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return float("nan")
    s1, s2 = x.sum(), (x * x).sum()
    cross = (x * np.roll(x, -1)).sum()
    den = n * s2 - s1 * s1
    if den == 0:
        return float("nan")
    return float((n * cross - s1 * s1) / den)


def ent_report(bitstream) -> dict:
    """Entropy, byte chi-square, bit mean, Monte Carlo pi and serial correlation.

    Entropy and the arithmetic mean are bit-level. The chi-square statistic
    covers the 256 byte values of the packed stream. Pi uses consecutive
    24-bit x and y coordinates. ``serial_correlation`` is the ENT byte-level
    coefficient (NaN when the byte stream is constant);
    ``serial_correlation_bits`` is the same estimator over single bits.
    """
    b = as_bits(bitstream)
    n = b.size
    if n < 2 * 2 * PI_COORD_BITS:
        raise ValueError(f"need at least {4 * PI_COORD_BITS} bits, got {n}")
    if n < 10_000:
        log.warning("ent_report on %d bits; estimates are unstable below 10^4", n)
    p1 = float(b.mean())
    entropy = -sum(p * math.log2(p) for p in (p1, 1.0 - p1) if p > 0)

    n_bytes = n // 8
    data = np.packbits(b[: n_bytes * 8])
    counts = np.bincount(data, minlength=256)
    expected = n_bytes / 256
    chi2 = float(((counts - expected) ** 2).sum() / expected) if n_bytes else float("nan")

    per_point = 2 * PI_COORD_BITS
    n_pts = n // per_point
    pts = b[: n_pts * per_point].reshape(n_pts, 2, PI_COORD_BITS).astype(np.float64)
    weights = 2.0 ** -np.arange(1, PI_COORD_BITS + 1)
    xy = pts @ weights
    inside = np.count_nonzero((xy ** 2).sum(axis=1) <= 1.0)
    pi_est = 4.0 * inside / n_pts

    return {
        "n_bits": int(n),
        "entropy_bits_per_bit": float(entropy),
        "chi_square": chi2,
        "arithmetic_mean": p1,
        "monte_carlo_pi": float(pi_est),
        "monte_carlo_pi_error": float(abs(pi_est - math.pi) / math.pi),
        "serial_correlation": _serial_correlation(data),
        "serial_correlation_bits": _serial_correlation(b),
    }


# --- chunk statistics -------------------------------------------------------

def _chunks(keys, chunk_bits):
    if chunk_bits < 1:
        raise ValueError("chunk_bits must be >= 1")
    out = []
    for k in keys:
        k = as_bits(k)
        if k.size % chunk_bits:
            raise ValueError(f"key length {k.size} is not divisible by {chunk_bits}")
        w = k.reshape(-1, chunk_bits).astype(np.int64)
        out.append(w @ (1 << np.arange(chunk_bits - 1, -1, -1)))
    return out


def chunk_histogram(keys, chunk_bits: int = 4) -> dict:
    """Relative frequency of every ``chunk_bits``-wide pattern, keyed by its bit string."""
    chunks = _chunks(keys, chunk_bits)
    values = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    counts = np.bincount(values, minlength=1 << chunk_bits)
    total = counts.sum()
    freqs = counts / total if total else counts.astype(float)
    return {format(v, f"0{chunk_bits}b"): float(freqs[v]) for v in range(1 << chunk_bits)}


def chunk_repeat_rate(keys, chunk_bits: int = 4) -> float:
    """Fraction of adjacent chunk pairs (within a key) that are identical."""
    same = total = 0
    for c in _chunks(keys, chunk_bits):
        same += int(np.count_nonzero(c[1:] == c[:-1]))
        total += max(c.size - 1, 0)
    if total == 0:
        raise ValueError("no adjacent chunk pairs")
    return same / total


def export_bits(keys, path) -> Path:
    """Concatenate ``keys`` and write them as packed bytes (MSB first, zero-padded)."""
    parts = [as_bits(k) for k in keys]
    bits = np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
    path = Path(path)
    path.write_bytes(pack_bits(bits))
    return path


def split_keys(stream, key_bits: int = 128) -> list:
    """Cut a bit stream into whole ``key_bits`` keys, dropping the tail."""
    s = as_bits(stream)
    return [s[i:i + key_bits] for i in range(0, s.size - key_bits + 1, key_bits)]


@dataclass
class RandomnessReport:
    heatmap: np.ndarray
    final_distribution: dict
    markov: np.ndarray
    ent: dict
    n_keys: int
    key_bits: int
    scheme: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "report": "RandomnessReport",
            "scheme": self.scheme,
            "seed": self.seed,
            "n_keys": self.n_keys,
            "key_bits": self.key_bits,
            "heatmap": self.heatmap.tolist(),
            "final_distribution": self.final_distribution,
            "markov": self.markov.tolist(),
            "ent": self.ent,
        }


def randomness_report(keys, scheme: dict | None = None, seed: int = 0) -> RandomnessReport:
    m = _key_matrix(keys)
    n_keys, length = m.shape
    heat = walk_heatmap(m)
    terminal = 2 * m.sum(axis=1).astype(np.int64) - length
    values, counts = np.unique(terminal, return_counts=True)
    final = {str(int(v)): int(c) for v, c in zip(values, counts)}
    ent = ent_report(m.ravel()) if m.size >= 4 * PI_COORD_BITS else {}
    return RandomnessReport(heat, final, m.mean(axis=0), ent, n_keys, length, scheme or {}, seed)


def dumps(report: dict) -> str:
    """Stable JSON: sorted keys, NaN written as null."""
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, np.generic):
            return clean(o.item())
        return o
    return json.dumps(clean(report), sort_keys=True, indent=2) + "\n"
