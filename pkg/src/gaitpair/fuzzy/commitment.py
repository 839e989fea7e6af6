"""Fuzzy commitment of a random key to a noisy fingerprint."""

from dataclasses import dataclass

import numpy as np

from ..bits import as_bits, digest_bits
from .bch import CodeError, CodeParams, DecodeFailure, get_code

DEFAULT_CODE = CodeParams(31, 16, 3)
WIDE_CODE = CodeParams(63, 16, 11)


class DecommitFailure(Exception):
    pass


@dataclass(frozen=True, eq=False)
class FuzzySketch:
    helper: np.ndarray
    code: CodeParams
    key_digest: bytes

    def __post_init__(self):
        object.__setattr__(self, "helper", as_bits(self.helper))
        if self.helper.size != self.code.n:
            raise CodeError("helper length must equal the code length")


def commit(fingerprint, code: CodeParams = DEFAULT_CODE, seed: int = 0):
    """Return ``(sketch, key)``; the key is k uniform bits drawn from ``seed``."""
    fp = as_bits(fingerprint)
    if fp.size != code.n:
        raise CodeError(f"fingerprint must be {code.n} bits, got {fp.size}")
    key = np.random.default_rng(seed).integers(0, 2, code.k, dtype=np.uint8)
    helper = fp ^ get_code(code).encode(key)
    return FuzzySketch(helper, code, digest_bits(key)), key


def decommit(sketch: FuzzySketch, fingerprint) -> np.ndarray:
    """Recover the committed key from a close fingerprint or raise ``DecommitFailure``."""
    fp = as_bits(fingerprint)
    if fp.size != sketch.code.n:
        raise CodeError(f"fingerprint must be {sketch.code.n} bits, got {fp.size}")
    try:
        key = get_code(sketch.code).decode(sketch.helper ^ fp)
    except DecodeFailure as exc:
        raise DecommitFailure(str(exc)) from None
    if digest_bits(key) != sketch.key_digest:
        raise DecommitFailure("key digest mismatch")
    return key
