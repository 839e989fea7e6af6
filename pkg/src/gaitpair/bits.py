"""Bit-level helpers shared by the codec, the exporters and the hashing code.

Packing convention: the first bit of a sequence is the most significant bit of
the first byte; a trailing partial byte is zero padded and the true length is
carried separately by the caller.
"""

import hashlib

import numpy as np


def as_bits(bits) -> np.ndarray:
    """Coerce any iterable of 0/1 values (or a ``"0101"`` string) to uint8."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits if c in "01"]
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValueError("bit values must be 0 or 1")
    return arr


def pack_bits(bits) -> bytes:
    return np.packbits(as_bits(bits), bitorder="big").tobytes()


def unpack_bits(data: bytes, n_bits: int | None = None) -> np.ndarray:
    arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="big")
    if n_bits is not None:
        if n_bits > arr.size:
            raise ValueError(f"requested {n_bits} bits from {arr.size} available")
        arr = arr[:n_bits]
    return arr


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in as_bits(bits))


def digest(data: bytes) -> bytes:
    """The single 256-bit hash used across the package."""
    return hashlib.sha256(data).digest()


def digest_bits(bits) -> bytes:
    arr = as_bits(bits)
    return digest(arr.size.to_bytes(8, "big") + pack_bits(arr))


def derive_seed(seed: int, *labels) -> int:
    """Derive an independent 63-bit sub-seed from a root seed and labels.

    Labels are hashed together with the root seed so that e.g.
    ``derive_seed(1, "attack", 7)`` never collides with ``derive_seed(1, "pair", 7)``.
    """
    h = hashlib.sha256(repr((int(seed),) + tuple(labels)).encode())
    return int.from_bytes(h.digest()[:8], "big") >> 1


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    # Per-trial streams keep Monte-Carlo loops partition-invariant.
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(trial)])
