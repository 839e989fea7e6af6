from fractions import Fraction
from math import comb
from typing import NamedTuple

from ..bits import as_bits


class Probability(NamedTuple):
    exact: Fraction
    value: float


def adversary_success(n: int, u: int) -> Probability:
    """Chance that one uniformly random n-bit guess lands within Hamming
    distance u of the target: sum_{i<=u} C(n, i) / 2^n."""
    if n < 0 or not 0 <= u <= n:
        raise ValueError(f"need 0 <= u <= n, got n={n}, u={u}")
    exact = Fraction(sum(comb(n, i) for i in range(u + 1)), 2**n)
    return Probability(exact, float(exact))


def pake_stub(key_a, key_b) -> bool:
    """Stand-in for a password-authenticated key exchange.

    Succeeds iff both keys are bit-identical. It performs no cryptography and
    only models the all-or-nothing outcome such an exchange gives.
    """
    a, b = as_bits(key_a), as_bits(key_b)
    if a.size != b.size:
        raise ValueError(f"key length mismatch: {a.size} vs {b.size}")
    return bool((a == b).all())
