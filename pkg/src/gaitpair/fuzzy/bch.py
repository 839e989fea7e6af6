"""Binary narrow-sense primitive BCH codes.

Polynomials over GF(2) are Python ints (bit i = coefficient of x^i).
Codewords are systematic: the k message bits come first, followed by the
n - k parity bits; bit 0 of the array is the highest-degree coefficient.
Decoding uses Berlekamp-Massey and a Chien search.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..bits import as_bits

# Primitive polynomials for GF(2^m).
PRIMITIVE_POLYS = {
    3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011, 7: 0b10001001,
    8: 0b100011101, 9: 0b1000010001, 10: 0b10000001001,
}


class CodeError(ValueError):
    pass


class DecodeFailure(Exception):
    """The received word is not within the correction radius of any codeword."""


class GF2m:
    def __init__(self, m: int):
        if m not in PRIMITIVE_POLYS:
            raise CodeError(f"unsupported field size 2^{m}")
        self.m = m
        self.order = (1 << m) - 1
        exp = np.zeros(2 * self.order, dtype=np.int64)
        log = np.full(1 << m, -1, dtype=np.int64)
        x = 1
        for i in range(self.order):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x >> m:
                x ^= PRIMITIVE_POLYS[m]
        exp[self.order:] = exp[: self.order]
        self.exp, self.log = exp, log

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of 0 in GF(2^m)")
        return int(self.exp[(self.order - self.log[a]) % self.order])

    def pow_alpha(self, e: int) -> int:
        return int(self.exp[e % self.order])


def _poly_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _poly_mod(a: int, g: int) -> int:
    dg = g.bit_length() - 1
    while a and a.bit_length() - 1 >= dg:
        a ^= g << (a.bit_length() - 1 - dg)
    return a


def _cyclotomic_coset(s: int, n: int) -> list[int]:
    coset, x = [], s % n
    while x not in coset:
        coset.append(x)
        x = (2 * x) % n
    return coset


def _minimal_poly(field: GF2m, coset) -> int:
    # prod (x - alpha^j) over the coset, computed in GF(2^m); coefficients land in GF(2)
    poly = [1]  # coefficients, lowest degree first
    for j in coset:
        root = field.pow_alpha(j)
        nxt = [0] * (len(poly) + 1)
        for i, c in enumerate(poly):
            nxt[i + 1] ^= c
            nxt[i] ^= field.mul(c, root)
        poly = nxt
    if any(c not in (0, 1) for c in poly):
        raise CodeError("minimal polynomial not binary")
    return sum(c << i for i, c in enumerate(poly))


@lru_cache(maxsize=None)
def generator_poly(m: int, t: int) -> int:
    field = GF2m(m)
    n = field.order
    g, seen = 1, set()
    for i in range(1, 2 * t + 1):
        if i % n in seen:
            continue
        coset = _cyclotomic_coset(i, n)
        seen.update(coset)
        g = _poly_mul(g, _minimal_poly(field, coset))
    return g


@dataclass(frozen=True)
class CodeParams:
    """A realizable BCH (n, k, t) triple with n = 2^m - 1."""

    n: int
    k: int
    t: int

    def __post_init__(self):
        if not (0 <= self.t and 1 <= self.k <= self.n):
            raise CodeError(f"invalid code parameters ({self.n},{self.k},{self.t})")
        m = (self.n + 1).bit_length() - 1
        if (1 << m) - 1 != self.n or m not in PRIMITIVE_POLYS:
            raise CodeError(f"n={self.n} is not 2^m - 1 for a supported m")
        if self.t == 0:
            if self.k != self.n:
                raise CodeError("t=0 requires k=n")
            return
        k_real = self.n - (generator_poly(m, self.t).bit_length() - 1)
        if k_real != self.k:
            raise CodeError(
                f"({self.n},{self.k},{self.t}) is not a BCH code; "
                f"correcting {self.t} errors at n={self.n} gives k={k_real}"
            )

    @property
    def m(self) -> int:
        return (self.n + 1).bit_length() - 1

    @classmethod
    def parse(cls, text: str) -> "CodeParams":
        """Parse ``"n,k,t"``."""
        try:
            n, k, t = (int(v) for v in text.split(","))
        except ValueError:
            raise CodeError(f"expected n,k,t, got {text!r}") from None
        return cls(n, k, t)


class BCHCode:
    def __init__(self, params: CodeParams):
        self.params = params
        self.n, self.k, self.t = params.n, params.k, params.t
        self.field = GF2m(params.m)
        self.g = generator_poly(params.m, self.t) if self.t else 1

    def _to_int(self, bits) -> int:
        v = 0
        for b in bits:
            v = (v << 1) | int(b)
        return v

    def _to_bits(self, v: int, width: int) -> np.ndarray:
        return np.array([(v >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)

    def encode(self, message) -> np.ndarray:
        msg = as_bits(message)
        if msg.size != self.k:
            raise CodeError(f"message must be {self.k} bits, got {msg.size}")
        shifted = self._to_int(msg) << (self.n - self.k)
        return self._to_bits(shifted ^ _poly_mod(shifted, self.g), self.n)

    def syndromes(self, word) -> list[int]:
        # word bit i is the coefficient of x^(n-1-i)
        pos = np.flatnonzero(as_bits(word))
        out = []
        for j in range(1, 2 * self.t + 1):
            s = 0
            for p in pos:
                s ^= self.field.pow_alpha(j * (self.n - 1 - int(p)))
            out.append(s)
        return out

    def _berlekamp_massey(self, synd):
        f = self.field
        sigma, prev = [1], [1]
        length, shift, prev_disc = 0, 1, 1
        for r in range(len(synd)):
            disc = synd[r]
            for i in range(1, length + 1):
                if i < len(sigma):
                    disc ^= f.mul(sigma[i], synd[r - i])
            if disc == 0:
                shift += 1
                continue
            coef = f.mul(disc, f.inv(prev_disc))
            update = [0] * shift + [f.mul(coef, c) for c in prev]
            new = [(sigma[i] if i < len(sigma) else 0) ^ (update[i] if i < len(update) else 0)
                   for i in range(max(len(sigma), len(update)))]
            if 2 * length <= r:
                prev, length, prev_disc, shift = sigma, r + 1 - length, disc, 1
            else:
                shift += 1
            sigma = new
        while len(sigma) > 1 and sigma[-1] == 0:
            sigma.pop()
        return sigma, length

    def decode(self, word) -> np.ndarray:
        """Return the k message bits, correcting up to t errors.

        Raises ``DecodeFailure`` when no codeword lies within distance t.
        """
        w = as_bits(word).copy()
        if w.size != self.n:
            raise CodeError(f"word must be {self.n} bits, got {w.size}")
        if self.t == 0:
            return w[: self.k]
        synd = self.syndromes(w)
        if any(synd):
            sigma, length = self._berlekamp_massey(synd)
            if len(sigma) - 1 != length or length > self.t:
                raise DecodeFailure("error locator degree exceeds correction capability")
            f = self.field
            errors = []
            for e in range(self.n):  # Chien search over locators alpha^e
                x_inv = f.pow_alpha(-e)
                acc, xp = 0, 1
                for c in sigma:
                    acc ^= f.mul(c, xp)
                    xp = f.mul(xp, x_inv)
                if acc == 0:
                    errors.append(e)
            if len(errors) != length:
                raise DecodeFailure("error locator has roots outside the field")
            for e in errors:
                w[self.n - 1 - e] ^= 1
            if any(self.syndromes(w)):
                raise DecodeFailure("residual syndrome after correction")
        return w[: self.k]


@lru_cache(maxsize=None)
def get_code(params: CodeParams) -> BCHCode:
    return BCHCode(params)


def bch_encode(message, code: CodeParams) -> np.ndarray:
    return get_code(code).encode(message)


def bch_decode(word, code: CodeParams) -> np.ndarray:
    return get_code(code).decode(word)
