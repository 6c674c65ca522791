"""
Exact integer utilities and prime generation.
Moduli such as W, W_j and B are kept as FactoredNat so products of many
small primes never have to be expanded on hot paths.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Mapping, Sequence, Tuple, Union

import numpy as np
from sympy import factorint

from errors import DomainError, ResourceError

logger = logging.getLogger("SieveLab.numtheory")

DEFAULT_SEGMENT_SIZE = 1 << 20
DEFAULT_MAX_RANGE_ENTRIES = 10 ** 9


def small_primes(limit: int) -> np.ndarray:
    """All primes <= limit, by a plain sieve of Eratosthenes."""
    if limit < 2:
        return np.array([], dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p: limit + 1: p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


@dataclass(frozen=True)
class FactoredNat:
    """
    A natural number held as sorted (prime, exponent) pairs.
    The empty tuple is 1.
    """
    factors: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        previous = 1
        for p, e in self.factors:
            if p <= previous or e < 1:
                raise DomainError(f"malformed factorization: {self.factors}")
            previous = p

    @classmethod
    def one(cls) -> "FactoredNat":
        return cls(())

    @classmethod
    def from_int(cls, n: int) -> "FactoredNat":
        return factorize(n)

    @classmethod
    def from_primes(cls, primes: Iterable[int]) -> "FactoredNat":
        """Squarefree product of the given distinct primes."""
        return cls(tuple((int(p), 1) for p in sorted(set(int(q) for q in primes))))

    @classmethod
    def from_dict(cls, exponents: Dict[int, int]) -> "FactoredNat":
        return cls(tuple(sorted((int(p), int(e)) for p, e in exponents.items() if e > 0)))

    @property
    def primes(self) -> Tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    @property
    def value(self) -> int:
        return math.prod(p ** e for p, e in self.factors)

    @cached_property
    def exponents(self) -> Mapping[int, int]:
        """prime -> exponent, built once per instance; do not mutate."""
        return dict(self.factors)

    def as_dict(self) -> Dict[int, int]:
        """A fresh, mutable copy of the exponents."""
        return dict(self.factors)

    def is_squarefree(self) -> bool:
        return all(e == 1 for _, e in self.factors)

    def divisible_by(self, p: int) -> bool:
        return p in self.exponents

    def coprime_to(self, n: int) -> bool:
        """True iff no prime of this number divides n; checked prime by prime."""
        return all(n % p for p in self.primes)

    def __mul__(self, other: "FactoredNat") -> "FactoredNat":
        merged = self.as_dict()
        for p, e in other.factors:
            merged[p] = merged.get(p, 0) + e
        return FactoredNat.from_dict(merged)

    def gcd(self, other: "FactoredNat") -> "FactoredNat":
        mine = self.exponents
        return FactoredNat.from_dict({p: min(e, mine[p]) for p, e in other.factors if p in mine})

    def lcm(self, other: "FactoredNat") -> "FactoredNat":
        merged = self.as_dict()
        for p, e in other.factors:
            merged[p] = max(merged.get(p, 0), e)
        return FactoredNat.from_dict(merged)

    def radical(self) -> "FactoredNat":
        return FactoredNat.from_primes(self.primes)

    def totient_ratio(self) -> float:
        """n / phi(n) as a float, without expanding n."""
        return math.prod(p / (p - 1) for p in self.primes)

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        return "*".join(str(p) if e == 1 else f"{p}^{e}" for p, e in self.factors)


@dataclass(frozen=True)
class PrimalityRange:
    """Primality flags for the integers in (lo, hi]; flags[i] refers to lo + 1 + i."""
    lo: int
    hi: int
    flags: np.ndarray = field(repr=False)

    def is_prime(self, n: int) -> bool:
        if not self.lo < n <= self.hi:
            raise DomainError(f"{n} outside sieved range ({self.lo}, {self.hi}]")
        return bool(self.flags[n - self.lo - 1])

    def window(self, start: int, stop: int) -> np.ndarray:
        """Flags for the integers start, start+1, ..., stop-1 (all inside the range)."""
        if start <= self.lo or stop - 1 > self.hi or stop < start:
            raise DomainError(f"window [{start}, {stop}) outside ({self.lo}, {self.hi}]")
        return self.flags[start - self.lo - 1: stop - self.lo - 1]

    def primes(self) -> np.ndarray:
        return np.flatnonzero(self.flags).astype(np.int64) + self.lo + 1

    def count(self) -> int:
        return int(np.count_nonzero(self.flags))


def prime_range(
    lo: int,
    hi: int,
    segment_size: int = DEFAULT_SEGMENT_SIZE,
    max_entries: int = DEFAULT_MAX_RANGE_ENTRIES
) -> PrimalityRange:
    """
    Segmented sieve of Eratosthenes over (lo, hi] with base primes <= sqrt(hi).
    Memory is proportional to hi - lo.
    """
    if lo < 0 or hi <= lo:
        raise DomainError(f"prime_range needs 0 <= lo < hi, got ({lo}, {hi}]")
    size = hi - lo
    if size > max_entries:
        raise ResourceError(f"range of {size} entries exceeds budget of {max_entries}")

    base = small_primes(math.isqrt(hi))
    flags = np.ones(size, dtype=bool)
    # integers 0 and 1 are not prime
    for n in (0, 1):
        if lo < n <= hi:
            flags[n - lo - 1] = False

    start = lo + 1
    while start <= hi:
        stop = min(start + segment_size, hi + 1)
        segment = flags[start - lo - 1: stop - lo - 1]
        for p in base:
            p = int(p)
            first = max(p * p, -(-start // p) * p)
            if first >= stop:
                if p * p >= stop:
                    break
                continue
            segment[first - start::p] = False
        start = stop

    logger.debug(f"Sieved ({lo}, {hi}] with {len(base)} base primes")
    return PrimalityRange(lo=lo, hi=hi, flags=flags)


def factorize(n: int) -> FactoredNat:
    """Exact factorization; the empty factor list is 1."""
    if n < 1:
        raise DomainError(f"cannot factorize {n}")
    return FactoredNat.from_dict(factorint(n))


def mobius(n: int) -> int:
    if n < 1:
        raise DomainError(f"mobius undefined at {n}")
    f = factorize(n)
    if not f.is_squarefree():
        return 0
    return -1 if len(f.factors) % 2 else 1


def totient(n: Union[FactoredNat, int]) -> FactoredNat:
    """Euler's phi, returned factored: prod p^(e-1) * (p - 1)."""
    if isinstance(n, int):
        n = factorize(n)
    result = FactoredNat.one()
    for p, e in n.factors:
        if e > 1:
            result = result * FactoredNat(((p, e - 1),))
        result = result * factorize(p - 1)
    return result


def phi_int(n: int) -> int:
    """phi(n) for a plain integer, via its factorization."""
    return totient(n).value


def vec_gcd_lcm(d: Sequence[int], e: Sequence[int]) -> Tuple[int, int]:
    """Products over components of gcd(d_i, e_i) and lcm(d_i, e_i)."""
    if len(d) != len(e):
        raise DomainError(f"vector lengths differ: {len(d)} vs {len(e)}")
    if any(c < 1 for c in d) or any(c < 1 for c in e):
        raise DomainError("vector components must be >= 1")
    gcd_product = math.prod(math.gcd(a, b) for a, b in zip(d, e))
    lcm_product = math.prod(math.lcm(a, b) for a, b in zip(d, e))
    return gcd_product, lcm_product
