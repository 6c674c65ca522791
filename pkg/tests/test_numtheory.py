"""
Test exact integer utilities and the segmented sieve.
"""
import math
import random

import pytest
from sympy import factorint, isprime, primerange, totient as sympy_totient

from errors import DomainError, ResourceError
from numtheory import (
    FactoredNat,
    factorize,
    mobius,
    phi_int,
    prime_range,
    small_primes,
    totient,
    vec_gcd_lcm,
)


def test_small_primes():
    """Test the plain sieve against sympy."""
    assert small_primes(1).tolist() == []
    assert small_primes(2).tolist() == [2]
    assert small_primes(1000).tolist() == list(primerange(2, 1001))


def test_factorize_and_value():
    """Test factorization agrees with sympy and reconstructs n."""
    for n in [1, 2, 12, 360, 510510, 2 ** 10 * 3 ** 4, 999983]:
        f = factorize(n)
        assert f.value == n
        assert f.as_dict() == {p: e for p, e in factorint(n).items()}

    assert factorize(1).factors == ()
    with pytest.raises(DomainError):
        factorize(0)


def test_factored_nat_arithmetic():
    """Test products, gcd, lcm and radical on factored forms."""
    a = factorize(2 ** 3 * 3 * 7)
    b = factorize(2 * 3 ** 2 * 5)

    assert (a * b).value == a.value * b.value
    assert a.gcd(b).value == 6
    assert a.lcm(b).value == 2 ** 3 * 3 ** 2 * 5 * 7
    assert a.radical().value == 42
    assert str(factorize(12)) == "2^2*3"
    assert str(FactoredNat.one()) == "1"


def test_factored_nat_exponent_map_is_built_once():
    """Test divisible_by reads one cached map and as_dict hands out independent copies."""
    f = factorize(2 ** 2 * 7 * 19)
    assert f.exponents is f.exponents
    assert f.exponents == {2: 2, 7: 1, 19: 1}
    assert [p for p in range(2, 40) if f.divisible_by(p)] == [2, 7, 19]

    copy = f.as_dict()
    copy[3] = 1
    assert not f.divisible_by(3)
    assert f.as_dict() == {2: 2, 7: 1, 19: 1}
    assert f == factorize(532)
    assert hash(f) == hash(factorize(532))


def test_factored_nat_rejects_malformed():
    """Test unsorted or zero-exponent factor lists are rejected."""
    with pytest.raises(DomainError):
        FactoredNat(((3, 1), (2, 1)))
    with pytest.raises(DomainError):
        FactoredNat(((2, 0),))


def test_coprimality_and_ratio():
    """Test coprime_to and the n/phi(n) ratio."""
    W = FactoredNat.from_primes([2, 3, 5, 7])
    assert W.coprime_to(11 * 13)
    assert not W.coprime_to(22)
    assert W.totient_ratio() == pytest.approx(210 / 48)


def test_mobius_and_totient():
    """Test mobius and Euler phi against sympy."""
    assert [mobius(n) for n in range(1, 11)] == [1, -1, -1, 0, -1, 1, -1, 0, 0, 1]
    for n in [1, 2, 9, 36, 97, 510510, 1000]:
        assert phi_int(n) == int(sympy_totient(n))
        assert totient(factorize(n)).value == int(sympy_totient(n))
    with pytest.raises(DomainError):
        mobius(0)


def test_mobius_and_totient_are_multiplicative():
    """Test mu(ab) = mu(a) mu(b) and phi(ab) = phi(a) phi(b) on random coprime pairs."""
    rng = random.Random(5)
    checked = 0
    while checked < 300:
        a, b = rng.randint(1, 10 ** 5), rng.randint(1, 10 ** 5)
        if math.gcd(a, b) != 1:
            continue
        assert mobius(a * b) == mobius(a) * mobius(b)
        assert phi_int(a * b) == phi_int(a) * phi_int(b)
        checked += 1


def test_totient_of_prime_powers():
    """Test phi(p^e) = p^(e-1) (p - 1) and mu(p^e) = 0 for e >= 2."""
    for p in (2, 3, 5, 7, 11, 101):
        for e in range(1, 6):
            assert phi_int(p ** e) == p ** (e - 1) * (p - 1)
            assert mobius(p ** e) == (-1 if e == 1 else 0)


def test_vec_gcd_lcm():
    """Test componentwise gcd and lcm products."""
    assert vec_gcd_lcm((6, 10), (4, 15)) == (2 * 5, 12 * 30)
    with pytest.raises(DomainError):
        vec_gcd_lcm((1, 2), (1,))
    with pytest.raises(DomainError):
        vec_gcd_lcm((0, 2), (1, 1))


def test_prime_range_matches_sympy():
    """Test the segmented sieve with small segments against isprime."""
    pr = prime_range(1000, 3000, segment_size=97)
    for n in range(1001, 3001):
        assert pr.is_prime(n) == isprime(n)
    assert pr.count() == len(list(primerange(1001, 3001)))


@pytest.mark.slow
def test_prime_range_exhaustive_to_a_million():
    """Test every prime up to 10^6 with segments that straddle many base-prime multiples."""
    pr = prime_range(0, 10 ** 6, segment_size=4099)
    assert pr.primes().tolist() == list(primerange(2, 10 ** 6 + 1))
    assert pr.count() == 78498


def test_prime_range_from_zero():
    """Test 0 and 1 are not flagged prime."""
    pr = prime_range(0, 30)
    assert pr.primes().tolist() == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


def test_prime_range_count_known_value():
    """Test pi(2*10^4) - pi(10^4) = 1033."""
    assert prime_range(10 ** 4, 2 * 10 ** 4).count() == 1033


def test_prime_range_window_and_errors():
    """Test windows and the domain/resource checks."""
    pr = prime_range(10, 40)
    assert pr.window(11, 14).tolist() == [True, False, True]
    with pytest.raises(DomainError):
        pr.window(5, 12)
    with pytest.raises(DomainError):
        pr.is_prime(41)
    with pytest.raises(DomainError):
        prime_range(10, 10)
    with pytest.raises(ResourceError):
        prime_range(0, 1000, max_entries=100)
