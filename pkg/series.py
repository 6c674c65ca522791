"""
Euler products over primes: the singular series, the P-product and the
constant y-bar built from it. Products are summed in log space with
math.fsum; tails beyond the truncation prime are bounded analytically.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from errors import DomainError
from numtheory import FactoredNat, small_primes
from tuples import SieveContext, omega

logger = logging.getLogger("SieveLab.series")

DEFAULT_PMAX = 10 ** 6

# sum_{p > P} 1/p^2 <= SUM_INV_SQUARE_TAIL / (P log P), from pi(t) < 1.25506 t / log t
SUM_INV_SQUARE_TAIL = 2.52


@dataclass(frozen=True)
class EulerProductResult:
    value: float
    truncation_prime: int
    tail_bound: float

    def __post_init__(self):
        if not self.value > 0:
            raise DomainError(f"Euler product must be positive, got {self.value}")


def _inverse_square_tail(p_max: int) -> float:
    return SUM_INV_SQUARE_TAIL / (p_max * math.log(p_max))


def _check_truncation(ctx: SieveContext, p_max: int, m: int = 0):
    largest = max(ctx.difference_primes, default=1)
    if p_max < largest:
        raise DomainError(
            f"p_max={p_max} is below the largest difference prime {largest}"
        )
    floor = max(2 * ctx.k * ctx.k, 2 * m * m, 2)
    if p_max < floor:
        raise DomainError(f"p_max={p_max} must be at least {floor} for the tail bound")


def _omega_array(ctx: SieveContext, primes: np.ndarray) -> np.ndarray:
    """omega(p) for an array of primes: k except at difference primes and primes of B."""
    values = np.full(primes.shape, float(ctx.k))
    for p in ctx.difference_primes:
        values[primes == p] = omega(ctx, p)
    for p in ctx.B.primes:
        values[primes == p] = 0.0
    return values


def singular_series(ctx: SieveContext, D: FactoredNat, p_max: int = DEFAULT_PMAX) -> EulerProductResult:
    """
    S_D = prod_{p not dividing D} (1 - omega(p)/p) (1 - 1/p)^(-k), truncated at p_max.
    Primes of B above p_max are folded in exactly since they are finite in number.
    """
    _check_truncation(ctx, p_max)
    k = ctx.k
    primes = small_primes(p_max)
    primes = primes[~np.isin(primes, np.array(D.primes, dtype=np.int64))]
    pf = primes.astype(float)
    terms = np.log1p(-_omega_array(ctx, primes) / pf) - k * np.log1p(-1.0 / pf)

    extra = [
        -k * math.log1p(-1.0 / p)
        for p in ctx.B.primes
        if p > p_max and not D.divisible_by(p)
    ]
    log_value = math.fsum(terms.tolist() + extra)
    tail = 0.0 if k == 1 else k * k * _inverse_square_tail(p_max)
    logger.debug(f"Singular series D={D}: log value {log_value:.12g}, tail {tail:.3g}")
    return EulerProductResult(value=math.exp(log_value), truncation_prime=p_max, tail_bound=tail)


def singular_series_factor(ctx: SieveContext, p: int) -> float:
    """The single local factor (1 - omega(p)/p)(1 - 1/p)^(-k)."""
    return (1.0 - omega(ctx, p) / p) * (1.0 - 1.0 / p) ** (-ctx.k)


def _check_indices(ctx: SieveContext, indices: Sequence[int]):
    idx = tuple(indices)
    if not idx:
        raise DomainError("at least one index is required")
    if len(set(idx)) != len(idx) or any(not 1 <= i <= ctx.k for i in idx):
        raise DomainError(f"indices must be distinct and within 1..{ctx.k}: {idx}")


def p_product(
    ctx: SieveContext,
    indices: Sequence[int],
    p_max: int = DEFAULT_PMAX,
    r: Optional[FactoredNat] = None
) -> EulerProductResult:
    """
    prod over p with n(p) >= 1 of (1 + n(p)/(p-1)) (1 - 1/p)^m, m = len(indices),
    where n(p) counts the indices j with p not dividing W_{i_j}. Passing r switches
    to the count of p not dividing r * W_{i_j}.
    """
    _check_indices(ctx, indices)
    m = len(indices)
    _check_truncation(ctx, p_max, m)
    primes = small_primes(p_max)
    counts = np.zeros(primes.shape, dtype=np.int64)
    r_primes = np.array(r.primes if r is not None else (), dtype=np.int64)
    for i in indices:
        divides = np.isin(primes, np.array(ctx.W_of(i).primes, dtype=np.int64))
        if r is not None:
            divides |= np.isin(primes, r_primes)
        counts += ~divides

    active = counts >= 1
    pf = primes[active].astype(float)
    n = counts[active].astype(float)
    terms = np.log1p(n / (pf - 1.0)) + m * np.log1p(-1.0 / pf)
    log_value = math.fsum(terms.tolist())
    # |log factor| <= m^2/(p-1)^2 and sum_{p>P} 1/(p-1)^2 <= 2 sum_{p>P} 1/p^2
    tail = m * m * 2.0 * _inverse_square_tail(p_max)
    return EulerProductResult(value=math.exp(log_value), truncation_prime=p_max, tail_bound=tail)


def modulus_gcd(ctx: SieveContext, indices: Sequence[int]) -> FactoredNat:
    g = ctx.W_of(indices[0])
    for i in indices[1:]:
        g = g.gcd(ctx.W_of(i))
    return g


def bar_y(ctx: SieveContext, indices: Sequence[int], p_max: int = DEFAULT_PMAX) -> float:
    """y-bar = (3m)^m (G/phi(G))^m / P with G the gcd of W_{i_1}, ..., W_{i_m}."""
    _check_indices(ctx, indices)
    m = len(indices)
    G = modulus_gcd(ctx, indices)
    P = p_product(ctx, indices, p_max)
    value = (3 * m) ** m * G.totient_ratio() ** m / P.value
    logger.info(f"bar_y for indices {tuple(indices)}: {value:.10g} (P={P.value:.10g})")
    return value


def bar_y_closed_form(ctx: SieveContext, indices: Sequence[int]) -> float:
    """The small-m shapes y-bar is bounded by: W/phi(W) for m=1, (G/phi(G))(L/phi(L)) for m=2."""
    _check_indices(ctx, indices)
    if len(indices) == 1:
        return ctx.W_of(indices[0]).totient_ratio()
    if len(indices) == 2:
        a, b = ctx.W_of(indices[0]), ctx.W_of(indices[1])
        return a.gcd(b).totient_ratio() * a.lcm(b).totient_ratio()
    raise DomainError(f"closed form known only for m <= 2, got m={len(indices)}")


def class_count(ctx: SieveContext) -> int:
    """phi_omega(W): the number of classes v0 mod W with every L_i(v0) coprime to W."""
    return math.prod(p - omega(ctx, p) for p in ctx.W.primes)


def class_count_from_series(ctx: SieveContext, p_max: int = DEFAULT_PMAX) -> float:
    """W * S_B / S_WB * (phi(W)/W)^k, which equals phi_omega(W)."""
    s_wb = singular_series(ctx, ctx.WB, p_max)
    s_b = singular_series(ctx, ctx.B, p_max)
    log_value = math.fsum([
        sum(math.log(p) for p in ctx.W.primes),
        math.log(s_b.value),
        -math.log(s_wb.value),
        -ctx.k * math.log(ctx.W.totient_ratio()),
    ])
    return math.exp(log_value)
