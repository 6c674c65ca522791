"""
Admissible tuples and the local apparatus of the sieve: omega(p), vanishing
residue classes, chosen indices and the moduli W, W_j, W_i'.
Indices are 1-based throughout, matching L_1, ..., L_k.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from errors import DomainError
from numtheory import FactoredNat, factorize, small_primes

logger = logging.getLogger("SieveLab.tuples")

DEFAULT_THETA = 1.0 / 3.0


def _validate_offsets(offsets: Sequence[int]) -> Tuple[int, ...]:
    if len(offsets) == 0:
        raise DomainError("offsets must not be empty")
    offs = tuple(int(h) for h in offsets)
    if offs[0] < 0:
        raise DomainError(f"offsets must be non-negative: {offs}")
    if any(b <= a for a, b in zip(offs, offs[1:])):
        raise DomainError(f"offsets must be strictly increasing: {offs}")
    return offs


def covering_prime(offsets: Sequence[int]) -> Optional[int]:
    """The smallest prime p <= k whose residues are all hit by the offsets, or None."""
    offs = _validate_offsets(offsets)
    for p in small_primes(len(offs)):
        p = int(p)
        if len({h % p for h in offs}) >= p:
            return p
    return None


def check_admissible(offsets: Sequence[int]) -> bool:
    return covering_prime(offsets) is None


def greedy_admissible(k: int, start: int = 0) -> Tuple[int, ...]:
    """Naive greedy tuple: keep appending the next integer that preserves admissibility."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    offs = [start]
    candidate = start + 1
    while len(offs) < k:
        # admissibility is only decided by primes <= the final k
        trial = offs + [candidate]
        if all(len({h % int(p) for h in trial}) < int(p) for p in small_primes(k)):
            offs = trial
        candidate += 1
    return tuple(offs)


@dataclass(frozen=True)
class AdmissibleTuple:
    offsets: Tuple[int, ...]

    def __post_init__(self):
        offs = _validate_offsets(self.offsets)
        p = covering_prime(offs)
        if p is not None:
            raise DomainError(f"inadmissible: residues mod {p} fully covered")
        object.__setattr__(self, "offsets", offs)

    @property
    def k(self) -> int:
        return len(self.offsets)

    def form(self, i: int, n: int) -> int:
        """L_i(n) = n + h_i."""
        return n + self.offsets[i - 1]

    def difference_product_primes(self) -> Tuple[int, ...]:
        primes = set()
        for a in range(self.k):
            for b in range(a + 1, self.k):
                primes.update(factorize(self.offsets[b] - self.offsets[a]).primes)
        return tuple(sorted(primes))


@dataclass(frozen=True)
class BadPrime:
    """A prime p not dividing WB with omega(p) < k, with its residues and chosen indices."""
    p: int
    residues: Tuple[int, ...]
    indices: Tuple[int, ...]


@dataclass(frozen=True)
class SieveContext:
    """Everything local the weights need; immutable once built."""
    admissible: AdmissibleTuple
    B: FactoredNat
    W: FactoredNat
    theta: float
    x: int
    R: float
    bad_primes: Tuple[BadPrime, ...]
    Wj: Tuple[FactoredNat, ...]
    difference_primes: Tuple[int, ...] = field(default=())

    @property
    def k(self) -> int:
        return self.admissible.k

    @property
    def offsets(self) -> Tuple[int, ...]:
        return self.admissible.offsets

    @property
    def WB(self) -> FactoredNat:
        return self.W * self.B

    def W_of(self, j: int) -> FactoredNat:
        """W_j for a 1-based index j."""
        return self.Wj[j - 1]

    def omega(self, p: int) -> int:
        return omega(self, p)

    def bad_prime(self, p: int) -> Optional[BadPrime]:
        for bp in self.bad_primes:
            if bp.p == p:
                return bp
        return None


def omega(ctx: SieveContext, p: int) -> int:
    """Number of residues n mod p with p | prod L_i(n); 0 when p | B."""
    if ctx.B.divisible_by(p):
        return 0
    return len({(-h) % p for h in ctx.offsets})


def _vanishing_residues(offsets: Sequence[int], p: int) -> List[int]:
    # residues are reported in 1..p, so the class of 0 is written as p
    return sorted({((-h) % p) or p for h in offsets})


def _chosen_for(offsets: Sequence[int], p: int) -> List[Tuple[int, int]]:
    chosen = []
    for r in _vanishing_residues(offsets, p):
        j = next(i for i, h in enumerate(offsets, start=1) if (r + h) % p == 0)
        chosen.append((r, j))
    return chosen


def chosen_indices(ctx: SieveContext, p: int) -> List[Tuple[int, int]]:
    """(r_{p,i}, j_{p,i}) pairs: each vanishing residue with the smallest index vanishing there."""
    if ctx.WB.divisible_by(p):
        raise DomainError(f"chosen indices undefined for p={p} dividing WB")
    return _chosen_for(ctx.offsets, p)


def build_context(
    offsets: Sequence[int],
    B: Optional[FactoredNat] = None,
    theta: float = DEFAULT_THETA,
    x: int = 10 ** 6,
    R: Optional[float] = None
) -> SieveContext:
    """
    Build W, the bad primes with their chosen indices, and W_1, ..., W_k.
    R defaults to x^(theta/3); an explicit R decouples support size from x.
    """
    adm = AdmissibleTuple(tuple(offsets))
    B = B or FactoredNat.one()
    if not B.is_squarefree():
        raise DomainError(f"B must be squarefree, got {B}")
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    if x < 1:
        raise DomainError(f"x must be positive, got {x}")
    if R is not None and R < 1:
        raise DomainError(f"R must be >= 1, got {R}")

    k = adm.k
    W = FactoredNat.from_primes(int(p) for p in small_primes(2 * k * k) if not B.divisible_by(int(p)))
    WB = W * B

    diff_primes = adm.difference_product_primes()
    bad: List[BadPrime] = []
    for p in diff_primes:
        if WB.divisible_by(p):
            continue
        pairs = _chosen_for(adm.offsets, p)
        bad.append(BadPrime(p=p, residues=tuple(r for r, _ in pairs), indices=tuple(j for _, j in pairs)))

    wj = []
    for j in range(1, k + 1):
        extra = [bp.p for bp in bad if j not in bp.indices]
        wj.append(WB * FactoredNat.from_primes(extra))

    R_value = float(R) if R is not None else float(x) ** (theta / 3.0)
    ctx = SieveContext(
        admissible=adm,
        B=B,
        W=W,
        theta=theta,
        x=x,
        R=R_value,
        bad_primes=tuple(bad),
        Wj=tuple(wj),
        difference_primes=diff_primes,
    )
    logger.info(
        f"Context built: k={k}, W={W}, B={B}, R={R_value:.4g}, "
        f"bad primes={[bp.p for bp in bad]}"
    )
    return ctx


@dataclass(frozen=True)
class DerivedModuli:
    wprime: Dict[int, FactoredNat]
    delta: FactoredNat


def derived_moduli(ctx: SieveContext, indices: Sequence[int]) -> DerivedModuli:
    """
    W_i' = rad(W_i * gcd of the differences h_{i_j} - h_i) for every i outside
    the designated indices, and Delta = product of those gcds.
    """
    idx = tuple(int(i) for i in indices)
    if len(idx) > ctx.k:
        raise DomainError(f"{len(idx)} designated indices exceed k={ctx.k}")
    if len(set(idx)) != len(idx) or any(not 1 <= i <= ctx.k for i in idx):
        raise DomainError(f"indices must be distinct and within 1..{ctx.k}: {idx}")

    wprime: Dict[int, FactoredNat] = {}
    delta = FactoredNat.one()
    for i in range(1, ctx.k + 1):
        if i in idx:
            continue
        h_i = ctx.offsets[i - 1]
        g = 0
        for j in idx:
            g = math.gcd(g, ctx.offsets[j - 1] - h_i)
        g = abs(g)
        gf = factorize(g) if g > 0 else FactoredNat.one()
        wprime[i] = (ctx.W_of(i) * gf).radical()
        delta = delta * gf
    return DerivedModuli(wprime=wprime, delta=delta)


def phi_omega(ctx: SieveContext, primes: Iterable[int]) -> int:
    """phi_omega(d) = prod_{p | d} (p - omega(p)) for squarefree d given by its primes."""
    return math.prod(p - omega(ctx, p) for p in primes)


def corollary_regime(ctx: SieveContext) -> bool:
    """True when every W_j equals WB, the situation of the simplified bound."""
    return not ctx.bad_primes


def k_large_regime(ctx: SieveContext, x: int) -> bool:
    """k >= 3 and k <= (log x)^(1/5), the range the asymptotic statement covers."""
    return ctx.k >= 3 and ctx.k <= math.log(x) ** 0.2
