"""
The sieve weight system: the support set, the y <-> lambda transform, the
weights w_n, the one-level majorant weights and the transformed variables
used to cross-check the error-term bounds at tiny scale.

Divisor vectors are plain tuples of ints. Every table is built once and is
read-only afterwards, so block workers may share it.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from cutoff import CutoffSpec, DEFAULT_CUTOFF, SieveFunctionParams, eval_family
from errors import DomainError, ResourceError
from numtheory import FactoredNat, small_primes
from series import DEFAULT_PMAX, singular_series
from tuples import SieveContext, omega

logger = logging.getLogger("SieveLab.weights")

DEFAULT_MAX_SUPPORT = 10 ** 7
DERIVED_SUPPORT_LIMIT = 10 ** 4

DivisorVector = Tuple[int, ...]


def _vector_primes(v: DivisorVector) -> List[int]:
    """Primes of the product of a squarefree vector whose components are products of distinct primes."""
    primes = []
    for c in v:
        if c > 1:
            primes.extend(FactoredNat.from_int(c).primes)
    return primes


def _is_squarefree_vector(v: DivisorVector) -> bool:
    primes = []
    for c in v:
        if c < 1:
            return False
        if c > 1:
            f = FactoredNat.from_int(c)
            if not f.is_squarefree():
                return False
            primes.extend(f.primes)
    return len(primes) == len(set(primes))


def _mobius_of(primes: Sequence[int]) -> int:
    return -1 if len(primes) % 2 else 1


def _divides(d: DivisorVector, r: DivisorVector) -> bool:
    return all(ri % di == 0 for di, ri in zip(d, r))


def _euler_phi(primes: Sequence[int]) -> int:
    return math.prod(p - 1 for p in primes)


def _sub_vectors(v: DivisorVector) -> Iterator[DivisorVector]:
    """All componentwise divisors of a squarefree vector."""
    per_component = []
    for c in v:
        primes = FactoredNat.from_int(c).primes if c > 1 else ()
        per_component.append([
            math.prod(subset)
            for size in range(len(primes) + 1)
            for subset in itertools.combinations(primes, size)
        ])
    return itertools.product(*per_component)


def allowed_primes(ctx: SieveContext, j: int) -> Tuple[int, ...]:
    """Primes below R that may appear in component j, i.e. those not dividing W_j."""
    limit = math.ceil(ctx.R) - 1
    wj = ctx.W_of(j)
    return tuple(int(p) for p in small_primes(limit) if not wj.divisible_by(int(p)))


def enumerate_support(ctx: SieveContext, max_support: int = DEFAULT_MAX_SUPPORT) -> List[DivisorVector]:
    """
    Every r with prod r_i < R, prod r_i squarefree and (r_j, W_j) = 1,
    in lexicographic order.
    """
    R = ctx.R
    k = ctx.k
    if R <= 1:
        return []
    allowed = [allowed_primes(ctx, j) for j in range(1, k + 1)]
    support: List[DivisorVector] = []

    def component_values(j: int, product: int, used: frozenset) -> List[Tuple[int, frozenset]]:
        # squarefree products of allowed primes keeping the running product below R
        out = [(1, used)]

        def extend(start: int, value: int, taken: frozenset):
            for idx in range(start, len(allowed[j])):
                p = allowed[j][idx]
                if product * value * p >= R:
                    break
                if p in taken:
                    continue
                out.append((value * p, taken | {p}))
                extend(idx + 1, value * p, taken | {p})

        extend(0, 1, used)
        return out

    def walk(j: int, prefix: List[int], product: int, used: frozenset):
        if j == k:
            support.append(tuple(prefix))
            if len(support) > max_support:
                raise ResourceError(f"support exceeds cap of {max_support} vectors at R={R:.6g}")
            return
        for value, taken in sorted(component_values(j, product, used), key=lambda t: t[0]):
            walk(j + 1, prefix + [value], product * value, taken)

    walk(0, [], 1, frozenset())
    logger.info(f"Support enumerated: {len(support)} vectors below R={R:.6g}")
    return support


def in_support(ctx: SieveContext, r: DivisorVector) -> bool:
    if len(r) != ctx.k or not _is_squarefree_vector(r):
        return False
    if math.prod(r) >= ctx.R:
        return False
    return all(ctx.W_of(j).coprime_to(c) for j, c in enumerate(r, start=1))


def phi_omega_vector(ctx: SieveContext, primes: Sequence[int]) -> int:
    return math.prod(p - omega(ctx, p) for p in primes)


@dataclass(frozen=True)
class WeightTable:
    support: Tuple[DivisorVector, ...]
    y_values: Dict[DivisorVector, float]
    lambda_values: Dict[DivisorVector, float]
    phi_omega_cache: Dict[int, int]
    scale: float
    allowed: Tuple[Tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def lambda_one(self) -> float:
        return self.lambda_values.get((1,) * len(self.allowed), 0.0)

    def abs_lambda_sum(self) -> float:
        return math.fsum(abs(v) for v in self.lambda_values.values())


def y_scale(ctx: SieveContext, p_max: int = DEFAULT_PMAX) -> float:
    """(WB/phi(WB))^k * S_WB, the common factor of every y_r."""
    series = singular_series(ctx, ctx.WB, p_max)
    return ctx.WB.totient_ratio() ** ctx.k * series.value


def _F_at(ctx: SieveContext, r: DivisorVector, params: SieveFunctionParams) -> float:
    log_R = math.log(ctx.R)
    return eval_family("F", [math.log(c) / log_R for c in r], params)


def y_of_r(
    ctx: SieveContext,
    r: DivisorVector,
    scale: Optional[float] = None,
    cutoff: CutoffSpec = DEFAULT_CUTOFF,
    p_max: int = DEFAULT_PMAX
) -> float:
    """y_r: 0 off the support, else scale * F(log r_1/log R, ..., log r_k/log R)."""
    if not in_support(ctx, r):
        return 0.0
    if scale is None:
        scale = y_scale(ctx, p_max)
    return scale * _F_at(ctx, r, SieveFunctionParams(ctx.k, cutoff))


def build_weight_table(
    ctx: SieveContext,
    cutoff: CutoffSpec = DEFAULT_CUTOFF,
    p_max: int = DEFAULT_PMAX,
    max_support: int = DEFAULT_MAX_SUPPORT
) -> WeightTable:
    support = enumerate_support(ctx, max_support)
    scale = y_scale(ctx, p_max)
    params = SieveFunctionParams(ctx.k, cutoff)

    phi_cache: Dict[int, int] = {}
    y_values: Dict[DivisorVector, float] = {}
    contributions: Dict[DivisorVector, List[float]] = {}
    for r in support:
        y = scale * _F_at(ctx, r, params)
        y_values[r] = y
        r_value = math.prod(r)
        if r_value not in phi_cache:
            phi_cache[r_value] = phi_omega_vector(ctx, _vector_primes(r))
        share = y / phi_cache[r_value]
        for d in _sub_vectors(r):
            contributions.setdefault(d, []).append(share)

    lambda_values: Dict[DivisorVector, float] = {}
    for d in sorted(contributions):
        primes = _vector_primes(d)
        lambda_values[d] = _mobius_of(primes) * math.prod(d) * math.fsum(contributions[d])

    logger.info(
        f"Weight table: {len(support)} support vectors, {len(lambda_values)} lambda keys, "
        f"scale {scale:.10g}"
    )
    return WeightTable(
        support=tuple(support),
        y_values=y_values,
        lambda_values=lambda_values,
        phi_omega_cache=phi_cache,
        scale=scale,
        allowed=tuple(allowed_primes(ctx, j) for j in range(1, ctx.k + 1)),
    )


def lambda_of_d(ctx: SieveContext, table: WeightTable, d: DivisorVector) -> float:
    if len(d) != ctx.k:
        raise DomainError(f"vector has {len(d)} components, expected k={ctx.k}")
    return table.lambda_values.get(tuple(d), 0.0)


def invert_lambda(ctx: SieveContext, table: WeightTable, r: DivisorVector) -> float:
    """mu(r) phi_omega(r) sum_{r | d} lambda_d / d, read back from the stored lambdas."""
    r = tuple(r)
    if len(r) != ctx.k:
        raise DomainError(f"vector has {len(r)} components, expected k={ctx.k}")
    primes = _vector_primes(r)
    total = math.fsum(
        value / math.prod(d)
        for d, value in table.lambda_values.items()
        if _divides(r, d)
    )
    return _mobius_of(primes) * phi_omega_vector(ctx, primes) * total


def _lambda_sum_at(ctx: SieveContext, table: WeightTable, n: int) -> float:
    """sum of lambda_d over d with d_i | L_i(n), for an n that passed the zero rule."""
    choices = []
    for j, h in enumerate(ctx.offsets):
        value = n + h
        hits = [p for p in table.allowed[j] if value % p == 0]
        choices.append(hits)
    return _lambda_sum_from_hits(table, choices)


def _lambda_sum_from_hits(table: WeightTable, choices: List[List[int]]) -> float:
    per_component = [
        [math.prod(subset) for size in range(len(hits) + 1) for subset in itertools.combinations(hits, size)]
        for hits in choices
    ]
    terms = []
    for d in itertools.product(*per_component):
        value = table.lambda_values.get(d)
        if value is not None:
            terms.append(value)
    return math.fsum(terms)


def zero_rule_mask(ctx: SieveContext, ns: np.ndarray) -> np.ndarray:
    """True where some prime of W divides some L_i(n)."""
    ns = np.asarray(ns, dtype=np.int64)
    mask = np.zeros(ns.shape, dtype=bool)
    for p in ctx.W.primes:
        for h in ctx.offsets:
            mask |= (ns + h) % p == 0
    return mask


def weight_w(ctx: SieveContext, table: WeightTable, n: int) -> float:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    for h in ctx.offsets:
        if not ctx.W.coprime_to(n + h):
            return 0.0
    s = _lambda_sum_at(ctx, table, n)
    return s * s


def weight_w_block(ctx: SieveContext, table: WeightTable, ns: np.ndarray) -> np.ndarray:
    """w_n for an array of n: the zero rule vectorized, divisibility by allowed primes via numpy."""
    ns = np.asarray(ns, dtype=np.int64)
    out = np.zeros(ns.shape, dtype=float)
    survivors = np.flatnonzero(~zero_rule_mask(ctx, ns))
    if survivors.size == 0:
        return out
    values = ns[survivors]
    hit_lists: List[List[List[int]]] = [[[] for _ in range(ctx.k)] for _ in range(values.size)]
    for j, h in enumerate(ctx.offsets):
        primes = np.array(table.allowed[j], dtype=np.int64)
        if primes.size == 0:
            continue
        rows, cols = np.nonzero((values + h)[:, None] % primes[None, :] == 0)
        for row, col in zip(rows.tolist(), cols.tolist()):
            hit_lists[row][j].append(int(primes[col]))
    for row, pos in enumerate(survivors.tolist()):
        s = _lambda_sum_from_hits(table, hit_lists[row])
        out[pos] = s * s
    return out


@dataclass(frozen=True)
class MajorantTable:
    m: int
    indices: Tuple[int, ...]
    support: Tuple[DivisorVector, ...]
    tilde_lambda: Dict[DivisorVector, float]
    tilde_lambda_1: float
    bar_y: float


def enumerate_majorant_support(ctx: SieveContext, indices: Sequence[int]) -> List[DivisorVector]:
    """e in N^m with prod e_j < R^(1/3), squarefree, (e_j, W_{i_j}) = 1."""
    limit = ctx.R ** (1.0 / 3.0)
    allowed = []
    for i in indices:
        wi = ctx.W_of(i)
        allowed.append([int(p) for p in small_primes(math.ceil(limit)) if p < limit and not wi.divisible_by(int(p))])
    out: List[DivisorVector] = []

    def walk(j: int, prefix: List[int], product: int, used: frozenset):
        if j == len(indices):
            out.append(tuple(prefix))
            return
        values = [(1, used)]

        def extend(start: int, value: int, taken: frozenset):
            for idx in range(start, len(allowed[j])):
                p = allowed[j][idx]
                if product * value * p >= limit:
                    break
                if p in taken:
                    continue
                values.append((value * p, taken | {p}))
                extend(idx + 1, value * p, taken | {p})

        extend(0, 1, used)
        for value, taken in sorted(values, key=lambda t: t[0]):
            walk(j + 1, prefix + [value], product * value, taken)

    walk(0, [], 1, frozenset())
    return out


def build_majorant(ctx: SieveContext, m: int, indices: Sequence[int], bar_y: float) -> MajorantTable:
    """tilde-lambda_e = phi(e) mu(e) sum_{e | r0} bar_y / phi(r0) over the majorant support."""
    idx = tuple(int(i) for i in indices)
    if m < 1 or len(idx) != m:
        raise DomainError(f"need m >= 1 indices, got m={m}, indices={idx}")
    if len(set(idx)) != m or any(not 1 <= i <= ctx.k for i in idx):
        raise DomainError(f"indices must be distinct and within 1..{ctx.k}: {idx}")
    if not bar_y > 0:
        raise DomainError(f"bar_y must be positive, got {bar_y}")

    support = enumerate_majorant_support(ctx, idx)
    contributions: Dict[DivisorVector, List[float]] = {}
    for r0 in support:
        share = bar_y / _euler_phi(_vector_primes(r0))
        for e in _sub_vectors(r0):
            contributions.setdefault(e, []).append(share)

    tilde = {}
    for e in sorted(contributions):
        primes = _vector_primes(e)
        tilde[e] = _euler_phi(primes) * _mobius_of(primes) * math.fsum(contributions[e])
    one = tilde[(1,) * m]
    logger.info(f"Majorant: {len(support)} vectors, tilde-lambda_1={one:.10g}")
    return MajorantTable(
        m=m, indices=idx, support=tuple(support), tilde_lambda=tilde, tilde_lambda_1=one, bar_y=bar_y
    )


def majorant_value(maj: MajorantTable, ctx: SieveContext, n: int) -> float:
    terms = [
        value
        for e, value in maj.tilde_lambda.items()
        if all((n + ctx.offsets[i - 1]) % ej == 0 for ej, i in zip(e, maj.indices))
    ]
    s = math.fsum(terms)
    return s * s / (maj.tilde_lambda_1 ** 2)


def majorant_block(maj: MajorantTable, ctx: SieveContext, ns: np.ndarray) -> np.ndarray:
    ns = np.asarray(ns, dtype=np.int64)
    total = np.zeros(ns.shape, dtype=float)
    # summed in the sorted key order of tilde_lambda
    for e in sorted(maj.tilde_lambda):
        mask = np.ones(ns.shape, dtype=bool)
        for ej, i in zip(e, maj.indices):
            if ej > 1:
                mask &= (ns + ctx.offsets[i - 1]) % ej == 0
        total += np.where(mask, maj.tilde_lambda[e], 0.0)
    return total * total / (maj.tilde_lambda_1 ** 2)


@dataclass(frozen=True)
class DerivedValues:
    y_joint: float
    y_r0: float
    y_m: float
    forced_zero: bool = False


def _check_derived(ctx: SieveContext, table: WeightTable, maj: MajorantTable,
                   r: DivisorVector, r0: DivisorVector, indices: Sequence[int]):
    if len(table.support) > DERIVED_SUPPORT_LIMIT:
        raise ResourceError(
            f"derived variables need support <= {DERIVED_SUPPORT_LIMIT}, got {len(table.support)}"
        )
    if len(r) != ctx.k:
        raise DomainError(f"r has {len(r)} components, expected k={ctx.k}")
    if any(r[i - 1] != 1 for i in indices):
        raise DomainError(f"r must be 1 at the designated indices {tuple(indices)}: {r}")
    if tuple(r0) not in maj.tilde_lambda or tuple(r0) not in set(maj.support):
        raise DomainError(f"r0={r0} is not in the majorant support")


def derived_y(
    ctx: SieveContext,
    table: WeightTable,
    maj: MajorantTable,
    r: DivisorVector,
    r0: DivisorVector,
    indices: Sequence[int]
) -> DerivedValues:
    """
    The three transformed variables by direct summation over the stored tables.
    indices are the m+1 designated forms; lambda_d enters only with d = 1 there.
    y_joint is taken as 0 when some component of r shares a prime with some component of r0.
    """
    r, r0 = tuple(r), tuple(r0)
    _check_derived(ctx, table, maj, r, r0, indices)
    designated = [i - 1 for i in indices]

    d_terms = [
        (d, value)
        for d, value in table.lambda_values.items()
        if _divides(r, d) and all(d[i] == 1 for i in designated)
    ]
    r_primes = _vector_primes(r)
    y_m = _mobius_of(r_primes) * phi_omega_vector(ctx, r_primes) * math.fsum(
        value / _euler_phi(_vector_primes(d)) for d, value in d_terms
    )

    e_terms = [(e, value) for e, value in maj.tilde_lambda.items() if _divides(r0, e)]
    r0_primes = _vector_primes(r0)
    y_r0 = _mobius_of(r0_primes) * _euler_phi(r0_primes) * math.fsum(
        value / _euler_phi(_vector_primes(e)) for e, value in e_terms
    )

    if set(r_primes) & set(r0_primes):
        logger.debug(f"y_joint forced to 0 for r={r}, r0={r0}")
        return DerivedValues(y_joint=0.0, y_r0=y_r0, y_m=y_m, forced_zero=True)

    joint_terms = []
    for d, lam in d_terms:
        d_primes = _vector_primes(d)
        for e, tl in e_terms:
            e_primes = _vector_primes(e)
            if set(d_primes) & set(e_primes):
                continue
            joint_terms.append(lam * tl / (_euler_phi(d_primes) * _euler_phi(e_primes)))
    all_primes = r_primes + r0_primes
    y_joint = _mobius_of(all_primes) * phi_omega_vector(ctx, all_primes) * math.fsum(joint_terms)
    return DerivedValues(y_joint=y_joint, y_r0=y_r0, y_m=y_m)


def h_factor(ctx: SieveContext, r: DivisorVector, indices: Sequence[int]) -> float:
    """prod over the m majorant indices of prod_{p | r, p not dividing W_{i_j}} (1 - 1/p)."""
    primes = _vector_primes(tuple(r))
    return math.prod(
        1.0 - 1.0 / p
        for i in indices
        for p in primes
        if not ctx.W_of(i).divisible_by(p)
    )


@dataclass(frozen=True)
class LemmaBoundFit:
    constant: float
    pairs: int
    skipped: int


def lemma_bound_constant(
    ctx: SieveContext,
    table: WeightTable,
    maj: MajorantTable,
    indices: Sequence[int]
) -> LemmaBoundFit:
    """
    Largest ratio |y_joint| / (|y_r0 y_m| prod_{p | r0} p/(p-1) / h(r)) over all
    coprime pairs r, r0 with r = 1 at the designated indices.
    """
    designated = [i - 1 for i in indices]
    candidates = [r for r in table.support if all(r[i] == 1 for i in designated)]
    best = 0.0
    pairs = 0
    skipped = 0
    for r in candidates:
        h = h_factor(ctx, r, maj.indices)
        for r0 in maj.support:
            if set(_vector_primes(r)) & set(_vector_primes(r0)):
                continue
            values = derived_y(ctx, table, maj, r, r0, indices)
            r0_factor = math.prod(p / (p - 1) for p in _vector_primes(r0))
            bound = abs(values.y_r0 * values.y_m) * r0_factor / h
            if bound == 0.0:
                skipped += 1
                continue
            pairs += 1
            best = max(best, abs(values.y_joint) / bound)
    logger.info(f"Transformed-variable bound: constant {best:.6g} over {pairs} pairs ({skipped} skipped)")
    return LemmaBoundFit(constant=best, pairs=pairs, skipped=skipped)


def local_sum_S_p(
    p: int,
    r: DivisorVector,
    r0: DivisorVector,
    s: DivisorVector,
    s0: DivisorVector,
    indices: Sequence[int]
) -> int:
    """
    The local factor at p of the four-vector divisor sum, by enumerating where p may sit
    in d | r, e | r0, d' | s, e' | s0. A prime occupies at most one slot across all four
    vectors, and d, d' stay 1 at the designated indices.
    """
    k = len(r)
    designated = {i - 1 for i in indices}

    def slots(vec: DivisorVector, vec0: DivisorVector) -> List[Optional[Tuple[str, int]]]:
        options: List[Optional[Tuple[str, int]]] = [None]
        options += [("d", i) for i, c in enumerate(vec) if c % p == 0 and i not in designated]
        options += [("e", j) for j, c in enumerate(vec0) if c % p == 0]
        return options

    total = 0
    for left in slots(r, r0):
        for right in slots(s, s0):
            if left is not None and right is not None and left != right:
                continue
            a = 0 if left is None else 1
            b = 0 if right is None else 1
            # the lcm over the occupied slot carries p exactly once
            lcm_phi = (p - 1) if (a or b) else 1
            term_num = ((p - 1) ** a) * ((p - 1) ** b) * ((-1) ** a) * ((-1) ** b)
            total += term_num // lcm_phi
    return total


def dump_table(table: WeightTable, out: TextIO):
    """One tab-separated line per support vector: components, y_r, lambda_r."""
    for r in table.support:
        fields = [str(c) for c in r]
        fields.append(repr(table.y_values[r]))
        fields.append(repr(table.lambda_values.get(r, 0.0)))
        out.write("\t".join(fields) + "\n")
