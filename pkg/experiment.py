"""
Empirical side of the weighted prime-tuple bound.

For each x of the grid the weighted sum over n in (x, 2x] of the product of
primality indicators times w_n is computed exactly and compared with the
D-free and C-free right-hand sides; the ratio is the fitted constant.
The range is cut into fixed blocks whose partial sums are reduced in block
order, so results do not depend on the worker count.
"""
import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from cutoff import CutoffSpec
from errors import DomainError, ResourceError, SieveLabError
from integrals import IntegralEstimate, MONTE_CARLO, METHODS, integral_I
from numtheory import (
    DEFAULT_SEGMENT_SIZE,
    PrimalityRange,
    factorize,
    phi_int,
    prime_range,
)
from series import DEFAULT_PMAX, bar_y, singular_series
from services.block_pool import integer_blocks, ordered_fsum, run_blocks
from tuples import (
    SieveContext,
    build_context,
    corollary_regime,
    covering_prime,
    k_large_regime,
)
from weights import (
    DEFAULT_MAX_SUPPORT,
    MajorantTable,
    WeightTable,
    build_majorant,
    build_weight_table,
    majorant_block,
    weight_w_block,
)

logger = logging.getLogger("SieveLab.experiment")

CSV_HEADER = [
    "x", "lhs", "rhs_theorem_core", "rhs_corollary_core",
    "fitted_D", "majorant_violations", "runtime_ms",
]
DEFAULT_BLOCK_SIZE = 1 << 16
MAX_EQ_MODULUS = 10 ** 5
MAJORANT_TOLERANCE = 1e-12
BRUN_TITCHMARSH_SOFT_LIMIT = 3.0


class ExperimentConfig(BaseModel):
    """A validated experiment: tuple, moduli, grid and numerical budgets."""
    offsets: List[int]
    B: int = 1
    theta: float = 1.0 / 3.0
    R: Optional[float] = None
    x_grid: List[int]
    m: int = 1
    indices: List[int]
    integral_method: str = MONTE_CARLO
    integral_budget: int = Field(default=10 ** 6, gt=0)
    seed: int = Field(default=0, ge=0)
    series_pmax: int = DEFAULT_PMAX
    output: Optional[str] = None
    metadata_output: Optional[str] = None
    workers: int = 1
    block_size: int = Field(default=DEFAULT_BLOCK_SIZE, gt=0)
    segment_size: int = Field(default=DEFAULT_SEGMENT_SIZE, gt=0)
    max_support: int = Field(default=DEFAULT_MAX_SUPPORT, gt=0)
    record_runtime: bool = False
    db_url: Optional[str] = None

    @field_validator("offsets")
    @classmethod
    def check_offsets(cls, v):
        if not v:
            raise ValueError("offsets must not be empty")
        if v[0] < 0 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("offsets must be non-negative and strictly increasing")
        p = covering_prime(v)
        if p is not None:
            raise ValueError(f"inadmissible: residues mod {p} fully covered")
        return v

    @field_validator("B")
    @classmethod
    def check_B(cls, v):
        if v < 1 or not factorize(v).is_squarefree():
            raise ValueError(f"B must be a squarefree positive integer, got {v}")
        return v

    @field_validator("theta")
    @classmethod
    def check_theta(cls, v):
        if not 0 < v < 1:
            raise ValueError(f"theta must lie in (0, 1), got {v}")
        return v

    @field_validator("R")
    @classmethod
    def check_R(cls, v):
        if v is not None and v <= 1:
            raise ValueError(f"the level R must exceed 1, got {v}")
        return v

    @field_validator("x_grid")
    @classmethod
    def check_grid(cls, v):
        if not v:
            raise ValueError("x_grid must not be empty")
        if any(x < 2 for x in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("x_grid must be increasing with every x >= 2")
        return v

    @field_validator("integral_method")
    @classmethod
    def check_method(cls, v):
        if v not in METHODS:
            raise ValueError(f"integral_method must be one of {METHODS}")
        return v

    @field_validator("workers")
    @classmethod
    def check_workers(cls, v):
        if v < 1:
            raise ValueError("workers must be >= 1")
        return v

    @model_validator(mode="after")
    def check_indices(self):
        k = len(self.offsets)
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.m + 1 > k:
            raise ValueError(f"need m + 1 <= k, got m={self.m}, k={k}")
        idx = self.indices
        if len(idx) != self.m + 1:
            raise ValueError(f"expected {self.m + 1} indices, got {len(idx)}")
        if any(b <= a for a, b in zip(idx, idx[1:])) or idx[0] < 1 or idx[-1] > k:
            raise ValueError(f"indices must be strictly increasing within 1..{k}")
        return self

    @property
    def k(self) -> int:
        return len(self.offsets)


class ReportEntry(BaseModel):
    x: int
    lhs: float
    rhs_theorem_core: float
    rhs_corollary_core: float
    fitted_D: float
    majorant_violations: int = 0
    runtime_ms: int = 0


class ExperimentReport(BaseModel):
    rows: List[ReportEntry]
    metadata: Dict[str, Any]


def shared_primality(ctx: SieveContext, x: int, segment_size: int = DEFAULT_SEGMENT_SIZE) -> PrimalityRange:
    """Primality flags covering every L_i(n) for n in (x, 2x]."""
    return prime_range(x, 2 * x + ctx.offsets[-1], segment_size=segment_size)


def _indicator(prim: PrimalityRange, ctx: SieveContext, indices: Sequence[int], a: int, b: int) -> np.ndarray:
    """prod_j 1_P(n + h_{i_j}) for n = a+1, ..., b."""
    mask = np.ones(b - a, dtype=bool)
    for i in indices:
        h = ctx.offsets[i - 1]
        mask &= prim.window(a + 1 + h, b + 1 + h)
    return mask


def empirical_lhs(
    ctx: SieveContext,
    table: WeightTable,
    x: int,
    indices: Sequence[int],
    primality: Optional[PrimalityRange] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1
) -> float:
    """sum over x < n <= 2x of prod_j 1_P(L_{i_j}(n)) * w_n."""
    if x < 2:
        raise DomainError(f"x must be >= 2, got {x}")
    prim = primality or shared_primality(ctx, x)

    def block_sum(block: Tuple[int, int]) -> float:
        a, b = block
        ns = np.arange(a + 1, b + 1, dtype=np.int64)[_indicator(prim, ctx, indices, a, b)]
        return math.fsum(weight_w_block(ctx, table, ns).tolist())

    return ordered_fsum(run_blocks(block_sum, integer_blocks(x, 2 * x, block_size), workers))


def empirical_lhs_by_class(
    ctx: SieveContext,
    table: WeightTable,
    x: int,
    indices: Sequence[int],
    primality: Optional[PrimalityRange] = None
) -> Dict[int, float]:
    """The same sum split by the class of n mod W; classes with no contribution are omitted."""
    prim = primality or shared_primality(ctx, x)
    ns = np.arange(x + 1, 2 * x + 1, dtype=np.int64)[_indicator(prim, ctx, indices, x, 2 * x)]
    values = weight_w_block(ctx, table, ns)
    W = ctx.W.value
    parts: Dict[int, List[float]] = {}
    for n, w in zip(ns.tolist(), values.tolist()):
        if w != 0.0:
            parts.setdefault(n % W, []).append(w)
    return {v0: math.fsum(parts[v0]) for v0 in sorted(parts)}


def _log_k_over_k(k: int) -> float:
    if k < 3:
        raise DomainError(f"the right-hand side needs k >= 3, got k={k}")
    return math.log(k) / k


def size_factor(ctx: SieveContext, x: int, m: int) -> float:
    """
    x (log x)^k expressed through the sieve level:
    x L^(k+m+1) / (log x)^(m+1) with L = (3/theta) log R.

    Equal to x (log x)^k when R = x^(theta/3). With R set directly only
    the (log x)^(m+1) factor follows x.
    """
    if ctx.R <= 1:
        raise DomainError(f"the level R must exceed 1, got {ctx.R}")
    if x < 2:
        raise DomainError(f"x must be >= 2, got {x}")
    level = 3.0 * math.log(ctx.R) / ctx.theta
    return x * level ** (ctx.k + m + 1) / math.log(x) ** (m + 1)


def corollary_rhs_core(ctx: SieveContext, x: int, m: int, I_value: float, series_B: float) -> float:
    """m^m (B/phi(B))^(k-1) S_B x (log x)^k (log k / k)^(m+1) I_k(F), x (log x)^k as in size_factor."""
    k = ctx.k
    ratio = _log_k_over_k(k)
    return (
        m ** m
        * ctx.B.totient_ratio() ** (k - 1)
        * series_B
        * size_factor(ctx, x, m)
        * ratio ** (m + 1)
        * I_value
    )


def theorem_rhs_core(
    ctx: SieveContext,
    x: int,
    m: int,
    indices: Sequence[int],
    I_value: float,
    series_B: float,
    bar_y_value: Optional[float] = None,
    p_max: int = DEFAULT_PMAX
) -> float:
    """
    y-bar^2 (phi(W)/W)^(k-1) (WB/phi(WB))^(k-2m-1) S_B (log k / k)^(m+1) I_k(F) x (log x)^k,
    with y-bar taken over the first m designated indices and x (log x)^k as in size_factor.
    """
    k = ctx.k
    ratio = _log_k_over_k(k)
    if bar_y_value is None:
        bar_y_value = bar_y(ctx, list(indices)[:m], p_max)
    return (
        bar_y_value ** 2
        * ctx.W.totient_ratio() ** (-(k - 1))
        * ctx.WB.totient_ratio() ** (k - 2 * m - 1)
        * series_B
        * ratio ** (m + 1)
        * I_value
        * size_factor(ctx, x, m)
    )


def _shifted_primes(x: int, h: int, primality: Optional[PrimalityRange]) -> np.ndarray:
    prim = primality or prime_range(x + h, 2 * x + h)
    return prim.window(x + 1 + h, 2 * x + 1 + h)


def eq_error(x: int, q: int, h: int, primality: Optional[PrimalityRange] = None) -> float:
    """max over a coprime to q of |#{n = a (q): n+h prime} - #{n: n+h prime} / phi(q)|, x < n <= 2x."""
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")
    if q > MAX_EQ_MODULUS:
        raise ResourceError(f"q={q} exceeds the diagnostic limit {MAX_EQ_MODULUS}")
    flags = _shifted_primes(x, h, primality)
    ns = np.arange(x + 1, 2 * x + 1, dtype=np.int64)[flags]
    counts = np.bincount(ns % q, minlength=q)
    total = int(flags.sum())
    reduced = np.gcd(np.arange(q), q) == 1
    mean = total / phi_int(q)
    return float(np.max(np.abs(counts[reduced] - mean)))


@dataclass(frozen=True)
class BrunTitchmarsh:
    count: int
    ratio: float


def brun_titchmarsh_check(x: int, h: int, primality: Optional[PrimalityRange] = None) -> BrunTitchmarsh:
    """Count of primes n + h with x < n <= 2x, and its ratio to x / log x."""
    if x < 10:
        raise DomainError(f"x must be >= 10, got {x}")
    count = int(_shifted_primes(x, h, primality).sum())
    ratio = count / (x / math.log(x))
    if x >= 10 ** 4 and ratio > BRUN_TITCHMARSH_SOFT_LIMIT:
        logger.warning(f"Shifted prime count ratio {ratio:.4f} above {BRUN_TITCHMARSH_SOFT_LIMIT} at x={x}")
    return BrunTitchmarsh(count=count, ratio=ratio)


def crude_bound(table: WeightTable, all_prime_count: int) -> float:
    """(sum_d |lambda_d|)^2 times the number of n with every form prime."""
    return table.abs_lambda_sum() ** 2 * all_prime_count


@dataclass(frozen=True)
class RangeScan:
    lhs: float
    majorant_violations: int
    tuple_hits: int


def scan_range(
    ctx: SieveContext,
    table: WeightTable,
    maj: MajorantTable,
    x: int,
    indices: Sequence[int],
    primality: PrimalityRange,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1
) -> RangeScan:
    """One pass over (x, 2x]: the weighted sum, majorant checks and the tuple count."""
    maj_indices = maj.indices

    def run_block(block: Tuple[int, int]) -> Tuple[float, int, int]:
        a, b = block
        ns = np.arange(a + 1, b + 1, dtype=np.int64)
        hits = _indicator(primality, ctx, indices, a, b)
        lhs = math.fsum(weight_w_block(ctx, table, ns[hits]).tolist())
        primes_m = ns[_indicator(primality, ctx, maj_indices, a, b)]
        values = majorant_block(maj, ctx, primes_m)
        violations = int(np.count_nonzero(values < 1.0 - MAJORANT_TOLERANCE))
        return lhs, violations, int(hits.sum())

    partials = run_blocks(run_block, integer_blocks(x, 2 * x, block_size), workers)
    return RangeScan(
        lhs=ordered_fsum(p[0] for p in partials),
        majorant_violations=sum(p[1] for p in partials),
        tuple_hits=sum(p[2] for p in partials),
    )


def _estimate_dict(est: IntegralEstimate) -> Dict[str, Any]:
    return {
        "value": est.value,
        "std_error": est.std_error,
        "method": est.method,
        "samples_or_nodes": est.samples_or_nodes,
        "seed": est.seed,
        "abs_error": est.abs_error,
    }


def _run_one_x(config: ExperimentConfig, x: int, I_est: IntegralEstimate) -> Tuple[ReportEntry, Dict[str, Any]]:
    started = time.perf_counter()
    B = factorize(config.B)
    ctx = build_context(config.offsets, B=B, theta=config.theta, x=x, R=config.R)
    table = build_weight_table(ctx, CutoffSpec(), config.series_pmax, config.max_support)
    maj_indices = config.indices[:config.m]
    y_bar = bar_y(ctx, maj_indices, config.series_pmax)
    maj = build_majorant(ctx, config.m, maj_indices, y_bar)
    series_B = singular_series(ctx, ctx.B, config.series_pmax)
    series_WB = singular_series(ctx, ctx.WB, config.series_pmax)

    prim = shared_primality(ctx, x, config.segment_size)
    scan = scan_range(ctx, table, maj, x, config.indices, prim, config.block_size, config.workers)

    corollary = corollary_rhs_core(ctx, x, config.m, I_est.value, series_B.value)
    theorem = theorem_rhs_core(
        ctx, x, config.m, config.indices, I_est.value, series_B.value, bar_y_value=y_bar
    )

    extras: Dict[str, Any] = {
        "R": ctx.R,
        "support_size": len(table.support),
        "support_degenerate": list(table.support) == [(1,) * ctx.k],
        "majorant_support_size": len(maj.support),
        "tilde_lambda_1": maj.tilde_lambda_1,
        "bar_y": y_bar,
        "singular_series_B": series_B.value,
        "singular_series_WB": series_WB.value,
        "series_tail_bound": series_WB.tail_bound,
        "k_large_regime": k_large_regime(ctx, x),
        "tuple_hits": scan.tuple_hits,
    }
    if config.m + 1 == ctx.k:
        bound = crude_bound(table, scan.tuple_hits)
        extras["crude_bound"] = bound
        if scan.lhs > bound * (1.0 + 1e-9):
            raise SieveLabError(f"weighted sum {scan.lhs} exceeds the crude bound {bound}")

    if scan.majorant_violations:
        logger.error(f"x={x}: {scan.majorant_violations} majorant violations")
    if not extras["k_large_regime"]:
        logger.warning(f"x={x}: k={ctx.k} lies outside 3 <= k <= (log x)^(1/5)")

    runtime = int((time.perf_counter() - started) * 1000) if config.record_runtime else 0
    row = ReportEntry(
        x=x,
        lhs=scan.lhs,
        rhs_theorem_core=theorem,
        rhs_corollary_core=corollary,
        fitted_D=scan.lhs / corollary,
        majorant_violations=scan.majorant_violations,
        runtime_ms=runtime,
    )
    logger.info(f"x={x}: lhs={row.lhs:.10g}, fitted_D={row.fitted_D:.6g}")
    return row, extras


def run_report(config: ExperimentConfig, results_db=None) -> ExperimentReport:
    """Run every x of the grid; a failure aborts the run with the failing x in the message."""
    if results_db is None and config.db_url:
        from db import ResultsDB
        results_db = ResultsDB(config.db_url)

    k = config.k
    I_est = integral_I(
        k, method=config.integral_method, budget=config.integral_budget,
        seed=config.seed, workers=config.workers,
    )
    ctx0 = build_context(config.offsets, B=factorize(config.B), theta=config.theta,
                         x=config.x_grid[0], R=config.R)

    rows: List[ReportEntry] = []
    per_x: Dict[str, Any] = {}
    for x in config.x_grid:
        try:
            row, extras = _run_one_x(config, x, I_est)
        except Exception as e:
            logger.exception(f"Experiment failed at x={x}")
            if results_db is not None:
                results_db.record_failure(config.model_dump(mode="json"), x, str(e))
            if isinstance(e, SieveLabError):
                raise type(e)(f"experiment failed at x={x}: {e}") from e
            raise SieveLabError(f"experiment failed at x={x}: {e}") from e
        rows.append(row)
        per_x[str(x)] = extras

    lhs_values = [r.lhs for r in rows]
    metadata = {
        "config": config.model_dump(mode="json"),
        "k": k,
        "W": str(ctx0.W),
        "corollary_regime": corollary_regime(ctx0),
        "integral_I": _estimate_dict(I_est),
        "lhs_nondecreasing": all(b >= a for a, b in zip(lhs_values, lhs_values[1:])),
        "per_x": per_x,
    }
    report = ExperimentReport(rows=rows, metadata=metadata)
    if results_db is not None:
        results_db.record_report(config.model_dump(mode="json"), report)
    return report


def metadata_path_for(csv_path: str) -> str:
    return csv_path + ".meta.json"


def write_csv_rows(report: ExperimentReport, out: TextIO):
    """Header and rows, floats in shortest round-trip form."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in report.rows:
        writer.writerow([
            row.x, repr(row.lhs), repr(row.rhs_theorem_core), repr(row.rhs_corollary_core),
            repr(row.fitted_D), row.majorant_violations, row.runtime_ms,
        ])


def write_report(report: ExperimentReport, csv_path: str, metadata_path: Optional[str] = None):
    """CSV rows plus the metadata as sorted JSON next to them."""
    directory = os.path.dirname(csv_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        write_csv_rows(report, f)
    with open(metadata_path or metadata_path_for(csv_path), "w", encoding="utf-8") as f:
        json.dump(report.metadata, f, sort_keys=True, indent=2)
        f.write("\n")
    logger.info(f"Report written to {csv_path}")


def read_report(csv_path: str, metadata_path: Optional[str] = None) -> ExperimentReport:
    with open(csv_path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != CSV_HEADER:
            raise DomainError(f"unexpected report header: {header}")
        rows = [
            ReportEntry(
                x=int(r[0]), lhs=float(r[1]), rhs_theorem_core=float(r[2]),
                rhs_corollary_core=float(r[3]), fitted_D=float(r[4]),
                majorant_violations=int(r[5]), runtime_ms=int(r[6]),
            )
            for r in reader
        ]
    with open(metadata_path or metadata_path_for(csv_path), encoding="utf-8") as f:
        metadata = json.load(f)
    return ExperimentReport(rows=rows, metadata=metadata)
