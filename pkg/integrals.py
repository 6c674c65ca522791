"""
I_k(F), L_k(F1) and L_k(F2).

One-dimensional pieces go through QUADPACK (scipy.integrate.quad). I_k(F) is
estimated either by nested quadrature (k <= 4) or by importance-sampled
Monte Carlo: each coordinate is drawn from a piecewise-constant density
shaped like the square of the per-coordinate factor, and the simplex cutoff
psi(sum t)^2 is left in the estimator.

L_k(F1) and L_k(F2) have exact product structure, so their quadrature
values are closed forms in five 1-D integrals; the Monte Carlo variant
samples the outer coordinates for cross-checking.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import integrate

from cutoff import (
    CutoffSpec,
    DEFAULT_CUTOFF,
    SieveFunctionParams,
    coordinate_factor,
    coordinate_factor_array,
    distinguished_factor,
    distinguished_factor_array,
    eval_F_batch,
    eval_family,
)
from errors import DomainError, UnsupportedMethodError
from services.block_pool import ordered_fsum, run_blocks

logger = logging.getLogger("SieveLab.integrals")

QUADRATURE = "nested-quadrature"
MONTE_CARLO = "monte-carlo"
METHODS = (QUADRATURE, MONTE_CARLO)

MAX_QUADRATURE_DIM = 4
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200
NQUAD_OPTS = {"epsabs": 1e-9, "epsrel": 1e-7, "limit": 100}

DEFAULT_CHUNK = 1 << 16
SAMPLER_CELLS = 4096
# relative floor keeping every cell of the sampler reachable
SAMPLER_FLOOR = 1e-12


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    std_error: float
    method: str
    samples_or_nodes: int
    seed: Optional[int] = None
    abs_error: float = 0.0

    def __post_init__(self):
        if self.value < 0 or self.std_error < 0:
            raise DomainError(f"integral estimates are non-negative: {self}")


def _quad(fn: Callable[[float], float], upper: float, breaks: Tuple[float, ...]) -> Tuple[float, float, int]:
    inner = [b for b in breaks if 0 < b < upper]
    value, err, info = integrate.quad(
        fn, 0.0, upper, points=inner or None, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
        limit=QUAD_LIMIT, full_output=1
    )[:3]
    return value, err, int(info["neval"])


@dataclass(frozen=True)
class FactorIntegrals:
    """The 1-D integrals every closed form is built from."""
    A: float    # int g
    G2: float   # int g^2
    C: float    # int H
    GH: float   # int g H
    H2: float   # int H^2
    abs_error: float
    nodes: int


@lru_cache(maxsize=256)
def factor_integrals(k: int, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> FactorIntegrals:
    params = SieveFunctionParams(k, cutoff)
    g_end = params.U * cutoff.support_end
    h_end = 2.0 * cutoff.support_end
    g_breaks = (params.U * cutoff.plateau_end,)
    h_breaks = (2.0 * cutoff.plateau_end,) + g_breaks + (g_end,)

    g = lambda t: coordinate_factor(t, params)
    h = lambda t: distinguished_factor(t, params)
    pieces = [
        _quad(g, g_end, g_breaks),
        _quad(lambda t: g(t) ** 2, g_end, g_breaks),
        _quad(h, h_end, h_breaks),
        _quad(lambda t: g(t) * h(t), min(g_end, h_end), h_breaks),
        _quad(lambda t: h(t) ** 2, h_end, h_breaks),
    ]
    values = [p[0] for p in pieces]
    return FactorIntegrals(
        *values,
        abs_error=sum(p[1] for p in pieces),
        nodes=sum(p[2] for p in pieces),
    )


def coordinate_integral(k: int, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> float:
    """int_0^inf psi(t/U_k)/(1 + T_k t) dt."""
    return factor_integrals(k, cutoff).A


def integral_F1_squared(k: int, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> float:
    """int F1^2 = (int g^2)^k, an upper bound for I_k(F)."""
    return factor_integrals(k, cutoff).G2 ** k


class PiecewiseSampler:
    """
    Piecewise-constant density on [0, end] with cell weights proportional to
    weight(midpoint) plus a small floor; its density is known exactly, so
    f/q is an unbiased estimator.
    """

    def __init__(self, weight: Callable[[np.ndarray], np.ndarray], end: float, cells: int = SAMPLER_CELLS):
        self.end = end
        self.cells = cells
        self.width = end / cells
        mids = (np.arange(cells) + 0.5) * self.width
        w = np.asarray(weight(mids), dtype=float)
        w = w + SAMPLER_FLOOR * w.max()
        self.mass = w / w.sum()
        self.cdf = np.cumsum(self.mass)
        self.cdf[-1] = 1.0
        self.density_per_cell = self.mass / self.width

    def sample(self, rng: np.random.Generator, shape: Tuple[int, ...]) -> Tuple[np.ndarray, np.ndarray]:
        """Points and their density values."""
        cell = np.searchsorted(self.cdf, rng.random(shape), side="right")
        cell = np.minimum(cell, self.cells - 1)
        points = (cell + rng.random(shape)) * self.width
        return points, self.density_per_cell[cell]


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed << 64) | chunk))


def _chunks(budget: int, chunk_size: int) -> List[Tuple[int, int]]:
    if budget < 1:
        raise DomainError(f"budget must be positive, got {budget}")
    return [(i, min(chunk_size, budget - i * chunk_size)) for i in range(-(-budget // chunk_size))]


def _mc_reduce(partials: List[Tuple[float, float]], budget: int) -> Tuple[float, float]:
    s1 = ordered_fsum(p[0] for p in partials)
    s2 = ordered_fsum(p[1] for p in partials)
    mean = s1 / budget
    if budget < 2:
        return mean, 0.0
    var = max(s2 / budget - mean * mean, 0.0) * budget / (budget - 1)
    return mean, math.sqrt(var / budget)


def integral_I(
    k: int,
    method: str = MONTE_CARLO,
    budget: int = 10 ** 6,
    seed: int = 0,
    cutoff: CutoffSpec = DEFAULT_CUTOFF,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK
) -> IntegralEstimate:
    """I_k(F) = int F^2 over [0, inf)^k."""
    params = SieveFunctionParams(k, cutoff)
    if method not in METHODS:
        raise UnsupportedMethodError(f"unknown method {method!r}, expected one of {METHODS}")
    end = params.U * cutoff.support_end

    if method == QUADRATURE:
        if k > MAX_QUADRATURE_DIM:
            raise UnsupportedMethodError(f"nested quadrature supports k <= {MAX_QUADRATURE_DIM}, got k={k}")
        opts = dict(NQUAD_OPTS, points=[params.U * cutoff.plateau_end])
        value, err, info = integrate.nquad(
            lambda *t: eval_family("F", t, params) ** 2,
            [[0.0, end]] * k,
            opts=[opts] * k,
            full_output=True,
        )
        logger.info(f"I_{k}(F) by nested quadrature: {value:.12g} +- {err:.2g}")
        return IntegralEstimate(
            value=max(value, 0.0), std_error=0.0, method=QUADRATURE,
            samples_or_nodes=int(info["neval"]), abs_error=err,
        )

    sampler = PiecewiseSampler(lambda t: coordinate_factor_array(t, params) ** 2, end)

    def run_chunk(chunk: Tuple[int, int]) -> Tuple[float, float]:
        index, size = chunk
        rng = _chunk_rng(seed, index)
        points, density = sampler.sample(rng, (size, k))
        ratio = eval_F_batch(points, params) ** 2 / np.prod(density, axis=1)
        return math.fsum(ratio.tolist()), math.fsum((ratio * ratio).tolist())

    partials = run_blocks(run_chunk, _chunks(budget, chunk_size), workers)
    mean, se = _mc_reduce(partials, budget)
    logger.info(f"I_{k}(F) by Monte Carlo: {mean:.10g} +- {se:.2g} ({budget} samples, seed {seed})")
    return IntegralEstimate(value=mean, std_error=se, method=MONTE_CARLO, samples_or_nodes=budget, seed=seed)


def _L_closed_form(kind: str, k: int, m: int, fi: FactorIntegrals) -> float:
    n = k - m - 1
    if kind == "F1":
        return fi.A ** (2 * (m + 1)) * fi.G2 ** n
    alpha = (m + 1) * fi.C * fi.A ** m
    beta = fi.A ** (m + 1)
    total = alpha * alpha * fi.G2 ** n
    if n >= 1:
        total += 2.0 * alpha * beta * n * fi.GH * fi.G2 ** (n - 1)
        total += beta * beta * n * fi.H2 * fi.G2 ** (n - 1)
    if n >= 2:
        total += beta * beta * n * (n - 1) * fi.GH ** 2 * fi.G2 ** (n - 2)
    return total


def integral_L(
    kind: str,
    k: int,
    m: int,
    method: str = QUADRATURE,
    budget: int = 10 ** 6,
    seed: int = 0,
    cutoff: CutoffSpec = DEFAULT_CUTOFF,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK
) -> IntegralEstimate:
    """
    Outer (k-m-1)-dimensional integral of the squared inner integral over the
    first m+1 coordinates. The inner integral of F1 is (int g)^(m+1) times the
    outer product; F2 adds the distinguished-coordinate terms.
    """
    if kind not in ("F1", "F2"):
        raise DomainError(f"kind must be F1 or F2, got {kind!r}")
    if m < 0 or m + 1 > k:
        raise DomainError(f"need 0 <= m and m + 1 <= k, got m={m}, k={k}")
    if method not in METHODS:
        raise UnsupportedMethodError(f"unknown method {method!r}, expected one of {METHODS}")
    params = SieveFunctionParams(k, cutoff)
    fi = factor_integrals(k, cutoff)
    n = k - m - 1

    if method == QUADRATURE or n == 0:
        value = _L_closed_form(kind, k, m, fi)
        logger.info(f"L_{k}({kind}) with m={m}: {value:.12g}")
        return IntegralEstimate(
            value=value, std_error=0.0, method=QUADRATURE,
            samples_or_nodes=fi.nodes, abs_error=fi.abs_error,
        )

    alpha = (m + 1) * fi.C * fi.A ** m
    beta = fi.A ** (m + 1)
    if kind == "F1":
        end = params.U * cutoff.support_end
        sampler = PiecewiseSampler(lambda t: coordinate_factor_array(t, params) ** 2, end)
    else:
        end = 2.0 * cutoff.support_end
        sampler = PiecewiseSampler(lambda t: distinguished_factor_array(t, params) ** 2, end)

    def run_chunk(chunk: Tuple[int, int]) -> Tuple[float, float]:
        index, size = chunk
        rng = _chunk_rng(seed, index)
        points, density = sampler.sample(rng, (size, n))
        g = coordinate_factor_array(points, params)
        prod_g = np.prod(g, axis=1)
        if kind == "F1":
            inner = beta * prod_g
        else:
            h = distinguished_factor_array(points, params)
            swapped = np.zeros(size)
            for j in range(n):
                others = np.prod(np.delete(g, j, axis=1), axis=1)
                swapped += h[:, j] * others
            inner = alpha * prod_g + beta * swapped
        ratio = inner ** 2 / np.prod(density, axis=1)
        return math.fsum(ratio.tolist()), math.fsum((ratio * ratio).tolist())

    partials = run_blocks(run_chunk, _chunks(budget, chunk_size), workers)
    mean, se = _mc_reduce(partials, budget)
    logger.info(f"L_{k}({kind}) with m={m} by Monte Carlo: {mean:.10g} +- {se:.2g}")
    return IntegralEstimate(value=mean, std_error=se, method=MONTE_CARLO, samples_or_nodes=budget, seed=seed)


def decay_ratio(k: int, m: int, I_value: float, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> float:
    """L_k(F1) / I_k(F)."""
    if I_value <= 0:
        raise DomainError(f"I_k(F) must be positive, got {I_value}")
    return integral_L("F1", k, m, cutoff=cutoff).value / I_value
