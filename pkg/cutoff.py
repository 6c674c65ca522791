"""
The smooth cutoff psi and the sieve functions F, F1, F2.

psi is 1 on [0, plateau_end], 0 on [support_end, inf) and bridges the gap with
the C-infinity partition-of-unity step sigma(u) = f(u) / (f(u) + f(1 - u)),
f(u) = exp(-1/u) for u > 0 and 0 otherwise.
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from errors import DomainError

logger = logging.getLogger("SieveLab.cutoff")

# below this distance from the bridge ends sigma is clamped to 0 or 1
CLAMP = 1e-12

FAMILIES = ("F", "F1", "F2")


@dataclass(frozen=True)
class CutoffSpec:
    plateau_end: float = 0.9
    support_end: float = 1.0

    def __post_init__(self):
        if not 0 <= self.plateau_end < self.support_end:
            raise DomainError(f"need 0 <= plateau_end < support_end: {self}")

    @property
    def width(self) -> float:
        return self.support_end - self.plateau_end


DEFAULT_CUTOFF = CutoffSpec()


@dataclass(frozen=True)
class SieveFunctionParams:
    k: int
    cutoff: CutoffSpec = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")

    @property
    def T(self) -> float:
        return self.k * math.log(self.k)

    @property
    def U(self) -> float:
        return self.k ** -0.5


def _sigma(u: float) -> float:
    if u < CLAMP:
        return 0.0
    if u > 1.0 - CLAMP:
        return 1.0
    a = math.exp(-1.0 / u)
    b = math.exp(-1.0 / (1.0 - u))
    return a / (a + b)


def psi(t: float, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> float:
    if t < 0:
        raise DomainError(f"psi is defined on [0, inf), got {t}")
    if t <= cutoff.plateau_end:
        return 1.0
    if t >= cutoff.support_end:
        return 0.0
    return _sigma((cutoff.support_end - t) / cutoff.width)


def psi_array(t: np.ndarray, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> np.ndarray:
    """Vectorized psi; same clamping as the scalar version."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("psi is defined on [0, inf)")
    u = np.clip((cutoff.support_end - t) / cutoff.width, 0.0, 1.0)
    inner = (u >= CLAMP) & (u <= 1.0 - CLAMP)
    safe = np.where(inner, u, 0.5)
    a = np.exp(-1.0 / safe)
    b = np.exp(-1.0 / (1.0 - safe))
    out = np.where(u > 1.0 - CLAMP, 1.0, 0.0)
    return np.where(inner, a / (a + b), out)


def coordinate_factor(t: float, params: SieveFunctionParams) -> float:
    """g(t) = psi(t / U_k) / (1 + T_k t), the per-coordinate factor of F and F1."""
    return psi(t / params.U, params.cutoff) / (1.0 + params.T * t)


def distinguished_factor(t: float, params: SieveFunctionParams) -> float:
    """H(t) = psi(t / 2) / (1 + T_k t), the distinguished coordinate of F2."""
    return psi(t / 2.0, params.cutoff) / (1.0 + params.T * t)


def eval_family(kind: str, t: Sequence[float], params: SieveFunctionParams) -> float:
    """F, F1 or F2 at a point t of dimension k, evaluated straight from the definition."""
    if kind not in FAMILIES:
        raise DomainError(f"unknown sieve function {kind!r}, expected one of {FAMILIES}")
    if len(t) != params.k:
        raise DomainError(f"point has dimension {len(t)}, expected k={params.k}")
    if any(ti < 0 for ti in t):
        raise DomainError("sieve functions are defined on non-negative coordinates")

    if kind == "F2":
        total = 0.0
        for j in range(params.k):
            term = distinguished_factor(t[j], params)
            for i in range(params.k):
                if i != j:
                    term *= coordinate_factor(t[i], params)
            total += term
        return total

    value = math.prod(coordinate_factor(ti, params) for ti in t)
    if kind == "F":
        value *= psi(math.fsum(t), params.cutoff)
    return value


def f2_factored(t: Sequence[float], params: SieveFunctionParams) -> float:
    """F2 through prefix and suffix products of g, so each coordinate is evaluated once."""
    if len(t) != params.k:
        raise DomainError(f"point has dimension {len(t)}, expected k={params.k}")
    g = [coordinate_factor(ti, params) for ti in t]
    h = [distinguished_factor(ti, params) for ti in t]
    prefix = [1.0]
    for value in g:
        prefix.append(prefix[-1] * value)
    suffix = [1.0]
    for value in reversed(g):
        suffix.append(suffix[-1] * value)
    suffix.reverse()
    return sum(h[j] * prefix[j] * suffix[j + 1] for j in range(params.k))


def coordinate_factor_array(t: np.ndarray, params: SieveFunctionParams) -> np.ndarray:
    return psi_array(t / params.U, params.cutoff) / (1.0 + params.T * t)


def distinguished_factor_array(t: np.ndarray, params: SieveFunctionParams) -> np.ndarray:
    return psi_array(t / 2.0, params.cutoff) / (1.0 + params.T * t)


def eval_F_batch(points: np.ndarray, params: SieveFunctionParams) -> np.ndarray:
    """F on an (N, k) array of points."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != params.k:
        raise DomainError(f"expected an (N, {params.k}) array, got shape {points.shape}")
    per_coord = np.prod(coordinate_factor_array(points, params), axis=1)
    return psi_array(points.sum(axis=1), params.cutoff) * per_coord
