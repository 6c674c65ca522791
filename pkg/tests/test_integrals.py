"""
Test I_k(F), L_k(F1) and L_k(F2).
"""
import math

import pytest
from scipy import integrate

from cutoff import SieveFunctionParams, psi
from errors import DomainError, UnsupportedMethodError
from integrals import (
    MONTE_CARLO,
    QUADRATURE,
    coordinate_integral,
    decay_ratio,
    factor_integrals,
    integral_F1_squared,
    integral_I,
    integral_L,
)


def test_one_dimensional_integral():
    """Test I_1(F) = int psi^4 lies between the plateau and the support."""
    est = integral_I(1, method=QUADRATURE)
    assert 0.9 <= est.value <= 1.0
    assert est.method == QUADRATURE
    assert est.std_error == 0.0


def test_coordinate_integral_up_to_k_100():
    """Test int g = log(1 + 0.9 U T)/T on the plateau plus the bridge, for every k <= 100."""
    for k in range(1, 101):
        params = SieveFunctionParams(k)
        T, U = params.T, params.U
        if T == 0.0:
            plateau, full = 0.9 * U, U
        else:
            plateau, full = math.log1p(0.9 * U * T) / T, math.log1p(U * T) / T
        bridge = integrate.quad(
            lambda t: psi(t / U) / (1.0 + T * t), 0.9 * U, U, epsabs=0.0, epsrel=1e-12, limit=200
        )[0]
        value = coordinate_integral(k)
        assert plateau <= value <= full, k
        assert value == pytest.approx(plateau + bridge, rel=1e-7), k


def test_factor_integrals_k1():
    """Test T_1 = 0 and U_1 = 1 give int g = int psi."""
    fi = factor_integrals(1)
    assert 0.9 <= fi.A <= 1.0
    assert coordinate_integral(1) == fi.A
    assert 0.9 <= fi.G2 <= fi.A
    # H is psi(t/2) on [0, 2]
    assert 1.8 <= fi.C <= 2.0


def test_quadrature_below_F1_bound():
    """Test I_k(F) <= int F1^2 since F <= F1."""
    est = integral_I(2, method=QUADRATURE)
    assert 0.0 < est.value <= integral_F1_squared(2) + 1e-9


def test_monte_carlo_is_deterministic():
    """Test the same seed gives bit-identical estimates for any worker count."""
    a = integral_I(3, method=MONTE_CARLO, budget=20000, seed=42, chunk_size=4096)
    b = integral_I(3, method=MONTE_CARLO, budget=20000, seed=42, chunk_size=4096)
    c = integral_I(3, method=MONTE_CARLO, budget=20000, seed=42, chunk_size=4096, workers=3)
    assert a.value == b.value == c.value
    assert a.std_error == c.std_error
    assert a.seed == 42
    assert a.samples_or_nodes == 20000

    d = integral_I(3, method=MONTE_CARLO, budget=20000, seed=43, chunk_size=4096)
    assert d.value != a.value


@pytest.mark.slow
def test_monte_carlo_ten_million_samples():
    """Test 10^7 samples for k = 2 land within 3 standard errors of quadrature, and two seeds agree."""
    quad = integral_I(2, method=QUADRATURE)
    a = integral_I(2, method=MONTE_CARLO, budget=10 ** 7, seed=2024)
    b = integral_I(2, method=MONTE_CARLO, budget=10 ** 7, seed=2025)
    assert a.samples_or_nodes == 10 ** 7
    assert abs(a.value - quad.value) <= 3 * a.std_error + 1e-7
    assert abs(a.value - b.value) <= 6 * math.hypot(a.std_error, b.std_error)


@pytest.mark.slow
def test_monte_carlo_matches_quadrature():
    """Test the importance-sampled estimate against nested quadrature for k = 2 and 3."""
    for k in (2, 3):
        quad = integral_I(k, method=QUADRATURE)
        mc = integral_I(k, method=MONTE_CARLO, budget=200000, seed=1)
        assert abs(mc.value - quad.value) <= 5 * mc.std_error + 1e-6


def test_unsupported_methods():
    """Test quadrature refuses k > 4 and unknown methods are rejected."""
    with pytest.raises(UnsupportedMethodError):
        integral_I(5, method=QUADRATURE)
    with pytest.raises(UnsupportedMethodError):
        integral_I(2, method="simpson")
    with pytest.raises(DomainError):
        integral_I(2, budget=0)


def test_L_argument_checks():
    """Test kind and m validation."""
    with pytest.raises(DomainError):
        integral_L("F", 4, 1)
    with pytest.raises(DomainError):
        integral_L("F1", 2, 2)
    with pytest.raises(DomainError):
        integral_L("F1", 2, -1)


def test_L_full_inner_block():
    """Test m + 1 = k leaves no outer integral: L(F1) = (int g)^(2k)."""
    fi = factor_integrals(2)
    est = integral_L("F1", 2, 1)
    assert est.value == pytest.approx(fi.A ** 4)
    # no outer coordinates, so Monte Carlo falls back to the closed form
    assert integral_L("F1", 2, 1, method=MONTE_CARLO).method == QUADRATURE


def test_L_closed_form_matches_monte_carlo():
    """Test the closed forms of L(F1) and L(F2) against sampling the outer coordinates."""
    for kind in ("F1", "F2"):
        closed = integral_L(kind, 4, 1)
        mc = integral_L(kind, 4, 1, method=MONTE_CARLO, budget=100000, seed=9)
        assert abs(mc.value - closed.value) <= 5 * mc.std_error + 1e-9 * closed.value


def test_F2_dominates_F1():
    """Test L(F2) >= (m+1)^2 L(F1) coefficientwise, since every term is non-negative."""
    for k in (3, 4, 6):
        l1 = integral_L("F1", k, 1).value
        l2 = integral_L("F2", k, 1).value
        assert l2 >= 4 * l1 > 0.0


def test_decay_ratio_validation():
    """Test a non-positive I_k(F) is refused."""
    with pytest.raises(DomainError):
        decay_ratio(4, 1, 0.0)


@pytest.mark.slow
def test_decay_trend():
    """Test L(F1)/I decreases in k and L(F2)/(k^2 L(F1)) stays bounded."""
    ratios = []
    f2_ratios = []
    for k in (4, 9, 16, 25):
        I_est = integral_I(k, method=MONTE_CARLO, budget=200000, seed=k)
        ratios.append(decay_ratio(k, 1, I_est.value))
        l1 = integral_L("F1", k, 1).value
        l2 = integral_L("F2", k, 1).value
        f2_ratios.append(l2 / (k * k * l1))

    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert 0.1 < ratios[0] < 0.3
    assert max(f2_ratios) < 10 * min(f2_ratios)
