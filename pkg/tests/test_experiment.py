"""
Test the empirical sums, the right-hand cores, diagnostics and full report runs.
"""
import io
import math

import numpy as np
import pytest
from pydantic import ValidationError
from sympy import isprime

from errors import DomainError, ResourceError
from experiment import (
    CSV_HEADER,
    ExperimentConfig,
    brun_titchmarsh_check,
    corollary_rhs_core,
    crude_bound,
    empirical_lhs,
    empirical_lhs_by_class,
    eq_error,
    metadata_path_for,
    read_report,
    run_report,
    scan_range,
    shared_primality,
    size_factor,
    theorem_rhs_core,
    write_csv_rows,
    write_report,
)
from series import bar_y
from tuples import build_context
from weights import build_majorant, build_weight_table, weight_w_block

PMAX = 10 ** 4


@pytest.fixture
def degenerate():
    """{0, 2, 6} at R = 10: support {(1, 1, 1)}, so w_n = lambda_1^2 off the zero rule."""
    ctx = build_context((0, 2, 6), x=1000, R=10)
    return ctx, build_weight_table(ctx, p_max=PMAX)


@pytest.fixture
def small_table():
    ctx = build_context((0, 2, 6), x=3000, R=300)
    return ctx, build_weight_table(ctx, p_max=PMAX)


def test_degenerate_lhs_all_forms(degenerate):
    """Test the weighted sum counts prime triples n, n+2, n+6 in (1000, 2000]."""
    ctx, table = degenerate
    triples = sum(1 for n in range(1001, 2001) if isprime(n) and isprime(n + 2) and isprime(n + 6))
    assert triples > 0
    lhs = empirical_lhs(ctx, table, 1000, (1, 2, 3), block_size=97)
    assert lhs == pytest.approx(table.lambda_one ** 2 * triples, rel=1e-12)


def test_degenerate_lhs_two_forms(degenerate):
    """Test twin primes count only when n + 6 is also free of primes of W."""
    ctx, table = degenerate
    W = ctx.W.value
    expected = sum(
        1 for n in range(1001, 2001)
        if isprime(n) and isprime(n + 2) and math.gcd(n + 6, W) == 1
    )
    lhs = empirical_lhs(ctx, table, 1000, (1, 2))
    assert lhs == pytest.approx(table.lambda_one ** 2 * expected, rel=1e-12)


def test_lhs_independent_of_workers(small_table):
    """Test block size and worker count leave the sum bit-identical."""
    ctx, table = small_table
    prim = shared_primality(ctx, 3000)
    a = empirical_lhs(ctx, table, 3000, (1, 2), primality=prim, block_size=500, workers=1)
    b = empirical_lhs(ctx, table, 3000, (1, 2), primality=prim, block_size=500, workers=4)
    assert a == b
    assert a >= 0.0


def test_lhs_by_class_sums_to_total(small_table):
    """Test the per-class split adds up to the full sum."""
    ctx, table = small_table
    parts = empirical_lhs_by_class(ctx, table, 3000, (1, 2))
    total = empirical_lhs(ctx, table, 3000, (1, 2))
    assert math.fsum(parts.values()) == pytest.approx(total, rel=1e-12)
    assert all(0 <= v0 < ctx.W.value for v0 in parts)


def test_lhs_rejects_small_x(degenerate):
    """Test x below 2 is a domain error."""
    ctx, table = degenerate
    with pytest.raises(DomainError):
        empirical_lhs(ctx, table, 1, (1, 2))


def test_scan_range_no_majorant_violations(small_table):
    """Test the majorant stays >= 1 on primes and the scan matches the plain sum."""
    ctx, table = small_table
    maj = build_majorant(ctx, 1, (1,), bar_y(ctx, (1,), PMAX))
    prim = shared_primality(ctx, 3000)
    scan = scan_range(ctx, table, maj, 3000, (1, 2), prim, block_size=700, workers=2)
    assert scan.majorant_violations == 0
    assert scan.lhs == empirical_lhs(ctx, table, 3000, (1, 2), primality=prim, block_size=700)
    expected_hits = sum(1 for n in range(3001, 6001) if isprime(n) and isprime(n + 2))
    assert scan.tuple_hits == expected_hits


@pytest.mark.slow
def test_scan_at_desk_scale():
    """Test x = 10^5 and R = 10^4 on {0, 2, 6}: no majorant violation, lambda keys below R, zero rule everywhere."""
    ctx = build_context((0, 2, 6), x=10 ** 5, R=10 ** 4)
    table = build_weight_table(ctx, p_max=PMAX)
    assert all(math.prod(d) < ctx.R for d in table.lambda_values)

    maj = build_majorant(ctx, 2, (1, 2), bar_y(ctx, (1, 2), PMAX))
    assert len(maj.support) > 1
    prim = shared_primality(ctx, 10 ** 5)
    scan = scan_range(ctx, table, maj, 10 ** 5, (1, 2), prim, workers=2)
    assert scan.majorant_violations == 0
    assert scan.tuple_hits > 1000
    assert scan.lhs > 0.0

    W = ctx.W.value
    for start in range(10 ** 5, 2 * 10 ** 5, 10 ** 4):
        ns = np.arange(start + 1, start + 10 ** 4 + 1, dtype=np.int64)
        weights = weight_w_block(ctx, table, ns)
        for n, w in zip(ns.tolist(), weights.tolist()):
            if math.gcd(n * (n + 2) * (n + 6), W) > 1:
                assert w == 0.0, n


def test_crude_bound_holds_with_all_forms(small_table):
    """Test the weighted sum over full prime tuples is below (sum |lambda|)^2 times their count."""
    ctx, table = small_table
    prim = shared_primality(ctx, 3000)
    maj = build_majorant(ctx, 2, (1, 2), bar_y(ctx, (1, 2), PMAX))
    scan = scan_range(ctx, table, maj, 3000, (1, 2, 3), prim)
    assert scan.lhs <= crude_bound(table, scan.tuple_hits) * (1 + 1e-9)


def test_theorem_core_over_corollary_core():
    """Test the two cores differ by exactly 9 for m = 1, B = 1 and no bad primes."""
    ctx = build_context((0, 2, 6), x=10 ** 5, R=10)
    y = bar_y(ctx, (1,), PMAX)
    corollary = corollary_rhs_core(ctx, 10 ** 5, 1, 0.05, 1.5)
    theorem = theorem_rhs_core(ctx, 10 ** 5, 1, (1, 2), 0.05, 1.5, bar_y_value=y)
    assert theorem / corollary == pytest.approx(9.0, rel=1e-9)


def test_size_factor_matches_x_log_x_power_at_default_level():
    """Test the size factor is x (log x)^k when R = x^(theta/3)."""
    for x in (10 ** 4, 10 ** 5, 10 ** 6):
        ctx = build_context((0, 2, 6), x=x)
        for m in (1, 2):
            assert size_factor(ctx, x, m) == pytest.approx(x * math.log(x) ** 3, rel=1e-9)


def test_size_factor_with_fixed_level():
    """Test only the (log x)^(m+1) factor follows x when R is set directly."""
    ctx = build_context((0, 2, 6), x=10 ** 5, R=1000)
    level = 3 * math.log(1000) / ctx.theta
    assert size_factor(ctx, 10 ** 5, 1) == pytest.approx(10 ** 5 * level ** 5 / math.log(10 ** 5) ** 2, rel=1e-12)
    growth = size_factor(ctx, 10 ** 6, 1) / size_factor(ctx, 10 ** 5, 1)
    assert growth == pytest.approx(10 * (math.log(10 ** 5) / math.log(10 ** 6)) ** 2, rel=1e-12)
    low = corollary_rhs_core(ctx, 10 ** 5, 1, 0.05, 1.5)
    high = corollary_rhs_core(ctx, 10 ** 6, 1, 0.05, 1.5)
    assert high / low == pytest.approx(growth, rel=1e-12)


def test_size_factor_needs_level_above_one():
    """Test R = 1 leaves no room for the log R power."""
    ctx = build_context((0, 2, 6), x=10 ** 5, R=1)
    with pytest.raises(DomainError):
        size_factor(ctx, 10 ** 5, 1)


def test_cores_need_k_at_least_three():
    """Test the log k / k factor is refused for k = 2."""
    ctx = build_context((0, 2), x=10 ** 5, R=10)
    with pytest.raises(DomainError):
        corollary_rhs_core(ctx, 10 ** 5, 1, 0.1, 1.3)


def test_eq_error():
    """Test the modulus 1 discrepancy vanishes and limits are enforced."""
    assert eq_error(10 ** 4, 1, 0) == 0.0
    assert eq_error(10 ** 4, 4, 0) >= 0.0
    with pytest.raises(DomainError):
        eq_error(10 ** 4, 0, 0)
    with pytest.raises(ResourceError):
        eq_error(10 ** 4, 10 ** 6, 0)


def test_brun_titchmarsh_count():
    """Test pi(2 * 10^4) - pi(10^4) and its ratio to x / log x."""
    result = brun_titchmarsh_check(10 ** 4, 0)
    assert result.count == 1033
    assert result.ratio == pytest.approx(1033 * math.log(10 ** 4) / 10 ** 4)
    with pytest.raises(DomainError):
        brun_titchmarsh_check(5, 0)


def test_config_validation(sample_config):
    """Test the config rejects bad tuples, moduli, indices, methods and levels."""
    ExperimentConfig(**sample_config)

    with pytest.raises(ValidationError, match="inadmissible: residues mod 3 fully covered"):
        ExperimentConfig(**{**sample_config, "offsets": [0, 2, 4]})
    with pytest.raises(ValidationError):
        ExperimentConfig(**{**sample_config, "B": 4})
    with pytest.raises(ValidationError):
        ExperimentConfig(**{**sample_config, "m": 3, "indices": [1, 2, 3, 4]})
    with pytest.raises(ValidationError):
        ExperimentConfig(**{**sample_config, "indices": [1]})
    with pytest.raises(ValidationError):
        ExperimentConfig(**{**sample_config, "indices": [2, 1]})
    with pytest.raises(ValidationError):
        ExperimentConfig(**{**sample_config, "integral_method": "simpson"})
    with pytest.raises(ValidationError):
        ExperimentConfig(**{**sample_config, "workers": 0})
    with pytest.raises(ValidationError):
        ExperimentConfig(**{**sample_config, "x_grid": [4000, 2000]})
    with pytest.raises(ValidationError, match="the level R must exceed 1"):
        ExperimentConfig(**{**sample_config, "R": 1})


def test_run_report_rows(sample_config):
    """Test a small run yields one valid row per grid point."""
    config = ExperimentConfig(**sample_config)
    report = run_report(config)

    assert [r.x for r in report.rows] == [2000, 4000]
    for row in report.rows:
        assert row.lhs >= 0.0
        assert row.majorant_violations == 0
        assert row.runtime_ms == 0
        assert row.fitted_D == pytest.approx(row.lhs / row.rhs_corollary_core)
    assert report.metadata["k"] == 3
    assert report.metadata["W"] == "2*3*5*7*11*13*17"
    assert report.metadata["corollary_regime"] is True
    assert report.metadata["per_x"]["2000"]["support_size"] > 1


def test_report_is_deterministic(sample_config):
    """Test two runs of one config give byte-identical CSV."""
    config = ExperimentConfig(**sample_config)
    first, second = io.StringIO(), io.StringIO()
    write_csv_rows(run_report(config), first)
    write_csv_rows(run_report(config), second)
    assert first.getvalue() == second.getvalue()
    assert first.getvalue().splitlines()[0] == ",".join(CSV_HEADER)


def test_report_files(sample_config, tmp_path):
    """Test writing and reading back the CSV and its metadata."""
    config = ExperimentConfig(**sample_config)
    report = run_report(config)
    csv_path = str(tmp_path / "out" / "report.csv")
    write_report(report, csv_path)

    loaded = read_report(csv_path, metadata_path_for(csv_path))
    assert loaded.rows == report.rows
    assert loaded.metadata["config"]["offsets"] == [0, 2, 6]


def test_run_report_records_to_db(sample_config, temp_db):
    """Test a finished run is stored with its rows."""
    config = ExperimentConfig(**sample_config)
    report = run_report(config, results_db=temp_db)

    runs = temp_db.list_runs(status="complete")
    assert len(runs) == 1
    rows = temp_db.get_run_rows(runs[0].id)
    assert [r.x for r in rows] == [2000, 4000]
    assert rows[0].lhs == report.rows[0].lhs


def test_run_report_failure_names_x(sample_config, temp_db):
    """Test a support over the cap aborts at the first x and is stored as failed."""
    config = ExperimentConfig(**{**sample_config, "max_support": 5})
    with pytest.raises(ResourceError, match="experiment failed at x=2000"):
        run_report(config, results_db=temp_db)

    failed = temp_db.list_runs(status="failed")
    assert len(failed) == 1
    assert failed[0].failed_x == 2000
    assert temp_db.list_runs(status="complete") == []


@pytest.mark.slow
def test_fitted_constant_stable_across_x():
    """Test fitted_D at x = 10^5 and 10^6 agree within a factor of 2 for {0, 2, 6}, m = 1, R fixed."""
    config = ExperimentConfig(
        offsets=[0, 2, 6],
        R=1000,
        x_grid=[10 ** 5, 10 ** 6],
        m=1,
        indices=[1, 2],
        integral_budget=200000,
        seed=20240101,
        series_pmax=10 ** 5,
    )
    report = run_report(config)
    low, high = report.rows
    assert low.lhs >= 0.0 and high.lhs >= 0.0
    assert high.lhs >= low.lhs
    assert 0.5 <= high.fitted_D / low.fitted_D <= 2
