"""Acceptance gate: every certification criterion, at full tolerance.

The whole battery runs once per session (a few minutes: it contains two
full passes for the determinism check) and each test below asserts one
criterion, printing its summary line.
"""

import pytest

from anisoflow.selftest import format_lines, run_selftest


@pytest.fixture(scope="session")
def battery():
    results = run_selftest(seed=0)
    lines = format_lines(results)
    return {r.index: (r, line) for r, line in zip(results, lines)}


def _check(battery, index):
    result, line = battery[index]
    print(line)
    assert result.passed, f"{line}  details: {result.details}"


def test_criterion_01_integration_by_parts_exact(battery):
    _check(battery, 1)


def test_criterion_02_certified_gap_closure(battery):
    _check(battery, 2)


def test_criterion_03_reference_minimizer_agreement(battery):
    _check(battery, 3)


def test_criterion_04_weak_solution_certificates(battery):
    _check(battery, 4)


def test_criterion_05_order_preservation(battery):
    _check(battery, 5)


def test_criterion_06_energy_dissipation(battery):
    _check(battery, 6)


def test_criterion_07_level_set_decomposition(battery):
    _check(battery, 7)


def test_criterion_08_trace_and_pairing_bounds(battery):
    _check(battery, 8)


def test_criterion_09_zero_trace_norm_bound(battery):
    _check(battery, 9)


def test_criterion_10_operator_monotonicity_probe(battery):
    _check(battery, 10)


def test_criterion_11_prox_kernel_bounds(battery):
    _check(battery, 11)


def test_criterion_12_determinism(battery):
    _check(battery, 12)
