import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudostress import build_lame, generate_mesh, solve
from pseudostress.analysis import (
    CSV_COLUMNS,
    SCHEMA_VERSION,
    ConvergenceReport,
    StudyConfig,
    StudyError,
    fit_order,
    match_modes,
    relative_errors,
    run_study,
)

H3 = np.array([1 / 10, 1 / 20, 1 / 40])


def test_fit_exact_quadratic():
    f = fit_order(H3, 4 + H3**2)
    assert abs(f.alpha - 2.0) < 1e-6
    assert abs(f.omega_extr - 4.0) < 1e-9
    assert not f.saturated and f.monotone


def test_fit_fractional_order():
    h = np.array([1 / 10, 1 / 20, 1 / 30, 1 / 40])
    f = fit_order(h, 5 + 3 * h**1.14)
    assert abs(f.alpha - 1.14) < 1e-3
    assert abs(f.C - 3.0) < 1e-6


def test_fit_table_data():
    N = np.array([40, 50, 60, 70])
    f = fit_order(np.sqrt(2) / N, [4.19038, 4.19134, 4.19187, 4.19219])
    assert abs(f.alpha - 1.94) < 0.02
    assert abs(f.omega_extr - 4.19311) < 5e-4


@settings(max_examples=40, deadline=None)
@given(
    alpha=st.floats(0.5, 6.0),
    omega=st.floats(0.5, 50.0),
    C=st.floats(-5.0, 5.0).filter(lambda c: abs(c) > 0.05),
)
def test_fit_recovers_own_model(alpha, omega, C):
    h = np.array([0.2, 0.1, 0.05, 0.025])
    f = fit_order(h, omega + C * h**alpha)
    if f.residual < 1e-12 and not f.saturated:
        assert abs(f.alpha - alpha) < 1e-5
        assert abs(f.omega_extr - omega) < 1e-8 * omega


def test_fit_input_order_irrelevant():
    w = 4 + H3**2
    a, b = fit_order(H3, w), fit_order(H3[::-1], w[::-1])
    assert a == b


def test_fit_non_monotone_flagged():
    f = fit_order([0.1, 0.05, 0.025, 0.0125], [4.0, 4.1, 4.05, 4.07])
    assert not f.monotone
    assert math.isfinite(f.alpha)


def test_fit_saturation():
    h = np.array([0.1, 0.05, 0.025, 0.0125])
    w = 3.0 + 1e-6 * h**6
    f = fit_order(h, w)
    assert f.saturated
    assert f.levels_used < 4 or abs(w[-1] - f.omega_extr) / f.omega_extr < 1e-8


def test_fit_needs_three_levels():
    with pytest.raises(ValueError):
        fit_order([0.1, 0.05], [1.0, 1.1])


def test_extrapolate_stable_when_dropping_coarsest():
    h = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    w = 2.0 + 0.5 * h**2 + 0.01 * h**3
    full, fine = fit_order(h, w), fit_order(h[1:], w[1:])
    assert abs(full.omega_extr - fine.omega_extr) <= max(10 * full.residual, 1e-12)


def test_match_modes_identity_and_swap():
    levels = [np.array([1.0, 2.0, 2.0 + 1e-9, 3.0]), np.array([1.1, 2.1, 2.1, 3.1])]
    table = match_modes(levels, 4)
    np.testing.assert_array_equal(table[1], levels[1])
    swapped = [levels[0][[0, 2, 1, 3]], levels[1]]
    np.testing.assert_array_equal(match_modes(swapped, 4), table)
    with pytest.raises(StudyError):
        match_modes([np.array([1.0])], 2)


def test_match_keeps_pair_aligned():
    # square, nu = 0.49, k = 0: modes 2-3 are a repeated pair on every level
    sols = [solve(generate_mesh("square", N), 0, build_lame(1.0, 0.49), 4) for N in (8, 12, 16)]
    t = match_modes(sols, 4)
    np.testing.assert_allclose(t[:, 1], t[:, 2], rtol=1e-10)
    assert np.all(t[:, 2] < t[:, 3] * (1 - 1e-3))


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig("square", (0.35,), (0,), (10, 20))
    with pytest.raises(ValueError):
        StudyConfig("square", (0.35,), (0,), (10, 30, 20))
    with pytest.raises(ValueError):
        StudyConfig("square", (0.7,), (0,), (10, 20, 30))
    with pytest.raises(ValueError):
        StudyConfig("square", (0.3,), (3,), (10, 20, 30))
    with pytest.raises(ValueError):
        StudyConfig("imported", (0.3,), (0,), (1, 2, 3))


@pytest.fixture(scope="module")
def small_report():
    return run_study(StudyConfig("square", (0.35, 0.5), (0,), (4, 6, 8), nev=3))


def test_run_study_structure(small_report):
    r = small_report
    assert len(r.series) == 2 * 3
    assert [(s.nu, s.mode) for s in r.series] == [(0.35, 1), (0.35, 2), (0.35, 3), (0.5, 1), (0.5, 2), (0.5, 3)]
    for s in r.series:
        assert np.all(np.diff(s.h) < 0)
        assert s.fit.omega_extr > 0 and math.isfinite(s.fit.alpha)
        assert np.argmin(s.rel_err) == len(s.N) - 1


def test_workers_same_result(small_report):
    r2 = run_study(small_report.config, workers=2)
    assert r2.to_csv() == small_report.to_csv()
    assert r2.to_json() == small_report.to_json()


def test_csv_and_json(small_report):
    text = small_report.to_csv()
    lines = text.splitlines()
    assert lines[0] == f"# schema_version={SCHEMA_VERSION}"
    assert json.loads(lines[1].split("=", 1)[1])["N"] == [4, 6, 8]
    assert lines[2] == ",".join(CSV_COLUMNS)
    assert len(lines) == 3 + 2 * 3 * 3
    doc = json.loads(small_report.to_json())
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["config"]["domain"] == "square"
    assert len(doc["series"]) == 6


def test_format_table(small_report):
    text = small_report.format_table(0.35, 0)
    assert text.splitlines()[0] == "nu = 0.35, k = 0"
    assert "N=4" in text and "Order" in text and "Extr." in text
    with pytest.raises(KeyError):
        small_report.format_table(0.1, 0)


def test_relative_errors_synthetic():
    cfg = StudyConfig("square", (0.3,), (0,), (10, 20, 40), nev=1)
    from pseudostress.analysis import ModeSeries

    omega = 4 + 0.7 * H3**2
    ser = ModeSeries(nu=0.3, k=0, mode=1, N=(10, 20, 40), h=H3, omega=omega, fit=fit_order(H3, omega))
    rows = relative_errors(ConvergenceReport(cfg, [ser]))
    np.testing.assert_allclose([r["rel_err"] for r in rows], 0.7 * H3**2 / 4, rtol=1e-6)
    assert rows[-1]["ref"] == rows[-1]["rel_err"]
    assert all(r["rate"] == 2.0 for r in rows)


def test_relative_errors_table3_value():
    # square, k = 0, nu = 0.49, first mode at N = 40 against its extrapolate
    e = abs(4.18710 - 4.18858) / 4.18858
    assert abs(e - 3.5e-4) < 1e-5


def test_study_limit_square_fine_levels():
    r = run_study(StudyConfig("square", (0.5,), (0,), (40, 50, 60, 70), nev=4))
    alpha = [s.fit.alpha for s in r.series]
    np.testing.assert_allclose(alpha, [1.95, 2.00, 2.00, 1.99], atol=0.02)
    np.testing.assert_allclose([s.fit.omega_extr for s in r.series], [4.17711, 5.54149, 5.54149, 6.53732], atol=2e-5)


def test_study_disk_k2_order_cap():
    r = run_study(StudyConfig("disk", (0.49,), (2,), (10, 20, 30, 40), nev=3))
    for s in r.series:
        assert 1.9 <= s.fit.alpha <= 2.15
